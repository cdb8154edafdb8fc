//! Small geometric primitives shared by the kinematics and world modules.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A workspace position in 2 or 3 dimensions.
///
/// Stored as a fixed array so states can hand out positions without
/// allocating; only the first `dim` coordinates are meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T = f64> {
    coords: [T; 3],
    dim: usize,
}

impl<T: Real> Point<T> {
    pub fn new2(x: T, y: T) -> Self {
        Point { coords: [x, y, T::zero()], dim: 2 }
    }

    pub fn new3(x: T, y: T, z: T) -> Self {
        Point { coords: [x, y, z], dim: 3 }
    }

    /// Builds a point from a 2- or 3-element slice.
    pub fn from_slice(coords: &[T]) -> Option<Self> {
        match coords {
            [x, y] => Some(Self::new2(*x, *y)),
            [x, y, z] => Some(Self::new3(*x, *y, *z)),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords[..self.dim]
    }

    pub fn distance_to(&self, other: &[T]) -> T {
        dist(self.as_slice(), other)
    }
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, d| acc + d)
        .sqrt()
}

/// Axis-aligned box, used for workspace bounds and obstacle extents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T = f64> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec<T>, max: Vec<T>) -> Self {
        Aabb { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn is_valid(&self) -> bool {
        self.min.len() == self.max.len()
            && !self.min.is_empty()
            && self.min.iter().zip(&self.max).all(|(lo, hi)| lo < hi)
    }

    pub fn contains(&self, point: &[T]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .enumerate()
                .all(|(i, p)| self.min[i] <= *p && *p <= self.max[i])
    }

    /// Signed distance from a point to the box surface (negative inside).
    pub fn signed_distance(&self, point: &[T]) -> T {
        // Per-axis distance past the surface; negative on axes where the
        // point is between the faces.
        let mut outside_sq = T::zero();
        let mut inside = T::neg_infinity();
        for i in 0..self.dim() {
            let d = (self.min[i] - point[i]).max(point[i] - self.max[i]);
            if d > T::zero() {
                outside_sq += d * d;
            }
            inside = inside.max(d);
        }
        outside_sq.sqrt() + inside.min(T::zero())
    }

    /// Smallest box enclosing both operands.
    pub fn union(&self, other: &Aabb<T>) -> Aabb<T> {
        Aabb {
            min: self
                .min
                .iter()
                .zip(&other.min)
                .map(|(&a, &b)| a.min(b))
                .collect(),
            max: self
                .max
                .iter()
                .zip(&other.max)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        }
    }
}
