//! Bounding-volume hierarchy over obstacle AABBs for nearest-distance
//! queries on large obstacle sets.

use crate::geometry::Aabb;
use crate::scalar::Real;

use super::{signed_distance, Obstacle};

#[derive(Clone, Debug)]
enum Node<T> {
    Leaf { obstacles: Vec<usize> },
    Branch { left: usize, right: usize, aabb_left: Aabb<T>, aabb_right: Aabb<T> },
}

/// Static median-split BVH. Obstacle AABB signed distance lower-bounds the
/// exact signed distance (the shape is contained in its box), which makes
/// branch-and-bound pruning correct even for query points inside obstacles.
#[derive(Clone, Debug)]
pub struct Bvh<T = f64> {
    nodes: Vec<Node<T>>,
    root: usize,
    root_aabb: Aabb<T>,
}

const LEAF_SIZE: usize = 4;

impl<T: Real> Bvh<T> {
    pub fn build(obstacles: &[Obstacle<T>]) -> Self {
        assert!(!obstacles.is_empty(), "BVH needs at least one obstacle");
        let boxes: Vec<Aabb<T>> = obstacles.iter().map(|o| o.aabb()).collect();
        let mut nodes = Vec::new();
        let mut indices: Vec<usize> = (0..obstacles.len()).collect();
        let root_aabb = enclose(&boxes, &indices);
        let root = build_node(&mut nodes, &boxes, &mut indices);
        Bvh { nodes, root, root_aabb }
    }

    /// Minimum signed distance over all obstacles and its argmin index.
    pub fn nearest(&self, point: &[T], obstacles: &[Obstacle<T>]) -> (T, usize) {
        let mut best = (T::infinity(), usize::MAX);
        self.visit(self.root, &self.root_aabb, point, obstacles, &mut best);
        best
    }

    fn visit(
        &self,
        node: usize,
        aabb: &Aabb<T>,
        point: &[T],
        obstacles: &[Obstacle<T>],
        best: &mut (T, usize),
    ) {
        if aabb.signed_distance(point) >= best.0 {
            return;
        }
        match &self.nodes[node] {
            Node::Leaf { obstacles: members } => {
                for &i in members {
                    let d = signed_distance(point, &obstacles[i])
                        .expect("dimension checked at world construction");
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Branch { left, right, aabb_left, aabb_right } => {
                // Descend into the closer child first for tighter pruning.
                let dl = aabb_left.signed_distance(point);
                let dr = aabb_right.signed_distance(point);
                if dl <= dr {
                    self.visit(*left, aabb_left, point, obstacles, best);
                    self.visit(*right, aabb_right, point, obstacles, best);
                } else {
                    self.visit(*right, aabb_right, point, obstacles, best);
                    self.visit(*left, aabb_left, point, obstacles, best);
                }
            }
        }
    }
}

fn enclose<T: Real>(boxes: &[Aabb<T>], indices: &[usize]) -> Aabb<T> {
    let mut out = boxes[indices[0]].clone();
    for &i in &indices[1..] {
        out = out.union(&boxes[i]);
    }
    out
}

fn build_node<T: Real>(
    nodes: &mut Vec<Node<T>>,
    boxes: &[Aabb<T>],
    indices: &mut [usize],
) -> usize {
    if indices.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { obstacles: indices.to_vec() });
        return nodes.len() - 1;
    }
    let aabb = enclose(boxes, indices);
    // Split on the longest axis at the median box center.
    let axis = (0..aabb.dim())
        .max_by(|&a, &b| {
            (aabb.max[a] - aabb.min[a])
                .partial_cmp(&(aabb.max[b] - aabb.min[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let center = |i: usize| boxes[i].min[axis] + boxes[i].max[axis];
    indices.sort_by(|&a, &b| {
        center(a)
            .partial_cmp(&center(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mid = indices.len() / 2;
    let (lo, hi) = indices.split_at_mut(mid);
    let aabb_left = enclose(boxes, lo);
    let aabb_right = enclose(boxes, hi);
    let left = build_node(nodes, boxes, lo);
    let right = build_node(nodes, boxes, hi);
    nodes.push(Node::Branch { left, right, aabb_left, aabb_right });
    nodes.len() - 1
}
