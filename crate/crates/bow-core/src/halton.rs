//! Halton low-discrepancy sequences with optional random-shift scrambling.
//!
//! Used for the initial control samples of a planning round and for the
//! candidate set of the acquisition maximizer. A Cranley-Patterson rotation
//! (seeded random shift modulo 1) decorrelates repeated uses while keeping
//! the low-discrepancy structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASES: [u64; 4] = [2, 3, 5, 7];

/// Radical inverse of `index` in the given base, in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base) as f64 * inv;
        index /= base;
        inv /= base as f64;
    }
    result
}

/// Unshifted Halton point; prefix sequences are nested, which some
/// convergence tests rely on.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= BASES.len(), "halton sequence supports up to {} dims", BASES.len());
    (0..dim).map(|d| radical_inverse(index + 1, BASES[d])).collect()
}

/// Seed-scrambled Halton stream over the unit cube.
#[derive(Clone, Debug)]
pub struct ScrambledHalton {
    dim: usize,
    shift: Vec<f64>,
    next_index: u64,
}

impl ScrambledHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= BASES.len(), "halton sequence supports up to {} dims", BASES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        ScrambledHalton { dim, shift, next_index: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for ScrambledHalton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let index = self.next_index;
        self.next_index += 1;
        Some(
            (0..self.dim)
                .map(|d| {
                    let x = radical_inverse(index + 1, BASES[d]) + self.shift[d];
                    x.fract()
                })
                .collect(),
        )
    }
}
