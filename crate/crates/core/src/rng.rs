//! Seedable, splittable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by its lineage
//! `(master seed, trial index, purpose tag)`. Keys are derived with a
//! SplitMix64 mixer, so the stream of trial `t` is available without drawing
//! through trials `0..t`, and child streams ([`RngStream::fork`]) depend only on
//! the parent's key, never on how much of the parent has been consumed.
//!
//! Gaussian draws use the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::vector::Vector;

#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    key: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a; stable across builds and platforms.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix(acc ^ splitmix(p)))
}

impl RngStream {
    /// Stream for `(master seed, trial, purpose)`.
    pub fn new(master_seed: u64, trial: u64, purpose: &str) -> Self {
        Self::from_key(mix(&[master_seed, trial, tag_hash(purpose)]))
    }

    fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut s = key;
        for chunk in seed.chunks_mut(8) {
            s = splitmix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        RngStream {
            rng: ChaCha8Rng::from_seed(seed),
            key,
        }
    }

    /// Independent child stream; pure in `(self's lineage, tag, index)`.
    pub fn fork(&self, tag: &str, index: u64) -> RngStream {
        Self::from_key(mix(&[self.key, tag_hash(tag), index]))
    }

    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..pool`. `pool` must be positive.
    pub fn index(&mut self, pool: usize) -> usize {
        self.rng.random_range(0..pool)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// `n` i.i.d. standard normal draws.
    pub fn standard_normal(&mut self, n: usize) -> Vector {
        Vector::from_vec_unchecked((0..n).map(|_| self.normal()).collect())
    }

    pub(crate) fn fill_normal(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.normal();
        }
    }

    /// Uniform point on the unit sphere in `R^n` (normalized Gaussian).
    pub fn unit_sphere(&mut self, n: usize) -> Vector {
        let mut buf = vec![0.0; n];
        self.fill_unit_sphere(&mut buf);
        Vector::from_vec_unchecked(buf)
    }

    pub(crate) fn fill_unit_sphere(&mut self, out: &mut [f64]) {
        loop {
            self.fill_normal(out);
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm >= 1e-12 {
                out.iter_mut().for_each(|v| *v /= norm);
                return;
            }
        }
    }

    /// `k` distinct indices drawn uniformly from `0..pool`.
    pub fn sample_without_replacement(&mut self, pool: usize, k: usize) -> Result<Vec<usize>> {
        if k > pool {
            return invalid(format!("cannot draw {k} distinct items from {pool}"));
        }
        Ok(index::sample(&mut self.rng, pool, k).into_vec())
    }

    /// Index `i` with probability `weights[i] / sum(weights)`.
    pub fn categorical(&mut self, weights: &[f64]) -> Result<usize> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("categorical weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return invalid("categorical weights sum to zero");
        }
        let target = self.uniform01() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if target < acc {
                    return Ok(i);
                }
            }
        }
        // rounding can leave target == total
        Ok(last_positive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lineage_reproduces() {
        let mut a = RngStream::new(7, 3, "solver");
        let mut b = RngStream::new(7, 3, "solver");
        assert_eq!(a.standard_normal(100), b.standard_normal(100));
    }

    #[test]
    fn lineage_components_matter() {
        let base = RngStream::new(7, 3, "solver").standard_normal(4);
        assert_ne!(base, RngStream::new(8, 3, "solver").standard_normal(4));
        assert_ne!(base, RngStream::new(7, 4, "solver").standard_normal(4));
        assert_ne!(base, RngStream::new(7, 3, "problem").standard_normal(4));
    }

    #[test]
    fn fork_is_independent_of_parent_consumption() {
        let a = RngStream::new(1, 0, "p");
        let mut b = RngStream::new(1, 0, "p");
        b.standard_normal(50);
        assert_eq!(
            a.fork("run", 2).standard_normal(8),
            b.fork("run", 2).standard_normal(8)
        );
        assert_ne!(
            a.fork("run", 2).standard_normal(8),
            a.fork("run", 3).standard_normal(8)
        );
    }

    #[test]
    fn without_replacement_edge_cases() {
        let mut s = RngStream::new(0, 0, "idx");
        let mut perm = s.sample_without_replacement(5, 5).unwrap();
        perm.sort();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
        assert!(s.sample_without_replacement(10, 0).unwrap().is_empty());
        assert!(s.sample_without_replacement(3, 4).is_err());
    }

    #[test]
    fn categorical_rejects_bad_weights() {
        let mut s = RngStream::new(0, 0, "cat");
        assert!(s.categorical(&[0.0, 0.0]).is_err());
        assert!(s.categorical(&[1.0, -0.5]).is_err());
        assert!(s.categorical(&[]).is_err());
        for _ in 0..1000 {
            assert_eq!(s.categorical(&[0.0, 1.0]).unwrap(), 1);
        }
    }

    #[test]
    fn unit_sphere_has_unit_norm() {
        let mut s = RngStream::new(0, 0, "sphere");
        for n in [1, 2, 10, 100] {
            let u = s.unit_sphere(n);
            assert!((u.norm() - 1.0).abs() < 1e-12);
        }
    }
}
