#![allow(dead_code)]

use pgopt::problems::qp::{gen_boxqp, gen_convex_qp, BoxQP};
use pgopt::RngStream;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson statistic of `counts` against probabilities `probs`.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper `alpha` critical value with `dof` degrees of freedom.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(1.0 - alpha)
}

pub fn assert_fits(counts: &[u64], probs: &[f64], alpha: f64) {
    let stat = chi_square(counts, probs);
    let crit = chi_square_critical(probs.len() - 1, alpha);
    assert!(stat <= crit, "chi-square {stat} > {crit}; counts {counts:?} vs {probs:?}");
}

pub fn qp(n: usize, seed: u64) -> BoxQP {
    gen_boxqp(n, -5.0, 5.0, &mut RngStream::new(seed, 0, "qp")).unwrap()
}

pub fn convex_qp(n: usize, seed: u64) -> BoxQP {
    gen_convex_qp(n, -5.0, 5.0, &mut RngStream::new(seed, 0, "qp")).unwrap()
}
