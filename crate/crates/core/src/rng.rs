//! Seeded random inputs: initial guesses and test data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kron_linalg::thin_qr;
use crate::{CMat, CVec, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of independent standard complex Gaussians.
pub fn random_cmat(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut g = rng(seed);
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(&mut g))
}

pub fn random_cvec(len: usize, seed: u64) -> CVec {
    let mut g = rng(seed);
    CVec::from_fn(len, |_, _| complex_gaussian(&mut g))
}

/// Orthonormalized complex Gaussian `n×r` matrix.
pub fn random_orthonormal(n: usize, r: usize, seed: u64) -> CMat {
    thin_qr(&random_cmat(n, r, seed)).expect("n >= r").q
}
