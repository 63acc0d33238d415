//! Seeded random sources used by the simulators and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{CMat, CVec, C64};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Circular complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_gaussian(rng))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill so results do not depend on iteration order changes in nalgebra
    let data: Vec<C64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    CMat::from_vec(rows, cols, data)
}

/// Uniformly distributed point on the unit sphere of `C^n`.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    loop {
        let v = complex_gaussian_vec(rng, n);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / C64::new(norm, 0.0);
        }
    }
}

pub fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Random Hermitian positive-definite matrix `G G^H + shift I`.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, d: usize, shift: f64) -> CMat {
    let g = complex_gaussian_matrix(rng, d, d);
    let mut m = &g * g.adjoint();
    for i in 0..d {
        m[(i, i)] += C64::new(shift, 0.0);
    }
    crate::linalg::symmetrize(&mut m);
    m
}
