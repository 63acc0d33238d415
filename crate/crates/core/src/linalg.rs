//! Small dense complex linear algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative diagonal loading applied before every Hermitian solve.
pub const DIAGONAL_LOADING: f64 = 1e-9;

/// Condition estimate above which a loaded covariance is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Replaces `m` by `(m + m^H) / 2`, making it exactly Hermitian.
pub fn symmetrize(m: &mut CMat) {
    let d = m.nrows();
    for i in 0..d {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..d {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Real part of the trace.
pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// `v^H m v`, real part (the matrix is assumed Hermitian).
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    v.dotc(&(m * v)).re
}

/// `1 - |<a, b>| / (|a| |b|)`: phase-invariant direction change.
pub fn direction_change(a: &CVec, b: &CVec) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 1.0;
    }
    (1.0 - a.dotc(b).norm() / denom).max(0.0)
}

/// `|<a, b>| / (|a| |b|)`.
pub fn cosine_similarity(a: &CVec, b: &CVec) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    a.dotc(b).norm() / denom
}

/// A Hermitian positive-definite matrix factored once with diagonal loading.
///
/// The condition estimate is taken on the matrix before loading.
#[derive(Debug, Clone)]
pub struct LoadedHermitian {
    chol: Cholesky<C64, Dyn>,
    loading: f64,
    cond: f64,
}

impl LoadedHermitian {
    pub fn new(m: &CMat) -> Result<Self> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularCovariance {
                cond: f64::INFINITY,
            });
        }
        let eig = m.clone().symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::SingularCovariance { cond });
        }
        let loading = DIAGONAL_LOADING * trace_re(m) / d as f64;
        let mut loaded = m.clone();
        for i in 0..d {
            loaded[(i, i)] += C64::new(loading, 0.0);
        }
        let chol = Cholesky::new(loaded).ok_or(Error::SingularCovariance { cond })?;
        Ok(Self {
            chol,
            loading,
            cond,
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Magnitude added to the diagonal before factoring.
    pub fn loading(&self) -> f64 {
        self.loading
    }

    pub fn condition(&self) -> f64 {
        self.cond
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.chol.solve(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_makes_exact_hermitian() {
        let mut m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.1),
                C64::new(2.0, 1.0),
                C64::new(2.2, -0.8),
                C64::new(3.0, 0.0),
            ],
        );
        symmetrize(&mut m);
        assert_eq!(m, m.adjoint());
        assert_eq!(m[(0, 1)], C64::new(2.1, 0.9));
    }

    #[test]
    fn rejects_singular() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        assert!(matches!(
            LoadedHermitian::new(&m),
            Err(Error::SingularCovariance { .. })
        ));
        let z = CMat::zeros(3, 3);
        assert!(LoadedHermitian::new(&z).is_err());
    }

    #[test]
    fn solves_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let f = LoadedHermitian::new(&m).unwrap();
        let x = f.solve(&CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        assert!((x[0].re - 1.0).abs() < 1e-8);
        assert!((x[1].re - 0.5).abs() < 1e-8);
        assert!((f.condition() - 2.0).abs() < 1e-6);
    }
}
