//! Closed-form distortionless beamformers and the couplings between the
//! mixing vector and the separating vector.
//!
//! MVDR and MPDR share one formula, `w = M^{-1} a / (a^H M^{-1} a)`; they differ
//! only in which covariance `M` is supplied (noise covariance or observation
//! covariance). The orthogonal constraint is MPDR applied to sample estimates,
//! and the informed constraint replaces the sample covariance by the weighted
//! one.

use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, CVec, LoadedHermitian, C64};
use crate::signal::{MixingVector, SeparatingVector};

/// Distortionless beamformer together with its normalizer `a^H M^{-1} a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerOutput {
    pub w: SeparatingVector,
    pub denom: C64,
}

/// Distortionless beamformer for an already factored covariance.
pub fn distortionless(m: &LoadedHermitian, a: &CVec) -> Result<BeamformerOutput> {
    if a.len() != m.dim() {
        return Err(Error::invalid(format!(
            "mixing vector of length {} for a {}x{} covariance",
            a.len(),
            m.dim(),
            m.dim()
        )));
    }
    let u = m.solve(a);
    let denom = a.dotc(&u);
    if !(denom.norm() > 0.0) || !denom.re.is_finite() || !denom.im.is_finite() {
        return Err(Error::DegenerateFilter { power: denom.re });
    }
    let w = u / denom.conj();
    Ok(BeamformerOutput {
        w: SeparatingVector::new(w)?,
        denom,
    })
}

/// Minimum variance distortionless beamformer `C_y^{-1} a / (a^H C_y^{-1} a)`.
pub fn mvdr(c_y: &CMat, a: &MixingVector) -> Result<BeamformerOutput> {
    distortionless(&LoadedHermitian::new(c_y)?, a)
}

/// Minimum power distortionless beamformer `C_x^{-1} a / (a^H C_x^{-1} a)`.
pub fn mpdr(c_x: &CMat, a: &MixingVector) -> Result<BeamformerOutput> {
    distortionless(&LoadedHermitian::new(c_x)?, a)
}

/// Orthogonal constraint: the separating vector implied by `a_hat` when the
/// extracted signal must be uncorrelated with the background estimates.
pub fn oc_constraint(c_x_hat: &CMat, a_hat: &MixingVector) -> Result<SeparatingVector> {
    Ok(mpdr(c_x_hat, a_hat)?.w)
}

/// Informed constraint: MPDR with the weighted covariance in place of the
/// sample covariance, an MVDR estimate when `C_alpha` tracks the noise.
pub fn mvdr_constraint(c_alpha: &CMat, a_hat: &MixingVector) -> Result<SeparatingVector> {
    Ok(mvdr(c_alpha, a_hat)?.w)
}

/// `a = C_x w / (w^H C_x w)`, the mixing vector for which `w` satisfies the
/// orthogonal constraint. Zeroes the sample cross-covariance between the
/// extracted signal and the background estimates.
pub fn reproject_mixing(c_x_hat: &CMat, w_hat: &SeparatingVector) -> Result<MixingVector> {
    let power = quad_form(c_x_hat, w_hat);
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::DegenerateFilter { power });
    }
    MixingVector::new(c_x_hat * w_hat.as_vec() / C64::new(power, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cosine_similarity;
    use crate::rng::{complex_gaussian_vec, random_hpd, seeded};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn mv(v: &[C64]) -> MixingVector {
        MixingVector::new(CVec::from_vec(v.to_vec())).unwrap()
    }

    #[test]
    fn identity_covariance() {
        let out = mvdr(&CMat::identity(3, 3), &mv(&[c(1.), c(0.), c(0.)])).unwrap();
        for (i, v) in out.w.iter().enumerate() {
            let e = if i == 0 { 1.0 } else { 0.0 };
            assert!((v - c(e)).norm() < 1e-8);
        }
        let out = mpdr(&CMat::identity(2, 2), &mv(&[c(1.), c(1.)])).unwrap();
        assert!((out.w[0] - c(0.5)).norm() < 1e-8);
        assert!((out.w[1] - c(0.5)).norm() < 1e-8);
    }

    #[test]
    fn diagonal_hand_value() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.), c(2.)]));
        let out = mvdr(&m, &mv(&[c(1.), c(1.)])).unwrap();
        assert!((out.w[0] - c(2.0 / 3.0)).norm() < 1e-8);
        assert!((out.w[1] - c(1.0 / 3.0)).norm() < 1e-8);
        assert!((out.denom - c(1.5)).norm() < 1e-8);
    }

    #[test]
    fn mpdr_and_mvdr_share_formula_bitwise() {
        let mut rng = seeded(4);
        let m = random_hpd(&mut rng, 4, 0.1);
        let a = MixingVector::new(complex_gaussian_vec(&mut rng, 4)).unwrap();
        assert_eq!(mpdr(&m, &a).unwrap(), mvdr(&m, &a).unwrap());
        assert_eq!(oc_constraint(&m, &a).unwrap(), mpdr(&m, &a).unwrap().w);
    }

    #[test]
    fn distortionless_and_scale_invariance() {
        let mut rng = seeded(9);
        for _ in 0..100 {
            let m = random_hpd(&mut rng, 5, 0.05);
            let a = MixingVector::new(complex_gaussian_vec(&mut rng, 5)).unwrap();
            let w = mvdr_constraint(&m, &a).unwrap();
            assert!((w.dotc(&a) - c(1.0)).norm() < 1e-10);
            let scaled = mvdr(&(&m * c(37.5)), &a).unwrap().w;
            assert!((scaled.as_vec() - w.as_vec()).norm() < 1e-12 * w.norm().max(1.0) * 10.0);
        }
    }

    #[test]
    fn oc_homogeneity() {
        let mut rng = seeded(10);
        let m = random_hpd(&mut rng, 3, 0.1);
        let a = complex_gaussian_vec(&mut rng, 3);
        let k = C64::new(0.3, -1.7);
        let w1 = oc_constraint(&m, &MixingVector::new(a.clone()).unwrap()).unwrap();
        let w2 = oc_constraint(&m, &MixingVector::new(&a * k).unwrap()).unwrap();
        let expect = w1.as_vec() / k.conj();
        assert!((w2.as_vec() - &expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn reprojection_round_trip() {
        let mut rng = seeded(12);
        for _ in 0..20 {
            let m = random_hpd(&mut rng, 4, 0.1);
            let w = SeparatingVector::new(complex_gaussian_vec(&mut rng, 4)).unwrap();
            let a = reproject_mixing(&m, &w).unwrap();
            let back = mpdr(&m, &a).unwrap().w;
            assert!((cosine_similarity(back.as_vec(), w.as_vec()) - 1.0).abs() < 1e-10);
        }
        let a = reproject_mixing(
            &CMat::identity(2, 2),
            &SeparatingVector::new(CVec::from_vec(vec![c(1.), c(0.)])).unwrap(),
        )
        .unwrap();
        assert_eq!(a.as_vec().as_slice(), &[c(1.), c(0.)]);
    }

    #[test]
    fn zero_power_filter_rejected() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.), c(0.)]));
        let w = SeparatingVector::new(CVec::from_vec(vec![c(0.), c(1.)])).unwrap();
        assert!(matches!(
            reproject_mixing(&m, &w),
            Err(Error::DegenerateFilter { .. })
        ));
    }

    #[test]
    fn singular_covariance_rejected() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.), c(0.)]));
        assert!(matches!(
            mvdr(&m, &mv(&[c(1.), c(1.)])),
            Err(Error::SingularCovariance { .. })
        ));
    }
}
