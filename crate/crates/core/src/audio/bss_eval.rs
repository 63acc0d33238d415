//! Projection-based source separation scores (SDR, SIR, SAR).
//!
//! The estimate is split into a target part (projection onto delayed copies
//! of the target reference, i.e. a time-invariant FIR distortion), an
//! interference part (projection onto delayed copies of all references minus
//! the target part) and an artifact remainder.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dsp::{convolve, xcorr};
use crate::error::{Error, Result};
use crate::sim::ratio_db;

pub const DEFAULT_TAPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub sdr_db: f64,
    pub sir_db: f64,
    pub sar_db: f64,
}

struct Projector<'a> {
    refs: &'a [Vec<f64>],
    taps: usize,
    // cross-correlations c_ij(l), l in -(taps-1)..=(taps-1)
    corr: Vec<Vec<Vec<f64>>>,
}

impl<'a> Projector<'a> {
    fn new(refs: &'a [Vec<f64>], taps: usize) -> Self {
        let corr = refs
            .iter()
            .map(|a| refs.iter().map(|b| xcorr(a, b, taps - 1)).collect())
            .collect();
        Self { refs, taps, corr }
    }

    /// Projection of `e` (length `len + taps - 1`) onto delayed copies of the
    /// references in `which`.
    fn project(&self, e: &[f64], which: &[usize]) -> Result<Vec<f64>> {
        let t = self.taps;
        let dim = which.len() * t;
        let off = t - 1;
        let gram = DMatrix::from_fn(dim, dim, |r, c| {
            let (i, t1) = (which[r / t], r % t);
            let (j, t2) = (which[c / t], c % t);
            // sum_n s_i(n - t1) s_j(n - t2) = c_ij(t1 - t2)
            self.corr[i][j][(t1 as isize - t2 as isize + off as isize) as usize]
        });
        let mut rhs = DVector::zeros(dim);
        for (b, &j) in which.iter().enumerate() {
            let c = xcorr(&self.refs[j], e, t - 1);
            for tau in 0..t {
                rhs[b * t + tau] = c[off + tau];
            }
        }
        let scale = (0..dim).map(|i| gram[(i, i)]).sum::<f64>() / dim as f64;
        let mut ridge = 1e-12 * scale;
        let coef = loop {
            let mut g = gram.clone();
            for i in 0..dim {
                g[(i, i)] += ridge;
            }
            if let Some(ch) = g.cholesky() {
                break ch.solve(&rhs);
            }
            ridge *= 100.0;
            if ridge > scale {
                return Err(Error::invalid("reference signals are degenerate"));
            }
        };
        let mut out = vec![0.0; e.len()];
        for (b, &j) in which.iter().enumerate() {
            let h: Vec<f64> = (0..t).map(|tau| coef[b * t + tau]).collect();
            for (o, v) in out.iter_mut().zip(convolve(&self.refs[j], &h)) {
                *o += v;
            }
        }
        Ok(out)
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Scores of `estimate` against `references[target]`, the other references
/// counting as interference. `taps` is the allowed distortion filter length.
pub fn evaluate_bss(
    references: &[Vec<f64>],
    target: usize,
    estimate: &[f64],
    taps: usize,
) -> Result<EvalScores> {
    if target >= references.len() {
        return Err(Error::invalid("target index out of range"));
    }
    if taps == 0 {
        return Err(Error::invalid("distortion filter needs at least one tap"));
    }
    let len = estimate.len();
    if references.iter().any(|r| r.len() != len) {
        return Err(Error::invalid(format!(
            "length mismatch: estimate has {len} samples, references {:?}",
            references.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    if references.iter().any(|r| energy(r) <= 0.0) {
        return Err(Error::invalid("zero-energy reference"));
    }
    if references
        .iter()
        .flatten()
        .chain(estimate)
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid("non-finite sample"));
    }
    let mut e = estimate.to_vec();
    e.resize(len + taps - 1, 0.0);
    let proj = Projector::new(references, taps);
    let s_target = proj.project(&e, &[target])?;
    let all: Vec<usize> = (0..references.len()).collect();
    let p_all = proj.project(&e, &all)?;
    let e_interf: Vec<f64> = p_all.iter().zip(&s_target).map(|(a, b)| a - b).collect();
    let e_artif: Vec<f64> = e.iter().zip(&p_all).map(|(a, b)| a - b).collect();
    let e_total: Vec<f64> = e.iter().zip(&s_target).map(|(a, b)| a - b).collect();
    let t_energy = energy(&s_target);
    Ok(EvalScores {
        sdr_db: ratio_db(t_energy, energy(&e_total)),
        sir_db: ratio_db(t_energy, energy(&e_interf)),
        sar_db: ratio_db(energy(&p_all), energy(&e_artif)),
    })
}
