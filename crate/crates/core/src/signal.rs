//! Observation model, covariance estimation and side-information weighting.
//!
//! Every covariance here uses the sample-average normalization `1/N`, also for
//! the weighted estimate. The distortionless beamformers built from these
//! matrices are invariant to a positive rescaling of the covariance, so the
//! choice between `1/N` and `1/sum(alpha)` has no effect on the filters; `1/N`
//! keeps the unit-weight case bitwise identical to the plain sample covariance.

use std::fmt;
use std::io::{Read, Write};
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, CMat, CVec, C64, DIAGONAL_LOADING};

/// `K` mixtures observed by `d` sensors over `N` samples.
///
/// Mixture `k` is stored as a `d x N` matrix whose column `n` is `x^[k](n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTensor {
    mixtures: Vec<CMat>,
}

impl MixtureTensor {
    pub fn new(mixtures: Vec<CMat>) -> Result<Self> {
        let first = mixtures
            .first()
            .ok_or_else(|| Error::invalid("at least one mixture is required"))?;
        let (d, n) = first.shape();
        if d < 2 {
            return Err(Error::invalid(format!("need at least 2 channels, got {d}")));
        }
        if n < 1 {
            return Err(Error::invalid("need at least one sample"));
        }
        for (k, m) in mixtures.iter().enumerate() {
            if m.shape() != (d, n) {
                return Err(Error::invalid(format!(
                    "mixture {k} has shape {:?}, expected {:?}",
                    m.shape(),
                    (d, n)
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid(format!(
                    "mixture {k} has non-finite samples"
                )));
            }
        }
        Ok(Self { mixtures })
    }

    /// Number of mixtures `K`.
    pub fn k(&self) -> usize {
        self.mixtures.len()
    }

    /// Number of channels `d`.
    pub fn d(&self) -> usize {
        self.mixtures[0].nrows()
    }

    /// Number of samples `N`.
    pub fn n_samples(&self) -> usize {
        self.mixtures[0].ncols()
    }

    pub fn mixture(&self, k: usize) -> &CMat {
        &self.mixtures[k]
    }

    pub fn mixtures(&self) -> &[CMat] {
        &self.mixtures
    }

    pub fn into_mixtures(self) -> Vec<CMat> {
        self.mixtures
    }

    /// Sub-tensor made of the listed mixtures, in order.
    pub fn select(&self, ks: &[usize]) -> Result<Self> {
        Self::new(ks.iter().map(|&k| self.mixtures[k].clone()).collect())
    }
}

/// Mixing vector `a = [gamma; g]` of the source of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingVector(CVec);

impl MixingVector {
    pub fn new(a: CVec) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::invalid("mixing vector needs at least 2 entries"));
        }
        if !(a.norm() > 0.0) || !a.norm().is_finite() {
            return Err(Error::invalid(
                "mixing vector must have finite nonzero norm",
            ));
        }
        Ok(Self(a))
    }

    /// First entry.
    pub fn gamma(&self) -> C64 {
        self.0[0]
    }

    /// Remaining `d - 1` entries.
    pub fn g(&self) -> CVec {
        self.0.rows(1, self.0.len() - 1).into_owned()
    }

    pub fn as_vec(&self) -> &CVec {
        &self.0
    }

    pub fn into_inner(self) -> CVec {
        self.0
    }
}

impl Deref for MixingVector {
    type Target = CVec;
    fn deref(&self) -> &CVec {
        &self.0
    }
}

/// Separating vector `w`; the extracted signal is `w^H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingVector(CVec);

impl SeparatingVector {
    pub fn new(w: CVec) -> Result<Self> {
        if !(w.norm() > 0.0) || !w.norm().is_finite() {
            return Err(Error::invalid(
                "separating vector must have finite nonzero norm",
            ));
        }
        Ok(Self(w))
    }

    /// `w^H x(n)` for every column of `x`.
    pub fn apply(&self, x: &CMat) -> Vec<C64> {
        let wc = self.0.conjugate();
        x.tr_mul(&wc).iter().copied().collect()
    }

    pub fn as_vec(&self) -> &CVec {
        &self.0
    }

    pub fn into_inner(self) -> CVec {
        self.0
    }
}

impl Deref for SeparatingVector {
    type Target = CVec;
    fn deref(&self) -> &CVec {
        &self.0
    }
}

/// Weighting function `alpha(r)` applied to the guide signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WeightFunction {
    /// `1 / (eps + |r|^2)`.
    ReciprocalPower,
    /// `1` where `|r|^2 <= threshold`, `0` elsewhere.
    BinaryMask { threshold: f64 },
    /// `alpha = 1`; the weighted covariance reduces to the sample covariance.
    Unit,
}

impl WeightFunction {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "reciprocal" | "reciprocal-power" => Ok(Self::ReciprocalPower),
            "binary-mask" => Ok(Self::BinaryMask { threshold: 0.0 }),
            "unit" | "identity" => Ok(Self::Unit),
            other => Err(Error::invalid(format!("unknown weight function '{other}'"))),
        }
    }

    pub fn eval(&self, r: C64, eps: f64) -> f64 {
        let p = r.norm_sqr();
        match *self {
            WeightFunction::ReciprocalPower => 1.0 / (eps + p),
            WeightFunction::BinaryMask { threshold } => {
                if p <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::Unit => 1.0,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::ReciprocalPower => write!(f, "reciprocal-power"),
            WeightFunction::BinaryMask { threshold } => write!(f, "binary-mask({threshold})"),
            WeightFunction::Unit => write!(f, "unit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Guide {
    Shared(Vec<C64>),
    PerMixture(Vec<Vec<C64>>),
}

/// Scalar guide signals `r_k(n)` together with the weighting function.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    guide: Guide,
    epsilon: f64,
    weighting: WeightFunction,
}

/// Relative size of the default regularizer w.r.t. `mean |r|^2`.
pub const DEFAULT_EPSILON_RATIO: f64 = 1e-3;
/// Absolute floor of the default regularizer.
pub const EPSILON_FLOOR: f64 = 1e-9;

impl SideInfo {
    /// One guide signal shared by every mixture.
    pub fn shared(r: Vec<C64>) -> Result<Self> {
        Self::build(Guide::Shared(r))
    }

    /// One guide signal per mixture; all rows must have equal length.
    pub fn per_mixture(rows: Vec<Vec<C64>>) -> Result<Self> {
        let n = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("no guide rows"))?;
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("guide rows differ in length"));
        }
        Self::build(Guide::PerMixture(rows))
    }

    fn build(guide: Guide) -> Result<Self> {
        let (sum, count, all_zero) = {
            let it: Box<dyn Iterator<Item = &C64>> = match &guide {
                Guide::Shared(r) => Box::new(r.iter()),
                Guide::PerMixture(rows) => Box::new(rows.iter().flatten()),
            };
            it.fold((0.0, 0usize, true), |(s, c, z), v| {
                (s + v.norm_sqr(), c + 1, z && v.norm_sqr() == 0.0)
            })
        };
        if count == 0 {
            return Err(Error::invalid("empty guide signal"));
        }
        if !sum.is_finite() {
            return Err(Error::invalid("guide signal has non-finite values"));
        }
        if all_zero {
            return Err(Error::DegenerateWeights(
                "guide signal is identically zero".into(),
            ));
        }
        let epsilon = (DEFAULT_EPSILON_RATIO * sum / count as f64).max(EPSILON_FLOOR);
        Ok(Self {
            guide,
            epsilon,
            weighting: WeightFunction::ReciprocalPower,
        })
    }

    /// Overrides the regularizer; it must be strictly positive.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "weighting epsilon must be positive, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_weighting(mut self, weighting: WeightFunction) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weighting(&self) -> WeightFunction {
        self.weighting
    }

    pub fn is_shared(&self) -> bool {
        matches!(self.guide, Guide::Shared(_))
    }

    pub fn len(&self) -> usize {
        match &self.guide {
            Guide::Shared(r) => r.len(),
            Guide::PerMixture(rows) => rows[0].len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of distinct guide rows (1 when shared).
    pub fn rows(&self) -> usize {
        match &self.guide {
            Guide::Shared(_) => 1,
            Guide::PerMixture(rows) => rows.len(),
        }
    }

    pub fn guide(&self, k: usize) -> &[C64] {
        match &self.guide {
            Guide::Shared(r) => r,
            Guide::PerMixture(rows) => &rows[k],
        }
    }

    /// `alpha(r_k(n))`.
    pub fn weight(&self, k: usize, n: usize) -> f64 {
        self.weighting.eval(self.guide(k)[n], self.epsilon)
    }

    /// All weights of mixture `k`.
    pub fn weights(&self, k: usize) -> Vec<f64> {
        self.guide(k)
            .iter()
            .map(|&r| self.weighting.eval(r, self.epsilon))
            .collect()
    }

    /// Checks that this side information fits a `K x N` tensor.
    pub fn check_against(&self, x: &MixtureTensor) -> Result<()> {
        if self.len() != x.n_samples() {
            return Err(Error::invalid(format!(
                "guide length {} does not match {} samples",
                self.len(),
                x.n_samples()
            )));
        }
        if !self.is_shared() && self.rows() != x.k() {
            return Err(Error::invalid(format!(
                "{} guide rows for {} mixtures",
                self.rows(),
                x.k()
            )));
        }
        Ok(())
    }
}

fn accumulate(block: &CMat, weights: Option<&[f64]>) -> CMat {
    let n = block.ncols();
    let mut c = match weights {
        None => block * block.adjoint(),
        Some(w) => {
            let mut scaled = block.clone();
            for (mut col, &wn) in scaled.column_iter_mut().zip(w) {
                col *= C64::new(wn, 0.0);
            }
            scaled * block.adjoint()
        }
    };
    c /= C64::new(n as f64, 0.0);
    symmetrize(&mut c);
    c
}

/// `(1/N) sum_n x(n) x(n)^H`, exactly Hermitian.
pub fn sample_covariance(block: &CMat) -> Result<CMat> {
    if block.ncols() == 0 || block.nrows() == 0 {
        return Err(Error::invalid("empty data block"));
    }
    Ok(accumulate(block, None))
}

/// `(1/N) sum_n alpha_n x(n) x(n)^H` for nonnegative weights.
pub fn weighted_covariance(block: &CMat, weights: &[f64]) -> Result<CMat> {
    if block.ncols() == 0 || block.nrows() == 0 {
        return Err(Error::invalid("empty data block"));
    }
    if weights.len() != block.ncols() {
        return Err(Error::invalid(format!(
            "{} weights for {} samples",
            weights.len(),
            block.ncols()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::DegenerateWeights(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    Ok(accumulate(block, Some(weights)))
}

/// Per-mixture sample and weighted covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub cx: Vec<CMat>,
    pub calpha: Vec<CMat>,
    /// Relative diagonal loading applied when these matrices are inverted.
    pub loading: f64,
}

impl CovarianceSet {
    /// Estimates `C_x` and, if side information is given, `C_alpha`; without it
    /// `C_alpha` is a copy of `C_x`.
    pub fn estimate(x: &MixtureTensor, side: Option<&SideInfo>) -> Result<Self> {
        if let Some(side) = side {
            side.check_against(x)?;
        }
        let pairs: Vec<Result<(CMat, CMat)>> = (0..x.k())
            .into_par_iter()
            .map(|k| {
                let block = x.mixture(k);
                let cx = sample_covariance(block)?;
                let calpha = match side {
                    Some(side) => weighted_covariance(block, &side.weights(k))?,
                    None => cx.clone(),
                };
                Ok((cx, calpha))
            })
            .collect();
        let mut cx = Vec::with_capacity(x.k());
        let mut calpha = Vec::with_capacity(x.k());
        for p in pairs {
            let (a, b) = p?;
            cx.push(a);
            calpha.push(b);
        }
        Ok(Self {
            cx,
            calpha,
            loading: DIAGONAL_LOADING,
        })
    }

    pub fn k(&self) -> usize {
        self.cx.len()
    }

    pub fn to_json_container(&self) -> CovarianceContainer {
        CovarianceContainer {
            k: self.k(),
            d: self.cx.first().map_or(0, |m| m.nrows()),
            loading: self.loading,
            cx: self.cx.iter().map(to_pairs).collect(),
            calpha: self.calpha.iter().map(to_pairs).collect(),
        }
    }

    pub fn from_json_container(c: CovarianceContainer) -> Result<Self> {
        if c.cx.len() != c.k || c.calpha.len() != c.k {
            return Err(Error::invalid(
                "covariance container: K does not match entries",
            ));
        }
        let cx =
            c.cx.iter()
                .map(|m| from_pairs(m, c.d))
                .collect::<Result<Vec<_>>>()?;
        let calpha = c
            .calpha
            .iter()
            .map(|m| from_pairs(m, c.d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cx,
            calpha,
            loading: c.loading,
        })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_json_container())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_json_container(serde_json::from_reader(r)?)
    }
}

/// JSON layout of a [`CovarianceSet`]: k-indexed lists of row-major
/// `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceContainer {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub loading: f64,
    pub cx: Vec<Vec<[f64; 2]>>,
    pub calpha: Vec<Vec<[f64; 2]>>,
}

fn to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn from_pairs(v: &[[f64; 2]], d: usize) -> Result<CMat> {
    if v.len() != d * d {
        return Err(Error::invalid(format!(
            "covariance container: expected {} entries, got {}",
            d * d,
            v.len()
        )));
    }
    Ok(CMat::from_row_iterator(
        d,
        d,
        v.iter().map(|p| C64::new(p[0], p[1])),
    ))
}
