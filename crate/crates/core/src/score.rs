//! Source-model score functions, the step statistics `nu`/`rho`, and the
//! likelihood contrast used as a diagnostic.
//!
//! Scores follow `phi_k = -d/ds_k log f`, with the Wirtinger derivative taken
//! w.r.t. `s_k` (not its conjugate). For circular densities
//! `f(s) ∝ exp(-G(|s_1|^2 + ... + |s_K|^2))` this gives
//! `phi_k(s) = conj(s_k) G'(u)`, `u = sum_j |s_j|^2`, and the statistics
//!
//! * `nu_k  = E[(s_k / sigma_k) phi_k]`  (equals 1 for the Gaussian model),
//! * `rho_k = E[d phi_k / d conj(s_k)] = E[G'(u) + |s_k|^2 G''(u)]`.
//!
//! The Gaussian model therefore has `nu = rho = 1`, which is the usual
//! non-identifiability of Gaussian sources.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extractor::BlockingMatrix;
use crate::linalg::{quad_form, CMat, LoadedHermitian, C64};
use crate::signal::{sample_covariance, MixingVector, MixtureTensor, SeparatingVector};

/// Default smoothing constant of the norm score.
pub const DEFAULT_SCORE_EPS: f64 = 1e-6;

/// A score function of a `K`-dimensional normalized source vector.
pub trait ScoreFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// `phi_k(s)` for every `k`.
    fn phi(&self, s: &[C64], out: &mut [C64]);

    /// `d phi_k / d conj(s_k)` for every `k`.
    fn dphi_conj(&self, s: &[C64], out: &mut [C64]);

    /// `log f(s)` up to an additive constant.
    fn log_density(&self, s: &[C64]) -> f64;
}

/// Circular model described by the radial function `G` of `u = |s|^2`.
trait Radial {
    /// `G'(u)`.
    fn g(&self, u: f64) -> f64;
    /// `G''(u)`.
    fn dg(&self, u: f64) -> f64;
    /// `G(u)`.
    fn big_g(&self, u: f64) -> f64;
}

fn radial_phi<R: Radial>(r: &R, s: &[C64], out: &mut [C64]) {
    let u: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    let g = r.g(u);
    for (o, z) in out.iter_mut().zip(s) {
        *o = z.conj() * g;
    }
}

fn radial_dphi<R: Radial>(r: &R, s: &[C64], out: &mut [C64]) {
    let u: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    let g = r.g(u);
    let dg = r.dg(u);
    for (o, z) in out.iter_mut().zip(s) {
        *o = C64::new(g + z.norm_sqr() * dg, 0.0);
    }
}

fn radial_log_density<R: Radial>(r: &R, s: &[C64]) -> f64 {
    -r.big_g(s.iter().map(|z| z.norm_sqr()).sum())
}

/// `f ∝ exp(-2 sqrt(eps + |s|^2))`, giving `phi_k = conj(s_k) / sqrt(eps + |s|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSmooth {
    pub eps: f64,
}

impl Default for NormSmooth {
    fn default() -> Self {
        Self {
            eps: DEFAULT_SCORE_EPS,
        }
    }
}

impl Radial for NormSmooth {
    fn g(&self, u: f64) -> f64 {
        1.0 / (self.eps + u).sqrt()
    }
    fn dg(&self, u: f64) -> f64 {
        -0.5 / (self.eps + u).powf(1.5)
    }
    fn big_g(&self, u: f64) -> f64 {
        2.0 * (self.eps + u).sqrt()
    }
}

/// Circular Gaussian model, `phi_k = conj(s_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gauss;

impl Radial for Gauss {
    fn g(&self, _u: f64) -> f64 {
        1.0
    }
    fn dg(&self, _u: f64) -> f64 {
        0.0
    }
    fn big_g(&self, u: f64) -> f64 {
        u
    }
}

/// Radial model whose `G'` is tabulated on knots `u_0 = 0 < u_1 < ...` and
/// interpolated with a natural cubic spline (linear beyond the last knot).
#[derive(Debug, Clone, PartialEq)]
pub struct TableScore {
    u: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>,
    cum: Vec<f64>,
}

impl TableScore {
    pub fn new(u: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if u.len() != g.len() || u.len() < 2 {
            return Err(Error::invalid("score table needs at least two (u, g) rows"));
        }
        if u[0] != 0.0 {
            return Err(Error::invalid("score table must start at u = 0"));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "score table knots must be strictly increasing",
            ));
        }
        if u.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::invalid("score table has non-finite entries"));
        }
        let n = u.len();
        // natural spline second derivatives via the Thomas algorithm
        let mut m = vec![0.0; n];
        if n > 2 {
            let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut sup = vec![0.0; n];
            for i in 1..n - 1 {
                diag[i] = (h[i - 1] + h[i]) / 3.0;
                sup[i] = h[i] / 6.0;
                rhs[i] = (g[i + 1] - g[i]) / h[i] - (g[i] - g[i - 1]) / h[i - 1];
            }
            for i in 2..n - 1 {
                let f = (h[i - 1] / 6.0) / diag[i - 1];
                diag[i] -= f * sup[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
            }
        }
        let mut table = Self {
            u,
            g,
            m,
            cum: vec![0.0; n],
        };
        for i in 1..n {
            let prev = table.cum[i - 1];
            table.cum[i] = prev + table.segment_integral(i - 1, table.u[i]);
        }
        Ok(table)
    }

    /// Reads `u,g` rows; a non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut u = Vec::new();
        let mut g = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (a, b) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::invalid(format!(
                        "score table line {}: expected u,g",
                        i + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    u.push(a);
                    g.push(b);
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::invalid(format!(
                        "score table line {}: not numeric",
                        i + 1
                    )))
                }
            }
        }
        Self::new(u, g)
    }

    fn segment(&self, x: f64) -> usize {
        match self.u.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.u.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.u.len() - 2),
        }
    }

    fn coeffs(&self, i: usize) -> (f64, f64, f64) {
        let h = self.u[i + 1] - self.u[i];
        let a = self.g[i] / h - self.m[i] * h / 6.0;
        let b = self.g[i + 1] / h - self.m[i + 1] * h / 6.0;
        (h, a, b)
    }

    fn segment_integral(&self, i: usize, x: f64) -> f64 {
        let (h, a, b) = self.coeffs(i);
        let t = x - self.u[i];
        let tau = self.u[i + 1] - x;
        self.m[i] * (h.powi(4) - tau.powi(4)) / (24.0 * h)
            + self.m[i + 1] * t.powi(4) / (24.0 * h)
            + a * (h * h - tau * tau) / 2.0
            + b * t * t / 2.0
    }

    fn end_slope(&self) -> f64 {
        let i = self.u.len() - 2;
        let (h, a, b) = self.coeffs(i);
        self.m[i + 1] * h / 2.0 - a + b
    }
}

impl Radial for TableScore {
    fn g(&self, x: f64) -> f64 {
        let last = *self.u.last().unwrap();
        if x > last {
            return self.g.last().unwrap() + self.end_slope() * (x - last);
        }
        let i = self.segment(x);
        let (h, a, b) = self.coeffs(i);
        let t = x - self.u[i];
        let tau = self.u[i + 1] - x;
        self.m[i] * tau.powi(3) / (6.0 * h)
            + self.m[i + 1] * t.powi(3) / (6.0 * h)
            + a * tau
            + b * t
    }

    fn dg(&self, x: f64) -> f64 {
        let last = *self.u.last().unwrap();
        if x > last {
            return self.end_slope();
        }
        let i = self.segment(x);
        let (h, a, b) = self.coeffs(i);
        let t = x - self.u[i];
        let tau = self.u[i + 1] - x;
        -self.m[i] * tau * tau / (2.0 * h) + self.m[i + 1] * t * t / (2.0 * h) - a + b
    }

    fn big_g(&self, x: f64) -> f64 {
        let n = self.u.len();
        let last = self.u[n - 1];
        if x > last {
            let t = x - last;
            return self.cum[n - 1] + self.g[n - 1] * t + self.end_slope() * t * t / 2.0;
        }
        let i = self.segment(x);
        self.cum[i] + self.segment_integral(i, x)
    }
}

/// Registered score functions.
#[derive(Debug, Clone)]
pub enum Score {
    NormSmooth(NormSmooth),
    Gauss(Gauss),
    Table(Arc<TableScore>),
}

impl Default for Score {
    fn default() -> Self {
        Score::NormSmooth(NormSmooth::default())
    }
}

impl Score {
    /// Names accepted by [`Score::from_name`].
    pub const NAMES: [&'static str; 3] = ["norm-smooth", "gauss", "custom-table"];

    /// Resolves a registered name; `custom-table` requires a table file.
    pub fn from_name(name: &str, table: Option<&Path>) -> Result<Self> {
        match name {
            "norm-smooth" => Ok(Score::default()),
            "gauss" => Ok(Score::Gauss(Gauss)),
            "custom-table" => {
                let path = table
                    .ok_or_else(|| Error::invalid("score 'custom-table' needs a table file"))?;
                Ok(Score::Table(Arc::new(TableScore::from_csv(path)?)))
            }
            other => Err(Error::invalid(format!(
                "unknown score '{other}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

impl ScoreFunction for Score {
    fn name(&self) -> &str {
        match self {
            Score::NormSmooth(_) => "norm-smooth",
            Score::Gauss(_) => "gauss",
            Score::Table(_) => "custom-table",
        }
    }

    fn phi(&self, s: &[C64], out: &mut [C64]) {
        match self {
            Score::NormSmooth(r) => radial_phi(r, s, out),
            Score::Gauss(r) => radial_phi(r, s, out),
            Score::Table(r) => radial_phi(r.as_ref(), s, out),
        }
    }

    fn dphi_conj(&self, s: &[C64], out: &mut [C64]) {
        match self {
            Score::NormSmooth(r) => radial_dphi(r, s, out),
            Score::Gauss(r) => radial_dphi(r, s, out),
            Score::Table(r) => radial_dphi(r.as_ref(), s, out),
        }
    }

    fn log_density(&self, s: &[C64]) -> f64 {
        match self {
            Score::NormSmooth(r) => radial_log_density(r, s),
            Score::Gauss(r) => radial_log_density(r, s),
            Score::Table(r) => radial_log_density(r.as_ref(), s),
        }
    }
}

/// The default vector nonlinearity `conj(s_k) / sqrt(eps + sum_j |s_j|^2)`.
pub fn phi_default(s: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::default(); s.len()];
    radial_phi(&NormSmooth::default(), s, &mut out);
    out
}

/// Normalized extracted signals `s_k(n) / sigma_k`, one row per mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSourceVector {
    pub sbar: CMat,
    pub sigma: Vec<f64>,
}

impl NormalizedSourceVector {
    /// Builds the normalized outputs of filters `w` with `sigma_k^2 = w^H C_x w`.
    pub fn from_filters(x: &MixtureTensor, w: &[SeparatingVector], cx: &[CMat]) -> Result<Self> {
        let (k, n) = (x.k(), x.n_samples());
        if w.len() != k || cx.len() != k {
            return Err(Error::invalid("filter/covariance count does not match K"));
        }
        let mut sbar = CMat::zeros(k, n);
        let mut sigma = Vec::with_capacity(k);
        for i in 0..k {
            let p = quad_form(&cx[i], &w[i]);
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::DegenerateFilter { power: p });
            }
            let sg = p.sqrt();
            for (j, v) in w[i].apply(x.mixture(i)).into_iter().enumerate() {
                sbar[(i, j)] = v / sg;
            }
            sigma.push(sg);
        }
        Ok(Self { sbar, sigma })
    }

    pub fn k(&self) -> usize {
        self.sbar.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.sbar.ncols()
    }
}

/// Scores and score derivatives evaluated on every sample, `K x N` each.
#[derive(Debug, Clone)]
pub struct ScoreEvaluation {
    pub phi: CMat,
    pub dphi_conj: CMat,
}

/// Evaluates the (K-coupled) score column by column.
pub fn evaluate_score(sbar: &NormalizedSourceVector, score: &dyn ScoreFunction) -> ScoreEvaluation {
    let (k, n) = (sbar.k(), sbar.n_samples());
    let mut phi = CMat::zeros(k, n);
    let mut dphi = CMat::zeros(k, n);
    let mut col = vec![C64::default(); k];
    let mut out = vec![C64::default(); k];
    for j in 0..n {
        for i in 0..k {
            col[i] = sbar.sbar[(i, j)];
        }
        score.phi(&col, &mut out);
        for i in 0..k {
            phi[(i, j)] = out[i];
        }
        score.dphi_conj(&col, &mut out);
        for i in 0..k {
            dphi[(i, j)] = out[i];
        }
    }
    ScoreEvaluation {
        phi,
        dphi_conj: dphi,
    }
}

/// Per-mixture statistics that set the Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarStats {
    pub nu: Vec<C64>,
    pub rho: Vec<C64>,
    pub sigma2: Vec<f64>,
    pub sigma2_alpha: Vec<f64>,
}

/// Computes `nu`, `rho` from a score evaluation and the output powers of `w`.
pub fn stats_from_evaluation(
    sbar: &NormalizedSourceVector,
    eval: &ScoreEvaluation,
    w: &[SeparatingVector],
    cx: &[CMat],
    calpha: &[CMat],
) -> Result<ScalarStats> {
    let (k, n) = (sbar.k(), sbar.n_samples());
    let inv_n = 1.0 / n as f64;
    let mut stats = ScalarStats {
        nu: Vec::with_capacity(k),
        rho: Vec::with_capacity(k),
        sigma2: Vec::with_capacity(k),
        sigma2_alpha: Vec::with_capacity(k),
    };
    for i in 0..k {
        let nu: C64 = (0..n)
            .map(|j| sbar.sbar[(i, j)] * eval.phi[(i, j)])
            .sum::<C64>()
            * inv_n;
        let rho: C64 = eval.dphi_conj.row(i).iter().sum::<C64>() * inv_n;
        let s2 = quad_form(&cx[i], &w[i]);
        let s2a = quad_form(&calpha[i], &w[i]);
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !finite(nu) || !finite(rho) || !s2.is_finite() || !s2a.is_finite() {
            return Err(Error::NumericalFailure {
                k: i,
                what: "non-finite score statistic".into(),
            });
        }
        if !(s2 > 0.0) || !(s2a > 0.0) {
            return Err(Error::DegenerateFilter { power: s2.min(s2a) });
        }
        stats.nu.push(nu);
        stats.rho.push(rho);
        stats.sigma2.push(s2);
        stats.sigma2_alpha.push(s2a);
    }
    Ok(stats)
}

/// `nu`, `rho`, `sigma^2` and `sigma_alpha^2` for every mixture.
pub fn scalar_stats(
    sbar: &NormalizedSourceVector,
    score: &dyn ScoreFunction,
    w: &[SeparatingVector],
    cx: &[CMat],
    calpha: &[CMat],
) -> Result<ScalarStats> {
    let eval = evaluate_score(sbar, score);
    stats_from_evaluation(sbar, &eval, w, cx, calpha)
}

/// Background estimates `z = B x` of mixture `k`.
pub fn background_signals(x: &CMat, a: &MixingVector) -> CMat {
    BlockingMatrix::new(a).matrix() * x
}

/// `E[z z^H]` for every mixture.
pub fn background_covariances(x: &MixtureTensor, a: &[MixingVector]) -> Result<Vec<CMat>> {
    a.iter()
        .enumerate()
        .map(|(k, a)| sample_covariance(&background_signals(x.mixture(k), a)))
        .collect()
}

/// Likelihood contrast of the estimates `(a, w)` without its additive
/// constant:
/// `E[log f(sbar)] - sum_k log sigma_k^2 - sum_k E[z^H C_z^{-1} z] + (d-2) sum_k log|gamma_k|^2`.
pub fn contrast(
    x: &MixtureTensor,
    a: &[MixingVector],
    w: &[SeparatingVector],
    cx: &[CMat],
    cz: &[CMat],
    score: &dyn ScoreFunction,
) -> Result<f64> {
    let (k, n, d) = (x.k(), x.n_samples(), x.d());
    if a.len() != k || cz.len() != k {
        return Err(Error::invalid("estimate count does not match K"));
    }
    let sbar = NormalizedSourceVector::from_filters(x, w, cx)?;
    let mut col = vec![C64::default(); k];
    let mut loglik = 0.0;
    for j in 0..n {
        for i in 0..k {
            col[i] = sbar.sbar[(i, j)];
        }
        loglik += score.log_density(&col);
    }
    let mut value = loglik / n as f64;
    for i in 0..k {
        value -= sbar.sigma[i].powi(2).ln();
        let z = background_signals(x.mixture(i), &a[i]);
        let f = LoadedHermitian::new(&cz[i])?;
        let u = f.solve_mat(&z);
        let quad: f64 = z
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / n as f64;
        value -= quad;
        value += (d as f64 - 2.0) * a[i].gamma().norm_sqr().ln();
    }
    Ok(value)
}

/// [`contrast`] with `C_z` replaced by the sample covariance of `z` and the
/// `-sum_k log det C_z` term kept. Unlike [`contrast`], this profile value is
/// invariant to the scale of `(a, w)`, so it can be compared across iterates.
pub fn profile_contrast(
    x: &MixtureTensor,
    a: &[MixingVector],
    w: &[SeparatingVector],
    cx: &[CMat],
    score: &dyn ScoreFunction,
) -> Result<f64> {
    let cz = background_covariances(x, a)?;
    let mut value = contrast(x, a, w, cx, &cz, score)?;
    for c in &cz {
        let chol = c.clone().cholesky().ok_or(Error::SingularCovariance {
            cond: f64::INFINITY,
        })?;
        value -= chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|z| 2.0 * z.re.ln())
            .sum::<f64>();
    }
    Ok(value)
}
