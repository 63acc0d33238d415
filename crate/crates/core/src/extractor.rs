//! One-unit extraction by approximate Newton-Raphson steps on the mixing
//! vectors.
//!
//! Each iteration of [`run_extraction`]:
//!
//! 1. computes the separating vectors from the current mixing vectors, with the
//!    weighted covariance in informed mode or the sample covariance in blind
//!    mode;
//! 2. re-projects the mixing vectors onto the orthogonal-constraint relation
//!    `a = C_x w / (w^H C_x w)`, which zeroes the background cross-covariance;
//! 3. forms the normalized outputs of all `K` mixtures (the score couples them,
//!    so this is a barrier);
//! 4. applies the Newton update
//!    `a <- a - nu/(nu - rho) * (sigma_alpha^2 / sigma^2) * (a - E[phi x / sigma] / nu)`.
//!
//! With unit weights and `K = 1` this is the classical one-unit FastICA
//! iteration written in terms of the mixing vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamformer::{distortionless, reproject_mixing};
use crate::error::{Error, Result};
use crate::linalg::{direction_change, quad_form, CMat, CVec, LoadedHermitian, C64};
use crate::rng::{complex_gaussian_vec, seeded};
use crate::score::{
    evaluate_score, profile_contrast, stats_from_evaluation, NormalizedSourceVector, ScalarStats,
    Score, ScoreEvaluation, ScoreFunction,
};
use crate::signal::{CovarianceSet, MixingVector, MixtureTensor, SeparatingVector, SideInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Blind,
    Informed,
}

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    pub max_iters: usize,
    /// Threshold on the largest phase-invariant direction change of `a`.
    pub conv_tol: f64,
    /// Smallest admissible `|nu - rho|`.
    pub step_guard: f64,
    pub mode: Mode,
    pub score: Score,
    /// Seed for the random initialization used when no start is given.
    pub seed: u64,
    /// Halve a step once when it inflates the fixed-point residual tenfold.
    pub damping: bool,
    /// Scale the step by `sigma_alpha^2 / sigma^2`. Disabling it is an ablation.
    pub variance_ratio: bool,
    /// Record the profile contrast in the trace (costs one extra pass).
    pub track_contrast: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            conv_tol: 1e-6,
            step_guard: 1e-8,
            mode: Mode::Informed,
            score: Score::default(),
            seed: 0,
            damping: true,
            variance_ratio: true,
            track_contrast: false,
        }
    }
}

impl ExtractionConfig {
    pub fn blind() -> Self {
        Self {
            mode: Mode::Blind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::invalid("conv_tol must be positive"));
        }
        if !(self.step_guard >= 0.0) {
            return Err(Error::invalid("step_guard must be nonnegative"));
        }
        Ok(())
    }
}

/// `B = [g, -gamma I_{d-1}]`, which annihilates `a = [gamma; g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockingMatrix(CMat);

impl BlockingMatrix {
    pub fn new(a: &MixingVector) -> Self {
        let d = a.len();
        let gamma = a.gamma();
        let mut b = CMat::zeros(d - 1, d);
        for i in 0..d - 1 {
            b[(i, 0)] = a[i + 1];
            b[(i, i + 1)] = -gamma;
        }
        Self(b)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub nu: Vec<C64>,
    pub rho: Vec<C64>,
    pub sigma2: Vec<f64>,
    pub sigma2_alpha: Vec<f64>,
    pub direction_change: f64,
    pub contrast: Option<f64>,
    /// `|E[z conj(s)]|` per mixture at the state the step was taken from.
    pub q_norm: Vec<f64>,
    pub damped: bool,
}

/// Append-only record of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn push(&mut self, r: IterationRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Final estimates of a run.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    pub a: Vec<MixingVector>,
    pub w: Vec<SeparatingVector>,
    /// Extracted signals `w_k^H x^[k]`, one row per mixture.
    pub s: CMat,
    pub trace: IterationTrace,
}

/// Factored covariances of one problem.
struct Factors {
    cx: Vec<LoadedHermitian>,
    calpha: Option<Vec<LoadedHermitian>>,
}

impl Factors {
    fn new(cov: &CovarianceSet, mode: Mode) -> Result<Self> {
        let factor = |ms: &[CMat]| -> Result<Vec<LoadedHermitian>> {
            ms.par_iter()
                .enumerate()
                .map(|(k, m)| {
                    LoadedHermitian::new(m).map_err(|e| match e {
                        Error::SingularCovariance { .. } => Error::NumericalFailure {
                            k,
                            what: e.to_string(),
                        },
                        e => e,
                    })
                })
                .collect()
        };
        let cx = factor(&cov.cx)?;
        let calpha = match mode {
            Mode::Blind => None,
            Mode::Informed => Some(factor(&cov.calpha)?),
        };
        Ok(Self { cx, calpha })
    }

    fn constraint(&self, k: usize) -> &LoadedHermitian {
        match &self.calpha {
            Some(f) => &f[k],
            None => &self.cx[k],
        }
    }
}

/// Everything derived from one set of mixing vectors.
struct Evaluation {
    w: Vec<SeparatingVector>,
    a: Vec<MixingVector>,
    stats: ScalarStats,
    /// `E[phi_k x^[k] / sigma_k]`.
    e_phi_x: Vec<CVec>,
    residual: Vec<f64>,
}

/// `E[phi_k(sbar) x^[k]] / sigma_k` for every mixture.
fn score_moment(
    x: &MixtureTensor,
    sbar: &NormalizedSourceVector,
    eval: &ScoreEvaluation,
) -> Vec<CVec> {
    let n = x.n_samples() as f64;
    (0..x.k())
        .map(|k| {
            let phi_row = eval.phi.row(k).transpose();
            (x.mixture(k) * phi_row) / C64::new(n * sbar.sigma[k], 0.0)
        })
        .collect()
}

fn residual_of(a: &CVec, e: &CVec, nu: C64) -> f64 {
    (a - e / nu).norm() / a.norm()
}

fn evaluate(
    x: &MixtureTensor,
    cov: &CovarianceSet,
    factors: &Factors,
    score: &dyn ScoreFunction,
    a: &[CVec],
) -> Result<Evaluation> {
    let pairs: Vec<Result<(SeparatingVector, MixingVector)>> = (0..x.k())
        .into_par_iter()
        .map(|k| {
            let w = distortionless(factors.constraint(k), &a[k])
                .map_err(|e| annotate_k(e, k))?
                .w;
            let a = reproject_mixing(&cov.cx[k], &w).map_err(|e| annotate_k(e, k))?;
            Ok((w, a))
        })
        .collect();
    let mut w = Vec::with_capacity(x.k());
    let mut a_rep = Vec::with_capacity(x.k());
    for p in pairs {
        let (wk, ak) = p?;
        w.push(wk);
        a_rep.push(ak);
    }
    let sbar = NormalizedSourceVector::from_filters(x, &w, &cov.cx)?;
    let eval = evaluate_score(&sbar, score);
    let stats = stats_from_evaluation(&sbar, &eval, &w, &cov.cx, &cov.calpha)?;
    let e_phi_x = score_moment(x, &sbar, &eval);
    let residual = (0..x.k())
        .map(|k| residual_of(&a_rep[k], &e_phi_x[k], stats.nu[k]))
        .collect();
    Ok(Evaluation {
        w,
        a: a_rep,
        stats,
        e_phi_x,
        residual,
    })
}

fn annotate_k(e: Error, k: usize) -> Error {
    match e {
        Error::DegenerateFilter { power } => Error::NumericalFailure {
            k,
            what: format!("degenerate filter (output power {power:.3e})"),
        },
        Error::InvalidInput(msg) => Error::NumericalFailure { k, what: msg },
        e => e,
    }
}

/// Scalar step coefficient `nu/(nu - rho) * sigma_alpha^2/sigma^2`.
fn step_coefficient(
    stats: &ScalarStats,
    k: usize,
    guard: f64,
    variance_ratio: bool,
) -> Result<C64> {
    let gap = stats.nu[k] - stats.rho[k];
    if !(gap.norm() >= guard) || gap.norm() == 0.0 {
        return Err(Error::DegenerateStep { k, gap: gap.norm() });
    }
    let ratio = if variance_ratio {
        stats.sigma2_alpha[k] / stats.sigma2[k]
    } else {
        1.0
    };
    Ok(stats.nu[k] / gap * ratio)
}

fn apply_step(
    a: &[MixingVector],
    stats: &ScalarStats,
    e_phi_x: &[CVec],
    guard: f64,
    variance_ratio: bool,
) -> Result<Vec<CVec>> {
    (0..a.len())
        .map(|k| {
            let coef = step_coefficient(stats, k, guard, variance_ratio)?;
            let ak = a[k].as_vec();
            let inc = (ak - &e_phi_x[k] / stats.nu[k]) * coef;
            let next = ak - inc;
            if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NumericalFailure {
                    k,
                    what: "non-finite update".into(),
                });
            }
            if next.norm() == 0.0 {
                return Err(Error::NumericalFailure {
                    k,
                    what: "update collapsed to zero".into(),
                });
            }
            Ok(next)
        })
        .collect()
}

/// Options of a single Newton step.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub step_guard: f64,
    pub variance_ratio: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            step_guard: 1e-8,
            variance_ratio: true,
        }
    }
}

/// One Newton update of every mixing vector.
///
/// `a` must already be re-projected from the constraint filters `w` of this
/// iteration. All mixtures are updated from the same normalized outputs.
pub fn newton_step(
    a: &[MixingVector],
    w: &[SeparatingVector],
    x: &MixtureTensor,
    cx: &[CMat],
    calpha: &[CMat],
    score: &dyn ScoreFunction,
    opts: StepOptions,
) -> Result<Vec<MixingVector>> {
    if a.len() != x.k() || w.len() != x.k() {
        return Err(Error::invalid("estimate count does not match K"));
    }
    let sbar = NormalizedSourceVector::from_filters(x, w, cx)?;
    let eval = evaluate_score(&sbar, score);
    let stats = stats_from_evaluation(&sbar, &eval, w, cx, calpha)?;
    let e = score_moment(x, &sbar, &eval);
    apply_step(a, &stats, &e, opts.step_guard, opts.variance_ratio)?
        .into_iter()
        .map(MixingVector::new)
        .collect()
}

/// Gradient of the contrast w.r.t. `conj(a)`, split into the score part and
/// the background cross-covariance part.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientParts {
    pub main: CVec,
    pub q_term: CVec,
}

impl GradientParts {
    pub fn total(&self) -> CVec {
        &self.main + &self.q_term
    }
}

fn q_term(a: &MixingVector, q: &CVec, cz: &LoadedHermitian) -> CVec {
    let v = cz.solve(q);
    let d = a.len();
    let mut out = CVec::zeros(d);
    out[0] = a.g().dotc(&v);
    let gc = a.gamma().conj();
    for i in 1..d {
        out[i] = -gc * v[i - 1];
    }
    out
}

/// Sample cross-covariance `E[z conj(s)]` between the background estimates of
/// `a` and the output of `w`.
pub fn background_cross_covariance(a: &MixingVector, w: &SeparatingVector, cx: &CMat) -> CVec {
    BlockingMatrix::new(a).matrix() * (cx * w.as_vec())
}

fn gradient_impl(
    a: &[MixingVector],
    w: &[SeparatingVector],
    x: &MixtureTensor,
    cx: &[CMat],
    calpha: &[CMat],
    score: &dyn ScoreFunction,
    cz: &[CMat],
    normalized: bool,
) -> Result<Vec<GradientParts>> {
    let k_count = x.k();
    if a.len() != k_count || w.len() != k_count || cz.len() != k_count {
        return Err(Error::invalid("estimate count does not match K"));
    }
    let sbar = NormalizedSourceVector::from_filters(x, w, cx)?;
    let eval = evaluate_score(&sbar, score);
    let stats = stats_from_evaluation(&sbar, &eval, w, cx, calpha)?;
    let e = score_moment(x, &sbar, &eval);
    (0..k_count)
        .map(|k| {
            let ca = LoadedHermitian::new(&calpha[k])?;
            let czf = LoadedHermitian::new(&cz[k])?;
            let ak = a[k].as_vec();
            let inner = if normalized {
                ak - &e[k] / stats.nu[k]
            } else {
                let a_oc = &cx[k] * w[k].as_vec() / C64::new(stats.sigma2[k], 0.0);
                a_oc * C64::new(stats.nu[k].re - 1.0, 0.0) + ak - &e[k]
            };
            let main = ca.solve(&inner) * C64::new(stats.sigma2_alpha[k], 0.0);
            let q = background_cross_covariance(&a[k], &w[k], &cx[k]);
            Ok(GradientParts {
                main,
                q_term: q_term(&a[k], &q, &czf),
            })
        })
        .collect()
}

/// Exact gradient of the contrast w.r.t. `conj(a)` with the score used as is.
///
/// At a state where `w` is the constraint filter of `a`, this equals the
/// Wirtinger derivative of [`contrast`] with `C_z` held fixed:
/// `sigma_alpha^2 C_alpha^{-1} ((nu - 1) C_x w / sigma^2 + a - E[phi x / sigma]) + q-term`.
/// After re-projection (`a = C_x w / sigma^2`) it is `nu` times the
/// normalized gradient.
pub fn raw_gradient(
    a: &[MixingVector],
    w: &[SeparatingVector],
    x: &MixtureTensor,
    cx: &[CMat],
    calpha: &[CMat],
    score: &dyn ScoreFunction,
    cz: &[CMat],
) -> Result<Vec<GradientParts>> {
    gradient_impl(a, w, x, cx, calpha, score, cz, false)
}

/// Gradient with the score divided by `nu`:
/// `sigma_alpha^2 C_alpha^{-1} (a - E[phi x / sigma] / nu) + q-term`.
pub fn normalized_gradient(
    a: &[MixingVector],
    w: &[SeparatingVector],
    x: &MixtureTensor,
    cx: &[CMat],
    calpha: &[CMat],
    score: &dyn ScoreFunction,
    cz: &[CMat],
) -> Result<Vec<GradientParts>> {
    gradient_impl(a, w, x, cx, calpha, score, cz, true)
}

fn conj_inverse(m: &CMat) -> Result<CMat> {
    let d = m.nrows();
    let inv = LoadedHermitian::new(m)?.solve_mat(&CMat::identity(d, d));
    Ok(inv.map(|z| z.conj()))
}

/// Hessian approximation with rank-one terms dropped, on the diagonally
/// loaded covariances:
/// `sigma_alpha^2 (I - (rho/nu)(sigma_alpha^2/sigma^2) conj(C_alpha)^{-1} conj(C_x)) conj(C_alpha)^{-1}`.
pub fn approx_hessian(stats: &ScalarStats, calpha: &[CMat], cx: &[CMat]) -> Result<Vec<CMat>> {
    (0..calpha.len())
        .map(|k| {
            let d = calpha[k].nrows();
            let ia = conj_inverse(&calpha[k])?;
            // the loaded C_x, so that C_alpha = C_x gives an exact identity below
            let mut cxc = cx[k].map(|z| z.conj());
            let load = LoadedHermitian::new(&cx[k])?.loading();
            for i in 0..d {
                cxc[(i, i)] += C64::new(load, 0.0);
            }
            let ratio = stats.sigma2_alpha[k] / stats.sigma2[k];
            let coef = stats.rho[k] / stats.nu[k] * ratio;
            let inner = CMat::identity(d, d) - &ia * cxc * coef;
            Ok(inner * ia * C64::new(stats.sigma2_alpha[k], 0.0))
        })
        .collect()
}

/// The Hessian after replacing `(sigma_alpha^2/sigma^2) C_alpha^{-1} C_x` by
/// the identity and rescaling by `sigma^2 / sigma_alpha^2`:
/// `sigma^2 (1 - rho/nu) conj(C_alpha)^{-1}`.
pub fn collapsed_hessian(stats: &ScalarStats, calpha: &[CMat]) -> Result<Vec<CMat>> {
    (0..calpha.len())
        .map(|k| {
            let ia = conj_inverse(&calpha[k])?;
            let coef = (C64::new(1.0, 0.0) - stats.rho[k] / stats.nu[k]) * stats.sigma2[k];
            Ok(ia * coef)
        })
        .collect()
}

/// Random complex Gaussian starting mixing vectors.
pub fn random_init(d: usize, k: usize, seed: u64) -> Vec<CVec> {
    let mut rng = seeded(seed);
    (0..k).map(|_| complex_gaussian_vec(&mut rng, d)).collect()
}

/// Runs the extraction loop from `a_init` (random if `None`).
pub fn run_extraction(
    x: &MixtureTensor,
    side: Option<&SideInfo>,
    cfg: &ExtractionConfig,
    a_init: Option<&[CVec]>,
) -> Result<ExtractionResult> {
    cfg.validate()?;
    let side = match (cfg.mode, side) {
        (Mode::Informed, None) => {
            return Err(Error::invalid("informed mode requires side information"))
        }
        (Mode::Blind, Some(_)) => {
            return Err(Error::invalid("blind mode does not take side information"))
        }
        (_, s) => s,
    };
    let cov = CovarianceSet::estimate(x, side)?;
    run_with_covariances(x, &cov, cfg, a_init)
}

/// Extraction loop on precomputed covariances. In blind mode `cov.calpha` is
/// ignored for the constraint.
pub fn run_with_covariances(
    x: &MixtureTensor,
    cov: &CovarianceSet,
    cfg: &ExtractionConfig,
    a_init: Option<&[CVec]>,
) -> Result<ExtractionResult> {
    cfg.validate()?;
    let (k, d) = (x.k(), x.d());
    if cov.k() != k {
        return Err(Error::invalid("covariance set does not match K"));
    }
    let init = match a_init {
        Some(a) => a.to_vec(),
        None => random_init(d, k, cfg.seed),
    };
    if init.len() != k || init.iter().any(|a| a.len() != d || !(a.norm() > 0.0)) {
        return Err(Error::invalid(
            "initial mixing vectors must be K nonzero d-vectors",
        ));
    }
    // blind runs use C_x for the output-power ratio as well
    let blind_cov;
    let cov = match cfg.mode {
        Mode::Blind => {
            blind_cov = CovarianceSet {
                cx: cov.cx.clone(),
                calpha: cov.cx.clone(),
                loading: cov.loading,
            };
            &blind_cov
        }
        Mode::Informed => cov,
    };
    let factors = Factors::new(cov, cfg.mode)?;
    let score = &cfg.score;

    let mut trace = IterationTrace::default();
    let mut ev = evaluate(x, cov, &factors, score, &init).map_err(|e| e.at_iteration(0))?;
    for it in 0..cfg.max_iters {
        let wrap = |e: Error| e.at_iteration(it);
        let mut next = apply_step(
            &ev.a,
            &ev.stats,
            &ev.e_phi_x,
            cfg.step_guard,
            cfg.variance_ratio,
        )
        .map_err(wrap)?;
        let mut ev_next = evaluate(x, cov, &factors, score, &next).map_err(wrap)?;
        let mut damped = false;
        if cfg.damping {
            let mut any = false;
            for kk in 0..k {
                if ev_next.residual[kk] > 10.0 * ev.residual[kk] {
                    let old = ev.a[kk].as_vec();
                    next[kk] = old + (&next[kk] - old) * C64::new(0.5, 0.0);
                    any = true;
                }
            }
            if any {
                ev_next = evaluate(x, cov, &factors, score, &next).map_err(wrap)?;
                damped = true;
            }
        }
        let change = (0..k)
            .map(|kk| direction_change(ev.a[kk].as_vec(), ev_next.a[kk].as_vec()))
            .fold(0.0, f64::max);
        let contrast_value = if cfg.track_contrast {
            Some(profile_contrast(x, &ev.a, &ev.w, &cov.cx, score).map_err(wrap)?)
        } else {
            None
        };
        let q_norm = (0..k)
            .map(|kk| background_cross_covariance(&ev.a[kk], &ev.w[kk], &cov.cx[kk]).norm())
            .collect();
        trace.push(IterationRecord {
            iteration: it,
            nu: ev.stats.nu.clone(),
            rho: ev.stats.rho.clone(),
            sigma2: ev.stats.sigma2.clone(),
            sigma2_alpha: ev.stats.sigma2_alpha.clone(),
            direction_change: change,
            contrast: contrast_value,
            q_norm,
            damped,
        });
        ev = ev_next;
        if change < cfg.conv_tol {
            trace.converged = true;
            break;
        }
    }
    let mut s = CMat::zeros(k, x.n_samples());
    for kk in 0..k {
        for (j, v) in ev.w[kk].apply(x.mixture(kk)).into_iter().enumerate() {
            s[(kk, j)] = v;
        }
    }
    Ok(ExtractionResult {
        a: ev.a,
        w: ev.w,
        s,
        trace,
    })
}

/// `sigma^2` of a filter, exposed for diagnostics.
pub fn output_power(cx: &CMat, w: &SeparatingVector) -> f64 {
    quad_form(cx, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, seeded};

    #[test]
    fn blocking_matrix_annihilates() {
        let mut rng = seeded(2);
        for d in 2..7 {
            let a = MixingVector::new(complex_gaussian_vec(&mut rng, d)).unwrap();
            let b = BlockingMatrix::new(&a);
            assert_eq!(b.matrix().shape(), (d - 1, d));
            assert!((b.matrix() * a.as_vec()).norm() <= 1e-12 * a.norm_squared());
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExtractionConfig::default();
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExtractionConfig::default();
        cfg.conv_tol = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn side_info_required_iff_informed() {
        let mut rng = seeded(1);
        let x = MixtureTensor::new(vec![complex_gaussian_matrix(&mut rng, 3, 50)]).unwrap();
        assert!(run_extraction(&x, None, &ExtractionConfig::default(), None).is_err());
        let side = SideInfo::shared(vec![C64::new(1.0, 0.0); 50]).unwrap();
        assert!(run_extraction(&x, Some(&side), &ExtractionConfig::blind(), None).is_err());
    }

    #[test]
    fn gaussian_score_hits_step_guard() {
        let mut rng = seeded(1);
        let x = MixtureTensor::new(vec![complex_gaussian_matrix(&mut rng, 3, 50)]).unwrap();
        let cfg = ExtractionConfig {
            score: Score::Gauss(crate::score::Gauss),
            ..ExtractionConfig::blind()
        };
        let err = run_extraction(&x, None, &cfg, None).unwrap_err();
        assert!(matches!(err.root(), Error::DegenerateStep { k: 0, .. }));
        assert_eq!(err.mixture_index(), Some(0));
    }

    #[test]
    fn trace_jsonl_lines() {
        let mut t = IterationTrace::default();
        for i in 0..3 {
            t.push(IterationRecord {
                iteration: i,
                nu: vec![C64::new(1.0, 0.0)],
                rho: vec![C64::new(0.5, 0.0)],
                sigma2: vec![1.0],
                sigma2_alpha: vec![0.5],
                direction_change: 0.1,
                contrast: None,
                q_norm: vec![0.0],
                damped: false,
            });
        }
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back: IterationRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, t.records()[0]);
    }
}
