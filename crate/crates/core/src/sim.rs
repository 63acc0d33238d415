//! Monte-Carlo harness on synthetic instantaneous complex mixtures.
//!
//! A trial draws `d` super-Gaussian sources per mixture, mixes them with a
//! random complex matrix whose first column is the mixing vector of the source
//! of interest, synthesizes a noisy guide `r = sqrt(1 - eps2) s + sqrt(eps2) v`
//! from the (unit-power) source of interest, starts every method from the same
//! random point near the true mixing vector and scores the result by its
//! output SIR. A method succeeds when its SIR exceeds 3 dB.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{run_extraction, ExtractionConfig, Mode};
use crate::linalg::{CMat, CVec, C64};
use crate::rng::{
    complex_gaussian, complex_gaussian_matrix, derive_seed, exponential, seeded, unit_sphere,
};
use crate::signal::{MixtureTensor, SeparatingVector, SideInfo};

/// Output SIR above which a trial counts as a success.
pub const SUCCESS_SIR_DB: f64 = 3.0;
/// Magnitude at which reported SIR values are clipped.
pub const SIR_CAP_DB: f64 = 150.0;

const MAX_MIXING_CONDITION: f64 = 1e10;
const MAX_MIXING_RETRIES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub sir_ini_db: f64,
    /// Power of the noise in the guide signal, in `[0, 1]`.
    pub eps2: f64,
    /// Relative distance of the starting point from the true mixing vector.
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            d: 5,
            k: 1,
            n: 200,
            sir_ini_db: 0.0,
            eps2: 0.5,
            init_radius: 0.5,
            seed: 0,
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d must be at least 2"));
        }
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.n < self.d {
            return Err(Error::invalid(format!(
                "N = {} must be at least d = {}",
                self.n, self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.eps2) {
            return Err(Error::invalid("eps2 must lie in [0, 1]"));
        }
        if !(self.init_radius >= 0.0) || !self.sir_ini_db.is_finite() {
            return Err(Error::invalid(
                "init_radius must be nonnegative and SIR finite",
            ));
        }
        Ok(())
    }
}

/// Known decomposition of a generated mixture.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub a_true: Vec<CVec>,
    /// Source of interest as mixed (after the SIR rescaling), `K x N`.
    pub s_true: CMat,
    /// Source of interest at unit sample power, `K x N`.
    pub s_unit: CMat,
    /// Everything except the source of interest, one `d x N` block per mixture.
    pub y_true: Vec<CMat>,
    /// Full mixing matrices; column 0 is `a_true`.
    pub mixing: Vec<CMat>,
    /// All sources as mixed, row 0 being the source of interest.
    pub sources: Vec<CMat>,
}

fn normalize_rows(m: &mut CMat) {
    let n = m.ncols() as f64;
    for mut row in m.row_iter_mut() {
        let p: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        if p > 0.0 {
            row /= C64::new(p.sqrt(), 0.0);
        }
    }
}

fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let hi = sv.max();
    let lo = sv.min();
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Draws a mixture from `spec` using `rng`.
pub fn generate_mixture_with<R: Rng + ?Sized>(
    spec: &TrialSpec,
    rng: &mut R,
) -> Result<(MixtureTensor, GroundTruth)> {
    spec.validate()?;
    let (d, k, n) = (spec.d, spec.k, spec.n);
    let envelope: Vec<f64> = (0..n).map(|_| exponential(rng)).collect();
    let gain = 10f64.powf(spec.sir_ini_db / 20.0);
    let mut mixtures = Vec::with_capacity(k);
    let mut a_true = Vec::with_capacity(k);
    let mut s_true = CMat::zeros(k, n);
    let mut s_unit = CMat::zeros(k, n);
    let mut y_true = Vec::with_capacity(k);
    let mut mixing_all = Vec::with_capacity(k);
    let mut sources_all = Vec::with_capacity(k);
    for kk in 0..k {
        let mut sources = CMat::zeros(d, n);
        for j in 0..n {
            sources[(0, j)] = complex_gaussian(rng) * envelope[j];
        }
        for i in 1..d {
            for j in 0..n {
                sources[(i, j)] = complex_gaussian(rng) * exponential(rng);
            }
        }
        normalize_rows(&mut sources);
        for j in 0..n {
            s_unit[(kk, j)] = sources[(0, j)];
        }
        sources.row_mut(0).scale_mut(gain);
        let mut mixing = complex_gaussian_matrix(rng, d, d);
        let mut tries = 0;
        while condition_number(&mixing) > MAX_MIXING_CONDITION {
            tries += 1;
            if tries > MAX_MIXING_RETRIES {
                return Err(Error::invalid(
                    "could not draw a well-conditioned mixing matrix",
                ));
            }
            mixing = complex_gaussian_matrix(rng, d, d);
        }
        let a = mixing.column(0).into_owned();
        let x = &mixing * &sources;
        let y = mixing.columns(1, d - 1) * sources.rows(1, d - 1);
        for j in 0..n {
            s_true[(kk, j)] = sources[(0, j)];
        }
        mixtures.push(x);
        a_true.push(a);
        y_true.push(y);
        mixing_all.push(mixing);
        sources_all.push(sources);
    }
    Ok((
        MixtureTensor::new(mixtures)?,
        GroundTruth {
            a_true,
            s_true,
            s_unit,
            y_true,
            mixing: mixing_all,
            sources: sources_all,
        },
    ))
}

/// Draws a mixture seeded by `spec.seed`.
pub fn generate_mixture(spec: &TrialSpec) -> Result<(MixtureTensor, GroundTruth)> {
    generate_mixture_with(spec, &mut seeded(spec.seed))
}

/// `r_k(n) = sqrt(1 - eps2) s_k(n) + sqrt(eps2) v_k(n)` with `s_k` rescaled to
/// unit power and `v` standard circular Gaussian.
pub fn make_side_info_with<R: Rng + ?Sized>(
    s_true: &CMat,
    eps2: f64,
    rng: &mut R,
) -> Result<SideInfo> {
    if !(0.0..=1.0).contains(&eps2) {
        return Err(Error::invalid("eps2 must lie in [0, 1]"));
    }
    let mut s = s_true.clone();
    normalize_rows(&mut s);
    let (ws, wv) = ((1.0 - eps2).sqrt(), eps2.sqrt());
    let rows = s
        .row_iter()
        .map(|row| {
            row.iter()
                .map(|&z| {
                    let v = complex_gaussian(rng);
                    if eps2 == 0.0 {
                        z
                    } else {
                        z * ws + v * wv
                    }
                })
                .collect()
        })
        .collect();
    SideInfo::per_mixture(rows)
}

pub fn make_side_info(s_true: &CMat, eps2: f64, seed: u64) -> Result<SideInfo> {
    make_side_info_with(s_true, eps2, &mut seeded(seed))
}

/// `a_true + radius |a_true| u` with `u` uniform on the complex unit sphere,
/// independently per mixture.
pub fn init_near_soi_with<R: Rng + ?Sized>(a_true: &[CVec], radius: f64, rng: &mut R) -> Vec<CVec> {
    a_true
        .iter()
        .map(|a| {
            let u = unit_sphere(rng, a.len());
            a + u * C64::new(radius * a.norm(), 0.0)
        })
        .collect()
}

pub fn init_near_soi(a_true: &[CVec], radius: f64, seed: u64) -> Result<Vec<CVec>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("init_radius must be positive"));
    }
    Ok(init_near_soi_with(a_true, radius, &mut seeded(seed)))
}

/// Output SIR of a set of filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirReport {
    pub per_k: Vec<f64>,
    /// `10 log10(sum_k signal power / sum_k interference power)`.
    pub pooled: f64,
}

/// `10 log10(signal / interference)` clamped to `±SIR_CAP_DB`.
pub fn ratio_db(signal: f64, interference: f64) -> f64 {
    if interference <= 0.0 {
        return SIR_CAP_DB;
    }
    if signal <= 0.0 {
        return -SIR_CAP_DB;
    }
    (10.0 * (signal / interference).log10()).clamp(-SIR_CAP_DB, SIR_CAP_DB)
}

/// SIR of `w_k^H x^[k]` from the known decomposition `x = a s + y`.
pub fn evaluate_sir(w: &[CVec], truth: &GroundTruth) -> Result<SirReport> {
    if w.len() != truth.a_true.len() {
        return Err(Error::invalid("filter count does not match K"));
    }
    let mut per_k = Vec::with_capacity(w.len());
    let (mut sig_sum, mut int_sum) = (0.0, 0.0);
    for (k, wk) in w.iter().enumerate() {
        let gain = wk.dotc(&truth.a_true[k]);
        let sig: f64 = truth
            .s_true
            .row(k)
            .iter()
            .map(|s| (gain * s).norm_sqr())
            .sum();
        let inter: f64 = truth.y_true[k]
            .tr_mul(&wk.conjugate())
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        per_k.push(ratio_db(sig, inter));
        sig_sum += sig;
        int_sum += inter;
    }
    Ok(SirReport {
        per_k,
        pooled: ratio_db(sig_sum, int_sum),
    })
}

/// Extraction methods compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Blind, every mixture processed on its own.
    FastIca,
    /// Informed, every mixture processed on its own.
    IFastIca,
    /// Blind, all mixtures jointly.
    FastIva,
    /// Informed, all mixtures jointly.
    IFastIva,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::FastIca,
        Method::IFastIca,
        Method::FastIva,
        Method::IFastIva,
    ];

    pub fn is_informed(self) -> bool {
        matches!(self, Method::IFastIca | Method::IFastIva)
    }

    pub fn is_joint(self) -> bool {
        matches!(self, Method::FastIva | Method::IFastIva)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::FastIca => "fastica",
            Method::IFastIca => "ifastica",
            Method::FastIva => "fastiva",
            Method::IFastIva => "ifastiva",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Outcome of one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    /// Pooled output SIR; `None` when the algorithm failed.
    pub sir_db: Option<f64>,
    pub success: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialReport {
    pub fn outcome(&self, m: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == m)
    }
}

fn run_method(
    method: Method,
    x: &MixtureTensor,
    side: &SideInfo,
    init: &[CVec],
    base: &ExtractionConfig,
) -> Result<(Vec<CVec>, usize)> {
    let mut cfg = base.clone();
    cfg.mode = if method.is_informed() {
        Mode::Informed
    } else {
        Mode::Blind
    };
    let side = method.is_informed().then_some(side);
    if method.is_joint() || x.k() == 1 {
        let out = run_extraction(x, side, &cfg, Some(init))?;
        return Ok((
            out.w
                .into_iter()
                .map(SeparatingVector::into_inner)
                .collect(),
            out.trace.len(),
        ));
    }
    let mut ws = Vec::with_capacity(x.k());
    let mut iters = 0;
    for k in 0..x.k() {
        let xk = x.select(&[k])?;
        let sk = match side {
            Some(s) => {
                Some(SideInfo::per_mixture(vec![s.guide(k).to_vec()])?.with_epsilon(s.epsilon())?)
            }
            None => None,
        };
        let out = run_extraction(&xk, sk.as_ref(), &cfg, Some(&init[k..k + 1]))?;
        iters = iters.max(out.trace.len());
        ws.push(out.w.into_iter().next().unwrap().into_inner());
    }
    Ok((ws, iters))
}

/// Runs every method on one freshly drawn trial.
pub fn run_trial(
    spec: &TrialSpec,
    methods: &[Method],
    base: &ExtractionConfig,
) -> Result<TrialReport> {
    let mut rng = seeded(spec.seed);
    let (x, truth) = generate_mixture_with(spec, &mut rng)?;
    let side = make_side_info_with(&truth.s_unit, spec.eps2, &mut rng)?;
    let init = init_near_soi_with(&truth.a_true, spec.init_radius, &mut rng);
    let outcomes = methods
        .iter()
        .map(|&method| match run_method(method, &x, &side, &init, base) {
            Ok((w, iterations)) => {
                let sir = evaluate_sir(&w, &truth).map(|r| r.pooled).ok();
                MethodOutcome {
                    method,
                    sir_db: sir,
                    success: sir.is_some_and(|s| s > SUCCESS_SIR_DB),
                    iterations,
                    error: None,
                }
            }
            Err(e) => MethodOutcome {
                method,
                sir_db: None,
                success: false,
                iterations: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(TrialReport {
        seed: spec.seed,
        outcomes,
    })
}

/// Swept variable of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N(Vec<usize>),
    SirIni(Vec<f64>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::N(_) => "N",
            Axis::SirIni(_) => "SIR_ini",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::N(v) => v.len(),
            Axis::SirIni(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, i: usize, spec: &mut TrialSpec) -> f64 {
        match self {
            Axis::N(v) => {
                spec.n = v[i];
                v[i] as f64
            }
            Axis::SirIni(v) => {
                spec.sir_ini_db = v[i];
                v[i]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub base: TrialSpec,
    pub axis: Axis,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    pub extraction: ExtractionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub axis_value: f64,
    pub method: Method,
    pub success_rate_pct: f64,
    /// Mean SIR over successful trials only; `None` without successes.
    pub mean_sir_db_successful: Option<f64>,
    pub trials: usize,
    pub median_iterations: f64,
}

/// Aggregated success rate and conditional SIR per grid point and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub axis: String,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn row(&self, axis_value: f64, method: Method) -> Option<&CurveRow> {
        self.rows
            .iter()
            .find(|r| r.axis_value == axis_value && r.method == method)
    }

    /// CSV with columns `axis_value,method,success_rate_pct,mean_sir_db_successful,trials`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "axis_value,method,success_rate_pct,mean_sir_db_successful,trials"
        )?;
        for r in &self.rows {
            let sir = r
                .mean_sir_db_successful
                .map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}"));
            writeln!(
                w,
                "{},{},{:.4},{},{}",
                r.axis_value, r.method, r.success_rate_pct, sir, r.trials
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

fn median(v: &mut [usize]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

/// Aggregates trial reports of one grid point.
pub fn aggregate(axis_value: f64, methods: &[Method], reports: &[TrialReport]) -> Vec<CurveRow> {
    methods
        .iter()
        .map(|&m| {
            let outcomes: Vec<&MethodOutcome> =
                reports.iter().filter_map(|r| r.outcome(m)).collect();
            let wins: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.success)
                .filter_map(|o| o.sir_db)
                .collect();
            let mut iters: Vec<usize> = outcomes.iter().map(|o| o.iterations).collect();
            let trials = outcomes.len();
            CurveRow {
                axis_value,
                method: m,
                success_rate_pct: if trials == 0 {
                    0.0
                } else {
                    100.0 * wins.len() as f64 / trials as f64
                },
                mean_sir_db_successful: (!wins.is_empty())
                    .then(|| wins.iter().sum::<f64>() / wins.len() as f64),
                trials,
                median_iterations: median(&mut iters),
            }
        })
        .collect()
}

/// Runs `trials` independent trials per grid point, in parallel, and reduces
/// them in (grid point, trial index) order.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<CurveTable> {
    if cfg.trials < 1 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if cfg.axis.is_empty() {
        return Err(Error::invalid("empty sweep grid"));
    }
    if cfg.methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    cfg.extraction.validate()?;
    let mut rows = Vec::new();
    for gi in 0..cfg.axis.len() {
        let mut spec = cfg.base.clone();
        let axis_value = cfg.axis.apply(gi, &mut spec);
        spec.validate()?;
        let reports: Vec<TrialReport> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut s = spec.clone();
                s.seed = derive_seed(cfg.master_seed, &[gi as u64, t as u64]);
                run_trial(&s, &cfg.methods, &cfg.extraction)
            })
            .collect::<Result<_>>()?;
        rows.extend(aggregate(axis_value, &cfg.methods, &reports));
    }
    Ok(CurveTable {
        axis: cfg.axis.name().to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_rule_is_strict() {
        let mk = |sir: f64| TrialReport {
            seed: 0,
            outcomes: vec![MethodOutcome {
                method: Method::FastIca,
                sir_db: Some(sir),
                success: sir > SUCCESS_SIR_DB,
                iterations: 3,
                error: None,
            }],
        };
        let rows = aggregate(
            0.0,
            &[Method::FastIca],
            &[mk(3.0), mk(3.0001), mk(20.0), mk(-4.0)],
        );
        assert_eq!(rows[0].success_rate_pct, 50.0);
        let mean = rows[0].mean_sir_db_successful.unwrap();
        assert!((mean - (3.0001 + 20.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_success_gives_no_mean() {
        let r = TrialReport {
            seed: 0,
            outcomes: vec![MethodOutcome {
                method: Method::IFastIva,
                sir_db: None,
                success: false,
                iterations: 0,
                error: Some("x".into()),
            }],
        };
        let rows = aggregate(1.0, &[Method::IFastIva], &[r]);
        assert_eq!(rows[0].success_rate_pct, 0.0);
        assert!(rows[0].mean_sir_db_successful.is_none());
        let table = CurveTable {
            axis: "N".into(),
            rows,
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,ifastiva,0.0000,NaN,1");
    }

    #[test]
    fn spec_validation() {
        let bad = TrialSpec {
            n: 3,
            ..TrialSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrialSpec {
            eps2: 1.5,
            ..TrialSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("picard".parse::<Method>().is_err());
    }

    #[test]
    fn sir_caps() {
        assert_eq!(ratio_db(1.0, 0.0), SIR_CAP_DB);
        assert_eq!(ratio_db(0.0, 1.0), -SIR_CAP_DB);
        assert!((ratio_db(10.0, 1.0) - 10.0).abs() < 1e-12);
    }
}
