use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ive_core::audio::{
    extract_speaker, oracle_pilot, read_wav, write_wav, Audio, InitStrategy, PilotSignal,
    PipelineConfig, StftConfig, WavFormat,
};
use ive_core::sim::{run_monte_carlo, Axis, Method, MonteCarloConfig, TrialSpec};
use ive_core::Mode;
use serde::{Deserialize, Serialize};

use crate::config::{
    load_config, write_echo, EvalConfig, ExtractConfig, SimulateConfig, SolverConfig,
};
use crate::error::{CliError, CliResult};
use crate::{EvalArgs, ExtractArgs, SimulateArgs, SolverArgs};

fn merge_solver(cfg: &mut SolverConfig, a: &SolverArgs) {
    if let Some(v) = &a.score {
        cfg.score = v.clone();
    }
    if let Some(v) = &a.score_table {
        cfg.score_table = Some(v.clone());
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = a.conv_tol {
        cfg.conv_tol = v;
    }
    if a.no_damping {
        cfg.damping = false;
    }
    if a.no_variance_ratio {
        cfg.variance_ratio = false;
    }
}

fn resolve_simulate(a: &SimulateArgs) -> CliResult<(SimulateConfig, bool)> {
    let mut c: SimulateConfig = load_config(a.config.as_deref())?;
    let default_eps2 = c.eps2 == SimulateConfig::default().eps2;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { c.$field = v; } )* };
    }
    set!(d, k, n, trials, eps2, init_radius, seed);
    if let Some(v) = a.sir_ini {
        c.sir_ini_db = v;
    }
    if let Some(v) = &a.n_grid {
        c.n_grid = Some(v.clone());
        c.sir_ini_grid = None;
    }
    if let Some(v) = &a.sir_ini_grid {
        c.sir_ini_grid = Some(v.clone());
        if a.n_grid.is_none() {
            c.n_grid = None;
        }
    }
    if let Some(v) = &a.methods {
        c.methods = v
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = &a.out {
        c.out = Some(v.clone());
    }
    merge_solver(&mut c.solver, &a.solver);
    let eps2_set = a.eps2.is_some() || !default_eps2;
    Ok((c, eps2_set))
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let (c, eps2_set) = resolve_simulate(&a)?;
    let axis = match (&c.n_grid, &c.sir_ini_grid) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "give either an N grid or an SIR grid, not both",
            ))
        }
        (Some(g), None) => Axis::N(g.clone()),
        (None, Some(g)) => Axis::SirIni(g.clone()),
        (None, None) => Axis::N(vec![10, 20, 50, 100, 200]),
    };
    if c.methods.is_empty() {
        return Err(CliError::usage("no methods selected"));
    }
    if eps2_set && !c.methods.iter().any(|m| m.is_informed()) {
        eprintln!("warning: side-information settings (eps2) are ignored in blind mode");
    }
    let mc = MonteCarloConfig {
        base: TrialSpec {
            d: c.d,
            k: c.k,
            n: c.n,
            sir_ini_db: c.sir_ini_db,
            eps2: c.eps2,
            init_radius: c.init_radius,
            seed: 0,
        },
        axis,
        methods: c.methods.clone(),
        trials: c.trials,
        master_seed: c.seed,
        extraction: c.solver.extraction(Mode::Informed, c.seed)?,
    };
    let table = run_monte_carlo(&mc)?;
    match &c.out {
        Some(out) => {
            table.write_csv(fs::File::create(out)?)?;
            table.write_json(fs::File::create(out.with_extension("json"))?)?;
            write_echo(out, &c)?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PilotRow {
    frame_index: usize,
    r_value: f64,
}

pub fn read_pilot(path: &Path) -> CliResult<PilotSignal> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut r = Vec::new();
    for (i, row) in rdr.deserialize::<PilotRow>().enumerate() {
        let row = row?;
        if row.frame_index != i {
            return Err(CliError::usage(format!(
                "pilot {}: expected frame_index {i}, found {}",
                path.display(),
                row.frame_index
            )));
        }
        r.push(row.r_value);
    }
    Ok(PilotSignal::new(r)?)
}

pub fn write_pilot(path: &Path, pilot: &PilotSignal) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (frame_index, &r_value) in pilot.values().iter().enumerate() {
        w.serialize(PilotRow {
            frame_index,
            r_value,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn wav_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.len() < 2 {
        return Err(CliError::usage(format!(
            "{} must hold at least two reference WAVs",
            dir.display()
        )));
    }
    Ok(files)
}

fn read_input(path: &Path) -> CliResult<Audio> {
    read_wav(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn resolve_extract(a: &ExtractArgs) -> CliResult<ExtractConfig> {
    let mut c: ExtractConfig = load_config(a.config.as_deref())?;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { c.$field = v; } )* };
    }
    set!(target, mics, win, shift, seed);
    macro_rules! set_opt {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { c.$field = Some(v); } )* };
    }
    set_opt!(input, out, image_out, trace, pilot_out);
    // a pilot source given on the command line replaces the one in the file
    if let Some(p) = &a.pilot {
        c.pilot = Some(p.clone());
        c.oracle_refs = None;
    }
    if let Some(p) = &a.oracle_refs {
        c.oracle_refs = Some(p.clone());
        c.pilot = None;
    }
    if let Some(v) = &a.init {
        c.init = match v.as_str() {
            "pilot" => InitStrategy::Pilot,
            "random" => InitStrategy::Random,
            other => {
                return Err(CliError::usage(format!(
                    "unknown init '{other}' (expected pilot or random)"
                )))
            }
        };
    }
    if let Some(v) = &a.format {
        c.format = v.parse::<WavFormat>()?;
    }
    merge_solver(&mut c.solver, &a.solver);
    Ok(c)
}

#[derive(Debug, Serialize)]
struct ExtractSummary {
    frames: usize,
    bins_extracted: usize,
    iterations: usize,
    converged: bool,
}

pub fn extract(a: ExtractArgs) -> CliResult<()> {
    let c = resolve_extract(&a)?;
    let input = c
        .input
        .as_ref()
        .ok_or_else(|| CliError::usage("extract needs --in"))?;
    let out = c
        .out
        .as_ref()
        .ok_or_else(|| CliError::usage("extract needs --out"))?;
    let mix = read_input(input)?;
    let stft_cfg = StftConfig {
        sample_rate: mix.sample_rate,
        window_length: c.win,
        shift: c.shift,
    };
    stft_cfg.validate()?;
    if mix.channels.len() < c.mics {
        return Err(CliError::usage(format!(
            "{} has {} channels, --mics asks for {}",
            input.display(),
            mix.channels.len(),
            c.mics
        )));
    }
    let pilot = match (&c.pilot, &c.oracle_refs) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "--pilot and --oracle-refs are mutually exclusive",
            ))
        }
        (None, None) => return Err(CliError::usage("extract needs --pilot or --oracle-refs")),
        (Some(p), None) => read_pilot(p)?,
        (None, Some(dir)) => {
            let refs = wav_files(dir)?
                .iter()
                .map(|p| read_input(p).map(|a| a.channels.into_iter().next().unwrap_or_default()))
                .collect::<CliResult<Vec<_>>>()?;
            if c.target >= refs.len() {
                return Err(CliError::usage(format!(
                    "target {} out of range for {} references",
                    c.target,
                    refs.len()
                )));
            }
            let others: Vec<Vec<f64>> = refs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != c.target)
                .map(|(_, r)| r.clone())
                .collect();
            oracle_pilot(&mix.channels[0], &refs[c.target], &others, &stft_cfg)?
        }
    };
    if let Some(p) = &c.pilot_out {
        write_pilot(p, &pilot)?;
    }
    let pipeline = PipelineConfig {
        stft: stft_cfg,
        mics: Some(c.mics),
        init: c.init,
    };
    let ext = c.solver.extraction(Mode::Informed, c.seed)?;
    let result = extract_speaker(&mix.channels, &pilot, &pipeline, &ext)?;

    write_wav(
        out,
        &Audio {
            sample_rate: mix.sample_rate,
            channels: vec![result.mono.clone()],
        },
        c.format,
    )?;
    if let Some(p) = &c.image_out {
        write_wav(
            p,
            &Audio {
                sample_rate: mix.sample_rate,
                channels: result.image.clone(),
            },
            c.format,
        )?;
    }
    if let Some(p) = &c.trace {
        result
            .trace
            .write_jsonl(io::BufWriter::new(fs::File::create(p)?))?;
    }
    write_echo(out, &c)?;
    let summary = ExtractSummary {
        frames: pilot.len(),
        bins_extracted: result.extracted_bins.len(),
        iterations: result.trace.len(),
        converged: result.trace.converged,
    };
    let mut stdout = io::stdout().lock();
    serde_json::to_writer(&mut stdout, &summary)?;
    writeln!(stdout)?;
    Ok(())
}

fn resolve_eval(a: &EvalArgs) -> CliResult<EvalConfig> {
    let mut c: EvalConfig = load_config(a.config.as_deref())?;
    if let Some(v) = &a.refs {
        c.refs = v.clone();
    }
    if let Some(v) = &a.est {
        c.est = Some(v.clone());
    }
    if let Some(v) = a.target {
        c.target = v;
    }
    if let Some(v) = a.channel {
        c.channel = v;
    }
    if let Some(v) = a.taps {
        c.taps = v;
    }
    if let Some(v) = &a.out {
        c.out = Some(v.clone());
    }
    Ok(c)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    target: usize,
    sdr_db: f64,
    sir_db: f64,
    sar_db: f64,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let c = resolve_eval(&a)?;
    if c.refs.is_empty() {
        return Err(CliError::usage("eval needs --refs"));
    }
    let est_path = c
        .est
        .as_ref()
        .ok_or_else(|| CliError::usage("eval needs --est"))?;
    let refs: Vec<Vec<f64>> = c
        .refs
        .iter()
        .map(|p| read_input(p).map(|a| a.channels.into_iter().next().unwrap_or_default()))
        .collect::<CliResult<_>>()?;
    let est = read_input(est_path)?;
    let est_ch = est.channels.get(c.channel).ok_or_else(|| {
        CliError::usage(format!(
            "{} has no channel {}",
            est_path.display(),
            c.channel
        ))
    })?;
    let scores = ive_core::audio::evaluate_bss(&refs, c.target, est_ch, c.taps)?;
    let report = EvalReport {
        target: c.target,
        sdr_db: scores.sdr_db,
        sir_db: scores.sir_db,
        sar_db: scores.sar_db,
    };
    match &c.out {
        Some(out) => {
            serde_json::to_writer_pretty(fs::File::create(out)?, &report)?;
            write_echo(out, &c)?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}
