use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ive_core::audio::{write_wav, Audio, WavFormat};
use ive_core::room::{two_speaker_scene, SceneConfig};

fn ive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ive"))
        .args(args)
        .output()
        .expect("spawn ive")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &[
    "simulate", "--d", "3", "--trials", "6", "--N-grid", "50,100", "--seed", "11",
];

#[test]
fn simulate_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let mut args = SMALL.to_vec();
    args.extend(["--out", p(&a)]);
    assert_eq!(code(&ive(&args)), 0);
    let mut args = vec!["--threads", "1"];
    args.extend_from_slice(SMALL);
    args.extend(["--out", p(&b)]);
    assert_eq!(code(&ive(&args)), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.json").exists());
    let echo = fs::read_to_string(dir.path().join("a.csv.config.json")).unwrap();
    assert!(echo.contains("\"trials\": 6"));
}

#[test]
fn simulate_to_stdout_has_header_and_rows() {
    let o = ive(SMALL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "axis_value,method,success_rate_pct,mean_sir_db_successful,trials"
    );
    assert_eq!(lines.len(), 1 + 2 * 4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"d": 3, "trials": 50, "N_grid": [40], "methods": ["fastica"]}"#,
    )
    .unwrap();
    let out = dir.path().join("o.csv");
    let o = ive(&[
        "simulate",
        "--config",
        p(&cfg),
        "--trials",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",2"), "{csv}");
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unknown_config_key_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, "{\n  \"trails\": 3\n}").unwrap();
    let o = ive(&["simulate", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("trails") && err.contains("line 2"), "{err}");
}

#[test]
fn unknown_flag_and_missing_subcommand_exit_1() {
    assert_eq!(code(&ive(&["simulate", "--bogus"])), 1);
    assert_eq!(code(&ive(&[])), 1);
    assert_eq!(code(&ive(&["simulate", "--methods", "pca"])), 1);
    assert_eq!(code(&ive(&["simulate", "--d", "1", "--trials", "1"])), 1);
}

#[test]
fn both_grids_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"N_grid": [40], "sir_ini_grid": [0.0]}"#).unwrap();
    assert_eq!(code(&ive(&["simulate", "--config", p(&cfg)])), 1);
}

#[test]
fn eps2_in_blind_mode_warns() {
    let o = ive(&[
        "simulate",
        "--d",
        "3",
        "--trials",
        "1",
        "--N-grid",
        "50",
        "--methods",
        "fastica,fastiva",
        "--eps2",
        "0.3",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    let o = ive(&[
        "simulate",
        "--d",
        "3",
        "--trials",
        "1",
        "--N-grid",
        "50",
        "--methods",
        "ifastica",
        "--eps2",
        "0.3",
    ]);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn negative_sir_grid_parses() {
    let o = ive(&[
        "simulate",
        "--d",
        "3",
        "--trials",
        "1",
        "--N",
        "60",
        "--sir-ini-grid",
        "-10,0",
        "--methods",
        "ifastica",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("\n-10,"));
}

#[test]
fn version_lists_components() {
    let o = ive(&["--version"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("newton-update") && out.contains("mvdr-constraint"));
}

#[test]
fn json_errors_are_machine_readable() {
    let o = ive(&["--json-errors", "simulate", "--methods", "pca"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["exit_code"], 1);
    assert_eq!(v["kind"], "usage");
}

#[test]
fn pilot_and_oracle_refs_conflict() {
    let o = ive(&[
        "extract",
        "--in",
        "x.wav",
        "--pilot",
        "p.csv",
        "--oracle-refs",
        "d",
        "--out",
        "o.wav",
    ]);
    assert_eq!(code(&o), 1);
}

fn write_scene(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = SceneConfig {
        duration_s: 1.5,
        ..SceneConfig::default()
    };
    let scene = two_speaker_scene(&cfg, 3).unwrap();
    let mix = dir.join("mix.wav");
    write_wav(
        &mix,
        &Audio {
            sample_rate: scene.fs,
            channels: scene.mixture.clone(),
        },
        WavFormat::Float32,
    )
    .unwrap();
    let refs = dir.join("refs");
    fs::create_dir(&refs).unwrap();
    for (j, img) in scene.images.iter().enumerate() {
        write_wav(
            &refs.join(format!("s{j}.wav")),
            &Audio {
                sample_rate: scene.fs,
                channels: vec![img[0].clone()],
            },
            WavFormat::Float32,
        )
        .unwrap();
    }
    (mix, refs)
}

#[test]
fn extract_with_oracle_pilot_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (mix, refs) = write_scene(dir.path());
    let out = dir.path().join("est.wav");
    let image = dir.path().join("img.wav");
    let trace = dir.path().join("trace.jsonl");
    let pilot = dir.path().join("pilot.csv");
    let o = ive(&[
        "extract",
        "--in",
        p(&mix),
        "--oracle-refs",
        p(&refs),
        "--out",
        p(&out),
        "--image-out",
        p(&image),
        "--trace",
        p(&trace),
        "--pilot-out",
        p(&pilot),
        "--max-iters",
        "30",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["bins_extracted"].as_u64().unwrap() > 100);
    assert!(out.exists() && image.exists());
    assert!(dir.path().join("est.wav.config.json").exists());
    let trace_lines = fs::read_to_string(&trace).unwrap();
    assert!(trace_lines.lines().count() >= 1);
    let pilot_text = fs::read_to_string(&pilot).unwrap();
    assert!(pilot_text.starts_with("frame_index,r_value"));

    // the written pilot drives a second run with the same result
    let out2 = dir.path().join("est2.wav");
    let o = ive(&[
        "extract",
        "--in",
        p(&mix),
        "--pilot",
        p(&pilot),
        "--out",
        p(&out2),
        "--max-iters",
        "30",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());

    let r0 = refs.join("s0.wav");
    let r1 = refs.join("s1.wav");
    let scores = dir.path().join("scores.json");
    let refs_arg = format!("{},{}", p(&r0), p(&r1));
    let o = ive(&[
        "eval",
        "--refs",
        &refs_arg,
        "--est",
        p(&out),
        "--out",
        p(&scores),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&scores).unwrap()).unwrap();
    assert!(v["sir_db"].as_f64().unwrap() > 0.0, "{v}");
}

#[test]
fn eval_length_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    let e = dir.path().join("e.wav");
    let wav = |path: &Path, len: usize| {
        let x: Vec<f64> = (0..len)
            .map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5)
            .collect();
        write_wav(
            path,
            &Audio {
                sample_rate: 16000,
                channels: vec![x],
            },
            WavFormat::Float32,
        )
        .unwrap();
    };
    wav(&a, 4000);
    wav(&b, 4000);
    wav(&e, 3999);
    let refs = format!("{},{}", p(&a), p(&b));
    let o = ive(&["eval", "--refs", &refs, "--est", p(&e)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("3999"));
}

#[test]
fn missing_input_file_exits_1() {
    let o = ive(&[
        "extract",
        "--in",
        "/nonexistent.wav",
        "--pilot",
        "/nonexistent.csv",
        "--out",
        "/tmp/x.wav",
    ]);
    assert_eq!(code(&o), 1);
}
