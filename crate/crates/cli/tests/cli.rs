use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const COLUMNS: &str =
    "run_id,stream,detector,ensemble_type,drift_kind,mtd,da,fa,mean_acc,seed,config_json";

fn driftbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftbench"))
        .args(args)
        .env_remove("DRIFTBENCH_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run_config(config: &Path, out: &Path) -> Output {
    driftbench(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ])
}

const SMALL: &str = r#"
seeds = [1, 2]
[scale]
length = 6000
interval = 2000
[[streams]]
fixture = "SEA0"
[[ensembles]]
type = "idt"
n_members = 5
[[detectors]]
type = "adwin"
"#;

#[test]
fn minimal_config_gives_one_row() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_config(&configs_dir().join("minimal.toml"), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], COLUMNS);
    assert_eq!(lines.len(), 2);
    for f in ["detections.jsonl", "traces.csv", "report.md"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&cfg, &a).status.success());
    let o = driftbench(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    assert!(o.status.success());
    for f in ["results.csv", "detections.jsonl", "traces.csv", "report.md"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_offset_changes_the_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&cfg, &a).status.success());
    let o = driftbench(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--seed-offset",
        "7",
    ]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("results.csv")).unwrap(),
        fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn env_var_overrides_out_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, SMALL);
    let (flag, env) = (tmp.path().join("flag"), tmp.path().join("env"));
    let o = Command::new(env!("CARGO_BIN_EXE_driftbench"))
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            flag.to_str().unwrap(),
        ])
        .env("DRIFTBENCH_OUT", &env)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env.join("results.csv").exists());
    assert!(!flag.exists());
}

#[test]
fn unknown_detector_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &SMALL.replace("\"adwin\"", "\"foo\""));
    let o = run_config(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("detectors[0]"), "{}", stderr(&o));
}

#[test]
fn toml_syntax_errors_carry_the_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "seeds = [1\n[scale]\n");
    let o = run_config(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn missing_stream_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        &SMALL.replace("fixture = \"SEA0\"", "path = \"nope.toml\""),
    );
    let o = run_config(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("streams[0].path"), "{}", stderr(&o));
}

fn sweep(cfg: &Path, out: &Path) -> Output {
    driftbench(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn sweep_scores_both_candidates_and_names_a_winner() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        &format!("{SMALL}\n[tuning]\n\"adwin.delta\" = [0.002, 0.01]\n"),
    );
    let out = tmp.path().join("out");
    let o = sweep(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut tuning = csv::Reader::from_path(out.join("tuning.csv")).unwrap();
    let rows: Vec<BTreeMap<String, String>> = tuning.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| !r["score"].is_empty()));
    let winner = rows.iter().find(|r| r["rank"] == "1").expect("a winner");
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("winner:"), "{stdout}");

    // Recompute every candidate's score from results.csv.
    let mut results = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let mut by_config: BTreeMap<String, Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for r in results.deserialize::<BTreeMap<String, String>>() {
        let r = r.unwrap();
        by_config
            .entry(r["config_json"].clone())
            .or_default()
            .push((
                r["da"].parse().unwrap(),
                r["fa"].parse().unwrap(),
                r["mtd"].parse().ok(),
            ));
    }
    assert_eq!(by_config.len(), 2);
    let agg: Vec<(String, f64, f64, Option<f64>)> = by_config
        .iter()
        .map(|(json, runs)| {
            let mtds: Vec<f64> = runs.iter().filter_map(|r| r.2).collect();
            (
                json.clone(),
                mean(&runs.iter().map(|r| r.0).collect::<Vec<_>>()),
                mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>()),
                (!mtds.is_empty()).then(|| mean(&mtds)),
            )
        })
        .collect();
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (fa_lo, fa_hi) = span(agg.iter().map(|a| a.2).collect());
    let (m_lo, m_hi) = span(agg.iter().filter_map(|a| a.3).collect());
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    for (json, da, fa, mtd) in &agg {
        let mtd_n = mtd.map_or(1.0, |m| norm(m, m_lo, m_hi));
        let want = 0.5 * da + 0.3 * (1.0 - norm(*fa, fa_lo, fa_hi)) + 0.2 * (1.0 - mtd_n);
        let row = rows.iter().find(|r| &r["config_json"] == json).unwrap();
        let got: f64 = row["score"].parse().unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    let best = rows
        .iter()
        .map(|r| r["score"].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(winner["score"].parse::<f64>().unwrap(), best);

    // The best-config file runs as is.
    let best_cfg = out.join("best_idt_adwin.toml");
    let text = fs::read_to_string(&best_cfg).unwrap();
    assert!(!text.contains("[tuning]"));
    let rerun = tmp.path().join("rerun");
    let o = run_config(&best_cfg, &rerun);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(rerun.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains(winner["config_json"].replace('"', "\"\"").as_str()));
}

#[test]
fn empty_grid_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, &format!("{SMALL}\n[tuning]\n"));
    let o = sweep(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tuning"), "{}", stderr(&o));

    let cfg = write_config(&tmp, &format!("{SMALL}\n[tuning]\n\"adwin.delta\" = []\n"));
    let o = sweep(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_point_grid_warns_and_passes_through() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        &format!("{SMALL}\n[tuning]\n\"adwin.delta\" = [0.01]\n"),
    );
    let out = tmp.path().join("out");
    let o = sweep(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(out.join("best_idt_adwin.toml").exists());
}

fn report(csv_text: &str) -> (Output, String) {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("results.csv");
    fs::write(&path, csv_text).unwrap();
    let o = driftbench(&["report", path.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    (o, text)
}

#[test]
fn report_cells() {
    let (o, text) = report(&format!(
        "{COLUMNS}\n\
         a,SEA0,disagreement,mlp,abrupt,365.0,1.0,1,0.9,1,{{}}\n\
         b,SEA1,disagreement,mlp,abrupt,,0.0,0,0.9,1,{{}}\n"
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(text.contains("| 365(1) |"), "{text}");
    assert!(text.contains("| -(0) |"), "{text}");
}

#[test]
fn report_of_empty_results_is_header_only() {
    for body in [String::new(), format!("{COLUMNS}\n")] {
        let (o, text) = report(&body);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(text, "| Detector | Drift |\n|---|---|\n");
    }
}

#[test]
fn report_names_a_missing_column() {
    let (o, _) = report("run_id,stream,detector\nx,SEA0,ddm\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ensemble_type"), "{}", stderr(&o));
}

#[test]
fn report_of_a_run_has_a_cell_per_detector_stream_and_kind() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        r#"
seeds = [1]
[scale]
length = 4000
interval = 2000
[[streams]]
fixture = "SEA0"
kinds = ["abrupt", "gradual"]
[[streams]]
fixture = "Stagger"
[[ensembles]]
type = "idt"
n_members = 3
[[detectors]]
type = "ddm"
[[detectors]]
type = "page_hinkley"
"#,
    );
    let out = tmp.path().join("out");
    assert!(run_config(&cfg, &out).status.success());
    let o = driftbench(&["report", out.join("results.csv").to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    let cells: Vec<Vec<&str>> = text
        .lines()
        .skip(2)
        .map(|l| l.trim_matches('|').split('|').map(str::trim).collect())
        .collect();
    // (ddm, ph) x (G, A) rows; Stagger only has abrupt runs.
    assert_eq!(cells.len(), 4, "{text}");
    let filled: usize = cells
        .iter()
        .map(|row| row[2..].iter().filter(|c| !c.is_empty()).count())
        .sum();
    assert_eq!(filled, 2 * 3, "{text}");
    assert_eq!(text, fs::read_to_string(out.join("report.md")).unwrap());
}

#[test]
fn gen_writes_the_stream_as_csv() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("sea.csv");
    let o = driftbench(&[
        "gen",
        "SEA0",
        "--length",
        "3000",
        "--interval",
        "1000",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "f0,f1,f2,label,concept");
    assert_eq!(lines.len(), 3001);
    assert!(lines[2999].ends_with(",2"));

    let o = driftbench(&["gen", "no-such-stream"]);
    assert_eq!(o.status.code(), Some(2));
}
