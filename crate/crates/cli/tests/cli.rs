use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-parametrix"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

/// The appendixB preset reduced to one time and a small export grid.
fn small_config(dir: &Path) -> PathBuf {
    let o = bin().args(["preset", "appendixB"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let mut text = String::from_utf8(o.stdout).unwrap();
    text = text
        .lines()
        .map(|l| match l {
            l if l.starts_with("t = ") => "t = [0.25]".to_string(),
            l if l.starts_with("out = ") => format!("out = {:?}", dir.join("out").display().to_string()),
            l if l.starts_with("max_nodes = ") => "max_nodes = 64".to_string(),
            l if l.starts_with("n_paths = ") => "n_paths = 20000".to_string(),
            l => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn preset_exa2_states_its_constraint() {
    let o = bin().args(["preset", "exa2"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("0 < theta < 2 upsilon"), "{text}");
    assert!(text.contains("kind = \"dyadic_discrete\""));
    assert!(text.contains("artifact_choices"));
}

#[test]
fn unknown_preset_is_a_config_error() {
    let o = bin().args(["preset", "exa9"]).output().unwrap();
    assert_eq!(code(&o), 4);
    assert_eq!(stderr_json(&o)["kind"], "config");
}

#[test]
fn stages_with_a_gap_are_refused() {
    let dir = scratch("gap");
    let o = bin()
        .args(["run", "--preset", "exa1", "--stages", "kernel,validate", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("consecutive"));
}

#[test]
fn divergent_series_exits_with_diagnostics() {
    let dir = scratch("diverge");
    let cfg = small_config(&dir);
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("envelope_c = 1.0", "envelope_c = 30.0")
        .replacen("value = 1.0", "value = 30.0", 1);
    fs::write(&cfg, text).unwrap();
    let o = bin().args(["run", "--config"]).arg(&cfg).args(["--t", "1", "--stages", "parametrix"]).output().unwrap();
    assert_eq!(code(&o), 3);
    let e = stderr_json(&o);
    assert_eq!(e["kind"], "non_convergence");
    assert!(e["details"]["diagnostics"]["ratios"].is_array());
    assert!(dir.join("out/error.json").is_file());
}

#[test]
fn runs_are_reproducible_and_reuse_cached_kernels() {
    let dir = scratch("repro");
    let cfg = small_config(&dir);
    let out = dir.join("out");
    let first = bin().args(["run", "--exact", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let a = snapshot(&out);
    for f in ["effective_config.toml", "exponent.json", "p_t0.25.csv", "validation.json", "simulation.json", "samples.csv"] {
        assert!(a.iter().any(|(n, _)| n == f), "missing {f}");
    }
    let effective = fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(effective.contains("half_width") && effective.contains("spacing"), "{effective}");

    let second = bin().args(["run", "--exact", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&second), 0);
    assert!(a == snapshot(&out), "outputs changed between identical runs");

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let hash = summary["cache"]["hash"].as_str().unwrap().to_string();
    let reuse = bin().args(["run", "--config"]).arg(&cfg).args(["--stages", "validate"]).output().unwrap();
    assert_eq!(code(&reuse), 0, "{}", String::from_utf8_lossy(&reuse.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cache"]["hash"], hash.as_str());
    assert_eq!(summary["cache"]["reused"], true);
    assert_eq!(summary["stages"][0]["status"], "reused");

    // an impossible composition tolerance turns the run into a validation failure
    let strict = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--stages", "validate", "--tol", "composed=1e-12"])
        .output()
        .unwrap();
    assert_eq!(code(&strict), 2);
    let table = String::from_utf8(strict.stdout).unwrap();
    assert!(table.contains("chapman_kolmogorov") && table.contains("fail"), "{table}");
}
