use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fraclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_suites_names_every_suite() {
    let o = fraclab(&["list-suites"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "bubble",
        "interactions",
        "expansion",
        "landscape",
        "correction",
        "all",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(name)),
            "{name} missing:\n{text}"
        );
    }
}

#[test]
fn validate_reports_every_error_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "seed = 1\n[problem]\ns = 1.0\nm = 3.2\n[sweep]\nd = []\n",
    )
    .unwrap();
    let o = fraclab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3: problem"), "{err}");
    assert!(err.contains("line 6: sweep.d"), "{err}");
    assert!(err.lines().count() >= 3, "{err}");

    fs::write(&path, "[quadrature]\nrel_tol = \"tight\"\n").unwrap();
    let o = fraclab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn validate_accepts_written_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ok.toml");
    fs::write(
        &path,
        fraclab::config::ExperimentConfig::default().to_toml(),
    )
    .unwrap();
    let o = fraclab(&["validate", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn read_tables(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fraclab(&[
            "run",
            "--suite",
            "interactions",
            "--seed",
            "7",
            "--threads",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = read_tables(&a);
    assert!(ta.iter().any(|(n, _)| n == "summary.csv"));
    assert!(ta.iter().any(|(n, _)| n == "pair_interaction.csv"));
    assert_eq!(ta, read_tables(&b));

    let summary = &ta.iter().find(|(n, _)| n == "summary.csv").unwrap().1;
    let header = summary.lines().next().unwrap();
    assert!(header.contains("provenance") && header.contains("anchor"));
    for line in summary.lines().skip(1) {
        assert!(
            [",closed_form,", ",quadrature,", ",fit,"]
                .iter()
                .any(|t| line.contains(t)),
            "{line}"
        );
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["failed"], 0);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["files"].as_array().unwrap().len() >= 3);
    let cfg = fs::read_to_string(a.join("config.toml")).unwrap();
    assert_eq!(fraclab::config::validate_config(&cfg).unwrap().seed, 7);
}

#[test]
fn landscape_grid_has_full_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "suite = \"landscape\"\n[sweep]\nk = [16]\n").unwrap();
    let out = dir.path().join("o");
    let o = fraclab(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = fs::read_to_string(out.join("landscape_positive_k16.csv")).unwrap();
    assert!(grid.lines().count() > 64 * 64);
    let crit = fs::read_to_string(out.join("critical_points.csv")).unwrap();
    assert_eq!(crit.lines().count(), 3);
}

#[test]
fn invalid_override_is_rejected() {
    let o = fraclab(&["run", "--suite", "bubble", "--out", ""]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
