use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bsmarg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsmarg"))
        .args(args)
        .output()
        .expect("run bsmarg")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn sample_lines(text: &str) -> (Value, Vec<Value>) {
    let mut lines = text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

#[test]
fn sampling_is_reproducible() {
    let (u, s) = (fixture("unitary6.json"), fixture("fock3.json"));
    let base = ["sample", "--unitary", &u, "--state", &s, "--count", "1000", "--seed", "7", "--x", "0.8"];
    let first = bsmarg(&base);
    let second = bsmarg(&base);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let one = bsmarg(&[&base[..], &["--workers", "1"]].concat());
    let four = bsmarg(&[&base[..], &["--workers", "4"]].concat());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, first.stdout);

    let other = bsmarg(&["sample", "--unitary", &u, "--state", &s, "--count", "1000", "--seed", "8", "--x", "0.8"]);
    assert_ne!(other.stdout, first.stdout);
}

#[test]
fn non_unitary_input_is_rejected() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"n_modes": 2, "re": [[1.0, 0.1], [0.0, 1.0]], "im": [[0, 0], [0, 0]]}"#);
    let out = bsmarg(&["marginal", "--unitary", &bad, "--state", &fixture("fock3.json"), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unitarity violated"), "{err}");
    assert!(err.contains("--unitary"), "{err}");
}

#[test]
fn bad_parameters_exit_with_input_error() {
    let (u, s) = (fixture("unitary6.json"), fixture("fock3.json"));
    let out = bsmarg(&["marginal", "--unitary", &u, "--state", &s, "--k", "1", "--x", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--x"));

    let out = bsmarg(&["sample", "--unitary", &u, "--state", &s, "--count", "5", "--loss", "2"]);
    assert_eq!(out.status.code(), Some(2));

    let out = bsmarg(&["marginal", "--unitary", &u, "--state", "/nonexistent.json", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--state"));
}

#[test]
fn truncation_is_recorded_in_header() {
    let out = bsmarg(&[
        "sample", "--unitary", &fixture("unitary6.json"), "--state", &fixture("fock3.json"),
        "--count", "50", "--jmax", "2",
    ]);
    assert!(out.status.success());
    let (header, rows) = sample_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header["header"]["mode"], "truncated");
    assert_eq!(header["header"]["j_max"], 2);
    assert_eq!(header["header"]["count"], 50);
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r["n_detected"] == 3));
}

#[test]
fn loss_gives_binomial_photon_counts() {
    let count = 4000;
    let out = bsmarg(&[
        "sample", "--unitary", &fixture("unitary6.json"), "--state", &fixture("fock3.json"),
        "--count", &count.to_string(), "--loss", "0.5", "--seed", "3",
    ]);
    assert!(out.status.success());
    let (header, rows) = sample_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header["header"]["loss_eta"], 0.5);
    let mut counts = [0usize; 4];
    for r in &rows {
        let k = r["n_detected"].as_u64().unwrap() as usize;
        assert_eq!(r["modes"].as_array().unwrap().len(), k);
        counts[k] += 1;
    }
    let expected = [0.125, 0.375, 0.375, 0.125];
    let chi2: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, p)| {
            let e = p * count as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom, 0.999 quantile
    assert!(chi2 < 16.27, "{counts:?} chi2 {chi2}");
}

#[test]
fn first_order_gbs_table_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let state = write(
        &dir,
        "gbs.json",
        r#"{"type": "gbs", "pairs": [[0, 1], [2, 3], [4, 5]], "r": [0.6, 0.6, 0.6], "phi": [0, 0.5, 1], "n_photons": 4}"#,
    );
    let u_path = fixture("unitary6.json");
    let table = stdout_json(&bsmarg(&["marginal", "--unitary", &u_path, "--state", &state, "--k", "1"]));
    let u: Value = serde_json::from_str(&fs::read_to_string(&u_path).unwrap()).unwrap();
    for entry in table["entries"].as_array().unwrap() {
        let out = entry["pattern"][0].as_u64().unwrap() as usize;
        let expected: f64 = (0..6)
            .map(|j| {
                let re = u["re"][j][out].as_f64().unwrap();
                let im = u["im"][j][out].as_f64().unwrap();
                re * re + im * im
            })
            .sum::<f64>()
            / 6.0;
        assert!((entry["probability"].as_f64().unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn distinguishable_pattern_matches_classical_distribution() {
    let dir = TempDir::new().unwrap();
    let state = write(&dir, "pair.json", r#"{"type": "fock", "modes": [0, 3]}"#);
    let u = fixture("unitary6.json");
    let p = stdout_json(&bsmarg(&[
        "marginal", "--unitary", &u, "--state", &state, "--pattern", "0,1", "--x", "0",
    ]));
    let classical = stdout_json(&bsmarg(&["distribution", "--unitary", &u, "--state", &state, "--classical"]));
    let expected = classical["distribution"]["0,1"].as_f64().unwrap();
    assert!((p["probability"].as_f64().unwrap() - expected).abs() < 1e-12);

    let ordered = stdout_json(&bsmarg(&[
        "marginal", "--unitary", &u, "--state", &state, "--pattern", "1,1", "--ordered", "--x", "0",
    ]));
    let expected = classical["distribution"]["1,1"].as_f64().unwrap();
    assert!((ordered["probability"].as_f64().unwrap() - expected).abs() < 1e-12);

    let collision = bsmarg(&["marginal", "--unitary", &u, "--state", &state, "--pattern", "1,1"]);
    assert_eq!(collision.status.code(), Some(2));
}

#[test]
fn written_files_load_back() {
    let dir = TempDir::new().unwrap();
    let u = dir.path().join("u.json").to_str().unwrap().to_owned();
    assert!(bsmarg(&["unitary", "--modes", "6", "--seed", "11", "-o", &u]).status.success());
    let s = fixture("fock3.json");

    let exact = dir.path().join("exact.jsonl").to_str().unwrap().to_owned();
    let classical = dir.path().join("classical.jsonl").to_str().unwrap().to_owned();
    for (x, seed, path) in [("1", "1", &exact), ("0", "2", &classical)] {
        let out = bsmarg(&[
            "sample", "--unitary", &u, "--state", &s, "--x", x, "--seed", seed, "--count", "3000", "-o", path,
        ]);
        assert!(out.status.success());
    }

    let contest = bsmarg(&["contest", "--unitary", &u, "--state", &s, "--a", &exact, "--b", &classical, "--expect", "a"]);
    let result = stdout_json(&contest);
    assert_eq!(result["winner"], "a");
    assert!(result["bootstrap_ci"][0].as_f64().unwrap() > 0.0);
    assert!(result["totals"]["a"].as_f64().unwrap().is_finite());

    let wrong = bsmarg(&["contest", "--unitary", &u, "--state", &s, "--a", &exact, "--b", &classical, "--expect", "b"]);
    assert_eq!(wrong.status.code(), Some(1));

    let report = bsmarg(&[
        "report", "--unitary", &u, "--state", &s, "--samples", &exact, "--k", "2", "--collisions", "--fail-above", "5",
    ]);
    let rows = stdout_json(&report);
    assert_eq!(rows["samples"], 3000);
    let strict = bsmarg(&[
        "report", "--unitary", &u, "--state", &s, "--samples", &classical, "--k", "2", "--fail-above", "0.001",
    ]);
    assert_eq!(strict.status.code(), Some(1));

    let table = dir.path().join("t.json").to_str().unwrap().to_owned();
    assert!(bsmarg(&["marginal", "--unitary", &u, "--state", &s, "--k", "2", "-o", &table]).status.success());
    let parsed: boson_marginals::MarginalTable = serde_json::from_str(&fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(parsed.k, 2);
}

#[test]
fn photon_number_mixture_for_gaussian_state() {
    let out = bsmarg(&[
        "sample", "--unitary", &fixture("unitary6.json"), "--state", &fixture("gbs2.json"),
        "--count", "400", "--n-dist", "0:0.2,2:0.4,4:0.4", "--seed", "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = sample_lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header["header"]["n_distribution"]["4"], 0.4);
    let sizes: Vec<u64> = rows.iter().map(|r| r["n_detected"].as_u64().unwrap()).collect();
    assert!(sizes.iter().all(|n| [0, 2, 4].contains(n)));
    assert!([0, 2, 4].iter().all(|n| sizes.contains(n)));

    let fock = bsmarg(&[
        "sample", "--unitary", &fixture("unitary6.json"), "--state", &fixture("fock3.json"),
        "--count", "10", "--n-dist", "2:1.0",
    ]);
    assert_eq!(fock.status.code(), Some(2));
}

#[test]
fn selfcheck_passes_on_shipped_fixtures() {
    let out = bsmarg(&["selfcheck"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("0 failed"));

    let from_dir = bsmarg(&["selfcheck", "--fixtures", fixtures().to_str().unwrap()]);
    assert!(from_dir.status.success());
}

fn copy_fixtures(dir: &TempDir) {
    for entry in fs::read_dir(fixtures()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
}

#[test]
fn selfcheck_names_a_corrupted_dump() {
    let dir = TempDir::new().unwrap();
    copy_fixtures(&dir);
    let path = dir.path().join("expected_fock3_x07.json");
    let mut dump: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let p = dump["distribution"]["0,1,2"].as_f64().unwrap();
    dump["distribution"]["0,1,2"] = (p + 1e-3).into();
    fs::write(&path, serde_json::to_string(&dump).unwrap()).unwrap();

    let out = bsmarg(&["selfcheck", "--fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.lines().any(|l| l.starts_with("FAIL") && l.contains("reference dump")),
        "{text}"
    );
}

#[test]
fn selfcheck_names_a_corrupted_unitary() {
    let dir = TempDir::new().unwrap();
    copy_fixtures(&dir);
    let path = dir.path().join("unitary6.json");
    let mut u: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    u["re"][0][0] = (u["re"][0][0].as_f64().unwrap() + 0.01).into();
    fs::write(&path, serde_json::to_string(&u).unwrap()).unwrap();

    let out = bsmarg(&["selfcheck", "--fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.contains("load unitary6.json")).unwrap();
    assert!(line.starts_with("FAIL") && line.contains("unitarity violated"), "{line}");
}
