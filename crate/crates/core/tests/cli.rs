use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ldp_partition::{fit_private_regression, load};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp-partition"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LDP_PARTITION_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_AUDIT: [&str; 6] = ["--audit-tuples", "2000", "--audit-tail-reps", "2000", "--audit-variance-reps", "2000"];

#[test]
fn privatize_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a/agg.csv"), dir.path().join("b/agg.csv"));
    for (path, mode) in [(&a, "faithful"), (&b, "faithful")] {
        let out = run(&["privatize", "--n", "300", "--seed", "12", "--mode", mode, "--out", p(path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(a.with_extension("json")).unwrap(), fs::read(b.with_extension("json")).unwrap());

    let fast = dir.path().join("fast.csv");
    assert_eq!(code(&run(&["privatize", "--n", "300", "--seed", "12", "--mode", "fast", "--out", p(&fast)])), 0);
    let (x, y) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&fast).unwrap());
    let schema = |s: &str| s.lines().map(|l| l.splitn(3, ',').take(2).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
    assert_ne!(x, y);
    assert_eq!(schema(&x), schema(&y));
}

#[test]
fn env_seed_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let via_env = dir.path().join("env.csv");
    let via_flag = dir.path().join("flag.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_ldp-partition"))
        .args(["privatize", "--n", "200", "--out", p(&via_env)])
        .env("SOURCE_DATE_EPOCH", "0")
        .env("LDP_PARTITION_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_ldp-partition"))
        .args(["privatize", "--n", "200", "--seed", "77", "--out", p(&via_flag)])
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&via_env).unwrap(), fs::read(&via_flag).unwrap());
}

#[test]
fn estimate_exports_the_fit_of_the_published_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let agg_path = dir.path().join("agg.csv");
    let est_path = dir.path().join("est.csv");
    assert_eq!(code(&run(&["privatize", "--n", "500", "--h", "0.2", "--radius", "1", "--out", p(&agg_path)])), 0);
    let out = run(&["estimate", "--input", p(&agg_path), "--c-threshold", "0.3", "--out", p(&est_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let expected = fit_private_regression(&load(&agg_path).unwrap(), 0.3).unwrap();
    let mut reader = csv::Reader::from_path(&est_path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["j", "cell_coords", "value"]);
    let values: Vec<f64> = reader.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(values, expected.values());
}

#[test]
fn noiseless_privatize_publishes_binned_means() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agg.csv");
    let out = run(&["privatize", "--noiseless", "--n", "400", "--h", "0.25", "--radius", "1", "--out", p(&path)]);
    assert_eq!(code(&out), 0);
    let agg = load(&path).unwrap();
    assert!(agg.params.is_noiseless());
    for (nu, mu) in agg.nu_tilde.iter().zip(&agg.mu_tilde) {
        let count = mu * 400.0;
        assert!((count - count.round()).abs() < 1e-9);
        assert!(*nu != 0.0 || *mu == 0.0 || nu.abs() < 1e-300);
    }
    assert!((agg.mu_tilde.iter().sum::<f64>() - 1.0).abs() < 1e-12, "all points of U[0,1] lie in the ball");
}

#[test]
fn audit_passes_when_calibrated_and_fails_when_sigma_z_is_halved() {
    let mut args = vec!["audit", "--alpha", "1", "--m-trunc", "1", "--n", "200"];
    args.extend(SMALL_AUDIT);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));

    let halved = (32f64.sqrt() / 2.0).to_string();
    let mut bad = args.clone();
    bad.extend(["--sigma-z", halved.as_str()]);
    let out = run(&bad);
    assert_eq!(code(&out), 3);
    let first = stdout(&out).lines().next().unwrap().to_string();
    assert!(first.starts_with("FAIL privacy-ratio"), "{first}");
    assert!(first.contains("worst case=1.5000"), "{first}");
}

#[test]
fn noiseless_audit_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("audit.json");
    let mut args = vec!["audit", "--noiseless", "--n", "200", "--out", p(&report)];
    args.extend(SMALL_AUDIT);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["privacy"]["skipped"], true);
    assert_eq!(json["privacy"]["alpha"], "inf");
    assert_eq!(json["passed"], true);
}

#[test]
fn sweep_output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for jobs in ["1", "3"] {
        let path = dir.path().join(format!("sweep{jobs}.csv"));
        let out = run(&[
            "sweep", "--n", "256,1024", "--seeds", "0,1,2,3", "--n-test", "5000", "--mode", "faithful", "--jobs", jobs,
            "--seed", "5", "--out", p(&path),
        ]);
        assert_eq!(code(&out), 0);
        files.push((fs::read(&path).unwrap(), fs::read(path.with_extension("json")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let csv = String::from_utf8(files[0].0.clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,seed,h_n,c_n,m_n,r_n,risk,std_error,condition_2d");
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn noiseless_sweep_dominates_the_private_one() {
    let dir = tempfile::tempdir().unwrap();
    let medians = |extra: &[&str], name: &str| -> Vec<f64> {
        let path = dir.path().join(name);
        let mut args = vec!["sweep", "--n", "1024,4096,16384", "--seeds", "0,1,2,3,4", "--n-test", "20000", "--out", p(&path)];
        args.extend(extra);
        assert_eq!(code(&run(&args)), 0);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        json["per_n"].as_array().unwrap().iter().map(|r| r["median_risk"].as_f64().unwrap()).collect()
    };
    let private = medians(&[], "private.csv");
    let plain = medians(&["--noiseless"], "plain.csv");
    for (a, b) in private.iter().zip(&plain) {
        assert!(a >= b, "private {a} < non-private {b}");
    }
}

#[test]
fn dump_config_round_trips_through_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check", "--dump-config", "--scenario", "heavytail-mixture", "--n", "100,200", "--h", "0.5", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, stdout(&out)).unwrap();
    let again = run(&["check", "--dump-config", "--config", p(&cfg_path)]);
    assert_eq!(stdout(&again), stdout(&out));

    let flags_win = run(&["check", "--dump-config", "--config", p(&cfg_path), "--seed", "4"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&flags_win)).unwrap();
    assert_eq!(json["seed"], 4);
    assert_eq!(json["scenario"], "heavytail-mixture");
}

#[test]
fn help_lists_every_flag() {
    let help = stdout(&run(&["sweep", "--help"]));
    for flag in [
        "--scenario", "--d", "--alpha", "--n", "--seeds", "--mode", "--c-prime", "--m-scale", "--r-scale", "--n-test",
        "--out", "--seed", "--jobs", "--config", "--dump-config",
    ] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = dir.path().join("bad.json");
    fs::write(&bad_key, r#"{"alpah": 1.0}"#).unwrap();
    assert_eq!(code(&run(&["check", "--config", p(&bad_key)])), 2);
    assert_eq!(code(&run(&["check", "--alpha", "-1"])), 2);
    assert_eq!(code(&run(&["check", "--n", "200,100"])), 2);
    assert_eq!(code(&run(&["check", "--scenario", "nope"])), 2);
    assert_eq!(code(&run(&["check", "--bogus-flag"])), 2);
    assert_eq!(code(&run(&["check", "--config", p(&dir.path().join("missing.json"))])), 4);
    assert_eq!(code(&run(&["estimate", "--input", p(&dir.path().join("missing.csv"))])), 4);
    assert_eq!(code(&run(&["check", "--d", "3", "--h", "0.01"])), 2, "cell cap");

    let agg = dir.path().join("agg.csv");
    assert_eq!(code(&run(&["privatize", "--n", "100", "--out", p(&agg)])), 0);
    assert_eq!(code(&run(&["check", "--input", p(&agg)])), 0);
    let text = fs::read_to_string(&agg).unwrap();
    let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    fs::write(&agg, truncated).unwrap();
    assert_eq!(code(&run(&["check", "--input", p(&agg)])), 2);
}
