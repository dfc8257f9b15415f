use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn frailty(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frailty"))
        .current_dir(dir)
        .env_remove("FRAILTY_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = frailty(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn manifest_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
}

const SMALL: [&str; 6] = ["--clusters", "60", "--covariates", "uniform:0,1", "--censor-rate", "0.3"];

#[test]
fn generate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["generate", "--seed", "3", "--out", "data.csv"];
    args.extend(SMALL);
    let summary = ok(d, &args);
    assert!(summary.contains("Observations:          120"), "{summary}");
    let text = fs::read_to_string(d.join("data.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,rep,time,status,Z1,Z2"));
    assert_eq!(lines.count(), 120);

    ok(d, &["fit", "--data", "data.csv", "--out-dir", "fit"]);
    assert_eq!(manifest_value(&d.join("fit/manifest.txt"), "input.data.sha256"), manifest_value(&d.join("data.manifest"), "output.data.sha256"));
    let report = fs::read_to_string(d.join("fit/report.txt")).unwrap();
    assert!(report.contains("n = 120 observations, 60 clusters"), "{report}");
    let baseline = fs::read_to_string(d.join("fit/baseline.csv")).unwrap();
    assert!(baseline.starts_with("time,n_risk,n_event,cumhaz,surv\n"));
    let trace = fs::read_to_string(d.join("fit/trace.csv")).unwrap();
    assert!(trace.starts_with("iter,Z1,Z2,theta,loglik\n"));
    assert_eq!(manifest_value(&d.join("fit/manifest.txt"), "option.frailty"), "gamma");
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a.csv", "b.csv"] {
        let mut args = vec!["generate", "--seed", "11", "--cluster-size", "poisson:2,1", "--out", out];
        args.extend(SMALL);
        ok(d, &args);
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    for (out, workers) in [("s1", "1"), ("s2", "3")] {
        let mut args = vec!["simulate", "--reps", "3", "--se", "none", "--seed", "5", "--workers", workers, "--out-dir", out];
        args.extend(SMALL);
        ok(d, &args);
    }
    assert_eq!(fs::read(d.join("s1/summary.csv")).unwrap(), fs::read(d.join("s2/summary.csv")).unwrap());
    let summary = fs::read_to_string(d.join("s1/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["", "value", "mean.hat", "sd.hat", "mean.se", "cov.95CI"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["generate", "--seed", "2", "--out", "data.csv"];
    args.extend(SMALL);
    ok(d, &args);

    let usage = frailty(d, &["generate", "--censor-rate", "1.5"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("--censor-rate"));
    assert_eq!(frailty(d, &["generate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(frailty(d, &["fit", "--data", "data.csv", "--status", "event"]).status.code(), Some(2));
    assert_eq!(frailty(d, &["fit", "--data", "missing.csv"]).status.code(), Some(2));

    let nc = frailty(d, &["fit", "--data", "data.csv", "--max-iter", "1", "--rel-tol", "1e-300", "--out-dir", "nc"]);
    assert_eq!(nc.status.code(), Some(3));
    for f in ["report.txt", "baseline.csv", "trace.csv", "manifest.txt"] {
        assert!(d.join("nc").join(f).exists(), "{f} not written");
    }
    assert_eq!(manifest_value(&d.join("nc/manifest.txt"), "converged"), "false");

    let fit = ok(d, &["cov", "--data", "data.csv", "--method", "bootstrap", "--B", "4", "--out", "c.csv"]);
    assert!(fit.contains("weighted bootstrap"));
    let text = fs::read_to_string(d.join("data.csv")).unwrap();
    let constant: String = text.lines().enumerate().map(|(i, l)| if i == 0 { format!("{l},k\n") } else { format!("{l},0.5\n") }).collect();
    fs::write(d.join("constant.csv"), constant).unwrap();
    let singular = frailty(d, &["cov", "--data", "constant.csv", "--covariates", "Z1,k", "--out", "s.csv"]);
    assert_eq!(singular.status.code(), Some(4), "{}", String::from_utf8_lossy(&singular.stderr));
}

#[test]
fn unit_weights_bootstrap_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["generate", "--seed", "8", "--out", "data.csv"];
    args.extend(SMALL);
    ok(d, &args);
    ok(
        d,
        &["cov", "--data", "data.csv", "--method", "bootstrap", "--B", "3", "--unit-weights", "--lambda-times", "60", "--out", "cov.csv"],
    );
    let text = fs::read_to_string(d.join("cov.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("parameter,Z1,Z2,theta,Lambda@60,se"));
    for line in lines {
        assert!(line.split(',').skip(1).all(|v| v == "0"), "{line}");
    }
    assert_eq!(manifest_value(&d.join("cov.manifest"), "bootstrap.converged"), "3");
}

#[test]
fn cov_reproduces_a_fit_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["generate", "--seed", "9", "--out", "data.csv"];
    args.extend(SMALL);
    ok(d, &args);
    ok(d, &["fit", "--data", "data.csv", "--rel-tol", "1e-8", "--out-dir", "fit"]);
    ok(d, &["cov", "--fit-manifest", "fit/manifest.txt", "--out", "a.csv"]);
    ok(d, &["cov", "--data", "data.csv", "--rel-tol", "1e-8", "--out", "b.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(manifest_value(&d.join("a.manifest"), "fit_digest"), manifest_value(&d.join("fit/manifest.txt"), "fit_digest"));

    fs::write(d.join("data.csv"), fs::read_to_string(d.join("data.csv")).unwrap().replacen(",1,", ",0,", 1)).unwrap();
    let stale = frailty(d, &["cov", "--fit-manifest", "fit/manifest.txt", "--out", "c.csv"]);
    assert_eq!(stale.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&stale.stderr).contains("changed"));
}

#[test]
fn ingestion_drops_missing_rows_and_numbers_string_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("id,t,dead,x,note\n");
    let rows = [
        ("a", 5.0, 1, "0.1"),
        ("a", 7.0, 0, "0.4"),
        ("b", 3.0, 1, "NA"),
        ("b", 9.0, 1, "0.9"),
        ("c", 4.0, 0, "0.3"),
        ("c", 6.0, 1, "0.2"),
        ("d", 8.0, 1, "0.7"),
        ("d", 2.0, 1, "0.5"),
        ("e", 1.0, 1, "0.6"),
        ("e", 10.0, 0, ""),
    ];
    for (id, t, s, x) in rows {
        csv.push_str(&format!("{id},{t},{s},{x},text\n"));
    }
    fs::write(d.join("in.csv"), csv).unwrap();
    let out = frailty(
        d,
        &["fit", "--data", "in.csv", "--time", "t", "--status", "dead", "--cluster", "id", "--covariates", "x", "--out-dir", "f"],
    );
    assert!(out.status.code() == Some(0) || out.status.code() == Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropped 2 of 10 rows"));
    let report = fs::read_to_string(d.join("f/report.txt")).unwrap();
    assert!(report.contains("n = 8 observations, 5 clusters"), "{report}");
    assert_eq!(manifest_value(&d.join("f/manifest.txt"), "rows_dropped"), "2");
}

#[test]
fn no_frailty_fit_omits_theta() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["generate", "--seed", "1", "--frailty", "none", "--beta", "0", "--out", "data.csv"];
    args.extend(SMALL);
    ok(d, &args);
    ok(d, &["fit", "--data", "data.csv", "--frailty", "none", "--out-dir", "cox"]);
    assert!(fs::read_to_string(d.join("cox/trace.csv")).unwrap().starts_with("iter,Z1,loglik\n"));
    let gamma = ok(d, &["fit", "--data", "data.csv", "--out-dir", "gamma"]);
    assert!(gamma.contains("edge of its range"), "{gamma}");
    assert_eq!(frailty(d, &["fit", "--data", "data.csv", "--frailty", "none", "--theta-init", "1"]).status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "[generate]\nclusters = 40\ncovariates = \"uniform:0,1\"\nbeta = [\"log(2)\", \"log(3)\"]\nseed = 1\n",
    )
    .unwrap();
    ok(d, &["generate", "--config", "run.toml", "--seed", "4", "--out", "a.csv"]);
    let m = d.join("a.manifest");
    assert_eq!(manifest_value(&m, "option.clusters"), "40");
    assert_eq!(manifest_value(&m, "option.seed"), "4");
    assert!(manifest_value(&m, "input.config.sha256").len() == 64);
    assert_eq!(fs::read_to_string(d.join("a.csv")).unwrap().lines().count(), 81);
}

#[test]
fn baseline_expressions_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (out, flag, value) in [
        ("inv.csv", "--lambda0-inv", "t^(1/4.6)/0.01"),
        ("cum.csv", "--lambda0-cum", "(0.01*t)^4.6"),
        ("preset.csv", "--baseline", "weibull-cum:0.01,4.6"),
    ] {
        ok(d, &["generate", "--seed", "6", "--clusters", "20", "--censor", "none", flag, value, "--out", out]);
    }
    let times = |f: &str| -> Vec<f64> {
        fs::read_to_string(d.join(f)).unwrap().lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
    };
    let inv = times("inv.csv");
    for other in [times("cum.csv"), times("preset.csv")] {
        for (a, b) in inv.iter().zip(&other) {
            assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
        }
    }
    ok(
        d,
        &["generate", "--seed", "6", "--clusters", "20", "--lambda0", "2^sin(0.1*pi*t)*4.6*(0.01*t)^4.6/t", "--out", "osc.csv"],
    );
    assert!(times("osc.csv").iter().all(|t| t.is_finite() && *t > 0.0));
    let bad = frailty(d, &["generate", "--lambda0", "4.6*(0.01*t)^^4.6"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--lambda0"));
}

#[test]
fn explicit_censoring_times() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let times: Vec<String> = (0..40).map(|i| (80 + i).to_string()).collect();
    fs::write(d.join("censor.txt"), times.join("\n")).unwrap();
    ok(d, &["generate", "--seed", "2", "--clusters", "20", "--censor-time", "@censor.txt", "--out", "c.csv"]);
    let text = fs::read_to_string(d.join("c.csv")).unwrap();
    for (i, line) in text.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let t: f64 = f[2].parse().unwrap();
        let c = 80.0 + i as f64;
        assert!(t <= c, "{t} beyond its censoring time {c}");
        assert_eq!(f[3] == "0", t == c, "{line}");
    }
    let bad = frailty(d, &["generate", "--clusters", "21", "--censor-time", "@censor.txt"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--censor-time: 40 times given for 42 observations"));
}

#[test]
fn help_documents_the_worker_variable() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["simulate", "--help"]);
    assert!(help.contains("FRAILTY_WORKERS"));
    assert!(!ok(dir.path(), &["cov", "--help"]).contains("unit-weights"));
}
