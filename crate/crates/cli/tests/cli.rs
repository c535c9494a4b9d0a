use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("graph-matern-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graph-matern")).args(args).output().unwrap()
}

/// Writes `config` to dir/name and runs `cmd` on it with output in dir/out.
fn run_config(dir: &Path, name: &str, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(name);
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn assert_config_error(o: &Output, needle: &str) {
    assert_eq!(o.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(needle), "expected {needle:?} in {err}");
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join("out").join(file)).unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = scratch("unknown");
    let o = run_config(&dir, "c.toml", "sample", "seed = 1\nn = 50\nbandwidth = 0.3\n", &[]);
    assert_config_error(&o, "bandwidth");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = scratch("noseed");
    let o = run_config(&dir, "c.toml", "sample", "n = 50\n", &[]);
    assert_config_error(&o, "seed is mandatory");
}

#[test]
fn missing_input_file_is_a_config_error() {
    let dir = scratch("nofile");
    let cfg = "seed = 1\ndomain = \"points\"\npoints = \"/nonexistent/points.csv\"\nm = 1\nvol = 1.0\nh = 0.1\n";
    let o = run_config(&dir, "c.toml", "sample", cfg, &[]);
    assert_config_error(&o, "does not exist");
}

#[test]
fn out_of_range_values_are_config_errors() {
    let dir = scratch("range");
    assert_config_error(&run_config(&dir, "a.toml", "sample", "seed = 1\ns = -1\n", &[]), "positive");
    assert_config_error(&run_config(&dir, "b.toml", "converge", "seed = 1\n", &[]), "[rates]");
    let cfg = "seed = 1\nk = 5\nm = 0.5\n[moons]\nn = 50\n";
    assert_config_error(&run_config(&dir, "c.toml", "classify", cfg, &[]), "at least 1");
    assert_config_error(&run_config(&dir, "d.yaml", "sample", "seed = 1\n", &[]), ".toml or .json");
    assert_config_error(&run_config(&dir, "e.toml", "sample", "seed = 1\nn = \"many\"\n", &[]), "n");
}

#[test]
fn sample_circle_is_reproducible() {
    let dir = scratch("sample");
    let cfg = "seed = 7\nn = 200\ndraws = 3\n";
    assert_ok(&run_config(&dir, "c.toml", "sample", cfg, &[]));
    let field = read(&dir, "field.csv");
    let lines: Vec<&str> = field.lines().collect();
    assert_eq!(lines.len(), 201);
    assert_eq!(lines[0], "node,x0,x1,u0,u1,u2");
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 6);
        assert!((v[1].hypot(v[2]) - 1.0).abs() < 1e-12);
    }
    let precision = read(&dir, "precision.mtx");
    assert!(precision.starts_with("%%MatrixMarket"));
    let timing: serde_json::Value = serde_json::from_str(&read(&dir, "timing.json")).unwrap();
    assert_eq!(timing["method"], "cholesky");

    assert_ok(&run_config(&dir, "c.toml", "sample", cfg, &[]));
    assert_eq!(read(&dir, "field.csv"), field);
    assert_eq!(read(&dir, "precision.mtx"), precision);

    assert_ok(&run_config(&dir, "c.toml", "sample", cfg, &["--seed", "8"]));
    assert_ne!(read(&dir, "field.csv"), field);
}

#[test]
fn sample_fractional_smoothness_on_the_sphere_from_json() {
    let dir = scratch("sphere");
    let cfg = r#"{"seed": 3, "domain": "sphere", "n": 150, "s": 1.5, "truncation": 40}"#;
    assert_ok(&run_config(&dir, "c.json", "sample", cfg, &[]));
    let timing: serde_json::Value = serde_json::from_str(&read(&dir, "timing.json")).unwrap();
    assert_eq!(timing["method"], "spectral");
    assert!(!dir.join("out/precision.mtx").exists());
    assert_eq!(read(&dir, "field.csv").lines().next().unwrap(), "node,x0,x1,x2,u0");
}

#[test]
fn sample_from_point_file() {
    let dir = scratch("points");
    let pts: String = (0..120).map(|i| format!("{},{}\n", (i % 12) as f64 / 11.0, (i / 12) as f64 / 9.0)).collect();
    fs::write(dir.join("pts.csv"), pts).unwrap();
    let cfg =
        format!("seed = 1\ndomain = \"points\"\npoints = {:?}\nm = 2\nvol = 1.0\nh = 0.25\n", dir.join("pts.csv"));
    assert_ok(&run_config(&dir, "c.toml", "sample", &cfg, &[]));
    assert_eq!(read(&dir, "field.csv").lines().count(), 121);
}

#[test]
fn invert_writes_posterior_summaries() {
    let dir = scratch("invert");
    let cfg = "seed = 11\nn = 120\nn0 = 3\nsteps = 60\nthin = 2\n";
    assert_ok(&run_config(&dir, "c.toml", "invert", cfg, &[]));
    let post = read(&dir, "posterior.csv");
    assert_eq!(post.lines().count(), 121);
    for l in post.lines().skip(1) {
        let v: Vec<&str> = l.split(',').collect();
        let num = |k: usize| v[k].parse::<f64>().unwrap();
        assert!(num(5) <= num(4) + 1e-12 && num(4) <= num(6) + 1e-12, "{l}");
        assert!(num(8) > 0.0 && num(8) <= num(9));
    }
    let theta = read(&dir, "theta.csv");
    assert_eq!(theta.lines().next().unwrap(), "step,theta1,theta2,theta3");
    assert_eq!(theta.lines().count(), 61);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["observations"], 60);
    assert_eq!(summary["burn_in"], 12);

    assert_ok(&run_config(&dir, "c.toml", "invert", cfg, &[]));
    assert_eq!(read(&dir, "posterior.csv"), post);
}

#[test]
fn krige_synthetic_is_reproducible() {
    let dir = scratch("krige");
    let cfg = "seed = 5\nrepeats = 2\nmax_evals = 150\nn0 = 4\nvariants = [\"stationary_fixed\", \"nonstationary_inferred\"]\n\
               [synthetic]\nn = 150\ncutoff = 0.2\n";
    assert_ok(&run_config(&dir, "c.toml", "krige", cfg, &[]));
    let scores = read(&dir, "scores.csv");
    assert_eq!(scores.lines().count(), 5);
    let table = read(&dir, "table.csv");
    assert!(table.lines().nth(2).unwrap().starts_with("nonstationary_inferred,"));
    assert_ok(&run_config(&dir, "c.toml", "krige", cfg, &[]));
    assert_eq!(read(&dir, "scores.csv"), scores);
}

#[test]
fn krige_from_files() {
    let dir = scratch("krige-files");
    let n = 60;
    let mut edges = String::new();
    for i in 0..n {
        for d in 1..=3 {
            edges.push_str(&format!("{i},{},{}\n", (i + d) % n, 0.1 * d as f64));
        }
    }
    let values: String = (0..n).map(|i| format!("{i},{}\n", (i as f64 * 0.2).sin())).collect();
    fs::write(dir.join("edges.csv"), edges).unwrap();
    fs::write(dir.join("values.csv"), values).unwrap();
    let cfg = format!(
        "seed = 2\nedges = {:?}\nvalues = {:?}\nrepeats = 2\nmax_evals = 100\nn0 = 3\nvariants = [\"stationary_inferred\"]\n",
        dir.join("edges.csv"),
        dir.join("values.csv")
    );
    assert_ok(&run_config(&dir, "c.toml", "krige", &cfg, &[]));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["nodes"], n);
    assert!(summary["variants"][0]["rmse"]["mean"].as_f64().unwrap() < 0.5);
}

#[test]
fn classify_moons() {
    let dir = scratch("classify");
    let cfg = "seed = 4\nk = 10\nm = 1\nrepeats = 2\nlabeled_fraction = 0.05\nvariants = [\"stationary_fixed\"]\n\
               [moons]\nn = 200\nnoise = 0.05\n";
    assert_ok(&run_config(&dir, "c.toml", "classify", cfg, &[]));
    let errors = read(&dir, "errors.csv");
    assert_eq!(errors.lines().count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["labeled"], 10);
    assert!(summary["variants"][0]["error_mean"].as_f64().unwrap() < 0.3);
    assert_ok(&run_config(&dir, "c.toml", "classify", cfg, &[]));
    assert_eq!(read(&dir, "errors.csv"), errors);
}

#[test]
fn classify_estimates_the_dimension() {
    let dir = scratch("classify-auto");
    let cfg = "seed = 4\nk = 10\nrepeats = 1\nvariants = [\"stationary_fixed\"]\n[moons]\nn = 200\n";
    assert_ok(&run_config(&dir, "c.toml", "classify", cfg, &[]));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
    let est = summary["m_estimate"].as_f64().unwrap();
    assert!((0.5..2.0).contains(&est), "two moons dimension estimate {est}");
    let m = summary["m"].as_f64().unwrap();
    assert!(m >= 1.0 && m == est.round().max(1.0));
}

#[test]
fn converge_writes_rates_and_covariance() {
    let dir = scratch("converge");
    let cfg = "seed = 9\n[rates]\nns = [80, 160]\nreplicates = 1\ndraws = 10\nquad_points = 500\n\
               [covariance]\nn = 300\ntruncation = 30\nell_max = 60\n";
    assert_ok(&run_config(&dir, "c.toml", "converge", cfg, &[]));
    assert_eq!(read(&dir, "rates.csv").lines().count(), 3);
    let slopes: serde_json::Value = serde_json::from_str(&read(&dir, "slopes.json")).unwrap();
    assert!(slopes["eigenvalue"].as_f64().unwrap().is_finite());
    assert_eq!(read(&dir, "covariance.csv").lines().count(), 51);
}
