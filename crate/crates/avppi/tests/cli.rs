use std::fs;
use std::path::Path;
use std::process::Command;

use avppi::cli::run_with;
use avppi::io::{read_metrics, Manifest};
use avppi_core::rho_opt;
use tempfile::TempDir;

/// Exit status, stdout and stderr of one in-process invocation.
fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("avppi").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn gaussian_rows(n: usize) -> String {
    // Deterministic pseudo-normal data from a fixed quasi-random sequence.
    let mut s = String::from("label,prediction\n");
    for i in 0..n {
        let u = ((i as f64 + 0.5) * 0.618_033_988_749_895).fract();
        let y = (u - 0.5) * 3.0;
        s.push_str(&format!("{y},{}\n", y + 0.1 * ((i % 7) as f64 - 3.0)));
    }
    s
}

#[test]
fn tune_prints_rho_and_tau() {
    let (code, out, _) = run(&["tune", "--t-star", "100"]);
    assert_eq!(code, 0);
    assert!(out.contains("tau=0.100000000000\n"), "{out}");
    let rho: f64 = out.lines().next().unwrap().strip_prefix("rho=").unwrap().parse().unwrap();
    assert!((rho - rho_opt(100, 0.1).unwrap()).abs() < 1e-12);
    let (_, out, _) = run(&["tune", "--t-star", "400", "--alpha", "0.1"]);
    assert!(out.contains("tau=0.0500000000000\n"), "{out}");
}

#[test]
fn tune_rejects_bad_alpha() {
    assert_eq!(run(&["tune", "--alpha", "1.5"]).0, 2);
    assert_eq!(run(&["tune", "--t-star", "0"]).0, 2);
}

#[test]
fn parse_errors_exit_2() {
    assert_eq!(run(&["analyze", "--bogus"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn three_rows_give_one_interval() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "label,prediction\n0.3,0.1\n-1.2,-0.9\n0.8,1.1\n");
    let (code, out, _) = run(&["analyze", "--data", &data, "--method", "classical", "--alpha", "0.1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, ["n,t_total,center,lower,upper,width", lines[1]]);
    let f: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!((f[0], f[1]), (3.0, 3.0));
    assert!((f[2] - (-0.1 / 3.0)).abs() < 1e-15);
    assert!((f[5] - (f[4] - f[3])).abs() < 1e-15);
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    // Unlabelled rows first so the pool is never smaller than n.
    let mut text = String::from("label,prediction\n");
    for i in 0..300 {
        text.push_str(&format!(",{}\n", (i as f64 * 0.37).sin()));
    }
    text.push_str(gaussian_rows(200).strip_prefix("label,prediction\n").unwrap());
    let data = write(&dir, "d.csv", &text);
    let args = ["analyze", "--data", &data, "--method", "ppi++", "--prior", "gaussian", "--t-star", "500"];
    let (c1, a, _) = run(&args);
    let (c2, b, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 198);
}

#[test]
fn default_prior_scale_is_tau_at_t_star() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &gaussian_rows(20));
    let out = dir.path().join("o.csv");
    let args = [
        "analyze",
        "--data",
        &data,
        "--method",
        "ppi++",
        "--prior",
        "gaussian",
        "--t-star",
        "500",
        "--assume-infinite-unlabelled",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(run(&args).0, 0);
    let manifest = fs::read_to_string(Manifest::path_for(&out)).unwrap();
    let scale: f64 = manifest
        .lines()
        .find_map(|l| l.strip_prefix("prior-scale="))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(scale, 1.0 / 500f64.sqrt());
    assert!(manifest.contains("population=assume-infinite"));
}

#[test]
fn bad_data_exits_3_with_line_number() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "label,prediction\n1,1\n2,2\n3,x\n");
    let (code, _, err) = run(&["analyze", "--data", &data, "--method", "classical"]);
    assert_eq!(code, 3);
    assert!(err.contains("line 4"), "{err}");
    let data = write(&dir, "e.csv", "label,prediction\n1,inf\n");
    assert_eq!(run(&["analyze", "--data", &data]).0, 3);
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["analyze", "--data", missing.to_str().unwrap()]).0, 3);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &gaussian_rows(10));
    assert_eq!(run(&["analyze", "--data", &data, "--method", "ols"]).0, 2);
    assert_eq!(run(&["analyze", "--data", &data, "--method", "classical", "--prior", "gaussian"]).0, 2);
    assert_eq!(run(&["analyze", "--data", &data, "--prior", "cauchy"]).0, 2);
    assert_eq!(run(&["analyze", "--data", &data, "--grid", "1:0:10"]).0, 2);
    assert_eq!(run(&["analyze", "--data", &data, "--loss", "generic", "--population-mean", "0"]).0, 2);
    assert_eq!(run(&["analyze"]).0, 2);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.txt", "alpha = 0.05\nt-star = 400\n");
    let (_, out, _) = run(&["tune", "--config", &cfg]);
    assert!(out.contains("tau=0.0500000000000"));
    let rho: f64 = out.lines().next().unwrap()[4..].parse().unwrap();
    assert!((rho - rho_opt(400, 0.05).unwrap()).abs() < 1e-12);
    let (_, out, _) = run(&["tune", "--config", &cfg, "--t-star", "100"]);
    assert!(out.contains("tau=0.100000000000"));
    let bad = write(&dir, "bad.txt", "alhpa = 0.05\n");
    assert_eq!(run(&["tune", "--config", &bad]).0, 2);
}

#[test]
fn generic_loss_tracks_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &gaussian_rows(60));
    let base = ["analyze", "--data", &data, "--method", "ppi", "--assume-infinite-unlabelled"];
    let (_, closed, _) = run(&base);
    let mut args = base.to_vec();
    args.extend(["--loss", "generic", "--grid", "-3:3:6001"]);
    let (code, grid, _) = run(&args);
    assert_eq!(code, 0);
    let step = 6.0 / 6000.0;
    for (a, b) in closed.lines().skip(1).zip(grid.lines().skip(1)) {
        let a: Vec<f64> = a.split(',').map(|x| x.parse().unwrap()).collect();
        let b: Vec<f64> = b.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((a[3] - b[3]).abs() <= step + 1e-12 && (a[4] - b[4]).abs() <= step + 1e-12, "{a:?} {b:?}");
    }
}

#[test]
fn undefined_rows_are_skipped_with_a_warning() {
    let dir = TempDir::new().unwrap();
    // PPI with a finite pool needs N ≥ n; there is no pool here.
    let data = write(&dir, "d.csv", &gaussian_rows(10));
    let (code, out, err) = run(&["analyze", "--data", &data, "--method", "ppi"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    assert_eq!(err.matches("warning: line").count(), 1, "{err}");
}

#[test]
fn simulate_writes_461_rows_per_method() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let (code, summary, _) = run(&[
        "simulate",
        "--scenario",
        "noisy",
        "--sigma-y",
        "0.1",
        "--reps",
        "100",
        "--n-max",
        "500",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let rows = read_metrics(fs::File::open(&out).unwrap()).unwrap();
    for m in ["classical", "ppi", "ppi++"] {
        assert_eq!(rows.iter().filter(|r| r.method == m).count(), 461);
        assert!(summary.contains(&format!("{m},500,")), "{summary}");
    }
    // Re-serializing the parsed table reproduces the file.
    let mut again = Vec::new();
    avppi::io::write_metrics(&mut again, &rows).unwrap();
    assert_eq!(again, fs::read(&out).unwrap());
    let manifest = fs::read_to_string(Manifest::path_for(&out)).unwrap();
    assert!(manifest.contains("seed=3\n"));
    assert!(manifest.contains("scenario=noisy(sigma_y=0.1)\n"));
}

#[test]
fn simulate_rejects_dof_2() {
    let (code, _, err) = run(&["simulate", "--scenario", "biased", "--df", "2", "--reps", "2", "--n-max", "50"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(run(&["simulate", "--scenario", "biased", "--df", "two"]).0, 2);
    assert_eq!(run(&["simulate", "--scenario", "noisy"]).0, 2);
    assert_eq!(run(&["simulate", "--scenario", "noisy", "--sigma-y", "1", "--n-max", "10"]).0, 2);
}

#[test]
fn absent_seed_is_generated_and_recorded() {
    let (code, _, err) = run(&["simulate", "--scenario", "noisy", "--sigma-y", "1", "--reps", "2", "--n-max", "45"]);
    assert_eq!(code, 0);
    let seed = err.lines().find_map(|l| l.strip_prefix("# seed=")).unwrap();
    assert!(seed.parse::<u64>().is_ok());
}

#[test]
fn replay_from_files() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &gaussian_rows(300));
    let pool = write(&dir, "u.csv", "prediction\n0.1\n-0.2\n0.4\n");
    let out = dir.path().join("r.csv");
    let args = [
        "simulate",
        "--scenario",
        "replay",
        "--data",
        &data,
        "--unlabelled",
        &pool,
        "--n-max",
        "100",
        "--reps",
        "20",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(run(&args).0, 0);
    let first = fs::read(&out).unwrap();
    assert_eq!(run(&args).0, 0);
    assert_eq!(first, fs::read(&out).unwrap());
    let manifest = fs::read_to_string(Manifest::path_for(&out)).unwrap();
    assert!(manifest.contains("theta-star="));
    let mut big = args.to_vec();
    big.extend(["--n-unlabelled", "250"]);
    assert_eq!(run(&big).0, 2);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_avppi");
    let status = |args: &[&str]| Command::new(exe).args(args).output().unwrap().status.code();
    assert_eq!(status(&["tune", "--t-star", "100"]), Some(0));
    assert_eq!(status(&["tune", "--alpha", "2"]), Some(2));
    assert_eq!(status(&["analyze", "--data", "/nonexistent/file.csv"]), Some(3));
    assert!(!Path::new("/nonexistent/file.csv").exists());
}
