//! End-to-end runs of the `mfshe` binary.

use std::path::Path;
use std::process::{Command, Output};

use mfshe::harness::RunRecord;
use mfshe::io::{load_field, load_peaks};

fn mfshe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfshe"))
        .args(args)
        .env_remove("MFSHE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn linear_config(dir: &Path, extra: &str) -> String {
    format!(
        "[model]\nalpha = 2.0\nbeta = 0.5\nd = 1\nt = 1.0\n\n[sampler]\nseed = 3\n{extra}\n\
         [shells]\nmin = 4\nmax = 8\n\n[gauge]\nkind = \"linear-she\"\ngamma = [0.25, 0.5]\n\n\
         [output]\nexperiment = \"linear-dimension\"\ndir = \"{}\"\n",
        dir.display()
    )
}

#[test]
fn kernels_eval_prints_csv() {
    let o = mfshe(&["kernels", "eval", "--fn", "covariance", "--alpha", "1.5", "--beta", "0.5", "--from", "0", "--to", "1", "--points", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "input,value");
    assert_eq!(lines.len(), 4);
    let v0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let v1: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!(v0 > v1 && v1 > 0.0);
}

#[test]
fn field_sample_writes_a_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("z.mfshe");
    let o = mfshe(&[
        "field", "sample", "--alpha", "2", "--beta", "0.5", "--d", "2", "--shape", "8,16", "--spacing", "0.5",
        "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = load_field(&out).unwrap();
    assert_eq!(f.lattice.shape, vec![8, 16]);
    assert_eq!(f.seed, 4);
    assert_eq!(&std::fs::read(&out).unwrap()[..6], b"MFSHE1");
}

#[test]
fn pam_subcommands_emit_declared_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let torus = ["--alpha", "1.5", "--beta", "0.5", "--t", "0.25", "--L", "8", "--grid", "32", "--seed", "1"];
    let mut args = vec!["pam", "simulate"];
    args.extend(torus);
    args.extend(["--replicas", "4", "--out", dir.to_str().unwrap()]);
    assert!(mfshe(&args).status.success());
    let csv = std::fs::read_to_string(dir.join("moments.csv")).unwrap();
    assert!(csv.starts_with("replica,mean_u,mean_u2,negative_factors\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.join("snapshot.mfshe").exists());

    let mut args = vec!["pam", "picard"];
    args.extend(torus);
    args.extend(["--ell", "2", "--m", "2"]);
    let o = mfshe(&args);
    assert!(stdout(&o).starts_with("m,u\n0,1\n"));

    let o = mfshe(&["pam", "fk", "--alpha", "1.5", "--beta", "0.5", "--t", "0.25", "--k", "2", "--paths", "500", "--dtpath", "0.01", "--seed", "2"]);
    assert!(stdout(&o).starts_with("k,value,stderr,paths,"));

    let mut args = vec!["pam", "tails"];
    args.extend(torus);
    args.extend(["--zmax", "1", "--replicas", "10"]);
    assert!(stdout(&mfshe(&args)).starts_with("z,probability,stderr,exceedances,censored\n"));
}

#[test]
fn run_verify_report_and_fractal_tools() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, linear_config(&run, "")).unwrap();
    let o = mfshe(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = RunRecord::load(&run).unwrap();
    assert!(record.ok());
    assert_eq!(record.seed, 3);

    let o = mfshe(&["verify", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(mfshe(&["report", run.to_str().unwrap()]).status.success());

    let peaks = run.join("peaks").join("gamma_00.mfpeaks");
    let set = load_peaks(&peaks).unwrap();
    assert_eq!(set.gauge.gamma, 0.25);
    let o = mfshe(&["fractal", "cover", "--in", peaks.to_str().unwrap(), "--from", "4", "--to", "8", "--rho-grid", "0.5,1"]);
    assert!(stdout(&o).starts_with("n,count,nu_0.5,nu_1\n"));
    let o = mfshe(&["fractal", "dim", "--in", peaks.to_str().unwrap(), "--from", "4", "--to", "8"]);
    assert!(stdout(&o).starts_with("estimate,band,"));
    let o = mfshe(&["fractal", "thick", "--in", peaks.to_str().unwrap(), "--theta", "0.5", "--from-shell", "4"]);
    assert!(stdout(&o).starts_with("thick "));

    // a tampered raw field no longer reproduces the summary
    let field = run.join("fields").join("shell_08.mfshe");
    let mut f = load_field(&field).unwrap();
    f.values.iter_mut().for_each(|v| *v += 10.0);
    mfshe::io::save_field(&field, &f).unwrap();
    let o = mfshe(&["verify", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL summary from raw fields"));
}

#[test]
fn seed_override_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, linear_config(&run, "")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mfshe"))
        .args(["run", cfg.to_str().unwrap()])
        .env("MFSHE_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(RunRecord::load(&run).unwrap().seed, 99);
    assert!(std::fs::read_to_string(run.join("config.toml")).unwrap().contains("seed = 99"));
}

#[test]
fn bad_configs_fail_before_computing() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, linear_config(&run, "colour = \"red\"")).unwrap();
    let o = mfshe(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let bad = linear_config(&run, "").replace("beta = 0.5", "beta = 1.5");
    std::fs::write(&cfg, bad).unwrap();
    let o = mfshe(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!run.exists());
}
