//! A configured experiment end to end: run, verify from raw files, report.

use mfshe::harness::{report, run_experiment, verify, ExperimentConfig, Plan};

const CONFIG: &str = r#"
[model]
alpha = 2.0
beta = 0.5
d = 1
t = 1.0

[sampler]
seed = 2024

[shells]
min = 5
max = 11

[gauge]
kind = "linear-she"
gamma = [0.25, 0.5, 0.75]

[output]
experiment = "linear-dimension"
dir = "mfshe-example-run"
"#;

fn main() -> mfshe::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    let dir = std::env::temp_dir().join("mfshe-example-run");
    cfg.output.dir = Some(dir.clone());
    let plan = Plan::new(&cfg, mfshe::harness::seed_override()?)?;
    let record = run_experiment(&plan, mfshe::par::workers())?;
    println!("status {}, {} artifacts", record.status, record.artifacts.len());
    print!("{}", report(&dir)?);
    let v = verify(&dir)?;
    for c in &v.checks {
        println!("verify {}: {}", c.name, if c.ok { "ok" } else { "FAILED" });
    }
    Ok(())
}
