//! Moments E u_t^k from stable paths, and the growth of log E u_t^k in k.

use mfshe::kernels::ModelParams;
use mfshe::pam::{fk_moment_with, FkKernel, FkSpec};

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(1.5, 0.5, 1, 0.25)?;
    let exact = fk_moment_with(
        &FkSpec {
            k: 3,
            params: p,
            n_paths: 1000,
            dt_path: 0.01,
            cap: 1e4,
            seed: 1,
            kernel: FkKernel::Constant(2.0),
        },
        1,
    )?;
    println!("constant kernel c=2, k=3: {:.4} (exp(c k(k-1)/2 t) = {:.4})", exact.value, (2.0f64 * 3.0 * 0.25).exp());

    let mut prev = None;
    for k in 2..=4 {
        let e = fk_moment_with(
            &FkSpec {
                k,
                params: p,
                n_paths: 20_000,
                dt_path: p.t / 50.0,
                cap: 1e4,
                seed: 7 + k as u64,
                kernel: FkKernel::Riesz,
            },
            mfshe::par::workers(),
        )?;
        let ll = e.value.ln().ln();
        let slope = prev.map(|(lk, l): (f64, f64)| (ll - l) / ((k as f64).ln() - lk));
        println!(
            "k={k}: E u^k = {:.4e} +- {:.1e}, capped {:.4}{}",
            e.value,
            e.stderr,
            e.capped_fraction,
            slope.map_or(String::new(), |s| format!(", local log-log slope {s:.2}"))
        );
        prev = Some(((k as f64).ln(), ll));
    }
    println!("target exponent (2 alpha - beta)/(alpha - beta) = {}", p.intermittency_exponent());
    Ok(())
}
