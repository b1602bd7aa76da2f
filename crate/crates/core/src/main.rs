use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfshe::fractal::{cover_report, estimate_dimension, is_theta_thick, CoverScheme};
use mfshe::gaussian_field::{block_for_bound, sample_field, LatticeSpec, Scheme};
use mfshe::harness::{self, ExperimentConfig, ExperimentKind, Plan};
use mfshe::io::{load_peaks, save_field, save_field_dump, write_csv, DumpKind, FieldDump};
use mfshe::kernels::{self, ModelParams};
use mfshe::pam::{self, FkKernel, FkSpec, PamConfig, PicardSolver, TorusOps};
use mfshe::{Error, Result};

#[derive(Parser)]
#[command(name = "mfshe", version, about = "Fractional stochastic heat equations and the geometry of their peaks")]
struct Cli {
    /// Worker threads (default: MFSHE_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run the validation suite with the seed and output dir of a config file.
    Validate { config: PathBuf },
    /// Recompute a run's summary from its raw files.
    Verify { run_dir: PathBuf },
    /// Print a run's summary.
    Report { run_dir: PathBuf },
    #[command(subcommand)]
    Kernels(KernelsCmd),
    #[command(subcommand)]
    Field(FieldCmd),
    #[command(subcommand)]
    Pam(PamCmd),
    #[command(subcommand)]
    Fractal(FractalCmd),
}

#[derive(Args, Clone, Copy)]
struct ModelArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

impl ModelArgs {
    fn params(self) -> Result<ModelParams> {
        if self.beta == self.d as f64 {
            ModelParams::white_noise(self.alpha, self.d, self.t)
        } else {
            ModelParams::new(self.alpha, self.beta, self.d, self.t)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelFn {
    /// |xi|^alpha at radius x.
    Levy,
    /// Stable density p_s at radius x.
    StableDensity,
    /// Riesz covariance at radius x.
    Riesz,
    /// Spectral density of Z_t at radius x.
    Spectral,
    /// Cov(Z_t(0), Z_t(x)).
    Covariance,
    /// Truncated square-root factor h at radius x.
    Factor,
}

#[derive(Subcommand)]
enum KernelsCmd {
    /// Print a kernel on a uniform grid as CSV (input,value).
    Eval {
        #[arg(long = "fn", value_enum)]
        function: KernelFn,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Time argument of the stable density.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Truncation radius of the factor.
        #[arg(long, default_value_t = f64::INFINITY)]
        ell: f64,
    },
}

#[derive(Subcommand)]
enum FieldCmd {
    /// Sample Z_t on a lattice and write an MFSHE1 dump.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated sites per axis.
        #[arg(long, value_delimiter = ',')]
        shape: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long, default_value = "circulant-exact")]
        scheme: Scheme,
        /// Block length of the block-independent sampler (default from a 0.01 correlation bound).
        #[arg(long)]
        block: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct TorusArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Torus side length.
    #[arg(long = "L", default_value_t = 32.0)]
    side: f64,
    /// Sites per axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Time step (rounded to divide t; default from the noise-size rule).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: u64,
}

impl TorusArgs {
    fn config(&self) -> Result<PamConfig> {
        let cfg = PamConfig::new(self.model.params()?, self.side, self.grid, self.seed)?;
        match self.dt {
            Some(dt) => cfg.with_dt(dt),
            None => Ok(cfg),
        }
    }
}

#[derive(Subcommand)]
enum PamCmd {
    /// Replicas of the torus scheme: per-replica moments CSV and a snapshot of replica 0.
    Simulate {
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Localized Picard iterates at the torus origin, CSV (m,u).
    Picard {
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        ell: f64,
        #[arg(long)]
        m: usize,
    },
    /// Feynman-Kac moment E u_t^k.
    Fk {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long)]
        dtpath: f64,
        #[arg(long, default_value_t = 1e4)]
        cap: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Exceedance probabilities of log u_t, CSV (z,probability,stderr,exceedances,censored).
    Tails {
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        zmax: f64,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value_t = 8)]
        sites: usize,
        #[arg(long, default_value_t = 0.25)]
        zstep: f64,
    },
}

#[derive(Subcommand)]
enum FractalCmd {
    /// Per-shell counts and cover costs, CSV (n,count,nu_<rho>...).
    Cover {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        rho_grid: Vec<f64>,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        #[arg(long, default_value = "unit-lattice")]
        scheme: CoverScheme,
    },
    /// Dimension fit of a peak set.
    Dim {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
    /// Thickness test of a peak set.
    Thick {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        from_shell: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.unwrap_or_else(mfshe::par::workers);
    match dispatch(cli.cmd, workers) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn stdout_csv(header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_csv(&mut std::io::stdout().lock(), header, rows)
}

fn load_plan(path: &std::path::Path) -> Result<Plan> {
    Plan::new(&ExperimentConfig::load(path)?, harness::seed_override()?)
}

/// Returns whether the command succeeded in its own terms (a failing
/// validation or verification exits with 1).
fn dispatch(cmd: Cmd, workers: usize) -> Result<bool> {
    match cmd {
        Cmd::Run { config } => {
            let plan = load_plan(&config)?;
            let record = harness::run_experiment(&plan, workers)?;
            println!("{}", plan.dir.display());
            print!("{}", harness::report(&plan.dir)?);
            Ok(record.ok())
        }
        Cmd::Validate { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.output.experiment = Some(ExperimentKind::Validation);
            let plan = Plan::new(&cfg, harness::seed_override()?)?;
            let record = harness::run_experiment(&plan, workers)?;
            print!("{}", harness::report(&plan.dir)?);
            Ok(match record.summary {
                harness::Summary::Validation(s) => s.all_passed,
                _ => false,
            })
        }
        Cmd::Verify { run_dir } => {
            let rep = harness::verify(&run_dir)?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.ok { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            Ok(rep.ok())
        }
        Cmd::Report { run_dir } => {
            print!("{}", harness::report(&run_dir)?);
            Ok(true)
        }
        Cmd::Kernels(KernelsCmd::Eval {
            function,
            model,
            from,
            to,
            points,
            s,
            ell,
        }) => {
            let params = model.params()?;
            let factor = match function {
                KernelFn::Factor if ell.is_finite() => Some(kernels::KernelFactorization::new(params, ell)?),
                KernelFn::Factor => Some(kernels::KernelFactorization::untruncated(params)),
                _ => None,
            };
            let mut rows = Vec::with_capacity(points);
            for i in 0..points {
                let x = if points > 1 { from + (to - from) * i as f64 / (points - 1) as f64 } else { from };
                let mut point = vec![0.0; params.d];
                point[0] = x;
                let v = match function {
                    KernelFn::Levy => kernels::levy_exponent(&point, &params),
                    KernelFn::StableDensity => kernels::stable_density(&point, s, &params)?,
                    KernelFn::Riesz => kernels::riesz_kernel(&point, &params)?,
                    KernelFn::Spectral => kernels::z_spectral_density(x, &params)?,
                    KernelFn::Covariance => kernels::z_covariance_radial(x, &params)?,
                    KernelFn::Factor => factor.as_ref().unwrap().truncated(&point)?,
                };
                rows.push(vec![format!("{x}"), format!("{v:e}")]);
            }
            stdout_csv(&["input", "value"], &rows)?;
            Ok(true)
        }
        Cmd::Field(FieldCmd::Sample {
            model,
            shape,
            spacing,
            scheme,
            block,
            seed,
            out,
        }) => {
            let params = model.params()?;
            let lattice = LatticeSpec::new(vec![0.0; params.d], spacing, shape)?;
            let block = match block {
                Some(b) => b,
                None if scheme == Scheme::BlockIndependent => block_for_bound(&params, spacing, 0.01)?,
                None => 0,
            };
            let sample = sample_field(&lattice, &params, scheme, block, seed)?;
            save_field(&out, &sample)?;
            eprintln!("{} sites, scheme {}, written to {}", lattice.len(), scheme.tag(), out.display());
            Ok(true)
        }
        Cmd::Pam(c) => pam_cmd(c, workers),
        Cmd::Fractal(c) => fractal_cmd(c),
    }
}

fn pam_cmd(cmd: PamCmd, workers: usize) -> Result<bool> {
    match cmd {
        PamCmd::Simulate { torus, replicas, out } => {
            let cfg = torus.config()?;
            let ops = TorusOps::new(&cfg)?;
            std::fs::create_dir_all(&out)?;
            let runs = mfshe::par::map(replicas, workers, |r| ops.run(pam::replica_seed(cfg.seed, r)));
            let mut rows = Vec::with_capacity(replicas);
            for (r, run) in runs.into_iter().enumerate() {
                let run = run?;
                let n = run.u.len() as f64;
                let m1 = run.u.iter().sum::<f64>() / n;
                let m2 = run.u.iter().map(|v| v * v).sum::<f64>() / n;
                rows.push(vec![r.to_string(), format!("{m1}"), format!("{m2}"), run.negative_factors.to_string()]);
                if r == 0 {
                    let dump = FieldDump {
                        lattice: LatticeSpec::new(vec![0.0; cfg.params.d], cfg.spacing(), cfg.shape())?,
                        values: run.u,
                        params: cfg.params,
                        seed: pam::replica_seed(cfg.seed, 0),
                        kind: DumpKind::PamSnapshot,
                    };
                    save_field_dump(&out.join("snapshot.mfshe"), &dump)?;
                }
            }
            mfshe::io::save_csv(
                &out.join("moments.csv"),
                &["replica", "mean_u", "mean_u2", "negative_factors"],
                &rows,
            )?;
            eprintln!("dt {} ({} steps), step sd {:.3}", cfg.dt, cfg.steps, cfg.step_sd());
            Ok(true)
        }
        PamCmd::Picard { torus, ell, m } => {
            let cfg = torus.config()?;
            let solver = PicardSolver::new(&cfg, ell)?;
            let its = solver.iterates(cfg.seed, m)?;
            let rows: Vec<Vec<String>> = its
                .iter()
                .enumerate()
                .map(|(j, u)| vec![j.to_string(), format!("{}", u[0])])
                .collect();
            stdout_csv(&["m", "u"], &rows)?;
            Ok(true)
        }
        PamCmd::Fk {
            model,
            k,
            paths,
            dtpath,
            cap,
            seed,
        } => {
            let e = pam::fk_moment_with(
                &FkSpec {
                    k,
                    params: model.params()?,
                    n_paths: paths,
                    dt_path: dtpath,
                    cap,
                    seed,
                    kernel: FkKernel::Riesz,
                },
                workers,
            )?;
            stdout_csv(
                &["k", "value", "stderr", "paths", "dt_path", "cap", "capped_fraction", "heavy_tail_warning"],
                &[vec![
                    e.k.to_string(),
                    format!("{}", e.value),
                    format!("{}", e.stderr),
                    e.n_paths.to_string(),
                    format!("{}", e.dt_path),
                    format!("{}", e.cap),
                    format!("{}", e.capped_fraction),
                    e.heavy_tail_warning.to_string(),
                ]],
            )?;
            Ok(true)
        }
        PamCmd::Tails {
            torus,
            zmax,
            replicas,
            sites,
            zstep,
        } => {
            if !(zstep > 0.0) {
                return Err(Error::InvalidArgument("zstep must be positive".into()));
            }
            let cfg = torus.config()?;
            let log_u = pam::sample_log_u(&cfg, replicas, sites, workers)?;
            let grid: Vec<f64> = (0..).map(|i| i as f64 * zstep).take_while(|&z| z <= zmax).collect();
            let rows: Vec<Vec<String>> = pam::tail_probability(&log_u, &grid)
                .iter()
                .map(|e| {
                    vec![
                        format!("{}", e.z),
                        format!("{}", e.probability),
                        format!("{}", e.stderr),
                        e.exceedances.to_string(),
                        e.censored.to_string(),
                    ]
                })
                .collect();
            stdout_csv(&["z", "probability", "stderr", "exceedances", "censored"], &rows)?;
            Ok(true)
        }
    }
}

fn fractal_cmd(cmd: FractalCmd) -> Result<bool> {
    match cmd {
        FractalCmd::Cover {
            input,
            rho_grid,
            from,
            to,
            scheme,
        } => {
            let set = load_peaks(&input)?;
            let rho = if rho_grid.is_empty() { vec![set.d as f64] } else { rho_grid };
            let rep = cover_report(&set, from..=to, &rho, scheme)?;
            let names: Vec<String> = rho.iter().map(|r| format!("nu_{r}")).collect();
            let mut header = vec!["n", "count"];
            header.extend(names.iter().map(String::as_str));
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    let mut v = vec![r.n.to_string(), r.count.to_string()];
                    v.extend(r.nu.iter().map(|x| format!("{x}")));
                    v
                })
                .collect();
            stdout_csv(&header, &rows)?;
            Ok(true)
        }
        FractalCmd::Dim { input, from, to } => {
            let set = load_peaks(&input)?;
            let rep = cover_report(&set, from..=to, &[set.d as f64], CoverScheme::UnitLattice)?;
            let fit = estimate_dimension(&rep, from..=to)?;
            stdout_csv(
                &["estimate", "band", "dispersion", "nonzero_shells"],
                &[vec![
                    format!("{}", fit.estimate),
                    format!("{}", fit.band),
                    format!("{}", fit.dispersion),
                    fit.nonzero_shells.to_string(),
                ]],
            )?;
            Ok(true)
        }
        FractalCmd::Thick {
            input,
            theta,
            from_shell,
        } => {
            let set = load_peaks(&input)?;
            let th = is_theta_thick(&set, theta, from_shell)?;
            println!("thick {} up to shell {}", th.thick, th.n_max);
            if let Some((n, x)) = th.witness {
                println!("witness: shell {n}, empty cube at {x:?}");
            }
            Ok(th.thick)
        }
    }
}
