//! Experiment configuration files.
//!
//! ```toml
//! [model]
//! alpha = 2.0      # stability index, (0, 2]
//! beta = 0.5       # noise index, 0 < beta < min(alpha, d); beta = d means white noise
//! d = 1
//! t = 1.0
//!
//! [sampler]
//! seed = 42               # master seed (MFSHE_SEED overrides)
//! scheme = "block-independent"   # or "circulant-exact", "spectral-torus"
//! block = 4096            # optional; default from block_bound
//! block_bound = 0.01      # cross-block correlation bound for the default block
//! pam_spacing = 0.5       # PAM grid spacing, 1/spacing an integer
//! pam_margin = 32.0       # torus margin around each PAM shell patch
//! dt_scale = 1.0          # multiplies the PAM time step (validation perturbation)
//!
//! [shells]
//! min = 6
//! max = 14
//! fit_min = 6             # optional; first fitted shell, default max(min, 5) in d = 1, max(min, 3) in d = 2
//!
//! [gauge]
//! kind = "linear-she"     # or "pam"
//! gamma = [0.25, 0.5]     # optional; default {0.1, 0.25, 0.5, 0.75, 0.9} d
//! rho = [0.5, 1.0]        # cover exponents reported per shell
//! cover = "unit-lattice"  # or "greedy-dyadic"
//!
//! [output]
//! experiment = "linear-dimension"  # linear-limsup, pam-dimension, validation
//! dir = "runs/linear"
//! ```
//!
//! Unknown keys are errors. Validation experiments need only `sampler.seed`
//! and the `[output]` keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fractal::{CoverScheme, Gauge};
use crate::gaussian_field::Scheme;
use crate::kernels::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LinearDimension,
    LinearLimsup,
    PamDimension,
    Validation,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::LinearDimension => "linear-dimension",
            ExperimentKind::LinearLimsup => "linear-limsup",
            ExperimentKind::PamDimension => "pam-dimension",
            ExperimentKind::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pam_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pam_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_min: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Gauge>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverScheme>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// The file form of an experiment, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub shells: ShellSection,
    #[serde(default)]
    pub gauge: GaugeSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical TOML form, hex.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// `MFSHE_SEED` if set and parseable.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var("MFSHE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("MFSHE_SEED = '{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// A validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub params: Option<ModelParams>,
    pub seed: u64,
    pub scheme: Scheme,
    pub block: Option<usize>,
    pub block_bound: f64,
    pub pam_spacing: f64,
    pub pam_margin: f64,
    pub dt_scale: f64,
    pub shells: (u32, u32),
    pub fit_min: u32,
    pub gauge: Gauge,
    pub gammas: Vec<f64>,
    pub rho: Vec<f64>,
    pub cover: CoverScheme,
    pub dir: PathBuf,
    /// The configuration as run (seed override applied).
    pub config: ExperimentConfig,
}

/// Largest shell each experiment will sample, by dimension.
fn shell_cap(kind: ExperimentKind, d: usize) -> u32 {
    match (kind, d) {
        (ExperimentKind::PamDimension, _) => 10,
        (_, 1) => 16,
        _ => 7,
    }
}

impl Plan {
    /// Checks required keys (all missing ones are listed together), the
    /// model's admissibility and the feasibility of the shell range.
    pub fn new(cfg: &ExperimentConfig, seed_override: Option<u64>) -> Result<Self> {
        let mut missing = Vec::new();
        let kind = cfg.output.experiment;
        if kind.is_none() {
            missing.push("output.experiment");
        }
        if cfg.output.dir.is_none() {
            missing.push("output.dir");
        }
        if cfg.sampler.seed.is_none() && seed_override.is_none() {
            missing.push("sampler.seed");
        }
        let needs_model = kind != Some(ExperimentKind::Validation);
        if needs_model {
            let m = &cfg.model;
            for (key, present) in [
                ("model.alpha", m.alpha.is_some()),
                ("model.beta", m.beta.is_some()),
                ("model.d", m.d.is_some()),
                ("model.t", m.t.is_some()),
                ("shells.min", cfg.shells.min.is_some()),
                ("shells.max", cfg.shells.max.is_some()),
            ] {
                if !present {
                    missing.push(key);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
        }
        let kind = kind.unwrap();
        let seed = seed_override.or(cfg.sampler.seed).unwrap();
        let mut config = cfg.clone();
        config.sampler.seed = Some(seed);

        let params = if needs_model {
            let m = &cfg.model;
            let (a, b, d, t) = (m.alpha.unwrap(), m.beta.unwrap(), m.d.unwrap(), m.t.unwrap());
            Some(if b == d as f64 {
                ModelParams::white_noise(a, d, t)?
            } else {
                ModelParams::new(a, b, d, t)?
            })
        } else {
            None
        };
        let d = params.map_or(1, |p| p.d);
        let (lo, hi) = (cfg.shells.min.unwrap_or(0), cfg.shells.max.unwrap_or(0));
        if needs_model {
            if lo > hi {
                return Err(Error::Config(format!("shells.min = {lo} exceeds shells.max = {hi}")));
            }
            let cap = shell_cap(kind, d);
            if hi > cap {
                return Err(Error::Config(format!(
                    "shells.max = {hi} is beyond what {} can sample in d = {d} (at most {cap})",
                    kind.tag()
                )));
            }
            if kind == ExperimentKind::PamDimension && d != 1 {
                return Err(Error::Config("pam-dimension runs in d = 1".into()));
            }
        }
        // innermost shells hold few sites; d = 2 caps at shell 7 so starts earlier
        let first = if d == 1 { 5 } else { 3 };
        let fit_min = cfg.shells.fit_min.unwrap_or(lo.max(first).min(hi));
        if needs_model && kind != ExperimentKind::LinearLimsup && (fit_min < lo || fit_min > hi) {
            return Err(Error::Config(format!("shells.fit_min = {fit_min} outside [{lo}, {hi}]")));
        }
        let pam_spacing = cfg.sampler.pam_spacing.unwrap_or(0.5);
        let per_unit = 1.0 / pam_spacing;
        if !(pam_spacing > 0.0 && pam_spacing <= 1.0 && (per_unit - per_unit.round()).abs() < 1e-9) {
            return Err(Error::Config(format!("sampler.pam_spacing = {pam_spacing} must be 1/k")));
        }
        let dt_scale = cfg.sampler.dt_scale.unwrap_or(1.0);
        if !(dt_scale > 0.0) {
            return Err(Error::Config(format!("sampler.dt_scale = {dt_scale} must be positive")));
        }
        let block_bound = cfg.sampler.block_bound.unwrap_or(0.01);
        if !(block_bound > 0.0 && block_bound < 1.0) {
            return Err(Error::Config(format!("sampler.block_bound = {block_bound} outside (0, 1)")));
        }
        let gauge = cfg.gauge.kind.unwrap_or(match kind {
            ExperimentKind::PamDimension => Gauge::Pam,
            _ => Gauge::LinearShe,
        });
        if (kind == ExperimentKind::PamDimension) != (gauge == Gauge::Pam) && needs_model {
            return Err(Error::Config(format!("gauge.kind = {} does not fit {}", gauge.tag(), kind.tag())));
        }
        let gammas = cfg
            .gauge
            .gamma
            .clone()
            .unwrap_or_else(|| [0.1, 0.25, 0.5, 0.75, 0.9].iter().map(|g| g * d as f64).collect());
        if gammas.is_empty() || gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Config("gauge.gamma must be a nonempty list of nonnegative numbers".into()));
        }
        let rho = cfg.gauge.rho.clone().unwrap_or_else(|| vec![0.5 * d as f64, d as f64]);
        if rho.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("gauge.rho entries must be positive".into()));
        }
        Ok(Self {
            kind,
            params,
            seed,
            scheme: cfg.sampler.scheme.unwrap_or(Scheme::BlockIndependent),
            block: cfg.sampler.block,
            block_bound,
            pam_spacing,
            pam_margin: cfg.sampler.pam_margin.unwrap_or(32.0),
            dt_scale,
            shells: (lo, hi),
            fit_min,
            gauge,
            gammas,
            rho,
            cover: cfg.gauge.cover.unwrap_or(CoverScheme::UnitLattice),
            dir: cfg.output.dir.clone().unwrap(),
            config,
        })
    }

    pub fn model(&self) -> Result<ModelParams> {
        self.params
            .ok_or_else(|| Error::Config(format!("{} has no model", self.kind.tag())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"
[model]
alpha = 2.0
beta = 0.5
d = 1
t = 1.0

[sampler]
seed = 7

[shells]
min = 6
max = 12

[gauge]
gamma = [0.25, 0.5]

[output]
experiment = "linear-dimension"
dir = "runs/x"
"#;

    #[test]
    fn round_trip_is_lossless() {
        let cfg = ExperimentConfig::from_toml(LINEAR).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 64);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = LINEAR.replace("seed = 7", "seed = 7\nsed = 8");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = format!("{LINEAR}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn empty_config_lists_missing_fields() {
        let err = Plan::new(&ExperimentConfig::default(), None).unwrap_err().to_string();
        for key in ["output.experiment", "output.dir", "sampler.seed", "model.alpha", "shells.max"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn seed_override_and_defaults() {
        let cfg = ExperimentConfig::from_toml(LINEAR).unwrap();
        let plan = Plan::new(&cfg, Some(99)).unwrap();
        assert_eq!(plan.seed, 99);
        assert_eq!(plan.config.sampler.seed, Some(99));
        assert_eq!(plan.fit_min, 6);
        assert_eq!(plan.gammas, vec![0.25, 0.5]);
        assert_eq!(plan.scheme, Scheme::BlockIndependent);
    }

    #[test]
    fn inadmissible_model_rejected_before_running() {
        let bad = LINEAR.replace("beta = 0.5", "beta = 1.5");
        let cfg = ExperimentConfig::from_toml(&bad).unwrap();
        assert!(matches!(Plan::new(&cfg, None), Err(Error::InvalidParams(_))));
        let far = LINEAR.replace("max = 12", "max = 30");
        assert!(matches!(Plan::new(&ExperimentConfig::from_toml(&far).unwrap(), None), Err(Error::Config(_))));
    }
}
