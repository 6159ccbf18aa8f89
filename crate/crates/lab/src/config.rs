//! TOML run configuration. Every section and key is optional; each
//! subcommand fills unset keys from its own defaults.

use std::path::{Path, PathBuf};

use gnc_core::{
    make_grid, AlphaRule, Covariance, DiffusionSchedule, GaussianMixture, GridSpacing, OptimizerParams,
    RegularizationWeight, StepPolicy, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schedule: ScheduleConfig,
    pub grid: GridConfig,
    pub optimizer: OptimizerConfig,
    pub alpha: AlphaConfig,
    pub problem: ProblemConfig,
    pub prior: PriorConfig,
    pub basin: BasinSection,
    pub census: CensusSection,
    pub recon: ReconSection,
    pub trace: TraceSection,
    pub gradcheck: GradcheckSection,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn parse(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ve,
    Vp,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub variant: Option<Variant>,
    pub sigma: Option<f64>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

/// Fully specified schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleDefaults {
    pub variant: Variant,
    pub sigma: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl ScheduleDefaults {
    pub const TOY: Self = Self {
        variant: Variant::Ve,
        sigma: 10.0,
        beta_min: 0.1,
        beta_max: 20.0,
        t_min: 1e-3,
        t_max: 10.0,
    };
}

impl ScheduleConfig {
    pub fn resolve(&self, d: ScheduleDefaults) -> ScheduleDefaults {
        ScheduleDefaults {
            variant: self.variant.unwrap_or(d.variant),
            sigma: self.sigma.unwrap_or(d.sigma),
            beta_min: self.beta_min.unwrap_or(d.beta_min),
            beta_max: self.beta_max.unwrap_or(d.beta_max),
            t_min: self.t_min.unwrap_or(d.t_min),
            t_max: self.t_max.unwrap_or(d.t_max),
        }
    }

    pub fn build(&self, d: ScheduleDefaults) -> LabResult<DiffusionSchedule> {
        build_schedule(&self.resolve(d), None)
    }
}

/// Schedule from resolved settings, optionally with a different `t_max`.
pub fn build_schedule(s: &ScheduleDefaults, t_max: Option<f64>) -> LabResult<DiffusionSchedule> {
    let t_max = t_max.unwrap_or(s.t_max);
    let sched = match s.variant {
        Variant::Ve => DiffusionSchedule::variance_exploding(s.sigma, s.t_min, t_max),
        Variant::Vp => DiffusionSchedule::variance_preserving(s.beta_min, s.beta_max, s.t_min, t_max),
    };
    sched.map_err(|e| LabError::config(format!("schedule: {e}")))
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

impl From<Spacing> for GridSpacing {
    fn from(s: Spacing) -> Self {
        match s {
            Spacing::Linear => GridSpacing::Linear,
            Spacing::Log => GridSpacing::Logarithmic,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
}

impl GridConfig {
    pub fn build(&self, t_min: f64, t_max: f64, count: usize, spacing: Spacing) -> LabResult<TimeGrid> {
        let count = self.count.unwrap_or(count);
        let spacing = self.spacing.unwrap_or(spacing);
        make_grid(t_min, t_max, count, spacing.into()).map_err(|e| LabError::config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GncFlow,
    GradientLike,
    GradientDescent,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GncFlow => "gnc_flow",
            Algorithm::GradientLike => "gradient_like",
            Algorithm::GradientDescent => "gradient_descent",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    Constant,
    Armijo,
    ArmijoBb,
}

impl From<LambdaPolicy> for StepPolicy {
    fn from(p: LambdaPolicy) -> Self {
        match p {
            LambdaPolicy::Constant => StepPolicy::Constant,
            LambdaPolicy::Armijo => StepPolicy::Armijo,
            LambdaPolicy::ArmijoBb => StepPolicy::ArmijoBb,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Option<Algorithm>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub lambda_policy: Option<LambdaPolicy>,
    pub lambda_const: Option<f64>,
    pub lambda_init: Option<f64>,
    pub lambda_floor: Option<f64>,
    pub lambda_ceil: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub max_iters: Option<usize>,
}

/// Algorithm plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Solver {
    pub algorithm: Algorithm,
    pub params: OptimizerParams,
}

impl OptimizerConfig {
    /// Overrides `defaults` with every key that is set. When the algorithm is
    /// changed away from the default one and no policy is given, `gnc_flow`
    /// uses a constant step and the others Armijo with BB.
    pub fn resolve(&self, defaults: &Solver) -> LabResult<Solver> {
        let algorithm = self.algorithm.unwrap_or(defaults.algorithm);
        let mut p = defaults.params.clone();
        if algorithm != defaults.algorithm {
            p.policy = match algorithm {
                Algorithm::GncFlow => StepPolicy::Constant,
                _ => StepPolicy::ArmijoBb,
            };
        }
        if let Some(v) = self.lambda_policy {
            p.policy = v.into();
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { p.$field = v; } )* };
        }
        set!(c, beta, eps, lambda_const, lambda_init, lambda_floor, lambda_ceil, max_backtracks, max_iters);
        p.validate().map_err(|e| LabError::config(format!("optimizer: {e}")))?;
        Ok(Solver { algorithm, params: p })
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRuleName {
    Constant,
    NuOverGamma,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    pub base: Option<f64>,
    pub rule: Option<AlphaRuleName>,
}

impl AlphaConfig {
    pub fn resolve(&self, default: RegularizationWeight) -> RegularizationWeight {
        RegularizationWeight {
            base: self.base.unwrap_or(default.base),
            rule: match self.rule {
                Some(AlphaRuleName::Constant) => AlphaRule::Constant,
                Some(AlphaRuleName::NuOverGamma) => AlphaRule::NuOverGamma,
                None => default.rule,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    Toy,
    Dense,
    Radon,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub operator: OperatorKind,
    /// Matrix file for `operator = "dense"`.
    pub matrix: Option<PathBuf>,
    /// Image side and angle count for `operator = "radon"`.
    pub n_px: Option<usize>,
    pub n_angles: Option<usize>,
    /// Measurement file (whitespace-separated numbers).
    pub measurements: Option<PathBuf>,
    /// Inline measurements; ignored when `measurements` is set.
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Toy,
    Mixture,
    Empirical,
}

/// Mixture block: weights, means and covariance matrices as nested arrays.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    pub weights: Option<Vec<f64>>,
    pub means: Option<Vec<Vec<f64>>>,
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
    /// Point CSV for `kind = "empirical"`.
    pub points: Option<PathBuf>,
    pub bandwidth: Option<f64>,
}

impl PriorConfig {
    /// The mixture described by the `weights`/`means`/`covariances` keys.
    pub fn mixture(&self) -> LabResult<GaussianMixture> {
        let missing = |k: &str| LabError::config(format!("prior: mixture needs `{k}`"));
        let weights = self.weights.clone().ok_or_else(|| missing("weights"))?;
        let means = self.means.clone().ok_or_else(|| missing("means"))?;
        let covs = self.covariances.as_ref().ok_or_else(|| missing("covariances"))?;
        let covariances = covs
            .iter()
            .map(|m| Covariance::Full(m.iter().flatten().copied().collect()))
            .collect();
        GaussianMixture::new(weights, means, covariances).map_err(|e| LabError::config(format!("prior: {e}")))
    }

    /// Mixture block holding `mixture`, with every covariance written out as a
    /// full matrix.
    pub fn from_mixture(mixture: &GaussianMixture) -> Self {
        let n = mixture.dim();
        let covariances = (0..mixture.len())
            .map(|k| match mixture.covariance(k) {
                Covariance::Isotropic(v) => (0..n)
                    .map(|i| (0..n).map(|j| if i == j { *v } else { 0.0 }).collect())
                    .collect(),
                Covariance::Full(m) => m.chunks(n).map(<[f64]>::to_vec).collect(),
            })
            .collect();
        Self {
            kind: PriorKind::Mixture,
            weights: Some(mixture.weights().to_vec()),
            means: Some((0..mixture.len()).map(|k| mixture.mean(k).to_vec()).collect()),
            covariances: Some(covariances),
            points: None,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub resolution: Option<usize>,
    pub t_max_count: Option<usize>,
    pub t_max_min: Option<f64>,
    pub t_max_max: Option<f64>,
    pub iters: Option<usize>,
    pub checkpoint_stride: Option<usize>,
    pub tol_x: Option<f64>,
    pub tol_g: Option<f64>,
    /// 100 `t_max` values instead of the desk-scale 20.
    pub full_scale: Option<bool>,
    pub census_resolution: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CensusSection {
    pub resolution: Option<usize>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReconSection {
    pub n_px: Option<usize>,
    pub n_angles: Option<usize>,
    pub noise: Option<f64>,
    pub n_images: Option<usize>,
    pub n_seeds: Option<usize>,
    pub prior_samples: Option<usize>,
    pub bandwidth: Option<f64>,
    pub init_scale: Option<f64>,
    /// Write a trace CSV and PGM image for every run.
    pub write_runs: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub x1: Option<Vec<f64>>,
    /// `toy` (default) or `recon`.
    pub problem: Option<TraceProblem>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TraceProblem {
    Toy,
    Recon,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub samples: Option<usize>,
    pub tolerance: Option<f64>,
    pub radius: Option<f64>,
}
