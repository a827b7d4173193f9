use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::reward::RidgeTarget;
use crate::sim::{ArrivalMode, RewardNoise, SupplyScheme};

/// One experiment: an environment recipe, an estimator, the policies to
/// compare, an optional one-parameter sweep and a batch of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub logging: LoggingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_policies() -> Vec<PolicyConfig> {
    vec![PolicyConfig::Greedy { label: None }, PolicyConfig::Opls { beta: 1.0, label: None }]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Feature-driven `f` mixed with a sorted shared-preference `g`.
    #[default]
    Synthetic,
    /// Explicit `q` (and optionally `q_c`) matrices.
    Matrix,
    /// Ratings and features loaded from CSV files.
    Interactions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default)]
    pub source: SourceKind,
    /// Number of users; for interaction data, the user subsample size.
    pub users: Option<usize>,
    /// Number of actions; for interaction data, the item subsample size.
    pub actions: Option<usize>,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_supply")]
    pub supply: SupplyScheme,
    #[serde(default = "default_s_max")]
    pub s_max: u32,
    /// Explicit starting stock; overrides `supply` and `s_max`.
    pub stock: Option<Vec<u32>>,
    /// Explicit horizon; otherwise `horizon_factor` times the total stock.
    pub horizon: Option<usize>,
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
    #[serde(default)]
    pub arrival: ArrivalMode,
    #[serde(default = "default_reward_sigma")]
    pub reward_sigma: f64,
    #[serde(default)]
    pub reward_noise: RewardNoise,
    /// Expected reward `q = q_c * q_r` for the matrix source.
    pub q: Option<Vec<Vec<f64>>>,
    /// Consumption probabilities for the matrix source; all ones if absent.
    pub q_c: Option<Vec<Vec<f64>>>,
    /// Arrival weights; uniform if absent.
    pub weights: Option<Vec<f64>>,
    pub labels: Option<Vec<String>>,
    pub ratings: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            source: SourceKind::Synthetic,
            users: None,
            actions: None,
            feature_dim: default_feature_dim(),
            lambda: default_lambda(),
            supply: default_supply(),
            s_max: default_s_max(),
            stock: None,
            horizon: None,
            horizon_factor: default_horizon_factor(),
            arrival: ArrivalMode::Iid,
            reward_sigma: default_reward_sigma(),
            reward_noise: RewardNoise::Normal,
            q: None,
            q_c: None,
            weights: None,
            labels: None,
            ratings: None,
            features: None,
        }
    }
}

pub const DEFAULT_USERS: usize = 200;
pub const DEFAULT_ACTIONS: usize = 100;

fn default_feature_dim() -> usize {
    10
}
fn default_lambda() -> f64 {
    0.5
}
fn default_supply() -> SupplyScheme {
    SupplyScheme::InverseProportional
}
fn default_s_max() -> u32 {
    20
}
fn default_horizon_factor() -> f64 {
    10.0
}
fn default_reward_sigma() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    /// The true expected reward.
    #[default]
    Exact,
    /// True expected reward plus iid Gaussian noise.
    Noise { sigma: f64 },
    /// Ridge regression on a dataset logged by the softmax logging policy.
    Ridge {
        penalty: f64,
        #[serde(default = "default_ridge_target")]
        target: RidgeTarget,
    },
}

fn default_ridge_target() -> RidgeTarget {
    RidgeTarget::ProductCr
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    /// Sold when the uniform-selection forecast reaches zero by the horizon.
    #[default]
    Naive,
    AllSold,
    AllUnsold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Greedy {
        label: Option<String>,
    },
    Opls {
        #[serde(default = "default_beta")]
        beta: f64,
        label: Option<String>,
    },
    OplsMixed {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        partition: PartitionMethod,
        label: Option<String>,
    },
    SoftmaxLogging {
        beta: f64,
        label: Option<String>,
    },
    /// Order-independent optimum of a unit-supply square instance.
    Optimal {
        label: Option<String>,
    },
}

fn default_beta() -> f64 {
    1.0
}

impl PolicyConfig {
    /// Name used in output files.
    pub fn name(&self) -> String {
        let (label, base, beta) = match self {
            PolicyConfig::Greedy { label } => (label, "greedy", None),
            PolicyConfig::Opls { beta, label } => (label, "opls", Some(*beta)),
            PolicyConfig::OplsMixed { beta, label, .. } => (label, "opls_mixed", Some(*beta)),
            PolicyConfig::SoftmaxLogging { beta, label } => (label, "softmax_logging", Some(*beta)),
            PolicyConfig::Optimal { label } => (label, "optimal", None),
        };
        match (label, beta) {
            (Some(l), _) => l.clone(),
            (None, Some(b)) if b != 1.0 && !matches!(self, PolicyConfig::SoftmaxLogging { .. }) => {
                format!("{base}(beta={b})")
            }
            _ => base.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    SMax,
    Users,
    Actions,
    EstimatorSigma,
    Beta,
    HorizonFactor,
    RewardSigma,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::SMax => "s_max",
            SweepParameter::Users => "users",
            SweepParameter::Actions => "actions",
            SweepParameter::EstimatorSigma => "estimator_sigma",
            SweepParameter::Beta => "beta",
            SweepParameter::HorizonFactor => "horizon_factor",
            SweepParameter::RewardSigma => "reward_sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "default_seed_count")]
    pub count: u64,
    #[serde(default)]
    pub base: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { count: default_seed_count(), base: 0 }
    }
}

fn default_seed_count() -> u64 {
    100
}

/// Logged-data generation for the ridge estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingConfig {
    #[serde(default = "default_logging_beta")]
    pub beta: f64,
    #[serde(default = "default_logging_episodes")]
    pub episodes: usize,
    /// Noise added to `q` before the logging policy scores actions.
    #[serde(default)]
    pub estimate_sigma: f64,
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self { beta: default_logging_beta(), episodes: default_logging_episodes(), estimate_sigma: 0.0 }
    }
}

fn default_logging_beta() -> f64 {
    -1.0
}
fn default_logging_episodes() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Episodes per (sweep value, seed) cell.
    #[serde(default = "default_n_sims")]
    pub n_sims: usize,
    /// Write per-step cumulative values to `trace.csv`.
    #[serde(default)]
    pub trace: bool,
    /// Steps at which allocation shares go to `allocation.csv`.
    #[serde(default)]
    pub allocation_checkpoints: Vec<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { n_sims: default_n_sims(), trace: false, allocation_checkpoints: Vec::new() }
    }
}

fn default_n_sims() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `results/<name>` if absent.
    pub dir: Option<PathBuf>,
}
