use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{
    EstimatorConfig, ExperimentConfig, PartitionMethod, PolicyConfig, SourceKind, SweepParameter, DEFAULT_ACTIONS,
    DEFAULT_USERS,
};
use super::validate::check_config;
use crate::domain::{ActionSet, InventoryState, UserPopulation};
use crate::error::{Error, Result};
use crate::ingest::{load_interactions, InteractionDataset};
use crate::oracle::{assignment_optimal_value, UnitSupplyInstance};
use crate::policies::{partition_by_depletion, Policy, SupplyPartition};
use crate::reward::{
    mixed_model, noisy_estimate, ridge_fit, sorted_baseline_g, synth_feature_reward, FeatureRewardKind, RewardEstimate,
    RewardModel,
};
use crate::sim::{
    derive_seed, evaluate_policy, generate_logged_dataset, initial_supply, EnvironmentSpec, EvalOptions, Evaluation,
};

/// Overrides the output directory.
pub const OUT_ENV: &str = "LIMITED_SUPPLY_OUT";
/// Overrides the worker count.
pub const JOBS_ENV: &str = "LIMITED_SUPPLY_JOBS";

const STREAM_ENVIRONMENT: u64 = 0x101;
const STREAM_SUPPLY: u64 = 0x102;
const STREAM_ESTIMATE: u64 = 0x103;
const STREAM_LOGGING: u64 = 0x104;
const STREAM_EVALUATION: u64 = 0x105;

fn cell_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Replaces `seeds.base`.
    pub seed: Option<u64>,
}

impl RunOptions {
    /// Options taken from [`OUT_ENV`] and [`JOBS_ENV`].
    pub fn from_env() -> Result<Self> {
        let out_dir = std::env::var_os(OUT_ENV).map(PathBuf::from);
        let jobs = match std::env::var(JOBS_ENV) {
            Ok(v) => Some(
                v.parse::<usize>()
                    .ok()
                    .filter(|&j| j > 0)
                    .ok_or_else(|| Error::invalid("jobs", format!("{JOBS_ENV}={v} is not a positive integer")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { out_dir, jobs, seed: None })
    }

    /// Fields set in `other` win.
    pub fn overridden_by(self, other: RunOptions) -> Self {
        Self { out_dir: other.out_dir.or(self.out_dir), jobs: other.jobs.or(self.jobs), seed: other.seed.or(self.seed) }
    }
}

/// Data shared by every cell of a run.
#[derive(Debug, Clone, Default)]
pub struct Prepared {
    dataset: Option<Arc<InteractionDataset>>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let env = &config.environment;
    let dataset = match (env.source, &env.ratings, &env.features) {
        (SourceKind::Interactions, Some(r), Some(f)) => Some(Arc::new(load_interactions(r, f)?)),
        (SourceKind::Interactions, _, _) => return Err(Error::invalid("environment", "interaction files are missing")),
        _ => None,
    };
    Ok(Prepared { dataset })
}

/// `None` stands for the single cell of an experiment without a sweep.
pub fn sweep_points(config: &ExperimentConfig) -> Vec<Option<f64>> {
    match &config.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    }
}

pub fn seeds(config: &ExperimentConfig, options: &RunOptions) -> Vec<u64> {
    let base = options.seed.unwrap_or(config.seeds.base);
    (0..config.seeds.count).map(|i| base.wrapping_add(i)).collect()
}

/// The config with the sweep parameter set to `value`.
pub fn apply_sweep(config: &ExperimentConfig, value: Option<f64>) -> ExperimentConfig {
    let mut c = config.clone();
    let (Some(sweep), Some(v)) = (&config.sweep, value) else {
        return c;
    };
    match sweep.parameter {
        SweepParameter::Lambda => c.environment.lambda = v,
        SweepParameter::SMax => c.environment.s_max = v as u32,
        SweepParameter::Users => c.environment.users = Some(v as usize),
        SweepParameter::Actions => c.environment.actions = Some(v as usize),
        SweepParameter::EstimatorSigma => c.estimator = EstimatorConfig::Noise { sigma: v },
        SweepParameter::Beta => {
            for p in &mut c.policies {
                let base = match p {
                    PolicyConfig::Opls { .. } => "opls",
                    PolicyConfig::OplsMixed { .. } => "opls_mixed",
                    _ => continue,
                };
                if let PolicyConfig::Opls { beta, label } | PolicyConfig::OplsMixed { beta, label, .. } = p {
                    // keep the name stable across the sweep
                    label.get_or_insert_with(|| base.into());
                    *beta = v;
                }
            }
        }
        SweepParameter::HorizonFactor => c.environment.horizon_factor = v,
        SweepParameter::RewardSigma => c.environment.reward_sigma = v,
    }
    c
}

/// Everything needed to evaluate the configured policies for one
/// `(sweep value, seed)` pair.
#[derive(Debug, Clone)]
pub struct Cell {
    pub env: EnvironmentSpec,
    pub estimate: Arc<RewardEstimate>,
    pub greedy: Policy,
    pub policies: Vec<(String, CellPolicy)>,
}

#[derive(Debug, Clone)]
pub enum CellPolicy {
    Simulated(Policy),
    /// Exact order-independent optimum, not simulated.
    Optimal(f64),
}

fn matrix_model(env: &super::config::EnvironmentConfig) -> Result<(RewardModel, UserPopulation)> {
    let q = env.q.as_ref().ok_or_else(|| Error::invalid("q", "missing"))?;
    let (rows, cols) = (q.len(), q.first().map_or(0, Vec::len));
    let q = Array2::from_shape_vec((rows, cols), q.concat()).map_err(|e| Error::invalid("q", e.to_string()))?;
    let model = match &env.q_c {
        None => RewardModel::always_consumed(q)?,
        Some(q_c) => {
            let q_c =
                Array2::from_shape_vec((rows, cols), q_c.concat()).map_err(|e| Error::invalid("q_c", e.to_string()))?;
            let q_r = Array2::from_shape_fn((rows, cols), |i| if q_c[i] > 0.0 { q[i] / q_c[i] } else { 0.0 });
            RewardModel::new(q_c, q_r)?
        }
    };
    let weights = env.weights.clone().unwrap_or_else(|| vec![1.0 / rows as f64; rows]);
    Ok((model, UserPopulation::new(Array2::zeros((rows, 0)), weights)?))
}

fn synthetic_model(
    env: &super::config::EnvironmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(RewardModel, UserPopulation)> {
    let users = env.users.unwrap_or(DEFAULT_USERS);
    let actions = env.actions.unwrap_or(DEFAULT_ACTIONS);
    let features = Array2::from_shape_simple_fn((users, env.feature_dim), || rand::Rng::sample(rng, StandardNormal));
    let population = UserPopulation::uniform(features)?;
    let f_c = synth_feature_reward(&population, actions, rng, FeatureRewardKind::Logistic);
    let f_r = synth_feature_reward(&population, actions, rng, FeatureRewardKind::Linear);
    let max = |m: &Array2<f64>| m.iter().copied().fold(0.0, f64::max);
    let g_c = sorted_baseline_g(rng, users, actions, max(&f_c));
    let g_r = sorted_baseline_g(rng, users, actions, max(&f_r));
    Ok((mixed_model(&f_c, &g_c, &f_r, &g_r, env.lambda)?, population))
}

pub fn build_cell(config: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<Cell> {
    let env_cfg = &config.environment;
    let mut env_rng = cell_rng(seed, STREAM_ENVIRONMENT);
    let (model, population) = match env_cfg.source {
        SourceKind::Synthetic => synthetic_model(env_cfg, &mut env_rng)?,
        SourceKind::Matrix => matrix_model(env_cfg)?,
        SourceKind::Interactions => {
            let full = prepared
                .dataset
                .as_ref()
                .ok_or_else(|| Error::invalid("environment", "interaction data was not loaded"))?;
            let users = env_cfg.users.unwrap_or(full.users());
            let items = env_cfg.actions.unwrap_or(full.items());
            let data = if (users, items) == (full.users(), full.items()) {
                (**full).clone()
            } else {
                full.subsample(users, items, &mut env_rng)?
            };
            (data.to_reward_model()?, data.population()?)
        }
    };
    let model = Arc::new(model);

    let stock = match &env_cfg.stock {
        Some(s) => InventoryState::new(s.clone()),
        None => initial_supply(env_cfg.supply, env_cfg.s_max, &model, &population, &mut cell_rng(seed, STREAM_SUPPLY))?,
    };
    let horizon =
        env_cfg.horizon.unwrap_or_else(|| ((env_cfg.horizon_factor * stock.total() as f64).ceil() as usize).max(1));
    let mut env = EnvironmentSpec::new(population, model.clone(), stock, horizon)?
        .with_reward_noise(env_cfg.reward_noise, env_cfg.reward_sigma)?
        .with_arrival(env_cfg.arrival.clone())?;
    if let Some(labels) = &env_cfg.labels {
        env = env.with_actions(ActionSet::labelled(labels.clone())?)?;
    }

    let mut estimate_rng = cell_rng(seed, STREAM_ESTIMATE);
    let estimate = Arc::new(match &config.estimator {
        EstimatorConfig::Exact => RewardEstimate::exact(&model),
        EstimatorConfig::Noise { sigma } => noisy_estimate(&model, *sigma, &mut estimate_rng)?,
        EstimatorConfig::Ridge { penalty, target } => {
            let logging_view = Arc::new(noisy_estimate(&model, config.logging.estimate_sigma, &mut estimate_rng)?);
            let logging = Policy::softmax_logging(logging_view, env.population(), config.logging.beta)?;
            let data =
                generate_logged_dataset(&env, &logging, config.logging.episodes, derive_seed(seed, STREAM_LOGGING))?;
            ridge_fit(&data, env.population(), model.actions(), *penalty, *target)?
        }
    });

    let population = env.population();
    let greedy = Policy::greedy(estimate.clone(), population)?;
    let policies = config
        .policies
        .iter()
        .map(|p| {
            let policy = match p {
                PolicyConfig::Greedy { .. } => CellPolicy::Simulated(greedy.clone()),
                PolicyConfig::Opls { beta, .. } => {
                    CellPolicy::Simulated(Policy::opls(estimate.clone(), population, *beta)?)
                }
                PolicyConfig::OplsMixed { beta, partition, .. } => {
                    let partition = match partition {
                        PartitionMethod::Naive => {
                            partition_by_depletion(env.initial_supply(), horizon, model.q_c(), population.weights())?
                        }
                        PartitionMethod::AllSold => SupplyPartition::all_sold(model.actions()),
                        PartitionMethod::AllUnsold => SupplyPartition::all_unsold(model.actions()),
                    };
                    CellPolicy::Simulated(Policy::opls_mixed(estimate.clone(), population, *beta, partition)?)
                }
                PolicyConfig::SoftmaxLogging { beta, .. } => {
                    CellPolicy::Simulated(Policy::softmax_logging(estimate.clone(), population, *beta)?)
                }
                PolicyConfig::Optimal { .. } => {
                    let inst = UnitSupplyInstance::new(model.q().clone(), population.weights().to_vec())?;
                    CellPolicy::Optimal(assignment_optimal_value(&inst)?.value)
                }
            };
            Ok((p.name(), policy))
        })
        .collect::<Result<_>>()?;
    Ok(Cell { env, estimate, greedy, policies })
}

#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub name: String,
    pub mean: f64,
    pub std_error: f64,
    pub relative_to_greedy: Option<f64>,
    /// Absent for the exact optimum.
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub horizon: usize,
    pub initial_stock: u64,
    pub greedy: Evaluation,
    pub policies: Vec<PolicyOutcome>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Evaluates every policy of a cell on common random numbers.
pub fn evaluate_cell(
    config: &ExperimentConfig,
    cell: &Cell,
    sweep_value: Option<f64>,
    seed: u64,
) -> Result<CellOutcome> {
    let eval_seed = derive_seed(seed, STREAM_EVALUATION);
    let n_sims = config.evaluation.n_sims;
    let options = EvalOptions { allocation_checkpoints: config.evaluation.allocation_checkpoints.clone() };
    let greedy = evaluate_policy(&cell.env, &cell.greedy, n_sims, eval_seed, &options)?;
    let policies = cell
        .policies
        .iter()
        .map(|(name, policy)| {
            Ok(match policy {
                CellPolicy::Optimal(value) => PolicyOutcome {
                    name: name.clone(),
                    mean: *value,
                    std_error: 0.0,
                    relative_to_greedy: ratio(*value, greedy.value.mean),
                    evaluation: None,
                },
                CellPolicy::Simulated(p) => {
                    let eval = if matches!(p.kind(), crate::policies::PolicyKind::Greedy) {
                        greedy.clone()
                    } else {
                        evaluate_policy(&cell.env, p, n_sims, eval_seed, &options)?
                    };
                    PolicyOutcome {
                        name: name.clone(),
                        mean: eval.value.mean,
                        std_error: eval.value.std_error,
                        relative_to_greedy: ratio(eval.value.mean, greedy.value.mean),
                        evaluation: Some(eval),
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(CellOutcome {
        sweep_value,
        seed,
        horizon: cell.env.horizon(),
        initial_stock: cell.env.initial_supply().total(),
        greedy,
        policies,
    })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    builder.build().map_err(|e| Error::invalid("jobs", e.to_string()))
}

/// Builds and evaluates every `(sweep value, seed)` cell. The result order
/// and every value are independent of the worker count.
pub fn run_cells(config: &ExperimentConfig, options: &RunOptions) -> Result<Vec<CellOutcome>> {
    let diagnostics = check_config(config);
    if !diagnostics.is_empty() {
        return Err(Error::Config(diagnostics));
    }
    let prepared = prepare(config)?;
    let seeds = seeds(config, options);
    let cells: Vec<(Option<f64>, u64)> =
        sweep_points(config).into_iter().flat_map(|v| seeds.iter().map(move |&s| (v, s))).collect();
    let outcomes: Vec<CellOutcome> = thread_pool(options.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(value, seed)| {
                let cell_config = apply_sweep(config, value);
                let cell = build_cell(&cell_config, &prepared, seed)?;
                evaluate_cell(&cell_config, &cell, value, seed)
            })
            .collect::<Result<_>>()
    })?;
    if config.environment.horizon.is_none() {
        let undepleted = outcomes
            .iter()
            .filter(|c| c.policies.iter().filter_map(|p| p.evaluation.as_ref()).any(|e| e.depleted_fraction < 1.0))
            .count();
        if undepleted > 0 {
            log::warn!(
                "{undepleted} of {} cells ended with stock left at the horizon; raise environment.horizon_factor",
                outcomes.len()
            );
        }
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary_rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_sha256: String,
    base_seed: u64,
    seed_count: u64,
    files: &'a [String],
    versions: Versions,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct Versions {
    limited_supply: &'static str,
    output_format: u32,
}

/// SHA-256 of the config's canonical JSON form.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn default_out_dir(config: &ExperimentConfig) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| Path::new("results").join(&config.name))
}

/// Runs the experiment and writes `summary.csv`, `supply.csv`, optional
/// `trace.csv` and `allocation.csv`, and `manifest.json`. Files are written
/// to a scratch directory next to the target and moved into place only on
/// success.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    let outcomes = run_cells(config, options)?;
    let out_dir = options.out_dir.clone().unwrap_or_else(|| default_out_dir(config));
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let scratch =
        tempfile::Builder::new().prefix(".limited-supply-").tempdir_in(&parent).map_err(|e| Error::io(&parent, e))?;

    let sweep_param = config.sweep.as_ref().map_or("none", |s| s.parameter.as_str());
    let mut files = vec!["summary.csv".to_string(), "supply.csv".to_string()];
    let summary_rows = write_summary(&scratch.path().join("summary.csv"), sweep_param, &outcomes)?;
    write_supply(&scratch.path().join("supply.csv"), sweep_param, &outcomes)?;
    if config.evaluation.trace {
        write_trace(&scratch.path().join("trace.csv"), sweep_param, &outcomes)?;
        files.push("trace.csv".into());
    }
    if !config.evaluation.allocation_checkpoints.is_empty() {
        write_allocation(&scratch.path().join("allocation.csv"), sweep_param, &outcomes)?;
        files.push("allocation.csv".into());
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        name: &config.name,
        config_sha256: config_hash(config),
        base_seed: options.seed.unwrap_or(config.seeds.base),
        seed_count: config.seeds.count,
        files: &files,
        versions: Versions { limited_supply: env!("CARGO_PKG_VERSION"), output_format: 1 },
        config,
    };
    let manifest_path = scratch.path().join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    if out_dir.exists() {
        fs::remove_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    }
    let scratch_path = scratch.keep();
    fs::rename(&scratch_path, &out_dir).map_err(|e| {
        let _ = fs::remove_dir_all(&scratch_path);
        Error::io(&out_dir, e)
    })?;
    Ok(RunReport { out_dir, files, summary_rows })
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    let mut file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub const SUMMARY_HEADER: [&str; 7] =
    ["sweep_param", "sweep_value", "seed", "policy", "value", "std_error", "relative_to_greedy"];
pub const TRACE_HEADER: [&str; 7] =
    ["sweep_param", "sweep_value", "seed", "policy", "t", "cumulative_value", "relative_to_greedy"];
pub const ALLOCATION_HEADER: [&str; 8] =
    ["sweep_param", "sweep_value", "seed", "policy", "t", "user", "action", "share"];
pub const SUPPLY_HEADER: [&str; 8] = [
    "sweep_param",
    "sweep_value",
    "seed",
    "policy",
    "horizon",
    "initial_stock",
    "mean_unsold_units",
    "depleted_fraction",
];

fn write_summary(path: &Path, sweep_param: &str, outcomes: &[CellOutcome]) -> Result<usize> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    let mut rows = 0;
    for cell in outcomes {
        for p in &cell.policies {
            w.write_record([
                sweep_param.to_string(),
                fmt_opt(cell.sweep_value),
                cell.seed.to_string(),
                p.name.clone(),
                p.mean.to_string(),
                p.std_error.to_string(),
                fmt_opt(p.relative_to_greedy),
            ])?;
            rows += 1;
        }
    }
    finish(w, path)?;
    Ok(rows)
}

fn write_supply(path: &Path, sweep_param: &str, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUPPLY_HEADER)?;
    for cell in outcomes {
        for p in &cell.policies {
            let Some(eval) = &p.evaluation else { continue };
            w.write_record([
                sweep_param.to_string(),
                fmt_opt(cell.sweep_value),
                cell.seed.to_string(),
                p.name.clone(),
                cell.horizon.to_string(),
                cell.initial_stock.to_string(),
                eval.mean_unsold_units.to_string(),
                eval.depleted_fraction.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

fn write_trace(path: &Path, sweep_param: &str, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for cell in outcomes {
        let base = &cell.greedy.value.per_timestep_cumulative;
        for p in &cell.policies {
            let Some(eval) = &p.evaluation else { continue };
            for (t, (v, g)) in eval.value.per_timestep_cumulative.iter().zip(base).enumerate() {
                w.write_record([
                    sweep_param.to_string(),
                    fmt_opt(cell.sweep_value),
                    cell.seed.to_string(),
                    p.name.clone(),
                    (t + 1).to_string(),
                    v.to_string(),
                    fmt_opt(ratio(*v, *g)),
                ])?;
            }
        }
    }
    finish(w, path)
}

fn write_allocation(path: &Path, sweep_param: &str, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ALLOCATION_HEADER)?;
    for cell in outcomes {
        for p in &cell.policies {
            let Some(eval) = &p.evaluation else { continue };
            for snapshot in &eval.allocation {
                for ((user, action), share) in snapshot.shares.indexed_iter() {
                    w.write_record([
                        sweep_param.to_string(),
                        fmt_opt(cell.sweep_value),
                        cell.seed.to_string(),
                        p.name.clone(),
                        snapshot.t.to_string(),
                        user.to_string(),
                        action.to_string(),
                        share.to_string(),
                    ])?;
                }
            }
        }
    }
    finish(w, path)
}
