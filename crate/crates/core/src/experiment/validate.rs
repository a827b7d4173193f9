use std::fmt;
use std::path::Path;

use super::config::{EstimatorConfig, ExperimentConfig, PolicyConfig, SourceKind, SweepParameter};
use crate::error::{Error, Result};
use crate::sim::ArrivalMode;

/// One configuration problem, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Parses TOML text, reporting schema errors with the offending field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let deserializer = toml::Deserializer::parse(text).map_err(|e| vec![Diagnostic::new("<document>", e.message())])?;
    serde_path_to_error::deserialize(deserializer).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<document>".to_string() } else { path };
        vec![Diagnostic::new(field, e.inner().message())]
    })
}

/// Reads, parses and checks a config file. Relative data paths are resolved
/// against the file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text).map_err(Error::Config)?;
    let diagnostics = check_config(&config);
    if !diagnostics.is_empty() {
        return Err(Error::Config(diagnostics));
    }
    if let Some(base) = path.parent() {
        for file in [&mut config.environment.ratings, &mut config.environment.features].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
    }
    Ok(config)
}

/// All diagnostics for a config file; only an unreadable file is an error.
pub fn validate_config(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match parse_config(&text) {
        Ok(config) => check_config(&config),
        Err(diagnostics) => diagnostics,
    })
}

fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn positive_integer(x: f64) -> bool {
    x.is_finite() && x >= 1.0 && x.fract() == 0.0
}

/// Range and cross-field checks on a parsed config.
pub fn check_config(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| out.push(Diagnostic::new(field, message));
    let env = &config.environment;

    if config.name.trim().is_empty() || config.name.contains(['/', '\\']) {
        push("name", "must be a nonempty name without path separators".into());
    }
    if !(0.0..=1.0).contains(&env.lambda) {
        push("environment.lambda", format!("{} is outside [0, 1]", env.lambda));
    }
    if env.users == Some(0) {
        push("environment.users", "must be at least 1".into());
    }
    if env.actions == Some(0) {
        push("environment.actions", "must be at least 1".into());
    }
    if env.s_max == 0 {
        push("environment.s_max", "must be at least 1".into());
    }
    if env.horizon == Some(0) {
        push("environment.horizon", "must be at least 1".into());
    }
    if !(env.horizon_factor.is_finite() && env.horizon_factor > 0.0) {
        push("environment.horizon_factor", "must be finite and > 0".into());
    }
    if !non_negative(env.reward_sigma) {
        push("environment.reward_sigma", "must be finite and >= 0".into());
    }

    // shape implied by the source, where it is known before loading data
    let mut shape: (Option<usize>, Option<usize>) = (env.users, env.actions);
    match env.source {
        SourceKind::Synthetic => {
            for (field, present) in [
                ("environment.q", env.q.is_some()),
                ("environment.q_c", env.q_c.is_some()),
                ("environment.ratings", env.ratings.is_some()),
                ("environment.features", env.features.is_some()),
            ] {
                if present {
                    push(field, "only used by other sources".into());
                }
            }
            shape = (
                Some(env.users.unwrap_or(super::config::DEFAULT_USERS)),
                Some(env.actions.unwrap_or(super::config::DEFAULT_ACTIONS)),
            );
        }
        SourceKind::Matrix => match &env.q {
            None => push("environment.q", "required for the matrix source".into()),
            Some(q) => {
                let cols = q.first().map_or(0, Vec::len);
                if q.is_empty() || cols == 0 || q.iter().any(|r| r.len() != cols) {
                    push("environment.q", "must be a nonempty rectangular matrix".into());
                } else {
                    if q.iter().flatten().any(|v| !non_negative(*v)) {
                        push("environment.q", "entries must be finite and >= 0".into());
                    }
                    if env.users.is_some_and(|u| u != q.len()) {
                        push("environment.users", format!("conflicts with q, which has {} rows", q.len()));
                    }
                    if env.actions.is_some_and(|a| a != cols) {
                        push("environment.actions", format!("conflicts with q, which has {cols} columns"));
                    }
                    shape = (Some(q.len()), Some(cols));
                    if let Some(q_c) = &env.q_c {
                        if q_c.len() != q.len() || q_c.iter().any(|r| r.len() != cols) {
                            push("environment.q_c", "must have the same shape as q".into());
                        } else if q_c.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                            push("environment.q_c", "entries must lie in [0, 1]".into());
                        } else if q_c.iter().flatten().zip(q.iter().flatten()).any(|(&p, &v)| p == 0.0 && v != 0.0) {
                            push("environment.q_c", "zero consumption probability with nonzero q".into());
                        }
                    }
                }
                if env.ratings.is_some() || env.features.is_some() {
                    push("environment.source", "ratings/features are only used by the interactions source".into());
                }
            }
        },
        SourceKind::Interactions => {
            if env.ratings.is_none() {
                push("environment.ratings", "required for the interactions source".into());
            }
            if env.features.is_none() {
                push("environment.features", "required for the interactions source".into());
            }
            if env.q.is_some() || env.q_c.is_some() {
                push("environment.source", "q/q_c are only used by the matrix source".into());
            }
        }
    }
    if let (Some(w), Some(users)) = (&env.weights, shape.0) {
        let total: f64 = w.iter().sum();
        if w.len() != users || w.iter().any(|v| !non_negative(*v)) || (total - 1.0).abs() > 1e-9 {
            push("environment.weights", format!("must be {users} nonnegative numbers summing to 1"));
        }
    }
    if env.weights.is_some() && env.source != SourceKind::Matrix {
        push("environment.weights", "only supported for the matrix source".into());
    }
    if let (Some(labels), Some(actions)) = (&env.labels, shape.1) {
        if labels.len() != actions {
            push("environment.labels", format!("expected {actions} labels, found {}", labels.len()));
        }
    }
    if let Some(stock) = &env.stock {
        if shape.1.is_some_and(|a| a != stock.len()) {
            push("environment.stock", format!("expected {} entries, found {}", shape.1.unwrap_or(0), stock.len()));
        }
        if stock.iter().all(|&s| s == 0) {
            push("environment.stock", "at least one action needs stock".into());
        }
    }
    if let ArrivalMode::Scripted(seq) = &env.arrival {
        if seq.is_empty() || shape.0.is_some_and(|u| seq.iter().any(|&j| j >= u)) {
            push("environment.arrival", "scripted users must be nonempty and in range".into());
        }
    }

    match config.estimator {
        EstimatorConfig::Exact => {}
        EstimatorConfig::Noise { sigma } => {
            if !non_negative(sigma) {
                push("estimator.sigma", "must be finite and >= 0".into());
            }
        }
        EstimatorConfig::Ridge { penalty, .. } => {
            if !(penalty.is_finite() && penalty > 0.0) {
                push("estimator.penalty", "must be finite and > 0".into());
            }
            if config.logging.episodes == 0 {
                push("logging.episodes", "the ridge estimator needs at least one logged episode".into());
            }
        }
    }
    if !config.logging.beta.is_finite() {
        push("logging.beta", "must be finite".into());
    }
    if !non_negative(config.logging.estimate_sigma) {
        push("logging.estimate_sigma", "must be finite and >= 0".into());
    }

    if config.policies.is_empty() {
        push("policies", "at least one policy is required".into());
    }
    let mut names = std::collections::BTreeSet::new();
    for (i, policy) in config.policies.iter().enumerate() {
        let field = format!("policies[{i}]");
        if !names.insert(policy.name()) {
            push(&field, format!("duplicate policy name `{}`; set a label", policy.name()));
        }
        match policy {
            PolicyConfig::Opls { beta, .. } | PolicyConfig::OplsMixed { beta, .. } if !(0.0..=1.0).contains(beta) => {
                push(&format!("{field}.beta"), format!("{beta} is outside [0, 1]"));
            }
            PolicyConfig::SoftmaxLogging { beta, .. } if !beta.is_finite() => {
                push(&format!("{field}.beta"), "must be finite".into());
            }
            PolicyConfig::Optimal { .. } => {
                let square = matches!(shape, (Some(u), Some(a)) if u == a);
                let unit = env.stock.as_ref().is_some_and(|s| s.iter().all(|&v| v == 1));
                let always = env.q_c.as_ref().is_none_or(|q_c| q_c.iter().flatten().all(|&p| p == 1.0));
                if env.source != SourceKind::Matrix || !square || !unit || !always {
                    push(&field, "optimal needs a square matrix source with unit stock and q_c = 1".into());
                }
                if env.arrival != ArrivalMode::Permutation {
                    push(&field, "optimal needs permutation arrivals".into());
                }
                if env.horizon.is_some_and(|t| shape.0.is_some_and(|u| t < u)) {
                    push(&field, "optimal needs a horizon of at least one pass over the users".into());
                }
            }
            _ => {}
        }
    }

    if let Some(sweep) = &config.sweep {
        if sweep.values.is_empty() {
            push("sweep.values", "must not be empty".into());
        }
        let p = sweep.parameter;
        for (i, &v) in sweep.values.iter().enumerate() {
            let field = format!("sweep.values[{i}]");
            let ok = match p {
                SweepParameter::Lambda | SweepParameter::Beta => (0.0..=1.0).contains(&v),
                SweepParameter::SMax | SweepParameter::Users | SweepParameter::Actions => positive_integer(v),
                SweepParameter::EstimatorSigma | SweepParameter::RewardSigma => non_negative(v),
                SweepParameter::HorizonFactor => v.is_finite() && v > 0.0,
            };
            if !ok {
                push(&field, format!("{v} is not a valid {}", p.as_str()));
            }
        }
        let conflict = match p {
            SweepParameter::Lambda => {
                (env.source != SourceKind::Synthetic).then_some("lambda needs the synthetic source")
            }
            SweepParameter::SMax => env.stock.is_some().then_some("s_max has no effect with explicit stock"),
            SweepParameter::Users | SweepParameter::Actions => {
                (env.source == SourceKind::Matrix).then_some("the matrix source has a fixed shape")
            }
            SweepParameter::EstimatorSigma => (!matches!(config.estimator, EstimatorConfig::Noise { .. }))
                .then_some("estimator_sigma needs the noise estimator"),
            SweepParameter::Beta => (!config
                .policies
                .iter()
                .any(|p| matches!(p, PolicyConfig::Opls { .. } | PolicyConfig::OplsMixed { .. })))
            .then_some("beta needs an opls policy"),
            SweepParameter::HorizonFactor => {
                env.horizon.is_some().then_some("horizon_factor has no effect with an explicit horizon")
            }
            SweepParameter::RewardSigma => None,
        };
        if let Some(message) = conflict {
            push("sweep.parameter", message.into());
        }
    }

    if config.seeds.count == 0 {
        push("seeds.count", "must be at least 1".into());
    }
    if config.evaluation.n_sims == 0 {
        push("evaluation.n_sims", "must be at least 1".into());
    }
    if config.evaluation.allocation_checkpoints.contains(&0) {
        push("evaluation.allocation_checkpoints", "steps count from 1".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagnostics(text: &str) -> Vec<Diagnostic> {
        match parse_config(text) {
            Ok(c) => check_config(&c),
            Err(d) => d,
        }
    }

    #[test]
    fn empty_document_uses_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.environment.lambda, 0.5);
        assert_eq!(c.environment.s_max, 20);
        assert_eq!(c.seeds.count, 100);
        assert_eq!(c.logging.beta, -1.0);
        assert!(check_config(&c).is_empty());
    }

    #[test]
    fn lambda_out_of_range_names_field() {
        let d = diagnostics("[environment]\nlambda = 1.5\n");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "environment.lambda");
    }

    #[test]
    fn unknown_policy_kind_is_schema_error() {
        let d = diagnostics("[[policies]]\nkind = \"greedy\"\n[[policies]]\nkind = \"thompson\"\n");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "policies[1].kind");
        assert!(d[0].message.contains("unknown variant"), "{}", d[0].message);
    }

    #[test]
    fn type_errors_and_unknown_fields_have_paths() {
        let d = diagnostics("[environment]\ns_max = \"many\"\n");
        assert_eq!(d[0].field, "environment.s_max");
        let d = diagnostics("[seeds]\ncount = 3\nbase_seed = 1\n");
        assert_eq!(d[0].field, "seeds.base_seed");
        assert!(d[0].message.contains("base_seed"));
    }

    #[test]
    fn cross_field_checks() {
        let d = diagnostics("[estimator]\nkind = \"ridge\"\npenalty = 1.0\n[logging]\nepisodes = 0\n");
        assert!(d.iter().any(|d| d.field == "logging.episodes"));
        let d = diagnostics("[environment]\nsource = \"matrix\"\n");
        assert!(d.iter().any(|d| d.field == "environment.q"));
        let d = diagnostics("[sweep]\nparameter = \"estimator_sigma\"\nvalues = [0.0, 1.0]\n");
        assert!(d.iter().any(|d| d.field == "sweep.parameter"));
        let d = diagnostics("[[policies]]\nkind = \"opls\"\n[[policies]]\nkind = \"opls\"\n");
        assert!(d.iter().any(|d| d.message.contains("duplicate")));
        let d = diagnostics("[[policies]]\nkind = \"optimal\"\n");
        assert!(d.iter().any(|d| d.field == "policies[0]"));
    }

    #[test]
    fn syntax_error_is_reported() {
        let d = diagnostics("[environment\n");
        assert_eq!(d[0].field, "<document>");
    }
}
