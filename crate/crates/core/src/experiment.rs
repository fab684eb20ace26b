//! Repeated simulation experiments: generate data, select, estimate, score.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::dnp::{self, DnpConfig};
use crate::ensemble::{self, EnnsConfig, Resampling};
use crate::error::{invalid, Result};
use crate::estimate::{self, BaggedDropoutSpec, Estimator, SparsityMode, SparsitySpec};
use crate::metrics;
use crate::nn::{self, Activation, NetworkArchitecture, TrainOptions};
use crate::seed;
use crate::sim::{self, GroundTruth, ResponseKind, ResponseSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Uniform,
    Correlated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Enns,
    Dnp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Enns => "enns",
            Method::Dnp => "dnp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    None,
    Plain,
    L1,
}

fn default_one() -> f64 {
    1.0
}
fn default_net_hidden() -> Vec<usize> {
    vec![50, 30, 15, 10]
}
fn default_hidden() -> Vec<usize> {
    vec![16]
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_methods() -> Vec<Method> {
    vec![Method::Enns, Method::Dnp]
}
fn default_bags() -> usize {
    10
}
fn default_ps() -> f64 {
    0.3
}
fn default_resampling() -> Resampling {
    Resampling::Bootstrap
}
fn default_dropouts() -> usize {
    5
}
fn default_dropout_rate() -> f64 {
    0.5
}
fn default_q() -> f64 {
    2.0
}
fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    50
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::None
}
fn default_sparsity_mode() -> SparsityMode {
    SparsityMode::Percentile
}
fn default_sparsity() -> Vec<f64> {
    vec![50.0]
}
fn default_est_epochs() -> usize {
    200
}
fn default_repetitions() -> usize {
    1
}
fn default_train() -> f64 {
    0.8
}
fn default_test() -> f64 {
    0.2
}
fn default_drop_rate() -> f64 {
    0.1
}

/// Experiment definition, read from a flat TOML file. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: Design,
    #[serde(default)]
    pub rho: f64,
    pub n: usize,
    pub p: usize,

    pub response: ResponseKind,
    pub task: Task,
    pub s: usize,
    #[serde(default = "default_one")]
    pub coef_mean: f64,
    #[serde(default = "default_one")]
    pub coef_sd: f64,
    #[serde(default = "default_one")]
    pub noise_sd: f64,
    #[serde(default = "default_net_hidden")]
    pub net_hidden: Vec<usize>,

    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,

    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Number of features to select (`s₀`).
    pub target: usize,
    #[serde(default = "default_bags")]
    pub bags: usize,
    #[serde(default = "default_ps")]
    pub appearance_proportion: f64,
    #[serde(default)]
    pub per_round: Option<usize>,
    #[serde(default)]
    pub bootstrap_size: Option<usize>,
    #[serde(default = "default_resampling")]
    pub resampling: Resampling,
    #[serde(default = "default_dropouts")]
    pub dropouts: usize,
    #[serde(default = "default_dropout_rate")]
    pub dropout_rate: f64,
    #[serde(default = "default_q")]
    pub norm_q: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,

    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_sparsity_mode")]
    pub sparsity_mode: SparsityMode,
    /// One value per weight matrix, or a single value applied to all of them.
    #[serde(default = "default_sparsity")]
    pub sparsity: Vec<f64>,
    #[serde(default = "default_lr")]
    pub est_learning_rate: f64,
    #[serde(default = "default_est_epochs")]
    pub est_epochs: usize,
    #[serde(default)]
    pub patience: usize,
    /// Pruned copies averaged at prediction time; 0 predicts with the plain network.
    #[serde(default)]
    pub bagged_repeats: usize,
    #[serde(default = "default_drop_rate")]
    pub bagged_drop_rate: f64,

    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_train")]
    pub train_fraction: f64,
    #[serde(default = "default_test")]
    pub test_fraction: f64,
    #[serde(default)]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(invalid("config: need n ≥ 2 and p ≥ 1"));
        }
        if self.s == 0 || self.s > self.p {
            return Err(invalid(format!("config: s must lie in 1..={}", self.p)));
        }
        if self.target == 0 || self.target > self.p {
            return Err(invalid(format!("config: target must lie in 1..={}", self.p)));
        }
        if self.repetitions == 0 {
            return Err(invalid("config: repetitions must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("config: at least one method is required"));
        }
        let fractions = [self.train_fraction, self.test_fraction, self.validation_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("config: split fractions must lie in [0, 1]"));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("config: train, test and validation fractions must sum to 1"));
        }
        if self.train_fraction <= 0.0 {
            return Err(invalid("config: train fraction must be positive"));
        }
        if self.estimator != EstimatorKind::None && self.test_fraction <= 0.0 {
            return Err(invalid("config: estimation needs a test fraction"));
        }
        if self.estimator == EstimatorKind::L1 {
            let depth = self.hidden.len();
            if self.sparsity.len() != 1 && self.sparsity.len() != depth + 1 {
                return Err(invalid(format!(
                    "config: sparsity needs 1 or {} values, got {}",
                    depth + 1,
                    self.sparsity.len()
                )));
            }
        }
        self.selection_arch()?;
        self.dnp_config().validate()?;
        Ok(())
    }

    fn selection_arch(&self) -> Result<NetworkArchitecture> {
        NetworkArchitecture::new(self.p, self.hidden.clone(), self.activation, self.task)
    }

    fn dnp_config(&self) -> DnpConfig {
        DnpConfig {
            norm_q: self.norm_q,
            num_dropouts: self.dropouts,
            dropout_rate: self.dropout_rate,
            train_opts: TrainOptions {
                learning_rate: self.learning_rate,
                max_epochs: self.epochs,
                ..TrainOptions::default()
            },
        }
    }

    fn response_spec(&self) -> ResponseSpec {
        ResponseSpec {
            kind: self.response,
            task: self.task,
            s: self.s,
            coef_mean: self.coef_mean,
            coef_sd: self.coef_sd,
            noise_sd: self.noise_sd,
            net_hidden: self.net_hidden.clone(),
        }
    }

    fn estimator(&self) -> Option<Estimator> {
        match self.estimator {
            EstimatorKind::None => None,
            EstimatorKind::Plain => Some(Estimator::Plain),
            EstimatorKind::L1 => {
                let per_layer_values = if self.sparsity.len() == 1 {
                    vec![self.sparsity[0]; self.hidden.len() + 1]
                } else {
                    self.sparsity.clone()
                };
                Some(Estimator::L1(SparsitySpec {
                    mode: self.sparsity_mode,
                    per_layer_values,
                }))
            }
        }
    }
}

/// Seed of repetition `r`.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    seed::derive(master, seed::STREAM_REPETITION, r as u64)
}

/// Generates the full dataset of one repetition.
pub fn generate(cfg: &ExperimentConfig, rep_seed: u64) -> Result<(Dataset, GroundTruth)> {
    let design_seed = seed::derive(rep_seed, seed::STREAM_RESAMPLE, 0);
    let x = match cfg.design {
        Design::Uniform => sim::gen_design_uniform(cfg.n, cfg.p, design_seed)?,
        Design::Correlated => sim::gen_design_correlated(cfg.n, cfg.p, cfg.rho, design_seed)?,
    };
    let (y, truth) = sim::gen_response(x.view(), &cfg.response_spec(), seed::derive(rep_seed, seed::STREAM_RESAMPLE, 1))?;
    Ok((Dataset::new(x, y, cfg.task)?, truth))
}

/// Shuffled `(train, validation, test)` row indices.
fn split(n: usize, cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let n_val = (n as f64 * cfg.validation_fraction).round() as usize;
    if n_test + n_val >= n {
        return Err(invalid("split leaves no training rows"));
    }
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(idx.len() - n_val);
    Ok((idx, val, test))
}

/// Outcome of one method within one repetition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodOutcome {
    /// Selected features, 0-based.
    pub selected: Vec<usize>,
    pub correct_count: usize,
    pub false_positive_rate: f64,
    /// `(name, value)` prediction metrics on the test rows.
    pub prediction: Vec<(String, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    /// One entry per configured method, or the failure message.
    pub outcome: std::result::Result<Vec<MethodOutcome>, String>,
}

fn prediction_metric_names(task: Task) -> &'static [&'static str] {
    match task {
        Task::Regression => &["rmse", "mae", "mape"],
        Task::Classification => &["accuracy", "auc", "f1"],
    }
}

fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    train: &Dataset,
    fit_set: &Dataset,
    test: Option<&Dataset>,
    support: &[usize],
    rep_seed: u64,
) -> Result<MethodOutcome> {
    let arch = cfg.selection_arch()?;
    let select_seed = seed::derive(rep_seed, seed::STREAM_BAG, 0);
    let selected = match method {
        Method::Enns => {
            let ecfg = EnnsConfig {
                num_bags: cfg.bags,
                bootstrap_size: cfg.bootstrap_size,
                resampling: cfg.resampling,
                appearance_proportion: cfg.appearance_proportion,
                target: cfg.target,
                per_round: cfg.per_round,
                dnp: cfg.dnp_config(),
                seed: select_seed,
            };
            ensemble::enns_select(train, &arch, &ecfg)?.selected
        }
        Method::Dnp => dnp::dnp_run(train, &arch, cfg.target, &cfg.dnp_config(), ensemble::bag_seed(select_seed, 0, 0))?,
    };
    let sel = metrics::selection_metrics(&selected, support);
    let mut prediction = Vec::new();
    if let (Some(estimator), Some(test)) = (cfg.estimator(), test) {
        let est_arch = arch.with_input_dim(selected.len());
        let n_fit = fit_set.n() as f64;
        let opts = TrainOptions {
            learning_rate: cfg.est_learning_rate,
            max_epochs: cfg.est_epochs,
            patience: cfg.patience,
            validation_fraction: cfg.validation_fraction / (cfg.train_fraction + cfg.validation_fraction),
            rng_seed: seed::derive(rep_seed, seed::STREAM_TRAIN, 0),
            ..TrainOptions::default()
        };
        if opts.validation_fraction > 0.0 && n_fit < 2.0 {
            return Err(invalid("validation split needs at least two fitting rows"));
        }
        let params = estimate::fit_model(&fit_set.select_columns(&selected)?, &est_arch, &estimator, &opts)?;
        let x_test = test.select_columns(&selected)?;
        let p_hat = if cfg.bagged_repeats > 0 {
            let spec = BaggedDropoutSpec {
                num_repeats: cfg.bagged_repeats,
                drop_rate: cfg.bagged_drop_rate,
                ..BaggedDropoutSpec::default()
            };
            estimate::predict_bagged_dropout(&params, &est_arch, x_test.x(), &spec, seed::derive(rep_seed, seed::STREAM_DROPOUT, 0))?.mean
        } else {
            nn::predict(&params, &est_arch, x_test.x())?
        };
        let y = test.y().to_vec();
        let yhat = p_hat.to_vec();
        match cfg.task {
            Task::Regression => {
                let m = metrics::regression_metrics(&y, &yhat)?;
                prediction = vec![("rmse".into(), Some(m.rmse)), ("mae".into(), Some(m.mae)), ("mape".into(), m.mape)];
            }
            Task::Classification => {
                let m = metrics::classification_metrics(&y, &yhat, 0.5)?;
                prediction = vec![("accuracy".into(), Some(m.accuracy)), ("auc".into(), m.auc), ("f1".into(), Some(m.f1))];
            }
        }
    }
    Ok(MethodOutcome {
        selected,
        correct_count: sel.correct_count,
        false_positive_rate: sel.false_positive_rate,
        prediction,
    })
}

fn run_repetition(cfg: &ExperimentConfig, r: usize) -> Result<Vec<MethodOutcome>> {
    let rep_seed = repetition_seed(cfg.seed, r);
    let (data, truth) = generate(cfg, rep_seed)?;
    let support = truth.support;
    let (train_idx, val_idx, test_idx) = split(data.n(), cfg, seed::derive(rep_seed, seed::STREAM_RESAMPLE, 2))?;
    let train = data.select_rows(&train_idx)?;
    let fit_rows: Vec<usize> = train_idx.iter().chain(&val_idx).copied().collect();
    let fit_set = data.select_rows(&fit_rows)?;
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(data.select_rows(&test_idx)?)
    };
    cfg.methods
        .iter()
        .map(|&m| run_method(cfg, m, &train, &fit_set, test.as_ref(), &support, rep_seed))
        .collect()
}

/// Runs every repetition (in parallel) and returns them in repetition order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RepetitionResult>> {
    cfg.validate()?;
    Ok((0..cfg.repetitions)
        .into_par_iter()
        .map(|r| RepetitionResult {
            repetition: r + 1,
            seed: repetition_seed(cfg.seed, r),
            outcome: run_repetition(cfg, r).map_err(|e| e.to_string()),
        })
        .collect())
}

fn metric_columns(cfg: &ExperimentConfig) -> Vec<String> {
    let mut cols = Vec::new();
    for m in &cfg.methods {
        let name = m.name();
        cols.push(format!("{name}_correct"));
        cols.push(format!("{name}_fpr"));
        if cfg.estimator != EstimatorKind::None {
            for metric in prediction_metric_names(cfg.task) {
                cols.push(format!("{name}_{metric}"));
            }
        }
    }
    cols
}

fn metric_values(outcomes: &[MethodOutcome]) -> Vec<Option<f64>> {
    let mut v = Vec::new();
    for o in outcomes {
        v.push(Some(o.correct_count as f64));
        v.push(Some(o.false_positive_rate));
        v.extend(o.prediction.iter().map(|(_, x)| *x));
    }
    v
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Results table: one row per repetition, then `mean` and `se` rows over the
/// successful repetitions. Failed repetitions keep their row with the error in
/// `status` and empty metrics.
pub fn results_csv(cfg: &ExperimentConfig, results: &[RepetitionResult]) -> String {
    let metric_cols = metric_columns(cfg);
    let mut out = String::new();
    let mut header = vec!["row".to_string(), "seed".to_string(), "status".to_string()];
    header.extend(cfg.methods.iter().map(|m| format!("{}_selected", m.name())));
    header.extend(metric_cols.iter().cloned());
    writeln!(out, "{}", header.join(",")).unwrap();

    let mut ok_rows: Vec<Vec<Option<f64>>> = Vec::new();
    for r in results {
        let mut fields = vec![r.repetition.to_string(), r.seed.to_string()];
        match &r.outcome {
            Ok(outcomes) => {
                fields.push("ok".into());
                for o in outcomes {
                    let sel: Vec<String> = o.selected.iter().map(|j| (j + 1).to_string()).collect();
                    fields.push(sel.join(" "));
                }
                let values = metric_values(outcomes);
                fields.extend(values.iter().map(|v| fmt_value(*v)));
                ok_rows.push(values);
            }
            Err(msg) => {
                let clean: String = msg.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
                fields.push(format!("failed: {clean}"));
                fields.extend(std::iter::repeat(String::new()).take(cfg.methods.len() + metric_cols.len()));
            }
        }
        writeln!(out, "{}", fields.join(",")).unwrap();
    }

    let mut mean_row = vec!["mean".to_string(), String::new(), format!("{} ok", ok_rows.len())];
    let mut se_row = vec!["se".to_string(), String::new(), format!("{} ok", ok_rows.len())];
    mean_row.extend(std::iter::repeat(String::new()).take(cfg.methods.len()));
    se_row.extend(std::iter::repeat(String::new()).take(cfg.methods.len()));
    for c in 0..metric_cols.len() {
        let vals: Vec<f64> = ok_rows.iter().filter_map(|r| r[c]).collect();
        let (mean, se) = mean_se(&vals);
        mean_row.push(fmt_value(mean));
        se_row.push(fmt_value(se));
    }
    writeln!(out, "{}", mean_row.join(",")).unwrap();
    writeln!(out, "{}", se_row.join(",")).unwrap();
    out
}

/// Mean and standard error (sample standard deviation over `√k`); the error
/// is absent for fewer than two values.
pub fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (Some(mean), Some((var / k).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
design = "uniform"
n = 40
p = 6
response = "linear"
task = "regression"
s = 2
target = 2
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.bags, 10);
        assert_eq!(cfg.methods, vec![Method::Enns, Method::Dnp]);
        assert_eq!(cfg.train_fraction + cfg.test_fraction, 1.0);
    }

    #[test]
    fn unknown_keys_and_bad_splits_are_rejected() {
        let typo = format!("{MINIMAL}bagz = 3\n");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let bad = format!("{MINIMAL}train_fraction = 0.5\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean_se(&[]), (None, None));
        assert_eq!(mean_se(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 1.0).abs() < 1e-15);
    }
}
