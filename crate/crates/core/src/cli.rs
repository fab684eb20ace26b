//! `enns` command-line interface.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::data::{Dataset, Task};
use crate::dnp::{self, DnpConfig};
use crate::ensemble::{self, EnnsConfig, Resampling};
use crate::error::{invalid, Error, ErrorKind, Result};
use crate::estimate::{self, BaggedDropoutSpec, Estimator, SparsityMode, SparsitySpec};
use crate::experiment::{self, ExperimentConfig};
use crate::io::{self, StoredModel, TruthFile};
use crate::metrics;
use crate::nn::{self, Activation, NetworkArchitecture, TrainOptions};
use crate::sim::{self, ResponseKind, ResponseSpec};
use crate::theory::{self, SignalProfile};

#[derive(Debug, Parser)]
#[command(name = "enns", version, about = "Neural-network variable selection for high-dimensional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (X.csv, y.csv, truth.json).
    GenData(GenDataArgs),
    /// Select features with ENNS or the plain stage-wise selector.
    Select(SelectArgs),
    /// Fit a network on selected features and save it.
    Estimate(EstimateArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Run a repeated simulation experiment from a TOML config.
    RunExperiment(RunExperimentArgs),
    /// Compare selection-probability formulas with Monte-Carlo estimates.
    VerifyTheory(VerifyTheoryArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DesignArg {
    Uniform,
    Correlated,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ResponseArg {
    Linear,
    Additive,
    Network,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Sigmoid,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Activation {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Take the data settings from an experiment config (first repetition).
    #[arg(long, conflicts_with_all = ["n", "p"])]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    pub p: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub design: DesignArg,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "network")]
    pub response: ResponseArg,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    #[arg(long, default_value_t = 1.0)]
    pub coef_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub coef_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, value_delimiter = ',', default_value = "50,30,15,10")]
    pub net_hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Design matrix CSV (header x1..xp).
    #[arg(long)]
    pub x: PathBuf,
    /// Response CSV (header y).
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectMethod {
    Enns,
    Dnp,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, value_enum, default_value = "enns")]
    pub method: SelectMethod,
    /// Number of features to select.
    #[arg(long)]
    pub s0: usize,
    #[arg(long, default_value_t = 10)]
    pub bags: usize,
    /// Appearance proportion.
    #[arg(long, default_value_t = 0.3)]
    pub ps: f64,
    #[arg(long)]
    pub per_round: Option<usize>,
    #[arg(long)]
    pub bootstrap_size: Option<usize>,
    /// Draw bags without replacement.
    #[arg(long)]
    pub subsample: bool,
    #[arg(long, default_value_t = 5)]
    pub dropouts: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout_rate: f64,
    /// Order of the gradient norm (`inf` allowed).
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    L1,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SparsityArg {
    Percentile,
    Lambda,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// 1-based selected columns.
    #[arg(long, value_delimiter = ',', required_unless_present = "selection")]
    pub selected: Vec<usize>,
    /// Selection report written by `enns select`.
    #[arg(long, conflicts_with = "selected")]
    pub selection: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "l1")]
    pub method: EstimateMethod,
    #[arg(long, value_enum, default_value = "percentile")]
    pub sparsity_mode: SparsityArg,
    /// One value per weight matrix, or one value for all of them.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub sparsity: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.0)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Held-out design and response for the reported metrics.
    #[arg(long, requires = "test_y")]
    pub test_x: Option<PathBuf>,
    #[arg(long, requires = "test_x")]
    pub test_y: Option<PathBuf>,
    /// Write the metrics here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Full design matrix; the model's selected columns are read from it.
    #[arg(long)]
    pub x: PathBuf,
    /// Average this many pruned copies (0 predicts with the model as is).
    #[arg(long, default_value_t = 0)]
    pub bagged: usize,
    #[arg(long, default_value_t = 0.1)]
    pub drop_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Results CSV; overrides `output` in the config. Stdout if neither is set.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyTheoryArgs {
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Coefficient magnitudes for the pairwise grid.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub sigmas: Vec<f64>,
    /// `s:p` support/width pairs for the first-selection check.
    #[arg(long, value_delimiter = ',', default_value = "1:2,3:20,5:50")]
    pub profiles: Vec<String>,
    /// Support coefficient for the first-selection check.
    #[arg(long, default_value_t = 2.0)]
    pub profile_beta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and maps errors to exit codes
/// (1 usage, 2 data, 3 numerical).
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Select(a) => select(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Predict(a) => predict(a),
        Command::RunExperiment(a) => run_experiment(a),
        Command::VerifyTheory(a) => verify_theory(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable report") + "\n"
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let (x, y, truth) = if let Some(path) = &a.config {
        let cfg = read_config(path)?;
        let rep_seed = experiment::repetition_seed(cfg.seed, 0);
        let (data, truth) = experiment::generate(&cfg, rep_seed)?;
        let (x, y, _) = data.into_parts();
        (x, y, truth)
    } else {
        let (n, p) = (a.n.expect("required by clap"), a.p.expect("required by clap"));
        let design_seed = crate::seed::derive(a.seed, crate::seed::STREAM_RESAMPLE, 0);
        let x = match a.design {
            DesignArg::Uniform => sim::gen_design_uniform(n, p, design_seed)?,
            DesignArg::Correlated => sim::gen_design_correlated(n, p, a.rho, design_seed)?,
        };
        let spec = ResponseSpec {
            kind: match a.response {
                ResponseArg::Linear => ResponseKind::Linear,
                ResponseArg::Additive => ResponseKind::Additive,
                ResponseArg::Network => ResponseKind::Network,
            },
            task: a.task.into(),
            s: a.s,
            coef_mean: a.coef_mean,
            coef_sd: a.coef_sd,
            noise_sd: a.noise_sd,
            net_hidden: a.net_hidden.clone(),
        };
        let (y, truth) = sim::gen_response(x.view(), &spec, crate::seed::derive(a.seed, crate::seed::STREAM_RESAMPLE, 1))?;
        (x, y, truth)
    };
    std::fs::create_dir_all(&a.out)?;
    io::write_design(&a.out.join("X.csv"), &x)?;
    io::write_response(&a.out.join("y.csv"), &y)?;
    io::write_json(&a.out.join("truth.json"), &TruthFile::from_truth(&truth))?;
    Ok(())
}

fn load(data: &DataArgs) -> Result<Dataset> {
    io::load_dataset(&data.x, &data.y, data.task.into())
}

fn select(a: SelectArgs) -> Result<()> {
    let data = load(&a.data)?;
    let arch = NetworkArchitecture::new(data.p(), a.net.hidden.clone(), a.net.activation.into(), data.task())?;
    if a.s0 == 0 || a.s0 > data.p() {
        return Err(invalid(format!("--s0 must lie in 1..={}", data.p())));
    }
    let dnp_cfg = DnpConfig {
        norm_q: a.q,
        num_dropouts: a.dropouts,
        dropout_rate: a.dropout_rate,
        train_opts: TrainOptions {
            learning_rate: a.net.lr,
            max_epochs: a.net.epochs,
            ..TrainOptions::default()
        },
    };
    let start = Instant::now();
    let report = match a.method {
        SelectMethod::Enns => {
            let cfg = EnnsConfig {
                num_bags: a.bags,
                bootstrap_size: a.bootstrap_size,
                resampling: if a.subsample { Resampling::Subsample } else { Resampling::Bootstrap },
                appearance_proportion: a.ps,
                target: a.s0,
                per_round: a.per_round,
                dnp: dnp_cfg,
                seed: a.seed,
            };
            let r = ensemble::enns_select(&data, &arch, &cfg)?;
            let rounds: Vec<BTreeMap<usize, usize>> = r
                .per_round_appearances
                .iter()
                .map(|m| m.iter().map(|(j, c)| (j + 1, *c)).collect())
                .collect();
            json!({
                "method": "enns",
                "selected": r.selected.iter().map(|j| j + 1).collect::<Vec<_>>(),
                "appearance_counts": rounds,
                "rounds_executed": r.rounds_executed,
                "complete": r.complete,
                "warnings": r.warnings,
                "seed": a.seed,
                "wall_clock_seconds": start.elapsed().as_secs_f64(),
            })
        }
        SelectMethod::Dnp => {
            let selected = dnp::dnp_run(&data, &arch, a.s0, &dnp_cfg, ensemble::bag_seed(a.seed, 0, 0))?;
            json!({
                "method": "dnp",
                "selected": selected.iter().map(|j| j + 1).collect::<Vec<_>>(),
                "appearance_counts": [],
                "rounds_executed": 1,
                "complete": true,
                "warnings": [],
                "seed": a.seed,
                "wall_clock_seconds": start.elapsed().as_secs_f64(),
            })
        }
    };
    emit(a.out.as_deref(), &to_json(&report))
}

fn read_selection(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    v.get("selected")
        .and_then(|s| s.as_array())
        .and_then(|arr| arr.iter().map(|x| x.as_u64().map(|u| u as usize)).collect::<Option<Vec<_>>>())
        .ok_or_else(|| Error::Data(format!("{}: no `selected` index list", path.display())))
}

/// 1-based user indices to 0-based columns.
fn zero_based(selected: &[usize], p: usize) -> Result<Vec<usize>> {
    if selected.is_empty() {
        return Err(invalid("no columns selected"));
    }
    let mut seen = std::collections::BTreeSet::new();
    selected
        .iter()
        .map(|&j| {
            if j == 0 || j > p {
                Err(invalid(format!("selected column {j} out of range 1..={p}")))
            } else if !seen.insert(j) {
                Err(invalid(format!("selected column {j} listed twice")))
            } else {
                Ok(j - 1)
            }
        })
        .collect()
}

fn prediction_metrics(task: Task, y: &[f64], yhat: &[f64]) -> Result<serde_json::Value> {
    Ok(match task {
        Task::Regression => serde_json::to_value(metrics::regression_metrics(y, yhat)?),
        Task::Classification => serde_json::to_value(metrics::classification_metrics(y, yhat, 0.5)?),
    }
    .expect("metrics serialize"))
}

fn estimate_cmd(a: EstimateArgs) -> Result<()> {
    let data = load(&a.data)?;
    let one_based = match &a.selection {
        Some(path) => read_selection(path)?,
        None => a.selected.clone(),
    };
    let selected = zero_based(&one_based, data.p())?;
    let train = data.select_columns(&selected)?;
    let arch = NetworkArchitecture::new(selected.len(), a.hidden.clone(), a.activation.into(), data.task())?;
    let estimator = match a.method {
        EstimateMethod::Plain => Estimator::Plain,
        EstimateMethod::L1 => {
            let values = if a.sparsity.len() == 1 {
                vec![a.sparsity[0]; arch.depth() + 1]
            } else {
                a.sparsity.clone()
            };
            Estimator::L1(SparsitySpec {
                mode: match a.sparsity_mode {
                    SparsityArg::Percentile => SparsityMode::Percentile,
                    SparsityArg::Lambda => SparsityMode::ExplicitLambda,
                },
                per_layer_values: values,
            })
        }
    };
    let opts = TrainOptions {
        learning_rate: a.lr,
        max_epochs: a.epochs,
        patience: a.patience,
        validation_fraction: a.validation_fraction,
        rng_seed: a.seed,
        ..TrainOptions::default()
    };
    let params = estimate::fit_model(&train, &arch, &estimator, &opts)?;
    let model = StoredModel {
        architecture: arch.clone(),
        selected: selected.clone(),
        parameters: params,
    };
    io::save_model(&a.model_out, &model)?;

    let eval = match (&a.test_x, &a.test_y) {
        (Some(tx), Some(ty)) => {
            let test = io::load_dataset(tx, ty, data.task())?;
            if test.p() != data.p() {
                return Err(Error::Data(format!("test design has {} columns, training has {}", test.p(), data.p())));
            }
            test.select_columns(&selected)?
        }
        _ => train.clone(),
    };
    let yhat = nn::predict(&model.parameters, &arch, eval.x())?;
    let layer_sparsity: Vec<f64> = model
        .parameters
        .weights
        .iter()
        .map(|w| w.iter().filter(|&&v| v == 0.0).count() as f64 / w.len() as f64)
        .collect();
    let report = json!({
        "model": a.model_out,
        "selected": one_based,
        "evaluated_on": if a.test_x.is_some() { "test" } else { "train" },
        "metrics": prediction_metrics(data.task(), &eval.y().to_vec(), &yhat.to_vec())?,
        "layer_sparsity": layer_sparsity,
    });
    emit(a.out.as_deref(), &to_json(&report))
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = io::load_model(&a.model)?;
    let x = io::read_design(&a.x)?;
    if let Some(&j) = model.selected.iter().find(|&&j| j >= x.ncols()) {
        return Err(Error::Data(format!("model reads column {} but the design has {}", j + 1, x.ncols())));
    }
    let xs = x.select(ndarray::Axis(1), &model.selected);
    let task = model.architecture.task;
    let (values, labels) = if a.bagged > 0 {
        let spec = BaggedDropoutSpec {
            num_repeats: a.bagged,
            drop_rate: a.drop_rate,
            threshold: a.threshold,
        };
        let pred = estimate::predict_bagged_dropout(&model.parameters, &model.architecture, xs.view(), &spec, a.seed)?;
        (pred.mean, pred.labels)
    } else {
        let v = nn::predict(&model.parameters, &model.architecture, xs.view())?;
        let labels = (task == Task::Classification).then(|| v.iter().map(|&p| u8::from(p > a.threshold)).collect());
        (v, labels)
    };
    let mut out = String::new();
    match &labels {
        Some(l) => {
            out.push_str("p_hat,label\n");
            for (v, c) in values.iter().zip(l) {
                out.push_str(&format!("{v:.16e},{c}\n"));
            }
        }
        None => {
            out.push_str("y_hat\n");
            for v in &values {
                out.push_str(&format!("{v:.16e}\n"));
            }
        }
    }
    emit(a.out.as_deref(), &out)
}

fn run_experiment(a: RunExperimentArgs) -> Result<()> {
    let cfg = read_config(&a.config)?;
    let results = experiment::run_experiment(&cfg)?;
    let csv = experiment::results_csv(&cfg, &results);
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} repetitions failed", results.len());
    }
    let out = a.output.or(cfg.output);
    emit(out.as_deref(), &csv)
}

#[derive(Debug, Serialize)]
pub struct PairRow {
    pub beta_j: f64,
    pub beta_k: f64,
    pub sigma: f64,
    pub analytic: f64,
    pub mc: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ProfileRow {
    pub s: usize,
    pub p: usize,
    pub beta: f64,
    pub sigma: f64,
    pub analytic: f64,
    pub mc: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct TheoryReport {
    pub reps: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub select_over: Vec<PairRow>,
    pub first_correct: Vec<ProfileRow>,
    pub all_pass: bool,
}

/// Number of observations used by the Monte-Carlo designs of `verify-theory`.
fn mc_rows(p: usize) -> usize {
    p.max(10)
}

pub fn theory_report(a: &VerifyTheoryArgs) -> Result<TheoryReport> {
    let mut select_over = Vec::new();
    let mut case = 0u64;
    for &sigma in &a.sigmas {
        for &bj in &a.betas {
            for &bk in &a.betas {
                let analytic = theory::prob_select_over(bj, bk, sigma)?;
                let mc = theory::mc_select_over(bj, bk, sigma, mc_rows(2), a.reps, crate::seed::derive(a.seed, 0, case))?;
                case += 1;
                let delta = (analytic - mc).abs();
                select_over.push(PairRow {
                    beta_j: bj,
                    beta_k: bk,
                    sigma,
                    analytic,
                    mc,
                    delta,
                    pass: delta < a.tolerance,
                });
            }
        }
    }
    let mut first_correct = Vec::new();
    for (i, spec) in a.profiles.iter().enumerate() {
        let (s, p) = spec
            .split_once(':')
            .and_then(|(s, p)| Some((s.trim().parse::<usize>().ok()?, p.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| invalid(format!("profile `{spec}` is not of the form s:p")))?;
        let profile = SignalProfile::equal(a.profile_beta, 1.0, s, p)?;
        let analytic = theory::prob_first_correct(&profile)?;
        let mc = theory::mc_first_selection(&profile, mc_rows(p), a.reps, crate::seed::derive(a.seed, 1, i as u64))?;
        let delta = (analytic - mc).abs();
        first_correct.push(ProfileRow {
            s,
            p,
            beta: a.profile_beta,
            sigma: 1.0,
            analytic,
            mc,
            delta,
            pass: delta < a.tolerance,
        });
    }
    let all_pass = select_over.iter().all(|r| r.pass) && first_correct.iter().all(|r| r.pass);
    Ok(TheoryReport {
        reps: a.reps,
        seed: a.seed,
        tolerance: a.tolerance,
        select_over,
        first_correct,
        all_pass,
    })
}

fn verify_theory(a: VerifyTheoryArgs) -> Result<()> {
    let report = theory_report(&a)?;
    emit(a.out.as_deref(), &to_json(&report))
}
