//! Stage-wise selection by first-layer gradient norms (deep neural pursuit).
//!
//! Starting from the intercept-only model, each stage trains the network on
//! the selected features with every candidate's `W_0` row frozen at zero, then
//! scores each candidate `j` by the dropout-averaged norm
//! `(1/B₁) Σ_b ‖∂l/∂W_0j‖_q` and admits the highest-scoring one.

use std::collections::{BTreeMap, BTreeSet};

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ResponseScale, Task};
use crate::error::{invalid, Error, Result};
use crate::nn::{self, NetworkArchitecture, NetworkParameters, TrainOptions};
use crate::seed;

/// Partition of the feature indices into selected (`S`) and candidate (`C`) sets.
/// The intercept is always part of the model and is not listed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionState {
    selected: Vec<usize>,
    candidates: BTreeSet<usize>,
}

impl SelectionState {
    /// The null model: nothing selected, every feature a candidate.
    pub fn new(p: usize) -> Self {
        SelectionState {
            selected: Vec::new(),
            candidates: (0..p).collect(),
        }
    }

    /// Selected features in admission order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn candidates(&self) -> &BTreeSet<usize> {
        &self.candidates
    }

    pub fn admit(&mut self, j: usize) -> Result<()> {
        if !self.candidates.remove(&j) {
            return Err(invalid(format!("feature {j} is not a candidate")));
        }
        self.selected.push(j);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnpConfig {
    /// Order of the gradient norm, `q ≥ 1` (`f64::INFINITY` allowed).
    pub norm_q: f64,
    /// Number of dropout draws `B₁` averaged per score.
    pub num_dropouts: usize,
    pub dropout_rate: f64,
    /// Training applied to the current model before each admission.
    pub train_opts: TrainOptions,
}

impl Default for DnpConfig {
    fn default() -> Self {
        DnpConfig {
            norm_q: 2.0,
            num_dropouts: 5,
            dropout_rate: 0.5,
            train_opts: TrainOptions {
                learning_rate: 0.05,
                max_epochs: 50,
                ..TrainOptions::default()
            },
        }
    }
}

impl DnpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.norm_q >= 1.0) {
            return Err(invalid(format!("norm order must be at least 1, got {}", self.norm_q)));
        }
        if self.num_dropouts == 0 {
            return Err(invalid("number of dropouts must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid("dropout rate must lie in [0, 1)"));
        }
        self.train_opts.validate()
    }
}

fn lq_norm(v: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q == 2.0 {
        v.map(|x| x * x).sum::<f64>().sqrt()
    } else if q.is_infinite() {
        v.fold(0.0, |m, x| m.max(x.abs()))
    } else if q == 1.0 {
        v.map(f64::abs).sum()
    } else {
        v.map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Dropout-averaged gradient norm of every candidate's `W_0` row.
///
/// Draw `b` applies one dropout mask (seeded by `(seed, b)`) shared by all
/// candidates. With `B₁ = 1` and rate 0 this is the plain `‖G_0j‖_q`.
pub fn candidate_scores(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    state: &SelectionState,
    cfg: &DnpConfig,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    cfg.validate()?;
    params.check_shapes(arch)?;
    if data.p() != arch.input_dim || state.candidates.len() + state.selected.len() != arch.input_dim {
        return Err(invalid("selection state, data and network disagree on the number of features"));
    }
    if state.candidates.is_empty() {
        return Err(invalid("candidate set is empty"));
    }
    let candidates: Vec<usize> = state.candidates.iter().copied().collect();
    if let Some(&j) = candidates
        .iter()
        .find(|&&j| params.weights[0].row(j).iter().any(|&v| v != 0.0))
    {
        return Err(invalid(format!("candidate {j} has a non-zero first-layer row")));
    }
    let mut active = state.selected.clone();
    active.sort_unstable();

    let mut totals = vec![0.0; candidates.len()];
    for b in 0..cfg.num_dropouts {
        let masked = nn::dropout_mask(params, cfg.dropout_rate, seed::derive(seed, seed::STREAM_DROPOUT, b as u64))?;
        let g = nn::input_row_gradients(&masked, arch, data, &active, &candidates);
        for (t, row) in totals.iter_mut().zip(g.outer_iter()) {
            *t += lq_norm(row.iter().copied(), cfg.norm_q);
        }
    }
    let b1 = cfg.num_dropouts as f64;
    let scores: BTreeMap<usize, f64> = candidates
        .into_iter()
        .zip(totals)
        .map(|(j, t)| (j, t / b1))
        .collect();
    if let Some((j, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Numerical(format!("score of feature {j} is {s}")));
    }
    Ok(scores)
}

/// Candidate with the largest score; ties go to the smallest index.
pub fn select_next(scores: &BTreeMap<usize, f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&j, &s) in scores {
        // Keys ascend, so a strict comparison keeps the smallest index on ties.
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best.map(|(j, _)| j).ok_or_else(|| invalid("score map is empty"))
}

/// Incremental stage-wise selector with warm-started weights.
///
/// Regression responses are standardized internally; parameters returned by
/// [`into_parameters`](Self::into_parameters) are on the original scale.
pub struct StagewiseSelector {
    data: Dataset,
    scale: ResponseScale,
    arch: NetworkArchitecture,
    cfg: DnpConfig,
    params: NetworkParameters,
    state: SelectionState,
    seed: u64,
    stage: u64,
}

impl StagewiseSelector {
    pub fn new(data: &Dataset, arch_template: &NetworkArchitecture, cfg: DnpConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if arch_template.task != data.task() {
            return Err(invalid("network task does not match dataset task"));
        }
        let arch = arch_template.with_input_dim(data.p());
        let (data, scale) = data.standardize_response();
        let mut params = nn::xavier_init(&arch, seed::derive(seed, seed::STREAM_ADMIT, u64::MAX))?;
        params.weights[0].fill(0.0);
        params.output_intercept = null_intercept(&data);
        Ok(StagewiseSelector {
            state: SelectionState::new(data.p()),
            data,
            scale,
            arch,
            cfg,
            params,
            seed,
            stage: 0,
        })
    }

    pub fn state(&self) -> &SelectionState {
        &self.state
    }

    pub fn selected(&self) -> &[usize] {
        self.state.selected()
    }

    /// Moves `j` into the selected set and gives its `W_0` row a Xavier draw.
    pub fn admit(&mut self, j: usize) -> Result<()> {
        self.state.admit(j)?;
        let (fan_in, fan_out) = self.params.weights[0].dim();
        let bound = nn::xavier_bound(fan_in, fan_out);
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = seed::rng(seed::derive(self.seed, seed::STREAM_ADMIT, j as u64));
        self.params.weights[0]
            .row_mut(j)
            .iter_mut()
            .for_each(|v| *v = dist.sample(&mut rng));
        Ok(())
    }

    /// Trains the current model on the selected features. The null model is
    /// already optimal (its intercept is set exactly) and is left untouched.
    pub fn train(&mut self) -> Result<()> {
        if self.state.selected.is_empty() {
            return Ok(());
        }
        let opts = TrainOptions {
            rng_seed: seed::derive(self.seed, seed::STREAM_TRAIN, self.stage),
            ..self.cfg.train_opts.clone()
        };
        let rows = self.state.selected.clone();
        self.params = nn::train(&self.params, &self.arch, &self.data, &opts, &rows)?;
        Ok(())
    }

    /// Scores of the current candidates under the current (trained) weights.
    pub fn scores(&self) -> Result<BTreeMap<usize, f64>> {
        candidate_scores(
            &self.params,
            &self.arch,
            &self.data,
            &self.state,
            &self.cfg,
            seed::derive(self.seed, seed::STREAM_DROPOUT, self.stage),
        )
    }

    /// One stage: train, score, admit the winner. Returns the admitted index.
    pub fn step(&mut self) -> Result<usize> {
        self.train()?;
        let next = select_next(&self.scores()?)?;
        self.admit(next)?;
        self.stage += 1;
        Ok(next)
    }

    /// Final weights, rescaled to the original response.
    pub fn into_parameters(self) -> NetworkParameters {
        let mut params = self.params;
        params.fold_response_scale(&self.scale);
        params
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.arch
    }
}

/// Output intercept of the best constant model on a (standardized) response.
fn null_intercept(data: &Dataset) -> f64 {
    let mean = data.y().mean().unwrap_or(0.0);
    match data.task() {
        Task::Regression => mean,
        Task::Classification => {
            let p = mean.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    }
}

/// Runs `s_target` stages from the null model and returns the admitted
/// features in admission order.
pub fn dnp_run(
    data: &Dataset,
    arch_template: &NetworkArchitecture,
    s_target: usize,
    cfg: &DnpConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    if s_target == 0 || s_target > data.p() {
        return Err(invalid(format!(
            "target size {s_target} must lie in 1..={}",
            data.p()
        )));
    }
    let mut selector = StagewiseSelector::new(data, arch_template, cfg.clone(), seed)?;
    for _ in 0..s_target {
        selector.step()?;
    }
    Ok(selector.state.selected)
}
