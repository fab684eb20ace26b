//! Post-selection estimation on the selected columns.
//!
//! * [`fit_l1`]: gradient steps on the unpenalized loss alternated with
//!   per-layer soft-thresholding of the weight matrices.
//! * [`predict_bagged_dropout`]: averages `K` randomly connection-pruned copies
//!   of a trained network.
//! * [`fit_stagewise`]: admits the selected columns one at a time with warm
//!   starts, reusing the stage-wise selector.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::dnp::{DnpConfig, StagewiseSelector};
use crate::error::{invalid, Result};
use crate::nn::{self, EpochHook, Gradients, NetworkArchitecture, NetworkParameters, TrainOptions};
use crate::seed;

/// `sign(v)·max(|v| − c, 0)`, elementwise.
pub fn soft_threshold(v: &[f64], c: f64) -> Result<Vec<f64>> {
    if !(c >= 0.0) {
        return Err(invalid(format!("threshold must be non-negative, got {c}")));
    }
    Ok(v.iter().map(|&x| shrink(x, c)).collect())
}

#[inline]
fn shrink(x: f64, c: f64) -> f64 {
    let m = x.abs() - c;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Nearest-rank `pct`-th percentile of `|values|`; 0 for `pct = 0` or no values.
pub fn abs_percentile(values: impl Iterator<Item = f64>, pct: f64) -> f64 {
    let mut abs: Vec<f64> = values.map(f64::abs).collect();
    if abs.is_empty() || pct <= 0.0 {
        return 0.0;
    }
    abs.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * abs.len() as f64).ceil() as usize;
    abs[rank.clamp(1, abs.len()) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// Threshold `λ_l · learning_rate` for weight matrix `l`.
    ExplicitLambda,
    /// Threshold at the `p_l`-th percentile of `|W_l|`.
    Percentile,
}

/// Per-weight-matrix sparsity levels (`W_0 .. W_m`); intercepts are never thresholded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsitySpec {
    pub mode: SparsityMode,
    pub per_layer_values: Vec<f64>,
}

impl SparsitySpec {
    /// Same value for every weight matrix of `arch`.
    pub fn uniform(mode: SparsityMode, value: f64, arch: &NetworkArchitecture) -> Self {
        SparsitySpec {
            mode,
            per_layer_values: vec![value; arch.depth() + 1],
        }
    }

    pub fn validate(&self, arch: &NetworkArchitecture) -> Result<()> {
        if self.per_layer_values.len() != arch.depth() + 1 {
            return Err(invalid(format!(
                "sparsity needs one value per weight matrix ({}), got {}",
                arch.depth() + 1,
                self.per_layer_values.len()
            )));
        }
        for &v in &self.per_layer_values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("sparsity value {v} must be finite and non-negative")));
            }
            if self.mode == SparsityMode::Percentile && v >= 100.0 {
                return Err(invalid(format!("percentile {v} must be below 100")));
            }
        }
        Ok(())
    }

    fn apply(&self, params: &mut NetworkParameters, lr: f64) {
        for (w, &v) in params.weights.iter_mut().zip(&self.per_layer_values) {
            let c = match self.mode {
                SparsityMode::ExplicitLambda => v * lr,
                SparsityMode::Percentile => abs_percentile(w.iter().copied(), v),
            };
            if c > 0.0 {
                w.mapv_inplace(|x| shrink(x, c));
            }
        }
    }
}

struct SoftThreshold<'a>(&'a SparsitySpec);

impl EpochHook for SoftThreshold<'_> {
    fn after_epoch(&mut self, params: &mut NetworkParameters, lr: f64) {
        self.0.apply(params, lr);
    }
}

/// Fits a network on the selected columns with soft-thresholding after every
/// epoch's gradient pass. Initialization is Xavier with `opts.rng_seed`, so an
/// all-zero spec reproduces [`nn::fit`].
pub fn fit_l1(
    data: &Dataset,
    arch: &NetworkArchitecture,
    spec: &SparsitySpec,
    opts: &TrainOptions,
) -> Result<NetworkParameters> {
    spec.validate(arch)?;
    let init = nn::xavier_init(arch, opts.rng_seed)?;
    let rows: Vec<usize> = (0..arch.input_dim).collect();
    let (mut params, report) = nn::train_with_hook(&init, arch, data, opts, &rows, &mut SoftThreshold(spec))?;
    if report.epochs_run == 0 && spec.mode == SparsityMode::Percentile {
        spec.apply(&mut params, opts.learning_rate);
    }
    Ok(params)
}

struct SubgradientPenalty<'a>(&'a [f64]);

impl EpochHook for SubgradientPenalty<'_> {
    fn adjust_gradients(&mut self, params: &NetworkParameters, grads: &mut Gradients) {
        for ((g, w), &lambda) in grads.weights.iter_mut().zip(&params.weights).zip(self.0) {
            ndarray::Zip::from(g).and(w).for_each(|g, &w| {
                if w != 0.0 {
                    *g += lambda * w.signum();
                }
            });
        }
    }
}

/// Loss plus `Σ λ_l |W_l|` minimized by plain (sub)gradient steps, with no
/// proximal operator. Kept as a comparison arm for [`fit_l1`].
pub fn fit_l1_subgradient(
    data: &Dataset,
    arch: &NetworkArchitecture,
    lambdas: &[f64],
    opts: &TrainOptions,
) -> Result<NetworkParameters> {
    if lambdas.len() != arch.depth() + 1 || lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(invalid("need one non-negative penalty per weight matrix"));
    }
    let init = nn::xavier_init(arch, opts.rng_seed)?;
    let rows: Vec<usize> = (0..arch.input_dim).collect();
    nn::train_with_hook(&init, arch, data, opts, &rows, &mut SubgradientPenalty(lambdas)).map(|(p, _)| p)
}

/// Estimation method for a network on already-selected columns.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    /// Unpenalized Adagrad training.
    Plain,
    /// [`fit_l1`] with the given sparsity.
    L1(SparsitySpec),
}

/// Fits `arch` on `data` with `estimator`, starting from Xavier weights seeded
/// by `opts.rng_seed`. Regression responses are standardized for training and
/// the scale is folded back into the output layer.
pub fn fit_model(
    data: &Dataset,
    arch: &NetworkArchitecture,
    estimator: &Estimator,
    opts: &TrainOptions,
) -> Result<NetworkParameters> {
    let (train_data, scale) = data.standardize_response();
    let mut params = match estimator {
        Estimator::Plain => nn::fit(arch, &train_data, opts)?,
        Estimator::L1(spec) => fit_l1(&train_data, arch, spec, opts)?,
    };
    params.fold_response_scale(&scale);
    Ok(params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaggedDropoutSpec {
    /// Number of pruned copies `K`.
    pub num_repeats: usize,
    pub drop_rate: f64,
    /// Classification cut-off `p_c`.
    pub threshold: f64,
}

impl Default for BaggedDropoutSpec {
    fn default() -> Self {
        BaggedDropoutSpec {
            num_repeats: 32,
            drop_rate: 0.1,
            threshold: 0.5,
        }
    }
}

impl BaggedDropoutSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_repeats == 0 {
            return Err(invalid("number of repeats must be positive"));
        }
        if !(self.drop_rate > 0.0 && self.drop_rate < 1.0) {
            return Err(invalid("drop rate must lie in (0, 1)"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("classification threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaggedPrediction {
    /// Mean prediction (regression) or mean probability `p̂` (classification).
    pub mean: Array1<f64>,
    /// `1{p̂ > p_c}` for classification networks.
    pub labels: Option<Vec<u8>>,
}

/// Seed of the `k`-th pruned copy in [`predict_bagged_dropout`].
pub fn bagged_member_seed(seed: u64, k: usize) -> u64 {
    seed::derive(seed, seed::STREAM_DROPOUT, k as u64)
}

pub fn predict_bagged_dropout(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    x: ArrayView2<f64>,
    spec: &BaggedDropoutSpec,
    seed: u64,
) -> Result<BaggedPrediction> {
    spec.validate()?;
    let members: Vec<Array1<f64>> = (0..spec.num_repeats)
        .into_par_iter()
        .map(|k| {
            let pruned = nn::dropout_mask(params, spec.drop_rate, bagged_member_seed(seed, k))?;
            nn::predict(&pruned, arch, x)
        })
        .collect::<Result<_>>()?;
    let mut mean = Array1::zeros(x.nrows());
    for m in &members {
        mean += m;
    }
    mean /= spec.num_repeats as f64;
    let labels = (arch.task == Task::Classification)
        .then(|| mean.iter().map(|&p| u8::from(p > spec.threshold)).collect());
    Ok(BaggedPrediction { mean, labels })
}

/// Admits every column of `data` stage-wise (warm-starting between
/// admissions), then trains the full model once more.
pub fn fit_stagewise(data: &Dataset, arch: &NetworkArchitecture, cfg: &DnpConfig) -> Result<NetworkParameters> {
    let mut selector = StagewiseSelector::new(data, arch, cfg.clone(), cfg.train_opts.rng_seed)?;
    for _ in 0..data.p() {
        selector.step()?;
    }
    selector.train()?;
    Ok(selector.into_parameters())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.5], 1.0).unwrap(), vec![2.0, 0.0, 0.0]);
        let v = [0.25, -7.5, 3.0];
        assert_eq!(soft_threshold(&v, 0.0).unwrap(), v.to_vec());
        assert_eq!(soft_threshold(&v, 7.5).unwrap(), vec![0.0; 3]);
        assert_eq!(soft_threshold(&[-3.0], 1.0).unwrap(), vec![-2.0]);
        assert!(soft_threshold(&v, -0.1).is_err());
    }

    #[test]
    fn nearest_rank_percentile() {
        let v = [5.0, -1.0, 3.0, -2.0, 4.0];
        assert_eq!(abs_percentile(v.iter().copied(), 0.0), 0.0);
        assert_eq!(abs_percentile(v.iter().copied(), 20.0), 1.0);
        assert_eq!(abs_percentile(v.iter().copied(), 50.0), 3.0);
        assert_eq!(abs_percentile(v.iter().copied(), 99.0), 5.0);
    }

    #[test]
    fn spec_validation() {
        let arch = NetworkArchitecture::new(2, vec![3], nn::Activation::Relu, Task::Regression).unwrap();
        assert!(SparsitySpec::uniform(SparsityMode::Percentile, 100.0, &arch).validate(&arch).is_err());
        assert!(SparsitySpec::uniform(SparsityMode::Percentile, 99.0, &arch).validate(&arch).is_ok());
        let short = SparsitySpec {
            mode: SparsityMode::ExplicitLambda,
            per_layer_values: vec![0.1],
        };
        assert!(short.validate(&arch).is_err());
    }
}
