//! Dense feedforward network engine.
//!
//! The network maps `x ∈ R^p` through `m` hidden layers to a scalar output:
//!
//! ```text
//! a_1 = f(x W_0 + t_1),  a_k = f(a_{k-1} W_{k-1} + t_k),  z = a_m W_m + b
//! ```
//!
//! Regression uses `η = z`, classification `η = sigmoid(z)`. Regression loss is
//! the mean squared error, classification loss the mean negative
//! log-likelihood. Gradients are exact (hand-written backpropagation) and
//! include the rows of `W_0` that are frozen at zero, which is what the
//! stage-wise selector scores.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ResponseScale, Task};
use crate::error::{invalid, mismatch, Error, Result};
use crate::seed;

/// Lower/upper clip applied to predicted probabilities before taking logs.
pub const PROB_CLIP: f64 = 1e-12;
/// Adagrad denominator offset.
pub const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative given pre-activation `z` and activation `a`.
    ///
    /// ReLU uses slope 1 at `z = 0`: a network whose first layer is entirely
    /// frozen at zero sits exactly on the kink, and the zero-slope convention
    /// would make every input gradient vanish there.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub task: Task,
}

impl NetworkArchitecture {
    pub fn new(
        input_dim: usize,
        hidden_sizes: Vec<usize>,
        hidden_activation: Activation,
        task: Task,
    ) -> Result<Self> {
        let arch = NetworkArchitecture {
            input_dim,
            hidden_sizes,
            hidden_activation,
            task,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() {
            return Err(invalid("architecture needs at least one hidden layer"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(invalid("hidden layer sizes must be positive"));
        }
        Ok(())
    }

    /// Same hidden structure with a different input width.
    pub fn with_input_dim(&self, input_dim: usize) -> Self {
        NetworkArchitecture {
            input_dim,
            ..self.clone()
        }
    }

    /// Number of hidden layers `m`.
    pub fn depth(&self) -> usize {
        self.hidden_sizes.len()
    }

    /// Shapes of `W_0 .. W_m`.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_sizes);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Weights `W_0..W_m`, hidden intercepts `t_1..t_m` and output intercept `b`.
///
/// The same container holds gradients and Adagrad accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub weights: Vec<Array2<f64>>,
    pub hidden_intercepts: Vec<Array1<f64>>,
    pub output_intercept: f64,
}

pub type Gradients = NetworkParameters;

impl NetworkParameters {
    pub fn zeros(arch: &NetworkArchitecture) -> Self {
        NetworkParameters {
            weights: arch
                .weight_shapes()
                .into_iter()
                .map(Array2::zeros)
                .collect(),
            hidden_intercepts: arch.hidden_sizes.iter().map(|&h| Array1::zeros(h)).collect(),
            output_intercept: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParameters {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            hidden_intercepts: self
                .hidden_intercepts
                .iter()
                .map(|t| Array1::zeros(t.len()))
                .collect(),
            output_intercept: 0.0,
        }
    }

    pub fn check_shapes(&self, arch: &NetworkArchitecture) -> Result<()> {
        let shapes = arch.weight_shapes();
        if self.weights.len() != shapes.len() || self.hidden_intercepts.len() != arch.depth() {
            return Err(mismatch(format!(
                "parameters have {} weight matrices, architecture needs {}",
                self.weights.len(),
                shapes.len()
            )));
        }
        for (l, (w, &s)) in self.weights.iter().zip(&shapes).enumerate() {
            if w.dim() != s {
                return Err(mismatch(format!(
                    "weight matrix {l} has shape {:?}, expected {:?}",
                    w.dim(),
                    s
                )));
            }
        }
        for (l, (t, &h)) in self.hidden_intercepts.iter().zip(&arch.hidden_sizes).enumerate() {
            if t.len() != h {
                return Err(mismatch(format!(
                    "hidden intercept {l} has length {}, expected {h}",
                    t.len()
                )));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.output_intercept.is_finite()
            && self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.hidden_intercepts.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Number of weight entries (intercepts excluded).
    pub fn num_weights(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Copy whose first layer keeps only `rows` of `W_0`, in order.
    pub fn gather_input_rows(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        out.weights[0] = self.weights[0].select(Axis(0), rows);
        out
    }

    /// Inverse of [`gather_input_rows`](Self::gather_input_rows): writes `compact` back,
    /// leaving the rows of `W_0` outside `rows` untouched.
    pub fn scatter_input_rows(&mut self, rows: &[usize], compact: &NetworkParameters) {
        for (k, &r) in rows.iter().enumerate() {
            self.weights[0].row_mut(r).assign(&compact.weights[0].row(k));
        }
        for (dst, src) in self.weights.iter_mut().zip(&compact.weights).skip(1) {
            dst.assign(src);
        }
        for (dst, src) in self.hidden_intercepts.iter_mut().zip(&compact.hidden_intercepts) {
            dst.assign(src);
        }
        self.output_intercept = compact.output_intercept;
    }

    /// Rewrites an affine-output network trained on a standardized response so
    /// that it predicts on the original scale.
    pub fn fold_response_scale(&mut self, scale: &ResponseScale) {
        if let Some(last) = self.weights.last_mut() {
            last.mapv_inplace(|w| w * scale.scale);
        }
        self.output_intercept = scale.restore(self.output_intercept);
    }

    /// Indices of `W_0` rows that contain a non-zero entry.
    pub fn nonzero_input_rows(&self) -> Vec<usize> {
        self.weights[0]
            .outer_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Xavier (Glorot) uniform initialization; intercepts start at zero.
pub fn xavier_init(arch: &NetworkArchitecture, seed: u64) -> Result<NetworkParameters> {
    arch.validate()?;
    let mut rng = seed::rng(seed);
    let mut params = NetworkParameters::zeros(arch);
    for w in params.weights.iter_mut() {
        let (fan_in, fan_out) = w.dim();
        let dist = Uniform::new_inclusive(-xavier_bound(fan_in, fan_out), xavier_bound(fan_in, fan_out));
        w.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    Ok(params)
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Activations recorded by a batch forward pass.
pub(crate) struct Trace {
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    /// Output after the link function.
    pub(crate) eta: Array1<f64>,
}

pub(crate) fn trace(params: &NetworkParameters, arch: &NetworkArchitecture, x: ArrayView2<f64>) -> Trace {
    let depth = arch.depth();
    let mut pre = Vec::with_capacity(depth);
    let mut act: Vec<Array2<f64>> = Vec::with_capacity(depth);
    for k in 0..depth {
        let mut z = if k == 0 {
            x.dot(&params.weights[0])
        } else {
            act[k - 1].dot(&params.weights[k])
        };
        z += &params.hidden_intercepts[k];
        let a = z.mapv(|v| arch.hidden_activation.apply(v));
        pre.push(z);
        act.push(a);
    }
    let w_out = params.weights[depth].column(0);
    let mut eta = act[depth - 1].dot(&w_out);
    eta += params.output_intercept;
    if arch.task == Task::Classification {
        eta.mapv_inplace(sigmoid);
    }
    Trace { pre, act, eta }
}

pub(crate) fn loss_from_output(task: Task, eta: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Regression => Zip::from(&eta).and(&y).fold(0.0, |acc, &e, &t| acc + (t - e) * (t - e)) / n,
        Task::Classification => {
            -Zip::from(&eta).and(&y).fold(0.0, |acc, &e, &t| {
                let p = e.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                acc + t * p.ln() + (1.0 - t) * (1.0 - p).ln()
            }) / n
        }
    }
}

/// Backpropagates through every layer except the input matrix.
///
/// Returns gradients with `W_0` left zero, plus the error signal at the first
/// hidden pre-activation (`n × h_1`); the gradient of any row `j` of `W_0` is
/// `x_{·j}ᵀ δ`.
pub(crate) fn backprop(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    y: ArrayView1<f64>,
    tr: &Trace,
) -> (Gradients, Array2<f64>) {
    let depth = arch.depth();
    let n = y.len() as f64;
    let mut grads = params.zeros_like();

    let scale = match arch.task {
        Task::Regression => 2.0 / n,
        Task::Classification => 1.0 / n,
    };
    let d_out: Array1<f64> = Zip::from(&tr.eta).and(&y).map_collect(|&e, &t| scale * (e - t));
    grads.output_intercept = d_out.sum();
    grads.weights[depth]
        .column_mut(0)
        .assign(&tr.act[depth - 1].t().dot(&d_out));

    let w_out = params.weights[depth].column(0);
    let mut delta = Array2::from_shape_fn(tr.pre[depth - 1].raw_dim(), |(i, k)| d_out[i] * w_out[k]);
    let f = arch.hidden_activation;
    let mut k = depth - 1;
    loop {
        Zip::from(&mut delta)
            .and(&tr.pre[k])
            .and(&tr.act[k])
            .for_each(|d, &z, &a| *d *= f.derivative(z, a));
        grads.hidden_intercepts[k] = delta.sum_axis(Axis(0));
        if k == 0 {
            break;
        }
        grads.weights[k] = tr.act[k - 1].t().dot(&delta);
        delta = delta.dot(&params.weights[k].t());
        k -= 1;
    }
    (grads, delta)
}

fn check_data(arch: &NetworkArchitecture, data: &Dataset) -> Result<()> {
    if data.p() != arch.input_dim {
        return Err(mismatch(format!(
            "data has {} features, network expects {}",
            data.p(),
            arch.input_dim
        )));
    }
    if data.task() != arch.task {
        return Err(invalid("dataset task does not match network task"));
    }
    Ok(())
}

/// Network output for a single observation.
pub fn forward(params: &NetworkParameters, arch: &NetworkArchitecture, x: &[f64]) -> Result<f64> {
    params.check_shapes(arch)?;
    if x.len() != arch.input_dim {
        return Err(mismatch(format!(
            "input has length {}, network expects {}",
            x.len(),
            arch.input_dim
        )));
    }
    let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
    Ok(trace(params, arch, row).eta[0])
}

/// Network outputs for every row of `x`.
pub fn predict(params: &NetworkParameters, arch: &NetworkArchitecture, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    params.check_shapes(arch)?;
    if x.ncols() != arch.input_dim {
        return Err(mismatch(format!(
            "input has {} columns, network expects {}",
            x.ncols(),
            arch.input_dim
        )));
    }
    Ok(trace(params, arch, x).eta)
}

pub fn empirical_loss(params: &NetworkParameters, arch: &NetworkArchitecture, data: &Dataset) -> Result<f64> {
    params.check_shapes(arch)?;
    check_data(arch, data)?;
    let tr = trace(params, arch, data.x());
    let loss = loss_from_output(arch.task, tr.eta.view(), data.y());
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("empirical loss is {loss}")));
    }
    Ok(loss)
}

/// Exact gradients of [`empirical_loss`] with respect to all parameters.
pub fn backward(params: &NetworkParameters, arch: &NetworkArchitecture, data: &Dataset) -> Result<Gradients> {
    params.check_shapes(arch)?;
    check_data(arch, data)?;
    let tr = trace(params, arch, data.x());
    let (mut grads, delta) = backprop(params, arch, data.y(), &tr);
    grads.weights[0] = input_gradient(data.x(), delta.view(), None);
    Ok(grads)
}

/// `xᵀ δ` restricted to the columns in `columns` (all columns when `None`).
///
/// Every output row is accumulated over observations in the same order, so
/// identical columns yield bit-identical gradient rows.
pub(crate) fn input_gradient(x: ArrayView2<f64>, delta: ArrayView2<f64>, columns: Option<&[usize]>) -> Array2<f64> {
    let h = delta.ncols();
    let all: Vec<usize>;
    let cols = match columns {
        Some(c) => c,
        None => {
            all = (0..x.ncols()).collect();
            &all
        }
    };
    let mut g = Array2::<f64>::zeros((cols.len(), h));
    let gs = g.as_slice_mut().expect("standard layout");
    for (xr, dr) in x.outer_iter().zip(delta.outer_iter()) {
        let dr = dr.to_vec();
        for (k, &j) in cols.iter().enumerate() {
            let v = xr[j];
            for (gk, &d) in gs[k * h..(k + 1) * h].iter_mut().zip(&dr) {
                *gk += v * d;
            }
        }
    }
    g
}

/// Gradient of the loss with respect to the `W_0` rows listed in `rows`
/// (`|rows| × h_1`). `active` lists the rows of `W_0` that may be non-zero; all
/// others must be zero, which lets the forward pass skip them.
pub(crate) fn input_row_gradients(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    active: &[usize],
    rows: &[usize],
) -> Array2<f64> {
    let compact_arch = arch.with_input_dim(active.len());
    let compact = params.gather_input_rows(active);
    let xa = data.x().select(Axis(1), active);
    let tr = trace(&compact, &compact_arch, xa.view());
    let (_, delta) = backprop(&compact, &compact_arch, data.y(), &tr);
    input_gradient(data.x(), delta.view(), Some(rows))
}

/// One Adagrad update, in place:
/// `acc ← acc + g⊙g`, `θ ← θ − lr·g / (√acc + ε)`.
pub fn adagrad_step(params: &mut NetworkParameters, grads: &Gradients, accumulator: &mut NetworkParameters, lr: f64) {
    #[inline]
    fn update(theta: &mut f64, g: f64, acc: &mut f64, lr: f64) {
        *acc += g * g;
        *theta -= lr * g / (acc.sqrt() + ADAGRAD_EPS);
    }
    for ((w, g), a) in params.weights.iter_mut().zip(&grads.weights).zip(accumulator.weights.iter_mut()) {
        Zip::from(w).and(g).and(a).for_each(|w, &g, a| update(w, g, a, lr));
    }
    for ((t, g), a) in params
        .hidden_intercepts
        .iter_mut()
        .zip(&grads.hidden_intercepts)
        .zip(accumulator.hidden_intercepts.iter_mut())
    {
        Zip::from(t).and(g).and(a).for_each(|t, &g, a| update(t, g, a, lr));
    }
    update(
        &mut params.output_intercept,
        grads.output_intercept,
        &mut accumulator.output_intercept,
        lr,
    );
}

/// Copy of `params` with every hidden-layer weight (`W_1..W_m`, never `W_0`)
/// zeroed independently with probability `rate`.
pub fn dropout_mask(params: &NetworkParameters, rate: f64, seed: u64) -> Result<NetworkParameters> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    let mut out = params.clone();
    if rate == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    for w in out.weights.iter_mut().skip(1) {
        for v in w.iter_mut() {
            if rng.gen::<f64>() < rate {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.05,
            max_epochs: 100,
            batch_size: usize::MAX,
            patience: 0,
            validation_fraction: 0.0,
            rng_seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("validation fraction must lie in [0, 1)"));
        }
        if self.patience > self.max_epochs {
            return Err(invalid("patience cannot exceed max_epochs"));
        }
        Ok(())
    }
}

/// Summary of a training call.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch (1-based) of the returned checkpoint; 0 when no epoch ran.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

/// Hooks into the training loop used by the regularized estimators.
pub(crate) trait EpochHook {
    /// Called on each mini-batch gradient before the optimizer step.
    fn adjust_gradients(&mut self, _params: &NetworkParameters, _grads: &mut Gradients) {}
    /// Called once per epoch after all gradient steps.
    fn after_epoch(&mut self, _params: &mut NetworkParameters, _lr: f64) {}
}

pub(crate) struct NoHook;

impl EpochHook for NoHook {}

/// Trains with Adagrad, updating only the `W_0` rows in `trainable_input_rows`
/// (plus all deeper weights and intercepts). Rows outside the set must be zero
/// on entry and remain bit-zero.
pub fn train(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    opts: &TrainOptions,
    trainable_input_rows: &[usize],
) -> Result<NetworkParameters> {
    train_with_hook(params, arch, data, opts, trainable_input_rows, &mut NoHook).map(|(p, _)| p)
}

/// As [`train`], also returning per-epoch losses.
pub fn train_with_report(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    opts: &TrainOptions,
    trainable_input_rows: &[usize],
) -> Result<(NetworkParameters, TrainReport)> {
    train_with_hook(params, arch, data, opts, trainable_input_rows, &mut NoHook)
}

/// Xavier initialization followed by [`train`] on every input row.
pub fn fit(arch: &NetworkArchitecture, data: &Dataset, opts: &TrainOptions) -> Result<NetworkParameters> {
    let init = xavier_init(arch, opts.rng_seed)?;
    let rows: Vec<usize> = (0..arch.input_dim).collect();
    train(&init, arch, data, opts, &rows)
}

/// Splits `0..n` into (train, validation) index lists.
pub(crate) fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_val = ((n as f64) * fraction).round() as usize;
    if fraction == 0.0 || n < 2 {
        return ((0..n).collect(), Vec::new());
    }
    let n_val = n_val.clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed);
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

pub(crate) fn train_with_hook(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    opts: &TrainOptions,
    trainable_input_rows: &[usize],
    hook: &mut dyn EpochHook,
) -> Result<(NetworkParameters, TrainReport)> {
    arch.validate()?;
    params.check_shapes(arch)?;
    check_data(arch, data)?;
    opts.validate()?;

    let mut rows = trainable_input_rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    if let Some(&r) = rows.iter().find(|&&r| r >= arch.input_dim) {
        return Err(invalid(format!("trainable row {r} out of range for input_dim {}", arch.input_dim)));
    }
    let mut is_trainable = vec![false; arch.input_dim];
    rows.iter().for_each(|&r| is_trainable[r] = true);
    for (r, row) in params.weights[0].outer_iter().enumerate() {
        if !is_trainable[r] && row.iter().any(|&v| v != 0.0) {
            return Err(invalid(format!("frozen input row {r} is not zero")));
        }
    }

    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: 0,
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
    };
    if opts.max_epochs == 0 {
        return Ok((params.clone(), report));
    }

    // Train a compact network over the trainable rows only; frozen rows are
    // zero and contribute nothing to the forward pass.
    let compact_arch = arch.with_input_dim(rows.len());
    let mut compact = params.gather_input_rows(&rows);
    let x_all = data.x().select(Axis(1), &rows);

    let (train_idx, val_idx) = validation_split(data.n(), opts.validation_fraction, seed::derive(opts.rng_seed, seed::STREAM_TRAIN, 0));
    let x_train = x_all.select(Axis(0), &train_idx);
    let y_train = data.y().select(Axis(0), &train_idx);
    let validation = if val_idx.is_empty() {
        None
    } else {
        Some((x_all.select(Axis(0), &val_idx), data.y().select(Axis(0), &val_idx)))
    };

    let n_train = train_idx.len();
    let full_batch = opts.batch_size >= n_train;
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut rng = seed::rng(seed::derive(opts.rng_seed, seed::STREAM_TRAIN, 1));
    let mut accumulator = compact.zeros_like();
    let mut best: Option<(f64, NetworkParameters)> = None;
    let mut stale = 0usize;

    for epoch in 1..=opts.max_epochs {
        let mut epoch_loss = 0.0;
        if full_batch {
            let tr = trace(&compact, &compact_arch, x_train.view());
            epoch_loss = loss_from_output(arch.task, tr.eta.view(), y_train.view());
            let (mut grads, delta) = backprop(&compact, &compact_arch, y_train.view(), &tr);
            grads.weights[0] = input_gradient(x_train.view(), delta.view(), None);
            hook.adjust_gradients(&compact, &mut grads);
            adagrad_step(&mut compact, &grads, &mut accumulator, opts.learning_rate);
        } else {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            for chunk in order.chunks(opts.batch_size) {
                let xb = x_train.select(Axis(0), chunk);
                let yb = y_train.select(Axis(0), chunk);
                let tr = trace(&compact, &compact_arch, xb.view());
                epoch_loss += loss_from_output(arch.task, tr.eta.view(), yb.view()) * chunk.len() as f64;
                let (mut grads, delta) = backprop(&compact, &compact_arch, yb.view(), &tr);
                grads.weights[0] = input_gradient(xb.view(), delta.view(), None);
                hook.adjust_gradients(&compact, &mut grads);
                adagrad_step(&mut compact, &grads, &mut accumulator, opts.learning_rate);
            }
            epoch_loss /= n_train as f64;
        }
        hook.after_epoch(&mut compact, opts.learning_rate);
        report.epochs_run = epoch;
        report.train_loss.push(epoch_loss);

        if !epoch_loss.is_finite() || !compact.all_finite() {
            return Err(Error::Numerical(format!(
                "non-finite training loss ({epoch_loss}) at epoch {epoch}; try a smaller learning rate"
            )));
        }

        if let Some((xv, yv)) = &validation {
            let tr = trace(&compact, &compact_arch, xv.view());
            let val_loss = loss_from_output(arch.task, tr.eta.view(), yv.view());
            report.validation_loss.push(val_loss);
            let improved = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
            if improved {
                best = Some((val_loss, compact.clone()));
                report.best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if opts.patience > 0 && stale >= opts.patience {
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }

    let chosen = match best {
        Some((_, p)) => p,
        None => compact,
    };
    let mut out = params.clone();
    out.scatter_input_rows(&rows, &chosen);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single_unit() -> (NetworkArchitecture, NetworkParameters) {
        let arch = NetworkArchitecture::new(1, vec![1], Activation::Relu, Task::Regression).unwrap();
        let params = NetworkParameters {
            weights: vec![array![[2.0]], array![[3.0]]],
            hidden_intercepts: vec![array![-1.0]],
            output_intercept: 0.5,
        };
        (arch, params)
    }

    #[test]
    fn forward_hand_computed_unit() {
        let (arch, params) = single_unit();
        assert_eq!(forward(&params, &arch, &[1.0]).unwrap(), 3.5);
        assert!(matches!(forward(&params, &arch, &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn constant_networks() {
        let reg = NetworkArchitecture::new(3, vec![4, 2], Activation::Relu, Task::Regression).unwrap();
        let mut p = NetworkParameters::zeros(&reg);
        p.output_intercept = 0.5;
        assert_eq!(forward(&p, &reg, &[1.0, -2.0, 3.0]).unwrap(), 0.5);
        let cls = NetworkArchitecture { task: Task::Classification, ..reg };
        let p = NetworkParameters::zeros(&cls);
        assert_eq!(forward(&p, &cls, &[1.0, -2.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn loss_edge_values() {
        let arch = NetworkArchitecture::new(1, vec![2], Activation::Relu, Task::Classification).unwrap();
        let p = NetworkParameters::zeros(&arch);
        let d = Dataset::new(array![[0.3], [-1.0], [2.0]], array![1.0, 0.0, 1.0], Task::Classification).unwrap();
        assert!((empirical_loss(&p, &arch, &d).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

        let arch = arch.clone().with_input_dim(1);
        let arch = NetworkArchitecture { task: Task::Regression, ..arch };
        let mut p = NetworkParameters::zeros(&arch);
        p.output_intercept = 1.25;
        let d = Dataset::new(array![[0.3], [-1.0]], array![1.25, 1.25], Task::Regression).unwrap();
        assert_eq!(empirical_loss(&p, &arch, &d).unwrap(), 0.0);
    }

    #[test]
    fn clipped_probabilities_keep_loss_finite() {
        let arch = NetworkArchitecture::new(1, vec![1], Activation::Relu, Task::Classification).unwrap();
        let mut p = NetworkParameters::zeros(&arch);
        p.output_intercept = 1e4;
        let d = Dataset::new(array![[0.0]], array![0.0], Task::Classification).unwrap();
        let loss = empirical_loss(&p, &arch, &d).unwrap();
        assert!((loss + PROB_CLIP.ln()).abs() < 1e-3);
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let arch = NetworkArchitecture::new(1, vec![1], Activation::Relu, Task::Regression).unwrap();
        for s in 0..200 {
            let p = xavier_init(&arch, s).unwrap();
            assert!(p.weights.iter().all(|w| w.iter().all(|v| v.abs() <= 3f64.sqrt())));
            assert_eq!(p.output_intercept, 0.0);
        }
        let arch = NetworkArchitecture::new(4, vec![8, 4], Activation::Relu, Task::Regression).unwrap();
        assert_eq!(xavier_init(&arch, 9).unwrap(), xavier_init(&arch, 9).unwrap());
        assert_ne!(xavier_init(&arch, 9).unwrap(), xavier_init(&arch, 10).unwrap());
    }

    #[test]
    fn adagrad_closed_form() {
        let arch = NetworkArchitecture::new(1, vec![1], Activation::Relu, Task::Regression).unwrap();
        let mut p = NetworkParameters::zeros(&arch);
        let mut acc = NetworkParameters::zeros(&arch);
        let zero = NetworkParameters::zeros(&arch);
        adagrad_step(&mut p, &zero, &mut acc, 1.0);
        assert_eq!(p, zero);
        assert_eq!(acc, zero);

        let mut g = zero.clone();
        g.output_intercept = 2.0;
        adagrad_step(&mut p, &g, &mut acc, 1.0);
        assert!((p.output_intercept + 1.0).abs() < 1e-8);

        let mut p = zero.clone();
        let mut acc = zero.clone();
        g.output_intercept = 1.0;
        adagrad_step(&mut p, &g, &mut acc, 1.0);
        let first = -p.output_intercept;
        adagrad_step(&mut p, &g, &mut acc, 1.0);
        let second = -p.output_intercept - first;
        assert!((first - 1.0).abs() < 1e-7);
        assert!((second - 1.0 / 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn dropout_contract() {
        let arch = NetworkArchitecture::new(3, vec![100, 100], Activation::Relu, Task::Regression).unwrap();
        let p = xavier_init(&arch, 1).unwrap();
        assert_eq!(dropout_mask(&p, 0.0, 5).unwrap(), p);
        let m = dropout_mask(&p, 0.5, 5).unwrap();
        assert_eq!(m, dropout_mask(&p, 0.5, 5).unwrap());
        assert_eq!(m.weights[0], p.weights[0]);
        let zeros = m.weights[1].iter().filter(|&&v| v == 0.0).count() as f64;
        let frac = zeros / m.weights[1].len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "zero fraction {frac}");
        assert!(dropout_mask(&p, 1.0, 5).is_err());
    }

    #[test]
    fn zero_epochs_is_identity() {
        let arch = NetworkArchitecture::new(2, vec![3], Activation::Relu, Task::Regression).unwrap();
        let p = xavier_init(&arch, 3).unwrap();
        let d = Dataset::new(array![[1.0, 2.0], [0.5, -1.0]], array![1.0, 0.0], Task::Regression).unwrap();
        let opts = TrainOptions {
            max_epochs: 0,
            ..TrainOptions::default()
        };
        assert_eq!(train(&p, &arch, &d, &opts, &[0, 1]).unwrap(), p);
    }

    #[test]
    fn rejects_nonzero_frozen_row() {
        let arch = NetworkArchitecture::new(2, vec![3], Activation::Relu, Task::Regression).unwrap();
        let p = xavier_init(&arch, 3).unwrap();
        let d = Dataset::new(array![[1.0, 2.0], [0.5, -1.0]], array![1.0, 0.0], Task::Regression).unwrap();
        assert!(train(&p, &arch, &d, &TrainOptions::default(), &[0]).is_err());
    }

    #[test]
    fn divergent_training_reports_numerical_failure() {
        let arch = NetworkArchitecture::new(1, vec![2], Activation::Relu, Task::Regression).unwrap();
        let p = xavier_init(&arch, 3).unwrap();
        let d = Dataset::new(array![[1e200], [-1e200]], array![1e200, 0.0], Task::Regression).unwrap();
        let err = train(&p, &arch, &d, &TrainOptions::default(), &[0]).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn fold_response_scale_matches_restore() {
        let (arch, mut params) = single_unit();
        let before = forward(&params, &arch, &[0.7]).unwrap();
        let s = ResponseScale { center: 3.0, scale: 2.5 };
        params.fold_response_scale(&s);
        let after = forward(&params, &arch, &[0.7]).unwrap();
        assert!((after - s.restore(before)).abs() < 1e-12);
    }
}
