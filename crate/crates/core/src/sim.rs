//! Synthetic designs and responses for simulation studies.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{invalid, Result};
use crate::nn::{self, sigmoid, Activation, NetworkArchitecture, NetworkParameters};
use crate::seed;

/// I.i.d. Uniform(−1, 1) entries.
pub fn gen_design_uniform(n: usize, p: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || p == 0 {
        return Err(invalid("design needs n ≥ 1 and p ≥ 1"));
    }
    let mut rng = seed::rng(seed);
    let dist = Uniform::new(-1.0, 1.0);
    Ok(Array2::from_shape_simple_fn((n, p), || loop {
        let v: f64 = dist.sample(&mut rng);
        if v > -1.0 {
            break v;
        }
    }))
}

/// Equicorrelated standard normals `(z_ij + t·u_i)/√(1+t²)` with
/// `t = √(ρ/(1−ρ))`, before truncation.
pub fn gen_design_correlated_normal(n: usize, p: usize, rho: f64, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || p == 0 {
        return Err(invalid("design needs n ≥ 1 and p ≥ 1"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid(format!("correlation must lie in [0, 1), got {rho}")));
    }
    let t = (rho / (1.0 - rho)).sqrt();
    let norm = (1.0 + t * t).sqrt();
    let mut rng = seed::rng(seed);
    let mut x = Array2::zeros((n, p));
    for mut row in x.outer_iter_mut() {
        let u: f64 = rng.sample(StandardNormal);
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (z + t * u) / norm;
        }
    }
    Ok(x)
}

/// [`gen_design_correlated_normal`] clamped to `[−1, 1]`.
pub fn gen_design_correlated(n: usize, p: usize, rho: f64, seed: u64) -> Result<Array2<f64>> {
    let mut x = gen_design_correlated_normal(n, p, rho, seed)?;
    x.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    /// `η = Σ_{j≤s} β_j x_j`, `β_j ~ N(coef_mean, coef_sd²)`.
    Linear,
    /// `η = sin x₁ + x₂ + exp x₃ + x₄² + log(x₅+2) − 2` (requires `s = 5`).
    Additive,
    /// `η` from a ReLU network over the first `s` columns.
    Network,
}

impl std::str::FromStr for ResponseKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ResponseKind::Linear),
            "additive" => Ok(ResponseKind::Additive),
            "network" => Ok(ResponseKind::Network),
            other => Err(invalid(format!("unknown response kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub kind: ResponseKind,
    pub task: Task,
    /// Support size; the support is the first `s` columns.
    pub s: usize,
    /// Mean and standard deviation of the linear coefficients or of the
    /// generator's input weights.
    pub coef_mean: f64,
    pub coef_sd: f64,
    /// Regression noise standard deviation.
    pub noise_sd: f64,
    pub net_hidden: Vec<usize>,
}

impl Default for ResponseSpec {
    fn default() -> Self {
        ResponseSpec {
            kind: ResponseKind::Network,
            task: Task::Regression,
            s: 5,
            coef_mean: 1.0,
            coef_sd: 1.0,
            noise_sd: 1.0,
            net_hidden: vec![50, 30, 15, 10],
        }
    }
}

/// What generated a response.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// True support (0-based).
    pub support: Vec<usize>,
    pub seed: u64,
    /// Linear coefficients for the linear kind.
    pub coefficients: Option<Vec<f64>>,
    /// Generator network for the network kind (input width `s`).
    pub generator: Option<(NetworkArchitecture, NetworkParameters)>,
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| invalid(format!("bad normal parameters ({mean}, {sd}): {e}")))
}

/// Generator network: input weights `N(coef_mean, coef_sd²)`, deeper weights
/// `N(0, 1)`, zero intercepts.
fn generator_network(spec: &ResponseSpec, seed: u64) -> Result<(NetworkArchitecture, NetworkParameters)> {
    let arch = NetworkArchitecture::new(spec.s, spec.net_hidden.clone(), Activation::Relu, Task::Regression)?;
    let mut params = NetworkParameters::zeros(&arch);
    let mut rng = seed::rng(seed);
    let input = normal(spec.coef_mean, spec.coef_sd)?;
    params.weights[0].iter_mut().for_each(|w| *w = input.sample(&mut rng));
    for w in params.weights.iter_mut().skip(1) {
        w.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    }
    Ok((arch, params))
}

pub fn additive_eta(x: &[f64]) -> f64 {
    x[0].sin() + x[1] + x[2].exp() + x[3] * x[3] + (x[4] + 2.0).ln() - 2.0
}

/// Draws `y` from `spec` given the design `x`. Only the first `s` columns are read.
pub fn gen_response(x: ArrayView2<f64>, spec: &ResponseSpec, seed: u64) -> Result<(Array1<f64>, GroundTruth)> {
    if spec.s == 0 || spec.s > x.ncols() {
        return Err(invalid(format!("support size {} must lie in 1..={}", spec.s, x.ncols())));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(invalid("noise standard deviation must be non-negative"));
    }
    let xs = x.slice(s![.., ..spec.s]);
    let mut truth = GroundTruth {
        support: (0..spec.s).collect(),
        seed,
        coefficients: None,
        generator: None,
    };
    let eta: Array1<f64> = match spec.kind {
        ResponseKind::Linear => {
            let dist = normal(spec.coef_mean, spec.coef_sd)?;
            let mut rng = seed::rng(seed::derive(seed, 0, 0));
            let beta: Array1<f64> = (0..spec.s).map(|_| dist.sample(&mut rng)).collect();
            let eta = xs.dot(&beta);
            truth.coefficients = Some(beta.to_vec());
            eta
        }
        ResponseKind::Additive => {
            if spec.s != 5 {
                return Err(invalid(format!("the additive response uses exactly 5 features, got s = {}", spec.s)));
            }
            xs.outer_iter().map(|r| additive_eta(&r.to_vec())).collect()
        }
        ResponseKind::Network => {
            if spec.net_hidden.is_empty() {
                return Err(invalid("network response needs hidden layers"));
            }
            let (arch, params) = generator_network(spec, seed::derive(seed, 0, 0))?;
            let eta = nn::predict(&params, &arch, xs)?;
            truth.generator = Some((arch, params));
            eta
        }
    };
    let mut rng = seed::rng(seed::derive(seed, 1, 0));
    let y = match spec.task {
        Task::Regression => {
            let noise = normal(0.0, spec.noise_sd)?;
            eta.mapv(|e| e + noise.sample(&mut rng))
        }
        Task::Classification => eta.mapv(|e| {
            let d = Bernoulli::new(sigmoid(e)).expect("probability in [0, 1]");
            if d.sample(&mut rng) {
                1.0
            } else {
                0.0
            }
        }),
    };
    Ok((y, truth))
}

/// Sample correlation between two columns.
pub fn column_correlation(x: ArrayView2<f64>, a: usize, b: usize) -> f64 {
    let ca = x.index_axis(Axis(1), a);
    let cb = x.index_axis(Axis(1), b);
    let n = ca.len() as f64;
    let (ma, mb) = (ca.sum() / n, cb.sum() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&u, &v) in ca.iter().zip(cb.iter()) {
        sab += (u - ma) * (v - mb);
        saa += (u - ma) * (u - ma);
        sbb += (v - mb) * (v - mb);
    }
    sab / (saa * sbb).sqrt()
}
