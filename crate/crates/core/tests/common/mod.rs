#![allow(dead_code)]

use enns_core::nn::{Activation, NetworkArchitecture, NetworkParameters};
use enns_core::seed;
use enns_core::{Dataset, Task};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Loss and ReLU sign pattern from a plain scalar forward pass.
pub fn oracle_loss(params: &NetworkParameters, arch: &NetworkArchitecture, data: &Dataset) -> (f64, Vec<bool>) {
    let mut pattern = Vec::new();
    let mut total = 0.0;
    for (row, &y) in data.x().outer_iter().zip(data.y().iter()) {
        let mut a: Vec<f64> = row.to_vec();
        for (k, w) in params.weights[..arch.depth()].iter().enumerate() {
            let mut next = Vec::with_capacity(w.ncols());
            for u in 0..w.ncols() {
                let mut z = params.hidden_intercepts[k][u];
                for (i, ai) in a.iter().enumerate() {
                    z += ai * w[[i, u]];
                }
                pattern.push(z >= 0.0);
                next.push(match arch.hidden_activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                });
            }
            a = next;
        }
        let w = &params.weights[arch.depth()];
        let mut eta = params.output_intercept;
        for (i, ai) in a.iter().enumerate() {
            eta += ai * w[[i, 0]];
        }
        total += match arch.task {
            Task::Regression => (y - eta) * (y - eta),
            Task::Classification => {
                let p = (1.0 / (1.0 + (-eta).exp())).clamp(1e-12, 1.0 - 1e-12);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        };
    }
    (total / data.n() as f64, pattern)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut seed::Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Random architecture, parameters and data of the given size.
pub fn random_instance(
    n: usize,
    p: usize,
    hidden: Vec<usize>,
    act: Activation,
    task: Task,
    seed_value: u64,
) -> (NetworkArchitecture, NetworkParameters, Dataset) {
    let mut rng = seed::rng(seed_value);
    let arch = NetworkArchitecture::new(p, hidden, act, task).unwrap();
    let mut params = NetworkParameters::zeros(&arch);
    for w in params.weights.iter_mut() {
        w.mapv_inplace(|_| StandardNormal.sample(&mut rng));
    }
    for t in params.hidden_intercepts.iter_mut() {
        t.mapv_inplace(|_| 0.5 * gaussian(&mut rng));
    }
    params.output_intercept = StandardNormal.sample(&mut rng);
    let x = normal_matrix(n, p, &mut rng);
    let y: Array1<f64> = match task {
        Task::Regression => Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng)),
        Task::Classification => Array1::from_shape_simple_fn(n, || f64::from(rng.gen_bool(0.5))),
    };
    (arch, params, Dataset::new(x, y, task).unwrap())
}

/// Visits every scalar parameter mutably, in a fixed order.
pub fn for_each_param(params: &mut NetworkParameters, mut f: impl FnMut(usize, &mut f64)) {
    let mut i = 0;
    for w in params.weights.iter_mut() {
        for v in w.iter_mut() {
            f(i, v);
            i += 1;
        }
    }
    for t in params.hidden_intercepts.iter_mut() {
        for v in t.iter_mut() {
            f(i, v);
            i += 1;
        }
    }
    f(i, &mut params.output_intercept);
}

pub fn flatten(params: &NetworkParameters) -> Vec<f64> {
    let mut out = Vec::new();
    let mut copy = params.clone();
    for_each_param(&mut copy, |_, v| out.push(*v));
    out
}

/// Central differences of the oracle loss for every parameter. Returns `None`
/// for a coordinate whose stencil crosses a ReLU kink at every tried step.
pub fn finite_differences(
    params: &NetworkParameters,
    arch: &NetworkArchitecture,
    data: &Dataset,
    step: f64,
) -> Vec<Option<f64>> {
    let count = flatten(params).len();
    let (_, base_pattern) = oracle_loss(params, arch, data);
    let eval = |idx: usize, delta: f64| {
        let mut q = params.clone();
        for_each_param(&mut q, |i, v| {
            if i == idx {
                *v += delta;
            }
        });
        oracle_loss(&q, arch, data)
    };
    (0..count)
        .map(|idx| {
            let mut h = step;
            for _ in 0..4 {
                let (lp, pp) = eval(idx, h);
                let (lm, pm) = eval(idx, -h);
                if pp == base_pattern && pm == base_pattern {
                    return Some((lp - lm) / (2.0 * h));
                }
                h /= 10.0;
            }
            None
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn uniform_dataset(n: usize, p: usize, seed_value: u64, f: impl Fn(&[f64], &mut seed::Rng) -> f64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let x = Array2::from_shape_simple_fn((n, p), || rng.gen_range(-1.0..1.0));
    let y = Array1::from_iter(x.outer_iter().map(|r| f(r.as_slice().unwrap(), &mut rng)));
    Dataset::new(x, y, Task::Regression).unwrap()
}

pub fn gaussian(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}
