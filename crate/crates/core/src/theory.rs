//! Selection probabilities of the stage-wise selector at the null model, and
//! Monte-Carlo oracles for them.
//!
//! With orthonormal columns and `y = Xβ + ε`, the first-step criteria
//! `c_j = |x_jᵀy|` are independent folded normals `|N(β_j, σ²)|`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erfc;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quad;
use crate::seed;

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-11;
/// Replications sharing one orthonormalized design in the Monte-Carlo oracles.
pub const MC_CHUNK: usize = 256;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("sigma must be positive and finite, got {sigma}")))
    }
}

/// `(ln F, 1 − F)` for `F` the CDF of `|N(mu, σ²)|` at `x ≥ 0`, each accurate in
/// both tails.
fn folded_log_cdf(x: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let m = mu.abs();
    let s = sigma * SQRT_2;
    let upper = 0.5 * erfc((x - m) / s) + 0.5 * erfc((x + m) / s);
    if upper < 0.5 {
        ((-upper).ln_1p(), upper)
    } else {
        let f = 0.5 * erfc((m - x) / s) - 0.5 * erfc((x + m) / s);
        (if f > 0.0 { f.ln() } else { f64::NEG_INFINITY }, upper)
    }
}

/// CDF of `|N(mu, σ²)|`: `½[erf((x+|μ|)/√(2σ²)) + erf((x−|μ|)/√(2σ²))]`.
pub fn folded_normal_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(x >= 0.0) {
        return Err(invalid(format!("folded normal CDF needs x ≥ 0, got {x}")));
    }
    let (log_f, upper) = folded_log_cdf(x, mu, sigma);
    Ok(if upper < 0.5 { 1.0 - upper } else { log_f.exp() })
}

/// Density of `|N(mu, σ²)|`, evaluated as `φ((x−μ)/σ)/σ + φ((x+μ)/σ)/σ`
/// to avoid `cosh` overflow.
pub fn folded_normal_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(x >= 0.0) {
        return Err(invalid(format!("folded normal density needs x ≥ 0, got {x}")));
    }
    Ok(folded_pdf(x, mu, sigma))
}

fn folded_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (normal_pdf((x - mu) / sigma) + normal_pdf((x + mu) / sigma)) / sigma
}

/// `P(X₁ > a, X₂ > b)` for a standard bivariate normal with correlation `rho`,
/// as `∫_a^∞ φ(x) Q((b − ρx)/√(1−ρ²)) dx`.
pub fn orthant_prob(a: f64, b: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!("correlation must satisfy |rho| < 1, got {rho}")));
    }
    if a.is_nan() || b.is_nan() {
        return Err(invalid("orthant bounds must not be NaN"));
    }
    const CUT: f64 = 40.0;
    if a >= CUT {
        return Ok(0.0);
    }
    let lo = a.max(-CUT);
    let r = (1.0 - rho * rho).sqrt();
    let mut points = vec![lo];
    points.extend([-8.0, -2.0, 0.0, 2.0, 8.0].into_iter().filter(|&t| t > lo));
    points.push(CUT);
    let v = quad::integrate(
        |x| normal_pdf(x) * normal_cdf(-(b - rho * x) / r),
        &points,
        QUAD_ABS_TOL,
        QUAD_REL_TOL,
    )?;
    Ok(v.clamp(0.0, 1.0))
}

/// `P(c_j < c_k)` for the null-model criteria of two columns:
/// `2L(d, −|β_k|/σ, 1/√2) + 2L(t, |β_k|/σ, 1/√2) + Φ(d) + Φ(t) − 2` with
/// `d = (|β_j|−|β_k|)/(√2σ)`, `t = (|β_j|+|β_k|)/(√2σ)`.
pub fn prob_select_over(beta_j: f64, beta_k: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let (bj, bk) = (beta_j.abs(), beta_k.abs());
    let d = (bj - bk) / (SQRT_2 * sigma);
    let t = (bj + bk) / (SQRT_2 * sigma);
    let l1 = orthant_prob(d, -bk / sigma, FRAC_1_SQRT_2)?;
    let l2 = orthant_prob(t, bk / sigma, FRAC_1_SQRT_2)?;
    Ok(2.0 * l1 + 2.0 * l2 + normal_cdf(d) + normal_cdf(t) - 2.0)
}

/// Coefficients of a sparse linear model: `β_j = 0` for `j ≥ s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalProfile {
    betas: Vec<f64>,
    sigma: f64,
    s: usize,
}

impl SignalProfile {
    pub fn new(betas: Vec<f64>, sigma: f64, s: usize) -> Result<Self> {
        check_sigma(sigma)?;
        if betas.is_empty() || s == 0 || s > betas.len() {
            return Err(invalid(format!("support size {s} must lie in 1..={}", betas.len())));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        if betas[s..].iter().any(|&b| b != 0.0) {
            return Err(invalid("coefficients beyond the support must be zero"));
        }
        Ok(SignalProfile { betas, sigma, s })
    }

    /// `s` support coefficients equal to `beta` among `p` columns.
    pub fn equal(beta: f64, sigma: f64, s: usize, p: usize) -> Result<Self> {
        let mut betas = vec![0.0; p];
        betas.iter_mut().take(s).for_each(|b| *b = beta);
        Self::new(betas, sigma, s)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn p(&self) -> usize {
        self.betas.len()
    }
}

/// `P(argmax_j c_j ∈ support) = Σ_{k≤s} ∫_0^∞ f_k(x) Π_{j≠k} F_j(x) dx`.
///
/// Columns with equal `|β|` are grouped and the product is taken in the log
/// domain, so `p` up to about 10⁴ is practical.
pub fn prob_first_correct(profile: &SignalProfile) -> Result<f64> {
    if profile.s == profile.p() {
        return Ok(1.0);
    }
    let sigma = profile.sigma;
    // (|β|, count among all columns, count among support columns)
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (j, &b) in profile.betas.iter().enumerate() {
        let m = b.abs();
        let in_support = usize::from(j < profile.s);
        match groups.iter_mut().find(|g| g.0 == m) {
            Some(g) => {
                g.1 += 1;
                g.2 += in_support;
            }
            None => groups.push((m, 1, in_support)),
        }
    }
    let max_beta = groups.iter().map(|g| g.0).fold(0.0, f64::max);
    let upper = max_beta + 12.0 * sigma;
    let mut points = vec![0.0, upper];
    for &(m, _, _) in &groups {
        for t in [m - 4.0 * sigma, m, m + 4.0 * sigma] {
            if t > 0.0 && t < upper {
                points.push(t);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut total = 0.0;
    for (gi, &(m, _, support_count)) in groups.iter().enumerate() {
        if support_count == 0 {
            continue;
        }
        let term = quad::integrate(
            |x| {
                let mut log_prod = 0.0;
                for (hi, &(mh, count, _)) in groups.iter().enumerate() {
                    let power = if hi == gi { count - 1 } else { count };
                    if power > 0 {
                        log_prod += power as f64 * folded_log_cdf(x, mh, sigma).0;
                    }
                }
                let density = folded_pdf(x, m, sigma);
                if log_prod == f64::NEG_INFINITY || density == 0.0 {
                    0.0
                } else {
                    density * log_prod.exp()
                }
            },
            &points,
            QUAD_ABS_TOL,
            QUAD_REL_TOL,
        )?;
        total += support_count as f64 * term;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// `n × p` Gaussian matrix with orthonormalized columns (modified Gram–Schmidt,
/// two passes).
pub fn orthonormal_design(n: usize, p: usize, rng: &mut seed::Rng) -> Result<Array2<f64>> {
    if n < p || p == 0 {
        return Err(invalid(format!("orthonormal design needs n ≥ p ≥ 1, got n = {n}, p = {p}")));
    }
    let mut x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    for j in 0..p {
        for _ in 0..2 {
            for k in 0..j {
                let proj = x.column(k).dot(&x.column(j));
                let qk = x.column(k).to_owned();
                x.column_mut(j).scaled_add(-proj, &qk);
            }
        }
        let norm = x.column(j).dot(&x.column(j)).sqrt();
        x.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(x)
}

/// Runs `reps` replications of `y = Xβ + ε` over orthonormalized designs
/// (a fresh design every [`MC_CHUNK`] replications) and counts those where
/// `hit(|Xᵀy|)` holds. Chunks are seeded independently and summed in order.
fn mc_count<H>(betas: &[f64], sigma: f64, n: usize, reps: usize, seed: u64, hit: H) -> Result<f64>
where
    H: Fn(ArrayView1<f64>) -> bool + Sync,
{
    check_sigma(sigma)?;
    if reps == 0 {
        return Err(invalid("Monte-Carlo needs at least one replication"));
    }
    let p = betas.len();
    if n < p {
        return Err(invalid(format!("Monte-Carlo design needs n ≥ p ({n} < {p})")));
    }
    let beta = Array1::from(betas.to_vec());
    let chunks = reps.div_ceil(MC_CHUNK);
    let counts: Vec<usize> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed::derive(seed, seed::STREAM_REPETITION, c as u64));
            let x = orthonormal_design(n, p, &mut rng)?;
            let signal = x.dot(&beta);
            let size = MC_CHUNK.min(reps - c * MC_CHUNK);
            let mut hits = 0;
            for _ in 0..size {
                let y = signal.mapv(|m| m + sigma * rng.sample::<f64, _>(StandardNormal));
                let crit = x.t().dot(&y).mapv(f64::abs);
                hits += usize::from(hit(crit.view()));
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    Ok(counts.iter().sum::<usize>() as f64 / reps as f64)
}

/// Monte-Carlo frequency of `c_j < c_k` for two orthonormal columns with
/// coefficients `(beta_j, beta_k)` and `n` observations.
pub fn mc_select_over(beta_j: f64, beta_k: f64, sigma: f64, n: usize, reps: usize, seed: u64) -> Result<f64> {
    mc_count(&[beta_j, beta_k], sigma, n, reps, seed, |c| c[0] < c[1])
}

/// Index of the largest entry, ties to the smallest index.
fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = j;
        }
    }
    best
}

/// Monte-Carlo frequency that `argmax_j c_j` lies in the support.
pub fn mc_first_selection(profile: &SignalProfile, n: usize, reps: usize, seed: u64) -> Result<f64> {
    let s = profile.s;
    mc_count(&profile.betas, profile.sigma, n, reps, seed, |c| argmax(c) < s)
}
