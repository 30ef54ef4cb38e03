use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;

/// Output of [`tsne`] with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// `n × 2` coordinates.
    pub embedding: Array2<f64>,
    /// Achieved perplexity of each conditional distribution.
    pub row_perplexities: Vec<f64>,
    /// KL(P‖Q) of the initial layout and of the final layout (without exaggeration).
    pub initial_kl: f64,
    pub final_kl: f64,
}

fn squared_distances(points: ArrayView2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Conditional distribution of one row for precision `beta`; returns the
/// probabilities (diagonal zero) and the entropy in nats.
fn row_distribution(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&dj, o)) in d.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-(dj - min) * beta).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

/// Row-conditional affinities `P(j|i)` with each row's Gaussian precision
/// found by bisection so that its perplexity matches the target.
pub fn conditional_affinities(points: ArrayView2<f64>, perplexity: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = points.nrows();
    if !(perplexity > 0.0) || perplexity >= n as f64 {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} must be positive and below the number of points ({n})"
        )));
    }
    let d = squared_distances(points);
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    let mut achieved = Vec::with_capacity(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di = d.row(i).to_vec();
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = row_distribution(&di, i, beta, &mut row);
        for _ in 0..200 {
            if (h.exp() - perplexity).abs() <= PERPLEXITY_TOLERANCE * 0.1 {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_distribution(&di, i, beta, &mut row);
        }
        if !h.is_finite() {
            return Err(Error::Diverged(format!("t-SNE bandwidth search failed on row {i}")));
        }
        achieved.push(h.exp());
        p.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    Ok((p, achieved))
}

/// `P = (P_cond + P_condᵀ) / 2n`.
pub fn symmetrize(conditional: &Array2<f64>) -> Array2<f64> {
    let n = conditional.nrows() as f64;
    (conditional + &conditional.t()) / (2.0 * n)
}

/// Student-t affinities of a layout: `Q` and the unnormalized kernel.
fn low_dim_affinities(y: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = y.nrows();
    let mut num = Array2::zeros((n, n));
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[[i, 0]] - y[[j, 0]];
            let dy = y[[i, 1]] - y[[j, 1]];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[[i, j]] = v;
            num[[j, i]] = v;
            sum += 2.0 * v;
        }
    }
    (num.mapv(|v| v / sum), num)
}

/// KL(P‖Q) of a layout against symmetric affinities `p`.
pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (q, _) = low_dim_affinities(y);
    p.iter()
        .zip(q.iter())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(1e-300)).ln())
        .sum()
}

/// Exact t-SNE to two dimensions.
pub fn tsne(points: ArrayView2<f64>, config: &TsneConfig) -> Result<TsneResult> {
    let n = points.nrows();
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input coordinate"));
    }
    let (cond, row_perplexities) = conditional_affinities(points, config.perplexity)?;
    let p = symmetrize(&cond);
    let mut rng = rng::stream(config.seed, &[streams::TSNE]);
    let normal = Normal::new(0.0, 1e-2).expect("valid std");
    let mut y = Array2::from_shape_simple_fn((n, 2), || normal.sample(&mut rng));
    let initial_kl = kl_divergence(&p, &y);
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut grad = Array2::<f64>::zeros((n, 2));
    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.exaggeration_iterations {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (q, num) = low_dim_affinities(&y);
        grad.fill(0.0);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let m = (exaggeration * p[[i, j]] - q[[i, j]]) * num[[i, j]];
                gx += m * (y[[i, 0]] - y[[j, 0]]);
                gy += m * (y[[i, 1]] - y[[j, 1]]);
            }
            grad[[i, 0]] = 4.0 * gx;
            grad[[i, 1]] = 4.0 * gy;
        }
        for ((g, u), gain) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*u > 0.0) { *gain + 0.2 } else { (*gain * 0.8).max(0.01) };
            *u = momentum * *u - config.learning_rate * *gain * g;
        }
        y += &update;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("nonempty");
        y -= &mean.insert_axis(ndarray::Axis(0));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("t-SNE layout became non-finite at iteration {it}")));
        }
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(TsneResult {
        embedding: y,
        row_perplexities,
        initial_kl,
        final_kl,
    })
}
