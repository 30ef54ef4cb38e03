//! Small differentiable building blocks shared by the encoder and the heads.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng as _;

use crate::rng::Rng;

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

pub(crate) fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let (rows, d) = x.dim();
    let mut xhat = Array2::zeros((rows, d));
    let mut rstd = Array1::zeros(rows);
    let mut y = Array2::zeros((rows, d));
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = s;
        for c in 0..d {
            let h = (row[c] - mean) * s;
            xhat[[r, c]] = h;
            y[[r, c]] = h * gain[c] + bias[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns dx and accumulates into `dgain`, `dbias`.
pub(crate) fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    let (rows, d) = dy.dim();
    let mut dx = Array2::zeros((rows, d));
    for r in 0..rows {
        let mut mean_dh = 0.0;
        let mut mean_dh_h = 0.0;
        for c in 0..d {
            let g = dy[[r, c]];
            let h = cache.xhat[[r, c]];
            dgain[c] += g * h;
            dbias[c] += g;
            let dh = g * gain[c];
            mean_dh += dh;
            mean_dh_h += dh * h;
        }
        mean_dh /= d as f64;
        mean_dh_h /= d as f64;
        let s = cache.rstd[r];
        for c in 0..d {
            let h = cache.xhat[[r, c]];
            dx[[r, c]] = s * (dy[[r, c]] * gain[c] - mean_dh - h * mean_dh_h);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// Tanh approximation of GELU.
pub(crate) fn gelu(z: f64) -> f64 {
    0.5 * z * (1.0 + (GELU_C * (z + 0.044715 * z * z * z)).tanh())
}

pub(crate) fn gelu_grad(z: f64) -> f64 {
    let t = (GELU_C * (z + 0.044715 * z * z * z)).tanh();
    0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * z * z)
}

/// Numerically stable softmax of one vector.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut p = logits.mapv(|v| (v - max).exp());
    let sum = p.sum();
    p /= sum;
    p
}

pub(crate) fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Log-softmax of one vector via log-sum-exp.
pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.mapv(|v| v - lse)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`, so the masked output has the input as its expectation.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

pub(crate) fn apply_mask(x: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        Zip::from(x).and(m).for_each(|v, &k| *v *= k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_grad_matches_central_difference() {
        for z in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(z + h) - gelu(z - h)) / (2.0 * h);
            assert!((fd - gelu_grad(z)).abs() < 1e-8);
        }
    }

    #[test]
    fn layer_norm_backward_matches_central_difference() {
        let x = array![[0.3, -1.2, 2.0, 0.1], [1.0, 0.5, -0.5, 0.0]];
        let gain = array![1.1, 0.9, -0.4, 2.0];
        let bias = array![0.1, 0.0, -0.2, 0.3];
        let w = array![[0.2, -0.3, 1.0, 0.5], [0.7, 0.1, -0.9, 0.4]];
        let loss = |x: &Array2<f64>| (&layer_norm(x, &gain, &bias).0 * &w).sum();
        let (_, cache) = layer_norm(&x, &gain, &bias);
        let mut dg = Array1::zeros(4);
        let mut db = Array1::zeros(4);
        let dx = layer_norm_backward(&w, &cache, &gain, &mut dg, &mut db);
        for r in 0..2 {
            for c in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[[r, c]] += 1e-6;
                xm[[r, c]] -= 1e-6;
                let fd = (loss(&xp) - loss(&xm)) / 2e-6;
                assert!((fd - dx[[r, c]]).abs() < 1e-7, "{fd} vs {}", dx[[r, c]]);
            }
        }
    }

    #[test]
    fn log_softmax_is_stable() {
        let l = log_softmax(array![1000.0, 0.0].view());
        assert!(l.iter().all(|v| v.is_finite()));
        assert!(l[0].abs() < 1e-12);
    }
}
