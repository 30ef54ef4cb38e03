//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use ndarray::Array2;
use polyprobe::encoder::{EncoderConfig, EncoderModel};
use polyprobe::params::Params;
use polyprobe::rng;

/// Worst relative error between an analytic gradient and central finite
/// differences, over up to `per_tensor` entries of every tensor.
/// Entries where both values are below `floor` are skipped.
pub fn fd_max_rel_error<P, F>(params: &P, analytic: &P, per_tensor: usize, loss: F) -> (f64, String)
where
    P: Params + Clone,
    F: Fn(&P) -> f64,
{
    let h = 1e-5;
    let floor = 1e-7;
    let mut worst = (0.0, String::new());
    let names: Vec<(String, usize)> = params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.iter().copied().collect()).collect();
    for (ti, (name, len)) in names.iter().enumerate() {
        let stride = (len / per_tensor).max(1);
        for j in (0..*len).step_by(stride).take(per_tensor) {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mut ts = p.tensors_mut();
                let v = ts[ti].1.iter_mut().nth(j).unwrap();
                *v += delta;
                drop(ts);
                loss(&p)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = grads[ti][j];
            if a.abs() < floor && numeric.abs() < floor {
                continue;
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            if rel > worst.0 {
                worst = (rel, format!("{name}[{j}]: analytic {a:e} numeric {numeric:e}"));
            }
        }
    }
    worst
}

pub fn tiny_config(vocab: usize) -> EncoderConfig {
    EncoderConfig {
        vocab_size: vocab,
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        d_ff: 16,
        max_len: 16,
        dropout: 0.1,
    }
}

pub fn tiny_encoder(seed: u64) -> EncoderModel {
    let mut r = rng::stream(seed, &[777]);
    let mut m = EncoderModel::init(tiny_config(12), &mut r).unwrap();
    // Perturb the layer-norm and bias parameters away from their
    // initial constants so their gradients are exercised generically.
    let mut r2 = rng::stream(seed, &[778]);
    use rand::Rng as _;
    for (name, mut t) in m.tensors_mut() {
        if !name.contains('w') || name.contains("gain") || name.contains("bias") {
            t.mapv_inplace(|v| v + 0.3 * (r2.random::<f64>() - 0.5));
        }
    }
    m
}

/// Loss `Σ C ⊙ out + ½ Σ out²` and its derivative with respect to `out`.
pub fn probe_loss(out: &Array2<f64>, c: &Array2<f64>) -> (f64, Array2<f64>) {
    let loss = (out * c).sum() + 0.5 * out.mapv(|v| v * v).sum();
    (loss, c + out)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    use rand::Rng as _;
    let mut r = rng::stream(seed, &[779]);
    Array2::from_shape_simple_fn((rows, cols), || r.random::<f64>() * 2.0 - 1.0)
}

/// V-measure from a contingency table, with conditional entropies summed
/// cell by cell.
pub fn brute_v_measure(classes: &[usize], clusters: &[usize]) -> f64 {
    let n = classes.len() as f64;
    let nc = classes.iter().max().unwrap() + 1;
    let nk = clusters.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0f64; nk]; nc];
    for (&c, &k) in classes.iter().zip(clusters) {
        table[c][k] += 1.0;
    }
    let class_tot: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let clus_tot: Vec<f64> = (0..nk).map(|k| table.iter().map(|r| r[k]).sum()).collect();
    let h = |tot: &[f64]| -> f64 {
        tot.iter().filter(|&&t| t > 0.0).map(|&t| -(t / n) * (t / n).ln()).sum()
    };
    let (h_c, h_k) = (h(&class_tot), h(&clus_tot));
    let mut h_c_k = 0.0;
    let mut h_k_c = 0.0;
    for c in 0..nc {
        for k in 0..nk {
            let a = table[c][k];
            if a > 0.0 {
                h_c_k -= a / n * (a / clus_tot[k]).ln();
                h_k_c -= a / n * (a / class_tot[c]).ln();
            }
        }
    }
    let hom = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_k / h_c };
    let com = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_c / h_k };
    if hom + com == 0.0 {
        0.0
    } else {
        2.0 * hom * com / (hom + com)
    }
}

/// Macro F1 from a full confusion matrix via precision and recall.
pub fn brute_macro_f1(preds: &[usize], golds: &[usize], k: usize) -> f64 {
    let mut m = vec![vec![0usize; k]; k];
    for (&p, &g) in preds.iter().zip(golds) {
        m[g][p] += 1;
    }
    let mut total = 0.0;
    for c in 0..k {
        let tp = m[c][c] as f64;
        let predicted: usize = (0..k).map(|g| m[g][c]).sum();
        let actual: usize = m[c].iter().sum();
        if tp == 0.0 {
            continue;
        }
        let precision = tp / predicted as f64;
        let recall = tp / actual as f64;
        total += 2.0 * precision * recall / (precision + recall);
    }
    total / k as f64
}

/// Three well-separated Gaussian blobs; returns points and blob ids.
pub fn blobs(per_blob: usize, dim: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    use rand_distr::{Distribution, Normal};
    let mut r = rng::stream(seed, &[780]);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Array2::zeros((3 * per_blob, dim));
    let mut ids = Vec::with_capacity(3 * per_blob);
    for b in 0..3 {
        for i in 0..per_blob {
            let row = b * per_blob + i;
            for d in 0..dim {
                let centre = if d % 3 == b { 10.0 } else { 0.0 };
                x[[row, d]] = centre + noise.sample(&mut r);
            }
            ids.push(b);
        }
    }
    (x, ids)
}
