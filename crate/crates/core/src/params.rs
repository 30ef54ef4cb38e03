//! Uniform access to named parameter tensors, shared by the encoder, the
//! classifier heads, the optimizer and the checkpoint format.

use ndarray::{ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A model whose parameters can be enumerated as named tensors in a fixed order.
///
/// The same type doubles as its own gradient container: a gradient is a value
/// of the model type whose tensors hold partial derivatives.
pub trait Params {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)>;
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)>;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn fill_zero(&mut self) {
        for (_, mut t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        for ((_, mut dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(scale, &src);
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Hex SHA-256 over names, shapes and the exact bit patterns of every value.
    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.tensors() {
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn to_records(&self) -> Vec<TensorRecord> {
        self.tensors()
            .into_iter()
            .map(|(name, t)| TensorRecord {
                name,
                shape: t.shape().to_vec(),
                data: t.iter().copied().collect(),
            })
            .collect()
    }

    /// Overwrites every tensor from `records`, which must match names and
    /// shapes one to one.
    fn load_records(&mut self, records: &[TensorRecord]) -> Result<()> {
        let tensors = self.tensors_mut();
        if tensors.len() != records.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                tensors.len(),
                records.len()
            )));
        }
        for ((name, mut t), rec) in tensors.into_iter().zip(records) {
            if name != rec.name || t.shape() != rec.shape.as_slice() || rec.data.len() != t.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {:?} does not match record {} {:?}",
                    t.shape(),
                    rec.name,
                    rec.shape
                )));
            }
            for (dst, &src) in t.iter_mut().zip(&rec.data) {
                *dst = src;
            }
        }
        Ok(())
    }
}

/// One named tensor in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Largest absolute difference between corresponding values.
pub fn max_abs_diff<P: Params>(a: &P, b: &P) -> f64 {
    let mut max = 0.0f64;
    for ((_, x), (_, y)) in a.tensors().iter().zip(b.tensors()) {
        for (p, q) in x.iter().zip(y.iter()) {
            max = max.max((p - q).abs());
        }
    }
    max
}
