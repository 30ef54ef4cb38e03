use crate::error::{Error, Result};
use crate::params::Params;

/// Adam moment estimates for one parameter container.
#[derive(Debug, Clone)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<P: Params + Clone> AdamState<P> {
    /// Fresh state with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(params: &P) -> Self {
        let mut m = params.clone();
        m.fill_zero();
        AdamState {
            v: m.clone(),
            m,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients abort before any
/// parameter is touched.
pub fn adam_step<P: Params>(params: &mut P, grads: &P, state: &mut AdamState<P>, lr: f64) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let g = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in params.tensors_mut().into_iter().zip(g).zip(m).zip(v) {
        ndarray::Zip::from(&mut p)
            .and(&g)
            .and(&mut m)
            .and(&mut v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
    }
    Ok(())
}
