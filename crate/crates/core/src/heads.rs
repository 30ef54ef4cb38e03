//! Single-layer softmax classifiers, their losses, and the gradient-reversal
//! layer.

use ndarray::{Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::params::Params;
use crate::rng::Rng;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Affine map `x · weight + bias` followed by a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `d_model × n_classes`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ClassifierHead {
    pub fn zeros(d_model: usize, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid(format!("a classifier needs at least 2 classes, got {n_classes}")));
        }
        if d_model == 0 {
            return Err(Error::invalid("classifier input dimension must be at least 1"));
        }
        Ok(ClassifierHead {
            weight: Array2::zeros((d_model, n_classes)),
            bias: Array1::zeros(n_classes),
        })
    }

    /// Every weight and bias drawn from N(0, init_std²).
    pub fn init(d_model: usize, n_classes: usize, init_std: f64, rng: &mut Rng) -> Result<Self> {
        let mut head = Self::zeros(d_model, n_classes)?;
        let normal = Normal::new(0.0, init_std)
            .map_err(|_| Error::invalid(format!("invalid init stddev {init_std}")))?;
        head.weight.mapv_inplace(|_| normal.sample(rng));
        head.bias.mapv_inplace(|_| normal.sample(rng));
        Ok(head)
    }

    pub fn d_model(&self) -> usize {
        self.weight.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    fn check(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.d_model() {
            return Err(Error::Shape(format!(
                "embedding of dimension {} fed to a head expecting {}",
                x.len(),
                self.d_model()
            )));
        }
        Ok(())
    }

    pub fn logits(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check(x)?;
        Ok(x.dot(&self.weight) + &self.bias)
    }

    /// Logits for each row of `x`.
    pub fn logits_rows(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.d_model() {
            return Err(Error::Shape(format!(
                "embeddings of dimension {} fed to a head expecting {}",
                x.ncols(),
                self.d_model()
            )));
        }
        Ok(x.dot(&self.weight) + &self.bias.view().insert_axis(Axis(0)))
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Result<usize> {
        Ok(argmax(self.logits(x)?.view()))
    }

    /// Accumulates parameter gradients for one input and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, x: ArrayView1<f64>, d_logits: ArrayView1<f64>, grads: &mut ClassifierHead) -> Array1<f64> {
        for (i, &xi) in x.iter().enumerate() {
            grads.weight.row_mut(i).scaled_add(xi, &d_logits);
        }
        grads.bias += &d_logits;
        self.weight.dot(&d_logits)
    }
}

impl Params for ClassifierHead {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("weight".to_string(), self.weight.view().into_dyn()),
            ("bias".to_string(), self.bias.view().into_dyn()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("weight".to_string(), self.weight.view_mut().into_dyn()),
            ("bias".to_string(), self.bias.view_mut().into_dyn()),
        ]
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities for one embedding.
pub fn head_forward(head: &ClassifierHead, embedding: ArrayView1<f64>) -> Result<Array1<f64>> {
    Ok(nn::softmax(head.logits(embedding)?.view()))
}

fn check_class(n: usize, gold: usize) -> Result<()> {
    if gold >= n {
        return Err(Error::invalid(format!("gold class {gold} out of range for {n} classes")));
    }
    Ok(())
}

/// `−ln p[gold]`, with `p[gold]` floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: ArrayView1<f64>, gold: usize) -> Result<f64> {
    check_class(probs.len(), gold)?;
    Ok(-probs[gold].max(PROB_FLOOR).ln())
}

/// Cross-entropy from logits via log-sum-exp, with its logit gradient
/// `softmax(z) − onehot(gold)`.
pub fn cross_entropy_logits(logits: ArrayView1<f64>, gold: usize) -> Result<(f64, Array1<f64>)> {
    check_class(logits.len(), gold)?;
    let logp = nn::log_softmax(logits);
    let loss = -logp[gold].max(PROB_FLOOR.ln());
    let mut grad = logp.mapv(f64::exp);
    grad[gold] -= 1.0;
    Ok((loss, grad))
}

/// Strength of the gradient-reversal layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradReversalConfig {
    pub lambda: f64,
}

impl GradReversalConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        Ok(GradReversalConfig { lambda })
    }
}

/// Identity.
pub fn grad_reversal_forward(x: ArrayView1<f64>) -> Array1<f64> {
    x.to_owned()
}

/// `−λ · g`.
pub fn grad_reversal_backward(upstream: ArrayView1<f64>, lambda: f64) -> Array1<f64> {
    upstream.mapv(|g| -lambda * g)
}

/// Form of the language-confusion term in the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LanguageTerm {
    /// `−Σ_k ln y_b[k]`, minimized at the uniform distribution with value `K ln K`.
    #[default]
    SumNegLog,
    /// Negative Shannon entropy `Σ_k y_b[k] ln y_b[k]`, minimized at `−ln K`.
    Shannon,
}

/// Weight of the language term in the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyLossConfig {
    pub w: f64,
    #[serde(default)]
    pub term: LanguageTerm,
}

impl EntropyLossConfig {
    pub fn new(w: f64, term: LanguageTerm) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid(format!("w must lie in [0, 1], got {w}")));
        }
        Ok(EntropyLossConfig { w, term })
    }
}

/// Value of the language term for a probability vector.
pub fn language_term(probs: ArrayView1<f64>, term: LanguageTerm) -> f64 {
    match term {
        LanguageTerm::SumNegLog => -probs.iter().map(|p| p.max(PROB_FLOOR).ln()).sum::<f64>(),
        LanguageTerm::Shannon => probs.iter().map(|&p| p * p.max(PROB_FLOOR).ln()).sum(),
    }
}

/// Gradient of [`language_term`] with respect to the logits that produced `probs`.
pub fn language_term_logit_grad(probs: ArrayView1<f64>, term: LanguageTerm) -> Array1<f64> {
    match term {
        LanguageTerm::SumNegLog => {
            let k = probs.len() as f64;
            probs.mapv(|p| k * p - 1.0)
        }
        LanguageTerm::Shannon => {
            let neg_h = language_term(probs, LanguageTerm::Shannon);
            probs.mapv(|p| p * (p.max(PROB_FLOOR).ln() - neg_h))
        }
    }
}

/// `(1 − w) · XE(y_a, gold) + w · (−Σ_k ln y_b[k])`.
pub fn entropy_max_loss(task_probs: ArrayView1<f64>, gold: usize, language_probs: ArrayView1<f64>, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("w must lie in [0, 1], got {w}")));
    }
    let xe = cross_entropy(task_probs, gold)?;
    Ok((1.0 - w) * xe + w * language_term(language_probs, LanguageTerm::SumNegLog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn known_values() {
        let p = array![0.7, 0.2, 0.1];
        assert!((cross_entropy(p.view(), 0).unwrap() - 0.356_674_943_938_732_4).abs() < 1e-12);
        let u = Array1::from_elem(3, 1.0 / 3.0);
        assert!((cross_entropy(u.view(), 2).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(array![1.0, 0.0].view(), 0).unwrap(), 0.0);
        assert!((cross_entropy(array![1.0, 0.0].view(), 1).unwrap() - 1e12f64.ln()).abs() < 1e-9);
        assert!(cross_entropy(p.view(), 3).is_err());
    }

    #[test]
    fn logits_loss_matches_probability_loss() {
        let z = array![0.3, -1.2, 2.0, 0.0];
        let (l, _) = cross_entropy_logits(z.view(), 1).unwrap();
        let p = nn::softmax(z.view());
        assert!((l - cross_entropy(p.view(), 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_head_is_uniform() {
        let h = ClassifierHead::zeros(4, 5).unwrap();
        let p = head_forward(&h, array![1.0, 2.0, 3.0, 4.0].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!(head_forward(&h, array![1.0].view()).is_err());
        assert!(ClassifierHead::zeros(4, 1).is_err());
    }

    #[test]
    fn reversal() {
        let x = array![1.0, -2.0];
        assert_eq!(grad_reversal_forward(x.view()), x);
        assert_eq!(grad_reversal_backward(x.view(), 0.5), array![-0.5, 1.0]);
        assert!(grad_reversal_backward(x.view(), 0.0).iter().all(|&v| v == 0.0));
        assert!(GradReversalConfig::new(-0.1).is_err());
    }

    #[test]
    fn entropy_loss_values() {
        let u = Array1::from_elem(3, 1.0 / 3.0);
        let ya = array![0.5, 0.5];
        assert!((entropy_max_loss(ya.view(), 0, u.view(), 1.0).unwrap() - 3.0 * 3f64.ln()).abs() < 1e-12);
        assert_eq!(
            entropy_max_loss(ya.view(), 0, u.view(), 0.0).unwrap(),
            cross_entropy(ya.view(), 0).unwrap()
        );
        // XE(y_a) = 1 when y_a[gold] = e^-1
        let e1 = (-1f64).exp();
        let ya = array![e1, 1.0 - e1];
        let yb = array![0.98, 0.01, 0.01];
        let term = -(0.98f64.ln() + 2.0 * 0.01f64.ln());
        assert!((term - 9.2305).abs() < 1e-4);
        let l = entropy_max_loss(ya.view(), 0, yb.view(), 0.5).unwrap();
        assert!((l - 0.5 * (1.0 + term)).abs() < 1e-12);
        assert!((l - 5.1152).abs() < 1e-4);
        assert!(entropy_max_loss(ya.view(), 0, yb.view(), 1.5).is_err());
    }

    #[test]
    fn language_term_gradients_match_finite_differences() {
        let z = array![0.4, -0.3, 1.1, 0.0, -2.0];
        for term in [LanguageTerm::SumNegLog, LanguageTerm::Shannon] {
            let g = language_term_logit_grad(nn::softmax(z.view()).view(), term);
            for j in 0..z.len() {
                let h = 1e-6;
                let mut zp = z.clone();
                zp[j] += h;
                let mut zm = z.clone();
                zm[j] -= h;
                let fd = (language_term(nn::softmax(zp.view()).view(), term)
                    - language_term(nn::softmax(zm.view()).view(), term))
                    / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-7, "{term:?} {j}: {fd} vs {}", g[j]);
            }
        }
    }
}
