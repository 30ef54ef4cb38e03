mod common;

use ndarray::{array, Array1};
use polyprobe::heads::{
    cross_entropy, cross_entropy_logits, entropy_max_loss, grad_reversal_backward, grad_reversal_forward,
    head_forward, language_term, ClassifierHead, EntropyLossConfig, GradReversalConfig, LanguageTerm,
};
use polyprobe::params::Params;
use polyprobe::rng;
use proptest::prelude::*;

#[test]
fn zero_head_is_uniform() {
    let head = ClassifierHead::zeros(4, 3).unwrap();
    let p = head_forward(&head, array![1.0, -2.0, 0.5, 7.0].view()).unwrap();
    for v in p {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn cross_entropy_reference_values() {
    assert_eq!(cross_entropy(array![1.0, 0.0, 0.0].view(), 0).unwrap(), 0.0);
    let u = Array1::from_elem(3, 1.0 / 3.0);
    assert!((cross_entropy(u.view(), 1).unwrap() - 3f64.ln()).abs() < 1e-12);
    assert!((cross_entropy(array![0.7, 0.2, 0.1].view(), 0).unwrap() - (1.0f64 / 0.7).ln()).abs() < 1e-12);
}

#[test]
fn grad_reversal_is_identity_forward_and_negated_backward() {
    let x = array![1.0, -2.0];
    assert_eq!(grad_reversal_forward(x.view()), x);
    assert_eq!(grad_reversal_backward(x.view(), 0.5), array![-0.5, 1.0]);
    assert!(GradReversalConfig::new(-0.1).is_err());
    assert!(GradReversalConfig::new(f64::NAN).is_err());
}

#[test]
fn entropy_max_reference_values() {
    let task = array![0.7, 0.2, 0.1];
    let u = Array1::from_elem(3, 1.0 / 3.0);
    // w = 0 reduces to cross-entropy.
    let l = entropy_max_loss(task.view(), 0, u.view(), 0.0).unwrap();
    assert_eq!(l, cross_entropy(task.view(), 0).unwrap());
    // Uniform language output at w = 1 gives K ln K.
    let l = entropy_max_loss(task.view(), 0, u.view(), 1.0).unwrap();
    assert!((l - 3.0 * 3f64.ln()).abs() < 1e-12);
    // A peaked language output costs more.
    let peaked = array![0.8, 0.1, 0.1];
    let l = entropy_max_loss(task.view(), 0, peaked.view(), 1.0).unwrap();
    let oracle = -(0.8f64.ln() + 2.0 * 0.1f64.ln());
    assert!((l - oracle).abs() < 1e-12);
    assert!((oracle - 4.828313737).abs() < 1e-9);
    let l = entropy_max_loss(task.view(), 0, peaked.view(), 0.5).unwrap();
    assert!((l - 0.5 * ((1.0f64 / 0.7).ln() + oracle)).abs() < 1e-12);
    // XE of exactly 1 with a near-one-hot language output.
    let task = array![(-1.0f64).exp(), 1.0 - (-1.0f64).exp()];
    let skewed = array![0.98, 0.01, 0.01];
    let term = -(0.98f64.ln() + 2.0 * 0.01f64.ln());
    let l = entropy_max_loss(task.view(), 0, skewed.view(), 0.5).unwrap();
    assert!((l - 0.5 * (1.0 + term)).abs() < 1e-12);
    assert!((term - 9.2305).abs() < 1e-4 && (l - 5.1152).abs() < 1e-4);
    assert!(entropy_max_loss(task.view(), 0, u.view(), 1.5).is_err());
    assert!(EntropyLossConfig::new(-0.1, LanguageTerm::SumNegLog).is_err());
}

#[test]
fn shannon_term_is_minimal_at_uniform() {
    let u = Array1::from_elem(4, 0.25);
    assert!((language_term(u.view(), LanguageTerm::Shannon) + 4f64.ln()).abs() < 1e-12);
    assert!(language_term(array![0.7, 0.1, 0.1, 0.1].view(), LanguageTerm::Shannon) > -4f64.ln());
}

#[test]
fn head_and_cross_entropy_gradient_matches_finite_differences() {
    let mut r = rng::stream(3, &[]);
    let head = ClassifierHead::init(6, 4, 0.5, &mut r).unwrap();
    let x = common::random_matrix(1, 6, 4).row(0).to_owned();
    let loss = |h: &ClassifierHead| cross_entropy_logits(h.logits(x.view()).unwrap().view(), 2).unwrap().0;
    let (_, d) = cross_entropy_logits(head.logits(x.view()).unwrap().view(), 2).unwrap();
    let mut grads = ClassifierHead::zeros(6, 4).unwrap();
    let dx = head.backward(x.view(), d.view(), &mut grads);
    let (err, at) = common::fd_max_rel_error(&head, &grads, 100, loss);
    assert!(err < 1e-6, "{err} at {at}");
    // Input gradient too.
    for i in 0..6 {
        let mut xp = x.clone();
        xp[i] += 1e-5;
        let mut xm = x.clone();
        xm[i] -= 1e-5;
        let f = |v: &Array1<f64>| cross_entropy_logits(head.logits(v.view()).unwrap().view(), 2).unwrap().0;
        let num = (f(&xp) - f(&xm)) / 2e-5;
        assert!((num - dx[i]).abs() <= 1e-6 * num.abs().max(1e-3));
    }
}

#[test]
fn init_matches_requested_distribution() {
    let std = 0.02;
    let head = ClassifierHead::init(1000, 100, std, &mut rng::stream(9, &[])).unwrap();
    let values: Vec<f64> = head.tensors().iter().flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>()).collect();
    let n = values.len() as f64;
    assert!(n >= 1e5);
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 3.0 * std / n.sqrt(), "mean {mean}");
    // Standard error of the sample variance is about σ²√(2/n).
    assert!((var - std * std).abs() < 3.0 * std * std * (2.0 / n).sqrt(), "var {var}");
}

#[test]
fn degenerate_heads_are_rejected() {
    assert!(ClassifierHead::zeros(4, 1).is_err());
    assert!(ClassifierHead::zeros(0, 3).is_err());
    let head = ClassifierHead::zeros(4, 3).unwrap();
    assert!(head.logits(array![1.0, 2.0].view()).is_err());
    assert!(cross_entropy(array![0.5, 0.5].view(), 2).is_err());
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(xs in prop::collection::vec(-50.0f64..50.0, 5), seed in 0u64..1000) {
        let head = ClassifierHead::init(5, 4, 3.0, &mut rng::stream(seed, &[])).unwrap();
        let p = head_forward(&head, Array1::from(xs).view()).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn softmax_is_shift_invariant(z in prop::collection::vec(-30.0f64..30.0, 2..8), c in -100.0f64..100.0) {
        let z = Array1::from(z);
        let a = polyprobe::nn::softmax(z.view());
        let b = polyprobe::nn::softmax(z.mapv(|v| v + c).view());
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_from_logits_agrees(z in prop::collection::vec(-20.0f64..20.0, 3), gold in 0usize..3) {
        let z = Array1::from(z);
        let (l, g) = cross_entropy_logits(z.view(), gold).unwrap();
        let p = polyprobe::nn::softmax(z.view());
        prop_assert!((l - cross_entropy(p.view(), gold).unwrap()).abs() < 1e-9);
        prop_assert!(g.sum().abs() < 1e-12);
        prop_assert!(l >= 0.0);
    }

    #[test]
    fn language_term_is_at_least_k_ln_k(z in prop::collection::vec(-10.0f64..10.0, 2..7)) {
        let p = polyprobe::nn::softmax(Array1::from(z).view());
        let k = p.len() as f64;
        prop_assert!(language_term(p.view(), LanguageTerm::SumNegLog) >= k * k.ln() - 1e-9);
    }
}
