mod common;

use common::*;
use ndarray::Array2;
use polyprobe::encoder::{masked_token_accuracy, mlm_pretrain, EncoderConfig, EncoderModel, MlmConfig};
use polyprobe::params::Params;
use polyprobe::data::TokenSequence;
use polyprobe::rng;

const TOKENS: [u32; 6] = [5, 9, 2, 4, 11, 7];

#[test]
fn encoder_gradients_match_finite_differences() {
    let model = tiny_encoder(1);
    let c = random_matrix(TOKENS.len(), 8, 2);
    let mut grads = model.zeros_like();
    let (out, tape) = model.forward(&TOKENS, None).unwrap();
    let (_, d_out) = probe_loss(&out, &c);
    model.backward(tape, &d_out, &mut grads).unwrap();
    let (err, at) = fd_max_rel_error(&model, &grads, 6, |m: &EncoderModel| {
        probe_loss(&m.encode(&TOKENS).unwrap(), &c).0
    });
    assert!(err <= 1e-4, "relative error {err} at {at}");
}

#[test]
fn encoder_gradients_with_dropout_match_finite_differences() {
    let model = tiny_encoder(3);
    let c = random_matrix(TOKENS.len(), 8, 4);
    let mut grads = model.zeros_like();
    let (out, tape) = model.forward(&TOKENS, Some(&mut rng::stream(9, &[]))).unwrap();
    let (_, d_out) = probe_loss(&out, &c);
    model.backward(tape, &d_out, &mut grads).unwrap();
    let (err, at) = fd_max_rel_error(&model, &grads, 6, |m: &EncoderModel| {
        let (out, _) = m.forward(&TOKENS, Some(&mut rng::stream(9, &[]))).unwrap();
        probe_loss(&out, &c).0
    });
    assert!(err <= 1e-4, "relative error {err} at {at}");
}

#[test]
fn zero_upstream_gives_zero_gradients_and_scaling_is_linear() {
    let model = tiny_encoder(5);
    let mut g0 = model.zeros_like();
    let (out, tape) = model.forward(&TOKENS, None).unwrap();
    model.backward(tape, &Array2::zeros(out.dim()), &mut g0).unwrap();
    assert!(g0.tensors().iter().all(|(_, t)| t.iter().all(|&v| v == 0.0)));

    let c = random_matrix(TOKENS.len(), 8, 6);
    let mut g1 = model.zeros_like();
    let mut g2 = model.zeros_like();
    let (_, tape) = model.forward(&TOKENS, None).unwrap();
    model.backward(tape, &c, &mut g1).unwrap();
    let (_, tape) = model.forward(&TOKENS, None).unwrap();
    model.backward(tape, &(&c * 2.0), &mut g2).unwrap();
    for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn backward_rejects_mismatched_upstream() {
    let model = tiny_encoder(7);
    let mut g = model.zeros_like();
    let (_, tape) = model.forward(&TOKENS, None).unwrap();
    assert!(model.backward(tape, &Array2::zeros((3, 8)), &mut g).is_err());
}

#[test]
fn shapes_determinism_and_input_errors() {
    let model = tiny_encoder(8);
    for len in 1..=16 {
        let toks: Vec<u32> = (0..len).map(|i| (i % 12) as u32).collect();
        assert_eq!(model.encode(&toks).unwrap().dim(), (len, 8));
    }
    let a = model.encode(&TOKENS[..5]).unwrap();
    let b = model.encode(&TOKENS[..5]).unwrap();
    assert_eq!(a, b);
    assert_eq!(model.text_embedding(&TOKENS).unwrap(), model.encode(&TOKENS).unwrap().row(0));
    assert!(model.text_embedding(&[]).is_err());
    assert!(model.encode(&[12]).is_err());
    assert!(model.encode(&[4; 17]).is_err());
}

#[test]
fn changing_one_token_changes_every_position() {
    let cfg = EncoderConfig { dropout: 0.0, ..EncoderConfig::with_vocab(40) };
    let model = EncoderModel::init(cfg, &mut rng::stream(11, &[])).unwrap();
    let x = [4u32, 5, 6, 7, 8, 9];
    let mut y = x;
    y[3] = 20;
    let (a, b) = (model.encode(&x).unwrap(), model.encode(&y).unwrap());
    for i in 0..x.len() {
        assert_ne!(a.row(i), b.row(i), "position {i} unaffected");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = EncoderConfig { n_heads: 3, ..EncoderConfig::with_vocab(10) };
    assert!(EncoderModel::zeros(bad).is_err());
    assert!(EncoderModel::zeros(EncoderConfig::with_vocab(0)).is_err());
}

#[test]
fn zero_steps_leave_model_unchanged() {
    let model = tiny_encoder(12);
    let seq = vec![TokenSequence::single(TOKENS.to_vec(), 16)];
    let run = mlm_pretrain(model.clone(), &seq, &MlmConfig { steps: 0, ..MlmConfig::default() }).unwrap();
    assert_eq!(run.model, model);
    assert!(run.loss_curve.is_empty());
    assert!(mlm_pretrain(model, &seq, &MlmConfig { mask_rate: 1.0, ..MlmConfig::default() }).is_err());
}

#[test]
fn memorizes_a_repeated_sentence() {
    let cfg = EncoderConfig { d_model: 32, n_heads: 4, d_ff: 64, ..EncoderConfig::with_vocab(30) };
    let model = EncoderModel::init(cfg, &mut rng::stream(13, &[])).unwrap();
    let seq = vec![TokenSequence::single(vec![4, 17, 9, 22, 5, 13, 28, 6], 128)];
    let run = mlm_pretrain(
        model,
        &seq,
        &MlmConfig { steps: 500, batch_size: 4, learning_rate: 3e-3, ..MlmConfig::default() },
    )
    .unwrap();
    let acc = masked_token_accuracy(&run.model, &seq).unwrap();
    assert!(acc > 0.9, "accuracy {acc}");
    let head: f64 = run.loss_curve[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = run.loss_curve[480..].iter().sum::<f64>() / 20.0;
    assert!(tail < head);
}

#[test]
fn output_dropout_is_unbiased() {
    // Monte Carlo mean of the masked encoder output against the eval-mode
    // output, entry by entry, within 4 standard errors.
    let model = common::tiny_encoder(3);
    let clean = model.encode(&[4, 5, 6, 7]).unwrap();
    let rate = 0.1;
    let n = 20_000;
    let mut r = rng::stream(0, &[]);
    let mut sum = Array2::<f64>::zeros(clean.dim());
    for _ in 0..n {
        sum += &(&clean * &polyprobe::nn::dropout_mask(clean.nrows(), clean.ncols(), rate, &mut r));
    }
    let mean = sum / n as f64;
    let spread = (rate / (1.0 - rate)).sqrt() / (n as f64).sqrt();
    for (m, c) in mean.iter().zip(clean.iter()) {
        assert!((m - c).abs() <= 4.0 * spread * c.abs() + 1e-12, "{m} vs {c}");
    }
}
