use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand_distr::{Distribution, Normal};

use super::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::nn::{self, LnCache};
use crate::params::Params;
use crate::rng::Rng;

/// Parameters of one pre-layer-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Block {
    fn zeros(d: usize, ff: usize) -> Self {
        Block {
            ln1_gain: Array1::ones(d),
            ln1_bias: Array1::zeros(d),
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln2_gain: Array1::ones(d),
            ln2_bias: Array1::zeros(d),
            w1: Array2::zeros((d, ff)),
            b1: Array1::zeros(ff),
            w2: Array2::zeros((ff, d)),
            b2: Array1::zeros(d),
        }
    }
}

/// A small bidirectional transformer encoder with learned position
/// embeddings, pre-layer-norm residual blocks and a final layer norm.
///
/// The output bias `mlm_bias` is only used by masked-token pre-training,
/// whose output projection is tied to `token_embedding`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub config: EncoderConfig,
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub blocks: Vec<Block>,
    pub final_gain: Array1<f64>,
    pub final_bias: Array1<f64>,
    pub mlm_bias: Array1<f64>,
}

struct BlockCache {
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2: LnCache,
    h2: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
}

/// Forward intermediates of one sequence, consumed by [`EncoderModel::backward`].
pub struct GradientTape {
    tokens: Vec<u32>,
    embed_mask: Option<Array2<f64>>,
    blocks: Vec<BlockCache>,
    final_ln: LnCache,
    d_model: usize,
}

impl GradientTape {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn add_row(x: &mut Array2<f64>, b: &Array1<f64>) {
    *x += &b.view().insert_axis(Axis(0));
}

impl EncoderModel {
    /// All-zero weights with unit layer-norm gains.
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let (v, d, ff, l) = (config.vocab_size, config.d_model, config.d_ff, config.max_len);
        Ok(EncoderModel {
            token_embedding: Array2::zeros((v, d)),
            position_embedding: Array2::zeros((l, d)),
            blocks: (0..config.n_layers).map(|_| Block::zeros(d, ff)).collect(),
            final_gain: Array1::ones(d),
            final_bias: Array1::zeros(d),
            mlm_bias: Array1::zeros(v),
            config,
        })
    }

    /// Random initialization: embeddings ~ N(0, 0.1²), projections
    /// ~ N(0, 1/fan_in), residual output projections further scaled by
    /// 1/sqrt(2·n_layers).
    pub fn init(config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let d = m.config.d_model as f64;
        let ff = m.config.d_ff as f64;
        let depth = (2.0 * m.config.n_layers as f64).sqrt();
        let mut fill = |a: &mut Array2<f64>, std: f64| {
            let n = Normal::new(0.0, std).expect("positive std");
            a.mapv_inplace(|_| n.sample(rng));
        };
        fill(&mut m.token_embedding, 0.1);
        fill(&mut m.position_embedding, 0.1);
        for b in &mut m.blocks {
            fill(&mut b.wq, 1.0 / d.sqrt());
            fill(&mut b.wk, 1.0 / d.sqrt());
            fill(&mut b.wv, 1.0 / d.sqrt());
            fill(&mut b.wo, 1.0 / d.sqrt() / depth);
            fill(&mut b.w1, 1.0 / d.sqrt());
            fill(&mut b.w2, 1.0 / ff.sqrt() / depth);
        }
        Ok(m)
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    fn check_input(&self, tokens: &[u32]) -> Result<()> {
        if tokens.len() > self.config.max_len {
            return Err(Error::invalid(format!(
                "sequence of {} tokens exceeds max length {}",
                tokens.len(),
                self.config.max_len
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::invalid(format!(
                "token id {t} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Final-layer embeddings, one row per token, with dropout off.
    pub fn encode(&self, tokens: &[u32]) -> Result<Array2<f64>> {
        self.forward(tokens, None).map(|(out, _)| out)
    }

    /// Embedding of position 0 (CLS-style pooling).
    pub fn text_embedding(&self, tokens: &[u32]) -> Result<Array1<f64>> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot pool an empty sequence"));
        }
        Ok(self.encode(tokens)?.row(0).to_owned())
    }

    /// Runs the encoder and records what backward needs. Passing an RNG turns
    /// on dropout (embedding sum, attention output, feed-forward output).
    pub fn forward(&self, tokens: &[u32], mut dropout: Option<&mut Rng>) -> Result<(Array2<f64>, GradientTape)> {
        self.check_input(tokens)?;
        let cfg = &self.config;
        let (t, d) = (tokens.len(), cfg.d_model);
        let rate = cfg.dropout;
        let mut mask = |rows: usize, cols: usize| -> Option<Array2<f64>> {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => Some(nn::dropout_mask(rows, cols, rate, rng)),
                _ => None,
            }
        };

        let mut x = Array2::zeros((t, d));
        for (i, &tok) in tokens.iter().enumerate() {
            let mut row = x.row_mut(i);
            row += &self.token_embedding.row(tok as usize);
            row += &self.position_embedding.row(i);
        }
        let embed_mask = mask(t, d);
        nn::apply_mask(&mut x, &embed_mask);

        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (h1, ln1) = nn::layer_norm(&x, &b.ln1_gain, &b.ln1_bias);
            let mut q = h1.dot(&b.wq);
            add_row(&mut q, &b.bq);
            let mut k = h1.dot(&b.wk);
            add_row(&mut k, &b.bk);
            let mut v = h1.dot(&b.wv);
            add_row(&mut v, &b.bv);
            let mut context = Array2::zeros((t, d));
            let mut probs = Vec::with_capacity(cfg.n_heads);
            for h in 0..cfg.n_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut p = q.slice(cols).dot(&k.slice(cols).t());
                p *= scale;
                nn::softmax_rows(&mut p);
                context.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
                probs.push(p);
            }
            let mut attn = context.dot(&b.wo);
            add_row(&mut attn, &b.bo);
            let attn_mask = mask(t, d);
            nn::apply_mask(&mut attn, &attn_mask);
            x += &attn;

            let (h2, ln2) = nn::layer_norm(&x, &b.ln2_gain, &b.ln2_bias);
            let mut pre_act = h2.dot(&b.w1);
            add_row(&mut pre_act, &b.b1);
            let act = pre_act.mapv(nn::gelu);
            let mut ffn = act.dot(&b.w2);
            add_row(&mut ffn, &b.b2);
            let ffn_mask = mask(t, d);
            nn::apply_mask(&mut ffn, &ffn_mask);
            x += &ffn;

            caches.push(BlockCache {
                ln1,
                h1,
                q,
                k,
                v,
                probs,
                context,
                attn_mask,
                ln2,
                h2,
                pre_act,
                act,
                ffn_mask,
            });
        }
        let (out, final_ln) = nn::layer_norm(&x, &self.final_gain, &self.final_bias);
        Ok((
            out,
            GradientTape {
                tokens: tokens.to_vec(),
                embed_mask,
                blocks: caches,
                final_ln,
                d_model: d,
            },
        ))
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the encoder output is `d_out`. The tape is consumed.
    pub fn backward(&self, tape: GradientTape, d_out: &Array2<f64>, grads: &mut EncoderModel) -> Result<()> {
        let t = tape.tokens.len();
        if d_out.dim() != (t, self.config.d_model)
            || tape.d_model != self.config.d_model
            || tape.blocks.len() != self.blocks.len()
        {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match tape of {t} tokens x {}",
                d_out.dim(),
                tape.d_model
            )));
        }
        let cfg = &self.config;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut dx = nn::layer_norm_backward(
            d_out,
            &tape.final_ln,
            &self.final_gain,
            &mut grads.final_gain,
            &mut grads.final_bias,
        );
        for ((b, g), c) in self.blocks.iter().zip(grads.blocks.iter_mut()).zip(tape.blocks).rev() {
            // feed-forward branch
            let mut d_ffn = dx.clone();
            nn::apply_mask(&mut d_ffn, &c.ffn_mask);
            g.w2 += &c.act.t().dot(&d_ffn);
            g.b2 += &d_ffn.sum_axis(Axis(0));
            let mut d_pre = d_ffn.dot(&b.w2.t());
            d_pre.zip_mut_with(&c.pre_act, |dz, &z| *dz *= nn::gelu_grad(z));
            g.w1 += &c.h2.t().dot(&d_pre);
            g.b1 += &d_pre.sum_axis(Axis(0));
            let d_h2 = d_pre.dot(&b.w1.t());
            dx += &nn::layer_norm_backward(&d_h2, &c.ln2, &b.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);

            // attention branch
            let mut d_attn = dx.clone();
            nn::apply_mask(&mut d_attn, &c.attn_mask);
            g.wo += &c.context.t().dot(&d_attn);
            g.bo += &d_attn.sum_axis(Axis(0));
            let d_context = d_attn.dot(&b.wo.t());
            let mut dq = Array2::zeros((t, cfg.d_model));
            let mut dk = Array2::zeros((t, cfg.d_model));
            let mut dv = Array2::zeros((t, cfg.d_model));
            for (h, p) in c.probs.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let d_ctx = d_context.slice(cols);
                let d_p = d_ctx.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&p.t().dot(&d_ctx));
                let mut d_scores = d_p;
                for (mut ds, pr) in d_scores.axis_iter_mut(Axis(0)).zip(p.axis_iter(Axis(0))) {
                    let dot: f64 = ds.iter().zip(pr.iter()).map(|(a, b)| a * b).sum();
                    ds.zip_mut_with(&pr, |x, &pi| *x = pi * (*x - dot) * scale);
                }
                dq.slice_mut(cols).assign(&d_scores.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&d_scores.t().dot(&c.q.slice(cols)));
            }
            g.wq += &c.h1.t().dot(&dq);
            g.bq += &dq.sum_axis(Axis(0));
            g.wk += &c.h1.t().dot(&dk);
            g.bk += &dk.sum_axis(Axis(0));
            g.wv += &c.h1.t().dot(&dv);
            g.bv += &dv.sum_axis(Axis(0));
            let mut d_h1 = dq.dot(&b.wq.t());
            d_h1 += &dk.dot(&b.wk.t());
            d_h1 += &dv.dot(&b.wv.t());
            dx += &nn::layer_norm_backward(&d_h1, &c.ln1, &b.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
        }

        nn::apply_mask(&mut dx, &tape.embed_mask);
        for (i, &tok) in tape.tokens.iter().enumerate() {
            let row = dx.row(i);
            let mut te = grads.token_embedding.row_mut(tok as usize);
            te += &row;
            let mut pe = grads.position_embedding.row_mut(i);
            pe += &row;
        }
        Ok(())
    }

    /// Zero-valued gradient container with this model's shapes.
    pub fn zeros_like(&self) -> EncoderModel {
        let mut g = self.clone();
        g.fill_zero();
        g
    }
}

impl Params for EncoderModel {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("token_embedding".to_string(), self.token_embedding.view().into_dyn()),
            ("position_embedding".to_string(), self.position_embedding.view().into_dyn()),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            let p = |n: &str| format!("blocks.{i}.{n}");
            out.extend([
                (p("ln1_gain"), b.ln1_gain.view().into_dyn()),
                (p("ln1_bias"), b.ln1_bias.view().into_dyn()),
                (p("wq"), b.wq.view().into_dyn()),
                (p("bq"), b.bq.view().into_dyn()),
                (p("wk"), b.wk.view().into_dyn()),
                (p("bk"), b.bk.view().into_dyn()),
                (p("wv"), b.wv.view().into_dyn()),
                (p("bv"), b.bv.view().into_dyn()),
                (p("wo"), b.wo.view().into_dyn()),
                (p("bo"), b.bo.view().into_dyn()),
                (p("ln2_gain"), b.ln2_gain.view().into_dyn()),
                (p("ln2_bias"), b.ln2_bias.view().into_dyn()),
                (p("w1"), b.w1.view().into_dyn()),
                (p("b1"), b.b1.view().into_dyn()),
                (p("w2"), b.w2.view().into_dyn()),
                (p("b2"), b.b2.view().into_dyn()),
            ]);
        }
        out.extend([
            ("final_gain".to_string(), self.final_gain.view().into_dyn()),
            ("final_bias".to_string(), self.final_bias.view().into_dyn()),
            ("mlm_bias".to_string(), self.mlm_bias.view().into_dyn()),
        ]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("token_embedding".to_string(), self.token_embedding.view_mut().into_dyn()),
            ("position_embedding".to_string(), self.position_embedding.view_mut().into_dyn()),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let p = |n: &str| format!("blocks.{i}.{n}");
            out.extend([
                (p("ln1_gain"), b.ln1_gain.view_mut().into_dyn()),
                (p("ln1_bias"), b.ln1_bias.view_mut().into_dyn()),
                (p("wq"), b.wq.view_mut().into_dyn()),
                (p("bq"), b.bq.view_mut().into_dyn()),
                (p("wk"), b.wk.view_mut().into_dyn()),
                (p("bk"), b.bk.view_mut().into_dyn()),
                (p("wv"), b.wv.view_mut().into_dyn()),
                (p("bv"), b.bv.view_mut().into_dyn()),
                (p("wo"), b.wo.view_mut().into_dyn()),
                (p("bo"), b.bo.view_mut().into_dyn()),
                (p("ln2_gain"), b.ln2_gain.view_mut().into_dyn()),
                (p("ln2_bias"), b.ln2_bias.view_mut().into_dyn()),
                (p("w1"), b.w1.view_mut().into_dyn()),
                (p("b1"), b.b1.view_mut().into_dyn()),
                (p("w2"), b.w2.view_mut().into_dyn()),
                (p("b2"), b.b2.view_mut().into_dyn()),
            ]);
        }
        out.extend([
            ("final_gain".to_string(), self.final_gain.view_mut().into_dyn()),
            ("final_bias".to_string(), self.final_bias.view_mut().into_dyn()),
            ("mlm_bias".to_string(), self.mlm_bias.view_mut().into_dyn()),
        ]);
        out
    }
}
