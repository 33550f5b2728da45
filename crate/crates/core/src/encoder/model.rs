use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ops::{
    column_sums, dropout_mask, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, sinusoidal_pe,
    softmax_rows, Rotary,
};
use super::{Batch, EncoderConfig, LayerParams, Mode, ModelParams, Scalar};
use crate::error::{Error, Result};

/// Tokens of one batch row: `start..start + len` in the packed token matrix.
#[derive(Clone, Copy, Debug)]
struct Span {
    start: usize,
    len: usize,
}

struct HeadTape<F> {
    probs: Array2<F>,
    dropout: Option<Array2<F>>,
}

struct LayerTape<F> {
    ln1_xhat: Array2<F>,
    ln1_rstd: Array1<F>,
    normed1: Array2<F>,
    q_rot: Array2<F>,
    k_rot: Array2<F>,
    v: Array2<F>,
    /// Indexed `row * n_heads + head`.
    heads: Vec<HeadTape<F>>,
    attn_out: Array2<F>,
    ln2_xhat: Array2<F>,
    ln2_rstd: Array1<F>,
    normed2: Array2<F>,
    ff_pre: Array2<F>,
    ff_act: Array2<F>,
}

/// Everything `backward` needs from one `forward` call.
///
/// Only valid positions are stored: each row's valid tokens are packed
/// contiguously with their original position indices, so padding never
/// enters any computation.
pub struct Tape<F> {
    version: u64,
    spans: Vec<Span>,
    inputs: Array2<F>,
    embed_xhat: Array2<F>,
    embed_rstd: Array1<F>,
    embed_dropout: Option<Array2<F>>,
    layers: Vec<LayerTape<F>>,
    positions: Vec<usize>,
    hidden: Array2<F>,
    projected: Array2<F>,
}

impl<F: Scalar> Tape<F> {
    /// Attention distribution of (`layer`, batch `row`, `head`) over that
    /// row's valid key positions, before attention dropout.
    pub fn attention(&self, layer: usize, row: usize, head: usize) -> ArrayView2<'_, F> {
        let n_heads = self.layers[layer].heads.len() / self.spans.len();
        self.layers[layer].heads[row * n_heads + head].probs.view()
    }

    pub fn n_tokens(&self) -> usize {
        self.positions.len()
    }
}

pub struct Forward<F> {
    /// Masked mean of the final layer, one row per batch row.
    pub hidden: Array2<F>,
    /// Projection-head output (equal to `hidden` when the head is disabled).
    pub projected: Array2<F>,
    pub tape: Tape<F>,
}

fn gaussian<F: Scalar, R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> F {
    let z: f64 = StandardNormal.sample(rng);
    F::of(z * sigma)
}

pub fn forward<F: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    batch: &Batch<F>,
    mode: Mode,
    rng: &mut R,
) -> Result<Forward<F>> {
    let cfg = params.config();
    batch.validate(cfg.input_dim)?;
    let train = matches!(mode, Mode::Train { .. });
    let (rows, max_len, in_dim) = batch.inputs.dim();

    let mut spans = Vec::with_capacity(rows);
    let mut positions = Vec::new();
    for r in 0..rows {
        let start = positions.len();
        positions.extend((0..max_len).filter(|&p| batch.mask[[r, p]]));
        let len = positions.len() - start;
        if len == 0 {
            return Err(Error::Invalid(format!("batch row {r} has no valid positions")));
        }
        spans.push(Span { start, len });
    }
    let n_tok = positions.len();
    let mut inputs = Array2::zeros((n_tok, in_dim));
    for (r, span) in spans.iter().enumerate() {
        for t in span.start..span.start + span.len {
            inputs.row_mut(t).assign(&batch.inputs.slice(s![r, positions[t], ..]));
        }
    }

    let embedded = linear(&inputs, &params.embed_weight, &params.embed_bias);
    let norm = layer_norm(&embedded, &params.embed_ln_gain, &params.embed_ln_bias);
    let mut h = norm.out;
    let embed_dropout = if train {
        dropout_mask(h.dim(), cfg.feature_dropout, rng)
    } else {
        None
    };
    if let Some(mask) = &embed_dropout {
        h *= mask;
    }
    if let Mode::Train { noise_sigma } = mode {
        if noise_sigma > 0.0 {
            for (r, span) in spans.iter().enumerate() {
                if batch.noise[r] {
                    h.slice_mut(s![span.start..span.start + span.len, ..])
                        .mapv_inplace(|v| v + gaussian::<F, R>(rng, noise_sigma));
                }
            }
        }
    }
    let max_pos = positions.iter().max().map_or(1, |p| p + 1);
    let pe = sinusoidal_pe::<F>(max_pos, cfg.hidden_dim)?;
    for (mut row, &p) in h.outer_iter_mut().zip(&positions) {
        row += &pe.row(p);
    }

    let rope = Rotary::<F>::new(cfg.head_dim(), max_pos);
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (out, tape) = layer_forward(layer, h, &spans, &positions, &rope, cfg, train, rng);
        h = out;
        layers.push(tape);
    }

    let mut hidden = Array2::zeros((rows, cfg.hidden_dim));
    for (r, span) in spans.iter().enumerate() {
        let pooled = h
            .slice(s![span.start..span.start + span.len, ..])
            .sum_axis(Axis(0))
            / F::of(span.len as f64);
        hidden.row_mut(r).assign(&pooled);
    }
    let projected = match (&params.proj_weight, &params.proj_bias) {
        (Some(w), Some(b)) => linear(&hidden, w, b).mapv(|v| v.tanh()),
        _ => hidden.clone(),
    };

    Ok(Forward {
        hidden: hidden.clone(),
        projected: projected.clone(),
        tape: Tape {
            version: params.version(),
            spans,
            inputs,
            embed_xhat: norm.xhat,
            embed_rstd: norm.rstd,
            embed_dropout,
            layers,
            positions,
            hidden,
            projected,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn layer_forward<F: Scalar, R: Rng + ?Sized>(
    layer: &LayerParams<F>,
    x: Array2<F>,
    spans: &[Span],
    positions: &[usize],
    rope: &Rotary<F>,
    cfg: &EncoderConfig,
    train: bool,
    rng: &mut R,
) -> (Array2<F>, LayerTape<F>) {
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = F::of(1.0 / (dh as f64).sqrt());

    let n1 = layer_norm(&x, &layer.ln1_gain, &layer.ln1_bias);
    let mut q_rot = linear(&n1.out, &layer.w_q, &layer.b_q);
    let mut k_rot = linear(&n1.out, &layer.w_k, &layer.b_k);
    let v = linear(&n1.out, &layer.w_v, &layer.b_v);
    rope.apply(&mut q_rot, positions, n_heads, false);
    rope.apply(&mut k_rot, positions, n_heads, false);

    let mut attn_out = Array2::zeros(x.dim());
    let mut heads = Vec::with_capacity(spans.len() * n_heads);
    for span in spans {
        let rows = span.start..span.start + span.len;
        for head in 0..n_heads {
            let cols = head * dh..(head + 1) * dh;
            let q = q_rot.slice(s![rows.clone(), cols.clone()]);
            let k = k_rot.slice(s![rows.clone(), cols.clone()]);
            let vs = v.slice(s![rows.clone(), cols.clone()]);
            let mut probs = q.dot(&k.t()) * scale;
            softmax_rows(&mut probs);
            let dropout = if train {
                dropout_mask((span.len, span.len), cfg.attention_dropout, rng)
            } else {
                None
            };
            let out = match &dropout {
                Some(m) => (&probs * m).dot(&vs),
                None => probs.dot(&vs),
            };
            attn_out.slice_mut(s![rows.clone(), cols]).assign(&out);
            heads.push(HeadTape { probs, dropout });
        }
    }
    let attended = linear(&attn_out, &layer.w_o, &layer.b_o);
    let residual = x + &attended;

    let n2 = layer_norm(&residual, &layer.ln2_gain, &layer.ln2_bias);
    let ff_pre = linear(&n2.out, &layer.w_ff1, &layer.b_ff1);
    let ff_act = ff_pre.mapv(gelu);
    let out = residual + &linear(&ff_act, &layer.w_ff2, &layer.b_ff2);

    (
        out,
        LayerTape {
            ln1_xhat: n1.xhat,
            ln1_rstd: n1.rstd,
            normed1: n1.out,
            q_rot,
            k_rot,
            v,
            heads,
            attn_out,
            ln2_xhat: n2.xhat,
            ln2_rstd: n2.rstd,
            normed2: n2.out,
            ff_pre,
            ff_act,
        },
    )
}

/// Exact parameter gradients for upstream gradients on the projected and
/// hidden outputs of the forward pass that produced `tape`.
pub fn backward<F: Scalar>(
    params: &ModelParams<F>,
    tape: &Tape<F>,
    grad_projected: &Array2<F>,
    grad_hidden: &Array2<F>,
) -> Result<ModelParams<F>> {
    if tape.version != params.version() {
        return Err(Error::StaleTape {
            recorded: tape.version,
            current: params.version(),
        });
    }
    let cfg = params.config();
    let rows = tape.spans.len();
    for (name, g) in [("projected", grad_projected), ("hidden", grad_hidden)] {
        if g.dim() != (rows, cfg.hidden_dim) {
            return Err(Error::Shape(format!(
                "grad_{name} is {:?}, expected {:?}",
                g.dim(),
                (rows, cfg.hidden_dim)
            )));
        }
    }
    let mut grads = params.zeros_like();

    let mut d_hidden = grad_hidden.clone();
    match (&params.proj_weight, &params.proj_bias) {
        (Some(w), Some(_)) => {
            let d_pre = grad_projected * &tape.projected.mapv(|p| F::one() - p * p);
            grads.proj_weight = Some(tape.hidden.t().dot(&d_pre));
            grads.proj_bias = Some(column_sums(&d_pre));
            d_hidden += &d_pre.dot(&w.t());
        }
        _ => d_hidden += grad_projected,
    }

    let mut d_x = Array2::zeros((tape.n_tokens(), cfg.hidden_dim));
    for (r, span) in tape.spans.iter().enumerate() {
        let share = d_hidden.row(r).mapv(|g| g / F::of(span.len as f64));
        for t in span.start..span.start + span.len {
            d_x.row_mut(t).assign(&share);
        }
    }

    let max_pos = tape.positions.iter().max().map_or(1, |p| p + 1);
    let rope = Rotary::<F>::new(cfg.head_dim(), max_pos);
    for (k, (layer, lt)) in params.layers.iter().zip(&tape.layers).enumerate().rev() {
        let (d_in, lg) = layer_backward(layer, lt, d_x, &tape.spans, &tape.positions, &rope, cfg);
        grads.layers[k] = lg;
        d_x = d_in;
    }

    // noise and positional encodings are additive constants
    if let Some(mask) = &tape.embed_dropout {
        d_x *= mask;
    }
    let (d_embedded, d_gain, d_bias) =
        layer_norm_backward(&d_x, &tape.embed_xhat, &tape.embed_rstd, &params.embed_ln_gain);
    grads.embed_ln_gain = d_gain;
    grads.embed_ln_bias = d_bias;
    grads.embed_weight = tape.inputs.t().dot(&d_embedded);
    grads.embed_bias = column_sums(&d_embedded);
    Ok(grads)
}

fn layer_backward<F: Scalar>(
    layer: &LayerParams<F>,
    lt: &LayerTape<F>,
    d_out: Array2<F>,
    spans: &[Span],
    positions: &[usize],
    rope: &Rotary<F>,
    cfg: &EncoderConfig,
) -> (Array2<F>, LayerParams<F>) {
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = F::of(1.0 / (dh as f64).sqrt());

    // feed-forward block
    let w_ff2 = lt.ff_act.t().dot(&d_out);
    let b_ff2 = column_sums(&d_out);
    let d_act = d_out.dot(&layer.w_ff2.t());
    let d_pre = d_act * &lt.ff_pre.mapv(gelu_grad);
    let w_ff1 = lt.normed2.t().dot(&d_pre);
    let b_ff1 = column_sums(&d_pre);
    let d_normed2 = d_pre.dot(&layer.w_ff1.t());
    let (d_res_ln, ln2_gain, ln2_bias) = layer_norm_backward(&d_normed2, &lt.ln2_xhat, &lt.ln2_rstd, &layer.ln2_gain);
    let d_residual = d_out + &d_res_ln;

    // attention block
    let w_o = lt.attn_out.t().dot(&d_residual);
    let b_o = column_sums(&d_residual);
    let d_attn = d_residual.dot(&layer.w_o.t());
    let mut d_q = Array2::zeros(d_attn.dim());
    let mut d_k = Array2::zeros(d_attn.dim());
    let mut d_v = Array2::zeros(d_attn.dim());
    for (r, span) in spans.iter().enumerate() {
        let rows = span.start..span.start + span.len;
        for head in 0..n_heads {
            let cols = head * dh..(head + 1) * dh;
            let ht = &lt.heads[r * n_heads + head];
            let d_o = d_attn.slice(s![rows.clone(), cols.clone()]);
            let q = lt.q_rot.slice(s![rows.clone(), cols.clone()]);
            let k = lt.k_rot.slice(s![rows.clone(), cols.clone()]);
            let vs = lt.v.slice(s![rows.clone(), cols.clone()]);
            let (dropped, mut d_p) = match &ht.dropout {
                Some(m) => {
                    let dropped = &ht.probs * m;
                    let d_p = d_o.dot(&vs.t()) * m;
                    (dropped, d_p)
                }
                None => (ht.probs.clone(), d_o.dot(&vs.t())),
            };
            d_v.slice_mut(s![rows.clone(), cols.clone()]).assign(&dropped.t().dot(&d_o));
            // softmax backward, row-wise
            for (mut dr, pr) in d_p.outer_iter_mut().zip(ht.probs.outer_iter()) {
                let dot: F = dr.iter().zip(pr.iter()).map(|(&a, &b)| a * b).sum();
                dr.zip_mut_with(&pr, |d, &p| *d = p * (*d - dot) * scale);
            }
            d_q.slice_mut(s![rows.clone(), cols.clone()]).assign(&d_p.dot(&k));
            d_k.slice_mut(s![rows.clone(), cols]).assign(&d_p.t().dot(&q));
        }
    }
    rope.apply(&mut d_q, positions, n_heads, true);
    rope.apply(&mut d_k, positions, n_heads, true);
    let w_q = lt.normed1.t().dot(&d_q);
    let w_k = lt.normed1.t().dot(&d_k);
    let w_v = lt.normed1.t().dot(&d_v);
    let (b_q, b_k, b_v) = (column_sums(&d_q), column_sums(&d_k), column_sums(&d_v));
    let d_normed1 = d_q.dot(&layer.w_q.t()) + d_k.dot(&layer.w_k.t()) + d_v.dot(&layer.w_v.t());
    let (d_in_ln, ln1_gain, ln1_bias) = layer_norm_backward(&d_normed1, &lt.ln1_xhat, &lt.ln1_rstd, &layer.ln1_gain);
    let d_in = d_residual + &d_in_ln;

    (
        d_in,
        LayerParams {
            ln1_gain,
            ln1_bias,
            w_q,
            b_q,
            w_k,
            b_k,
            w_v,
            b_v,
            w_o,
            b_o,
            ln2_gain,
            ln2_bias,
            w_ff1,
            b_ff1,
            w_ff2,
            b_ff2,
        },
    )
}

/// Eval-mode hidden representations, processed in chunks of `chunk` rows.
pub fn encode<F: Scalar>(params: &ModelParams<F>, sequences: &[Array2<F>], chunk: usize) -> Result<Array2<F>> {
    let mut out = Array2::zeros((sequences.len(), params.config().hidden_dim));
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for (c, seqs) in sequences.chunks(chunk.max(1)).enumerate() {
        let ids = vec![String::new(); seqs.len()];
        let batch = Batch::from_sequences(seqs, ids.clone(), ids)?;
        let fwd = forward(params, &batch, Mode::Eval, &mut rng)?;
        let start = c * chunk.max(1);
        out.slice_mut(s![start..start + seqs.len(), ..]).assign(&fwd.hidden);
    }
    Ok(out)
}
