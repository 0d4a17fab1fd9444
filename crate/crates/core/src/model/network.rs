use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ops::{self, NormCache};
use super::params::{Float, LayerParams, ModelParams};
use crate::encoding::vocab::PAD;
use crate::encoding::{spatial_encode, NormBounds, TokenSequence};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Dropout-free and deterministic.
    Eval,
    /// Dropout active, masks drawn from `seed`.
    Train { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput<F> {
    /// Final features, one row per sequence position.
    pub features: Array2<F>,
    /// One score per object position.
    pub reference_scores: Array1<F>,
    /// Two logits per object position: (not target class, target class).
    pub binary_logits: Array2<F>,
    /// Target-class logits read from the `[CLS]` feature.
    pub text_logits: Array1<F>,
    /// Vocabulary logits for every utterance position.
    pub mlm_logits: Array2<F>,
}

/// Gradients of a scalar loss with respect to each head output.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads<F> {
    pub reference_scores: Array1<F>,
    pub binary_logits: Array2<F>,
    pub text_logits: Array1<F>,
    pub mlm_logits: Array2<F>,
}

impl<F: Float> HeadGrads<F> {
    pub fn zeros_for(out: &ModelOutput<F>) -> Self {
        HeadGrads {
            reference_scores: Array1::zeros(out.reference_scores.len()),
            binary_logits: Array2::zeros(out.binary_logits.dim()),
            text_logits: Array1::zeros(out.text_logits.len()),
            mlm_logits: Array2::zeros(out.mlm_logits.dim()),
        }
    }
}

/// One sample's rows inside a packed batch.
#[derive(Clone, Debug)]
struct Segment {
    offset: usize,
    ids: Vec<u32>,
    object_positions: Vec<usize>,
    utterance_positions: Vec<usize>,
    key_masked: Vec<bool>,
}

impl Segment {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn rows(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.ids.len()
    }
}

#[derive(Clone, Debug)]
struct LayerCache<F> {
    norm1: NormCache<F>,
    a: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Attention weights per segment, one `T×T` matrix per head.
    attn: Vec<Vec<Array2<F>>>,
    ctx: Array2<F>,
    attn_drop: Option<Array2<F>>,
    norm2: NormCache<F>,
    b: Array2<F>,
    u: Array2<F>,
    tanh: Array2<F>,
    g: Array2<F>,
    ffn_drop: Option<Array2<F>>,
}

/// Intermediate values of one forward pass, consumed by [`backward`].
///
/// A batch is packed row-wise: dense layers run once over all samples while
/// attention stays within each sample.
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    segments: Vec<Segment>,
    emb_drop: Option<Array2<F>>,
    layers: Vec<LayerCache<F>>,
    final_norm: NormCache<F>,
    features: Array2<F>,
}

impl<F: Float> ForwardCache<F> {
    /// Attention weights of `layer` for the first sample, one `T×T` matrix per head.
    pub fn attention(&self, layer: usize) -> &[Array2<F>] {
        self.sample_attention(0, layer)
    }

    pub fn sample_attention(&self, sample: usize, layer: usize) -> &[Array2<F>] {
        &self.layers[layer].attn[sample]
    }
}

/// One sample of a batched forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Input<'a, F> {
    pub seq: &'a TokenSequence,
    /// Spatial encodings, one row per object position; `None` skips fusion.
    pub spatial: Option<&'a Array2<F>>,
    pub mode: Mode,
}

/// Spatial encodings for the objects of `seq`, one row per object position.
pub fn spatial_matrix<F: Float>(seq: &TokenSequence, bounds: &NormBounds, d_model: usize) -> Result<Array2<F>> {
    let mut out = Array2::zeros((seq.num_objects(), d_model));
    for (mut row, bbox) in out.rows_mut().into_iter().zip(&seq.boxes) {
        for (dst, v) in row.iter_mut().zip(spatial_encode(bbox, bounds, d_model)?) {
            *dst = F::of(v);
        }
    }
    Ok(out)
}

fn check_inputs<F: Float>(params: &ModelParams<F>, seq: &TokenSequence, spatial: Option<&Array2<F>>) -> Result<()> {
    let cfg = &params.config;
    let t = seq.ids.len();
    let shape = |what, expected, got| Err(Error::Shape { what, expected, got });
    if t == 0 {
        return Err(Error::Empty("token sequence"));
    }
    if t > cfg.max_len {
        return Err(Error::SequenceOverflow {
            scene_id: seq.scene_id.clone(),
            len: t,
            max_len: cfg.max_len,
        });
    }
    if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return shape("token id bound (vocab_size)", cfg.vocab_size, bad as usize + 1);
    }
    if seq.object_positions.is_empty() {
        return Err(Error::Empty("object positions"));
    }
    if let Some(&p) = seq.object_positions.iter().chain(&seq.utterance_positions).find(|&&p| p >= t) {
        return shape("position bound (sequence length)", t, p + 1);
    }
    if let Some(sp) = spatial {
        if sp.nrows() != seq.object_positions.len() {
            return shape("spatial rows (object count)", seq.object_positions.len(), sp.nrows());
        }
        if sp.ncols() != cfg.d_model {
            return shape("spatial columns (d_model)", cfg.d_model, sp.ncols());
        }
    }
    Ok(())
}

/// Inverted dropout mask over the packed rows; each sample draws its rows
/// from its own stream, samples without a stream keep every entry.
fn dropout_mask<F: Float>(
    rngs: &mut [Option<ChaCha8Rng>],
    segments: &[Segment],
    p: f64,
    d: usize,
) -> Option<Array2<F>> {
    if rngs.iter().all(Option::is_none) {
        return None;
    }
    let n = segments.last().map_or(0, |s| s.offset + s.len());
    let keep = F::of(1.0 / (1.0 - p));
    let mut mask = Array2::from_elem((n, d), F::one());
    for (rng, seg) in rngs.iter_mut().zip(segments) {
        let Some(rng) = rng.as_mut() else { continue };
        for v in mask.slice_mut(s![seg.rows(), ..]).iter_mut() {
            *v = if rng.random::<f64>() < p { F::zero() } else { keep };
        }
    }
    Some(mask)
}

fn apply_mask<F: Float>(x: &mut Array2<F>, mask: &Option<Array2<F>>) {
    if let Some(m) = mask {
        *x *= m;
    }
}

fn layer_forward<F: Float>(
    lp: &LayerParams<F>,
    h: &mut Array2<F>,
    n_heads: usize,
    segments: &[Segment],
    dropout: f64,
    rngs: &mut [Option<ChaCha8Rng>],
) -> LayerCache<F> {
    let (n, d) = h.dim();
    let dh = d / n_heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let (a, norm1) = ops::layer_norm(h, &lp.ln1_gamma, &lp.ln1_beta);
    let q = ops::affine(&a.view(), &lp.wq, &lp.bq);
    let k = ops::affine(&a.view(), &lp.wk, &lp.bk);
    let v = ops::affine(&a.view(), &lp.wv, &lp.bv);
    let mut ctx = Array2::zeros((n, d));
    let mut attn = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut heads = Vec::with_capacity(n_heads);
        for head in 0..n_heads {
            let block = s![seg.rows(), head * dh..(head + 1) * dh];
            let mut scores = q.slice(block).dot(&k.slice(block).t()) * scale;
            for (j, _) in seg.key_masked.iter().enumerate().filter(|(_, &m)| m) {
                scores.column_mut(j).fill(F::neg_infinity());
            }
            ops::softmax_rows(&mut scores);
            ctx.slice_mut(block).assign(&scores.dot(&v.slice(block)));
            heads.push(scores);
        }
        attn.push(heads);
    }
    let mut o = ops::affine(&ctx.view(), &lp.wo, &lp.bo);
    let attn_drop = dropout_mask(rngs, segments, dropout, d);
    apply_mask(&mut o, &attn_drop);
    *h += &o;

    let (b, norm2) = ops::layer_norm(h, &lp.ln2_gamma, &lp.ln2_beta);
    let u = ops::affine(&b.view(), &lp.w1, &lp.b1);
    let (g, tanh) = ops::gelu(&u);
    let mut f = ops::affine(&g.view(), &lp.w2, &lp.b2);
    let ffn_drop = dropout_mask(rngs, segments, dropout, d);
    apply_mask(&mut f, &ffn_drop);
    *h += &f;

    LayerCache {
        norm1,
        a,
        q,
        k,
        v,
        attn,
        ctx,
        attn_drop,
        norm2,
        b,
        u,
        tanh,
        g,
        ffn_drop,
    }
}

/// Runs the encoder and all four heads over a batch, keeping what
/// [`backward_batch`] needs. Each output equals the single-sample
/// [`forward_with_cache`] result for the same input up to rounding.
pub fn forward_batch_with_cache<F: Float>(
    params: &ModelParams<F>,
    inputs: &[Input<'_, F>],
) -> Result<(Vec<ModelOutput<F>>, ForwardCache<F>)> {
    if inputs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let cfg = &params.config;
    let mut segments = Vec::with_capacity(inputs.len());
    let mut offset = 0;
    for input in inputs {
        check_inputs(params, input.seq, input.spatial)?;
        let seq = input.seq;
        segments.push(Segment {
            offset,
            ids: seq.ids.clone(),
            object_positions: seq.object_positions.clone(),
            utterance_positions: seq.utterance_positions.clone(),
            key_masked: seq.ids.iter().map(|&id| id == PAD).collect(),
        });
        offset += seq.len();
    }
    let mut rngs: Vec<Option<ChaCha8Rng>> = inputs
        .iter()
        .map(|input| match input.mode {
            Mode::Train { seed } if cfg.dropout > 0.0 => Some(seed::rng(seed, &[0xD0])),
            _ => None,
        })
        .collect();

    let all_ids: Vec<usize> = segments.iter().flat_map(|s| s.ids.iter().map(|&i| i as usize)).collect();
    let mut h = params.token_embedding.select(Axis(0), &all_ids);
    for (seg, input) in segments.iter().zip(inputs) {
        if let Some(pos) = &params.position_embedding {
            let mut rows = h.slice_mut(s![seg.rows(), ..]);
            rows += &pos.slice(s![..seg.len(), ..]);
        }
        if let Some(sp) = input.spatial {
            for (row, &p) in sp.rows().into_iter().zip(&seg.object_positions) {
                let mut dst = h.row_mut(seg.offset + p);
                dst += &row;
            }
        }
    }
    let emb_drop = dropout_mask(&mut rngs, &segments, cfg.dropout, cfg.d_model);
    apply_mask(&mut h, &emb_drop);

    let layers = params
        .layers
        .iter()
        .map(|lp| layer_forward(lp, &mut h, cfg.n_heads, &segments, cfg.dropout, &mut rngs))
        .collect();
    let (features, final_norm) = ops::layer_norm(&h, &params.final_gamma, &params.final_beta);

    let object_rows: Vec<usize> = segments.iter().flat_map(|s| s.object_positions.iter().map(|p| s.offset + p)).collect();
    let utterance_rows: Vec<usize> =
        segments.iter().flat_map(|s| s.utterance_positions.iter().map(|p| s.offset + p)).collect();
    let cls_rows: Vec<usize> = segments.iter().map(|s| s.offset).collect();
    let objects = features.select(Axis(0), &object_rows);
    let reference = ops::affine(&objects.view(), &params.ref_w, &params.ref_b);
    let binary = ops::affine(&objects.view(), &params.target_w, &params.target_b);
    let text = ops::affine(&features.select(Axis(0), &cls_rows).view(), &params.text_w, &params.text_b);
    let mlm = ops::affine(&features.select(Axis(0), &utterance_rows).view(), &params.mlm_w, &params.mlm_b);

    let mut outputs = Vec::with_capacity(segments.len());
    let (mut o, mut u) = (0, 0);
    for (i, seg) in segments.iter().enumerate() {
        let (m, t) = (seg.object_positions.len(), seg.utterance_positions.len());
        outputs.push(ModelOutput {
            features: features.slice(s![seg.rows(), ..]).to_owned(),
            reference_scores: reference.slice(s![o..o + m, 0]).to_owned(),
            binary_logits: binary.slice(s![o..o + m, ..]).to_owned(),
            text_logits: text.row(i).to_owned(),
            mlm_logits: mlm.slice(s![u..u + t, ..]).to_owned(),
        });
        o += m;
        u += t;
    }
    let cache = ForwardCache {
        segments,
        emb_drop,
        layers,
        final_norm,
        features,
    };
    Ok((outputs, cache))
}

/// Runs the encoder and all four heads, keeping what [`backward`] needs.
///
/// `spatial` holds one row per object position and is added to the token
/// embeddings at those positions only; `None` skips the fusion step.
/// Keys whose token is `[PAD]` are excluded from attention.
pub fn forward_with_cache<F: Float>(
    params: &ModelParams<F>,
    seq: &TokenSequence,
    spatial: Option<&Array2<F>>,
    mode: Mode,
) -> Result<(ModelOutput<F>, ForwardCache<F>)> {
    let (mut outputs, cache) = forward_batch_with_cache(params, &[Input { seq, spatial, mode }])?;
    Ok((outputs.pop().expect("one output per input"), cache))
}

pub fn forward<F: Float>(
    params: &ModelParams<F>,
    seq: &TokenSequence,
    spatial: Option<&Array2<F>>,
    mode: Mode,
) -> Result<ModelOutput<F>> {
    forward_with_cache(params, seq, spatial, mode).map(|(out, _)| out)
}

fn layer_backward<F: Float>(
    lp: &LayerParams<F>,
    gp: &mut LayerParams<F>,
    c: &LayerCache<F>,
    segments: &[Segment],
    dh: Array2<F>,
) -> Array2<F> {
    let (n, d) = dh.dim();
    let n_heads = c.attn.first().map_or(1, Vec::len);
    let dh_size = d / n_heads;
    let scale = F::of(1.0 / (dh_size as f64).sqrt());

    let mut df = dh.clone();
    apply_mask(&mut df, &c.ffn_drop);
    let dg = ops::affine_backward(&c.g.view(), &lp.w2, &df, &mut gp.w2, &mut gp.b2);
    let du = ops::gelu_backward(&c.u, &c.tanh, &dg);
    let db = ops::affine_backward(&c.b.view(), &lp.w1, &du, &mut gp.w1, &mut gp.b1);
    let dh_mid = dh + ops::layer_norm_backward(&db, &c.norm2, &lp.ln2_gamma, &mut gp.ln2_gamma, &mut gp.ln2_beta);

    let mut do_ = dh_mid.clone();
    apply_mask(&mut do_, &c.attn_drop);
    let dctx = ops::affine_backward(&c.ctx.view(), &lp.wo, &do_, &mut gp.wo, &mut gp.bo);
    let mut dq = Array2::zeros((n, d));
    let mut dk = Array2::zeros((n, d));
    let mut dv = Array2::zeros((n, d));
    for (seg, heads) in segments.iter().zip(&c.attn) {
        for (head, a) in heads.iter().enumerate() {
            let block = s![seg.rows(), head * dh_size..(head + 1) * dh_size];
            let dctx_h = dctx.slice(block);
            let da = dctx_h.dot(&c.v.slice(block).t());
            dv.slice_mut(block).assign(&a.t().dot(&dctx_h));
            let mut ds = a * &da;
            let row_dot = ds.sum_axis(Axis(1)).insert_axis(Axis(1));
            ds = (da - &row_dot) * a * scale;
            dq.slice_mut(block).assign(&ds.dot(&c.k.slice(block)));
            dk.slice_mut(block).assign(&ds.t().dot(&c.q.slice(block)));
        }
    }
    let av = c.a.view();
    let mut da = ops::affine_backward(&av, &lp.wq, &dq, &mut gp.wq, &mut gp.bq);
    da += &ops::affine_backward(&av, &lp.wk, &dk, &mut gp.wk, &mut gp.bk);
    da += &ops::affine_backward(&av, &lp.wv, &dv, &mut gp.wv, &mut gp.bv);
    dh_mid + ops::layer_norm_backward(&da, &c.norm1, &lp.ln1_gamma, &mut gp.ln1_gamma, &mut gp.ln1_beta)
}

/// Accumulates parameter gradients for per-sample head gradients `douts`
/// (in batch order) into `grads`.
pub fn backward_batch<F: Float>(
    params: &ModelParams<F>,
    cache: &ForwardCache<F>,
    douts: &[HeadGrads<F>],
    grads: &mut ModelParams<F>,
) {
    assert_eq!(douts.len(), cache.segments.len(), "one head gradient per sample");
    let segments = &cache.segments;
    let x = &cache.features;
    let mut dx = Array2::<F>::zeros(x.dim());

    let object_rows: Vec<usize> = segments.iter().flat_map(|s| s.object_positions.iter().map(|p| s.offset + p)).collect();
    let utterance_rows: Vec<usize> =
        segments.iter().flat_map(|s| s.utterance_positions.iter().map(|p| s.offset + p)).collect();
    let cls_rows: Vec<usize> = segments.iter().map(|s| s.offset).collect();
    let stack = |parts: Vec<ndarray::ArrayView2<F>>| ndarray::concatenate(Axis(0), &parts).expect("matching widths");

    let objects = x.select(Axis(0), &object_rows);
    let dref = stack(douts.iter().map(|g| g.reference_scores.view().insert_axis(Axis(1))).collect());
    let dbin = stack(douts.iter().map(|g| g.binary_logits.view()).collect());
    let mut dobj = ops::affine_backward(&objects.view(), &params.ref_w, &dref, &mut grads.ref_w, &mut grads.ref_b);
    dobj += &ops::affine_backward(&objects.view(), &params.target_w, &dbin, &mut grads.target_w, &mut grads.target_b);
    for (row, &p) in dobj.rows().into_iter().zip(&object_rows) {
        let mut dst = dx.row_mut(p);
        dst += &row;
    }

    let cls = x.select(Axis(0), &cls_rows);
    let dtext = stack(douts.iter().map(|g| g.text_logits.view().insert_axis(Axis(0))).collect());
    let dcls = ops::affine_backward(&cls.view(), &params.text_w, &dtext, &mut grads.text_w, &mut grads.text_b);
    for (row, &p) in dcls.rows().into_iter().zip(&cls_rows) {
        let mut dst = dx.row_mut(p);
        dst += &row;
    }

    let utterance = x.select(Axis(0), &utterance_rows);
    let dmlm = stack(douts.iter().map(|g| g.mlm_logits.view()).collect());
    let dutt = ops::affine_backward(&utterance.view(), &params.mlm_w, &dmlm, &mut grads.mlm_w, &mut grads.mlm_b);
    for (row, &p) in dutt.rows().into_iter().zip(&utterance_rows) {
        let mut dst = dx.row_mut(p);
        dst += &row;
    }

    let mut dh = ops::layer_norm_backward(
        &dx,
        &cache.final_norm,
        &params.final_gamma,
        &mut grads.final_gamma,
        &mut grads.final_beta,
    );
    for ((lp, gp), c) in params.layers.iter().zip(grads.layers.iter_mut()).zip(&cache.layers).rev() {
        dh = layer_backward(lp, gp, c, segments, dh);
    }
    apply_mask(&mut dh, &cache.emb_drop);
    for seg in segments {
        for (t, &id) in seg.ids.iter().enumerate() {
            let row = dh.row(seg.offset + t);
            let mut emb = grads.token_embedding.row_mut(id as usize);
            emb += &row;
            if let Some(pos) = grads.position_embedding.as_mut() {
                let mut p = pos.row_mut(t);
                p += &row;
            }
        }
    }
}

/// Accumulates parameter gradients for the head gradients `dout` into `grads`.
pub fn backward<F: Float>(params: &ModelParams<F>, cache: &ForwardCache<F>, dout: &HeadGrads<F>, grads: &mut ModelParams<F>) {
    backward_batch(params, cache, std::slice::from_ref(dout), grads);
}

/// Index of the highest score; exact ties go to the lowest index.
pub fn select_target<F: PartialOrd + Copy>(scores: &[F]) -> Result<usize> {
    let (first, rest) = scores.split_first().ok_or(Error::Empty("reference scores"))?;
    let mut best = (0, *first);
    for (i, &s) in rest.iter().enumerate() {
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    Ok(best.0)
}
