use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::Result;
use crate::seed;

/// Scalar type the network runs in (`f32` for training, `f64` for checks).
pub trait Float: NdFloat + FromPrimitive + Default {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Float for f32 {}
impl Float for f64 {}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<F> {
    pub ln1_gamma: Array1<F>,
    pub ln1_beta: Array1<F>,
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
    pub ln2_gamma: Array1<F>,
    pub ln2_beta: Array1<F>,
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

/// All trainable tensors. The same structure doubles as a gradient and as
/// optimizer moment storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub token_embedding: Array2<F>,
    pub position_embedding: Option<Array2<F>>,
    pub layers: Vec<LayerParams<F>>,
    pub final_gamma: Array1<F>,
    pub final_beta: Array1<F>,
    pub ref_w: Array2<F>,
    pub ref_b: Array1<F>,
    pub target_w: Array2<F>,
    pub target_b: Array1<F>,
    pub text_w: Array2<F>,
    pub text_b: Array1<F>,
    pub mlm_w: Array2<F>,
    pub mlm_b: Array1<F>,
}

impl<F: Float> LayerParams<F> {
    fn zeros(d: usize, f: usize) -> Self {
        let z1 = |n| Array1::zeros(n);
        let z2 = |r, c| Array2::zeros((r, c));
        LayerParams {
            ln1_gamma: z1(d),
            ln1_beta: z1(d),
            wq: z2(d, d),
            bq: z1(d),
            wk: z2(d, d),
            bk: z1(d),
            wv: z2(d, d),
            bv: z1(d),
            wo: z2(d, d),
            bo: z1(d),
            ln2_gamma: z1(d),
            ln2_beta: z1(d),
            w1: z2(d, f),
            b1: z1(f),
            w2: z2(f, d),
            b2: z1(d),
        }
    }

    fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, F>)>) {
        macro_rules! push {
            ($($f:ident),*) => { $( out.push((format!("{prefix}.{}", stringify!($f)), self.$f.view().into_dyn())); )* };
        }
        push!(ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gamma, ln2_beta, w1, b1, w2, b2);
    }

    fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, ArrayViewMutD<'a, F>)>) {
        let LayerParams {
            ln1_gamma,
            ln1_beta,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln2_gamma,
            ln2_beta,
            w1,
            b1,
            w2,
            b2,
        } = self;
        macro_rules! push {
            ($($f:ident),*) => { $( out.push((format!("{prefix}.{}", stringify!($f)), $f.view_mut().into_dyn())); )* };
        }
        push!(ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gamma, ln2_beta, w1, b1, w2, b2);
    }
}

impl<F: Float> ModelParams<F> {
    /// All-zero tensors shaped for `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, f, v, c) = (config.d_model, config.ff_dim, config.vocab_size, config.n_classes);
        ModelParams {
            config: config.clone(),
            token_embedding: Array2::zeros((v, d)),
            position_embedding: config.use_sequence_positions.then(|| Array2::zeros((config.max_len, d))),
            layers: (0..config.n_layers).map(|_| LayerParams::zeros(d, f)).collect(),
            final_gamma: Array1::zeros(d),
            final_beta: Array1::zeros(d),
            ref_w: Array2::zeros((d, 1)),
            ref_b: Array1::zeros(1),
            target_w: Array2::zeros((d, 2)),
            target_b: Array1::zeros(2),
            text_w: Array2::zeros((d, c)),
            text_b: Array1::zeros(c),
            mlm_w: Array2::zeros((d, v)),
            mlm_b: Array1::zeros(v),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out = vec![("token_embedding".to_string(), self.token_embedding.view().into_dyn())];
        if let Some(p) = &self.position_embedding {
            out.push(("position_embedding".into(), p.view().into_dyn()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.named(&format!("layers.{i}"), &mut out);
        }
        out.extend([
            ("final_gamma".to_string(), self.final_gamma.view().into_dyn()),
            ("final_beta".into(), self.final_beta.view().into_dyn()),
            ("ref_w".into(), self.ref_w.view().into_dyn()),
            ("ref_b".into(), self.ref_b.view().into_dyn()),
            ("target_w".into(), self.target_w.view().into_dyn()),
            ("target_b".into(), self.target_b.view().into_dyn()),
            ("text_w".into(), self.text_w.view().into_dyn()),
            ("text_b".into(), self.text_b.view().into_dyn()),
            ("mlm_w".into(), self.mlm_w.view().into_dyn()),
            ("mlm_b".into(), self.mlm_b.view().into_dyn()),
        ]);
        out
    }

    /// Mutable counterpart of [`named`](Self::named), same order.
    pub fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let ModelParams {
            config: _,
            token_embedding,
            position_embedding,
            layers,
            final_gamma,
            final_beta,
            ref_w,
            ref_b,
            target_w,
            target_b,
            text_w,
            text_b,
            mlm_w,
            mlm_b,
        } = self;
        let mut out = vec![("token_embedding".to_string(), token_embedding.view_mut().into_dyn())];
        if let Some(p) = position_embedding {
            out.push(("position_embedding".into(), p.view_mut().into_dyn()));
        }
        for (i, layer) in layers.iter_mut().enumerate() {
            layer.named_mut(&format!("layers.{i}"), &mut out);
        }
        out.extend([
            ("final_gamma".to_string(), final_gamma.view_mut().into_dyn()),
            ("final_beta".into(), final_beta.view_mut().into_dyn()),
            ("ref_w".into(), ref_w.view_mut().into_dyn()),
            ("ref_b".into(), ref_b.view_mut().into_dyn()),
            ("target_w".into(), target_w.view_mut().into_dyn()),
            ("target_b".into(), target_b.view_mut().into_dyn()),
            ("text_w".into(), text_w.view_mut().into_dyn()),
            ("text_b".into(), text_b.view_mut().into_dyn()),
            ("mlm_w".into(), mlm_w.view_mut().into_dyn()),
            ("mlm_b".into(), mlm_b.view_mut().into_dyn()),
        ]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams<F>, scale: F) {
        for ((_, mut a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            a.scaled_add(scale, &b);
        }
    }

    pub fn scale(&mut self, s: F) {
        for (_, mut t) in self.named_mut() {
            t.mapv_inplace(|x| x * s);
        }
    }

    pub fn sum_of_squares(&self) -> F {
        self.named()
            .iter()
            .flat_map(|(_, t)| t.iter().copied())
            .fold(F::zero(), |acc, x| acc + x * x)
    }

    /// Converts every tensor to another precision.
    pub fn cast<G: Float>(&self) -> ModelParams<G> {
        let mut out = ModelParams::<G>::zeros(&self.config);
        for ((_, mut dst), (_, src)) in out.named_mut().into_iter().zip(self.named()) {
            dst.zip_mut_with(&src, |d, s| *d = G::of(s.to_f64().expect("finite")));
        }
        out
    }
}

/// Seeded initialization.
///
/// * token embeddings `N(0, 0.5²)`, sequence positions `N(0, 0.1²)`;
/// * every projection and head: Xavier-uniform, `U(±sqrt(6 / (fan_in + fan_out)))`;
/// * norms: gain 1, shift 0; all biases 0.
pub fn init_model<F: Float>(cfg: &ModelConfig, seed: u64) -> Result<ModelParams<F>> {
    cfg.validate()?;
    let mut rng = seed::rng(seed, &[0x1417]);
    let mut params = ModelParams::<F>::zeros(cfg);
    let emb = Normal::new(0.0, 0.5).expect("valid normal");
    let pos = Normal::new(0.0, 0.1).expect("valid normal");
    for (name, mut t) in params.named_mut() {
        let leaf = name.rsplit('.').next().unwrap_or(&name).to_string();
        if name == "token_embedding" {
            t.mapv_inplace(|_| F::of(emb.sample(&mut rng)));
        } else if name == "position_embedding" {
            t.mapv_inplace(|_| F::of(pos.sample(&mut rng)));
        } else if leaf.ends_with("gamma") {
            t.fill(F::one());
        } else if t.ndim() == 2 {
            let (fan_in, fan_out) = (t.shape()[0], t.shape()[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            t.mapv_inplace(|_| F::of(rng.random_range(-bound..bound)));
        }
    }
    Ok(params)
}
