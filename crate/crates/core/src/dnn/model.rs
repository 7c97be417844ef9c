use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::math::{log_loss, sigmoid, PROB_CLAMP};
use crate::signal::FeatureVector12;

use super::config::{DnnConfig, HeadKind};
use super::head::{head_backward, head_logit, head_param_len};
use super::layers::{
    activation_backward, activation_forward, dense_backward, dense_forward, dropout_mask, layer_norm_backward,
    layer_norm_forward,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Offsets of one dense layer's tensors in the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerSlots {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
    /// Gain and offset start positions; absent without layer norm.
    pub ln: Option<(usize, usize)>,
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamLayout {
    pub layers: Vec<LayerSlots>,
    pub head: usize,
    pub head_len: usize,
    pub len: usize,
}

impl ParamLayout {
    pub fn of(config: &DnnConfig) -> Self {
        let mut pos = 0;
        let mut layers = Vec::new();
        for w in config.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let wo = pos;
            pos += n_in * n_out;
            let b = pos;
            pos += n_out;
            let ln = if config.layer_norm {
                pos += 2 * n_out;
                Some((pos - 2 * n_out, pos - n_out))
            } else {
                None
            };
            layers.push(LayerSlots { n_in, n_out, w: wo, b, ln, residual: config.residual && n_in == n_out });
        }
        let head_len = head_param_len(config.head_kind, config.embedding_dim());
        ParamLayout { layers, head: pos, head_len, len: pos + head_len }
    }

    /// `(name, shape, start)` for every tensor, in storage order.
    fn tensors(&self, kind: HeadKind) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weight"), vec![l.n_out, l.n_in], l.w));
            out.push((format!("layer{i}.bias"), vec![l.n_out], l.b));
            if let Some((g, o)) = l.ln {
                out.push((format!("layer{i}.ln_gain"), vec![l.n_out], g));
                out.push((format!("layer{i}.ln_offset"), vec![l.n_out], o));
            }
        }
        let d = self.layers.last().map(|l| l.n_out).unwrap_or(0);
        match kind {
            HeadKind::SkewBilinear => out.push(("head.m".into(), vec![d, d], self.head)),
            HeadKind::ScoreDifference => out.push(("head.u".into(), vec![d], self.head)),
            HeadKind::PaperLiteral => out.push(("head.a".into(), vec![d, d], self.head)),
        }
        out.push(("head.w".into(), vec![], self.head + self.head_len - 1));
        out
    }
}

/// Activations saved by a tower pass for the backward pass.
#[derive(Debug, Clone)]
pub struct TowerCache {
    /// `inputs[l]` is the input of layer `l`; the last entry is the embedding.
    inputs: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    mask: Vec<Vec<f64>>,
    x_hat: Vec<Vec<f64>>,
    inv_std: Vec<f64>,
    /// Scratch for backward.
    grad_out: Vec<Vec<f64>>,
}

impl TowerCache {
    pub fn new(config: &DnnConfig) -> Self {
        let sizes = &config.layer_sizes;
        let outs = || sizes[1..].iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        TowerCache {
            inputs: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            z: outs(),
            a: outs(),
            mask: outs(),
            x_hat: outs(),
            inv_std: vec![0.0; sizes.len() - 1],
            grad_out: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn embedding(&self) -> &[f64] {
        self.inputs.last().unwrap()
    }
}

/// One twin-tower network. All trainable tensors live in `params`; see
/// [`DnnModel::tensor`] for named access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct DnnModel {
    pub config: DnnConfig,
    pub params: Vec<f64>,
    pub shadow: Option<Vec<f64>>,
    pub step: u64,
    pub seed: u64,
    pub(crate) layout: ParamLayout,
}

impl DnnModel {
    /// He-normal weights, zero biases, unit gains; head matrix or score vector
    /// small-random (identity `A` for the literal head) and `w = 1`.
    pub fn init<R: Rng>(config: &DnnConfig, seed: u64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::of(config);
        let mut params = vec![0.0; layout.len];
        for l in &layout.layers {
            let he = Normal::new(0.0, (2.0 / l.n_in as f64).sqrt()).map_err(|e| FusionError::Internal(e.to_string()))?;
            for p in &mut params[l.w..l.w + l.n_in * l.n_out] {
                *p = he.sample(rng);
            }
            if let Some((g, _)) = l.ln {
                params[g..g + l.n_out].fill(1.0);
            }
        }
        let d = config.embedding_dim();
        let head = &mut params[layout.head..layout.head + layout.head_len];
        match config.head_kind {
            HeadKind::PaperLiteral => {
                for i in 0..d {
                    head[i * d + i] = 1.0;
                }
            }
            HeadKind::SkewBilinear | HeadKind::ScoreDifference => {
                let n = Normal::new(0.0, config.head_init_std).map_err(|e| FusionError::Config(e.to_string()))?;
                let k = head.len() - 1;
                for p in &mut head[..k] {
                    *p = n.sample(rng);
                }
            }
        }
        *head.last_mut().unwrap() = 1.0;
        let shadow = config.ema_decay.map(|_| params.clone());
        Ok(DnnModel { config: config.clone(), params, shadow, step: 0, seed, layout })
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    /// Copy of the named tensor, e.g. `layer0.weight` or `head.m`.
    pub fn tensor(&self, name: &str) -> Option<(Vec<usize>, Vec<f64>)> {
        self.layout.tensors(self.config.head_kind).into_iter().find(|t| t.0 == name).map(|(_, shape, start)| {
            let n = shape.iter().product::<usize>();
            (shape, self.params[start..start + n].to_vec())
        })
    }

    /// Parameters used for prediction: the EMA shadow when configured.
    pub fn eval_params(&self) -> &[f64] {
        match (&self.shadow, self.config.eval_with_ema) {
            (Some(s), true) => s,
            _ => &self.params,
        }
    }

    /// Runs one tower over `x`, leaving all intermediates in `cache`. Dropout
    /// masks are drawn from `rng` in train mode only.
    pub fn tower_forward_with<R: Rng>(
        &self,
        params: &[f64],
        x: &[f64],
        mode: Mode,
        rng: &mut R,
        cache: &mut TowerCache,
    ) {
        let cfg = &self.config;
        let last = self.layout.layers.len() - 1;
        cache.inputs[0].copy_from_slice(x);
        for (l, s) in self.layout.layers.iter().enumerate() {
            let (before, after) = cache.inputs.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            dense_forward(&params[s.w..s.w + s.n_in * s.n_out], &params[s.b..s.b + s.n_out], input, &mut cache.z[l]);
            activation_forward(cfg.activation, &cache.z[l], &mut cache.a[l]);
            // Dropout on hidden layers; the embedding layer is left intact.
            if mode == Mode::Train && l < last {
                dropout_mask(cfg.dropout_rate, &mut cache.mask[l], rng);
            } else {
                cache.mask[l].fill(1.0);
            }
            let d: Vec<f64> = cache.a[l].iter().zip(&cache.mask[l]).map(|(a, m)| a * m).collect();
            match s.ln {
                Some((g, o)) => {
                    cache.inv_std[l] = layer_norm_forward(
                        &d,
                        &params[g..g + s.n_out],
                        &params[o..o + s.n_out],
                        cfg.layer_norm_eps,
                        &mut cache.x_hat[l],
                        out,
                    );
                }
                None => out.copy_from_slice(&d),
            }
            if s.residual {
                for (o, i) in out.iter_mut().zip(input.iter()) {
                    *o += i;
                }
            }
        }
    }

    /// Eval-mode embedding of `fv`.
    pub fn embed(&self, params: &[f64], fv: &[f64]) -> Vec<f64> {
        let mut cache = TowerCache::new(&self.config);
        self.tower_forward_with(params, fv, Mode::Eval, &mut NoRng, &mut cache);
        cache.embedding().to_vec()
    }

    /// Accumulates parameter gradients given the embedding gradient `dh`
    /// (consumed). The cache must hold the matching forward pass.
    pub fn tower_backward(&self, params: &[f64], cache: &mut TowerCache, dh: &[f64], grad: &mut [f64]) {
        let n_layers = self.layout.layers.len();
        cache.grad_out[n_layers].copy_from_slice(dh);
        for l in (0..n_layers).rev() {
            let s = &self.layout.layers[l];
            let (lower, upper) = cache.grad_out.split_at_mut(l + 1);
            let dout = &upper[0];
            let dx = &mut lower[l];
            dx.fill(0.0);
            if s.residual {
                dx.copy_from_slice(dout);
            }
            let mut dd = vec![0.0; s.n_out];
            match s.ln {
                Some((g, o)) => {
                    let (gpart, rest) = grad.split_at_mut(o);
                    layer_norm_backward(
                        dout,
                        &cache.x_hat[l],
                        cache.inv_std[l],
                        &params[g..g + s.n_out],
                        &mut gpart[g..g + s.n_out],
                        &mut rest[..s.n_out],
                        &mut dd,
                    );
                }
                None => dd.copy_from_slice(dout),
            }
            for (v, m) in dd.iter_mut().zip(&cache.mask[l]) {
                *v *= m;
            }
            let mut dz = vec![0.0; s.n_out];
            activation_backward(self.config.activation, &cache.z[l], &cache.a[l], &dd, &mut dz);
            let (gw, gb) = grad[s.w..s.b + s.n_out].split_at_mut(s.n_in * s.n_out);
            let dx_opt = if l > 0 { Some(&mut dx[..]) } else { None };
            dense_backward(&params[s.w..s.w + s.n_in * s.n_out], &cache.inputs[l], &dz, gw, gb, dx_opt);
        }
    }

    /// Raw head probability `p(a, b)` in eval mode with the given parameters.
    pub fn raw_probability(&self, params: &[f64], fv: &FeatureVector12) -> f64 {
        let h1 = self.embed(params, fv.as_slice());
        let h2 = self.embed(params, fv.flip().as_slice());
        sigmoid(head_logit(self.config.head_kind, self.head_params(params), &h1, &h2))
    }

    /// Eval-mode probability that side a is correct. The literal head is
    /// symmetrized; the antisymmetric heads are used as they are.
    pub fn predict_fv(&self, fv: &FeatureVector12) -> f64 {
        let params = self.eval_params();
        let p = self.raw_probability(params, fv);
        if self.config.head_kind.is_antisymmetric() {
            p
        } else {
            let q = self.raw_probability(params, &fv.flip());
            0.5 * (p + 1.0 - q)
        }
    }

    pub(crate) fn head_params<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.layout.head..self.layout.head + self.layout.head_len]
    }

    /// Weighted binary cross-entropy of `p = head(tower(ab), tower(ba))`;
    /// gradients are accumulated into `grad` scaled by `scale`.
    #[allow(clippy::too_many_arguments)]
    pub fn pair_loss<R: Rng>(
        &self,
        params: &[f64],
        fv: &FeatureVector12,
        label: u8,
        weight: f64,
        mode: Mode,
        rng: &mut R,
        ws: &mut PairWorkspace,
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        self.tower_forward_with(params, fv.as_slice(), mode, rng, &mut ws.ab);
        self.tower_forward_with(params, fv.flip().as_slice(), mode, rng, &mut ws.ba);
        let kind = self.config.head_kind;
        let head = self.head_params(params);
        let logit = head_logit(kind, head, ws.ab.embedding(), ws.ba.embedding());
        let p = sigmoid(logit);
        let loss = log_loss(p, label, weight);
        if let Some((grad, scale)) = grad {
            // d/dlogit of the clamped BCE; zero once the clamp is active.
            let clamped = p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP;
            let dlogit = if clamped { 0.0 } else { scale * weight * (p - label as f64) };
            let d = self.config.embedding_dim();
            let (mut dh1, mut dh2) = (vec![0.0; d], vec![0.0; d]);
            let hs = self.layout.head;
            head_backward(
                kind,
                head,
                ws.ab.embedding(),
                ws.ba.embedding(),
                dlogit,
                &mut grad[hs..hs + self.layout.head_len],
                &mut dh1,
                &mut dh2,
            );
            self.tower_backward(params, &mut ws.ab, &dh1, grad);
            self.tower_backward(params, &mut ws.ba, &dh2, grad);
        }
        loss
    }

    /// Gradient of the BCE for one sample; convenience for tests and checks.
    pub fn loss_and_gradient(&self, params: &[f64], fv: &FeatureVector12, label: u8, weight: f64) -> (f64, Vec<f64>) {
        let mut ws = PairWorkspace::new(&self.config);
        let mut grad = vec![0.0; self.layout.len];
        let loss = self.pair_loss(params, fv, label, weight, Mode::Eval, &mut NoRng, &mut ws, Some((&mut grad, 1.0)));
        (loss, grad)
    }
}

/// Reusable caches for both towers of one pair.
#[derive(Debug, Clone)]
pub struct PairWorkspace {
    ab: TowerCache,
    ba: TowerCache,
}

impl PairWorkspace {
    pub fn new(config: &DnnConfig) -> Self {
        PairWorkspace { ab: TowerCache::new(config), ba: TowerCache::new(config) }
    }
}

/// Random source for eval-mode passes, which never draw.
pub struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval mode draws no randomness")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval mode draws no randomness")
    }
    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("eval mode draws no randomness")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRepr {
    config: DnnConfig,
    seed: u64,
    step: u64,
    tensors: Vec<NamedTensor>,
    shadow: Option<Vec<NamedTensor>>,
}

fn to_tensors(layout: &ParamLayout, kind: HeadKind, flat: &[f64]) -> Vec<NamedTensor> {
    layout
        .tensors(kind)
        .into_iter()
        .map(|(name, shape, start)| {
            let n = shape.iter().product::<usize>();
            NamedTensor { name, shape, values: flat[start..start + n].to_vec() }
        })
        .collect()
}

fn from_tensors(layout: &ParamLayout, kind: HeadKind, tensors: &[NamedTensor]) -> Result<Vec<f64>> {
    let expected = layout.tensors(kind);
    if tensors.len() != expected.len() {
        return Err(FusionError::Input(format!("expected {} tensors, found {}", expected.len(), tensors.len())));
    }
    let mut flat = vec![0.0; layout.len];
    for ((name, shape, start), t) in expected.iter().zip(tensors) {
        if &t.name != name || &t.shape != shape || t.values.len() != shape.iter().product::<usize>() {
            return Err(FusionError::Input(format!("tensor {} does not match expected {name} {shape:?}", t.name)));
        }
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::Input(format!("tensor {name} has non-finite values")));
        }
        flat[*start..*start + t.values.len()].copy_from_slice(&t.values);
    }
    Ok(flat)
}

impl From<DnnModel> for ModelRepr {
    fn from(m: DnnModel) -> Self {
        let kind = m.config.head_kind;
        ModelRepr {
            tensors: to_tensors(&m.layout, kind, &m.params),
            shadow: m.shadow.as_ref().map(|s| to_tensors(&m.layout, kind, s)),
            config: m.config,
            seed: m.seed,
            step: m.step,
        }
    }
}

impl TryFrom<ModelRepr> for DnnModel {
    type Error = FusionError;

    fn try_from(r: ModelRepr) -> Result<Self> {
        r.config.validate()?;
        let layout = ParamLayout::of(&r.config);
        let kind = r.config.head_kind;
        let params = from_tensors(&layout, kind, &r.tensors)?;
        let shadow = r.shadow.as_ref().map(|s| from_tensors(&layout, kind, s)).transpose()?;
        Ok(DnnModel { config: r.config, params, shadow, step: r.step, seed: r.seed, layout })
    }
}
