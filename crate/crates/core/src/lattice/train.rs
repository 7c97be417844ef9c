use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::math::{log_loss, sigmoid, PROB_CLAMP};
use crate::optim::{Adam, LrSchedule};
use crate::signal::{featurize, FeatureVector12, NormConfig, PairSample, SignalName, PAIR_FEATURES, SIGNALS_PER_SIDE};

use super::calibrator::Calibrator;
use super::model::LatticeEnsembleModel;
use super::submodel::{InterpScratch, LatticeSubmodel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub submodels: usize,
    pub subset_size: usize,
    pub keypoints: usize,
    /// Vertices along `langid_score` dimensions (features 0 and 6).
    pub langid_vertices: usize,
    pub other_vertices: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier applied after this fraction of all steps.
    pub decay_after: f64,
    pub decay_factor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Standard deviation of the noise added to the initial lattice ramp.
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            submodels: 20,
            subset_size: 8,
            keypoints: 10,
            langid_vertices: 3,
            other_vertices: 2,
            learning_rate: 0.05,
            decay_after: 0.6,
            decay_factor: 0.1,
            batch_size: 256,
            epochs: 30,
            init_noise: 0.01,
            seed: 0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FusionError::Config(m.to_string()));
        if self.submodels == 0 {
            return bad("submodels must be positive");
        }
        if self.subset_size == 0 || self.subset_size > PAIR_FEATURES {
            return bad("subset_size must be in 1..=12");
        }
        if self.keypoints < 2 || self.langid_vertices < 2 || self.other_vertices < 2 {
            return bad("keypoints and vertex counts must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.decay_after) || !(self.decay_factor > 0.0) {
            return bad("decay_after must be in [0,1] and decay_factor positive");
        }
        Ok(())
    }

    fn vertices_for(&self, feature: usize) -> usize {
        if feature % SIGNALS_PER_SIDE == SignalName::LangidScore.slot() {
            self.langid_vertices
        } else {
            self.other_vertices
        }
    }
}

/// Seeded initial model: random feature subsets, identity-ramp calibrators, and
/// lattices that increase along every calibrated dimension plus small noise.
///
/// Calibrators already point every feature towards "side a is correct", so a
/// ramp that increases in all calibrated coordinates rises with side a's
/// evidence and falls with side b's.
pub fn init_model(norm: &NormConfig, config: &LatticeConfig) -> Result<LatticeEnsembleModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.init_noise).map_err(|e| FusionError::Config(e.to_string()))?;
    let calibrators = (0..PAIR_FEATURES).map(|i| Calibrator::uniform(i, config.keypoints)).collect();
    let mut submodels = Vec::with_capacity(config.submodels);
    for _ in 0..config.submodels {
        let mut subset = index::sample(&mut rng, PAIR_FEATURES, config.subset_size).into_vec();
        subset.sort_unstable();
        let verts: Vec<usize> = subset.iter().map(|&f| config.vertices_for(f)).collect();
        let mut sub = LatticeSubmodel::new(subset, verts.clone(), vec![0.0; verts.iter().product()])?;
        let strides = sub.strides();
        let n = verts.len() as f64;
        for (idx, p) in sub.params.iter_mut().enumerate() {
            let ramp: f64 = verts
                .iter()
                .zip(&strides)
                .map(|(&v, &s)| ((idx / s) % v) as f64 / (v - 1) as f64 - 0.5)
                .sum();
            *p = 4.0 * ramp / n + noise.sample(&mut rng);
        }
        submodels.push(sub);
    }
    let model = LatticeEnsembleModel { calibrators, submodels, norm_config: norm.clone(), seed: config.seed };
    model.validate()?;
    Ok(model)
}

/// Offsets of each parameter group in the flat parameter/gradient layout:
/// all calibrator tables, then per submodel its vertex table, scale and bias.
#[derive(Debug, Clone)]
struct Layout {
    calibrators: Vec<usize>,
    submodels: Vec<usize>,
    len: usize,
}

impl Layout {
    fn of(model: &LatticeEnsembleModel) -> Self {
        let mut off = 0;
        let calibrators = model
            .calibrators
            .iter()
            .map(|c| {
                let o = off;
                off += c.output_values.len();
                o
            })
            .collect();
        let submodels = model
            .submodels
            .iter()
            .map(|s| {
                let o = off;
                off += s.params.len() + 2;
                o
            })
            .collect();
        Layout { calibrators, submodels, len: off }
    }

    fn flatten(&self, model: &LatticeEnsembleModel) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        for c in &model.calibrators {
            out.extend_from_slice(&c.output_values);
        }
        for s in &model.submodels {
            out.extend_from_slice(&s.params);
            out.push(s.scale);
            out.push(s.bias);
        }
        out
    }

    fn unflatten(&self, flat: &[f64], model: &mut LatticeEnsembleModel) {
        for (c, &o) in model.calibrators.iter_mut().zip(&self.calibrators) {
            let n = c.output_values.len();
            c.output_values.copy_from_slice(&flat[o..o + n]);
        }
        for (s, &o) in model.submodels.iter_mut().zip(&self.submodels) {
            let n = s.params.len();
            s.params.copy_from_slice(&flat[o..o + n]);
            s.scale = flat[o + n];
            s.bias = flat[o + n + 1];
        }
    }
}

struct Workspace {
    scratches: Vec<InterpScratch>,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl Workspace {
    fn new(model: &LatticeEnsembleModel) -> Self {
        Workspace {
            scratches: vec![InterpScratch::default(); model.submodels.len()],
            u: Vec::new(),
            du: Vec::new(),
        }
    }
}

/// Adds `scale * d(loss)/d(params)` for one sample into `grad`; returns the loss.
#[allow(clippy::too_many_arguments)]
fn accumulate_sample(
    model: &LatticeEnsembleModel,
    layout: &Layout,
    fv: &FeatureVector12,
    label: u8,
    weight: f64,
    scale: f64,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let calibrated = model.calibrate_all(fv);
    let k = model.submodels.len() as f64;
    let mut raw = Vec::with_capacity(model.submodels.len());
    let mut probs = Vec::with_capacity(model.submodels.len());
    for (sub, scratch) in model.submodels.iter().zip(&mut ws.scratches) {
        ws.u.clear();
        ws.u.extend(sub.feature_subset.iter().map(|&f| calibrated[f]));
        let y = sub.interpolate_with(&ws.u, scratch);
        raw.push(y);
        probs.push(sigmoid(sub.scale * y + sub.bias));
    }
    let p = probs.iter().sum::<f64>() / k;
    let loss = log_loss(p, label, weight);
    let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let dl_dp = weight * (p - label as f64) / (pc * (1.0 - pc)) * scale;

    let mut dcal = [0.0; PAIR_FEATURES];
    for (i, sub) in model.submodels.iter().enumerate() {
        let dz = dl_dp * probs[i] * (1.0 - probs[i]) / k;
        let off = layout.submodels[i];
        let n = sub.params.len();
        grad[off + n] += dz * raw[i];
        grad[off + n + 1] += dz;
        ws.du.clear();
        ws.du.resize(sub.dims(), 0.0);
        sub.backward(&mut ws.scratches[i], dz * sub.scale, &mut grad[off..off + n], &mut ws.du);
        for (&f, &g) in sub.feature_subset.iter().zip(&ws.du) {
            dcal[f] += g;
        }
    }
    for (j, cal) in model.calibrators.iter().enumerate() {
        if dcal[j] == 0.0 {
            continue;
        }
        let seg = cal.locate(fv.0[j]);
        let o = layout.calibrators[j] + seg.seg;
        grad[o] += dcal[j] * (1.0 - seg.t);
        grad[o + 1] += dcal[j] * seg.t;
    }
    loss
}

/// Per-step report passed to the training observer.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: u64,
    pub batch_loss: f64,
}

const CHUNK: usize = 32;

/// Sum of per-sample gradients over `batch`, divided by the batch length.
/// Chunks are reduced in order, so the result does not depend on thread count.
fn batch_gradient(
    model: &LatticeEnsembleModel,
    layout: &Layout,
    fvs: &[FeatureVector12],
    samples: &[PairSample],
    batch: &[usize],
) -> (Vec<f64>, f64) {
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<(Vec<f64>, f64)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; layout.len];
            let mut ws = Workspace::new(model);
            let mut loss = 0.0;
            for &i in chunk {
                loss += accumulate_sample(model, layout, &fvs[i], samples[i].label, samples[i].weight, scale, &mut grad, &mut ws);
            }
            (grad, loss)
        })
        .collect();
    let mut total = vec![0.0; layout.len];
    let mut loss = 0.0;
    for (g, l) in partials {
        for (t, v) in total.iter_mut().zip(&g) {
            *t += v;
        }
        loss += l;
    }
    (total, loss * scale)
}

/// Weighted mean log loss of the unsymmetrized forward pass.
pub fn mean_log_loss(model: &LatticeEnsembleModel, samples: &[PairSample]) -> Result<f64> {
    let fvs = featurize(samples, &model.norm_config)?;
    let (num, den) = fvs
        .par_iter()
        .zip(samples)
        .map(|(fv, s)| (log_loss(model.forward(fv), s.label, s.weight), s.weight))
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(num / den)
}

pub fn train(train_set: &[PairSample], norm: &NormConfig, config: &LatticeConfig) -> Result<LatticeEnsembleModel> {
    train_with_observer(train_set, norm, config, |_, _| {})
}

/// Minibatch Adam on the weighted log loss of the forward pass. After every
/// step each calibrator table is projected back onto the monotone cone, then
/// `observer` sees the updated model.
pub fn train_with_observer<F>(
    train_set: &[PairSample],
    norm: &NormConfig,
    config: &LatticeConfig,
    mut observer: F,
) -> Result<LatticeEnsembleModel>
where
    F: FnMut(&StepInfo, &LatticeEnsembleModel),
{
    if train_set.is_empty() {
        return Err(FusionError::Input("lattice training set is empty".into()));
    }
    let mut model = init_model(norm, config)?;
    let layout = Layout::of(&model);
    let fvs = featurize(train_set, norm)?;
    let mut flat = layout.flatten(&model);
    let mut adam = Adam::new(layout.len);

    let steps_per_epoch = train_set.len().div_ceil(config.batch_size) as u64;
    let total_steps = steps_per_epoch * config.epochs as u64;
    let decay_step = (config.decay_after * total_steps as f64).round() as u64;
    let schedule = if decay_step > 0 && decay_step < total_steps {
        LrSchedule(vec![(0, config.learning_rate), (decay_step, config.learning_rate * config.decay_factor)])
    } else {
        LrSchedule::constant(config.learning_rate)
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let (grad, batch_loss) = batch_gradient(&model, &layout, &fvs, train_set, batch);
            adam.scheduled_step(&mut flat, &grad, &schedule);
            layout.unflatten(&flat, &mut model);
            for c in &mut model.calibrators {
                c.project();
            }
            // Keep the optimizer's copy in sync with the projected tables.
            flat = layout.flatten(&model);
            let info = StepInfo { epoch, step: adam.step, batch_loss };
            observer(&info, &model);
        }
    }
    Ok(model)
}
