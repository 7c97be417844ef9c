use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FusionError, Result};
use crate::optim::{ema_update, Adam};
use crate::signal::{featurize, FeatureVector12, NormConfig, PairSample};

use super::config::DnnConfig;
use super::ensemble::DnnEnsemble;
use super::batch::BatchWorkspace;
use super::model::{DnnModel, Mode};

const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// Seed of ensemble member `index` under `master`.
pub fn member_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(1000 + index as u64);
    rng.random()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-step report passed to the training observer.
#[derive(Debug, Clone, Copy)]
pub struct DnnStepInfo {
    pub step: u64,
    pub lr: f64,
    pub batch_loss: f64,
}

/// Trains one network for `config.max_steps` minibatch steps, reshuffling
/// whenever the data is exhausted.
pub fn train_model<F>(fvs: &[FeatureVector12], samples: &[PairSample], config: &DnnConfig, seed: u64, mut observer: F) -> Result<DnnModel>
where
    F: FnMut(&DnnStepInfo),
{
    if samples.is_empty() {
        return Err(FusionError::Input("dnn training set is empty".into()));
    }
    let mut model = DnnModel::init(config, seed, &mut stream(seed, INIT_STREAM))?;
    let mut dropout_rng = stream(seed, DROPOUT_STREAM);
    let mut shuffle_rng = stream(seed, SHUFFLE_STREAM);
    let mut adam = Adam::new(model.param_count());
    let mut ws = BatchWorkspace::default();
    let mut grad = vec![0.0; model.param_count()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    while adam.step < config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(samples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        grad.fill(0.0);
        let batch_loss = model.batch_loss_and_grad(&model.params, fvs, samples, &batch, Mode::Train, &mut dropout_rng, &mut ws, &mut grad);
        let lr = config.lr_schedule.rate_at(adam.step);
        adam.step(&mut model.params, &grad, lr);
        if let (Some(decay), Some(shadow)) = (config.ema_decay, model.shadow.as_mut()) {
            ema_update(shadow, &model.params, decay);
        }
        model.step = adam.step;
        observer(&DnnStepInfo { step: adam.step, lr, batch_loss });
    }
    Ok(model)
}

/// Trains `config.ensemble_size` members that differ only in their seeds.
/// Members train concurrently; each member's loop is sequential.
pub fn train_ensemble(train_set: &[PairSample], norm: &NormConfig, config: &DnnConfig) -> Result<DnnEnsemble> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(FusionError::Input("dnn training set is empty".into()));
    }
    let fvs = featurize(train_set, norm)?;
    let members = (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| train_model(&fvs, train_set, config, member_seed(config.seed, i), |_| {}))
        .collect::<Result<Vec<_>>>()?;
    DnnEnsemble::new(members, config.combine, norm.clone())
}
