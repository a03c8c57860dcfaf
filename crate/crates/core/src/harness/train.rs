use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{argmax, build_gallery, Gallery};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::net::{forward, loss_and_gradient, NetworkConfig, NetworkParams, SampleFeatures};
use crate::par;

use super::config::TrainConfig;
use super::model::Model;
use super::preprocess::{preprocess_labeled, require_nonempty};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub params: NetworkParams,
    pub gallery: Gallery,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

/// Mean loss and Softmax accuracy.
pub fn score(
    network: &NetworkConfig,
    params: &NetworkParams,
    data: &[(SampleFeatures, usize)],
) -> Result<(f64, f64)> {
    let probs = par::try_map(data, |(x, _)| forward(network, params, x).map(|r| r.0))?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, (_, y)) in probs.iter().zip(data) {
        loss -= p[*y].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(argmax(p) == *y);
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch SGD on cross-entropy.
///
/// Per-sample gradients are computed in parallel and summed in batch order,
/// so the result does not depend on the worker count. Parameters are rounded
/// to `f32` after every step. The parameters with the best validation
/// accuracy (lower validation loss breaking ties) are returned.
pub fn train(
    config: &TrainConfig,
    network: &NetworkConfig,
    train_set: &[(SampleFeatures, usize)],
    val_set: &[(SampleFeatures, usize)],
) -> Result<Trained> {
    require_nonempty(train_set, "training set")?;
    config.validate()?;
    let mut params = NetworkParams::init(network, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let select = if val_set.is_empty() { train_set } else { val_set };

    let (l0, a0) = score(network, &params, select)?;
    let mut best = (a0, -l0, 0usize, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        for (b, batch) in batches.iter().enumerate() {
            let results = par::try_map(batch, |&i| {
                let (x, y) = &train_set[i];
                loss_and_gradient(network, &params, x, *y)
            })?;
            let mut sum = NetworkParams::zeros(network)?;
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                sum.add_scaled(g, 1.0);
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() || !sum.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            params.add_scaled(&sum, -config.learning_rate / batch.len() as f64);
            params.quantize();
        }
        let (val_loss, val_accuracy) = score(network, &params, select)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: batches.len(),
                loss: val_loss,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches.len() as f64,
            val_loss,
            val_accuracy,
        });
        if (val_accuracy, -val_loss) > (best.0, best.1) {
            best = (val_accuracy, -val_loss, epoch, params.clone());
        }
    }

    let (samples, labels): (Vec<SampleFeatures>, Vec<usize>) = train_set.iter().cloned().unzip();
    let params = best.3;
    let gallery = build_gallery(network, &params, &samples, &labels)?;
    Ok(Trained {
        params,
        gallery,
        history,
        best_epoch: best.2,
    })
}

/// Preprocesses both splits, sizes the network from the data and trains.
pub fn train_dataset(config: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(Model, Vec<EpochRecord>)> {
    require_nonempty(&train_set.samples, "training set")?;
    config.validate()?;
    let joints = train_set.skeleton_joints();
    let network = config.network(train_set.num_classes(), joints)?;
    let tr = preprocess_labeled(&train_set.samples, config)?;
    let va = preprocess_labeled(&val_set.samples, config)?;
    let t = train(config, &network, &tr, &va)?;
    Ok((
        Model {
            network,
            params: t.params,
            gallery: t.gallery,
            class_names: train_set.class_names.clone(),
            skeleton_joints: joints.filter(|_| config.use_skeleton),
        },
        t.history,
    ))
}

/// History as CSV.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for r in history {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy
        ));
    }
    s
}
