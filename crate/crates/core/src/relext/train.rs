use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::cnn::{forward, loss_and_grad, CnnParams, CnnShape};
use super::{featurize_triple, label_index, RelationExample, RelationModel, RelationTriple, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub tag_dim: usize,
    pub windows: Vec<usize>,
    pub filters: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Words rarer than this in the training set map to the unknown id.
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let s = CnnShape::with_vocab(2);
        TrainConfig {
            word_dim: s.word_dim,
            pos_dim: s.pos_dim,
            tag_dim: s.tag_dim,
            windows: s.windows,
            filters: s.filters,
            hidden: s.hidden,
            dropout: 0.5,
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 5,
            seed: 7,
            min_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn shape(&self, vocab: usize) -> CnnShape {
        CnnShape {
            vocab,
            word_dim: self.word_dim,
            pos_dim: self.pos_dim,
            tag_dim: self.tag_dim,
            windows: self.windows.clone(),
            filters: self.filters,
            hidden: self.hidden,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpochStats>,
    /// Epoch whose parameters were kept, 0 meaning the initialisation.
    pub best_epoch: usize,
}

struct Adam {
    m: CnnParams,
    v: CnnParams,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut CnnParams, grad: &CnnParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let g = grad.tensors();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(g)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = Self::B1 * m.data[i] + (1.0 - Self::B1) * gi;
                v.data[i] = Self::B2 * v.data[i] + (1.0 - Self::B2) * gi * gi;
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn validation(params: &CnnParams, val: &[RelationExample]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for ex in val {
        let p = forward(params, ex)?.probs;
        let y = label_index(ex.label.expect("featurized with label"));
        loss -= p[y].ln();
        let pred = if p[0] >= p[1] { 0 } else { 1 };
        correct += (pred == y) as usize;
    }
    Ok((loss / val.len() as f64, correct as f64 / val.len() as f64))
}

/// Mini-batch Adam on the mean cross-entropy. Keeps the parameters with the
/// lowest validation loss seen after any epoch.
pub fn train(
    train: &[RelationTriple],
    val: &[RelationTriple],
    config: &TrainConfig,
) -> Result<(RelationModel, TrainReport)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let vocab = Vocab::build(
        train.iter().flat_map(|t| t.tokens.iter().map(|k| k.normalized.as_str())),
        config.min_count,
    );
    let train_ex = train.iter().map(|t| featurize_triple(t, &vocab)).collect::<Result<Vec<_>>>()?;
    let val_ex = val.iter().map(|t| featurize_triple(t, &vocab)).collect::<Result<Vec<_>>>()?;

    let mut params = CnnParams::init(config.shape(vocab.len()), &mut rng::derived(config.seed, 0))?;
    let mut order_rng = rng::derived(config.seed, 1);
    let mut dropout_rng = rng::derived(config.seed, 2);
    let mut adam = Adam {
        m: params.zeros_like(),
        v: params.zeros_like(),
        t: 0,
    };
    let mut grad = params.zeros_like();
    let mut order: Vec<usize> = (0..train_ex.len()).collect();

    let (val_loss, val_accuracy) = validation(&params, &val_ex)?;
    let mut curve = vec![EpochStats {
        epoch: 0,
        train_loss: f64::NAN,
        val_loss,
        val_accuracy,
    }];
    let mut best = (val_loss, 0, params.clone());

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grad.tensors_mut().into_iter().for_each(|t| t.data.iter_mut().for_each(|g| *g = 0.0));
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += loss_and_grad(&params, &train_ex[i], Some((config.dropout, &mut dropout_rng)), &mut grad)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch,
                    message: format!("loss became {batch_loss}"),
                });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / chunk.len() as f64;
            grad.tensors_mut().into_iter().for_each(|t| t.data.iter_mut().for_each(|g| *g *= scale));
            adam.step(&mut params, &grad, config.learning_rate);
            if !params.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch,
                    message: "parameters became non-finite".into(),
                });
            }
        }
        let (val_loss, val_accuracy) = validation(&params, &val_ex)?;
        curve.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_ex.len() as f64,
            val_loss,
            val_accuracy,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        }
    }
    Ok((
        RelationModel { params: best.2, vocab },
        TrainReport {
            curve,
            best_epoch: best.1,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relext::planted::{planted_corpus, PlantedConfig};
    use crate::resources::Resources;

    fn small() -> TrainConfig {
        TrainConfig {
            word_dim: 8,
            pos_dim: 4,
            tag_dim: 3,
            filters: 6,
            hidden: 8,
            epochs: 2,
            ..TrainConfig::default()
        }
    }

    fn data() -> Vec<RelationTriple> {
        let cfg = PlantedConfig { size: 200, seed: 3 };
        planted_corpus(&Resources::builtin(), &cfg).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let d = data();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small()
        };
        let (model, _) = train(&d[..150], &d[150..], &cfg).unwrap();
        let init = CnnParams::init(cfg.shape(model.vocab.len()), &mut rng::derived(cfg.seed, 0)).unwrap();
        assert_eq!(model.params, init);
    }

    #[test]
    fn same_seed_same_model() {
        let d = data();
        let a = train(&d[..150], &d[150..], &small()).unwrap();
        let b = train(&d[..150], &d[150..], &small()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.curve.len(), 3);
    }

    #[test]
    fn bad_config() {
        let d = data();
        let cfg = TrainConfig {
            batch_size: 0,
            ..small()
        };
        assert!(matches!(train(&d, &d, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_names_epoch_and_batch() {
        let d = data();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            ..small()
        };
        match train(&d[..150], &d[150..], &cfg) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("{other:?}"),
        }
    }
}
