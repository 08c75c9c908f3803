use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::kg::{age_group, AGE_GROUPS};
use crate::rng;

use super::CaseConcepts;

/// A case with one concept hidden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub case_id: String,
    pub age: u32,
    pub gender: Gender,
    pub input: Vec<String>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedEval {
    pub examples: Vec<MaskedExample>,
    /// Cases with fewer than two concepts.
    pub skipped: usize,
}

/// Masking weights `1 / freq` for the concepts of one case; unseen concepts
/// count as seen once.
pub fn mask_weights(concepts: &[String], freq: &BTreeMap<String, usize>) -> Vec<f64> {
    concepts
        .iter()
        .map(|c| 1.0 / freq.get(c).copied().unwrap_or(0).max(1) as f64)
        .collect()
}

/// Index of the concept to hide, drawn with probability proportional to
/// its inverse corpus frequency.
pub fn sample_mask(concepts: &[String], freq: &BTreeMap<String, usize>, rng: &mut rng::Rng) -> usize {
    let w = mask_weights(concepts, freq);
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.len() - 1
}

fn masked(case: &CaseConcepts, i: usize) -> MaskedExample {
    let mut input = case.concepts.clone();
    let target = input.remove(i);
    MaskedExample {
        case_id: case.id.clone(),
        age: case.age,
        gender: case.gender,
        input,
        target,
    }
}

/// One inverse-frequency mask per case with at least two concepts.
/// `freq` holds training-split frequencies.
pub fn build_masked_eval(cases: &[CaseConcepts], freq: &BTreeMap<String, usize>, seed: u64) -> MaskedEval {
    let mut rng = rng::seeded(seed);
    let mut examples = Vec::new();
    let mut skipped = 0;
    for case in cases {
        if case.concepts.len() < 2 {
            skipped += 1;
            continue;
        }
        let i = sample_mask(&case.concepts, freq, &mut rng);
        examples.push(masked(case, i));
    }
    MaskedEval { examples, skipped }
}

/// Every single-concept mask of every case with at least two concepts.
pub fn training_examples(cases: &[CaseConcepts]) -> Vec<MaskedExample> {
    cases
        .iter()
        .filter(|c| c.concepts.len() >= 2)
        .flat_map(|c| (0..c.concepts.len()).map(move |i| masked(c, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            hidden: 128,
            epochs: 10,
            batch_size: 64,
            learning_rate: 5e-3,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    /// Mean validation cross-entropy after each epoch, index 0 before training.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// Multi-hot concepts plus age group and gender, one rectified hidden
/// layer, softmax over the concept vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPredictor {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    hidden: usize,
    /// `[w1 (inputs x hidden) | b1 | w2 (vocab x hidden) | b2]`
    params: Vec<f64>,
}

const DEMOGRAPHIC_INPUTS: usize = AGE_GROUPS.len() + 3;

fn gender_slot(g: Gender) -> usize {
    Gender::ALL.iter().position(|&x| x == g).expect("listed")
}

impl MaskedPredictor {
    pub fn init(vocab: Vec<String>, hidden: usize, seed: u64) -> Result<Self> {
        if vocab.is_empty() || hidden == 0 {
            return Err(Error::Config("predictor needs a vocabulary and a hidden layer".into()));
        }
        let index = vocab.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let v = vocab.len();
        let inputs = v + DEMOGRAPHIC_INPUTS;
        let mut r = rng::seeded(seed);
        let s1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let s2 = (6.0 / (hidden + v) as f64).sqrt();
        let mut params = Vec::with_capacity(inputs * hidden + hidden + v * hidden + v);
        params.extend((0..inputs * hidden).map(|_| r.gen_range(-s1..=s1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        params.extend((0..v * hidden).map(|_| r.gen_range(-s2..=s2)));
        params.extend(std::iter::repeat_n(0.0, v));
        Ok(MaskedPredictor {
            vocab,
            index,
            hidden,
            params,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn inputs(&self) -> usize {
        self.vocab.len() + DEMOGRAPHIC_INPUTS
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.inputs() * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.vocab.len() * self.hidden;
        (b1, w2, b2)
    }

    fn active(&self, input: &[String], age: u32, gender: Gender) -> Vec<usize> {
        let v = self.vocab.len();
        let mut a: Vec<usize> = input.iter().filter_map(|c| self.index.get(c).copied()).collect();
        a.sort_unstable();
        a.dedup();
        a.push(v + age_group(age));
        a.push(v + AGE_GROUPS.len() + gender_slot(gender));
        a
    }

    fn hidden_pre(&self, active: &[usize]) -> Vec<f64> {
        let h = self.hidden;
        let (b1, _, _) = self.offsets();
        let mut z = self.params[b1..b1 + h].to_vec();
        for &i in active {
            for (zj, w) in z.iter_mut().zip(&self.params[i * h..(i + 1) * h]) {
                *zj += w;
            }
        }
        z
    }

    fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let (_, w2, b2) = self.offsets();
        (0..self.vocab.len())
            .map(|c| {
                let row = &self.params[w2 + c * h..w2 + (c + 1) * h];
                self.params[b2 + c] + row.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Probability of every vocabulary concept being the hidden one.
    pub fn probabilities(&self, input: &[String], age: u32, gender: Gender) -> Vec<f64> {
        let active = self.active(input, age, gender);
        let hidden: Vec<f64> = self.hidden_pre(&active).into_iter().map(|v| v.max(0.0)).collect();
        softmax(&self.logits(&hidden))
    }

    /// Concepts outside the input, most probable first, ties by id.
    pub fn ranked(&self, input: &[String], age: u32, gender: Gender) -> Vec<(String, f64)> {
        let p = self.probabilities(input, age, gender);
        let skip: BTreeSet<&String> = input.iter().collect();
        let mut out: Vec<(String, f64)> = self
            .vocab
            .iter()
            .zip(p)
            .filter(|(c, _)| !skip.contains(c))
            .map(|(c, p)| (c.clone(), p))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    fn loss_and_grad(&self, ex: &MaskedExample, grad: &mut [f64]) -> f64 {
        let h = self.hidden;
        let (b1, w2, b2) = self.offsets();
        let y = self.index[&ex.target];
        let active = self.active(&ex.input, ex.age, ex.gender);
        let pre = self.hidden_pre(&active);
        let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let p = softmax(&self.logits(&hidden));
        let mut dh = vec![0.0; h];
        for (c, &pc) in p.iter().enumerate() {
            let d = pc - if c == y { 1.0 } else { 0.0 };
            grad[b2 + c] += d;
            let row = w2 + c * h;
            for j in 0..h {
                grad[row + j] += d * hidden[j];
                dh[j] += d * self.params[row + j];
            }
        }
        for j in 0..h {
            if pre[j] <= 0.0 {
                dh[j] = 0.0;
            }
            grad[b1 + j] += dh[j];
        }
        for &i in &active {
            for j in 0..h {
                grad[i * h + j] += dh[j];
            }
        }
        -p[y].max(f64::MIN_POSITIVE).ln()
    }

    fn mean_loss(&self, examples: &[MaskedExample]) -> f64 {
        examples
            .iter()
            .map(|ex| {
                let p = self.probabilities(&ex.input, ex.age, ex.gender);
                -p[self.index[&ex.target]].max(f64::MIN_POSITIVE).ln()
            })
            .sum::<f64>()
            / examples.len().max(1) as f64
    }

    /// Trains on every mask of the training cases; keeps the epoch with the
    /// lowest validation loss. A validation concept missing from the
    /// training vocabulary is a data error.
    pub fn train(
        train: &[CaseConcepts],
        val: &[CaseConcepts],
        config: &PredictorConfig,
    ) -> Result<(MaskedPredictor, PredictorReport)> {
        if config.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let vocab: Vec<String> = train
            .iter()
            .flat_map(|c| c.concepts.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let known: BTreeSet<&String> = vocab.iter().collect();
        if let Some(c) = val.iter().flat_map(|c| &c.concepts).find(|c| !known.contains(c)) {
            return Err(Error::Data(format!("validation concept {c} is not in the training vocabulary")));
        }
        let train_ex = training_examples(train);
        let val_ex = training_examples(val);
        if train_ex.is_empty() {
            return Err(Error::Data("no training case has two concepts".into()));
        }
        let mut model = MaskedPredictor::init(vocab, config.hidden, config.seed)?;
        let mut order_rng = rng::derived(config.seed, 1);
        let mut order: Vec<usize> = (0..train_ex.len()).collect();
        let mut grad = vec![0.0; model.params.len()];
        let mut m = vec![0.0; model.params.len()];
        let mut v = vec![0.0; model.params.len()];
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut t = 0;
        let mut val_loss = vec![model.mean_loss(&val_ex)];
        let mut best = (val_loss[0], 0, model.params.clone());
        for epoch in 1..=config.epochs {
            order.shuffle(&mut order_rng);
            for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut loss = 0.0;
                for &i in chunk {
                    loss += model.loss_and_grad(&train_ex[i], &mut grad);
                }
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        batch,
                        message: format!("loss became {loss}"),
                    });
                }
                t += 1;
                let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
                let scale = 1.0 / chunk.len() as f64;
                for i in 0..grad.len() {
                    let g = grad[i] * scale;
                    m[i] = b1 * m[i] + (1.0 - b1) * g;
                    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                    model.params[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
            let vl = model.mean_loss(&val_ex);
            val_loss.push(vl);
            if vl < best.0 {
                best = (vl, epoch, model.params.clone());
            }
        }
        model.params = best.2;
        Ok((
            model,
            PredictorReport {
                val_loss,
                best_epoch: best.1,
            },
        ))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = b"TQMP".to_vec();
        for v in [1usize, self.hidden, self.vocab.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for w in &self.vocab {
            out.extend_from_slice(&(w.len() as u32).to_le_bytes());
            out.extend_from_slice(w.as_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("predictor file: {m}"));
        if bytes.len() < 16 || &bytes[..4] != b"TQMP" {
            return Err(bad("bad magic"));
        }
        let mut pos = 4;
        let mut take = |n: usize| -> Result<&[u8]> {
            if bytes.len() - pos < n {
                return Err(bad("truncated"));
            }
            pos += n;
            Ok(&bytes[pos - n..pos])
        };
        let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
        let version = read_u32(take(4)?);
        if version != 1 {
            return Err(bad(&format!("schema version {version}, expected 1")));
        }
        let hidden = read_u32(take(4)?);
        let n = read_u32(take(4)?);
        if n == 0 || n > bytes.len() {
            return Err(bad("implausible vocabulary size"));
        }
        let mut vocab = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(take(4)?);
            let w = std::str::from_utf8(take(len)?).map_err(|_| bad("word is not utf-8"))?;
            vocab.push(w.to_string());
        }
        let mut model = MaskedPredictor::init(vocab, hidden, 0)?;
        let raw = take(model.params.len() * 8)?;
        for (p, c) in model.params.iter_mut().zip(raw.chunks_exact(8)) {
            *p = f64::from_le_bytes(c.try_into().expect("8 bytes"));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
