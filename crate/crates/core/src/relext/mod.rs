//! Convolutional classifier for `located_in` relations between a finding
//! and an anatomy mention that the short-distance rules cannot decide.

pub mod checkpoint;
pub mod cnn;
pub mod planted;
pub mod train;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::metrics::{per_class, ClassMetrics};
use crate::rng;
use crate::textproc::{Mention, Relation, RelationScorer, Sentence, Tag, Token};

pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use cnn::{feature_maps, forward, loss_and_grad, CnnParams, CnnShape, Forward, Tensor};
pub use planted::{planted_corpus, PlantedConfig};
pub use train::{train, EpochStats, TrainConfig, TrainReport};

/// Maximum sentence length seen by the network.
pub const MAX_LEN: usize = 45;

pub const LABELS: [Relation; 2] = [Relation::LocatedIn, Relation::NotLocatedIn];

pub fn label_index(r: Relation) -> usize {
    match r {
        Relation::LocatedIn => 0,
        Relation::NotLocatedIn => 1,
    }
}

/// Word ids: 0 is padding, 1 stands for unknown words.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;

    /// Every normalized token seen at least `min_count` times.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        Self::from_words(
            counts
                .into_iter()
                .filter(|&(_, c)| c >= min_count)
                .map(|(w, _)| w.to_string())
                .collect(),
        )
    }

    /// From the word list without the two reserved entries.
    pub fn from_words(words: Vec<String>) -> Self {
        let mut all = vec!["<pad>".to_string(), "<unk>".to_string()];
        all.extend(words);
        let ids = all.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocab { words: all, ids }
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(Self::UNK)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    /// Words after the reserved entries, in id order.
    pub fn words(&self) -> &[String] {
        &self.words[2..]
    }
}

/// Sentence with two marked mentions and the gold relation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationTriple {
    pub tokens: Vec<Token>,
    pub e1: Mention,
    pub e2: Mention,
    pub label: Relation,
}

/// Network input: exactly [`MAX_LEN`] positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationExample {
    pub words: Vec<u32>,
    /// Offsets from the E1 and E2 spans, clipped to `[-MAX_LEN, MAX_LEN]`.
    pub dist1: Vec<i32>,
    pub dist2: Vec<i32>,
    pub tags: Vec<u8>,
    pub label: Option<Relation>,
}

fn distance(i: usize, m: &Mention) -> i32 {
    let l = MAX_LEN as i64;
    let d = if i < m.start {
        i as i64 - m.start as i64
    } else if i >= m.end {
        i as i64 - (m.end as i64 - 1)
    } else {
        0
    };
    d.clamp(-l, l) as i32
}

/// Word, distance and tag features, padded to [`MAX_LEN`]. Longer sentences
/// keep a window centred on the stretch from the first entity to the last.
pub fn featurize(tokens: &[Token], e1: &Mention, e2: &Mention, vocab: &Vocab) -> Result<RelationExample> {
    if e1.start == e2.start && e1.end == e2.end {
        return Err(Error::InvalidExample("E1 and E2 cover the same span".into()));
    }
    for m in [e1, e2] {
        if m.is_empty() || m.end > tokens.len() {
            return Err(Error::InvalidExample(format!(
                "mention {}..{} outside a sentence of {} tokens",
                m.start,
                m.end,
                tokens.len()
            )));
        }
    }
    if e1.start < e2.end && e2.start < e1.end {
        return Err(Error::InvalidExample("E1 and E2 overlap".into()));
    }
    let lo = e1.start.min(e2.start);
    let hi = e1.end.max(e2.end);
    if hi - lo > MAX_LEN {
        return Err(Error::InvalidExample(format!(
            "entities span {} tokens, more than {MAX_LEN}",
            hi - lo
        )));
    }
    let offset = if tokens.len() <= MAX_LEN {
        0
    } else {
        let centre = (lo + hi) / 2;
        centre.saturating_sub(MAX_LEN / 2).min(tokens.len() - MAX_LEN)
    };
    let shift = |m: &Mention| Mention {
        start: m.start - offset,
        end: m.end - offset,
        ..m.clone()
    };
    let (a, b) = (shift(e1), shift(e2));
    let window = &tokens[offset..tokens.len().min(offset + MAX_LEN)];
    let mut ex = RelationExample {
        words: Vec::with_capacity(MAX_LEN),
        dist1: Vec::with_capacity(MAX_LEN),
        dist2: Vec::with_capacity(MAX_LEN),
        tags: Vec::with_capacity(MAX_LEN),
        label: None,
    };
    for i in 0..MAX_LEN {
        match window.get(i) {
            Some(t) => {
                ex.words.push(vocab.id(&t.normalized));
                ex.tags.push(t.tag.0);
            }
            None => {
                ex.words.push(Vocab::PAD);
                ex.tags.push(Tag::PAD.0);
            }
        }
        ex.dist1.push(distance(i, &a));
        ex.dist2.push(distance(i, &b));
    }
    Ok(ex)
}

pub fn featurize_triple(t: &RelationTriple, vocab: &Vocab) -> Result<RelationExample> {
    let mut ex = featurize(&t.tokens, &t.e1, &t.e2, vocab)?;
    ex.label = Some(t.label);
    Ok(ex)
}

/// Down-samples the majority label to the minority count and shuffles.
pub fn balance_dataset(triples: Vec<RelationTriple>, seed: u64) -> Result<Vec<RelationTriple>> {
    let (mut pos, mut neg): (Vec<_>, Vec<_>) =
        triples.into_iter().partition(|t| t.label == Relation::LocatedIn);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data("both relation labels are needed to balance".into()));
    }
    let mut rng = rng::seeded(seed);
    let n = pos.len().min(neg.len());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.truncate(n);
    neg.truncate(n);
    pos.extend(neg);
    pos.shuffle(&mut rng);
    Ok(pos)
}

/// Trained network plus the vocabulary it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationModel {
    pub params: CnnParams,
    pub vocab: Vocab,
}

impl RelationModel {
    pub fn predict(&self, ex: &RelationExample) -> Result<(Relation, [f64; 2])> {
        let p = forward(&self.params, ex)?.probs;
        let r = if p[0] >= p[1] { Relation::LocatedIn } else { Relation::NotLocatedIn };
        Ok((r, p))
    }

    pub fn evaluate(&self, test: &[RelationTriple]) -> Result<Vec<ClassMetrics>> {
        let mut pairs = Vec::with_capacity(test.len());
        for t in test {
            let (pred, _) = self.predict(&featurize_triple(t, &self.vocab)?)?;
            pairs.push((t.label, pred));
        }
        per_class(&pairs, &LABELS)
    }
}

impl RelationScorer for RelationModel {
    /// Pairs the network cannot featurize are not related.
    fn classify(&self, sentence: &Sentence, e1: &Mention, e2: &Mention) -> Relation {
        featurize(&sentence.tokens, e1, e2, &self.vocab)
            .and_then(|ex| self.predict(&ex))
            .map(|(r, _)| r)
            .unwrap_or(Relation::NotLocatedIn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(n: usize) -> Vec<Token> {
        (0..n).map(|i| Token::new(format!("w{i}"), format!("w{i}"), i)).collect()
    }

    fn vocab(n: usize) -> Vocab {
        Vocab::build(tokens(n).iter().map(|t| t.normalized.as_str()), 1)
    }

    #[test]
    fn padding_and_distances() {
        let v = vocab(3);
        let ex = featurize(&tokens(3), &Mention::new("a", 0, 1), &Mention::new("b", 2, 3), &v).unwrap();
        assert_eq!(ex.words.len(), MAX_LEN);
        assert_eq!(ex.words.iter().filter(|&&w| w == Vocab::PAD).count(), 42);
        assert_eq!(ex.tags[3..].iter().filter(|&&t| t == Tag::PAD.0).count(), 42);
        assert_eq!(&ex.dist1[..3], &[0, 1, 2]);
        assert_eq!(&ex.dist2[..3], &[-2, -1, 0]);
        assert_eq!(ex.dist1[44], 44);
    }

    #[test]
    fn long_sentences_keep_both_spans() {
        let toks = tokens(60);
        let v = vocab(60);
        let e1 = Mention::new("a", 40, 42);
        let e2 = Mention::new("b", 55, 56);
        let ex = featurize(&toks, &e1, &e2, &v).unwrap();
        let zeros1: Vec<usize> = (0..MAX_LEN).filter(|&i| ex.dist1[i] == 0).collect();
        let zeros2: Vec<usize> = (0..MAX_LEN).filter(|&i| ex.dist2[i] == 0).collect();
        assert_eq!(zeros1.len(), 2);
        assert_eq!(zeros2.len(), 1);
        assert_eq!(ex.words[zeros1[0]], v.id("w40"));
        assert_eq!(ex.words[zeros2[0]], v.id("w55"));
        assert!(!ex.words.contains(&Vocab::PAD));
    }

    #[test]
    fn invalid_pairs() {
        let v = vocab(5);
        let m = Mention::new("a", 1, 2);
        assert!(matches!(featurize(&tokens(5), &m, &m, &v), Err(Error::InvalidExample(_))));
        let far = Mention::new("b", 4, 9);
        assert!(featurize(&tokens(5), &m, &far, &v).is_err());
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocab::from_words(vec!["knie".into()]);
        assert_eq!(v.id("knie"), 2);
        assert_eq!(v.id("ellbogen"), Vocab::UNK);
    }

    fn triple(label: Relation) -> RelationTriple {
        RelationTriple {
            tokens: tokens(2),
            e1: Mention::new("a", 0, 1),
            e2: Mention::new("b", 1, 2),
            label,
        }
    }

    #[test]
    fn balancing() {
        let mut ts: Vec<_> = (0..70).map(|_| triple(Relation::LocatedIn)).collect();
        ts.extend((0..30).map(|_| triple(Relation::NotLocatedIn)));
        let b = balance_dataset(ts, 1).unwrap();
        assert_eq!(b.iter().filter(|t| t.label == Relation::LocatedIn).count(), 30);
        assert_eq!(b.len(), 60);
        let only: Vec<_> = (0..5).map(|_| triple(Relation::LocatedIn)).collect();
        assert!(matches!(balance_dataset(only, 1), Err(Error::Data(_))));
    }
}
