use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{similar_case_indices, EdgeWeights, KnowledgeGraph, NodeType, QueryProfile, SimilarityConfig};

use super::masked::{MaskedExample, MaskedPredictor};
use super::rankers::{Ranker, RelevantSet};

/// Anything that orders candidate concepts for a masked example.
pub trait ConceptRanker: Sync {
    fn name(&self) -> String;
    /// Concepts outside the example input, best first.
    fn rank(&self, ex: &MaskedExample) -> Result<Vec<String>>;
}

impl ConceptRanker for MaskedPredictor {
    fn name(&self) -> String {
        "nn".into()
    }

    fn rank(&self, ex: &MaskedExample) -> Result<Vec<String>> {
        Ok(self.ranked(&ex.input, ex.age, ex.gender).into_iter().map(|(c, _)| c).collect())
    }
}

/// A term ranker fed with the top similar cases of the unmasked input.
pub struct PrfMethod<'a> {
    pub kg: &'a KnowledgeGraph,
    pub weights: &'a EdgeWeights,
    pub ranker: Ranker,
    /// Size of the retrieved relevant set.
    pub evidence: usize,
    pub similarity: SimilarityConfig,
}

impl PrfMethod<'_> {
    fn vocabulary(&self) -> impl Iterator<Item = &str> {
        NodeType::CONCEPTS
            .into_iter()
            .flat_map(move |t| (0..self.kg.node_count(t)).map(move |i| self.kg.key(t, i)))
    }
}

impl ConceptRanker for PrfMethod<'_> {
    fn name(&self) -> String {
        self.ranker.to_string()
    }

    fn rank(&self, ex: &MaskedExample) -> Result<Vec<String>> {
        let profile = QueryProfile {
            affirmed: ex.input.clone(),
            denied: Vec::new(),
            age: Some(ex.age),
            gender: Some(ex.gender),
        };
        let hits = similar_case_indices(self.kg, &profile, self.evidence, self.weights, &self.similarity)?;
        if hits.is_empty() {
            return Ok(Vec::new());
        }
        let cases: Vec<usize> = hits.iter().map(|h| h.0).collect();
        let set = RelevantSet::new(self.kg, &cases, self.weights)?;
        let skip: BTreeSet<&str> = ex.input.iter().map(String::as_str).collect();
        Ok(set
            .rank(self.ranker, self.vocabulary().filter(|c| !skip.contains(c)))
            .into_iter()
            .map(|(c, _)| c)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub method: String,
    pub examples: usize,
    /// `(k, Acc@k)` in the order requested.
    pub accuracy: Vec<(usize, f64)>,
}

impl AccuracyTable {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.accuracy.iter().find(|a| a.0 == k).map(|a| a.1)
    }
}

/// Fraction of examples whose hidden concept is among the method's top `k`,
/// for each `k`. Examples are split across threads; the result does not
/// depend on the split.
pub fn eval_acc_at_k(method: &dyn ConceptRanker, examples: &[MaskedExample], ks: &[usize]) -> Result<AccuracyTable> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("every k must be at least 1".into()));
    }
    if examples.is_empty() {
        return Err(Error::Data("no masked examples to evaluate".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = examples.len().div_ceil(threads);
    let ranks: Vec<Option<usize>> = std::thread::scope(|s| {
        let handles: Vec<_> = examples
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|ex| method.rank(ex).map(|r| r.iter().position(|c| *c == ex.target)))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect::<Result<Vec<_>>>()
            .map(|parts| parts.into_iter().flatten().collect())
    })?;
    let n = examples.len() as f64;
    Ok(AccuracyTable {
        method: method.name(),
        examples: examples.len(),
        accuracy: ks
            .iter()
            .map(|&k| (k, ranks.iter().filter(|r| r.is_some_and(|p| p < k)).count() as f64 / n))
            .collect(),
    })
}
