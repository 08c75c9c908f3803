use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::kg::{EdgeWeights, KnowledgeGraph, NodeType, RelationKind};

/// Additive smoothing for count-based probabilities.
pub const SMOOTHING: f64 = 1e-6;

pub fn smoothed(count: usize, total: usize) -> f64 {
    (count as f64 + SMOOTHING) / (total as f64 + 2.0 * SMOOTHING)
}

/// Binary independence model log odds ratio.
pub fn bim(p_r: f64, p_n: f64) -> f64 {
    ((p_r * (1.0 - p_n)) / (p_n * (1.0 - p_r))).ln()
}

/// Log of the squared probability difference over the corpus probability.
/// The numerator is floored at the squared smoothing constant so equal
/// probabilities stay finite.
pub fn chi(p_r: f64, p_n: f64) -> f64 {
    let d = p_r - p_n;
    ((d * d).max(SMOOTHING * SMOOTHING) / p_n).ln()
}

/// Pointwise Kullback-Leibler contribution.
pub fn kld(p_r: f64, p_n: f64) -> f64 {
    p_r * (p_r / p_n).ln()
}

/// Retrieval status value: term weights of the relevant records times the
/// probability difference.
pub fn rsv(weights: &[f64], p_r: f64, p_n: f64) -> f64 {
    weights.iter().sum::<f64>() * (p_r - p_n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranker {
    Frequency,
    Bim,
    Chi,
    Kld,
    Rsv,
}

impl Ranker {
    pub const ALL: [Ranker; 5] = [Ranker::Frequency, Ranker::Bim, Ranker::Chi, Ranker::Kld, Ranker::Rsv];

    pub fn as_str(self) -> &'static str {
        match self {
            Ranker::Frequency => "frequency",
            Ranker::Bim => "bim",
            Ranker::Chi => "chi",
            Ranker::Kld => "kld",
            Ranker::Rsv => "rsv",
        }
    }
}

impl fmt::Display for Ranker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ranker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ranker::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ranker {s:?}")))
    }
}

/// Pseudo-relevance feedback statistics: the retrieved cases `R` against the
/// whole case base `N` of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevantSet {
    pub cases: Vec<usize>,
    pub total: usize,
    /// Relevant cases with a present mention of the concept.
    pub in_relevant: BTreeMap<String, usize>,
    /// All cases with a present mention of the concept.
    pub in_corpus: BTreeMap<String, usize>,
    /// Concept weight used as `w(s, r)` for every relevant `r` containing `s`.
    pub weight: BTreeMap<String, f64>,
}

impl RelevantSet {
    pub fn new(kg: &KnowledgeGraph, cases: &[usize], weights: &EdgeWeights) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Query("relevant set is empty".into()));
        }
        let mut cases = cases.to_vec();
        cases.sort_unstable();
        cases.dedup();
        if let Some(&c) = cases.iter().find(|&&c| c >= kg.case_count()) {
            return Err(Error::Lookup(format!("case index {c}")));
        }
        let mut in_relevant = BTreeMap::new();
        let mut in_corpus = BTreeMap::new();
        let mut weight = BTreeMap::new();
        for t in NodeType::CONCEPTS {
            let adj = kg.relation(RelationKind::mention(t, Polarity::Present).expect("concept table"));
            let mut counts = vec![0usize; kg.node_count(t)];
            for &c in &cases {
                for &s in adj.backward.row(c).0 {
                    counts[s as usize] += 1;
                }
            }
            for (i, n) in counts.into_iter().enumerate() {
                let id = kg.key(t, i).to_string();
                in_corpus.insert(id.clone(), adj.forward.row(i).0.len());
                weight.insert(id.clone(), weights.get(&id));
                in_relevant.insert(id, n);
            }
        }
        Ok(RelevantSet {
            cases,
            total: kg.case_count(),
            in_relevant,
            in_corpus,
            weight,
        })
    }

    pub fn p_relevant(&self, s: &str) -> f64 {
        smoothed(self.in_relevant.get(s).copied().unwrap_or(0), self.cases.len())
    }

    pub fn p_corpus(&self, s: &str) -> f64 {
        smoothed(self.in_corpus.get(s).copied().unwrap_or(0), self.total)
    }

    pub fn score(&self, ranker: Ranker, s: &str) -> f64 {
        let (pr, pn) = (self.p_relevant(s), self.p_corpus(s));
        match ranker {
            Ranker::Frequency => self.in_relevant.get(s).copied().unwrap_or(0) as f64,
            Ranker::Bim => bim(pr, pn),
            Ranker::Chi => chi(pr, pn),
            Ranker::Kld => kld(pr, pn),
            Ranker::Rsv => {
                let n = self.in_relevant.get(s).copied().unwrap_or(0);
                let w = self.weight.get(s).copied().unwrap_or(0.0);
                rsv(&vec![w; n], pr, pn)
            }
        }
    }

    /// Candidates by descending score, ties by ascending concept id.
    pub fn rank<'a>(&self, ranker: Ranker, candidates: impl IntoIterator<Item = &'a str>) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = candidates
            .into_iter()
            .map(|s| (s.to_string(), self.score(ranker, s)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_values() {
        assert!((bim(0.8, 0.2) - 16f64.ln()).abs() < 1e-12);
        assert!((bim(0.2, 0.8) + 16f64.ln()).abs() < 1e-12);
        assert_eq!(bim(0.3, 0.3), 0.0);
        assert!((chi(0.4, 0.1) - 0.9f64.ln()).abs() < 1e-12);
        assert!((chi(0.1, 0.4) - (0.09f64 / 0.4).ln()).abs() < 1e-12);
        assert!((kld(0.5, 0.25) - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!((kld(0.25, 0.5) + 0.25 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(kld(0.3, 0.3), 0.0);
        assert!((rsv(&[1.0], 1.0, 0.1) - 0.9).abs() < 1e-12);
        assert_eq!(rsv(&[0.0, 0.0], 0.7, 0.1), 0.0);
    }

    #[test]
    fn chi_equal_probabilities_is_finite_minimum() {
        let eq = chi(0.2, 0.2);
        assert!(eq.is_finite());
        assert!(eq < chi(0.21, 0.2));
        assert!(eq < chi(0.19, 0.2));
    }

    #[test]
    fn ranker_names_round_trip() {
        for r in Ranker::ALL {
            assert_eq!(r.as_str().parse::<Ranker>().unwrap(), r);
        }
        assert!("tfidf".parse::<Ranker>().is_err());
    }
}
