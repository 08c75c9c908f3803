use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Polarity, Risk};
use crate::error::{Error, Result};

use super::{KnowledgeGraph, NodeType, RelationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Idf,
    Learned,
}

/// Per-concept edge weights used by the similarity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    pub source: WeightSource,
    pub concept: BTreeMap<String, f64>,
    /// Mean weight over concepts mentioned by at least one case.
    pub mean: f64,
}

impl EdgeWeights {
    /// Unknown concepts weigh nothing.
    pub fn get(&self, id: &str) -> f64 {
        self.concept.get(id).copied().unwrap_or(0.0)
    }

    fn finish(kg: &KnowledgeGraph, source: WeightSource, concept: BTreeMap<String, f64>) -> Self {
        let df = document_frequencies(kg);
        let seen: Vec<f64> = df
            .iter()
            .filter(|(_, &d)| d > 0)
            .map(|(id, _)| concept.get(id).copied().unwrap_or(0.0))
            .collect();
        let mean = if seen.is_empty() {
            0.0
        } else {
            seen.iter().sum::<f64>() / seen.len() as f64
        };
        EdgeWeights { source, concept, mean }
    }
}

/// Number of cases with a present mention, per concept node.
pub fn document_frequencies(kg: &KnowledgeGraph) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for t in NodeType::CONCEPTS {
        let kind = RelationKind::mention(t, Polarity::Present).expect("concept table");
        let fwd = &kg.relation(kind).forward;
        for i in 0..kg.node_count(t) {
            out.insert(kg.key(t, i).to_string(), fwd.row(i).0.len());
        }
    }
    out
}

/// `ln(N / df)` for every concept; concepts no case mentions get 0.
pub fn idf_weights(kg: &KnowledgeGraph) -> EdgeWeights {
    let n = kg.case_count() as f64;
    let concept = document_frequencies(kg)
        .into_iter()
        .map(|(id, df)| {
            let w = if df == 0 { 0.0 } else { (n / df as f64).ln() };
            (id, w)
        })
        .collect();
    EdgeWeights::finish(kg, WeightSource::Idf, concept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic regression from present concepts to the risk class
/// of every labelled case in the graph, full-batch gradient descent from
/// zero. A concept's weight is its largest class coefficient, floored at 0.
pub fn learn_weights(kg: &KnowledgeGraph, config: &LearnConfig) -> Result<EdgeWeights> {
    let k = Risk::ALL.len();
    let mut features: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); kg.case_count()];
    for t in NodeType::CONCEPTS {
        let kind = RelationKind::mention(t, Polarity::Present).expect("concept table");
        let fwd = &kg.relation(kind).forward;
        for i in 0..kg.node_count(t) {
            let f = features.len();
            features.push(kg.key(t, i).to_string());
            for &case in fwd.row(i).0 {
                rows[case as usize].push(f);
            }
        }
    }
    let data: Vec<(Vec<usize>, usize)> = rows
        .into_iter()
        .enumerate()
        .filter_map(|(c, x)| kg.case_label(c).map(|l| (x, l.risk.index())))
        .collect();
    if data.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            batch: 0,
            message: "no labelled cases".into(),
        });
    }
    let first = data[0].1;
    if data.iter().all(|d| d.1 == first) {
        return Err(Error::Training {
            epoch: 0,
            batch: 0,
            message: "labels contain a single risk class".into(),
        });
    }

    let nf = features.len();
    let mut w = vec![0.0f64; k * nf];
    let mut b = vec![0.0f64; k];
    let n = data.len() as f64;
    let mut gw = vec![0.0f64; k * nf];
    let mut gb = vec![0.0f64; k];
    let mut p = vec![0.0f64; k];
    for epoch in 0..config.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (x, y) in &data {
            for c in 0..k {
                p[c] = b[c] + x.iter().map(|&f| w[c * nf + f]).sum::<f64>();
            }
            let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = p.iter_mut().map(|v| {
                *v = (*v - m).exp();
                *v
            }).sum();
            for c in 0..k {
                let d = p[c] / z - if c == *y { 1.0 } else { 0.0 };
                gb[c] += d;
                for &f in x {
                    gw[c * nf + f] += d;
                }
            }
        }
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= config.learning_rate * (gi / n + config.l2 * *wi);
        }
        for (bi, gi) in b.iter_mut().zip(&gb) {
            *bi -= config.learning_rate * gi / n;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training {
                epoch,
                batch: 0,
                message: "weights diverged".into(),
            });
        }
    }
    let concept = features
        .into_iter()
        .enumerate()
        .map(|(f, id)| {
            let best = (0..k).map(|c| w[c * nf + f]).fold(f64::NEG_INFINITY, f64::max);
            (id, best.max(0.0))
        })
        .collect();
    Ok(EdgeWeights::finish(kg, WeightSource::Learned, concept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CaseRecord, ConceptMention, Gender, RecommendationLabel};
    use crate::ontology::Ontology;
    use crate::resources::Resources;

    fn rec(id: &str, concepts: &[&str], risk: Risk) -> CaseRecord {
        CaseRecord {
            id: id.into(),
            age: 30,
            gender: Gender::Male,
            mentions: concepts.iter().map(|c| ConceptMention::present(*c)).collect(),
            free_text: String::new(),
            label: RecommendationLabel::default_for(risk),
        }
    }

    fn graph(records: &[CaseRecord]) -> (KnowledgeGraph, impl Fn(&str) -> String) {
        let o = Ontology::build(&[], &Resources::builtin()).unwrap();
        let kg = KnowledgeGraph::build(records, &o).unwrap();
        (kg, move |c: &str| o.resolve(c, None).unwrap().to_string())
    }

    #[test]
    fn idf_values() {
        let (kg, id) = graph(&[
            rec("a", &["C_fever", "C_cough"], Risk::Low),
            rec("b", &["C_fever"], Risk::Low),
            rec("c", &["C_fever"], Risk::Low),
            rec("d", &["C_headache"], Risk::Low),
        ]);
        let w = idf_weights(&kg);
        assert_eq!(w.get(&id("C_fever")), (4.0f64 / 3.0).ln());
        assert_eq!(w.get(&id("C_cough")), 4.0f64.ln());
        assert_eq!(w.get(&id("C_nausea")), 0.0);
        let mean = ((4.0f64 / 3.0).ln() + 2.0 * 4.0f64.ln()) / 3.0;
        assert!((w.mean - mean).abs() < 1e-12);
    }

    #[test]
    fn learned_weights_favor_discriminative_concepts() {
        let mut recs = Vec::new();
        for i in 0..20 {
            recs.push(rec(&format!("h{i}"), &["C_chest_pain", "C_fever"], Risk::High));
            recs.push(rec(&format!("l{i}"), &["C_cough", "C_fever"], Risk::Low));
        }
        let (kg, id) = graph(&recs);
        let w = learn_weights(&kg, &LearnConfig::default()).unwrap();
        assert_eq!(w.source, WeightSource::Learned);
        assert!(w.get(&id("C_chest_pain")) > w.get(&id("C_fever")));
        assert!(w.get(&id("C_cough")) > w.get(&id("C_fever")));
        assert!(w.concept.values().all(|&v| v >= 0.0));
    }

    #[test]
    fn single_class_is_a_training_error() {
        let (kg, _) = graph(&[rec("a", &["C_fever"], Risk::Low), rec("b", &["C_cough"], Risk::Low)]);
        assert!(matches!(
            learn_weights(&kg, &LearnConfig::default()),
            Err(Error::Training { .. })
        ));
    }
}
