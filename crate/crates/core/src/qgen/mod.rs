//! Question generation: pseudo-relevance-feedback term rankers, the masked
//! concept predictor, their top-k evaluation and question selection.

pub mod eval;
pub mod masked;
pub mod questions;
pub mod rankers;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CaseRecord, Gender, Polarity};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, NodeType};
use crate::ontology::Ontology;

pub use eval::{eval_acc_at_k, AccuracyTable, ConceptRanker, PrfMethod};
pub use masked::{
    build_masked_eval, mask_weights, sample_mask, training_examples, MaskedEval, MaskedExample, MaskedPredictor,
    PredictorConfig, PredictorReport,
};
pub use questions::{QuestionConfig, QuestionContext, QuestionSelector};
pub use rankers::{bim, chi, kld, rsv, smoothed, Ranker, RelevantSet, SMOOTHING};

/// Present concepts of one case, as graph concept ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConcepts {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    /// Sorted, unique.
    pub concepts: Vec<String>,
}

/// Cases of a graph with their present concepts.
pub fn cases_from_kg(kg: &KnowledgeGraph) -> Vec<CaseConcepts> {
    let age_of = case_age_groups(kg);
    (0..kg.case_count())
        .map(|c| CaseConcepts {
            id: kg.case_id(c).to_string(),
            // representative age of the group; only the group is stored
            age: crate::kg::AGE_GROUPS[age_of[c]].0,
            gender: gender_of(kg, c),
            concepts: kg.case_concepts(c, Polarity::Present).into_iter().map(String::from).collect(),
        })
        .collect()
}

fn case_age_groups(kg: &KnowledgeGraph) -> Vec<usize> {
    let adj = kg.relation(crate::kg::RelationKind::AgeGroupToPatient);
    (0..kg.case_count())
        .map(|c| adj.backward.row(c).0.first().map(|&g| g as usize).unwrap_or(0))
        .collect()
}

fn gender_of(kg: &KnowledgeGraph, case: usize) -> Gender {
    let adj = kg.relation(crate::kg::RelationKind::GenderToPatient);
    let node = adj.backward.row(case).0.first().copied().unwrap_or(0) as usize;
    let key = kg.key(NodeType::Gender, node);
    Gender::ALL.into_iter().find(|g| g.as_str() == key).unwrap_or(Gender::Other)
}

/// Resolves the present mentions of records against an ontology. Anatomy
/// concepts are dropped; an unresolvable mention is an ingestion error.
pub fn resolve_cases(corpus: &[CaseRecord], ontology: &Ontology) -> Result<Vec<CaseConcepts>> {
    corpus
        .iter()
        .map(|rec| {
            let mut concepts = BTreeSet::new();
            for m in rec.present() {
                let c = ontology
                    .resolve(&m.concept, m.location.as_deref())
                    .and_then(|id| ontology.concept(id))
                    .ok_or_else(|| Error::Ingestion {
                        record: rec.id.clone(),
                        concepts: vec![m.concept.clone()],
                    })?;
                if NodeType::of_concept(c).is_some() {
                    concepts.insert(c.id.clone());
                }
            }
            Ok(CaseConcepts {
                id: rec.id.clone(),
                age: rec.age,
                gender: rec.gender,
                concepts: concepts.into_iter().collect(),
            })
        })
        .collect()
}

/// Number of cases mentioning each concept.
pub fn concept_frequencies(cases: &[CaseConcepts]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for c in cases {
        for s in &c.concepts {
            *out.entry(s.clone()).or_default() += 1;
        }
    }
    out
}
