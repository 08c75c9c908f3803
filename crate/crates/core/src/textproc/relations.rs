use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::resources::{Dictionary, SemanticType};

use super::preprocess::Sentence;
use super::Mention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    LocatedIn,
    NotLocatedIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationSource {
    Rule,
    Model,
}

/// `e1` is a symptom, disease or operation; `e2` an anatomical location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationCandidate {
    pub e1: Mention,
    pub e2: Mention,
    pub relation: Relation,
    pub source: RelationSource,
}

/// Short-distance `located_in` rule. A finding followed by an anatomy
/// mention at token distance `<= max_distance`, where every token in
/// between is a connective, yields a candidate; an anatomy mention directly
/// preceding a finding does too. Both must share a clause.
pub fn extract_relations_rules(
    sentence: &Sentence,
    mentions: &[Mention],
    dictionary: &Dictionary,
    connectives: &HashSet<String>,
    max_distance: usize,
) -> Vec<RelationCandidate> {
    let clauses = sentence.clauses();
    let type_of = |m: &Mention| dictionary.get(&m.concept_id).map(|e| e.semantic_type);
    let mut out = Vec::new();
    for e1 in mentions.iter().filter(|m| type_of(m).is_some_and(SemanticType::is_finding)) {
        for e2 in mentions
            .iter()
            .filter(|m| type_of(m) == Some(SemanticType::Anatomy))
        {
            if clauses[e1.start] != clauses[e2.start] {
                continue;
            }
            let linked = if e1.end <= e2.start {
                let distance = e2.start - e1.end + 1;
                distance <= max_distance
                    && sentence.tokens[e1.end..e2.start]
                        .iter()
                        .all(|t| connectives.contains(&t.normalized))
            } else {
                e2.end == e1.start
            };
            if linked {
                out.push(RelationCandidate {
                    e1: e1.clone(),
                    e2: e2.clone(),
                    relation: Relation::LocatedIn,
                    source: RelationSource::Rule,
                });
            }
        }
    }
    out
}
