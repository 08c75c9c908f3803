use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Polarity};
use crate::error::{Error, Result};
use crate::kg::{
    age_group, similar_case_indices, EdgeWeights, KnowledgeGraph, NodeType, QueryProfile, RelationKind,
    SimilarityConfig, AGE_GROUPS,
};
use crate::ontology::Ontology;
use crate::resources::{Flag, SemanticType};

use super::rankers::{Ranker, RelevantSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuestionConfig {
    pub ranker: Ranker,
    /// Similar cases used as the relevant set.
    pub evidence: usize,
    /// Candidates must score strictly above this.
    pub floor: f64,
    /// Minimum overall case count before an absent age group gates a concept.
    pub age_gate_support: usize,
    pub similarity: SimilarityConfig,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        QuestionConfig {
            ranker: Ranker::Kld,
            evidence: 50,
            floor: f64::NEG_INFINITY,
            age_gate_support: 20,
            similarity: SimilarityConfig::default(),
        }
    }
}

/// What is known about a session when choosing the next question.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionContext {
    pub affirmed: Vec<String>,
    pub denied: Vec<String>,
    pub asked: Vec<String>,
    pub age: Option<u32>,
    pub gender: Option<Gender>,
}

struct Candidate {
    id: String,
    flags: (bool, bool),
    /// Concepts with enough support but no case in the age group.
    gated_ages: [bool; AGE_GROUPS.len()],
}

pub struct QuestionSelector<'a> {
    kg: &'a KnowledgeGraph,
    ontology: &'a Ontology,
    weights: &'a EdgeWeights,
    config: QuestionConfig,
    candidates: Vec<Candidate>,
}

impl<'a> QuestionSelector<'a> {
    pub fn new(
        kg: &'a KnowledgeGraph,
        ontology: &'a Ontology,
        weights: &'a EdgeWeights,
        config: QuestionConfig,
    ) -> Result<Self> {
        if config.evidence == 0 {
            return Err(Error::Config("question evidence must be at least 1".into()));
        }
        let case_group: Vec<usize> = {
            let adj = kg.relation(RelationKind::AgeGroupToPatient);
            (0..kg.case_count())
                .map(|c| adj.backward.row(c).0.first().map_or(0, |&g| g as usize))
                .collect()
        };
        let mut candidates = Vec::new();
        for t in [NodeType::Symptom, NodeType::RedFlag] {
            let adj = kg.relation(RelationKind::mention(t, Polarity::Present).expect("concept table"));
            for i in 0..kg.node_count(t) {
                let id = kg.key(t, i);
                let Some(c) = ontology.concept(id) else { continue };
                if c.semantic_type != SemanticType::Symptom {
                    continue;
                }
                let cases = adj.forward.row(i).0;
                let mut per_group = [0usize; AGE_GROUPS.len()];
                for &case in cases {
                    per_group[case_group[case as usize]] += 1;
                }
                let supported = cases.len() >= config.age_gate_support;
                candidates.push(Candidate {
                    id: id.to_string(),
                    flags: (c.has_flag(Flag::FemaleOnly), c.has_flag(Flag::MaleOnly)),
                    gated_ages: per_group.map(|n| supported && n == 0),
                });
            }
        }
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(QuestionSelector {
            kg,
            ontology,
            weights,
            config,
            candidates,
        })
    }

    pub fn config(&self) -> &QuestionConfig {
        &self.config
    }

    /// Candidate concepts that survive the gates for this context, in id order.
    pub fn eligible(&self, ctx: &QuestionContext) -> Result<Vec<&str>> {
        let mut excluded: BTreeSet<&str> = ctx
            .asked
            .iter()
            .chain(&ctx.affirmed)
            .chain(&ctx.denied)
            .map(String::as_str)
            .collect();
        let mut below_denied = BTreeSet::new();
        for d in &ctx.denied {
            if self.ontology.concept(d).is_some() {
                below_denied.extend(self.ontology.descendants(d)?);
            }
        }
        excluded.extend(below_denied.iter().map(String::as_str));
        let group = ctx.age.map(age_group);
        Ok(self
            .candidates
            .iter()
            .filter(|c| !excluded.contains(c.id.as_str()))
            .filter(|c| match ctx.gender {
                Some(Gender::Male) => !c.flags.0,
                Some(Gender::Female) => !c.flags.1,
                _ => true,
            })
            .filter(|c| group.is_none_or(|g| !c.gated_ages[g]))
            .map(|c| c.id.as_str())
            .collect())
    }

    /// All eligible candidates scored against the current relevant set,
    /// best first, ties by ascending id. Scores at or below the floor are
    /// dropped.
    pub fn ranked(&self, ctx: &QuestionContext) -> Result<Vec<(String, f64)>> {
        if ctx.affirmed.is_empty() {
            return Err(Error::Session("no affirmed concept to select a question from".into()));
        }
        let profile = QueryProfile {
            affirmed: ctx.affirmed.clone(),
            denied: ctx.denied.clone(),
            age: ctx.age,
            gender: ctx.gender,
        };
        let hits = similar_case_indices(self.kg, &profile, self.config.evidence, self.weights, &self.config.similarity)?;
        if hits.is_empty() {
            return Ok(Vec::new());
        }
        let cases: Vec<usize> = hits.iter().map(|h| h.0).collect();
        let set = RelevantSet::new(self.kg, &cases, self.weights)?;
        let floor = self.config.floor;
        Ok(set
            .rank(self.config.ranker, self.eligible(ctx)?)
            .into_iter()
            .filter(|(_, s)| *s > floor)
            .collect())
    }

    /// The best scoring question, or `None` when nothing qualifies.
    pub fn next_question(&self, ctx: &QuestionContext) -> Result<Option<String>> {
        Ok(self.ranked(ctx)?.into_iter().next().map(|(c, _)| c))
    }

    /// Cases per candidate, for diagnostics.
    pub fn candidate_support(&self) -> BTreeMap<String, usize> {
        self.candidates
            .iter()
            .map(|c| {
                let (t, i) = self.kg.concept_node(&c.id).expect("candidate is a node");
                let adj = self.kg.relation(RelationKind::mention(t, Polarity::Present).expect("concept table"));
                (c.id.clone(), adj.forward.row(i as usize).0.len())
            })
            .collect()
    }
}
