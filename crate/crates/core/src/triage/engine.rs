use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{PointOfCare, RecommendationLabel, Risk, TimeFrame};
use crate::error::{Error, Result};
use crate::kg::{similar_case_indices, EdgeWeights, KnowledgeGraph, QueryProfile};
use crate::ontology::Ontology;
use crate::qgen::{QuestionConfig, QuestionContext, QuestionSelector};

use super::session::{Demographics, Response, Session, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriageConfig {
    pub budget: usize,
    /// Similar cases retrieved as evidence.
    pub evidence: usize,
    pub confidence_threshold: f64,
    pub question: QuestionConfig,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            budget: 10,
            evidence: 50,
            confidence_threshold: 0.6,
            question: QuestionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMasses {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl ClassMasses {
    pub fn get(&self, r: Risk) -> f64 {
        match r {
            Risk::High => self.high,
            Risk::Medium => self.medium,
            Risk::Low => self.low,
        }
    }

    fn add(&mut self, r: Risk, v: f64) {
        match r {
            Risk::High => self.high += v,
            Risk::Medium => self.medium += v,
            Risk::Low => self.low += v,
        }
    }

    pub fn total(&self) -> f64 {
        self.high + self.medium + self.low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub case_id: String,
    pub score: f64,
    pub risk: Risk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub masses: ClassMasses,
    /// The affirmed red-flag concept that forced escalation.
    pub red_flag: Option<String>,
    /// Winning class before the low-confidence raise.
    pub raised_from: Option<Risk>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    #[serde(flatten)]
    pub label: RecommendationLabel,
    pub confidence: f64,
    pub evidence: Vec<Evidence>,
    pub rationale: Rationale,
}

/// Label mass over retrieved cases.
struct Assessment {
    evidence: Vec<Evidence>,
    labels: Vec<RecommendationLabel>,
    masses: ClassMasses,
    risk: Risk,
    confidence: f64,
}

/// Runs sessions against a read-only graph. Cheap to share across threads.
pub struct Engine<'a> {
    kg: &'a KnowledgeGraph,
    ontology: &'a Ontology,
    weights: &'a EdgeWeights,
    selector: QuestionSelector<'a>,
    config: TriageConfig,
}

impl<'a> Engine<'a> {
    pub fn new(
        kg: &'a KnowledgeGraph,
        ontology: &'a Ontology,
        weights: &'a EdgeWeights,
        config: TriageConfig,
    ) -> Result<Self> {
        if kg.case_count() == 0 {
            return Err(Error::Inference("knowledge graph has no cases".into()));
        }
        if config.evidence == 0 {
            return Err(Error::Config("evidence must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&config.confidence_threshold) {
            return Err(Error::Config("confidence threshold outside [0, 1]".into()));
        }
        let selector = QuestionSelector::new(kg, ontology, weights, config.question.clone())?;
        Ok(Engine {
            kg,
            ontology,
            weights,
            selector,
            config,
        })
    }

    pub fn config(&self) -> &TriageConfig {
        &self.config
    }

    pub fn ontology(&self) -> &Ontology {
        self.ontology
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        self.kg
    }

    /// Ontology concept id for either a concept id or a dictionary id.
    pub fn resolve(&self, concept: &str) -> Result<String> {
        if self.ontology.concept(concept).is_some() {
            return Ok(concept.to_string());
        }
        self.ontology
            .resolve(concept, None)
            .map(String::from)
            .ok_or_else(|| Error::Lookup(format!("unknown concept {concept:?}")))
    }

    fn is_red_flag(&self, id: &str) -> bool {
        self.ontology.concept(id).is_some_and(|c| c.is_red_flag())
    }

    pub fn start(&self, id: impl Into<String>, demographics: Demographics, concepts: &[String]) -> Result<Session> {
        demographics.validate()?;
        if concepts.is_empty() {
            return Err(Error::Session("at least one initial concept is required".into()));
        }
        let mut affirmed: Vec<String> = Vec::new();
        for c in concepts {
            let id = self.resolve(c)?;
            if !affirmed.contains(&id) {
                affirmed.push(id);
            }
        }
        let mut session = Session::new(id.into(), demographics, affirmed, self.config.budget);
        if session.affirmed.iter().any(|c| self.is_red_flag(c)) {
            session.finish(Status::Escalated);
            return Ok(session);
        }
        if !session.affirmed.iter().any(|c| self.kg.concept_node(c).is_some()) {
            return Err(Error::Session("no initial concept occurs in the case base".into()));
        }
        self.advance(&mut session)?;
        Ok(session)
    }

    pub fn answer(&self, session: &mut Session, concept: &str, response: Response) -> Result<()> {
        if session.status.is_final() {
            return Err(Error::Protocol(format!("session {} is already finished", session.id)));
        }
        let Some(pending) = session.pending.clone() else {
            return Err(Error::Protocol("no question is pending".into()));
        };
        let concept = self.resolve(concept).unwrap_or_else(|_| concept.to_string());
        if concept != pending {
            return Err(Error::Protocol(format!("answer for {concept:?} but {pending:?} was asked")));
        }
        session.pending = None;
        session.record(concept.clone(), response);
        if response == Response::Yes && self.is_red_flag(&concept) {
            session.finish(Status::Escalated);
            return Ok(());
        }
        let a = self.assess(session)?;
        let confident = (a.confidence >= self.config.confidence_threshold).then_some(a.risk);
        let stable = confident.is_some() && confident == session.last_confident;
        session.last_confident = confident;
        if stable {
            session.finish(Status::Concluded);
            return Ok(());
        }
        self.advance(session)
    }

    /// Picks the next question or concludes.
    fn advance(&self, session: &mut Session) -> Result<()> {
        if session.budget == 0 {
            session.finish(Status::Concluded);
            return Ok(());
        }
        let ctx = QuestionContext {
            affirmed: self.known(&session.affirmed),
            denied: self.known(&session.denied),
            asked: session.asked().map(String::from).collect(),
            age: Some(session.demographics.age),
            gender: Some(session.demographics.gender),
        };
        match self.selector.next_question(&ctx)? {
            Some(q) => session.pending = Some(q),
            None => session.finish(Status::Concluded),
        }
        Ok(())
    }

    fn known(&self, concepts: &[String]) -> Vec<String> {
        concepts.iter().filter(|c| self.kg.concept_node(c).is_some()).cloned().collect()
    }

    fn profile(&self, session: &Session) -> QueryProfile {
        QueryProfile {
            affirmed: self.known(&session.affirmed),
            denied: self.known(&session.denied),
            age: Some(session.demographics.age),
            gender: Some(session.demographics.gender),
        }
    }

    fn assess(&self, session: &Session) -> Result<Assessment> {
        let profile = self.profile(session);
        if profile.affirmed.is_empty() {
            return Err(Error::Inference("no affirmed concept occurs in the case base".into()));
        }
        let hits = similar_case_indices(
            self.kg,
            &profile,
            self.config.evidence,
            self.weights,
            &self.config.question.similarity,
        )?;
        let mut evidence = Vec::with_capacity(hits.len());
        let mut labels = Vec::with_capacity(hits.len());
        for (case, score) in hits {
            let label = self
                .kg
                .case_label(case)
                .ok_or_else(|| Error::Inference(format!("case {} has no label", self.kg.case_id(case))))?;
            evidence.push(Evidence {
                case_id: self.kg.case_id(case).to_string(),
                score,
                risk: label.risk,
            });
            labels.push(label);
        }
        if evidence.is_empty() {
            return Err(Error::Inference("no similar case found".into()));
        }
        let mut masses = ClassMasses::default();
        for e in &evidence {
            masses.add(e.risk, e.score.max(0.0));
        }
        if masses.total() <= 0.0 {
            // every retrieved case scored zero or below: count them equally
            masses = ClassMasses::default();
            for e in &evidence {
                masses.add(e.risk, 1.0);
            }
        }
        // Risk::ALL runs high to low, so ties go to the higher risk
        let risk = Risk::ALL
            .into_iter()
            .fold(Risk::High, |best, r| if masses.get(r) > masses.get(best) { r } else { best });
        let confidence = masses.get(risk) / masses.total();
        Ok(Assessment {
            evidence,
            labels,
            masses,
            risk,
            confidence,
        })
    }

    pub fn recommend(&self, session: &Session) -> Result<Recommendation> {
        match session.status {
            Status::Collecting => Err(Error::Protocol(format!("session {} is still collecting", session.id))),
            Status::Escalated => Ok(Recommendation {
                label: RecommendationLabel::new(Risk::High, PointOfCare::EmergencyCall, TimeFrame::Immediate),
                confidence: 1.0,
                evidence: Vec::new(),
                rationale: Rationale {
                    masses: ClassMasses::default(),
                    red_flag: session.affirmed.iter().find(|c| self.is_red_flag(c)).cloned(),
                    raised_from: None,
                },
            }),
            Status::Concluded => {
                let a = self.assess(session)?;
                let raise = a.confidence < self.config.confidence_threshold && a.risk != Risk::High;
                let label = if raise {
                    RecommendationLabel::default_for(a.risk.raised())
                } else {
                    modal_label(&a, a.risk)
                };
                Ok(Recommendation {
                    label,
                    confidence: a.confidence,
                    evidence: a.evidence,
                    rationale: Rationale {
                        masses: a.masses,
                        red_flag: None,
                        raised_from: raise.then_some(a.risk),
                    },
                })
            }
        }
    }
}

/// Most frequent full label among the evidence of one class, ties by the
/// label order.
fn modal_label(a: &Assessment, risk: Risk) -> RecommendationLabel {
    let mut counts: BTreeMap<RecommendationLabel, usize> = BTreeMap::new();
    for l in a.labels.iter().filter(|l| l.risk == risk) {
        *counts.entry(*l).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(RecommendationLabel, usize)>, (l, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((l, n)),
        })
        .map_or_else(|| RecommendationLabel::default_for(risk), |(l, _)| l)
}
