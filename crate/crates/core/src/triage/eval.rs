use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::io::{read_jsonl, write_jsonl};
use crate::corpus::{CaseRecord, RecommendationLabel, Risk};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, per_class, ClassMetrics};

use super::engine::{Engine, Recommendation};
use super::session::{Demographics, Response, Session};

/// Initial concepts handed to a scripted session.
pub const SCRIPT_INITIAL: usize = 2;

/// A case in corpus format with the recommendation it should receive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthCase {
    #[serde(flatten)]
    pub record: CaseRecord,
    pub expected: RecommendationLabel,
}

/// Ground truth from generated records: the template label is the expected
/// recommendation.
pub fn ground_truth_from(corpus: &[CaseRecord]) -> Vec<GroundTruthCase> {
    corpus
        .iter()
        .map(|r| GroundTruthCase {
            record: r.clone(),
            expected: r.label,
        })
        .collect()
}

pub fn save_ground_truth(path: &Path, cases: &[GroundTruthCase]) -> Result<()> {
    write_jsonl(path, cases)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthCase>> {
    let cases: Vec<GroundTruthCase> = read_jsonl(path)?;
    for c in &cases {
        c.record.validate()?;
        c.expected.validate().map_err(|message| Error::Validation {
            id: c.record.id.clone(),
            message,
        })?;
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOutcome {
    pub case_id: String,
    pub expected: RecommendationLabel,
    pub session: Session,
    pub recommendation: Recommendation,
}

/// Initial concepts and answer oracle for replaying a case.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub demographics: Demographics,
    pub initial: Vec<String>,
    /// Concepts answered yes.
    pub present: BTreeSet<String>,
}

impl Script {
    pub fn response(&self, concept: &str) -> Response {
        if self.present.contains(concept) {
            Response::Yes
        } else {
            Response::No
        }
    }
}

/// The first present mentions known to the engine open the session and every
/// question is answered yes exactly when the case has the concept present.
/// `None` when no mention can open a session.
pub fn script(engine: &Engine, case: &GroundTruthCase) -> Option<Script> {
    let o = engine.ontology();
    let present: Vec<String> = case
        .record
        .present()
        .filter_map(|m| o.resolve(&m.concept, m.location.as_deref()).map(String::from))
        .collect();
    let usable = |c: &String| engine.kg().concept_node(c).is_some() || o.concept(c).is_some_and(|c| c.is_red_flag());
    let mut initial: Vec<String> = Vec::new();
    for c in present.iter().filter(|c| usable(c)) {
        if !initial.contains(c) {
            initial.push(c.clone());
        }
        if initial.len() == SCRIPT_INITIAL {
            break;
        }
    }
    if initial.is_empty() {
        return None;
    }
    Some(Script {
        demographics: Demographics {
            age: case.record.age,
            gender: case.record.gender,
        },
        initial,
        present: present.into_iter().collect(),
    })
}

/// Replays a case through [`script`].
pub fn scripted_session(engine: &Engine, case: &GroundTruthCase) -> Result<Option<ScriptedOutcome>> {
    let Some(sc) = script(engine, case) else {
        return Ok(None);
    };
    let mut session = engine.start(case.record.id.clone(), sc.demographics, &sc.initial)?;
    while let Some(q) = session.pending.clone() {
        engine.answer(&mut session, &q, sc.response(&q))?;
    }
    let recommendation = engine.recommend(&session)?;
    Ok(Some(ScriptedOutcome {
        case_id: case.record.id.clone(),
        expected: case.expected,
        session,
        recommendation,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub cases: usize,
    /// Cases without a mention that could open a session.
    pub skipped: usize,
    /// High, medium, low.
    pub per_class: Vec<ClassMetrics>,
    pub emergency_recall: f64,
    pub risk_accuracy: f64,
    /// Risk, point of care and time frame all match.
    pub label_accuracy: f64,
    pub escalated: usize,
    pub mean_questions: f64,
}

impl TriageReport {
    pub fn from_pairs(pairs: &[(RecommendationLabel, RecommendationLabel)]) -> Result<Self> {
        let risks: Vec<(Risk, Risk)> = pairs.iter().map(|(t, p)| (t.risk, p.risk)).collect();
        let per_class = per_class(&risks, &Risk::ALL)?;
        Ok(TriageReport {
            cases: pairs.len(),
            skipped: 0,
            emergency_recall: per_class[Risk::High.index()].recall,
            per_class,
            risk_accuracy: accuracy(&risks),
            label_accuracy: accuracy(pairs),
            escalated: 0,
            mean_questions: 0.0,
        })
    }

    pub fn summary(&self) -> String {
        let mut s = format!("emergency recall {:.4}\n", self.emergency_recall);
        for (r, m) in Risk::ALL.iter().zip(&self.per_class) {
            s += &format!(
                "{:<6} precision {:.4} recall {:.4} f {:.4} support {}\n",
                r.as_str(),
                m.precision,
                m.recall,
                m.f_score,
                m.support
            );
        }
        s += &format!(
            "risk accuracy {:.4} label accuracy {:.4} cases {} skipped {} escalated {} mean questions {:.2}\n",
            self.risk_accuracy, self.label_accuracy, self.cases, self.skipped, self.escalated, self.mean_questions
        );
        s
    }
}

/// Replays every case through a scripted session and scores the outcome.
/// Cases run on several threads; outcomes keep the input order.
pub fn evaluate_recommendations(
    engine: &Engine,
    truth: &[GroundTruthCase],
) -> Result<(TriageReport, Vec<ScriptedOutcome>)> {
    if truth.is_empty() {
        return Err(Error::Data("ground truth is empty".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = truth.len().div_ceil(threads);
    let results: Vec<Option<ScriptedOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = truth
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|c| scripted_session(engine, c)).collect::<Result<Vec<_>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect::<Result<Vec<_>>>()
            .map(|parts| parts.into_iter().flatten().collect())
    })?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let outcomes: Vec<ScriptedOutcome> = results.into_iter().flatten().collect();
    if outcomes.is_empty() {
        return Err(Error::Data("no ground-truth case could open a session".into()));
    }
    let pairs: Vec<_> = outcomes.iter().map(|o| (o.expected, o.recommendation.label)).collect();
    let mut report = TriageReport::from_pairs(&pairs)?;
    report.skipped = skipped;
    report.escalated = outcomes.iter().filter(|o| o.recommendation.rationale.red_flag.is_some()).count();
    report.mean_questions = outcomes.iter().map(|o| o.session.log.len() as f64).sum::<f64>() / outcomes.len() as f64;
    Ok((report, outcomes))
}
