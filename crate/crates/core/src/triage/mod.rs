//! Triage sessions: the question loop, red-flag escalation, case-based
//! recommendations and their evaluation against ground truth.

pub mod engine;
pub mod eval;
pub mod session;

pub use engine::{ClassMasses, Engine, Evidence, Rationale, Recommendation, TriageConfig};
pub use eval::{
    evaluate_recommendations, ground_truth_from, load_ground_truth, save_ground_truth, script, scripted_session,
    GroundTruthCase, Script, ScriptedOutcome, TriageReport, SCRIPT_INITIAL,
};
pub use session::{Demographics, Exchange, Response, Session, Status};

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus::{CaseRecord, ConceptMention, Gender, PointOfCare, RecommendationLabel, Risk, TimeFrame};
    use crate::kg::{idf_weights, KnowledgeGraph};
    use crate::ontology::Ontology;
    use crate::resources::Resources;
    use crate::Error;

    fn rec(id: &str, concepts: &[&str], label: RecommendationLabel) -> CaseRecord {
        CaseRecord {
            id: id.into(),
            age: 30,
            gender: Gender::Female,
            mentions: concepts.iter().map(|c| ConceptMention::present(*c)).collect(),
            free_text: String::new(),
            label,
        }
    }

    fn low() -> RecommendationLabel {
        RecommendationLabel::new(Risk::Low, PointOfCare::SelfCare, TimeFrame::Unscheduled)
    }

    fn medium() -> RecommendationLabel {
        RecommendationLabel::new(Risk::Medium, PointOfCare::PhysicalVisit, TimeFrame::Within24h)
    }

    struct Fixture {
        kg: KnowledgeGraph,
        ontology: Ontology,
    }

    fn fixture(cases: &[CaseRecord]) -> Fixture {
        let ontology = Ontology::build(&[], &Resources::builtin()).unwrap();
        let kg = KnowledgeGraph::build(cases, &ontology).unwrap();
        Fixture { kg, ontology }
    }

    fn colds() -> Vec<CaseRecord> {
        (0..30)
            .map(|i| {
                if i % 3 == 0 {
                    rec(&format!("c{i:02}"), &["C_cough", "C_fever", "C_headache"], low())
                } else {
                    rec(&format!("c{i:02}"), &["C_cough", "C_runny_nose"], low())
                }
            })
            .collect()
    }

    fn demo() -> Demographics {
        Demographics {
            age: 30,
            gender: Gender::Female,
        }
    }

    #[test]
    fn red_flag_start_escalates() {
        let f = fixture(&colds());
        let w = idf_weights(&f.kg);
        let e = Engine::new(&f.kg, &f.ontology, &w, TriageConfig::default()).unwrap();
        let s = e.start("s", demo(), &["C_chest_pain".into()]).unwrap();
        assert_eq!(s.status, Status::Escalated);
        let r = e.recommend(&s).unwrap();
        assert_eq!(r.label, RecommendationLabel::default_for(Risk::High));
        assert_eq!(r.confidence, 1.0);
        assert!(r.rationale.red_flag.is_some());
    }

    #[test]
    fn unanimous_low_evidence() {
        let f = fixture(&colds());
        let w = idf_weights(&f.kg);
        let e = Engine::new(&f.kg, &f.ontology, &w, TriageConfig::default()).unwrap();
        let mut s = e.start("s", demo(), &["C_cough".into(), "C_cough".into()]).unwrap();
        assert_eq!(s.affirmed.len(), 1);
        assert_eq!(s.budget, 10);
        while let Some(q) = s.pending.clone() {
            e.answer(&mut s, &q, Response::No).unwrap();
        }
        assert_eq!(s.status, Status::Concluded);
        s.check().unwrap();
        let r = e.recommend(&s).unwrap();
        assert_eq!(r.label, low());
        assert_eq!(r.confidence, 1.0);
        assert!(!r.evidence.is_empty());
    }

    #[test]
    fn protocol_violations() {
        let f = fixture(&colds());
        let w = idf_weights(&f.kg);
        let e = Engine::new(&f.kg, &f.ontology, &w, TriageConfig::default()).unwrap();
        assert!(matches!(e.start("s", demo(), &[]), Err(Error::Session(_))));
        let mut s = e.start("s", demo(), &["C_cough".into()]).unwrap();
        let q = s.pending.clone().expect("a question");
        assert!(matches!(e.recommend(&s), Err(Error::Protocol(_))));
        let other = if q == "nope" { "nope2" } else { "nope" };
        assert!(matches!(e.answer(&mut s, other, Response::Yes), Err(Error::Protocol(_))));
        e.answer(&mut s, &q, Response::Yes).unwrap();
        assert!(matches!(e.answer(&mut s, &q, Response::Yes), Err(Error::Protocol(_))));
    }

    #[test]
    fn low_confidence_raises_one_level() {
        // cough alone splits 5 low / 4 medium cases evenly by score
        let mut cases: Vec<_> = (0..5).map(|i| rec(&format!("l{i}"), &["C_cough"], low())).collect();
        cases.extend((0..4).map(|i| rec(&format!("m{i}"), &["C_cough", "C_fever"], medium())));
        let f = fixture(&cases);
        let w = idf_weights(&f.kg);
        let cfg = TriageConfig {
            budget: 0,
            ..TriageConfig::default()
        };
        let e = Engine::new(&f.kg, &f.ontology, &w, cfg).unwrap();
        let s = e.start("s", demo(), &["C_cough".into()]).unwrap();
        assert_eq!(s.status, Status::Concluded);
        let r = e.recommend(&s).unwrap();
        // every case shares cough and both demographics, so all scores are equal
        assert!((r.confidence - 5.0 / 9.0).abs() < 1e-9);
        assert_eq!(r.rationale.raised_from, Some(Risk::Low));
        assert_eq!(r.label, RecommendationLabel::default_for(Risk::Medium));
        let m = r.rationale.masses;
        let total: f64 = r.evidence.iter().map(|e| e.score.max(0.0)).sum();
        assert!((m.total() - total).abs() < 1e-9);
    }

    #[test]
    fn evaluation_on_always_right_pairs() {
        let pairs: Vec<_> = [low(), medium(), RecommendationLabel::default_for(Risk::High)]
            .into_iter()
            .map(|l| (l, l))
            .collect();
        let r = TriageReport::from_pairs(&pairs).unwrap();
        assert!(r.per_class.iter().all(|m| m.f_score == 1.0));
        assert_eq!(r.emergency_recall, 1.0);
        let high = RecommendationLabel::default_for(Risk::High);
        let pairs: Vec<_> = [low(), medium(), high].into_iter().map(|l| (l, high)).collect();
        let r = TriageReport::from_pairs(&pairs).unwrap();
        assert_eq!(r.per_class[0].recall, 1.0);
        assert!((r.per_class[0].precision - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_round_trip() {
        let truth = ground_truth_from(&colds()[..3]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.jsonl");
        save_ground_truth(&p, &truth).unwrap();
        assert_eq!(load_ground_truth(&p).unwrap(), truth);
        let f = fixture(&colds());
        let w = idf_weights(&f.kg);
        let e = Engine::new(&f.kg, &f.ontology, &w, TriageConfig::default()).unwrap();
        assert!(matches!(evaluate_recommendations(&e, &[]), Err(Error::Data(_))));
        let by_id: BTreeMap<_, _> = truth.iter().map(|t| (t.record.id.clone(), t)).collect();
        let (report, outcomes) = evaluate_recommendations(&e, &truth).unwrap();
        assert_eq!(report.cases, 3);
        assert!(outcomes.iter().all(|o| by_id[&o.case_id].expected == o.expected));
    }
}
