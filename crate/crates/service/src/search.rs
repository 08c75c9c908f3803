//! Free-text symptom lookup over the ontology synonyms.

use serde::{Deserialize, Serialize};
use triage_core::ontology::Ontology;
use triage_core::resources::{Resources, SemanticType};
use triage_core::textproc::Preprocessor;
use triage_core::{Error, Result};

pub const MAX_RESULTS: usize = 10;
pub const MAX_DISTANCE: usize = 2;
/// Shortest query, in characters, that may match by edit distance.
pub const FUZZY_MIN_CHARS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Prefix,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub concept_id: String,
    pub label: String,
    pub semantic_type: SemanticType,
    pub matched: String,
    pub kind: MatchKind,
    pub score: f64,
}

/// Exact hits score 1, prefix hits fall in [0.5, 0.9) and fuzzy hits in
/// [0.2, 0.4), so the match kinds never interleave.
fn score(kind: MatchKind, query: &str, synonym: &str, distance: usize) -> f64 {
    let (q, s) = (query.chars().count() as f64, synonym.chars().count() as f64);
    match kind {
        MatchKind::Exact => 1.0,
        MatchKind::Prefix => 0.5 + 0.4 * q / (s + 1.0),
        MatchKind::Fuzzy => 0.4 - 0.1 * distance as f64,
    }
}

struct Entry {
    synonym: String,
    concept: usize,
}

pub struct SymptomIndex {
    preprocessor: Preprocessor,
    concepts: Vec<(String, String, SemanticType)>,
    entries: Vec<Entry>,
}

impl SymptomIndex {
    /// Indexes every synonym of every concept that a patient could report,
    /// which excludes bare anatomy.
    pub fn new(ontology: &Ontology, resources: &Resources) -> Self {
        let mut concepts = Vec::new();
        let mut entries = Vec::new();
        for c in ontology.concepts().filter(|c| c.semantic_type != SemanticType::Anatomy) {
            let i = concepts.len();
            concepts.push((c.id.clone(), c.canonical.clone(), c.semantic_type));
            for s in c.synonyms.iter().chain(std::iter::once(&c.canonical)) {
                entries.push(Entry {
                    synonym: s.clone(),
                    concept: i,
                });
            }
        }
        entries.sort_by(|a, b| (&a.synonym, a.concept).cmp(&(&b.synonym, b.concept)));
        entries.dedup_by(|a, b| a.synonym == b.synonym && a.concept == b.concept);
        SymptomIndex {
            preprocessor: resources.preprocessor.clone(),
            concepts,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Best match per concept, highest score first, ties by concept id.
    pub fn search(&self, query: &str) -> Result<Vec<Candidate>> {
        if query.trim().is_empty() {
            return Err(Error::Query("empty search query".into()));
        }
        let q = self.preprocessor.normalize_phrase(query).join(" ");
        if q.is_empty() {
            return Ok(Vec::new());
        }
        let fuzzy = q.chars().count() >= FUZZY_MIN_CHARS;
        let mut best: Vec<Option<Candidate>> = vec![None; self.concepts.len()];
        for e in &self.entries {
            let hit = if e.synonym == q {
                Some((MatchKind::Exact, 0))
            } else if e.synonym.starts_with(&q) {
                Some((MatchKind::Prefix, 0))
            } else if fuzzy {
                let d = strsim::osa_distance(&q, &e.synonym);
                (d <= MAX_DISTANCE).then_some((MatchKind::Fuzzy, d))
            } else {
                None
            };
            let Some((kind, d)) = hit else { continue };
            let s = score(kind, &q, &e.synonym, d);
            let slot = &mut best[e.concept];
            if slot.as_ref().is_none_or(|c| s > c.score) {
                let (id, label, st) = &self.concepts[e.concept];
                *slot = Some(Candidate {
                    concept_id: id.clone(),
                    label: label.clone(),
                    semantic_type: *st,
                    matched: e.synonym.clone(),
                    kind,
                    score: s,
                });
            }
        }
        let mut out: Vec<Candidate> = best.into_iter().flatten().collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.concept_id.cmp(&b.concept_id)));
        out.truncate(MAX_RESULTS);
        Ok(out)
    }
}
