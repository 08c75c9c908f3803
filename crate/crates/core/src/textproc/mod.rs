//! Deterministic text pipeline: preprocessing, abbreviation expansion,
//! dictionary NER, negation/temporal polarity and rule-based relations.

pub mod entities;
pub mod negation;
pub mod pipeline;
pub mod preprocess;
pub mod relations;

pub use entities::{detect_entities, expand_abbreviations, DictionaryTagger, Tagger};
pub use negation::{detect_negation, PolarityConfig};
pub use pipeline::{Analysis, Annotation, RelationScorer, TextConfig, TextPipeline};
pub use preprocess::{normalize_word, render, Preprocessor, Sentence, Tag, Token};
pub use relations::{extract_relations_rules, Relation, RelationCandidate, RelationSource};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Present,
    Negated,
    Historical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Dictionary,
    Rule,
}

/// A concept occurrence over the half-open token span `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub concept_id: String,
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
    pub source: MentionSource,
}

impl Mention {
    pub fn new(concept_id: impl Into<String>, start: usize, end: usize) -> Self {
        Mention {
            concept_id: concept_id.into(),
            start,
            end,
            polarity: Polarity::Present,
            source: MentionSource::Dictionary,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}
