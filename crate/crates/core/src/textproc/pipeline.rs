use serde::{Deserialize, Serialize};

use crate::corpus::ConceptMention;
use crate::resources::{Dictionary, Resources, SemanticType};

use super::entities::{detect_entities, expand_abbreviations, DictionaryTagger, Tagger};
use super::negation::{detect_negation, PolarityConfig};
use super::preprocess::Sentence;
use super::relations::{extract_relations_rules, Relation, RelationCandidate, RelationSource};
use super::Mention;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TextConfig {
    pub polarity: PolarityConfig,
    /// Largest token distance bridged by the relation rules.
    pub max_distance: usize,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            polarity: PolarityConfig::default(),
            max_distance: 3,
        }
    }
}

/// Classifier consulted for finding/anatomy pairs the rules leave open.
pub trait RelationScorer {
    fn classify(&self, sentence: &Sentence, e1: &Mention, e2: &Mention) -> Relation;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceAnalysis {
    pub sentence: Sentence,
    pub mentions: Vec<Mention>,
    pub relations: Vec<RelationCandidate>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Analysis {
    pub sentences: Vec<SentenceAnalysis>,
}

/// Raw expression of one concept occurrence, the unit the ontology builder
/// clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Annotation {
    pub surface: String,
    pub normalized: String,
    pub concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl Analysis {
    pub fn mentions(&self) -> impl Iterator<Item = &Mention> {
        self.sentences.iter().flat_map(|s| &s.mentions)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationCandidate> {
        self.sentences.iter().flat_map(|s| &s.relations)
    }

    /// Record-level mentions: anatomy only survives as the location of a
    /// `located_in` relation; duplicates keep their first occurrence.
    pub fn concept_mentions(&self, dictionary: &Dictionary) -> Vec<ConceptMention> {
        let mut out: Vec<ConceptMention> = Vec::new();
        for sa in &self.sentences {
            for m in &sa.mentions {
                let Some(entry) = dictionary.get(&m.concept_id) else {
                    continue;
                };
                if entry.semantic_type == SemanticType::Anatomy {
                    continue;
                }
                let cm = ConceptMention {
                    concept: m.concept_id.clone(),
                    polarity: m.polarity,
                    location: located(sa, m).map(|l| l.concept_id.clone()),
                };
                if !out.contains(&cm) {
                    out.push(cm);
                }
            }
        }
        out
    }

    pub fn annotations(&self) -> Vec<Annotation> {
        let mut out = Vec::new();
        for sa in &self.sentences {
            for m in &sa.mentions {
                let loc = located(sa, m);
                let (start, end) = match loc {
                    Some(l) => (m.start.min(l.start), m.end.max(l.end)),
                    None => (m.start, m.end),
                };
                let tokens = &sa.sentence.tokens[start..end];
                out.push(Annotation {
                    surface: tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
                    normalized: tokens
                        .iter()
                        .map(|t| t.normalized.as_str())
                        .collect::<Vec<_>>()
                        .join(" "),
                    concept: m.concept_id.clone(),
                    location: loc.map(|l| l.concept_id.clone()),
                });
            }
        }
        out
    }
}

fn located<'a>(sa: &'a SentenceAnalysis, m: &Mention) -> Option<&'a Mention> {
    sa.relations
        .iter()
        .find(|r| r.relation == Relation::LocatedIn && r.e1 == *m)
        .map(|r| &r.e2)
}

/// Preprocessing, abbreviation expansion, NER, tagging, polarity and
/// relations in one pass.
pub struct TextPipeline<'a> {
    pub resources: &'a Resources,
    pub config: TextConfig,
    scorer: Option<&'a dyn RelationScorer>,
}

impl<'a> TextPipeline<'a> {
    pub fn new(resources: &'a Resources, config: TextConfig) -> Self {
        TextPipeline {
            resources,
            config,
            scorer: None,
        }
    }

    /// Adds a model for finding/anatomy pairs farther apart than the rules
    /// reach.
    pub fn with_scorer(mut self, scorer: &'a dyn RelationScorer) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn analyze(&self, text: &str) -> Analysis {
        let r = self.resources;
        let sentences = r
            .preprocessor
            .preprocess(text)
            .into_iter()
            .map(|raw| {
                let mut sentence = expand_abbreviations(&raw, &r.abbreviations);
                let found = detect_entities(&sentence, &r.dictionary);
                DictionaryTagger(&r.dictionary).tag(&mut sentence, &found);
                let mentions = detect_negation(
                    &sentence,
                    &found,
                    &r.negation_triggers,
                    &r.historical_triggers,
                    &self.config.polarity,
                );
                let mut relations = extract_relations_rules(
                    &sentence,
                    &mentions,
                    &r.dictionary,
                    &r.connectives,
                    self.config.max_distance,
                );
                if let Some(scorer) = self.scorer {
                    relations.extend(self.model_relations(scorer, &sentence, &mentions, &relations));
                }
                SentenceAnalysis {
                    sentence,
                    mentions,
                    relations,
                }
            })
            .collect();
        Analysis { sentences }
    }

    fn model_relations(
        &self,
        scorer: &dyn RelationScorer,
        sentence: &Sentence,
        mentions: &[Mention],
        rules: &[RelationCandidate],
    ) -> Vec<RelationCandidate> {
        let dict = &self.resources.dictionary;
        let type_of = |m: &Mention| dict.get(&m.concept_id).map(|e| e.semantic_type);
        let mut out = Vec::new();
        for e1 in mentions.iter().filter(|m| type_of(m).is_some_and(SemanticType::is_finding)) {
            if rules.iter().any(|r| r.e1 == *e1) {
                continue;
            }
            for e2 in mentions.iter().filter(|m| type_of(m) == Some(SemanticType::Anatomy)) {
                let relation = scorer.classify(sentence, e1, e2);
                out.push(RelationCandidate {
                    e1: e1.clone(),
                    e2: e2.clone(),
                    relation,
                    source: RelationSource::Model,
                });
            }
        }
        out
    }
}
