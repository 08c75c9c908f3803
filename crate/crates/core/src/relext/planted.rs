//! Synthetic relation corpus: finding and anatomy mentions too far apart
//! for the rules, labelled by the sentence pattern that joins them.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resources::{Resources, SemanticType};
use crate::rng;
use crate::textproc::{Relation, TextConfig, TextPipeline};

use super::RelationTriple;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    /// Number of triples, half of them `located_in`.
    pub size: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig { size: 10_000, seed: 11 }
    }
}

const FILLERS: [&str; 16] = [
    "gestern", "abend", "zunehmend", "nachts", "belastung", "morgens", "langsam", "ploetzlich",
    "verstaerkt", "bemerkt", "tagen", "wochen", "anhaltend", "wechselnd", "bewegung", "treppensteigen",
];
const CONNECTIVES: [&str; 4] = ["am", "im", "an", "in"];
const CLEAR: [&str; 4] = ["unauffaellig", "reizlos", "regelrecht", "unversehrt"];

fn fillers(rng: &mut rng::Rng) -> String {
    let n = rng.gen_range(4..=7);
    (0..n).map(|_| *FILLERS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

/// `size` triples, alternating labels, shuffled. Each sentence holds exactly
/// one finding and one anatomy mention at least four tokens apart.
pub fn planted_corpus(resources: &Resources, config: &PlantedConfig) -> Result<Vec<RelationTriple>> {
    let dict = &resources.dictionary;
    let findings: Vec<&str> = dict
        .entries()
        .iter()
        .filter(|e| e.semantic_type == SemanticType::Symptom && !e.canonical.contains(' '))
        .filter_map(|e| e.synonyms.first().map(String::as_str))
        .collect();
    let anatomy: Vec<&str> = dict
        .entries()
        .iter()
        .filter(|e| e.semantic_type == SemanticType::Anatomy)
        .filter_map(|e| e.synonyms.first().map(String::as_str))
        .collect();
    if findings.is_empty() || anatomy.is_empty() {
        return Err(Error::Data("dictionary lacks symptoms or anatomy".into()));
    }
    let pipeline = TextPipeline::new(resources, TextConfig::default());
    let mut rng = rng::seeded(config.seed);
    let mut out = Vec::with_capacity(config.size);
    let mut attempts = 0usize;
    while out.len() < config.size {
        attempts += 1;
        if attempts > config.size * 20 + 100 {
            return Err(Error::Data("could not render enough unambiguous sentences".into()));
        }
        let label = if out.len() % 2 == 0 { Relation::LocatedIn } else { Relation::NotLocatedIn };
        let f = findings.choose(&mut rng).expect("non-empty");
        let a = anatomy.choose(&mut rng).expect("non-empty");
        let fill = fillers(&mut rng);
        let conn = CONNECTIVES.choose(&mut rng).expect("non-empty");
        let clear = CLEAR.choose(&mut rng).expect("non-empty");
        let text = match (label, rng.gen_range(0..3)) {
            (Relation::LocatedIn, 0 | 1) => format!("{f} {fill} {conn} {a}."),
            (Relation::LocatedIn, _) => format!("{conn} {a} {fill} {f}."),
            (_, 0) => format!("{f} {fill}, {a} {clear}."),
            (_, 1) => format!("{a} {clear}, {f} {fill}."),
            _ => format!("{f} {fill}, untersuchung {conn} {a} {clear}."),
        };
        let analysis = pipeline.analyze(&text);
        let [sa] = analysis.sentences.as_slice() else {
            continue;
        };
        let type_of = |id: &str| dict.get(id).map(|e| e.semantic_type);
        let finding: Vec<_> = sa
            .mentions
            .iter()
            .filter(|m| type_of(&m.concept_id).is_some_and(SemanticType::is_finding))
            .collect();
        let anat: Vec<_> = sa
            .mentions
            .iter()
            .filter(|m| type_of(&m.concept_id) == Some(SemanticType::Anatomy))
            .collect();
        let ([e1], [e2]) = (finding.as_slice(), anat.as_slice()) else {
            continue;
        };
        let gap = if e1.end <= e2.start { e2.start - e1.end } else { e1.start.saturating_sub(e2.end) };
        if gap < 4 {
            continue;
        }
        out.push(RelationTriple {
            tokens: sa.sentence.tokens.clone(),
            e1: (*e1).clone(),
            e2: (*e2).clone(),
            label,
        });
    }
    out.shuffle(&mut rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_distant() {
        let r = Resources::builtin();
        let c = planted_corpus(&r, &PlantedConfig { size: 400, seed: 5 }).unwrap();
        assert_eq!(c.len(), 400);
        assert_eq!(c.iter().filter(|t| t.label == Relation::LocatedIn).count(), 200);
        for t in &c {
            let gap = if t.e1.end <= t.e2.start { t.e2.start - t.e1.end } else { t.e1.start - t.e2.end };
            assert!(gap >= 4);
        }
        let again = planted_corpus(&r, &PlantedConfig { size: 400, seed: 5 }).unwrap();
        assert_eq!(c, again);
    }
}
