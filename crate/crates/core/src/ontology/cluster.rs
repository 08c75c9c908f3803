use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::resources::{Flag, Resources, SemanticType};
use crate::textproc::Annotation;

use super::compound::semantic_blocks;
use super::{block_key, concept_id_for, Concept};

/// Stage-one key of an annotation: the dictionary entry, or entry plus
/// location for located findings.
pub fn source_key(concept: &str, location: Option<&str>) -> String {
    match location {
        Some(loc) => format!("{concept}@{loc}"),
        None => concept.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Clustering {
    pub concepts: BTreeMap<String, Concept>,
    /// Stage-one key to concept id.
    pub sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
struct Group {
    surfaces: BTreeSet<String>,
    blocks: Vec<String>,
    semantic_type: SemanticType,
    flags: BTreeSet<Flag>,
}

/// Two-stage clustering. Stage one groups every surface under its dictionary
/// entry (or entry@location); stage two merges groups whose semantic-block
/// sets are equal, so permuted or layman/technical variants of the same
/// simple entities end up in one concept.
pub fn cluster_concepts(annotations: &[Annotation], resources: &Resources) -> Result<Clustering> {
    let dict = &resources.dictionary;
    let pre = &resources.preprocessor;
    let blocks_of = |id: &str| -> Result<Vec<String>> {
        let entry = dict.get(id).ok_or_else(|| Error::Lookup(id.to_string()))?;
        Ok(semantic_blocks(&pre.normalize_phrase(&entry.canonical), &resources.lexicon))
    };

    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for entry in dict.entries() {
        let surfaces = std::iter::once(&entry.canonical)
            .chain(&entry.synonyms)
            .map(|s| pre.normalize_phrase(s).join(" "))
            .filter(|s| !s.is_empty())
            .collect();
        groups.insert(
            entry.concept_id.clone(),
            Group {
                surfaces,
                blocks: blocks_of(&entry.concept_id)?,
                semantic_type: entry.semantic_type,
                flags: entry.flags.clone(),
            },
        );
    }
    for a in annotations {
        let key = source_key(&a.concept, a.location.as_deref());
        if !groups.contains_key(&key) {
            let loc = a.location.as_deref().expect("plain entries are seeded above");
            let base = dict
                .get(&a.concept)
                .ok_or_else(|| Error::Lookup(a.concept.clone()))?;
            let mut blocks: BTreeSet<String> = blocks_of(&a.concept)?.into_iter().collect();
            blocks.extend(blocks_of(loc)?);
            groups.insert(
                key.clone(),
                Group {
                    surfaces: BTreeSet::new(),
                    blocks: blocks.into_iter().collect(),
                    semantic_type: base.semantic_type,
                    flags: base
                        .flags
                        .iter()
                        .copied()
                        .filter(|f| matches!(f, Flag::FemaleOnly | Flag::MaleOnly | Flag::Psych))
                        .collect(),
                },
            );
        }
        if !a.normalized.is_empty() {
            groups.get_mut(&key).expect("inserted").surfaces.insert(a.normalized.clone());
        }
    }

    let mut by_blocks: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for (key, g) in &groups {
        by_blocks.entry(block_key(&g.blocks)).or_default().push(key);
    }
    let mut out = Clustering::default();
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    for members in by_blocks.values() {
        let first = &groups[members[0]];
        let id = concept_id_for(&first.blocks);
        let mut synonyms = BTreeSet::new();
        let mut flags = BTreeSet::new();
        for key in members {
            let g = &groups[*key];
            if g.semantic_type != first.semantic_type {
                return Err(Error::Clustering {
                    members: members.iter().map(|m| m.to_string()).collect(),
                    message: format!(
                        "semantic types {} and {} in one block set",
                        first.semantic_type, g.semantic_type
                    ),
                });
            }
            synonyms.extend(g.surfaces.iter().cloned());
            flags.extend(g.flags.iter().copied());
            out.sources.insert(key.to_string(), id.clone());
        }
        for s in &synonyms {
            if let Some(prev) = owner.insert(s.clone(), members[0].to_string()) {
                return Err(Error::Clustering {
                    members: vec![prev, members[0].to_string()],
                    message: format!("surface {s:?} claimed by two concepts"),
                });
            }
        }
        if out.concepts.contains_key(&id) {
            return Err(Error::Clustering {
                members: members.iter().map(|m| m.to_string()).collect(),
                message: format!("concept id collision on {id}"),
            });
        }
        out.concepts.insert(
            id.clone(),
            Concept {
                canonical: synonyms.iter().next().cloned().unwrap_or_else(|| block_key(&first.blocks)),
                id,
                synonyms,
                semantic_type: first.semantic_type,
                blocks: first.blocks.clone(),
                flags,
            },
        );
    }
    Ok(out)
}

/// Mean number of distinct raw expressions per concept, over the concepts
/// the annotations reach.
pub fn compression(annotations: &[Annotation], sources: &BTreeMap<String, String>) -> f64 {
    let mut per: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in annotations {
        if let Some(id) = sources.get(&source_key(&a.concept, a.location.as_deref())) {
            per.entry(id).or_default().insert(a.surface.as_str());
        }
    }
    if per.is_empty() {
        return 0.0;
    }
    per.values().map(|s| s.len()).sum::<usize>() as f64 / per.len() as f64
}
