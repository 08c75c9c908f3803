//! Ontology learning: compound splitting, two-stage concept clustering,
//! taxonomy induction from seed ontologies, coarsening and import/export.

pub mod cluster;
pub mod compound;
pub mod io;
pub mod taxonomy;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::resources::{Flag, Resources, SemanticType};
use crate::textproc::Annotation;

pub use cluster::{cluster_concepts, compression, source_key, Clustering};
pub use compound::{semantic_blocks, split_compound};
pub use taxonomy::build_taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    ChildOf,
    LocatedIn,
    NegationOf,
    CharacterizationOf,
    SpecificationOf,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::ChildOf => "child_of",
            EdgeKind::LocatedIn => "located_in",
            EdgeKind::NegationOf => "negation_of",
            EdgeKind::CharacterizationOf => "characterization_of",
            EdgeKind::SpecificationOf => "specification_of",
        }
    }

    pub fn is_taxonomic(self) -> bool {
        self == EdgeKind::ChildOf
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "child_of" => EdgeKind::ChildOf,
            "located_in" => EdgeKind::LocatedIn,
            "negation_of" => EdgeKind::NegationOf,
            "characterization_of" => EdgeKind::CharacterizationOf,
            "specification_of" => EdgeKind::SpecificationOf,
            _ => return Err(Error::Format(format!("unknown edge kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub kind: EdgeKind,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, kind: EdgeKind, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            kind,
            to: to.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    /// Lexicographically smallest normalized surface of the cluster.
    pub canonical: String,
    pub synonyms: BTreeSet<String>,
    pub semantic_type: SemanticType,
    /// Sorted simple-entity representatives.
    pub blocks: Vec<String>,
    pub flags: BTreeSet<Flag>,
}

impl Concept {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn is_red_flag(&self) -> bool {
        self.has_flag(Flag::RedFlag)
    }
}

pub fn block_key(blocks: &[String]) -> String {
    blocks.join(",")
}

/// Stable concept id derived from the sorted semantic blocks.
pub fn concept_id_for(blocks: &[String]) -> String {
    let digest = Sha256::digest(block_key(blocks).as_bytes());
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("K{hex}")
}

/// Concepts, their taxonomic and non-taxonomic edges, and the lookup
/// tables that map dictionary entries and surfaces onto concepts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ontology {
    concepts: BTreeMap<String, Concept>,
    edges: BTreeSet<Edge>,
    /// Dictionary key (`C_x` or `C_x@C_loc`) to concept id.
    sources: BTreeMap<String, String>,
    block_index: HashMap<String, String>,
    surface_index: HashMap<String, String>,
    children: HashMap<String, Vec<String>>,
}

impl Ontology {
    pub fn new(
        concepts: impl IntoIterator<Item = Concept>,
        edges: impl IntoIterator<Item = Edge>,
        sources: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut o = Ontology {
            concepts: concepts.into_iter().map(|c| (c.id.clone(), c)).collect(),
            edges: edges.into_iter().collect(),
            sources,
            ..Default::default()
        };
        o.reindex();
        o.validate()?;
        Ok(o)
    }

    /// Full build: clustering, taxonomy, `located_in` and `negation_of`.
    pub fn build(annotations: &[Annotation], resources: &Resources) -> Result<Self> {
        let clustering = cluster_concepts(annotations, resources)?;
        let seeds = resources.seeds();
        let concepts: Vec<Concept> = clustering.concepts.values().cloned().collect();
        let mut edges: Vec<Edge> = build_taxonomy(&concepts, &seeds)?
            .into_iter()
            .map(|(c, p)| Edge::new(c, EdgeKind::ChildOf, p))
            .collect();
        for (key, id) in &clustering.sources {
            if let Some((_, loc)) = key.split_once('@') {
                if let Some(loc_id) = clustering.sources.get(loc) {
                    if loc_id != id {
                        edges.push(Edge::new(id.clone(), EdgeKind::LocatedIn, loc_id.clone()));
                    }
                }
            }
        }
        edges.extend(negation_edges(&concepts));
        Ontology::new(concepts, edges, clustering.sources)
    }

    fn reindex(&mut self) {
        self.block_index.clear();
        self.surface_index.clear();
        self.children.clear();
        for c in self.concepts.values() {
            self.block_index.insert(block_key(&c.blocks), c.id.clone());
            for s in &c.synonyms {
                self.surface_index.insert(s.clone(), c.id.clone());
            }
        }
        for e in self.edges.iter().filter(|e| e.kind.is_taxonomic()) {
            self.children.entry(e.to.clone()).or_default().push(e.from.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for c in self.concepts.values() {
            if c.blocks.is_empty() {
                return Err(Error::Data(format!("concept {} has no semantic blocks", c.id)));
            }
            if c.is_red_flag()
                && !matches!(c.semantic_type, SemanticType::Symptom | SemanticType::Disease)
            {
                return Err(Error::Data(format!(
                    "red-flag concept {} has type {}",
                    c.id, c.semantic_type
                )));
            }
            for s in &c.synonyms {
                if let Some(other) = owner.insert(s.as_str(), c.id.as_str()) {
                    return Err(Error::Data(format!(
                        "surface {s:?} shared by {other} and {}",
                        c.id
                    )));
                }
            }
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !self.concepts.contains_key(end) {
                    return Err(Error::Lookup(format!("edge endpoint {end}")));
                }
            }
        }
        for id in self.sources.values() {
            if !self.concepts.contains_key(id) {
                return Err(Error::Lookup(format!("source target {id}")));
            }
        }
        taxonomy::check_acyclic(self.edges.iter().filter(|e| e.kind.is_taxonomic()).map(|e| (e.from.as_str(), e.to.as_str())))
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn sources(&self) -> &BTreeMap<String, String> {
        &self.sources
    }

    pub fn by_surface(&self, normalized: &str) -> Option<&Concept> {
        self.surface_index.get(normalized).and_then(|id| self.concepts.get(id))
    }

    pub fn by_blocks(&self, blocks: &[String]) -> Option<&Concept> {
        self.block_index.get(&block_key(blocks)).and_then(|id| self.concepts.get(id))
    }

    pub fn parents<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.kind.is_taxonomic() && e.from == id)
            .map(|e| e.to.as_str())
    }

    /// All transitive children of `id`, excluding `id` itself.
    pub fn descendants(&self, id: &str) -> Result<BTreeSet<String>> {
        if !self.concepts.contains_key(id) {
            return Err(Error::Lookup(id.to_string()));
        }
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<&str> = VecDeque::from([id]);
        while let Some(cur) = queue.pop_front() {
            for child in self.children.get(cur).into_iter().flatten() {
                if child != id && out.insert(child.clone()) {
                    queue.push_back(child);
                }
            }
        }
        Ok(out)
    }

    /// Maps a dictionary-level mention onto a concept. A located mention
    /// resolves through the union of both block sets and falls back to the
    /// unlocated concept when no such concept was learned.
    pub fn resolve(&self, concept: &str, location: Option<&str>) -> Option<&str> {
        if let Some(loc) = location {
            let key = format!("{concept}@{loc}");
            if let Some(id) = self.sources.get(&key) {
                return Some(id);
            }
            if let (Some(a), Some(b)) = (self.resolve(concept, None), self.resolve(loc, None)) {
                let mut blocks: BTreeSet<String> = self.concepts[a].blocks.iter().cloned().collect();
                blocks.extend(self.concepts[b].blocks.iter().cloned());
                let blocks: Vec<String> = blocks.into_iter().collect();
                if let Some(id) = self.block_index.get(&block_key(&blocks)) {
                    return Some(id);
                }
            }
        }
        if self.concepts.contains_key(concept) {
            return self.concepts.get_key_value(concept).map(|(k, _)| k.as_str());
        }
        self.sources.get(concept).map(String::as_str)
    }

    /// Merges fine concepts into coarser ones. Synonyms, flags, sources and
    /// edges move to the target; self-loops and duplicates are dropped.
    pub fn coarsen(&self, merge: &BTreeMap<String, String>) -> Result<Ontology> {
        for (fine, coarse) in merge {
            for id in [fine, coarse] {
                if !self.concepts.contains_key(id) {
                    return Err(Error::Lookup(id.clone()));
                }
            }
            if merge.contains_key(coarse) {
                return Err(Error::Config(format!(
                    "merge target {coarse} is itself merged"
                )));
            }
        }
        let target = |id: &str| merge.get(id).map(String::as_str).unwrap_or(id).to_string();
        let mut concepts = self.concepts.clone();
        for (fine, coarse) in merge {
            let removed = concepts.remove(fine).expect("checked above");
            let dest = concepts.get_mut(coarse).expect("checked above");
            dest.synonyms.extend(removed.synonyms);
            dest.flags.extend(removed.flags);
            if let Some(min) = dest.synonyms.iter().next() {
                dest.canonical = min.clone();
            }
        }
        let edges: BTreeSet<Edge> = self
            .edges
            .iter()
            .map(|e| Edge::new(target(&e.from), e.kind, target(&e.to)))
            .filter(|e| e.from != e.to)
            .collect();
        taxonomy::check_acyclic(
            edges
                .iter()
                .filter(|e| e.kind.is_taxonomic())
                .map(|e| (e.from.as_str(), e.to.as_str())),
        )?;
        let sources = self
            .sources
            .iter()
            .map(|(k, v)| (k.clone(), target(v)))
            .collect();
        let mut out = Ontology::new(concepts.into_values(), edges, sources)?;
        for (fine, coarse) in merge {
            out.block_index
                .insert(block_key(&self.concepts[fine].blocks), coarse.clone());
        }
        Ok(out)
    }
}

/// `negation_of` edges for concepts whose blocks are another concept's plus
/// a negating morpheme such as "frei" (fieberfrei -> fieber).
fn negation_edges(concepts: &[Concept]) -> Vec<Edge> {
    const NEGATING: [&str; 2] = ["frei", "los"];
    let by_key: HashMap<String, &str> = concepts
        .iter()
        .map(|c| (block_key(&c.blocks), c.id.as_str()))
        .collect();
    let mut out = Vec::new();
    for c in concepts {
        if !c.blocks.iter().any(|b| NEGATING.contains(&b.as_str())) {
            continue;
        }
        let rest: Vec<String> = c
            .blocks
            .iter()
            .filter(|b| !NEGATING.contains(&b.as_str()))
            .cloned()
            .collect();
        if let Some(&target) = by_key.get(&block_key(&rest)) {
            out.push(Edge::new(c.id.clone(), EdgeKind::NegationOf, target));
        }
    }
    out
}
