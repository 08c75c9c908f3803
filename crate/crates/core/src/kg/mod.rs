//! Knowledge graph over case records and concepts: typed node tables and one
//! CSR adjacency (plus its transpose) per relation.

pub mod codes;
pub mod csr;
pub mod query;
pub mod snapshot;
pub mod weights;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{CaseRecord, Gender, Polarity, RecommendationLabel};
use crate::error::{Error, Result};
use crate::ontology::{Concept, Ontology};
use crate::resources::SemanticType;

pub use codes::{map_to_codes, parse_code_table, CoverageReport};
pub use csr::Csr;
pub use query::{similar_case_indices, similar_cases, traverse, Direction, QueryProfile, SimilarityConfig, SparseVec};
pub use weights::{document_frequencies, idf_weights, learn_weights, EdgeWeights, LearnConfig, WeightSource};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    CaseRecord,
    AgeGroup,
    Gender,
    Symptom,
    Disease,
    RedFlag,
    Recommendation,
}

impl NodeType {
    pub const ALL: [NodeType; 7] = [
        NodeType::CaseRecord,
        NodeType::AgeGroup,
        NodeType::Gender,
        NodeType::Symptom,
        NodeType::Disease,
        NodeType::RedFlag,
        NodeType::Recommendation,
    ];

    pub const CONCEPTS: [NodeType; 3] = [NodeType::Symptom, NodeType::Disease, NodeType::RedFlag];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::CaseRecord => "case_record",
            NodeType::AgeGroup => "age_group",
            NodeType::Gender => "gender",
            NodeType::Symptom => "symptom",
            NodeType::Disease => "disease",
            NodeType::RedFlag => "red_flag",
            NodeType::Recommendation => "recommendation",
        }
    }

    /// Node table a concept lands in; anatomy concepts are not nodes.
    pub fn of_concept(c: &Concept) -> Option<NodeType> {
        if c.is_red_flag() {
            Some(NodeType::RedFlag)
        } else {
            match c.semantic_type {
                SemanticType::Anatomy => None,
                SemanticType::Disease => Some(NodeType::Disease),
                _ => Some(NodeType::Symptom),
            }
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    SymptomToPatient,
    DiseaseToPatient,
    RedFlagToPatient,
    NegatedSymptomToPatient,
    NegatedDiseaseToPatient,
    NegatedRedFlagToPatient,
    HistoricalSymptomToPatient,
    HistoricalDiseaseToPatient,
    HistoricalRedFlagToPatient,
    AgeGroupToPatient,
    GenderToPatient,
    PatientToRecommendation,
}

impl RelationKind {
    pub const ALL: [RelationKind; 12] = [
        RelationKind::SymptomToPatient,
        RelationKind::DiseaseToPatient,
        RelationKind::RedFlagToPatient,
        RelationKind::NegatedSymptomToPatient,
        RelationKind::NegatedDiseaseToPatient,
        RelationKind::NegatedRedFlagToPatient,
        RelationKind::HistoricalSymptomToPatient,
        RelationKind::HistoricalDiseaseToPatient,
        RelationKind::HistoricalRedFlagToPatient,
        RelationKind::AgeGroupToPatient,
        RelationKind::GenderToPatient,
        RelationKind::PatientToRecommendation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<RelationKind> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        use RelationKind::*;
        match self {
            SymptomToPatient => "symptom_to_patient",
            DiseaseToPatient => "disease_to_patient",
            RedFlagToPatient => "red_flag_to_patient",
            NegatedSymptomToPatient => "negated_symptom_to_patient",
            NegatedDiseaseToPatient => "negated_disease_to_patient",
            NegatedRedFlagToPatient => "negated_red_flag_to_patient",
            HistoricalSymptomToPatient => "historical_symptom_to_patient",
            HistoricalDiseaseToPatient => "historical_disease_to_patient",
            HistoricalRedFlagToPatient => "historical_red_flag_to_patient",
            AgeGroupToPatient => "age_group_to_patient",
            GenderToPatient => "gender_to_patient",
            PatientToRecommendation => "patient_to_recommendation",
        }
    }

    pub fn from_type(self) -> NodeType {
        use RelationKind::*;
        match self {
            SymptomToPatient | NegatedSymptomToPatient | HistoricalSymptomToPatient => NodeType::Symptom,
            DiseaseToPatient | NegatedDiseaseToPatient | HistoricalDiseaseToPatient => NodeType::Disease,
            RedFlagToPatient | NegatedRedFlagToPatient | HistoricalRedFlagToPatient => NodeType::RedFlag,
            AgeGroupToPatient => NodeType::AgeGroup,
            GenderToPatient => NodeType::Gender,
            PatientToRecommendation => NodeType::CaseRecord,
        }
    }

    pub fn to_type(self) -> NodeType {
        match self {
            RelationKind::PatientToRecommendation => NodeType::Recommendation,
            _ => NodeType::CaseRecord,
        }
    }

    /// Concept-to-patient relation for a concept table and polarity.
    pub fn mention(node_type: NodeType, polarity: Polarity) -> Option<RelationKind> {
        use RelationKind::*;
        Some(match (node_type, polarity) {
            (NodeType::Symptom, Polarity::Present) => SymptomToPatient,
            (NodeType::Disease, Polarity::Present) => DiseaseToPatient,
            (NodeType::RedFlag, Polarity::Present) => RedFlagToPatient,
            (NodeType::Symptom, Polarity::Negated) => NegatedSymptomToPatient,
            (NodeType::Disease, Polarity::Negated) => NegatedDiseaseToPatient,
            (NodeType::RedFlag, Polarity::Negated) => NegatedRedFlagToPatient,
            (NodeType::Symptom, Polarity::Historical) => HistoricalSymptomToPatient,
            (NodeType::Disease, Polarity::Historical) => HistoricalDiseaseToPatient,
            (NodeType::RedFlag, Polarity::Historical) => HistoricalRedFlagToPatient,
            _ => return None,
        })
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Age buckets: 0-2, 3-12, 13-18, 19-40, 41-65, 66+.
pub const AGE_GROUPS: [(u32, u32, &str); 6] = [
    (0, 2, "0-2"),
    (3, 12, "3-12"),
    (13, 18, "13-18"),
    (19, 40, "19-40"),
    (41, 65, "41-65"),
    (66, u32::MAX, "66+"),
];

pub fn age_group(age: u32) -> usize {
    AGE_GROUPS
        .iter()
        .position(|&(lo, hi, _)| (lo..=hi).contains(&age))
        .expect("buckets cover every age")
}

fn wire_name<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .expect("unit enums serialize")
        .trim_matches('"')
        .to_string()
}

pub fn label_key(label: &RecommendationLabel) -> String {
    format!(
        "{}/{}/{}",
        label.risk,
        wire_name(&label.point_of_care),
        wire_name(&label.time_frame)
    )
}

/// Node tables: per type, the sorted node keys and a numeric code per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeTables {
    pub keys: [Vec<String>; 7],
    pub codes: [Vec<u64>; 7],
}

impl NodeTables {
    /// Internal code: node type in the high bits, dense index below.
    pub fn internal_code(t: NodeType, index: usize) -> u64 {
        ((t.index() as u64 + 1) << 40) | index as u64
    }

    pub fn new(mut keys: [Vec<String>; 7]) -> Self {
        let mut codes: [Vec<u64>; 7] = Default::default();
        for t in NodeType::ALL {
            keys[t.index()].sort();
            codes[t.index()] = (0..keys[t.index()].len()).map(|i| Self::internal_code(t, i)).collect();
        }
        NodeTables { keys, codes }
    }

    pub fn len(&self, t: NodeType) -> usize {
        self.keys[t.index()].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub kind: RelationKind,
    pub forward: Csr,
    pub backward: Csr,
}

/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    tables: NodeTables,
    relations: Vec<Adjacency>,
    lookup: [HashMap<String, u32>; 7],
    labels: Vec<RecommendationLabel>,
}

impl KnowledgeGraph {
    /// Assembles a graph from node tables and per-relation triplets. Missing
    /// relations are empty.
    pub fn from_parts(
        tables: NodeTables,
        mut triplets: BTreeMap<RelationKind, Vec<(u32, u32, f64)>>,
    ) -> Result<Self> {
        let mut relations = Vec::with_capacity(RelationKind::ALL.len());
        for kind in RelationKind::ALL {
            let rows = tables.len(kind.from_type());
            let cols = tables.len(kind.to_type());
            let forward = Csr::from_triplets(rows, cols, triplets.remove(&kind).unwrap_or_default())
                .map_err(|e| Error::Data(format!("{kind}: {e}")))?;
            let backward = forward.transpose();
            relations.push(Adjacency { kind, forward, backward });
        }
        Self::assemble(tables, relations)
    }

    fn assemble(tables: NodeTables, relations: Vec<Adjacency>) -> Result<Self> {
        let mut lookup: [HashMap<String, u32>; 7] = Default::default();
        for t in NodeType::ALL {
            lookup[t.index()] = tables.keys[t.index()]
                .iter()
                .enumerate()
                .map(|(i, k)| (k.clone(), i as u32))
                .collect();
        }
        let by_key: HashMap<String, RecommendationLabel> =
            RecommendationLabel::all_valid().into_iter().map(|l| (label_key(&l), l)).collect();
        let labels = tables.keys[NodeType::Recommendation.index()]
            .iter()
            .map(|k| by_key.get(k).copied().ok_or_else(|| Error::Format(format!("unknown label node {k}"))))
            .collect::<Result<_>>()?;
        let mut all_codes = BTreeSet::new();
        for t in NodeType::ALL {
            for &c in &tables.codes[t.index()] {
                if !all_codes.insert(c) {
                    return Err(Error::Mapping(format!("numeric code {c} used twice")));
                }
            }
        }
        Ok(KnowledgeGraph {
            tables,
            relations,
            lookup,
            labels,
        })
    }

    /// One node per case, non-anatomy concept, age group, gender and valid
    /// label; one edge per distinct (concept, polarity, case) plus the
    /// demographic and label edges of every case.
    pub fn build(corpus: &[CaseRecord], ontology: &Ontology) -> Result<Self> {
        let mut keys: [Vec<String>; 7] = Default::default();
        keys[NodeType::CaseRecord.index()] = corpus.iter().map(|c| c.id.clone()).collect();
        keys[NodeType::AgeGroup.index()] = AGE_GROUPS.iter().map(|g| g.2.to_string()).collect();
        keys[NodeType::Gender.index()] = Gender::ALL.iter().map(|g| g.as_str().to_string()).collect();
        for c in ontology.concepts() {
            if let Some(t) = NodeType::of_concept(c) {
                keys[t.index()].push(c.id.clone());
            }
        }
        keys[NodeType::Recommendation.index()] =
            RecommendationLabel::all_valid().iter().map(label_key).collect();
        let unique: BTreeSet<&String> = keys[NodeType::CaseRecord.index()].iter().collect();
        if unique.len() != corpus.len() {
            return Err(Error::Data("duplicate case ids".into()));
        }
        let tables = NodeTables::new(keys);
        let index = |t: NodeType, key: &str| -> u32 {
            tables.keys[t.index()]
                .binary_search_by(|k| k.as_str().cmp(key))
                .expect("node registered above") as u32
        };

        let mut triplets: BTreeMap<RelationKind, BTreeSet<(u32, u32)>> = BTreeMap::new();
        for rec in corpus {
            let case = index(NodeType::CaseRecord, &rec.id);
            let mut unresolved = Vec::new();
            for m in &rec.mentions {
                let node = ontology
                    .resolve(&m.concept, m.location.as_deref())
                    .and_then(|id| ontology.concept(id))
                    .and_then(|c| NodeType::of_concept(c).map(|t| (t, c.id.as_str())));
                match node {
                    Some((t, id)) => {
                        let kind = RelationKind::mention(t, m.polarity).expect("concept table");
                        triplets.entry(kind).or_default().insert((index(t, id), case));
                    }
                    None => unresolved.push(match &m.location {
                        Some(l) => format!("{}@{l}", m.concept),
                        None => m.concept.clone(),
                    }),
                }
            }
            if !unresolved.is_empty() {
                return Err(Error::Ingestion {
                    record: rec.id.clone(),
                    concepts: unresolved,
                });
            }
            triplets
                .entry(RelationKind::AgeGroupToPatient)
                .or_default()
                .insert((age_group(rec.age) as u32, case));
            triplets
                .entry(RelationKind::GenderToPatient)
                .or_default()
                .insert((index(NodeType::Gender, rec.gender.as_str()), case));
            triplets
                .entry(RelationKind::PatientToRecommendation)
                .or_default()
                .insert((case, index(NodeType::Recommendation, &label_key(&rec.label))));
        }
        let triplets = triplets
            .into_iter()
            .map(|(k, set)| (k, set.into_iter().map(|(r, c)| (r, c, 1.0)).collect()))
            .collect();
        Self::from_parts(tables, triplets)
    }

    pub fn tables(&self) -> &NodeTables {
        &self.tables
    }

    pub fn node_count(&self, t: NodeType) -> usize {
        self.tables.len(t)
    }

    pub fn key(&self, t: NodeType, index: usize) -> &str {
        &self.tables.keys[t.index()][index]
    }

    pub fn code(&self, t: NodeType, index: usize) -> u64 {
        self.tables.codes[t.index()][index]
    }

    pub fn node(&self, t: NodeType, key: &str) -> Option<u32> {
        self.lookup[t.index()].get(key).copied()
    }

    /// Table and index of a concept id.
    pub fn concept_node(&self, id: &str) -> Option<(NodeType, u32)> {
        NodeType::CONCEPTS
            .into_iter()
            .find_map(|t| self.node(t, id).map(|i| (t, i)))
    }

    pub fn relation(&self, kind: RelationKind) -> &Adjacency {
        &self.relations[kind.index()]
    }

    pub fn relations(&self) -> &[Adjacency] {
        &self.relations
    }

    pub fn edge_count(&self) -> usize {
        self.relations.iter().map(|r| r.forward.nnz()).sum()
    }

    pub fn case_count(&self) -> usize {
        self.node_count(NodeType::CaseRecord)
    }

    pub fn case_id(&self, case: usize) -> &str {
        self.key(NodeType::CaseRecord, case)
    }

    pub fn case_label(&self, case: usize) -> Option<RecommendationLabel> {
        let (cols, _) = self.relation(RelationKind::PatientToRecommendation).forward.row(case);
        cols.first().map(|&l| self.labels[l as usize])
    }

    /// Concept ids a case mentions with the given polarity, sorted.
    pub fn case_concepts(&self, case: usize, polarity: Polarity) -> Vec<&str> {
        let mut out = Vec::new();
        for t in NodeType::CONCEPTS {
            let kind = RelationKind::mention(t, polarity).expect("concept table");
            let (rows, _) = self.relation(kind).backward.row(case);
            out.extend(rows.iter().map(|&i| self.key(t, i as usize)));
        }
        out.sort_unstable();
        out
    }

    /// Node and edge counts, one line each.
    pub fn stats(&self) -> String {
        let mut out = String::new();
        for t in NodeType::ALL {
            out.push_str(&format!("nodes\t{t}\t{}\n", self.node_count(t)));
        }
        for r in &self.relations {
            out.push_str(&format!("edges\t{}\t{}\n", r.kind, r.forward.nnz()));
        }
        out.push_str(&format!("edges\ttotal\t{}\n", self.edge_count()));
        out
    }

    pub(crate) fn with_codes(&self, codes: [Vec<u64>; 7]) -> Result<Self> {
        let tables = NodeTables {
            keys: self.tables.keys.clone(),
            codes,
        };
        Self::assemble(tables, self.relations.clone())
    }

    pub(crate) fn from_snapshot(tables: NodeTables, forward: Vec<Csr>) -> Result<Self> {
        if forward.len() != RelationKind::ALL.len() {
            return Err(Error::Format("relation count mismatch".into()));
        }
        let mut relations = Vec::new();
        for (kind, f) in RelationKind::ALL.into_iter().zip(forward) {
            if f.rows() != tables.len(kind.from_type()) || f.cols() != tables.len(kind.to_type()) {
                return Err(Error::Format(format!("{kind}: dimensions do not match node tables")));
            }
            let backward = f.transpose();
            relations.push(Adjacency { kind, forward: f, backward });
        }
        Self::assemble(tables, relations)
    }
}
