use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, Polarity};
use crate::error::{Error, Result};

use super::weights::EdgeWeights;
use super::{age_group, KnowledgeGraph, NodeType, RelationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Source to target of the relation.
    Forward,
    /// Target back to source, through the stored transpose.
    Backward,
}

/// Sparse vector over the nodes of one table, sorted by index. Explicit
/// zeros are kept so a traversal also reports which nodes it reached.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub node_type: NodeType,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn empty(node_type: NodeType) -> Self {
        SparseVec {
            node_type,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// From unsorted entries; repeated indices are summed.
    pub fn from_entries(node_type: NodeType, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut v = SparseVec::empty(node_type);
        for (i, x) in entries {
            if v.indices.last() == Some(&i) {
                *v.values.last_mut().expect("paired") += x;
            } else {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        v
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.indices.binary_search(&index).ok().map(|p| self.values[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// `self + alpha * other`, merging the supports.
    pub fn add_scaled(&self, alpha: f64, other: &SparseVec) -> SparseVec {
        assert_eq!(self.node_type, other.node_type);
        let mut out = SparseVec::empty(self.node_type);
        let (mut i, mut j) = (0, 0);
        while i < self.nnz() || j < other.nnz() {
            let a = self.indices.get(i).copied().unwrap_or(u32::MAX);
            let b = other.indices.get(j).copied().unwrap_or(u32::MAX);
            if a < b {
                out.indices.push(a);
                out.values.push(self.values[i]);
                i += 1;
            } else if b < a {
                out.indices.push(b);
                out.values.push(alpha * other.values[j]);
                j += 1;
            } else {
                out.indices.push(a);
                out.values.push(self.values[i] + alpha * other.values[j]);
                i += 1;
                j += 1;
            }
        }
        out
    }
}

/// Pushes `frontier` through each relation of `path` in turn, multiplying
/// by edge weights and summing over incoming paths.
pub fn traverse(
    kg: &KnowledgeGraph,
    path: &[(RelationKind, Direction)],
    frontier: &SparseVec,
) -> Result<SparseVec> {
    let mut current = frontier.clone();
    for (step, &(kind, dir)) in path.iter().enumerate() {
        let rel = kg.relation(kind);
        let (source, target, matrix) = match dir {
            Direction::Forward => (kind.from_type(), kind.to_type(), &rel.forward),
            Direction::Backward => (kind.to_type(), kind.from_type(), &rel.backward),
        };
        if current.node_type != source {
            return Err(Error::Path {
                step,
                message: format!("{kind} {dir:?} expects {source} nodes, frontier holds {}", current.node_type),
            });
        }
        if let Some(&last) = current.indices.last() {
            if last as usize >= matrix.rows() {
                return Err(Error::Path {
                    step,
                    message: format!("frontier index {last} outside {source} table"),
                });
            }
        }
        current = spmv(&current, matrix, target);
    }
    Ok(current)
}

fn spmv(frontier: &SparseVec, matrix: &super::Csr, target: NodeType) -> SparseVec {
    let mut acc = vec![0.0f64; matrix.cols()];
    let mut seen = vec![false; matrix.cols()];
    let mut touched: Vec<u32> = Vec::new();
    for (r, x) in frontier.iter() {
        let (cols, ws) = matrix.row(r as usize);
        for (&c, &w) in cols.iter().zip(ws) {
            let c_us = c as usize;
            acc[c_us] += x * w;
            if !seen[c_us] {
                seen[c_us] = true;
                touched.push(c);
            }
        }
    }
    touched.sort_unstable();
    let values = touched.iter().map(|&c| acc[c as usize]).collect();
    SparseVec {
        node_type: target,
        indices: touched,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    /// Demographic bonus per matching attribute, in mean concept weights.
    pub lambda_demo: f64,
    /// Penalty factor on the weight of denied concepts a case has.
    pub lambda_neg: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            lambda_demo: 0.25,
            lambda_neg: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryProfile {
    pub affirmed: Vec<String>,
    pub denied: Vec<String>,
    pub age: Option<u32>,
    pub gender: Option<Gender>,
}

fn concept_frontiers(
    kg: &KnowledgeGraph,
    ids: &[String],
    weights: &EdgeWeights,
) -> Result<Vec<(NodeType, SparseVec)>> {
    let mut entries: [Vec<(u32, f64)>; 3] = Default::default();
    for id in ids {
        let (t, i) = kg.concept_node(id).ok_or_else(|| Error::Lookup(id.clone()))?;
        let slot = NodeType::CONCEPTS.iter().position(|&c| c == t).expect("concept table");
        entries[slot].push((i, weights.get(id)));
    }
    let mut out = Vec::new();
    for (t, e) in NodeType::CONCEPTS.into_iter().zip(entries) {
        let mut e = e;
        e.sort_by_key(|x| x.0);
        e.dedup_by_key(|x| x.0);
        if !e.is_empty() {
            out.push((t, SparseVec::from_entries(t, e)));
        }
    }
    Ok(out)
}

fn present_mass(kg: &KnowledgeGraph, frontiers: &[(NodeType, SparseVec)]) -> Result<SparseVec> {
    let mut total = SparseVec::empty(NodeType::CaseRecord);
    for (t, f) in frontiers {
        let kind = RelationKind::mention(*t, Polarity::Present).expect("concept table");
        total = total.add_scaled(1.0, &traverse(kg, &[(kind, Direction::Forward)], f)?);
    }
    Ok(total)
}

/// Cases sharing at least one affirmed concept, best first, ties by
/// ascending case id. The score is
/// `sum w(affirmed shared) + lambda_demo * mean_w * (age match + gender match) - lambda_neg * sum w(denied present in case)`.
pub fn similar_cases(
    kg: &KnowledgeGraph,
    profile: &QueryProfile,
    k: usize,
    weights: &EdgeWeights,
    config: &SimilarityConfig,
) -> Result<Vec<(String, f64)>> {
    Ok(similar_case_indices(kg, profile, k, weights, config)?
        .into_iter()
        .map(|(i, s)| (kg.case_id(i).to_string(), s))
        .collect())
}

/// As [`similar_cases`], returning case node indices.
pub fn similar_case_indices(
    kg: &KnowledgeGraph,
    profile: &QueryProfile,
    k: usize,
    weights: &EdgeWeights,
    config: &SimilarityConfig,
) -> Result<Vec<(usize, f64)>> {
    if profile.affirmed.is_empty() {
        return Err(Error::Query("profile has no affirmed concepts".into()));
    }
    if k == 0 {
        return Err(Error::Query("k must be at least 1".into()));
    }
    let affirmed = present_mass(kg, &concept_frontiers(kg, &profile.affirmed, weights)?)?;
    let denied = present_mass(kg, &concept_frontiers(kg, &profile.denied, weights)?)?;
    let bonus = config.lambda_demo * weights.mean;
    let mut demo = SparseVec::empty(NodeType::CaseRecord);
    if let Some(age) = profile.age {
        let f = SparseVec::from_entries(NodeType::AgeGroup, vec![(age_group(age) as u32, bonus)]);
        demo = demo.add_scaled(1.0, &traverse(kg, &[(RelationKind::AgeGroupToPatient, Direction::Forward)], &f)?);
    }
    if let Some(g) = profile.gender {
        let node = kg.node(NodeType::Gender, g.as_str()).expect("gender table is fixed");
        let f = SparseVec::from_entries(NodeType::Gender, vec![(node, bonus)]);
        demo = demo.add_scaled(1.0, &traverse(kg, &[(RelationKind::GenderToPatient, Direction::Forward)], &f)?);
    }
    let mut scored: Vec<(usize, f64)> = affirmed
        .iter()
        .map(|(case, a)| {
            let d = demo.get(case).unwrap_or(0.0);
            let n = denied.get(case).unwrap_or(0.0);
            (case as usize, a + d - config.lambda_neg * n)
        })
        .collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.truncate(k);
    Ok(scored)
}
