use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::resources::SeedOntology;

use super::Concept;

type Closure = HashMap<String, HashSet<String>>;

/// Every block of `general` is matched by an equal block of `specific` or by
/// one that descends from it in the seed ontologies.
fn covers(specific: &Concept, general: &Concept, closure: &Closure) -> bool {
    general.blocks.iter().all(|g| {
        specific
            .blocks
            .iter()
            .any(|s| s == g || closure.get(s).is_some_and(|anc| anc.contains(g)))
    })
}

/// `child_of` edges between concepts of the same semantic type: A is a
/// child of B when A's blocks cover B's (superset, or seed descendants such
/// as augenlid -> auge) but not the other way round. The result is
/// transitively reduced and checked for cycles.
pub fn build_taxonomy(concepts: &[Concept], seeds: &SeedOntology) -> Result<Vec<(String, String)>> {
    let closure = seeds.ancestor_closure();
    let n = concepts.len();
    let mut below = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&concepts[i], &concepts[j]);
            below[i][j] = i != j
                && a.semantic_type == b.semantic_type
                && a.blocks != b.blocks
                && covers(a, b, &closure)
                && !covers(b, a, &closure);
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if below[i][j] && !(0..n).any(|k| below[i][k] && below[k][j]) {
                edges.push((concepts[i].id.clone(), concepts[j].id.clone()));
            }
        }
    }
    edges.sort();
    check_acyclic(edges.iter().map(|(c, p)| (c.as_str(), p.as_str())))?;
    Ok(edges)
}

/// Topological check over `(child, parent)` pairs; a cycle is reported
/// with its node path, first node repeated at the end.
pub fn check_acyclic<'a>(edges: impl Iterator<Item = (&'a str, &'a str)>) -> Result<()> {
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    for (c, p) in edges {
        out.entry(c).or_default().push(p);
        indegree.entry(c).or_default();
        *indegree.entry(p).or_default() += 1;
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut seen = 0;
    while let Some(node) = ready.pop() {
        seen += 1;
        for next in out.get(node).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("registered");
            *d -= 1;
            if *d == 0 {
                ready.push(next);
            }
        }
    }
    if seen == indegree.len() {
        return Ok(());
    }
    // Every remaining node has an unresolved predecessor, so walking
    // successors within the remainder must revisit a node.
    let remaining: HashSet<&str> = indegree.iter().filter(|(_, &d)| d > 0).map(|(&n, _)| n).collect();
    let start = *remaining.iter().min().expect("non-empty");
    let mut path = vec![start];
    let mut pos: HashMap<&str, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = out[cur]
            .iter()
            .copied()
            .filter(|n| remaining.contains(n))
            .min()
            .expect("cycle member has a successor in the cycle");
        if let Some(&i) = pos.get(next) {
            let mut cycle: Vec<String> = path[i..].iter().map(|s| s.to_string()).collect();
            cycle.push(next.to_string());
            return Err(Error::Cycle { path: cycle });
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}
