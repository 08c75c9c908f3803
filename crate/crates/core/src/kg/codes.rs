use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{KnowledgeGraph, NodeType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub mapped: usize,
    pub total: usize,
    /// `mapped / total`, 1.0 for a graph without concept nodes.
    pub fraction: f64,
    pub unmapped: Vec<String>,
}

/// Replaces the codes of concept nodes found in `table` with the external
/// code. Nodes without an entry keep their internal code. Two concepts
/// sharing a code, or an external code that collides with an internal
/// one, is a mapping error.
pub fn map_to_codes(
    kg: &KnowledgeGraph,
    table: &BTreeMap<String, u64>,
) -> Result<(KnowledgeGraph, CoverageReport)> {
    let mut owner: HashMap<u64, &str> = HashMap::new();
    for (id, &code) in table {
        if kg.concept_node(id).is_none() {
            continue;
        }
        if let Some(prev) = owner.insert(code, id) {
            return Err(Error::Mapping(format!("code {code} assigned to both {prev} and {id}")));
        }
    }
    let mut codes = kg.tables().codes.clone();
    let mut unmapped = Vec::new();
    let mut total = 0;
    for t in NodeType::CONCEPTS {
        for (i, code) in codes[t.index()].iter_mut().enumerate().take(kg.node_count(t)) {
            total += 1;
            match table.get(kg.key(t, i)) {
                Some(&c) => *code = c,
                None => unmapped.push(kg.key(t, i).to_string()),
            }
        }
    }
    let mapped = total - unmapped.len();
    let report = CoverageReport {
        mapped,
        total,
        fraction: if total == 0 { 1.0 } else { mapped as f64 / total as f64 },
        unmapped,
    };
    Ok((kg.with_codes(codes)?, report))
}

/// Reads `concept_id<TAB>code` lines; blank lines and `#` comments are
/// skipped.
pub fn parse_code_table(text: &str) -> Result<BTreeMap<String, u64>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |m: &str| Error::Parse {
            line: n + 1,
            message: m.to_string(),
        };
        let (id, code) = line.split_once('\t').ok_or_else(|| parse_err("expected two tab-separated fields"))?;
        let code: u64 = code.trim().parse().map_err(|_| parse_err("code is not an unsigned integer"))?;
        if out.insert(id.trim().to_string(), code).is_some() {
            return Err(parse_err("concept listed twice"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Ontology;
    use crate::resources::Resources;

    fn kg() -> (KnowledgeGraph, impl Fn(&str) -> String) {
        let o = Ontology::build(&[], &Resources::builtin()).unwrap();
        let kg = KnowledgeGraph::build(&[], &o).unwrap();
        (kg, move |c: &str| o.resolve(c, None).unwrap().to_string())
    }

    #[test]
    fn partial_table_reports_coverage() {
        let (kg, id) = kg();
        let text = format!("{}\t386661006\n{}\t49727002\nC_unknown\t1\n", id("C_fever"), id("C_cough"));
        let table = parse_code_table(&text).unwrap();
        let (mapped, report) = map_to_codes(&kg, &table).unwrap();
        assert_eq!(report.mapped, 2);
        assert_eq!(report.total, report.mapped + report.unmapped.len());
        let (t, i) = mapped.concept_node(&id("C_fever")).unwrap();
        assert_eq!(mapped.code(t, i as usize), 386661006);
        let (t, i) = mapped.concept_node(&id("C_headache")).unwrap();
        assert_eq!(mapped.code(t, i as usize), kg.code(t, i as usize));
    }

    #[test]
    fn duplicate_codes_are_rejected() {
        let (kg, id) = kg();
        let table = BTreeMap::from([(id("C_fever"), 7), (id("C_cough"), 7)]);
        assert!(matches!(map_to_codes(&kg, &table), Err(Error::Mapping(_))));
    }

    #[test]
    fn collision_with_internal_code_is_rejected() {
        let (kg, id) = kg();
        let age = kg.code(NodeType::AgeGroup, 0);
        let table = BTreeMap::from([(id("C_fever"), age)]);
        assert!(matches!(map_to_codes(&kg, &table), Err(Error::Mapping(_))));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_code_table("C_fever 12"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_code_table("# x\nC_fever\tabc"), Err(Error::Parse { line: 2, .. })));
    }
}
