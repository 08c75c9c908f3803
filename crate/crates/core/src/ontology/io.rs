//! Diff-friendly text format: a header line, then `[concepts]`, `[edges]`
//! and `[sources]` sections, each sorted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::resources::{format_flags, parse_flags};

use super::{Concept, Edge, Ontology};

const HEADER: &str = "ontology\tschema_version=1";

pub fn export(ontology: &Ontology) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push_str("\n[concepts]\n");
    for c in ontology.concepts() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.id,
            c.canonical,
            c.semantic_type,
            format_flags(&c.flags),
            c.blocks.join(","),
            c.synonyms.iter().cloned().collect::<Vec<_>>().join("|"),
        ));
    }
    out.push_str("[edges]\n");
    for e in ontology.edges() {
        out.push_str(&format!("{}\t{}\t{}\n", e.from, e.kind, e.to));
    }
    out.push_str("[sources]\n");
    for (k, v) in ontology.sources() {
        out.push_str(&format!("{k}\t{v}\n"));
    }
    out
}

pub fn import(text: &str) -> Result<Ontology> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(Error::Parse { line: 1, message: format!("expected header {HEADER:?}") }),
    }
    let mut section = "";
    let mut concepts = Vec::new();
    let mut edges = Vec::new();
    let mut sources = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[concepts]" | "[edges]" | "[sources]" => line,
                _ => return Err(err(format!("unknown section {line}"))),
            };
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        match (section, cols.len()) {
            ("[concepts]", 6) => concepts.push(Concept {
                id: cols[0].to_string(),
                canonical: cols[1].to_string(),
                semantic_type: cols[2].parse().map_err(|e: Error| err(e.to_string()))?,
                flags: parse_flags(cols[3]).map_err(|e| err(e.to_string()))?,
                blocks: cols[4].split(',').filter(|b| !b.is_empty()).map(str::to_string).collect(),
                synonyms: cols[5]
                    .split('|')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect::<BTreeSet<_>>(),
            }),
            ("[edges]", 3) => edges.push(Edge::new(
                cols[0],
                cols[1].parse().map_err(|e: Error| err(e.to_string()))?,
                cols[2],
            )),
            ("[sources]", 2) => {
                sources.insert(cols[0].to_string(), cols[1].to_string());
            }
            _ => return Err(err(format!("unexpected line in section {section:?}"))),
        }
    }
    Ontology::new(concepts, edges, sources)
}

pub fn save(path: &Path, ontology: &Ontology) -> Result<()> {
    std::fs::write(path, export(ontology)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Ontology> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    import(&text)
}
