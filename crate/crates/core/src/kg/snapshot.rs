//! Binary graph snapshot, little endian throughout:
//!
//! ```text
//! magic "TKGS" | u32 schema version
//! 7 x node table: u64 count, then per node u32 key length, key bytes, u64 code
//! 12 x relation: u64 rows, u64 cols, u64 nnz, offsets as u64, indices as u32, weights as f64
//! 32 byte SHA-256 of everything before it
//! ```

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{Csr, KnowledgeGraph, NodeTables, NodeType, RelationKind};

const MAGIC: &[u8; 4] = b"TKGS";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot(kg: &KnowledgeGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    let tables = kg.tables();
    for t in NodeType::ALL {
        let keys = &tables.keys[t.index()];
        out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for (k, c) in keys.iter().zip(&tables.codes[t.index()]) {
            out.extend_from_slice(&(k.len() as u32).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for adj in kg.relations() {
        let m = &adj.forward;
        for v in [m.rows(), m.cols(), m.nnz()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for &o in m.offsets() {
            out.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &i in m.indices() {
            out.extend_from_slice(&i.to_le_bytes());
        }
        for &w in m.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("snapshot truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        // every element takes at least four bytes
        if v > (self.bytes.len() / 4) as u64 {
            return Err(Error::Format(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }
}

pub fn read_snapshot(bytes: &[u8]) -> Result<KnowledgeGraph> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a graph snapshot".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let mut c = Cursor { bytes: body, pos: 4 };
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!(
            "snapshot schema version {version}, expected {SNAPSHOT_VERSION}"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format("snapshot checksum mismatch".into()));
    }
    let mut tables = NodeTables::default();
    for t in NodeType::ALL {
        let n = c.len()?;
        for _ in 0..n {
            let len = c.u32()? as usize;
            let key = std::str::from_utf8(c.take(len)?)
                .map_err(|_| Error::Format("node key is not utf-8".into()))?;
            tables.keys[t.index()].push(key.to_string());
            tables.codes[t.index()].push(c.u64()?);
        }
        if tables.keys[t.index()].windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format(format!("{t} keys are not sorted and unique")));
        }
    }
    let mut forward = Vec::with_capacity(RelationKind::ALL.len());
    for _ in RelationKind::ALL {
        let rows = c.len()?;
        let cols = c.len()?;
        let nnz = c.len()?;
        let offsets = (0..=rows).map(|_| c.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let indices = (0..nnz).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let weights = (0..nnz)
            .map(|_| c.u64().map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        forward.push(Csr::from_parts(rows, cols, offsets, indices, weights)?);
    }
    if c.pos != body.len() {
        return Err(Error::Format("trailing bytes after last relation".into()));
    }
    KnowledgeGraph::from_snapshot(tables, forward)
}

pub fn save_snapshot(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&write_snapshot(kg)).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<KnowledgeGraph> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConceptMention, Gender, RecommendationLabel, Risk};
    use crate::corpus::CaseRecord;
    use crate::ontology::Ontology;
    use crate::resources::Resources;

    fn kg() -> KnowledgeGraph {
        let o = Ontology::build(&[], &Resources::builtin()).unwrap();
        let rec = CaseRecord {
            id: "r1".into(),
            age: 50,
            gender: Gender::Other,
            mentions: vec![ConceptMention::present("C_fever"), ConceptMention::negated("C_cough")],
            free_text: String::new(),
            label: RecommendationLabel::default_for(Risk::Medium),
        };
        KnowledgeGraph::build(&[rec], &o).unwrap()
    }

    #[test]
    fn round_trip() {
        let kg = kg();
        let back = read_snapshot(&write_snapshot(&kg)).unwrap();
        assert_eq!(back, kg);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = write_snapshot(&kg());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(matches!(read_snapshot(&bytes), Err(Error::Format(_))));
        assert!(read_snapshot(&bytes[..10]).is_err());
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = write_snapshot(&kg());
        bytes[4] = 9;
        let msg = read_snapshot(&bytes).unwrap_err().to_string();
        assert!(msg.contains("schema version 9"), "{msg}");
    }
}
