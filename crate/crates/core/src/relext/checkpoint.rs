//! Model checkpoint, little endian:
//!
//! ```text
//! magic "TRCN" | u32 schema version | u32 max length
//! u32 vocab, word_dim, pos_dim, tag_dim, filters, hidden, window count, windows...
//! u32 word count, then per word u32 byte length and utf-8 bytes
//! per tensor: u32 rows, u32 cols, rows * cols f32 values, row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::cnn::{CnnParams, CnnShape, Tensor};
use super::{RelationModel, Vocab, MAX_LEN};

const MAGIC: &[u8; 4] = b"TRCN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn write_model(model: &RelationModel) -> Vec<u8> {
    let s = &model.params.shape;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put(&mut out, CHECKPOINT_VERSION as usize);
    put(&mut out, MAX_LEN);
    for v in [s.vocab, s.word_dim, s.pos_dim, s.tag_dim, s.filters, s.hidden, s.windows.len()] {
        put(&mut out, v);
    }
    for &m in &s.windows {
        put(&mut out, m);
    }
    put(&mut out, model.vocab.words().len());
    for w in model.vocab.words() {
        put(&mut out, w.len());
        out.extend_from_slice(w.as_bytes());
    }
    for (_, t) in model.params.tensors() {
        put(&mut out, t.rows);
        put(&mut out, t.cols);
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("checkpoint truncated at byte {}", self.pos)));
        }
        self.pos += n;
        Ok(&self.bytes[self.pos - n..self.pos])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn read_model(bytes: &[u8]) -> Result<RelationModel> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a relation model checkpoint".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!(
            "checkpoint schema version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let max_len = r.u32()?;
    if max_len != MAX_LEN {
        return Err(Error::Format(format!("checkpoint built for length {max_len}, expected {MAX_LEN}")));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32()?;
    }
    if dims[6] > MAX_LEN {
        return Err(Error::Format("implausible window count".into()));
    }
    let windows = (0..dims[6]).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let shape = CnnShape {
        vocab: dims[0],
        word_dim: dims[1],
        pos_dim: dims[2],
        tag_dim: dims[3],
        filters: dims[4],
        hidden: dims[5],
        windows,
    };
    let n_words = r.u32()?;
    let mut words = Vec::with_capacity(n_words.min(bytes.len()));
    for _ in 0..n_words {
        let len = r.u32()?;
        let w = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("vocabulary word is not utf-8".into()))?;
        words.push(w.to_string());
    }
    let vocab = Vocab::from_words(words);
    if vocab.len() != shape.vocab {
        return Err(Error::Format(format!(
            "vocabulary of {} words, shape declares {}",
            vocab.len(),
            shape.vocab
        )));
    }
    // build a template of the declared shape and fill it
    let mut params = CnnParams::init(shape, &mut crate::rng::seeded(0)).map_err(|e| Error::Format(e.to_string()))?;
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for (t, name) in params.tensors_mut().into_iter().zip(names) {
        let (rows, cols) = (r.u32()?, r.u32()?);
        if (rows, cols) != (t.rows, t.cols) {
            return Err(Error::Format(format!(
                "tensor {name} is {rows}x{cols}, expected {}x{}",
                t.rows, t.cols
            )));
        }
        let raw = r.take(rows * cols * 4)?;
        *t = Tensor {
            rows,
            cols,
            data: raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
        };
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last tensor".into()));
    }
    if !params.is_finite() {
        return Err(Error::Format("checkpoint holds non-finite values".into()));
    }
    Ok(RelationModel { params, vocab })
}

pub fn save_model(model: &RelationModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RelationModel> {
    read_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
