use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` weights. Column indices are
/// sorted and unique within each row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csr {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    weights: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, weight)` triplets. Duplicate coordinates
    /// and non-positive or non-finite weights are rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(u32, u32, f64)>) -> Result<Self> {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut weights = Vec::with_capacity(triplets.len());
        let mut prev: Option<(u32, u32)> = None;
        for &(r, c, w) in &triplets {
            if r as usize >= rows || c as usize >= cols {
                return Err(Error::Data(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Data(format!("weight {w} at ({r}, {c}) must be positive")));
            }
            if prev == Some((r, c)) {
                return Err(Error::Data(format!("duplicate entry ({r}, {c})")));
            }
            prev = Some((r, c));
            offsets[r as usize + 1] += 1;
            indices.push(c);
            weights.push(w);
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        Ok(Csr {
            rows,
            cols,
            offsets,
            indices,
            weights,
        })
    }

    /// Raw arrays, validated.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::Format(format!("csr: {m}")));
        if offsets.len() != rows + 1 || offsets[0] != 0 || offsets[rows] != indices.len() {
            return bad("offsets do not match the index array");
        }
        if indices.len() != weights.len() {
            return bad("index and weight arrays differ in length");
        }
        for r in 0..rows {
            if offsets[r] > offsets[r + 1] {
                return bad("offsets decrease");
            }
            let row = &indices[offsets[r]..offsets[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c as usize >= cols) {
                return bad("row indices unsorted, duplicated or out of range");
            }
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("non-positive weight");
        }
        Ok(Csr {
            rows,
            cols,
            offsets,
            indices,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.weights[span])
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut weights = vec![0f64; self.nnz()];
        for r in 0..self.rows {
            let (cols, ws) = self.row(r);
            for (&c, &w) in cols.iter().zip(ws) {
                let slot = &mut next[c as usize];
                indices[*slot] = r as u32;
                weights[*slot] = w;
                *slot += 1;
            }
        }
        Csr {
            rows: self.cols,
            cols: self.rows,
            offsets,
            indices,
            weights,
        }
    }
}
