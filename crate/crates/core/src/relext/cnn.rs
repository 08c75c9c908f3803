use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::textproc::Tag;

use super::{label_index, RelationExample, MAX_LEN};

/// Network dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnShape {
    pub vocab: usize,
    /// Word embedding width.
    pub word_dim: usize,
    /// Positional embedding width, per entity.
    pub pos_dim: usize,
    pub tag_dim: usize,
    pub windows: Vec<usize>,
    pub filters: usize,
    pub hidden: usize,
}

impl CnnShape {
    pub fn with_vocab(vocab: usize) -> Self {
        CnnShape {
            vocab,
            word_dim: 50,
            pos_dim: 20,
            tag_dim: 10,
            windows: vec![2, 3, 4],
            filters: 64,
            hidden: 128,
        }
    }

    /// Per-token input width.
    pub fn input_width(&self) -> usize {
        self.word_dim + 2 * self.pos_dim + self.tag_dim
    }

    pub fn pooled_width(&self) -> usize {
        self.filters * self.windows.len()
    }

    fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.word_dim == 0 || self.filters == 0 || self.hidden == 0 || self.windows.is_empty() {
            return Err(Error::Config(format!("degenerate network shape {self:?}")));
        }
        if self.windows.iter().any(|&m| m == 0 || m > MAX_LEN) {
            return Err(Error::Config(format!("window sizes {:?} must lie in 1..={MAX_LEN}", self.windows)));
        }
        Ok(())
    }
}

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Self {
        Tensor {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub shape: CnnShape,
    pub word: Tensor,
    pub pos1: Tensor,
    pub pos2: Tensor,
    pub tag: Tensor,
    /// One `filters x (m * input_width)` matrix per window size.
    pub conv_w: Vec<Tensor>,
    pub conv_b: Vec<Tensor>,
    pub dense_w: Tensor,
    pub dense_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl CnnParams {
    /// Embeddings uniform in ±0.05, layers scaled by fan-in, biases zero.
    pub fn init(shape: CnnShape, rng: &mut Rng) -> Result<Self> {
        shape.validate()?;
        let k = shape.input_width();
        let positions = 2 * MAX_LEN + 1;
        let emb = 0.05;
        let word = Tensor::uniform(shape.vocab, shape.word_dim, emb, rng);
        let pos1 = Tensor::uniform(positions, shape.pos_dim, emb, rng);
        let pos2 = Tensor::uniform(positions, shape.pos_dim, emb, rng);
        let tag = Tensor::uniform(Tag::COUNT, shape.tag_dim, emb, rng);
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        for &m in &shape.windows {
            let fan_in = (m * k) as f64;
            conv_w.push(Tensor::uniform(shape.filters, m * k, (6.0 / fan_in).sqrt(), rng));
            conv_b.push(Tensor::zeros(1, shape.filters));
        }
        let pooled = shape.pooled_width();
        let dense_w = Tensor::uniform(shape.hidden, pooled, (6.0 / pooled as f64).sqrt(), rng);
        let out_w = Tensor::uniform(2, shape.hidden, (6.0 / (shape.hidden + 2) as f64).sqrt(), rng);
        Ok(CnnParams {
            dense_b: Tensor::zeros(1, shape.hidden),
            out_b: Tensor::zeros(1, 2),
            shape,
            word,
            pos1,
            pos2,
            tag,
            conv_w,
            conv_b,
            dense_w,
            out_w,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor| Tensor::zeros(t.rows, t.cols);
        CnnParams {
            shape: self.shape.clone(),
            word: z(&self.word),
            pos1: z(&self.pos1),
            pos2: z(&self.pos2),
            tag: z(&self.tag),
            conv_w: self.conv_w.iter().map(z).collect(),
            conv_b: self.conv_b.iter().map(z).collect(),
            dense_w: z(&self.dense_w),
            dense_b: z(&self.dense_b),
            out_w: z(&self.out_w),
            out_b: z(&self.out_b),
        }
    }

    /// Fixed order shared by the optimiser, the gradient check and the
    /// checkpoint format.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("word".to_string(), &self.word),
            ("pos1".to_string(), &self.pos1),
            ("pos2".to_string(), &self.pos2),
            ("tag".to_string(), &self.tag),
        ];
        for (i, m) in self.shape.windows.iter().enumerate() {
            out.push((format!("conv{m}_w"), &self.conv_w[i]));
            out.push((format!("conv{m}_b"), &self.conv_b[i]));
        }
        out.push(("dense_w".to_string(), &self.dense_w));
        out.push(("dense_b".to_string(), &self.dense_b));
        out.push(("out_w".to_string(), &self.out_w));
        out.push(("out_b".to_string(), &self.out_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.word, &mut self.pos1, &mut self.pos2, &mut self.tag];
        for (w, b) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators let the compiler vectorise
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// `MAX_LEN x input_width` input matrix.
    pub input: Vec<f64>,
    /// Per window size, per filter: pooled value and the position it came from.
    pub pooled: Vec<f64>,
    pub argmax: Vec<usize>,
    pub pre_pool_max: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub mask: Option<Vec<f64>>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

fn check(params: &CnnParams, ex: &RelationExample) -> Result<()> {
    let s = &params.shape;
    let bad = |m: String| Err(Error::Config(m));
    if ex.words.len() != MAX_LEN || ex.dist1.len() != MAX_LEN || ex.dist2.len() != MAX_LEN || ex.tags.len() != MAX_LEN {
        return bad(format!("example length differs from {MAX_LEN}"));
    }
    if let Some(&w) = ex.words.iter().find(|&&w| w as usize >= s.vocab) {
        return bad(format!("word id {w} outside vocabulary of {}", s.vocab));
    }
    if let Some(&t) = ex.tags.iter().find(|&&t| t as usize >= Tag::COUNT) {
        return bad(format!("tag id {t} out of range"));
    }
    let l = MAX_LEN as i32;
    if ex.dist1.iter().chain(&ex.dist2).any(|d| !(-l..=l).contains(d)) {
        return bad("distance outside the clipping range".into());
    }
    let k = s.input_width();
    let dims_ok = params.word.cols == s.word_dim
        && params.word.rows == s.vocab
        && params.pos1.cols == s.pos_dim
        && params.pos2.cols == s.pos_dim
        && params.tag.cols == s.tag_dim
        && params.conv_w.len() == s.windows.len()
        && params.conv_w.iter().zip(&s.windows).all(|(w, &m)| w.rows == s.filters && w.cols == m * k)
        && params.dense_w.rows == s.hidden
        && params.dense_w.cols == s.pooled_width()
        && params.out_w.rows == 2
        && params.out_w.cols == s.hidden;
    if !dims_ok {
        return bad("parameter tensors do not match the declared shape".into());
    }
    Ok(())
}

fn embed(params: &CnnParams, ex: &RelationExample) -> Vec<f64> {
    let s = &params.shape;
    let k = s.input_width();
    let mut x = Vec::with_capacity(MAX_LEN * k);
    for i in 0..MAX_LEN {
        x.extend_from_slice(params.word.row(ex.words[i] as usize));
        x.extend_from_slice(params.pos1.row((ex.dist1[i] + MAX_LEN as i32) as usize));
        x.extend_from_slice(params.pos2.row((ex.dist2[i] + MAX_LEN as i32) as usize));
        x.extend_from_slice(params.tag.row(ex.tags[i] as usize));
    }
    x
}

/// Rectified convolution outputs before pooling: per window size, per
/// filter, one value for each of the `n - m + 1` positions.
pub fn feature_maps(params: &CnnParams, ex: &RelationExample) -> Result<Vec<Vec<Vec<f64>>>> {
    check(params, ex)?;
    let x = embed(params, ex);
    let k = params.shape.input_width();
    Ok(params
        .shape
        .windows
        .iter()
        .enumerate()
        .map(|(wi, &m)| {
            (0..params.shape.filters)
                .map(|j| {
                    let w = params.conv_w[wi].row(j);
                    let b = params.conv_b[wi].data[j];
                    (0..=MAX_LEN - m)
                        .map(|i| (b + dot(w, &x[i * k..(i + m) * k])).max(0.0))
                        .collect()
                })
                .collect()
        })
        .collect())
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

fn run(params: &CnnParams, ex: &RelationExample, dropout: Option<(f64, &mut Rng)>) -> Result<Forward> {
    check(params, ex)?;
    let s = &params.shape;
    let k = s.input_width();
    let input = embed(params, ex);
    let mut pooled = Vec::with_capacity(s.pooled_width());
    let mut argmax = Vec::with_capacity(s.pooled_width());
    let mut pre_pool_max = Vec::with_capacity(s.pooled_width());
    for (wi, &m) in s.windows.iter().enumerate() {
        for j in 0..s.filters {
            let w = params.conv_w[wi].row(j);
            let b = params.conv_b[wi].data[j];
            let mut best = f64::NEG_INFINITY;
            let mut at = 0;
            for i in 0..=MAX_LEN - m {
                let z = b + dot(w, &input[i * k..(i + m) * k]);
                if z > best {
                    best = z;
                    at = i;
                }
            }
            // max over relu(z) is relu(max z)
            pooled.push(best.max(0.0));
            argmax.push(at);
            pre_pool_max.push(best);
        }
    }
    let hidden_pre: Vec<f64> = (0..s.hidden)
        .map(|h| params.dense_b.data[h] + dot(params.dense_w.row(h), &pooled))
        .collect();
    let mut hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
    let mask = dropout.filter(|(rate, _)| *rate > 0.0).map(|(rate, rng)| {
        let keep = 1.0 - rate;
        hidden
            .iter()
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect::<Vec<f64>>()
    });
    if let Some(mask) = &mask {
        hidden.iter_mut().zip(mask).for_each(|(h, m)| *h *= m);
    }
    let logits = [
        params.out_b.data[0] + dot(params.out_w.row(0), &hidden),
        params.out_b.data[1] + dot(params.out_w.row(1), &hidden),
    ];
    Ok(Forward {
        input,
        pooled,
        argmax,
        pre_pool_max,
        hidden_pre,
        hidden,
        mask,
        logits,
        probs: softmax(logits),
    })
}

/// Inference pass, dropout off.
pub fn forward(params: &CnnParams, ex: &RelationExample) -> Result<Forward> {
    run(params, ex, None)
}

/// Cross-entropy of one labelled example; its gradient is added to `grad`.
/// With a dropout rate the mask is drawn from `rng`.
pub fn loss_and_grad(
    params: &CnnParams,
    ex: &RelationExample,
    dropout: Option<(f64, &mut Rng)>,
    grad: &mut CnnParams,
) -> Result<f64> {
    let y = ex
        .label
        .map(label_index)
        .ok_or_else(|| Error::InvalidExample("training example without a label".into()))?;
    let f = run(params, ex, dropout)?;
    let s = &params.shape;
    let k = s.input_width();
    let loss = -f.probs[y].ln();

    let dlogits = [f.probs[0] - (y == 0) as u8 as f64, f.probs[1] - (y == 1) as u8 as f64];
    let mut dhidden = vec![0.0; s.hidden];
    for (c, &d) in dlogits.iter().enumerate() {
        grad.out_b.data[c] += d;
        axpy(d, &f.hidden, grad.out_w.row_mut(c));
        axpy(d, params.out_w.row(c), &mut dhidden);
    }
    let mut dpooled = vec![0.0; s.pooled_width()];
    for h in 0..s.hidden {
        let mut d = dhidden[h];
        if let Some(mask) = &f.mask {
            d *= mask[h];
        }
        if f.hidden_pre[h] <= 0.0 {
            continue;
        }
        grad.dense_b.data[h] += d;
        axpy(d, &f.pooled, grad.dense_w.row_mut(h));
        axpy(d, params.dense_w.row(h), &mut dpooled);
    }
    let mut dinput = vec![0.0; MAX_LEN * k];
    for (wi, &m) in s.windows.iter().enumerate() {
        for j in 0..s.filters {
            let slot = wi * s.filters + j;
            if f.pre_pool_max[slot] <= 0.0 {
                continue;
            }
            let d = dpooled[slot];
            let at = f.argmax[slot];
            grad.conv_b[wi].data[j] += d;
            axpy(d, &f.input[at * k..(at + m) * k], grad.conv_w[wi].row_mut(j));
            axpy(d, params.conv_w[wi].row(j), &mut dinput[at * k..(at + m) * k]);
        }
    }
    let (wd, pd) = (s.word_dim, s.pos_dim);
    for i in 0..MAX_LEN {
        let row = &dinput[i * k..(i + 1) * k];
        axpy(1.0, &row[..wd], grad.word.row_mut(ex.words[i] as usize));
        axpy(1.0, &row[wd..wd + pd], grad.pos1.row_mut((ex.dist1[i] + MAX_LEN as i32) as usize));
        axpy(1.0, &row[wd + pd..wd + 2 * pd], grad.pos2.row_mut((ex.dist2[i] + MAX_LEN as i32) as usize));
        axpy(1.0, &row[wd + 2 * pd..], grad.tag.row_mut(ex.tags[i] as usize));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::textproc::Relation;

    fn example(seed: u64, vocab: usize) -> RelationExample {
        let mut r = rng::seeded(seed);
        RelationExample {
            words: (0..MAX_LEN).map(|_| r.gen_range(0..vocab as u32)).collect(),
            dist1: (0..MAX_LEN as i32).map(|i| i - 3).collect(),
            dist2: (0..MAX_LEN as i32).map(|i| i - 20).collect(),
            tags: (0..MAX_LEN).map(|_| r.gen_range(0..Tag::COUNT as u8)).collect(),
            label: Some(Relation::LocatedIn),
        }
    }

    fn params(seed: u64) -> CnnParams {
        CnnParams::init(CnnShape::with_vocab(20), &mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn feature_map_lengths() {
        let p = params(1);
        let maps = feature_maps(&p, &example(2, 20)).unwrap();
        let lens: Vec<usize> = maps.iter().map(|w| w[0].len()).collect();
        assert_eq!(lens, vec![44, 43, 42]);
        assert!(maps.iter().all(|w| w.len() == 64));
    }

    #[test]
    fn negative_preactivations_give_zero_maps() {
        let mut p = params(1);
        for b in &mut p.conv_b {
            b.data.iter_mut().for_each(|v| *v = -1e6);
        }
        let maps = feature_maps(&p, &example(2, 20)).unwrap();
        assert!(maps.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = params(3);
        for s in 0..20 {
            let f = forward(&p, &example(s, 20)).unwrap();
            assert!((f.probs[0] + f.probs[1] - 1.0).abs() < 1e-12);
            assert!(f.probs.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let p = params(1);
        let mut ex = example(1, 20);
        ex.words[0] = 25;
        assert!(matches!(forward(&p, &ex), Err(Error::Config(_))));
        ex.words.pop();
        assert!(matches!(forward(&p, &ex), Err(Error::Config(_))));
    }

    #[test]
    fn unlabelled_examples_cannot_train() {
        let p = params(1);
        let mut g = p.zeros_like();
        let mut ex = example(1, 20);
        ex.label = None;
        assert!(loss_and_grad(&p, &ex, None, &mut g).is_err());
    }
}
