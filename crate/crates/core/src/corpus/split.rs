use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Partition sizes for `n` items by largest-remainder rounding; ties in the
/// fractional part go to the earlier partition.
pub fn partition_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    if ratios.is_empty() || ratios.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
        return Err(Error::Config(format!("ratios must be positive: {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("ratios sum to {total}, expected 1")));
    }
    let shares: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Shuffles a copy of `items` with the seeded generator and slices it into
/// consecutive partitions.
pub fn split_corpus<T: Clone>(items: &[T], ratios: &[f64], seed: u64) -> Result<Vec<Vec<T>>> {
    let sizes = partition_sizes(items.len(), ratios)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        parts.push(order[start..start + size].iter().map(|&i| items[i].clone()).collect());
        start += size;
    }
    Ok(parts)
}
