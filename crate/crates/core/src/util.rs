//! Crate-internal helpers shared by several modules.

/// Pool-adjacent-violators isotonic regression, non-decreasing,
/// least-squares with equal weights.
pub(crate) fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (mean, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 <= last.0 {
                break;
            }
            let count = prev.1 + last.1;
            let mean = (prev.0 * prev.1 as f64 + last.0 * last.1 as f64) / count as f64;
            blocks.pop();
            blocks.pop();
            blocks.push((mean, count));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, count) in blocks {
        out.extend(std::iter::repeat_n(mean, count));
    }
    out
}

pub(crate) fn isotonic_non_increasing(values: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    isotonic_non_decreasing(&negated)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// Piecewise-linear interpolation of `ys` over ascending `xs`, clamped to
/// the endpoint values outside the grid.
pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    // partition_point: first index with xs[i] > x
    let hi = xs.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Mean of a non-empty slice.
pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation percentile (p in [0, 100]) of a non-empty slice.
pub(crate) fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let t = rank - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}
