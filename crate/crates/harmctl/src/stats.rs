//! Small numeric helpers shared across modules.

/// Type-7 (linear interpolation) quantile of a sorted slice.
///
/// This is the default of NumPy and R: with `h = (n - 1) p`, the result
/// interpolates between the floor(h)-th and ceil(h)-th order statistics.
/// The definition is fixed here so splits and strata are reproducible.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level outside [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (ddof = 1). Returns `None` for fewer than two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Half-width of a 95% normal-approximation confidence interval for the mean.
pub fn ci95_halfwidth(values: &[f64]) -> Option<f64> {
    let std = sample_std(values)?;
    Some(1.96 * std / (values.len() as f64).sqrt())
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// FNV-1a hash of a byte string; used to derive stable per-key RNG streams.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a per-repetition seed from a root seed.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    // SplitMix64 step keeps derived streams well separated.
    let mut z = root
        .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let xs = [0.2, 0.4, 0.9, 1.0];
        let q = quantile_type7(&xs, 0.5);
        assert!((q - 0.65).abs() < 1e-12, "median of fixture should be 0.65, got {q}");
    }

    #[test]
    fn quantile_endpoints() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(quantile_type7(&xs, 0.0), 1.0);
        assert_eq!(quantile_type7(&xs, 1.0), 3.0);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, 0));
    }
}
