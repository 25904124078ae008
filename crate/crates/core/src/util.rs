//! Small shared helpers: deterministic summation and fingerprinting.

/// Pairwise (cascade) summation.
///
/// Associativity-fixed reduction: the result depends only on the slice
/// contents and order, never on chunking or thread count, and the rounding
/// error grows like O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and unbiased standard deviation via pairwise sums.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, var.max(0.0).sqrt())
}

/// FNV-1a 64-bit fingerprint. Used for config provenance, not security.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Decimal serialization with 17 significant digits: parsing the text
/// reproduces the f64 bit pattern exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&xs), 10.5);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn format_round_trips_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.334_248e-5,
            1e300,
            -2.2250738585072014e-308,
        ] {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn fnv_differs_on_content() {
        assert_ne!(fnv1a64(b"abc"), fnv1a64(b"abd"));
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
    }
}
