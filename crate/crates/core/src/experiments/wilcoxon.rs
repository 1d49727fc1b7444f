use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Two-sided p-value.
    pub p_value: f64,
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n_used: usize,
    /// Whether the p-value comes from full enumeration of the null.
    pub exact: bool,
}

const EXACT_MAX_N: usize = 12;

/// Average ranks of `|x|`, 1-based.
fn abs_ranks(x: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()));
    let mut ranks = vec![0.0; x.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]].abs() == x[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Two-sided Wilcoxon signed-rank test on paired differences.
///
/// Zero differences are dropped and tied magnitudes get average ranks. Up to
/// 12 nonzero pairs the null distribution is enumerated exactly; above that
/// a normal approximation with tie-corrected variance is used, without
/// continuity correction. All-zero input gives `p = 1`.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> WilcoxonResult {
    let x: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = x.len();
    if n == 0 {
        return WilcoxonResult { p_value: 1.0, w_plus: 0.0, n_used: 0, exact: true };
    }
    let (ranks, tie_term) = abs_ranks(&x);
    let w_plus: f64 = x.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let mu = total / 2.0;
    let observed = (w_plus - mu).abs();
    if n <= EXACT_MAX_N {
        let mut extreme = 0u64;
        for mask in 0u32..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (w - mu).abs() >= observed - 1e-9 {
                extreme += 1;
            }
        }
        let p = extreme as f64 / (1u64 << n) as f64;
        return WilcoxonResult { p_value: p.min(1.0), w_plus, n_used: n, exact: true };
    }
    let nf = n as f64;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var > 0.0 { erfc(observed / var.sqrt() / std::f64::consts::SQRT_2) } else { 1.0 };
    WilcoxonResult { p_value: p.clamp(0.0, 1.0), w_plus, n_used: n, exact: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_positive() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(r.p_value, 0.0625);
        assert!(r.exact);
    }

    #[test]
    fn antisymmetric_pair() {
        assert_eq!(wilcoxon_signed_rank(&[0.7, -0.7]).p_value, 1.0);
    }

    #[test]
    fn all_zero() {
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0]).p_value, 1.0);
        assert_eq!(wilcoxon_signed_rank(&[]).p_value, 1.0);
    }

    #[test]
    fn large_one_sided() {
        let d: Vec<f64> = (1..=32).map(|i| i as f64 * 0.1 + if i == 3 { -5.0 } else { 0.0 }).collect();
        let r = wilcoxon_signed_rank(&d);
        assert!(!r.exact);
        assert!(r.p_value < 1e-3, "{}", r.p_value);
    }

    #[test]
    fn ties_average_ranks() {
        let (r, t) = abs_ranks(&[1.0, -1.0, 2.0]);
        assert_eq!(r, vec![1.5, 1.5, 3.0]);
        assert_eq!(t, 6.0);
    }
}
