//! Wilcoxon signed-rank test for paired samples. Zero differences are
//! dropped, ties get midranks, and the two-sided p-value is exact (sign-flip
//! distribution) for up to [`EXACT_LIMIT`] non-zero differences.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{Sample, StatTestResult, TestName};
use crate::error::{Error, Result};

/// Largest effective n that gets the exact null distribution.
pub const EXACT_LIMIT: usize = 25;

/// Midranks of `|d|`, doubled so that they are integers.
fn doubled_midranks(abs: &[f64]) -> Vec<u64> {
    let n = abs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && abs[order[end]] == abs[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share (start + 1 + end) / 2
        let doubled = (start + 1 + end) as u64;
        for &idx in &order[start..end] {
            ranks[idx] = doubled;
        }
        start = end;
    }
    ranks
}

/// Two-sided exact p: fraction of the 2ⁿ sign assignments whose rank sum
/// is at least as far from its mean as the observed one.
fn exact_p(ranks: &[u64], observed: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let dev = (2 * observed as i64 - total as i64).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as i64 - total as i64).abs() >= dev)
        .map(|(_, c)| *c)
        .sum();
    extreme as f64 / (1u64 << ranks.len()) as f64
}

/// Statistic: sum of the ranks of the positive differences `x − y` (T+).
pub fn wilcoxon_signed_rank(x: &Sample, y: &Sample) -> Result<StatTestResult> {
    x.check_finite()?;
    y.check_finite()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty("paired samples"));
    }
    let diffs: Vec<f64> = x
        .values
        .iter()
        .zip(&y.values)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        let mut r = StatTestResult::new(TestName::WilcoxonSignedRank, 0.0, 1.0, 0);
        r.exact = true;
        r.degenerate = true;
        return Ok(r);
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let observed: u64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let t_plus = observed as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let mut r = StatTestResult::new(TestName::WilcoxonSignedRank, t_plus, exact_p(&ranks, observed), n);
        r.exact = true;
        return Ok(r);
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    // tie correction: Σ (t³ − t) / 48 over tie groups
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((t_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = 2.0 * Normal::new(0.0, 1.0).expect("standard normal").sf(z);
    Ok(StatTestResult::new(TestName::WilcoxonSignedRank, t_plus, p, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(x: &[f64], y: &[f64]) -> StatTestResult {
        wilcoxon_signed_rank(&Sample::new("x", x.to_vec()), &Sample::new("y", y.to_vec())).unwrap()
    }

    #[test]
    fn identical_pairs_are_degenerate() {
        let r = w(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn five_positive_differences() {
        let r = w(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(r.p_value, 2.0 / 32.0);
        assert_eq!(r.statistic, 15.0);
        assert!(r.exact);
    }

    #[test]
    fn zeros_dropped() {
        let r = w(&[1.0, 2.0, 3.0, 5.0], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(r.n, 3);
        assert_eq!(r.p_value, 0.25);
    }

    #[test]
    fn midranks_doubled() {
        assert_eq!(doubled_midranks(&[1.0, 2.0, 2.0, 3.0]), vec![2, 5, 5, 8]);
        assert_eq!(doubled_midranks(&[4.0, 4.0, 4.0]), vec![4, 4, 4]);
    }

    #[test]
    fn swap_symmetry() {
        let x = [1.3, 2.1, 0.4, 5.5, 3.3, 2.2, 0.9];
        let y = [1.0, 2.6, 0.1, 4.0, 3.9, 1.0, 1.0];
        assert_eq!(w(&x, &y).p_value, w(&y, &x).p_value);
    }

    #[test]
    fn large_n_uses_normal_approximation() {
        let x: Vec<f64> = (0..40)
            .map(|i| i as f64 + if i % 3 == 0 { 0.7 } else { -0.4 })
            .collect();
        let y: Vec<f64> = (0..40).map(f64::from).collect();
        let r = w(&x, &y);
        assert!(!r.exact);
        assert_eq!(r.n, 40);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn length_mismatch() {
        let e = wilcoxon_signed_rank(&Sample::new("x", vec![1.0]), &Sample::new("y", vec![1.0, 2.0]));
        assert!(matches!(e, Err(Error::LengthMismatch { left: 1, right: 2 })));
    }
}
