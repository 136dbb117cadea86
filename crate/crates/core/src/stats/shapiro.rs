//! Shapiro–Wilk W test with Royston's AS R94 coefficient and p-value
//! approximations, for 3 ≤ n ≤ 50.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{Sample, StatTestResult, TestName};
use crate::error::{Error, Result};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 50;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

/// `cc[0] + cc[1]·x + cc[2]·x² + …`
fn poly(cc: &[f64], x: f64) -> f64 {
    cc.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Upper-half coefficients `a[0..n/2]` (positive, applied to
/// `x[n-1-i] - x[i]`).
fn coefficients(n: usize, std_normal: &Normal) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let m: Vec<f64> = (1..=half)
        .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first_free, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first_free..half {
        a[i] = -m[i] / fac;
    }
    a
}

pub fn shapiro_wilk(sample: &Sample) -> Result<StatTestResult> {
    sample.check_finite()?;
    let n = sample.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::UnsupportedSize {
            n,
            min: MIN_N,
            max: MAX_N,
        });
    }
    let mut x = sample.values.clone();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range.is_nan() || range <= 0.0 || range / x[n - 1].abs().max(x[0].abs()) < 1e-12 {
        return Err(Error::ZeroVariance {
            label: sample.label.clone(),
        });
    }

    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let half_coeffs = coefficients(n, &std_normal);
    // antisymmetric weight vector over the sorted sample
    let mut a = vec![0.0; n];
    for (i, c) in half_coeffs.iter().enumerate() {
        a[i] = -c;
        a[n - 1 - i] = *c;
    }

    // W is the squared correlation between weights and data
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (ai, xi) in a.iter().zip(&xs) {
        let da = ai - mean_a;
        let dx = xi - mean_x;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    let p = if n == 3 {
        // exact null distribution of W for n = 3
        (6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::FRAC_PI_3)).max(0.0)
    } else {
        let an = n as f64;
        let mut y = w1.ln();
        let (m, s) = if n <= 11 {
            let gamma = poly(&G, an);
            if y >= gamma {
                let mut r = StatTestResult::new(TestName::ShapiroWilk, w, 1e-99, n);
                r.exact = false;
                return Ok(r);
            }
            y = -(gamma - y).ln();
            (poly(&C3, an), poly(&C4, an).exp())
        } else {
            let lx = an.ln();
            (poly(&C5, lx), poly(&C6, lx).exp())
        };
        Normal::new(m, s).expect("positive scale").sf(y)
    };
    Ok(StatTestResult::new(TestName::ShapiroWilk, w, p, n))
}
