//! F-test for equal variances and Student / Welch / paired t-tests, all
//! two-sided.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::{mean, variance, Sample, StatTestResult, TestName};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    EqualVar,
    Welch,
}

fn require_len(s: &Sample, min: usize) -> Result<()> {
    s.check_finite()?;
    if s.len() < min {
        return Err(Error::UnsupportedSize {
            n: s.len(),
            min,
            max: usize::MAX,
        });
    }
    Ok(())
}

fn zero_variance(label: impl Into<String>) -> Error {
    Error::ZeroVariance { label: label.into() }
}

/// `F = larger variance / smaller`, `p = min(1, 2·P(F_{df1,df2} > F))`.
pub fn f_test(x: &Sample, y: &Sample) -> Result<StatTestResult> {
    require_len(x, 2)?;
    require_len(y, 2)?;
    let (vx, vy) = (x.variance(), y.variance());
    if vx <= 0.0 {
        return Err(zero_variance(&x.label));
    }
    if vy <= 0.0 {
        return Err(zero_variance(&y.label));
    }
    let ((num, df1), (den, df2)) = if vx >= vy {
        ((vx, x.len() - 1), (vy, y.len() - 1))
    } else {
        ((vy, y.len() - 1), (vx, x.len() - 1))
    };
    let f = num / den;
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64).expect("positive df");
    let p = (2.0 * dist.sf(f)).min(1.0);
    let mut r = StatTestResult::new(TestName::FTest, f, p, x.len() + y.len());
    r.df = Some(df1 as f64);
    r.df2 = Some(df2 as f64);
    Ok(r)
}

fn two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Two-sample t-test (`paired = false`) or the paired t-test on `x − y`
/// (`paired = true`, variant ignored).
pub fn t_test(x: &Sample, y: &Sample, variant: TTestVariant, paired: bool) -> Result<StatTestResult> {
    require_len(x, 2)?;
    require_len(y, 2)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);

    if paired {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let d: Vec<f64> = x.values.iter().zip(&y.values).map(|(a, b)| a - b).collect();
        let vd = variance(&d);
        if vd <= 0.0 {
            return Err(zero_variance(format!("{} - {}", x.label, y.label)));
        }
        let t = mean(&d) / (vd / nx).sqrt();
        let df = nx - 1.0;
        let mut r = StatTestResult::new(TestName::TPaired, t, two_sided(t, df), x.len());
        r.df = Some(df);
        return Ok(r);
    }

    let (vx, vy) = (x.variance(), y.variance());
    let diff = x.mean() - y.mean();
    let (name, t, df) = match variant {
        TTestVariant::EqualVar => {
            let pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0);
            if pooled <= 0.0 {
                return Err(zero_variance(format!("pooled {} / {}", x.label, y.label)));
            }
            let t = diff / (pooled * (1.0 / nx + 1.0 / ny)).sqrt();
            (TestName::TEqualVar, t, nx + ny - 2.0)
        }
        TTestVariant::Welch => {
            let (ax, ay) = (vx / nx, vy / ny);
            let se2 = ax + ay;
            if se2 <= 0.0 {
                return Err(zero_variance(format!("{} / {}", x.label, y.label)));
            }
            let df = se2 * se2 / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
            (TestName::TWelch, diff / se2.sqrt(), df)
        }
    };
    let mut r = StatTestResult::new(name, t, two_sided(t, df), x.len() + y.len());
    r.df = Some(df);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new("s", v.to_vec())
    }

    const A: [f64; 6] = [1.2, 3.4, 2.2, 5.1, 0.7, 2.9];

    #[test]
    fn identical_samples() {
        let f = f_test(&s(&A), &s(&A)).unwrap();
        assert_eq!(f.statistic, 1.0);
        assert_eq!(f.p_value, 1.0);
        for v in [TTestVariant::EqualVar, TTestVariant::Welch] {
            let t = t_test(&s(&A), &s(&A), v, false).unwrap();
            assert_eq!(t.statistic, 0.0);
            assert!((t.p_value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn f_is_symmetric() {
        let b = [0.3, 0.1, 0.9, 0.4, 0.35, 0.2, 0.5];
        let f1 = f_test(&s(&A), &s(&b)).unwrap();
        let f2 = f_test(&s(&b), &s(&A)).unwrap();
        assert_eq!(f1.statistic, f2.statistic);
        assert_eq!(f1.p_value, f2.p_value);
        assert!(f1.statistic >= 1.0);
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(f_test(&s(&[2.0; 5]), &s(&A)), Err(Error::ZeroVariance { .. })));
        assert!(t_test(&s(&[2.0; 5]), &s(&[2.0; 5]), TTestVariant::EqualVar, false).is_err());
    }

    #[test]
    fn t_scale_invariant() {
        let b = [2.0, 4.4, 3.1, 6.6, 2.2, 4.0];
        for v in [TTestVariant::EqualVar, TTestVariant::Welch] {
            let t1 = t_test(&s(&A), &s(&b), v, false).unwrap();
            let k = |xs: &[f64]| xs.iter().map(|x| x * 7.5).collect::<Vec<_>>();
            let t2 = t_test(&s(&k(&A)), &s(&k(&b)), v, false).unwrap();
            assert!((t1.statistic - t2.statistic).abs() < 1e-12);
            assert!((t1.p_value - t2.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_requires_equal_lengths() {
        assert!(matches!(
            t_test(&s(&A), &s(&A[..4]), TTestVariant::EqualVar, true),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
