//! Hypothesis tests and the group-comparison policy: Shapiro–Wilk on both
//! groups, Wilcoxon signed-rank when either looks non-normal, otherwise an
//! F-test choosing between the equal-variance and Welch t-tests.

mod parametric;
mod shapiro;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use parametric::{f_test, t_test, TTestVariant};
pub use shapiro::shapiro_wilk;
pub use wilcoxon::{wilcoxon_signed_rank, EXACT_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: String,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            values,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { field: "sample value" })
        }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Sample variance (n − 1 denominator).
    pub fn variance(&self) -> f64 {
        variance(&self.values)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    ShapiroWilk,
    WilcoxonSignedRank,
    FTest,
    TEqualVar,
    TWelch,
    TPaired,
}

impl TestName {
    pub fn label(self) -> &'static str {
        match self {
            TestName::ShapiroWilk => "shapiro_wilk",
            TestName::WilcoxonSignedRank => "wilcoxon_signed_rank",
            TestName::FTest => "f_test",
            TestName::TEqualVar => "t_equal_var",
            TestName::TWelch => "t_welch",
            TestName::TPaired => "t_paired",
        }
    }
}

impl std::fmt::Display for TestName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One sub-test run while selecting the final test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceStep {
    pub test_name: TestName,
    /// Which sample(s) the sub-test looked at.
    pub subject: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub test_name: TestName,
    pub statistic: f64,
    pub p_value: f64,
    /// Exact null distribution (as opposed to an approximation).
    pub exact: bool,
    pub n: usize,
    /// Degrees of freedom: t df, or the F numerator df.
    pub df: Option<f64>,
    /// F denominator df.
    pub df2: Option<f64>,
    /// Wilcoxon with every difference zero.
    pub degenerate: bool,
    /// Sub-tests that led to this test being chosen, in order.
    pub provenance: Vec<ProvenanceStep>,
}

impl StatTestResult {
    pub(crate) fn new(test_name: TestName, statistic: f64, p_value: f64, n: usize) -> Self {
        Self {
            test_name,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            exact: false,
            n,
            df: None,
            df2: None,
            degenerate: false,
            provenance: Vec::new(),
        }
    }

    fn step(&self, subject: impl Into<String>) -> ProvenanceStep {
        ProvenanceStep {
            test_name: self.test_name,
            subject: subject.into(),
            statistic: self.statistic,
            p_value: self.p_value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonPolicy {
    pub alpha: f64,
}

impl Default for ComparisonPolicy {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

impl ComparisonPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                field: "alpha",
                reason: format!("must lie in (0, 1), got {}", self.alpha),
            })
        }
    }
}

/// Chooses and runs the comparison test for two paired groups. Shapiro–Wilk
/// p < alpha in either group means non-normal, which selects Wilcoxon;
/// otherwise the F-test (p < alpha means unequal variances) selects Welch or
/// the equal-variance t-test.
pub fn compare_groups(x: &Sample, y: &Sample, policy: &ComparisonPolicy) -> Result<StatTestResult> {
    policy.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let sw_x = shapiro_wilk(x)?;
    let sw_y = shapiro_wilk(y)?;
    let mut provenance = vec![sw_x.step(&x.label), sw_y.step(&y.label)];
    let both = format!("{} vs {}", x.label, y.label);

    let mut result = if sw_x.p_value < policy.alpha || sw_y.p_value < policy.alpha {
        wilcoxon_signed_rank(x, y)?
    } else {
        let f = f_test(x, y)?;
        provenance.push(f.step(&both));
        let variant = if f.p_value < policy.alpha {
            TTestVariant::Welch
        } else {
            TTestVariant::EqualVar
        };
        t_test(x, y, variant, false)?
    };
    provenance.push(result.step(&both));
    result.provenance = provenance;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalish(scale: f64, shift: f64) -> Vec<f64> {
        // normal quantiles at (i - 0.5)/12 in shuffled order
        [
            -0.210, 1.732, -0.674, 0.674, -1.150, 0.210, -1.732, 1.150, 0.887, -0.887, 0.489, -0.489,
        ]
        .iter()
        .map(|z| shift + scale * z)
        .collect()
    }

    fn skewed() -> Vec<f64> {
        vec![0.1, 0.11, 0.12, 0.1, 0.13, 0.1, 0.12, 0.11, 0.1, 5.0, 9.0, 0.14]
    }

    #[test]
    fn non_normal_groups_use_wilcoxon() {
        let r = compare_groups(
            &Sample::new("x", skewed()),
            &Sample::new("y", normalish(1.0, 0.0)),
            &ComparisonPolicy::default(),
        )
        .unwrap();
        assert_eq!(r.test_name, TestName::WilcoxonSignedRank);
        assert_eq!(r.provenance.len(), 3);
        assert!(r.provenance[0].p_value < 0.05);
    }

    #[test]
    fn normal_equal_variance_groups_use_student() {
        let y: Vec<f64> = normalish(1.0, 0.3).into_iter().rev().collect();
        let r = compare_groups(
            &Sample::new("x", normalish(1.0, 0.0)),
            &Sample::new("y", y),
            &ComparisonPolicy::default(),
        )
        .unwrap();
        let names: Vec<_> = r.provenance.iter().map(|p| p.test_name).collect();
        assert_eq!(
            names,
            [
                TestName::ShapiroWilk,
                TestName::ShapiroWilk,
                TestName::FTest,
                TestName::TEqualVar
            ]
        );
        assert_eq!(r.test_name, TestName::TEqualVar);
    }

    #[test]
    fn normal_unequal_variance_groups_use_welch() {
        let x = Sample::new("x", normalish(1.0, 0.0));
        let y = Sample::new("y", normalish(5.0, 1.0).into_iter().rev().collect());
        let r = compare_groups(&x, &y, &ComparisonPolicy::default()).unwrap();
        assert_eq!(r.test_name, TestName::TWelch);
        let f = &r.provenance[2];
        assert_eq!(f.test_name, TestName::FTest);
        assert!((f.statistic - 25.0).abs() < 1e-9);
        assert!(f.p_value < 0.05);
    }

    #[test]
    fn compare_is_pure() {
        let x = Sample::new("x", skewed());
        let y = Sample::new("y", normalish(2.0, 1.0));
        let p = ComparisonPolicy::default();
        assert_eq!(compare_groups(&x, &y, &p).unwrap(), compare_groups(&x, &y, &p).unwrap());
    }

    #[test]
    fn policy_alpha_bounds() {
        assert!(ComparisonPolicy { alpha: 0.0 }.validate().is_err());
        assert!(ComparisonPolicy { alpha: 1.0 }.validate().is_err());
        assert!(ComparisonPolicy::default().validate().is_ok());
    }
}
