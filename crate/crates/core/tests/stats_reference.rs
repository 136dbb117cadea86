//! Statistics against committed SciPy reference values (see
//! `fixtures/gen_fixtures.py`).

use std::path::PathBuf;

use steer_sim::stats::{
    compare_groups, f_test, shapiro_wilk, t_test, wilcoxon_signed_rank, ComparisonPolicy, Sample, TTestVariant,
    TestName,
};
use steer_sim::Error;

fn fixture(name: &str) -> csv::Reader<std::fs::File> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn samples() -> (Sample, Sample, Sample) {
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for row in fixture("parametric_samples.csv").records() {
        let row = row.unwrap();
        for (c, v) in cols.iter_mut().zip(row.iter()) {
            c.push(v.parse::<f64>().unwrap());
        }
    }
    let [x, y, z] = cols;
    (Sample::new("x", x), Sample::new("y", y), Sample::new("z", z))
}

/// `case → (statistic, df, p)`
fn parametric_reference(case: &str) -> (f64, f64, f64) {
    for row in fixture("parametric.csv").records() {
        let row = row.unwrap();
        if &row[0] == case {
            let f = |i: usize| row[i].parse::<f64>().unwrap();
            return (f(1), f(2), f(3));
        }
    }
    panic!("case {case} missing from parametric.csv");
}

#[test]
fn t_tests_match_reference_to_1e9() {
    let (x, y, z) = samples();
    let cases = [
        ("t_equal_xy", t_test(&x, &y, TTestVariant::EqualVar, false).unwrap()),
        ("t_welch_xz", t_test(&x, &z, TTestVariant::Welch, false).unwrap()),
        ("t_paired_xy", t_test(&x, &y, TTestVariant::EqualVar, true).unwrap()),
    ];
    for (case, got) in cases {
        let (stat, df, p) = parametric_reference(case);
        assert!(
            (got.statistic - stat).abs() < 1e-9,
            "{case}: t {} vs {stat}",
            got.statistic
        );
        assert!((got.df.unwrap() - df).abs() < 1e-9, "{case}: df {:?} vs {df}", got.df);
        assert!((got.p_value - p).abs() < 1e-9, "{case}: p {} vs {p}", got.p_value);
    }
}

#[test]
fn f_test_matches_reference_to_1e6() {
    let (x, _, z) = samples();
    let got = f_test(&x, &z).unwrap();
    let (stat, df, p) = parametric_reference("f_xz");
    assert!((got.statistic - stat).abs() < 1e-9);
    assert_eq!(got.df, Some(df));
    assert_eq!(got.df2, Some(df));
    assert!((got.p_value - p).abs() < 1e-6, "p {} vs {p}", got.p_value);
    // argument order does not matter: the larger variance is the numerator
    assert_eq!(f_test(&z, &x).unwrap().statistic, got.statistic);

    // variance ratio exactly 4 with 11/11 df
    let (_, _, p4) = parametric_reference("f_4_11_11");
    let base: Vec<f64> = (0..12).map(|i| f64::from(i) * 0.37 - 1.0).collect();
    let doubled: Vec<f64> = base.iter().map(|v| 2.0 * v).collect();
    let r = f_test(&Sample::new("a", doubled), &Sample::new("b", base)).unwrap();
    assert!((r.statistic - 4.0).abs() < 1e-12);
    assert!((r.p_value - p4).abs() < 1e-6, "p {} vs {p4}", r.p_value);
}

#[test]
fn shapiro_wilk_matches_reference_on_all_fixtures() {
    let mut count = 0;
    for row in fixture("shapiro_n12.csv").records() {
        let row = row.unwrap();
        let nums: Vec<f64> = row.iter().skip(1).map(|f| f.parse().unwrap()).collect();
        let r = shapiro_wilk(&Sample::new(&row[0], nums[..12].to_vec())).unwrap();
        assert!(
            (r.statistic - nums[12]).abs() < 1e-6,
            "{}: W {} vs {}",
            &row[0],
            r.statistic,
            nums[12]
        );
        assert!(
            (r.p_value - nums[13]).abs() < 1e-6,
            "{}: p {} vs {}",
            &row[0],
            r.p_value,
            nums[13]
        );
        count += 1;
    }
    assert_eq!(count, 20);
}

#[test]
fn large_sample_wilcoxon_matches_normal_approximation() {
    for row in fixture("wilcoxon_large.csv").records() {
        let row = row.unwrap();
        let parse = |s: &str| -> Vec<f64> { s.split(' ').map(|v| v.parse().unwrap()).collect() };
        let (x, y) = (parse(&row[4]), parse(&row[5]));
        let r = wilcoxon_signed_rank(&Sample::new("x", x), &Sample::new("y", y)).unwrap();
        let n: usize = row[1].parse().unwrap();
        let t_plus: f64 = row[2].parse().unwrap();
        let p: f64 = row[3].parse().unwrap();
        assert_eq!(r.n, n, "{}", &row[0]);
        assert!(!r.exact, "{}: n = {n} should use the approximation", &row[0]);
        assert_eq!(r.statistic, t_plus, "{}", &row[0]);
        assert!((r.p_value - p).abs() < 1e-9, "{}: p {} vs {p}", &row[0], r.p_value);
    }
}

#[test]
fn comparison_routes_through_the_selection_chain() {
    let (x, y, z) = samples();
    let policy = ComparisonPolicy::default();

    // both groups pass Shapiro–Wilk, so the F-test picks the t variant
    let r = compare_groups(&x, &y, &policy).unwrap();
    let expected = if r.provenance[2].p_value < 0.05 {
        TestName::TWelch
    } else {
        TestName::TEqualVar
    };
    let names: Vec<TestName> = r.provenance.iter().map(|s| s.test_name).collect();
    assert_eq!(
        names,
        [TestName::ShapiroWilk, TestName::ShapiroWilk, TestName::FTest, expected]
    );
    assert_eq!(r.test_name, expected);

    // a clearly non-normal group: Wilcoxon, and no F-test
    let skewed = Sample::new(
        "skewed",
        vec![0.1, 0.1, 0.2, 0.1, 0.15, 0.1, 0.2, 0.1, 0.1, 0.12, 9.0, 0.1],
    );
    let r = compare_groups(&z, &skewed, &policy).unwrap();
    assert_eq!(r.test_name, TestName::WilcoxonSignedRank);
    let names: Vec<TestName> = r.provenance.iter().map(|s| s.test_name).collect();
    assert!(!names.contains(&TestName::FTest));
    assert_eq!(names.last(), Some(&TestName::WilcoxonSignedRank));
    assert!(r.exact);
}

#[test]
fn degenerate_inputs_are_typed_errors() {
    let flat = Sample::new("flat", vec![1.0; 12]);
    let (x, _, _) = samples();
    assert!(matches!(shapiro_wilk(&flat), Err(Error::ZeroVariance { .. })));
    assert!(matches!(
        shapiro_wilk(&Sample::new("tiny", vec![1.0, 2.0])),
        Err(Error::UnsupportedSize { n: 2, .. })
    ));
    assert!(matches!(
        compare_groups(&flat, &x, &ComparisonPolicy::default()),
        Err(Error::ZeroVariance { .. })
    ));
    let short = Sample::new("short", vec![1.0, 2.0, 3.0]);
    assert!(matches!(
        wilcoxon_signed_rank(&x, &short),
        Err(Error::LengthMismatch { left: 12, right: 3 })
    ));
    let r = wilcoxon_signed_rank(&x, &x).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.p_value, 1.0);
}
