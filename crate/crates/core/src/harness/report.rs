//! Aggregation into table- and figure-shaped results, and the files written
//! for them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentPlan, TrialFailure, TrialRecord};
use crate::agents::Interface;
use crate::error::{Error, Result};
use crate::metrics::{aligned_mean, TrialTrace};
use crate::stats::{compare_groups, mean, variance, Sample, StatTestResult, TestName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Crosswalk,
    NoCrosswalk,
    /// Per-subject average over both scenarios.
    Pooled,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Crosswalk => "crosswalk",
            Scenario::NoCrosswalk => "no_crosswalk",
            Scenario::Pooled => "pooled",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Scenario::Crosswalk => "Pedestrian at crosswalk",
            Scenario::NoCrosswalk => "Pedestrian not at crosswalk",
            Scenario::Pooled => "Both scenarios (per-subject average)",
        }
    }

    fn of(crosswalk: bool) -> Self {
        if crosswalk {
            Scenario::Crosswalk
        } else {
            Scenario::NoCrosswalk
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    MinDistance,
    MaxSwa,
    ResponseTime,
    AvgAbsSlip,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [
        Parameter::MinDistance,
        Parameter::MaxSwa,
        Parameter::ResponseTime,
        Parameter::AvgAbsSlip,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Parameter::MinDistance => "min_distance",
            Parameter::MaxSwa => "max_swa",
            Parameter::ResponseTime => "response_time",
            Parameter::AvgAbsSlip => "avg_abs_slip",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Parameter::MinDistance => "Average minimum distance to pedestrian (m)",
            Parameter::MaxSwa => "Average maximum steering wheel angle (°)",
            Parameter::ResponseTime => "Average response time of steering wheel angle (s)",
            Parameter::AvgAbsSlip => "Average absolute vehicle slip angle (°)",
        }
    }

    fn of(self, r: &TrialRecord) -> Option<f64> {
        match self {
            Parameter::MinDistance => r.metrics.min_distance,
            Parameter::MaxSwa => Some(r.metrics.max_swa),
            Parameter::ResponseTime => r.metrics.response_time,
            Parameter::AvgAbsSlip => r.metrics.avg_abs_slip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            n,
            mean: if n > 0 { mean(values) } else { f64::NAN },
            sd: if n > 1 { variance(values).sqrt() } else { f64::NAN },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub parameter: Parameter,
    pub interface: Interface,
    pub crosswalk: GroupSummary,
    pub no_crosswalk: GroupSummary,
}

/// Minimum, quartiles (linear interpolation) and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// One pairwise test with the trials behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: Scenario,
    pub parameter: Parameter,
    pub a: String,
    pub b: String,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub trial_ids: Vec<String>,
    pub result: Option<StatTestResult>,
    pub error: Option<String>,
}

impl Comparison {
    pub fn p_value(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.p_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTargets {
    pub myo_vs_takeover_slip_p: Option<f64>,
    pub myo_vs_takeover_significant: bool,
    pub myo_vs_wheel_slip_p: Option<f64>,
    pub myo_vs_wheel_not_significant: bool,
    pub crosswalk_slip_p: Option<f64>,
    pub crosswalk_not_significant: bool,
    pub all_met: bool,
    pub deviations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingChecks {
    /// Mean max SWA: myo < wheel < takeover, per scenario.
    pub max_swa_crosswalk: bool,
    pub max_swa_no_crosswalk: bool,
    /// Mean min distance: myo < wheel ≤ takeover, per scenario.
    pub min_distance_crosswalk: bool,
    pub min_distance_no_crosswalk: bool,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub scenario: Scenario,
    pub interface: Interface,
    /// `(t, value…)` rows on the common grid, t ≥ 0.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub config_hash: String,
    pub epoch: super::Epoch,
    pub alpha: f64,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub table2: Vec<Table2Row>,
    pub comparisons: Vec<Comparison>,
    /// Per-subject slip averaged over both scenarios, per interface.
    pub slip_by_interface: Vec<(Interface, Vec<f64>)>,
    pub crosswalk_effect: Comparison,
    pub fig4: Vec<(Interface, Option<FiveNumber>)>,
    pub fig5: Vec<Curve>,
    pub fig6: Vec<Curve>,
    pub targets: SignificanceTargets,
    pub orderings: OrderingChecks,
}

impl ExperimentReport {
    pub fn table2_mean(&self, parameter: Parameter, interface: Interface, scenario: Scenario) -> Option<f64> {
        self.table2
            .iter()
            .find(|r| r.parameter == parameter && r.interface == interface)
            .map(|r| match scenario {
                Scenario::NoCrosswalk => r.no_crosswalk.mean,
                _ => r.crosswalk.mean,
            })
    }

    pub fn comparison(
        &self,
        scenario: Scenario,
        parameter: Parameter,
        a: Interface,
        b: Interface,
    ) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.scenario == scenario && c.parameter == parameter && c.a == a.label() && c.b == b.label())
    }
}

const PAIRS: [(Interface, Interface); 3] = [
    (Interface::MyoArmband, Interface::SteeringWheel),
    (Interface::MyoArmband, Interface::ManualTakeover),
    (Interface::SteeringWheel, Interface::ManualTakeover),
];

/// Per-subject value of `param` for one interface in one scenario.
fn per_subject(
    records: &[TrialRecord],
    interface: Interface,
    scenario: Scenario,
    param: Parameter,
) -> BTreeMap<usize, (f64, Vec<String>)> {
    let mut acc: BTreeMap<usize, (Vec<f64>, Vec<String>)> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.pedestrian_present && r.interface == interface)
    {
        if scenario != Scenario::Pooled && Scenario::of(r.crosswalk) != scenario {
            continue;
        }
        if let Some(v) = param.of(r) {
            let e = acc.entry(r.subject_id).or_default();
            e.0.push(v);
            e.1.push(r.trial_id.clone());
        }
    }
    acc.into_iter().map(|(s, (v, ids))| (s, (mean(&v), ids))).collect()
}

fn compare(
    scenario: Scenario,
    parameter: Parameter,
    (a_label, a): (&str, &BTreeMap<usize, (f64, Vec<String>)>),
    (b_label, b): (&str, &BTreeMap<usize, (f64, Vec<String>)>),
    config: &ExperimentConfig,
) -> Comparison {
    let mut a_values = Vec::new();
    let mut b_values = Vec::new();
    let mut trial_ids = Vec::new();
    for (subject, (va, ids_a)) in a {
        if let Some((vb, ids_b)) = b.get(subject) {
            a_values.push(*va);
            b_values.push(*vb);
            trial_ids.extend(ids_a.iter().cloned());
            trial_ids.extend(ids_b.iter().cloned());
        }
    }
    let outcome = compare_groups(
        &Sample::new(a_label, a_values.clone()),
        &Sample::new(b_label, b_values.clone()),
        &config.policy,
    );
    let (result, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        scenario,
        parameter,
        a: a_label.to_string(),
        b: b_label.to_string(),
        a_values,
        b_values,
        trial_ids,
        result,
        error,
    }
}

fn curves(traces: &[TrialTrace], value: impl Fn(&crate::metrics::TraceSample) -> Vec<f64>) -> Result<Vec<Curve>> {
    let mut out = Vec::new();
    for scenario in [Scenario::Crosswalk, Scenario::NoCrosswalk] {
        for interface in Interface::ALL {
            let group: Vec<&TrialTrace> = traces
                .iter()
                .filter(|t| t.pedestrian_present && t.interface == interface && Scenario::of(t.crosswalk) == scenario)
                .collect();
            let Some(first) = group.first() else { continue };
            let width = value(&first.samples[0]).len();
            let mut columns: Vec<Vec<(f64, f64)>> = Vec::new();
            for c in 0..width {
                let series: Vec<Vec<(f64, f64)>> = group
                    .iter()
                    .map(|tr| tr.analysed().iter().map(|s| (s.t, value(s)[c])).collect())
                    .collect();
                columns.push(aligned_mean(&series, first.dt)?);
            }
            let rows = (0..columns[0].len())
                .filter(|&i| columns[0][i].0 >= 0.0)
                .map(|i| {
                    let mut row = vec![columns[0][i].0];
                    row.extend(columns.iter().map(|col| col[i].1));
                    row
                })
                .collect();
            out.push(Curve {
                scenario,
                interface,
                rows,
            });
        }
    }
    Ok(out)
}

pub fn build_report(
    plan: &ExperimentPlan,
    config: &ExperimentConfig,
    records: &[TrialRecord],
    traces: &[TrialTrace],
    failures: &[TrialFailure],
) -> Result<ExperimentReport> {
    let alpha = config.policy.alpha;

    let mut table2 = Vec::new();
    for parameter in Parameter::ALL {
        for interface in Interface::ALL {
            let values = |s| {
                per_subject(records, interface, s, parameter)
                    .into_values()
                    .map(|(v, _)| v)
                    .collect::<Vec<_>>()
            };
            table2.push(Table2Row {
                parameter,
                interface,
                crosswalk: GroupSummary::of(&values(Scenario::Crosswalk)),
                no_crosswalk: GroupSummary::of(&values(Scenario::NoCrosswalk)),
            });
        }
    }

    let mut comparisons = Vec::new();
    let scenario_params = [Parameter::MinDistance, Parameter::MaxSwa, Parameter::ResponseTime];
    for scenario in [Scenario::Crosswalk, Scenario::NoCrosswalk] {
        for parameter in scenario_params {
            for (a, b) in PAIRS {
                let va = per_subject(records, a, scenario, parameter);
                let vb = per_subject(records, b, scenario, parameter);
                comparisons.push(compare(scenario, parameter, (a.label(), &va), (b.label(), &vb), config));
            }
        }
    }
    for (a, b) in PAIRS {
        let va = per_subject(records, a, Scenario::Pooled, Parameter::AvgAbsSlip);
        let vb = per_subject(records, b, Scenario::Pooled, Parameter::AvgAbsSlip);
        comparisons.push(compare(
            Scenario::Pooled,
            Parameter::AvgAbsSlip,
            (a.label(), &va),
            (b.label(), &vb),
            config,
        ));
    }

    let slip_by_interface: Vec<(Interface, Vec<f64>)> = Interface::ALL
        .iter()
        .map(|&i| {
            let v = per_subject(records, i, Scenario::Pooled, Parameter::AvgAbsSlip)
                .into_values()
                .map(|(v, _)| v)
                .collect();
            (i, v)
        })
        .collect();
    let fig4 = slip_by_interface.iter().map(|(i, v)| (*i, FiveNumber::of(v))).collect();

    // crosswalk effect: per-subject slip averaged over the three interfaces
    let scenario_average = |scenario| {
        let mut acc: BTreeMap<usize, (Vec<f64>, Vec<String>)> = BTreeMap::new();
        for interface in Interface::ALL {
            for (s, (v, ids)) in per_subject(records, interface, scenario, Parameter::AvgAbsSlip) {
                let e = acc.entry(s).or_default();
                e.0.push(v);
                e.1.extend(ids);
            }
        }
        acc.into_iter()
            .map(|(s, (v, ids))| (s, (mean(&v), ids)))
            .collect::<BTreeMap<_, _>>()
    };
    let crosswalk_effect = compare(
        Scenario::Pooled,
        Parameter::AvgAbsSlip,
        ("crosswalk", &scenario_average(Scenario::Crosswalk)),
        ("no_crosswalk", &scenario_average(Scenario::NoCrosswalk)),
        config,
    );

    let fig5 = curves(traces, |s| vec![s.x, s.y])?;
    let fig6 = curves(traces, |s| vec![s.lat_accel])?;

    let mut report = ExperimentReport {
        master_seed: plan.master_seed,
        config_hash: config.hash()?,
        epoch: config.epoch,
        alpha,
        records: records.to_vec(),
        failures: failures.to_vec(),
        table2,
        comparisons,
        slip_by_interface,
        crosswalk_effect,
        fig4,
        fig5,
        fig6,
        targets: SignificanceTargets {
            myo_vs_takeover_slip_p: None,
            myo_vs_takeover_significant: false,
            myo_vs_wheel_slip_p: None,
            myo_vs_wheel_not_significant: false,
            crosswalk_slip_p: None,
            crosswalk_not_significant: false,
            all_met: false,
            deviations: Vec::new(),
        },
        orderings: OrderingChecks {
            max_swa_crosswalk: false,
            max_swa_no_crosswalk: false,
            min_distance_crosswalk: false,
            min_distance_no_crosswalk: false,
            collisions: records.iter().filter(|r| r.metrics.collided).count(),
        },
    };
    report.targets = significance_targets(&report);
    report.orderings = ordering_checks(&report);
    Ok(report)
}

fn significance_targets(report: &ExperimentReport) -> SignificanceTargets {
    let alpha = report.alpha;
    let slip = |a, b| {
        report
            .comparison(Scenario::Pooled, Parameter::AvgAbsSlip, a, b)
            .and_then(Comparison::p_value)
    };
    let myo_to = slip(Interface::MyoArmband, Interface::ManualTakeover);
    let myo_wheel = slip(Interface::MyoArmband, Interface::SteeringWheel);
    let cw = report.crosswalk_effect.p_value();
    let mut t = SignificanceTargets {
        myo_vs_takeover_slip_p: myo_to,
        myo_vs_takeover_significant: myo_to.is_some_and(|p| p < alpha),
        myo_vs_wheel_slip_p: myo_wheel,
        myo_vs_wheel_not_significant: myo_wheel.is_some_and(|p| p >= alpha),
        crosswalk_slip_p: cw,
        crosswalk_not_significant: cw.is_some_and(|p| p > alpha),
        all_met: false,
        deviations: Vec::new(),
    };
    if !t.myo_vs_takeover_significant {
        t.deviations
            .push(format!("myo vs takeover slip not significant (p = {myo_to:?})"));
    }
    if !t.myo_vs_wheel_not_significant {
        t.deviations.push(format!(
            "myo vs wheel slip significant (p = {myo_wheel:?}); target is no difference"
        ));
    }
    if !t.crosswalk_not_significant {
        t.deviations
            .push(format!("crosswalk effect on slip significant (p = {cw:?})"));
    }
    t.all_met = t.deviations.is_empty();
    t
}

fn ordering_checks(report: &ExperimentReport) -> OrderingChecks {
    let m = |p, i, s| report.table2_mean(p, i, s).unwrap_or(f64::NAN);
    let swa = |s| {
        m(Parameter::MaxSwa, Interface::MyoArmband, s) < m(Parameter::MaxSwa, Interface::SteeringWheel, s)
            && m(Parameter::MaxSwa, Interface::SteeringWheel, s) < m(Parameter::MaxSwa, Interface::ManualTakeover, s)
    };
    let dist = |s| {
        m(Parameter::MinDistance, Interface::MyoArmband, s) < m(Parameter::MinDistance, Interface::SteeringWheel, s)
            && m(Parameter::MinDistance, Interface::SteeringWheel, s)
                <= m(Parameter::MinDistance, Interface::ManualTakeover, s)
    };
    OrderingChecks {
        max_swa_crosswalk: swa(Scenario::Crosswalk),
        max_swa_no_crosswalk: swa(Scenario::NoCrosswalk),
        min_distance_crosswalk: dist(Scenario::Crosswalk),
        min_distance_no_crosswalk: dist(Scenario::NoCrosswalk),
        collisions: report.records.iter().filter(|r| r.metrics.collided).count(),
    }
}

fn marker(name: TestName) -> &'static str {
    match name {
        TestName::TEqualVar => "#",
        TestName::TWelch => "##",
        TestName::WilcoxonSignedRank => "###",
        TestName::TPaired => "####",
        TestName::ShapiroWilk | TestName::FTest => "",
    }
}

fn cell(c: &Comparison, alpha: f64) -> String {
    match &c.result {
        Some(r) => {
            let star = if r.p_value < alpha { "*" } else { "" };
            format!("{:.3}{star} {}", r.p_value, marker(r.test_name))
        }
        None => "n/a †".to_string(),
    }
}

fn fmt_summary(g: &GroupSummary) -> String {
    if g.n == 0 {
        "–".into()
    } else {
        format!("{:.2} SD {:.2}", g.mean, g.sd)
    }
}

pub fn render_table2(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Interface comparison (means over subjects)\n");
    let _ = writeln!(
        s,
        "| Performance parameter | Interface | Pedestrian at crosswalk | Pedestrian not at crosswalk |"
    );
    let _ = writeln!(s, "|---|---|---|---|");
    for row in &report.table2 {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            row.parameter.title(),
            row.interface,
            fmt_summary(&row.crosswalk),
            fmt_summary(&row.no_crosswalk)
        );
    }
    s
}

pub fn render_table3(report: &ExperimentReport) -> String {
    let alpha = report.alpha;
    let mut s = String::new();
    let _ = writeln!(s, "# Statistical significance of interface differences\n");
    let blocks: Vec<(Scenario, Parameter)> = [Scenario::Crosswalk, Scenario::NoCrosswalk]
        .iter()
        .flat_map(|&sc| {
            [Parameter::MinDistance, Parameter::MaxSwa, Parameter::ResponseTime]
                .into_iter()
                .map(move |p| (sc, p))
        })
        .chain(std::iter::once((Scenario::Pooled, Parameter::AvgAbsSlip)))
        .collect();
    for (scenario, parameter) in blocks {
        let _ = writeln!(s, "## {} — {}\n", scenario.title(), parameter.title());
        let _ = writeln!(s, "| Interface | myo | wheel | takeover |");
        let _ = writeln!(s, "|---|---|---|---|");
        for row in Interface::ALL {
            let cells: Vec<String> = Interface::ALL
                .iter()
                .map(|&col| {
                    if row == col {
                        return "–".to_string();
                    }
                    let (a, b) = if row < col { (row, col) } else { (col, row) };
                    report
                        .comparison(scenario, parameter, a, b)
                        .map(|c| cell(c, alpha))
                        .unwrap_or_else(|| "n/a".into())
                })
                .collect();
            let _ = writeln!(s, "| {} | {} |", row, cells.join(" | "));
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "## Crosswalk effect on slip (per-subject average over interfaces)\n");
    let _ = writeln!(s, "| Comparison | p |");
    let _ = writeln!(s, "|---|---|");
    let _ = writeln!(
        s,
        "| crosswalk vs no crosswalk | {} |\n",
        cell(&report.crosswalk_effect, alpha)
    );

    let _ = writeln!(s, "## Notes\n");
    let _ = writeln!(s, "1. \\* p < {alpha} (the analysis significance level).");
    let _ = writeln!(s, "2. # t-test for equal variances.");
    let _ = writeln!(s, "3. ## t-test for unequal variances (Welch).");
    let _ = writeln!(s, "4. ### Wilcoxon signed-rank test.");
    let _ = writeln!(s, "5. † test not computable; see the selection log below.");
    let _ = writeln!(
        s,
        "6. Each test follows the same rule: Shapiro–Wilk on both groups; if either has p < {alpha}, Wilcoxon signed-rank; otherwise an F-test picks the equal- or unequal-variance t-test."
    );
    let _ = writeln!(s, "\n## Test-selection log\n");
    let _ = writeln!(s, "| Scenario | Parameter | Pair | Steps |");
    let _ = writeln!(s, "|---|---|---|---|");
    for c in report
        .comparisons
        .iter()
        .chain(std::iter::once(&report.crosswalk_effect))
    {
        let steps = match (&c.result, &c.error) {
            (Some(r), _) => r
                .provenance
                .iter()
                .map(|p| format!("{}({}) p={:.4}", p.test_name, p.subject, p.p_value))
                .collect::<Vec<_>>()
                .join(" → "),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} vs {} | {} |",
            c.scenario.label(),
            c.parameter.label(),
            c.a,
            c.b,
            steps
        );
    }
    s
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    trial_id: &'a str,
    subject: usize,
    condition: u8,
    slot: usize,
    interface: Interface,
    crosswalk: bool,
    pedestrian_present: bool,
    effort: f64,
    avg_abs_slip: Option<f64>,
    min_distance: Option<f64>,
    full_pass_min_distance: Option<f64>,
    max_swa: f64,
    response_time: Option<f64>,
    collided: bool,
}

#[derive(Serialize)]
struct BoxRow {
    interface: Interface,
    n: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
}

#[derive(Serialize)]
struct TrajectoryRow {
    scenario: &'static str,
    interface: Interface,
    t: f64,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct AccelRow {
    scenario: &'static str,
    interface: Interface,
    t: f64,
    lat_accel: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    master_seed: u64,
    config_hash: &'a str,
    epoch: super::Epoch,
    timestamp_unix: u64,
    crate_version: &'static str,
    trials: usize,
    failures: &'a [TrialFailure],
    significance_targets: &'a SignificanceTargets,
    orderings: &'a OrderingChecks,
    files: Vec<String>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes every output file under `out_dir` and returns their paths. All
/// files except the manifest's timestamp depend only on seed and config.
pub fn emit_outputs(report: &ExperimentReport, traces: &[TrialTrace], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let trace_dir = out_dir.join("traces");
    std::fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;
    let mut written = Vec::new();

    for trace in traces {
        let path = trace_dir.join(format!("{}.csv", trace.trial_id));
        write(&path, &trace.to_csv()?)?;
        written.push(path);
    }

    let metrics = csv_bytes(report.records.iter().map(|r| MetricsRow {
        trial_id: &r.trial_id,
        subject: r.subject_id + 1,
        condition: r.condition_id,
        slot: r.slot,
        interface: r.interface,
        crosswalk: r.crosswalk,
        pedestrian_present: r.pedestrian_present,
        effort: r.effort,
        avg_abs_slip: r.metrics.avg_abs_slip,
        min_distance: r.metrics.min_distance,
        full_pass_min_distance: r.full_pass_min_distance,
        max_swa: r.metrics.max_swa,
        response_time: r.metrics.response_time,
        collided: r.metrics.collided,
    }))?;
    let fig4 = csv_bytes(report.fig4.iter().filter_map(|(i, f)| {
        f.map(|f| BoxRow {
            interface: *i,
            n: report
                .slip_by_interface
                .iter()
                .find(|(j, _)| j == i)
                .map_or(0, |(_, v)| v.len()),
            min: f.min,
            q1: f.q1,
            median: f.median,
            q3: f.q3,
            max: f.max,
        })
    }))?;
    let fig5 = csv_bytes(report.fig5.iter().flat_map(|c| {
        c.rows.iter().map(move |r| TrajectoryRow {
            scenario: c.scenario.label(),
            interface: c.interface,
            t: r[0],
            x: r[1],
            y: r[2],
        })
    }))?;
    let fig6 = csv_bytes(report.fig6.iter().flat_map(|c| {
        c.rows.iter().map(move |r| AccelRow {
            scenario: c.scenario.label(),
            interface: c.interface,
            t: r[0],
            lat_accel: r[1],
        })
    }))?;

    let files: Vec<(&str, Vec<u8>)> = vec![
        ("metrics.csv", metrics),
        ("table2.md", render_table2(report).into_bytes()),
        ("table3.md", render_table3(report).into_bytes()),
        ("fig4_boxplot.csv", fig4),
        ("fig5_trajectories.csv", fig5),
        ("fig6_lateral_accel.csv", fig6),
    ];
    for (name, bytes) in files {
        let path = out_dir.join(name);
        write(&path, &bytes)?;
        written.push(path);
    }

    let manifest = Manifest {
        master_seed: report.master_seed,
        config_hash: &report.config_hash,
        epoch: report.epoch,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        crate_version: env!("CARGO_PKG_VERSION"),
        trials: report.records.len(),
        failures: &report.failures,
        significance_targets: &report.targets,
        orderings: &report.orderings,
        files: written
            .iter()
            .filter_map(|p| p.strip_prefix(out_dir).ok())
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .collect(),
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    write(&path, &json)?;
    written.push(path);
    Ok(written)
}
