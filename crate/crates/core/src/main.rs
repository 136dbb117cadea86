use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use steer_sim::harness::{
    build_plan, condition, emit_outputs, latin_square, run_experiment, run_trial, Epoch, ExperimentConfig,
};
use steer_sim::metrics::compute_metrics;
use steer_sim::stats::{
    compare_groups, f_test, shapiro_wilk, t_test, wilcoxon_signed_rank, Sample, StatTestResult, TTestVariant,
};
use steer_sim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "steer-sim",
    version,
    about = "Shared-control evasive steering experiment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Response-time origin (overrides the config file).
    #[arg(long, value_enum)]
    epoch: Option<Epoch>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(epoch) = self.epoch {
            config.epoch = epoch;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    /// Shapiro–Wilk on both, then Wilcoxon or F + t.
    Compare,
    Shapiro,
    Wilcoxon,
    F,
    TEqual,
    TWelch,
    TPaired,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full 12-subject, 7-condition experiment and write all outputs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run one subject in one condition.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Condition number, 1–7.
        #[arg(long)]
        condition: u8,
        /// Subject number, 1-based.
        #[arg(long, default_value_t = 1)]
        subject: usize,
        /// Trace CSV destination; metrics only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a Latin square.
    Latin {
        #[arg(default_value_t = 6)]
        n: usize,
    },
    /// Compare two columns of a CSV file.
    Stats {
        /// CSV file with a header row.
        csv: PathBuf,
        /// First column name (default: first column).
        #[arg(long)]
        x: Option<String>,
        /// Second column name (default: second column).
        #[arg(long)]
        y: Option<String>,
        #[arg(long, value_enum, default_value = "compare")]
        test: TestKind,
        /// Significance level for `compare`.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Check a configuration file and print its hash.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Also print the effective configuration.
        #[arg(long)]
        show: bool,
    },
}

fn read_columns(path: &Path, x: Option<&str>, y: Option<&str>) -> Result<(Sample, Sample)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: Option<&str>, default: usize| -> Result<(usize, String)> {
        match name {
            Some(n) => headers
                .iter()
                .position(|h| h == n)
                .map(|i| (i, n.to_string()))
                .ok_or_else(|| Error::Config(format!("column `{n}` not found"))),
            None => headers
                .get(default)
                .map(|h| (default, h.to_string()))
                .ok_or_else(|| Error::Config(format!("CSV needs at least {} columns", default + 1))),
        }
    };
    let (ix, lx) = find(x, 0)?;
    let (iy, ly) = find(y, 1)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<Option<f64>> {
            let field = rec.get(i).unwrap_or("").trim();
            if field.is_empty() {
                return Ok(None);
            }
            field
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("row {}: `{field}` is not a number", line + 2)))
        };
        if let Some(v) = parse(ix)? {
            xs.push(v);
        }
        if let Some(v) = parse(iy)? {
            ys.push(v);
        }
    }
    Ok((Sample::new(lx, xs), Sample::new(ly, ys)))
}

fn print_json<T: serde::Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, out, jobs } => {
            let config = common.load()?;
            let started = Instant::now();
            let plan = build_plan(config.seed, &config)?;
            let run = run_experiment(&plan, &config, jobs)?;
            let files = emit_outputs(&run.report, &run.traces, &out)?;
            eprintln!(
                "{} trials in {:.2} s, {} files written to {}",
                run.records.len(),
                started.elapsed().as_secs_f64(),
                files.len(),
                out.display()
            );
            let t = &run.report.targets;
            eprintln!(
                "slip p-values: myo/takeover {:?}, myo/wheel {:?}, crosswalk {:?}",
                t.myo_vs_takeover_slip_p, t.myo_vs_wheel_slip_p, t.crosswalk_slip_p
            );
            for d in &t.deviations {
                eprintln!("note: {d}");
            }
            if let Some(f) = run.failures.first() {
                for f in &run.failures {
                    eprintln!("trial {} failed: {}", f.trial_id, f.error);
                }
                return Err(Error::Divergence {
                    time: f64::NAN,
                    reason: format!("{} trial(s) failed, first: {}", run.failures.len(), f.trial_id),
                    dump: Vec::new(),
                });
            }
            Ok(())
        }
        Command::Trial {
            common,
            condition: cid,
            subject,
            out,
        } => {
            let config = common.load()?;
            let cond = condition(cid)?;
            let plan = build_plan(config.seed, &config)?;
            let profile = subject
                .checked_sub(1)
                .and_then(|i| plan.subjects.get(i))
                .ok_or_else(|| Error::InvalidParameter {
                    field: "subject",
                    reason: format!("expected 1..={}, got {subject}", plan.subjects.len()),
                })?;
            let trace = run_trial(&cond, profile, &config)?;
            let epoch = match config.epoch {
                Epoch::Spawn => 0.0,
                Epoch::TrialStart => -trace.event_time,
            };
            print_json(&compute_metrics(&trace, epoch)?);
            if let Some(path) = out {
                std::fs::write(&path, trace.to_csv()?).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        }
        Command::Latin { n } => {
            for row in latin_square(n) {
                let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
                println!("{}", cells.join(" "));
            }
            Ok(())
        }
        Command::Stats { csv, x, y, test, alpha } => {
            let (xs, ys) = read_columns(&csv, x.as_deref(), y.as_deref())?;
            let result: StatTestResult = match test {
                TestKind::Compare => compare_groups(&xs, &ys, &steer_sim::stats::ComparisonPolicy { alpha })?,
                TestKind::Shapiro => {
                    let a = shapiro_wilk(&xs)?;
                    let b = shapiro_wilk(&ys)?;
                    print_json(&a);
                    b
                }
                TestKind::Wilcoxon => wilcoxon_signed_rank(&xs, &ys)?,
                TestKind::F => f_test(&xs, &ys)?,
                TestKind::TEqual => t_test(&xs, &ys, TTestVariant::EqualVar, false)?,
                TestKind::TWelch => t_test(&xs, &ys, TTestVariant::Welch, false)?,
                TestKind::TPaired => t_test(&xs, &ys, TTestVariant::EqualVar, true)?,
            };
            print_json(&result);
            Ok(())
        }
        Command::Validate { common, show } => {
            let config = common.load()?;
            if show {
                print!("{}", config.to_toml()?);
            }
            println!("ok sha256:{}", config.hash()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Divergence { dump, .. } = &e {
                for line in dump.iter().rev().take(5).rev() {
                    eprintln!("  {line}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
