//! Experiment orchestration: the seven conditions, counterbalanced plans,
//! the closed-loop trial, the full 12-subject run and report files.

mod config;
mod latin;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{generate_profiles, trial_effort, Agent, Interface, SubjectProfile};
use crate::control::Controller;
use crate::dynamics::{derivative, lateral_acceleration, slip_angle, step_vehicle};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, TraceSample, TrialMetrics, TrialTrace};
use crate::scenario::{build_world, vehicle_pedestrian_distance};

pub use config::{Epoch, ExperimentConfig};
pub use latin::latin_square;
pub use report::{
    build_report, emit_outputs, Comparison, ExperimentReport, FiveNumber, GroupSummary, Parameter, Scenario,
    SignificanceTargets, Table2Row,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub condition_id: u8,
    pub interface: Interface,
    pub crosswalk: bool,
    pub pedestrian_present: bool,
}

/// The seven test conditions.
pub const CONDITIONS: [ConditionSpec; 7] = [
    ConditionSpec {
        condition_id: 1,
        interface: Interface::MyoArmband,
        crosswalk: true,
        pedestrian_present: true,
    },
    ConditionSpec {
        condition_id: 2,
        interface: Interface::MyoArmband,
        crosswalk: false,
        pedestrian_present: true,
    },
    ConditionSpec {
        condition_id: 3,
        interface: Interface::SteeringWheel,
        crosswalk: true,
        pedestrian_present: true,
    },
    ConditionSpec {
        condition_id: 4,
        interface: Interface::SteeringWheel,
        crosswalk: false,
        pedestrian_present: false,
    },
    ConditionSpec {
        condition_id: 5,
        interface: Interface::SteeringWheel,
        crosswalk: false,
        pedestrian_present: true,
    },
    ConditionSpec {
        condition_id: 6,
        interface: Interface::ManualTakeover,
        crosswalk: true,
        pedestrian_present: true,
    },
    ConditionSpec {
        condition_id: 7,
        interface: Interface::ManualTakeover,
        crosswalk: false,
        pedestrian_present: true,
    },
];

/// Conditions with a pedestrian, in the order the Latin square indexes them.
pub const AVOIDANCE_CONDITIONS: [u8; 6] = [1, 2, 3, 5, 6, 7];

/// The no-pedestrian condition and its fixed 1-based slot.
pub const FIXED_CONDITION: u8 = 4;
pub const FIXED_SLOT: usize = 4;

pub fn condition(id: u8) -> Result<ConditionSpec> {
    CONDITIONS
        .iter()
        .copied()
        .find(|c| c.condition_id == id)
        .ok_or_else(|| Error::InvalidParameter {
            field: "condition",
            reason: format!("expected 1..=7, got {id}"),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub master_seed: u64,
    pub subjects: Vec<SubjectProfile>,
    /// Per subject, the condition ids in the order driven.
    pub orders: Vec<Vec<u8>>,
}

/// Subjects from the config (or generated from `master_seed`); subject `i`
/// gets row `i mod 6` of the balanced 6×6 square over the avoidance
/// conditions, with condition 4 inserted in slot 4.
pub fn build_plan(master_seed: u64, config: &ExperimentConfig) -> Result<ExperimentPlan> {
    let subjects = if config.profiles.is_empty() {
        generate_profiles(master_seed, &config.agents)?
    } else {
        config.profiles.clone()
    };
    let square = latin_square(AVOIDANCE_CONDITIONS.len());
    let orders = (0..subjects.len())
        .map(|i| {
            let mut order: Vec<u8> = square[i % square.len()]
                .iter()
                .map(|&c| AVOIDANCE_CONDITIONS[c - 1])
                .collect();
            order.insert(FIXED_SLOT - 1, FIXED_CONDITION);
            order
        })
        .collect();
    Ok(ExperimentPlan {
        master_seed,
        subjects,
        orders,
    })
}

pub fn trial_id(profile: &SubjectProfile, condition_id: u8) -> String {
    format!("s{:02}_c{}", profile.subject_id + 1, condition_id)
}

/// Manual effort factor used for this subject and condition.
pub fn trial_effort_for(cond: &ConditionSpec, profile: &SubjectProfile, config: &ExperimentConfig) -> f64 {
    match cond.interface {
        Interface::MyoArmband => 1.0,
        _ => trial_effort(profile, cond.condition_id, config.agents.effort_jitter_sigma),
    }
}

fn csv_row(s: &TraceSample) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    // serialising plain numbers cannot fail
    let _ = w.serialize(s);
    String::from_utf8_lossy(&w.into_inner().unwrap_or_default())
        .trim_end()
        .to_string()
}

/// Closed-loop simulation of one subject in one condition.
///
/// Each step: pedestrian and visibility update, agent decision, assist
/// torque (when enabled), sample, vehicle step. With a pedestrian the run
/// ends once the vehicle's rear has passed the crossing line; samples with
/// the front short of it form the analysis window. Without a pedestrian it
/// ends at the road end.
pub fn run_trial(cond: &ConditionSpec, profile: &SubjectProfile, config: &ExperimentConfig) -> Result<TrialTrace> {
    config.validate()?;
    profile.validate()?;
    let dt = config.dt;
    let scenario = crate::scenario::ScenarioConfig {
        crosswalk: cond.crosswalk,
        pedestrian_present: cond.pedestrian_present,
        ..config.scenario.clone()
    };
    let mut world = build_world(&scenario, dt)?;
    let effort = trial_effort_for(cond, profile, config);
    let mut agent = Agent::new(
        cond.interface,
        *profile,
        &config.agents,
        effort,
        &config.gains,
        &config.preview,
        &world.scene,
    );
    let mut assist = Controller::new(config.gains, config.preview);

    let event_step = (scenario.pre_event_cruise / dt).round() as i64;
    let event_time = event_step as f64 * dt;
    let crossing = world.scene.crossing_station;
    let max_steps = ((scenario.road_length / scenario.vehicle_speed) / dt).ceil() as u64 + 1;

    let mut samples: Vec<TraceSample> = Vec::new();
    let mut analysis_end = None;
    let diverged = |time: f64, reason: String, samples: &[TraceSample]| Error::Divergence {
        time,
        reason,
        dump: samples.iter().map(csv_row).collect(),
    };

    for k in 0..max_steps {
        let time = k as f64 * dt;
        world.advance_to(time);
        let front = world.vehicle_front_station();
        match crossing {
            Some(xc) => {
                if front >= xc && analysis_end.is_none() {
                    analysis_end = Some(samples.len());
                }
                if world.vehicle_rear_station() > xc {
                    break;
                }
            }
            None => {
                if front >= scenario.road_length {
                    break;
                }
            }
        }

        let step_result = (|| -> Result<(TraceSample, f64, f64)> {
            let out = agent.step(&world, k, dt)?;
            if out.trajectory_switched {
                assist.reset();
            }
            let assist_torque = if out.assist_enabled {
                assist.torque(&world.vehicle, &out.target, dt)?
            } else {
                0.0
            };
            let v = &world.vehicle;
            let d = derivative(v, &config.vehicle, assist_torque + out.driver_torque);
            let sample = TraceSample {
                step: k,
                t: (k as i64 - event_step) as f64 * dt,
                time,
                x: v.x,
                y: v.y,
                yaw: v.yaw,
                vx: v.vx,
                vy: v.vy,
                yaw_rate: v.yaw_rate,
                slip_deg: slip_angle(v)?,
                lat_accel: lateral_acceleration(v, d.vy_dot, v.yaw_rate)?,
                swa_deg: v.swa.to_degrees(),
                assist_torque,
                driver_torque: out.driver_torque,
                ped_x: world.pedestrian_position.map(|p| p.0),
                ped_y: world.pedestrian_position.map(|p| p.1),
                ped_visible: world.pedestrian_visible,
                distance: vehicle_pedestrian_distance(&world),
                phase: out.phase,
                analysed: analysis_end.is_none(),
            };
            Ok((sample, assist_torque, out.driver_torque))
        })();
        let (sample, assist_torque, driver_torque) = match step_result {
            Ok(v) => v,
            // a preview point off the road only happens once the state has run away
            Err(e @ (Error::NonFinite { .. } | Error::NonPositiveSpeed { .. } | Error::OutOfDomain { .. })) => {
                return Err(diverged(time, e.to_string(), &samples))
            }
            Err(e) => return Err(e),
        };
        samples.push(sample);
        world.vehicle = step_vehicle(&world.vehicle, &config.vehicle, assist_torque, driver_torque, dt)
            .map_err(|e| diverged(time, e.to_string(), &samples))?;
        if world.vehicle.yaw.abs() >= std::f64::consts::FRAC_PI_2 {
            let reason = format!("yaw {:.3} rad left the linear-model range", world.vehicle.yaw);
            return Err(diverged(time + dt, reason, &samples));
        }
    }

    let analysis_end = analysis_end.unwrap_or(samples.len());
    if analysis_end == 0 {
        return Err(Error::Empty("trial produced no analysable samples"));
    }
    Ok(TrialTrace {
        trial_id: trial_id(profile, cond.condition_id),
        subject_id: profile.subject_id,
        condition_id: cond.condition_id,
        interface: cond.interface,
        crosswalk: cond.crosswalk,
        pedestrian_present: cond.pedestrian_present,
        dt,
        event_time,
        samples,
        analysis_end,
    })
}

/// One executed trial with its measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subject_id: usize,
    pub condition_id: u8,
    /// 1-based position in the subject's order.
    pub slot: usize,
    pub interface: Interface,
    pub crosswalk: bool,
    pub pedestrian_present: bool,
    pub effort: f64,
    pub metrics: TrialMetrics,
    pub full_pass_min_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_id: String,
    pub error: String,
    pub exit_code: i32,
}

/// Everything produced by running a plan.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub plan: ExperimentPlan,
    pub records: Vec<TrialRecord>,
    pub traces: Vec<TrialTrace>,
    pub failures: Vec<TrialFailure>,
    pub report: ExperimentReport,
}

/// Runs every (subject, condition) trial of the plan on `jobs` threads and
/// analyses the results. Output order follows the plan, whatever `jobs` is.
pub fn run_experiment(plan: &ExperimentPlan, config: &ExperimentConfig, jobs: usize) -> Result<ExperimentRun> {
    config.validate()?;
    if plan.subjects.is_empty() {
        return Err(Error::Empty("experiment plan has no subjects"));
    }
    let mut work = Vec::new();
    for (profile, order) in plan.subjects.iter().zip(&plan.orders) {
        for (slot, &cid) in order.iter().enumerate() {
            work.push((*profile, condition(cid)?, slot + 1));
        }
    }

    let run_one = |(profile, cond, slot): &(SubjectProfile, ConditionSpec, usize)| {
        let id = trial_id(profile, cond.condition_id);
        let result = run_trial(cond, profile, config).and_then(|trace| {
            let epoch = match config.epoch {
                Epoch::Spawn => 0.0,
                Epoch::TrialStart => -trace.event_time,
            };
            let metrics = compute_metrics(&trace, epoch)?;
            let record = TrialRecord {
                trial_id: id.clone(),
                subject_id: profile.subject_id,
                condition_id: cond.condition_id,
                slot: *slot,
                interface: cond.interface,
                crosswalk: cond.crosswalk,
                pedestrian_present: cond.pedestrian_present,
                effort: trial_effort_for(cond, profile, config),
                metrics,
                full_pass_min_distance: trace.full_pass_min_distance(),
            };
            Ok((record, trace))
        });
        result.map_err(|e| TrialFailure {
            trial_id: id,
            exit_code: e.exit_code(),
            error: e.to_string(),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| work.par_iter().map(run_one).collect());

    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((record, trace)) => {
                records.push(record);
                traces.push(trace);
            }
            Err(f) => failures.push(f),
        }
    }
    let report = build_report(plan, config, &records, &traces, &failures)?;
    Ok(ExperimentRun {
        plan: plan.clone(),
        records,
        traces,
        failures,
        report,
    })
}
