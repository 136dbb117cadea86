//! Per-trial measurements: slip-band filtering, average absolute slip,
//! minimum pedestrian distance, maximum steering-wheel angle, response time
//! and event-aligned averaging of lateral acceleration.

use serde::{Deserialize, Serialize};

use crate::agents::{Interface, Phase};
use crate::error::{Error, Result};

/// Slip samples strictly inside ±0.1° are discarded.
pub const SLIP_BAND_DEG: f64 = 0.1;

/// Rightward SWA that counts as a steering response, degrees.
pub const RESPONSE_THRESHOLD_DEG: f64 = 5.0;

/// One 120 Hz sample. Column order of the trace CSV follows field order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub step: u64,
    /// s since the pedestrian spawned (nominal spawn time without pedestrian)
    pub t: f64,
    /// s since trial start
    pub time: f64,
    pub x: f64,
    pub y: f64,
    /// rad
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    /// rad/s
    pub yaw_rate: f64,
    /// deg
    pub slip_deg: f64,
    /// m/s², negative when turning right
    pub lat_accel: f64,
    /// deg, positive clockwise (rightward)
    pub swa_deg: f64,
    /// N·m
    pub assist_torque: f64,
    /// N·m
    pub driver_torque: f64,
    pub ped_x: Option<f64>,
    pub ped_y: Option<f64>,
    pub ped_visible: bool,
    /// m from the vehicle footprint to the pedestrian
    pub distance: Option<f64>,
    pub phase: Phase,
    /// Inside the analysis window (vehicle front short of the pedestrian).
    pub analysed: bool,
}

/// Column names of the trace CSV.
pub const TRACE_COLUMNS: [&str; 20] = [
    "step",
    "t",
    "time",
    "x",
    "y",
    "yaw",
    "vx",
    "vy",
    "yaw_rate",
    "slip_deg",
    "lat_accel",
    "swa_deg",
    "assist_torque",
    "driver_torque",
    "ped_x",
    "ped_y",
    "ped_visible",
    "distance",
    "phase",
    "analysed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial_id: String,
    pub subject_id: usize,
    pub condition_id: u8,
    pub interface: Interface,
    pub crosswalk: bool,
    pub pedestrian_present: bool,
    pub dt: f64,
    /// Absolute time of the pedestrian spawn (t = 0).
    pub event_time: f64,
    pub samples: Vec<TraceSample>,
    /// Samples `[0, analysis_end)` form the analysis window.
    pub analysis_end: usize,
}

impl TrialTrace {
    /// The samples the metrics are computed from.
    pub fn analysed(&self) -> &[TraceSample] {
        &self.samples[..self.analysis_end.min(self.samples.len())]
    }

    /// Closest approach over the whole recorded pass, including samples
    /// after the analysis window.
    pub fn full_pass_min_distance(&self) -> Option<f64> {
        self.samples.iter().filter_map(|s| s.distance).reduce(f64::min)
    }

    /// Serialises the samples as CSV (header included).
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.samples {
            w.serialize(s)
                .map_err(|e| Error::Config(format!("trace serialisation: {e}")))?;
        }
        w.into_inner()
            .map_err(|e| Error::Config(format!("trace serialisation: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// deg; absent when no sample survives the slip band
    pub avg_abs_slip: Option<f64>,
    /// m; absent without a pedestrian
    pub min_distance: Option<f64>,
    /// deg
    pub max_swa: f64,
    /// s after the epoch; absent if the threshold is never reached
    pub response_time: Option<f64>,
    pub collided: bool,
}

/// Keeps the samples with β ≤ −0.1° or β ≥ 0.1°, in order.
pub fn filter_slip(series: &[f64]) -> Vec<f64> {
    series
        .iter()
        .copied()
        .filter(|b| *b <= -SLIP_BAND_DEG || *b >= SLIP_BAND_DEG)
        .collect()
}

/// Mean of |β| over retained samples.
pub fn avg_abs_slip(retained: &[f64]) -> Result<f64> {
    if retained.is_empty() {
        return Err(Error::Empty("undefined slip metric"));
    }
    Ok(retained.iter().map(|b| b.abs()).sum::<f64>() / retained.len() as f64)
}

/// First time `t ≥ epoch` at which the rightward SWA reaches `threshold`,
/// measured from the epoch.
pub fn response_time(times: &[f64], swa_deg: &[f64], threshold: f64, epoch: f64) -> Option<f64> {
    times
        .iter()
        .zip(swa_deg)
        .find(|(t, swa)| **t >= epoch && **swa >= threshold)
        .map(|(t, _)| t - epoch)
}

/// Largest |SWA|.
pub fn max_swa(swa_deg: &[f64]) -> Result<f64> {
    if swa_deg.is_empty() {
        return Err(Error::Empty("steering-wheel angle series"));
    }
    Ok(swa_deg.iter().fold(0.0, |m, s| f64::max(m, s.abs())))
}

/// Metrics over the analysis window of `trace`. `epoch` is the
/// response-time origin relative to the pedestrian spawn.
pub fn compute_metrics(trace: &TrialTrace, epoch: f64) -> Result<TrialMetrics> {
    let window = trace.analysed();
    let slip: Vec<f64> = window.iter().map(|s| s.slip_deg).collect();
    let swa: Vec<f64> = window.iter().map(|s| s.swa_deg).collect();
    let times: Vec<f64> = window.iter().map(|s| s.t).collect();
    let avg_abs_slip = avg_abs_slip(&filter_slip(&slip)).ok();
    let min_distance = window.iter().filter_map(|s| s.distance).reduce(f64::min);
    let response_time = if trace.pedestrian_present {
        response_time(&times, &swa, RESPONSE_THRESHOLD_DEG, epoch)
    } else {
        None
    };
    Ok(TrialMetrics {
        avg_abs_slip,
        min_distance,
        max_swa: max_swa(&swa)?,
        response_time,
        collided: min_distance == Some(0.0),
    })
}

/// Pointwise mean of `(t, value)` series on the intersection of their
/// grids. Times are matched by grid index `round(t / dt)`.
pub fn aligned_mean(series: &[Vec<(f64, f64)>], dt: f64) -> Result<Vec<(f64, f64)>> {
    if series.is_empty() {
        return Err(Error::Empty("no traces to align"));
    }
    let index = |t: f64| (t / dt).round() as i64;
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    for s in series {
        let (Some(first), Some(last)) = (s.first(), s.last()) else {
            return Ok(Vec::new());
        };
        lo = lo.max(index(first.0));
        hi = hi.min(index(last.0));
    }
    let mut out = Vec::new();
    for k in lo..=hi {
        let mut sum = 0.0;
        for s in series {
            let offset = (k - index(s[0].0)) as usize;
            sum += s[offset].1;
        }
        out.push((k as f64 * dt, sum / series.len() as f64));
    }
    Ok(out)
}

/// Mean lateral acceleration across traces, aligned at the pedestrian
/// spawn, over each trace's analysis window.
pub fn aligned_mean_lateral_accel(traces: &[&TrialTrace]) -> Result<Vec<(f64, f64)>> {
    let Some(first) = traces.first() else {
        return Err(Error::Empty("no traces to align"));
    };
    let series: Vec<Vec<(f64, f64)>> = traces
        .iter()
        .map(|tr| tr.analysed().iter().map(|s| (s.t, s.lat_accel)).collect())
        .collect();
    aligned_mean(&series, first.dt)
}
