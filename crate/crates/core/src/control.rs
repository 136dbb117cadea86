//! Shared-control steering law: two-point preview errors and the PI-PD
//! column torque
//!
//! `T = a1·e_y + a2·∫e_y dt + a3·e_θ + a4·ė_θ`, saturated at `torque_limit`.
//!
//! Sign conventions: `e_y` is positive when the near point is left of the
//! target path, `e_θ` is positive when the vehicle points left of the path's
//! far-point heading, and the torque is positive clockwise. With positive
//! gains a vehicle drifting left therefore receives rightward torque.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::scenario::AvoidancePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Lateral error gain, N·m/m.
    pub a1: f64,
    /// Integrated lateral error gain, N·m/(m·s).
    pub a2: f64,
    /// Heading error gain, N·m/rad.
    pub a3: f64,
    /// Heading error rate gain, N·m·s/rad.
    pub a4: f64,
    /// Output saturation, N·m.
    pub torque_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            a1: 0.19,
            a2: 0.019,
            a3: 3.8,
            a4: 0.19,
            torque_limit: 5.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("a1", self.a1), ("a2", self.a2), ("a3", self.a3), ("a4", self.a4)] {
            ensure_finite(field, v)?;
        }
        ensure_positive("torque_limit", self.torque_limit)
    }

    /// Every gain multiplied by `factor`; the limit is replaced by `limit`.
    pub fn scaled(&self, factor: f64, limit: f64) -> Self {
        Self {
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            a3: self.a3 * factor,
            a4: self.a4 * factor,
            torque_limit: limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreviewConfig {
    /// m ahead of the CG
    pub near_distance: f64,
    /// m ahead of the CG
    pub far_distance: f64,
}

impl Default for PreviewConfig {
    fn default() -> Self {
        Self {
            near_distance: 6.0,
            far_distance: 20.0,
        }
    }
}

impl PreviewConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("near_distance", self.near_distance)?;
        ensure_positive("far_distance", self.far_distance)?;
        if self.near_distance >= self.far_distance {
            return Err(Error::InvalidParameter {
                field: "near_distance",
                reason: format!(
                    "must be below far_distance ({} >= {})",
                    self.near_distance, self.far_distance
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PreviewErrors {
    /// m, positive when the near point is left of the target
    pub e_y_near: f64,
    /// rad, vehicle yaw minus target heading at the far point
    pub e_theta_far: f64,
    /// rad/s
    pub e_theta_far_rate: f64,
}

impl PreviewErrors {
    /// Fills in `ė_θ` by backward difference against the previous step.
    /// The first step after construction or reset uses 0.
    pub fn with_rate(mut self, cstate: &ControllerState, dt: f64) -> Self {
        self.e_theta_far_rate = match cstate.prev_e_theta_far {
            Some(prev) => (self.e_theta_far - prev) / dt,
            None => 0.0,
        };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    /// m·s
    pub integral_e_y: f64,
    /// rad; `None` until the first torque evaluation
    pub prev_e_theta_far: Option<f64>,
}

/// Clears the integral and the derivative memory.
pub fn reset(_cstate: &ControllerState) -> ControllerState {
    ControllerState::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryShape {
    /// Constant lateral offset, zero heading.
    Straight {
        offset: f64,
    },
    LaneChange(AvoidancePath),
}

/// Target lateral offset and heading as functions of road station, valid on
/// `[domain_start, domain_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTrajectory {
    pub shape: TrajectoryShape,
    pub domain_start: f64,
    pub domain_end: f64,
}

impl TargetTrajectory {
    pub fn straight(offset: f64, domain_start: f64, domain_end: f64) -> Self {
        Self {
            shape: TrajectoryShape::Straight { offset },
            domain_start,
            domain_end,
        }
    }

    pub fn lane_change(path: AvoidancePath, domain_start: f64, domain_end: f64) -> Self {
        Self {
            shape: TrajectoryShape::LaneChange(path),
            domain_start,
            domain_end,
        }
    }

    fn check(&self, station: f64) -> Result<()> {
        ensure_finite("station", station)?;
        if station < self.domain_start || station > self.domain_end {
            return Err(Error::OutOfDomain {
                station,
                start: self.domain_start,
                end: self.domain_end,
            });
        }
        Ok(())
    }

    pub fn offset(&self, station: f64) -> Result<f64> {
        self.check(station)?;
        Ok(match self.shape {
            TrajectoryShape::Straight { offset } => offset,
            TrajectoryShape::LaneChange(p) => p.offset(station),
        })
    }

    pub fn heading(&self, station: f64) -> Result<f64> {
        self.check(station)?;
        Ok(match self.shape {
            TrajectoryShape::Straight { .. } => 0.0,
            TrajectoryShape::LaneChange(p) => p.heading(station),
        })
    }
}

/// Near-point lateral error and far-point heading error. The rate field is
/// left at 0; see [`PreviewErrors::with_rate`].
pub fn preview_errors(state: &VehicleState, traj: &TargetTrajectory, preview: &PreviewConfig) -> Result<PreviewErrors> {
    let (s, c) = state.yaw.sin_cos();
    let near_x = state.x + preview.near_distance * c;
    let near_y = state.y + preview.near_distance * s;
    let far_x = state.x + preview.far_distance * c;
    let e_y_near = near_y - traj.offset(near_x)?;
    let e_theta_far = state.yaw - traj.heading(far_x)?;
    ensure_finite("e_y_near", e_y_near)?;
    ensure_finite("e_theta_far", e_theta_far)?;
    Ok(PreviewErrors {
        e_y_near,
        e_theta_far,
        e_theta_far_rate: 0.0,
    })
}

/// Unsaturated control law for a given integral value.
pub fn raw_torque(errors: &PreviewErrors, integral: f64, gains: &ControllerGains) -> f64 {
    gains.a1 * errors.e_y_near
        + gains.a2 * integral
        + gains.a3 * errors.e_theta_far
        + gains.a4 * errors.e_theta_far_rate
}

/// One evaluation of the saturated PI-PD law.
///
/// The integral is advanced by `e_y·dt` before use, except when the output
/// is saturated and the new error would push it further into saturation; in
/// that case the stored integral is frozen (conditional integration).
pub fn controller_torque(
    errors: &PreviewErrors,
    cstate: &ControllerState,
    gains: &ControllerGains,
    dt: f64,
) -> Result<(f64, ControllerState)> {
    ensure_positive("dt", dt)?;
    ensure_finite("e_y_near", errors.e_y_near)?;
    ensure_finite("e_theta_far", errors.e_theta_far)?;
    ensure_finite("e_theta_far_rate", errors.e_theta_far_rate)?;

    let limit = gains.torque_limit;
    let candidate = cstate.integral_e_y + errors.e_y_near * dt;
    let raw = raw_torque(errors, candidate, gains);
    let deepening = raw.abs() > limit && (gains.a2 * errors.e_y_near * raw) > 0.0;
    let (integral, raw) = if deepening {
        (cstate.integral_e_y, raw_torque(errors, cstate.integral_e_y, gains))
    } else {
        (candidate, raw)
    };
    let torque = raw.clamp(-limit, limit);
    ensure_finite("torque", torque)?;
    Ok((
        torque,
        ControllerState {
            integral_e_y: integral,
            prev_e_theta_far: Some(errors.e_theta_far),
        },
    ))
}

/// Gains, preview geometry and running state bundled for closed-loop use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub gains: ControllerGains,
    pub preview: PreviewConfig,
    pub state: ControllerState,
}

impl Controller {
    pub fn new(gains: ControllerGains, preview: PreviewConfig) -> Self {
        Self {
            gains,
            preview,
            state: ControllerState::default(),
        }
    }

    pub fn reset(&mut self) {
        self.state = reset(&self.state);
    }

    /// Preview errors, torque and state update for one step.
    pub fn torque(&mut self, vehicle: &VehicleState, traj: &TargetTrajectory, dt: f64) -> Result<f64> {
        let errors = preview_errors(vehicle, traj, &self.preview)?.with_rate(&self.state, dt);
        let (torque, next) = controller_torque(&errors, &self.state, &self.gains, dt)?;
        self.state = next;
        Ok(torque)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step_vehicle, VehicleParams, DEFAULT_DT};
    use proptest::prelude::*;

    const V: f64 = 30.0 / 3.6;

    fn road() -> TargetTrajectory {
        TargetTrajectory::straight(0.0, -100.0, 1000.0)
    }

    fn errs(e_y: f64, e_th: f64, rate: f64) -> PreviewErrors {
        PreviewErrors {
            e_y_near: e_y,
            e_theta_far: e_th,
            e_theta_far_rate: rate,
        }
    }

    #[test]
    fn on_path_errors_are_zero() {
        let s = VehicleState::cruising(10.0, 0.0, V);
        let e = preview_errors(&s, &road(), &PreviewConfig::default()).unwrap();
        assert_eq!(e, PreviewErrors::default());
    }

    #[test]
    fn left_offset_gives_positive_lateral_error() {
        let s = VehicleState::cruising(10.0, 1.0, V);
        let e = preview_errors(&s, &road(), &PreviewConfig::default()).unwrap();
        assert_eq!(e.e_y_near, 1.0);
        assert_eq!(e.e_theta_far, 0.0);
    }

    #[test]
    fn clockwise_yaw_errors() {
        let phi = 0.02;
        let mut s = VehicleState::cruising(10.0, 0.0, V);
        s.yaw = -phi;
        let p = PreviewConfig::default();
        let e = preview_errors(&s, &road(), &p).unwrap();
        assert!((e.e_y_near + p.near_distance * phi.sin()).abs() < 1e-15);
        assert_eq!(e.e_theta_far, -phi);
    }

    #[test]
    fn preview_beyond_domain_names_station() {
        let traj = TargetTrajectory::straight(0.0, 0.0, 50.0);
        let s = VehicleState::cruising(40.0, 0.0, V);
        match preview_errors(&s, &traj, &PreviewConfig::default()) {
            Err(Error::OutOfDomain { station, .. }) => assert_eq!(station, 60.0),
            other => panic!("expected out-of-domain, got {other:?}"),
        }
    }

    #[test]
    fn rate_is_backward_difference_and_zero_first() {
        let mut c = ControllerState::default();
        let e = errs(0.0, 0.01, 0.0).with_rate(&c, 0.1);
        assert_eq!(e.e_theta_far_rate, 0.0);
        c.prev_e_theta_far = Some(0.005);
        let e = errs(0.0, 0.01, 0.0).with_rate(&c, 0.1);
        assert!((e.e_theta_far_rate - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_errors_zero_torque() {
        let (t, _) = controller_torque(
            &PreviewErrors::default(),
            &ControllerState::default(),
            &ControllerGains::default(),
            DEFAULT_DT,
        )
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn unit_lateral_error_gives_a1() {
        let (t, _) = controller_torque(
            &errs(1.0, 0.0, 0.0),
            &ControllerState::default(),
            &ControllerGains::default(),
            1e-300,
        )
        .unwrap();
        assert_eq!(t, 0.19);
    }

    #[test]
    fn large_errors_clamp_at_limit() {
        let g = ControllerGains::default();
        let e = errs(10.0, 10.0, 10.0);
        assert!((raw_torque(&e, 10.0, &g) - 41.99).abs() < 1e-12);
        let c = ControllerState {
            integral_e_y: 10.0,
            prev_e_theta_far: None,
        };
        let (t, _) = controller_torque(&e, &c, &g, 1e-300).unwrap();
        assert_eq!(t, 5.0);
        let (t, _) = controller_torque(&errs(-10.0, -10.0, -10.0), &c, &g, 1e-300).unwrap();
        assert_eq!(t, -5.0);
    }

    #[test]
    fn reset_clears_and_is_idempotent() {
        let c = ControllerState {
            integral_e_y: 3.0,
            prev_e_theta_far: Some(0.4),
        };
        let once = reset(&c);
        assert_eq!(once.integral_e_y, 0.0);
        assert_eq!(once, reset(&once));
        let (t, _) = controller_torque(
            &PreviewErrors::default(),
            &once,
            &ControllerGains::default(),
            DEFAULT_DT,
        )
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn integral_freezes_in_saturation_and_recovers_in_one_step() {
        let g = ControllerGains::default();
        let mut c = ControllerState::default();
        // deep saturation for 10 s of simulated time
        for _ in 0..1200 {
            let (t, next) = controller_torque(&errs(40.0, 0.0, 0.0), &c, &g, DEFAULT_DT).unwrap();
            assert_eq!(t, 5.0);
            c = next;
        }
        assert!(c.integral_e_y <= 40.0 * DEFAULT_DT * 10.0);
        // one small reversed error leaves saturation immediately
        let (t, _) = controller_torque(&errs(-1.0, 0.0, 0.0), &c, &g, DEFAULT_DT).unwrap();
        assert!(t.abs() < 5.0, "torque {t}");
    }

    #[test]
    fn closed_loop_reduces_left_offset() {
        let params = VehicleParams::default();
        let mut ctrl = Controller::new(ControllerGains::default(), PreviewConfig::default());
        let mut s = VehicleState::cruising(0.0, 0.5, V);
        for _ in 0..120 {
            let t = ctrl.torque(&s, &road(), DEFAULT_DT).unwrap();
            s = step_vehicle(&s, &params, t, 0.0, DEFAULT_DT).unwrap();
        }
        assert!(s.y.abs() < 0.5, "y after 1 s: {}", s.y);
        for _ in 0..(120 * 14) {
            let t = ctrl.torque(&s, &road(), DEFAULT_DT).unwrap();
            s = step_vehicle(&s, &params, t, 0.0, DEFAULT_DT).unwrap();
        }
        assert!(s.y.abs() < 0.05, "y after 15 s: {}", s.y);
    }

    proptest! {
        #[test]
        fn torque_never_exceeds_limit(
            e_y in -100.0..100.0f64, e_th in -3.0..3.0f64, rate in -50.0..50.0f64,
            integral in -100.0..100.0f64, limit in 0.1..20.0f64,
        ) {
            let g = ControllerGains { torque_limit: limit, ..ControllerGains::default() };
            let c = ControllerState { integral_e_y: integral, prev_e_theta_far: None };
            let (t, _) = controller_torque(&errs(e_y, e_th, rate), &c, &g, DEFAULT_DT).unwrap();
            prop_assert!(t.abs() <= limit);
        }

        #[test]
        fn linear_below_saturation(
            e_y in -1.0..1.0f64, e_th in -0.1..0.1f64, rate in -0.1..0.1f64, k in 0.1..2.0f64,
        ) {
            let g = ControllerGains::default();
            let c = ControllerState::default();
            let (t1, _) = controller_torque(&errs(e_y, e_th, rate), &c, &g, DEFAULT_DT).unwrap();
            let (tk, _) = controller_torque(&errs(k * e_y, k * e_th, k * rate), &c, &g, DEFAULT_DT).unwrap();
            prop_assert!((tk - k * t1).abs() <= 1e-12);
        }

        #[test]
        fn memoryless_without_integral_gain(
            history in proptest::collection::vec((-5.0..5.0f64, -0.5..0.5f64), 1..20),
            e_y in -5.0..5.0f64, e_th in -0.5..0.5f64,
        ) {
            let g = ControllerGains { a2: 0.0, ..ControllerGains::default() };
            let mut c = ControllerState::default();
            for (hy, hth) in history {
                c = controller_torque(&errs(hy, hth, 0.0), &c, &g, DEFAULT_DT).unwrap().1;
            }
            let (with_history, _) = controller_torque(&errs(e_y, e_th, 0.0), &c, &g, DEFAULT_DT).unwrap();
            let (fresh, _) = controller_torque(&errs(e_y, e_th, 0.0), &ControllerState::default(), &g, DEFAULT_DT).unwrap();
            prop_assert_eq!(with_history, fresh);
        }
    }
}
