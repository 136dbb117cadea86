//! Planar vehicle model: a linear two-degree-of-freedom bicycle model driven
//! through a torque-controlled steering column.
//!
//! Frames and signs:
//! * World pose is ISO-style: `x` along the road, `y` to the left, `yaw`
//!   counter-clockwise. Body velocities `vx`, `vy` and `yaw_rate` follow the
//!   same convention, so a right turn has a negative yaw rate and a negative
//!   lateral acceleration.
//! * Steering-system quantities (`swa`, `swa_rate`, every column torque) are
//!   positive clockwise, i.e. a positive steering-wheel angle turns the car to
//!   the right. The road-wheel angle in the chassis frame is therefore
//!   `-swa / steering_ratio`.
//!
//! Longitudinal speed is held constant (cruise control).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Simulation step matching the 120 Hz measurement grid.
pub const DEFAULT_DT: f64 = 1.0 / 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// m
    pub dist_cg_front_axle: f64,
    /// m
    pub dist_cg_rear_axle: f64,
    /// N/rad
    pub cornering_stiffness_front: f64,
    /// N/rad
    pub cornering_stiffness_rear: f64,
    /// Steering-wheel angle per road-wheel angle.
    pub steering_ratio: f64,
    /// kg·m²
    pub column_inertia: f64,
    /// N·m·s/rad
    pub column_damping: f64,
    /// Centering torque gradient of the column, N·m/rad. Zero gives a free
    /// (purely inertial and viscous) column.
    pub column_stiffness: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            dist_cg_front_axle: 1.1,
            dist_cg_rear_axle: 1.6,
            cornering_stiffness_front: 80_000.0,
            cornering_stiffness_rear: 80_000.0,
            steering_ratio: 16.0,
            column_inertia: 0.05,
            column_damping: 0.5,
            column_stiffness: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mass", self.mass)?;
        ensure_positive("yaw_inertia", self.yaw_inertia)?;
        ensure_positive("dist_cg_front_axle", self.dist_cg_front_axle)?;
        ensure_positive("dist_cg_rear_axle", self.dist_cg_rear_axle)?;
        ensure_positive("cornering_stiffness_front", self.cornering_stiffness_front)?;
        ensure_positive("cornering_stiffness_rear", self.cornering_stiffness_rear)?;
        ensure_positive("column_inertia", self.column_inertia)?;
        ensure_positive("column_damping", self.column_damping)?;
        if !(self.steering_ratio.is_finite() && self.steering_ratio >= 1.0) {
            return Err(Error::InvalidParameter {
                field: "steering_ratio",
                reason: format!("must be >= 1, got {}", self.steering_ratio),
            });
        }
        if !(self.column_stiffness.is_finite() && self.column_stiffness >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "column_stiffness",
                reason: format!("must be >= 0, got {}", self.column_stiffness),
            });
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.dist_cg_front_axle + self.dist_cg_rear_axle
    }

    /// Understeer gradient K_us in rad per (m/s²).
    pub fn understeer_gradient(&self) -> f64 {
        self.mass / self.wheelbase()
            * (self.dist_cg_rear_axle / self.cornering_stiffness_front
                - self.dist_cg_front_axle / self.cornering_stiffness_rear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    /// Steering-wheel angle, rad, positive clockwise (rightward).
    pub swa: f64,
    pub swa_rate: f64,
}

impl VehicleState {
    /// Straight-ahead cruise at `speed` from the given position.
    pub fn cruising(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            vx: speed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("x", self.x)?;
        ensure_finite("y", self.y)?;
        ensure_finite("yaw", self.yaw)?;
        ensure_finite("vx", self.vx)?;
        ensure_finite("vy", self.vy)?;
        ensure_finite("yaw_rate", self.yaw_rate)?;
        ensure_finite("swa", self.swa)?;
        ensure_finite("swa_rate", self.swa_rate)?;
        if self.vx <= 0.0 {
            return Err(Error::NonPositiveSpeed { vx: self.vx });
        }
        Ok(())
    }

    /// Road-wheel angle in the chassis frame (positive left).
    pub fn road_wheel_angle(&self, params: &VehicleParams) -> f64 {
        -self.swa / params.steering_ratio
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.x,
            self.y,
            self.yaw,
            self.vy,
            self.yaw_rate,
            self.swa,
            self.swa_rate,
        ]
    }

    fn from_array(vx: f64, s: [f64; 7]) -> Self {
        Self {
            x: s[0],
            y: s[1],
            yaw: s[2],
            vx,
            vy: s[3],
            yaw_rate: s[4],
            swa: s[5],
            swa_rate: s[6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub step_index: u64,
    pub dt: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            step_index: 0,
            dt: DEFAULT_DT,
        }
    }
}

impl SimClock {
    pub fn new(dt: f64) -> Result<Self> {
        ensure_positive("dt", dt)?;
        Ok(Self { step_index: 0, dt })
    }

    /// Time of the current step, computed from the index so that grids never drift.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn tick(&mut self) {
        self.step_index += 1;
    }
}

/// Time derivative of the integrated states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub x_dot: f64,
    pub y_dot: f64,
    pub yaw_dot: f64,
    pub vy_dot: f64,
    pub yaw_rate_dot: f64,
    pub swa_dot: f64,
    pub swa_rate_dot: f64,
}

fn rhs(vx: f64, s: &[f64; 7], p: &VehicleParams, column_torque: f64) -> [f64; 7] {
    let [_, _, yaw, vy, r, swa, swa_rate] = *s;
    let delta = -swa / p.steering_ratio;
    let lf = p.dist_cg_front_axle;
    let lr = p.dist_cg_rear_axle;
    let alpha_f = delta - (vy + lf * r) / vx;
    let alpha_r = -(vy - lr * r) / vx;
    let fy_f = p.cornering_stiffness_front * alpha_f;
    let fy_r = p.cornering_stiffness_rear * alpha_r;
    let (sin_yaw, cos_yaw) = yaw.sin_cos();
    [
        vx * cos_yaw - vy * sin_yaw,
        vx * sin_yaw + vy * cos_yaw,
        r,
        (fy_f + fy_r) / p.mass - vx * r,
        (lf * fy_f - lr * fy_r) / p.yaw_inertia,
        swa_rate,
        (column_torque - p.column_damping * swa_rate - p.column_stiffness * swa) / p.column_inertia,
    ]
}

/// Evaluates the state derivative for a given total column torque.
pub fn derivative(state: &VehicleState, params: &VehicleParams, column_torque: f64) -> StateDerivative {
    let d = rhs(state.vx, &state.to_array(), params, column_torque);
    StateDerivative {
        x_dot: d[0],
        y_dot: d[1],
        yaw_dot: d[2],
        vy_dot: d[3],
        yaw_rate_dot: d[4],
        swa_dot: d[5],
        swa_rate_dot: d[6],
    }
}

/// Advances the coupled column and bicycle model by one classical RK4 step.
///
/// Assist and driver torques act on the same column and are summed; both are
/// positive clockwise.
pub fn step_vehicle(
    state: &VehicleState,
    params: &VehicleParams,
    assist_torque: f64,
    driver_torque: f64,
    dt: f64,
) -> Result<VehicleState> {
    state.validate()?;
    ensure_finite("assist_torque", assist_torque)?;
    ensure_finite("driver_torque", driver_torque)?;
    ensure_positive("dt", dt)?;

    let torque = assist_torque + driver_torque;
    let vx = state.vx;
    let s0 = state.to_array();
    let add = |a: &[f64; 7], k: &[f64; 7], h: f64| -> [f64; 7] {
        let mut out = *a;
        for (o, d) in out.iter_mut().zip(k) {
            *o += h * d;
        }
        out
    };

    let k1 = rhs(vx, &s0, params, torque);
    let k2 = rhs(vx, &add(&s0, &k1, dt / 2.0), params, torque);
    let k3 = rhs(vx, &add(&s0, &k2, dt / 2.0), params, torque);
    let k4 = rhs(vx, &add(&s0, &k3, dt), params, torque);

    let mut next = s0;
    for i in 0..7 {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = VehicleState::from_array(vx, next);
    next.validate()?;
    Ok(next)
}

/// Vehicle slip angle at the centre of gravity, in degrees.
pub fn slip_angle(state: &VehicleState) -> Result<f64> {
    ensure_finite("vy", state.vy)?;
    ensure_finite("vx", state.vx)?;
    if state.vx <= 0.0 {
        return Err(Error::NonPositiveSpeed { vx: state.vx });
    }
    Ok((state.vy / state.vx).atan().to_degrees())
}

/// Body-frame lateral acceleration `v̇y + vx·r` (negative in a right turn).
pub fn lateral_acceleration(state: &VehicleState, vy_dot: f64, yaw_rate: f64) -> Result<f64> {
    ensure_finite("vx", state.vx)?;
    ensure_finite("vy_dot", vy_dot)?;
    ensure_finite("yaw_rate", yaw_rate)?;
    Ok(vy_dot + state.vx * yaw_rate)
}

/// Closed-form steady-state yaw rate of the linear bicycle for a road-wheel
/// angle `delta` (rad, positive left).
pub fn steady_state_yaw_rate(params: &VehicleParams, vx: f64, delta: f64) -> f64 {
    vx * delta / (params.wheelbase() + params.understeer_gradient() * vx * vx)
}

#[cfg(test)]
mod tests {
    use super::*;

    const V: f64 = 30.0 / 3.6;

    fn free_column() -> VehicleParams {
        VehicleParams {
            column_stiffness: 0.0,
            ..VehicleParams::default()
        }
    }

    #[test]
    fn straight_line_is_a_fixed_point() {
        let p = VehicleParams::default();
        let mut s = VehicleState::cruising(0.0, 0.0, V);
        for _ in 0..1200 {
            s = step_vehicle(&s, &p, 0.0, 0.0, DEFAULT_DT).unwrap();
        }
        assert_eq!(s.vy, 0.0);
        assert_eq!(s.yaw_rate, 0.0);
        assert_eq!(s.swa, 0.0);
        assert_eq!(s.y, 0.0);
        assert!((s.x - V * 10.0).abs() < 1e-9);
    }

    #[test]
    fn column_step_response_matches_closed_form() {
        let p = free_column();
        let torque = 0.8;
        let (j, b) = (p.column_inertia, p.column_damping);
        let mut s = VehicleState::cruising(0.0, 0.0, V);
        let dt = DEFAULT_DT;
        for k in 1..=240 {
            s = step_vehicle(&s, &p, torque * 0.25, torque * 0.75, dt).unwrap();
            let t = k as f64 * dt;
            let decay = (-b * t / j).exp();
            let rate = torque / b * (1.0 - decay);
            let angle = torque / b * (t - j / b * (1.0 - decay));
            assert!((s.swa_rate - rate).abs() < 1e-6, "rate at {t}");
            assert!((s.swa - angle).abs() < 1e-6, "angle at {t}");
        }
    }

    #[test]
    fn held_wheel_converges_to_bicycle_steady_state() {
        let p = free_column();
        let swa = -0.4; // leftward
        let mut s = VehicleState {
            swa,
            ..VehicleState::cruising(0.0, 0.0, V)
        };
        for _ in 0..(120 * 20) {
            s = step_vehicle(&s, &p, 0.0, 0.0, DEFAULT_DT).unwrap();
        }
        assert_eq!(s.swa, swa);
        let expected = steady_state_yaw_rate(&p, V, swa.abs() / p.steering_ratio);
        assert!(expected > 0.0);
        assert!(((s.yaw_rate - expected) / expected).abs() < 1e-9);

        let d = derivative(&s, &p, 0.0);
        let ay = lateral_acceleration(&s, d.vy_dot, s.yaw_rate).unwrap();
        assert!(((ay - V * expected) / (V * expected)).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite_input_by_field() {
        let p = VehicleParams::default();
        let s = VehicleState {
            vy: f64::NAN,
            ..VehicleState::cruising(0.0, 0.0, V)
        };
        match step_vehicle(&s, &p, 0.0, 0.0, DEFAULT_DT) {
            Err(Error::NonFinite { field }) => assert_eq!(field, "vy"),
            other => panic!("unexpected {other:?}"),
        }
        let s = VehicleState::cruising(0.0, 0.0, V);
        assert!(matches!(
            step_vehicle(&s, &p, f64::INFINITY, 0.0, DEFAULT_DT),
            Err(Error::NonFinite { field: "assist_torque" })
        ));
    }

    #[test]
    fn slip_angle_examples() {
        let mut s = VehicleState::cruising(0.0, 0.0, 8.33);
        assert_eq!(slip_angle(&s).unwrap(), 0.0);
        s.vy = 8.33;
        assert!((slip_angle(&s).unwrap() - 45.0).abs() < 1e-12);
        s.vy = 0.5;
        // reference value from an independent calculator
        assert!((slip_angle(&s).unwrap() - 3.435_001_074_878_8).abs() < 1e-6);
        s.vy = -0.5;
        assert!((slip_angle(&s).unwrap() + 3.435_001_074_878_8).abs() < 1e-6);
        s.vx = 0.0;
        assert!(matches!(slip_angle(&s), Err(Error::NonPositiveSpeed { .. })));
    }

    #[test]
    fn lateral_acceleration_examples() {
        let s = VehicleState::cruising(0.0, 0.0, 8.33);
        assert_eq!(lateral_acceleration(&s, 0.0, 0.0).unwrap(), 0.0);
        assert!((lateral_acceleration(&s, 0.0, 0.1).unwrap() - 0.833).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        let mut p = VehicleParams::default();
        assert!(p.validate().is_ok());
        p.steering_ratio = 0.5;
        assert!(p.validate().is_err());
        p = VehicleParams {
            mass: 0.0,
            ..VehicleParams::default()
        };
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { field: "mass", .. })
        ));
    }
}
