//! Road world: a straight two-lane road, a parked car that hides the
//! pedestrian, and the pedestrian crossing event.
//!
//! The vehicle drives in the left lane, whose centre is `y = 0`. The right
//! lane centre is `y = -lane_width`. The pedestrian starts left of the road
//! behind the parked car, runs towards `-y` and stops for good at the left
//! lane centre.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{ensure_positive, Error, Result};

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    /// Whether the segment `a -> b` passes through the open interior.
    /// Touching an edge or a corner does not count.
    pub fn segment_hits_interior(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let Some((lo_x, hi_x)) = open_slab(a.0, b.0, self.x_min, self.x_max) else {
            return false;
        };
        let Some((lo_y, hi_y)) = open_slab(a.1, b.1, self.y_min, self.y_max) else {
            return false;
        };
        let lo = lo_x.max(lo_y);
        let hi = hi_x.min(hi_y);
        lo < hi && lo < 1.0 && hi > 0.0
    }
}

/// Parameter interval `(lo, hi)` where `p0 + t·(p1 - p0)` lies strictly
/// inside `(min, max)`.
fn open_slab(p0: f64, p1: f64, min: f64, max: f64) -> Option<(f64, f64)> {
    let d = p1 - p0;
    if d == 0.0 {
        return (p0 > min && p0 < max).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let t0 = (min - p0) / d;
    let t1 = (max - p0) / d;
    Some((t0.min(t1), t0.max(t1)))
}

/// Distance from a point to a rectangle of the given size centred on
/// `(cx, cy)` and rotated by `yaw`. Zero when the point is inside.
pub fn point_to_oriented_rect(point: (f64, f64), center: (f64, f64), yaw: f64, length: f64, width: f64) -> f64 {
    let (s, c) = yaw.sin_cos();
    let dx = point.0 - center.0;
    let dy = point.1 - center.1;
    let along = c * dx + s * dy;
    let across = -s * dx + c * dy;
    let ex = (along.abs() - length / 2.0).max(0.0);
    let ey = (across.abs() - width / 2.0).max(0.0);
    ex.hypot(ey)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// m
    pub lane_width: f64,
    /// m/s, held by cruise control
    pub vehicle_speed: f64,
    /// m/s
    pub pedestrian_speed: f64,
    /// Time-to-collision at the pedestrian spawn instant: gap from the
    /// vehicle front to the crossing line divided by the vehicle speed, s.
    pub ttc_at_event: f64,
    pub crosswalk: bool,
    pub pedestrian_present: bool,
    /// m
    pub road_length: f64,
    /// Footprint of the simulated car, m. The rectangle is centred on the CG.
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Footprint of the parked car, m.
    pub parked_length: f64,
    pub parked_width: f64,
    /// Longitudinal gap between the parked car's front and the crossing line, m.
    pub parked_gap: f64,
    /// Lateral gap between the road edge and the parked car, m.
    pub parked_curb_gap: f64,
    /// Lateral distance from the left lane centre to the pedestrian at spawn, m.
    pub pedestrian_start_offset: f64,
    /// Length of the automated lane-change transition, m.
    pub avoidance_length: f64,
    /// Straight cruise before the pedestrian spawns, s.
    pub pre_event_cruise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            vehicle_speed: 30.0 / 3.6,
            pedestrian_speed: 8.34,
            ttc_at_event: 3.6,
            crosswalk: false,
            pedestrian_present: true,
            road_length: 120.0,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            parked_length: 4.5,
            parked_width: 1.8,
            parked_gap: 0.5,
            parked_curb_gap: 0.1,
            pedestrian_start_offset: 2.0,
            avoidance_length: 25.0,
            pre_event_cruise: 5.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lane_width", self.lane_width)?;
        ensure_positive("vehicle_speed", self.vehicle_speed)?;
        ensure_positive("pedestrian_speed", self.pedestrian_speed)?;
        ensure_positive("ttc_at_event", self.ttc_at_event)?;
        ensure_positive("road_length", self.road_length)?;
        ensure_positive("vehicle_length", self.vehicle_length)?;
        ensure_positive("vehicle_width", self.vehicle_width)?;
        ensure_positive("parked_length", self.parked_length)?;
        ensure_positive("parked_width", self.parked_width)?;
        ensure_positive("pedestrian_start_offset", self.pedestrian_start_offset)?;
        ensure_positive("avoidance_length", self.avoidance_length)?;
        if self.pre_event_cruise.is_nan() || self.pre_event_cruise < 0.0 {
            return Err(Error::Config("pre_event_cruise must be >= 0".into()));
        }
        if !(self.parked_gap >= 0.0 && self.parked_curb_gap >= 0.0) {
            return Err(Error::Config("parked car gaps must be >= 0".into()));
        }
        if self.lane_width <= self.vehicle_width {
            return Err(Error::Config(format!(
                "lane width {} m must exceed vehicle width {} m",
                self.lane_width, self.vehicle_width
            )));
        }
        Ok(())
    }
}

/// Quintic lateral transition between two offsets. Offset, slope and
/// curvature are continuous at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidancePath {
    pub start_station: f64,
    pub length: f64,
    pub from_offset: f64,
    pub to_offset: f64,
}

impl AvoidancePath {
    /// Left lane centre to right lane centre.
    pub fn lane_change(start_station: f64, length: f64, lane_width: f64) -> Self {
        Self {
            start_station,
            length,
            from_offset: 0.0,
            to_offset: -lane_width,
        }
    }

    fn phase(&self, station: f64) -> f64 {
        ((station - self.start_station) / self.length).clamp(0.0, 1.0)
    }

    fn inside(&self, station: f64) -> bool {
        station > self.start_station && station < self.start_station + self.length
    }

    pub fn offset(&self, station: f64) -> f64 {
        let t = self.phase(station);
        let blend = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        self.from_offset + (self.to_offset - self.from_offset) * blend
    }

    /// d(offset)/d(station)
    pub fn slope(&self, station: f64) -> f64 {
        if !self.inside(station) {
            return 0.0;
        }
        let t = self.phase(station);
        let d_blend = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        (self.to_offset - self.from_offset) * d_blend / self.length
    }

    /// d²(offset)/d(station)²
    pub fn curvature(&self, station: f64) -> f64 {
        if !self.inside(station) {
            return 0.0;
        }
        let t = self.phase(station);
        let dd_blend = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (self.to_offset - self.from_offset) * dd_blend / (self.length * self.length)
    }

    /// Path heading in the world frame (positive left).
    pub fn heading(&self, station: f64) -> f64 {
        self.slope(station).atan()
    }

    pub fn end_station(&self) -> f64 {
        self.start_station + self.length
    }
}

/// Static layout derived from a [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub lane_width: f64,
    pub road_length: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub crosswalk: bool,
    pub avoidance_length: f64,
    /// Station of the pedestrian's crossing line, when a pedestrian exists.
    pub crossing_station: Option<f64>,
    pub parked_vehicle: Option<Rect>,
    pub pedestrian_start_y: f64,
    pub pedestrian_stop_y: f64,
    pub pedestrian_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub vehicle: VehicleState,
    pub pedestrian_position: Option<(f64, f64)>,
    pub pedestrian_visible: bool,
    /// Pedestrian spawn instant; analysis time zero.
    pub event_time: Option<f64>,
    pub scene: Scene,
}

/// Lays out the road and schedules the crossing event on the `dt` grid.
pub fn build_world(config: &ScenarioConfig, dt: f64) -> Result<WorldState> {
    config.validate()?;
    ensure_positive("dt", dt)?;
    let vehicle = VehicleState::cruising(0.0, 0.0, config.vehicle_speed);
    let half_length = config.vehicle_length / 2.0;

    let mut scene = Scene {
        lane_width: config.lane_width,
        road_length: config.road_length,
        vehicle_length: config.vehicle_length,
        vehicle_width: config.vehicle_width,
        crosswalk: config.crosswalk,
        avoidance_length: config.avoidance_length,
        crossing_station: None,
        parked_vehicle: None,
        pedestrian_start_y: config.pedestrian_start_offset,
        pedestrian_stop_y: 0.0,
        pedestrian_speed: config.pedestrian_speed,
    };

    let mut event_time = None;
    if config.pedestrian_present {
        let event_step = (config.pre_event_cruise / dt).round();
        let t_event = event_step * dt;
        let front_at_event = vehicle.x + half_length + config.vehicle_speed * t_event;
        let crossing = front_at_event + config.vehicle_speed * config.ttc_at_event;
        let parked_front = crossing - config.parked_gap;
        let parked_rear = parked_front - config.parked_length;
        if crossing > config.road_length || parked_rear < 0.0 {
            return Err(Error::Config(format!(
                "pedestrian crossing at station {crossing:.2} m does not fit on a {:.2} m road",
                config.road_length
            )));
        }
        let edge = config.lane_width / 2.0 + config.parked_curb_gap;
        scene.crossing_station = Some(crossing);
        scene.parked_vehicle = Some(Rect {
            x_min: parked_rear,
            x_max: parked_front,
            y_min: edge,
            y_max: edge + config.parked_width,
        });
        event_time = Some(t_event);
    }

    let mut world = WorldState {
        time: 0.0,
        vehicle,
        pedestrian_position: None,
        pedestrian_visible: false,
        event_time,
        scene,
    };
    world.advance_to(0.0);
    Ok(world)
}

impl WorldState {
    /// Pedestrian position at absolute time `t`. Motion is piecewise linear
    /// and evaluated in closed form, so it does not depend on the step history.
    pub fn pedestrian_at(&self, t: f64) -> Option<(f64, f64)> {
        let t_event = self.event_time?;
        let x = self.scene.crossing_station?;
        if t < t_event {
            return None;
        }
        let travelled = self.scene.pedestrian_speed * (t - t_event);
        let y = (self.scene.pedestrian_start_y - travelled).max(self.scene.pedestrian_stop_y);
        Some((x, y))
    }

    /// Sets the clock and refreshes the pedestrian and its visibility.
    pub fn advance_to(&mut self, t: f64) {
        self.time = t;
        self.pedestrian_position = self.pedestrian_at(t);
        self.pedestrian_visible = self.pedestrian_position.is_some() && visibility(self);
    }

    pub fn vehicle_front_station(&self) -> f64 {
        self.vehicle.x + self.scene.vehicle_length / 2.0
    }

    pub fn vehicle_rear_station(&self) -> f64 {
        self.vehicle.x - self.scene.vehicle_length / 2.0
    }
}

/// Advances the pedestrian (and the world clock) by `dt`.
pub fn step_pedestrian(world: &WorldState, dt: f64) -> WorldState {
    let mut next = world.clone();
    next.advance_to(world.time + dt);
    next
}

/// True when the sight line from the vehicle CG to the pedestrian misses the
/// parked car's interior. Grazing the outline counts as visible.
pub fn visibility(world: &WorldState) -> bool {
    let Some(ped) = world.pedestrian_position else {
        return false;
    };
    let eye = (world.vehicle.x, world.vehicle.y);
    match world.scene.parked_vehicle {
        Some(rect) => !rect.segment_hits_interior(eye, ped),
        None => true,
    }
}

/// Distance from the vehicle footprint to the pedestrian; zero means contact.
pub fn vehicle_pedestrian_distance(world: &WorldState) -> Option<f64> {
    let ped = world.pedestrian_position?;
    let v = &world.vehicle;
    Some(point_to_oriented_rect(
        ped,
        (v.x, v.y),
        v.yaw,
        world.scene.vehicle_length,
        world.scene.vehicle_width,
    ))
}
