//! Steering-interface policies: triggered automated evasion (armband),
//! manual steering wheel, and manual takeover from automation.
//!
//! Humans steer with the same two-point preview law as the assist
//! controller, with gains inflated by the subject's aggressiveness and a
//! stronger arm (torque cap above the assist cap).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::control::{Controller, ControllerGains, PreviewConfig, TargetTrajectory};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::scenario::{AvoidancePath, Scene, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interface {
    MyoArmband,
    SteeringWheel,
    ManualTakeover,
}

impl Interface {
    pub const ALL: [Interface; 3] = [
        Interface::MyoArmband,
        Interface::SteeringWheel,
        Interface::ManualTakeover,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Interface::MyoArmband => "myo",
            Interface::SteeringWheel => "wheel",
            Interface::ManualTakeover => "takeover",
        }
    }
}

impl std::fmt::Display for Interface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Automation,
    Manual,
    Evasion,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Automation => "automation",
            Phase::Manual => "manual",
            Phase::Evasion => "evasion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    LaneKeep,
    Avoidance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: usize,
    /// s
    pub reaction_time: f64,
    /// Gain multiplier for manual steering, ≥ 1.
    pub aggressiveness: f64,
    /// Extra gain multiplier when a crosswalk is present.
    pub anticipation_crosswalk: f64,
    pub rng_seed: u64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("reaction_time", self.reaction_time)?;
        ensure_finite("anticipation_crosswalk", self.anticipation_crosswalk)?;
        if self.aggressiveness.is_nan() || self.aggressiveness < 1.0 || !self.aggressiveness.is_finite() {
            return Err(Error::InvalidParameter {
                field: "aggressiveness",
                reason: format!("must be >= 1, got {}", self.aggressiveness),
            });
        }
        Ok(())
    }
}

/// Population distributions and timing constants for the agent models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentCalibration {
    /// Median of the lognormal reaction time, s.
    pub reaction_median: f64,
    /// Log-space standard deviation of the reaction time.
    pub reaction_sigma_log: f64,
    pub aggressiveness_min: f64,
    pub aggressiveness_max: f64,
    pub anticipation_min: f64,
    pub anticipation_max: f64,
    /// Extra delay for a takeover driver to resume the wheel, s.
    pub takeover_penalty: f64,
    /// Armband → laptop → host delay, s.
    pub trigger_latency: f64,
    /// Human arm torque cap, N·m.
    pub human_torque_limit: f64,
    /// Human-planned lane changes end this far before the pedestrian, m.
    pub manual_path_margin: f64,
    /// Takeover drivers compress their lane change by this factor.
    pub takeover_path_scale: f64,
    /// Shortest lane change a human plans, m.
    pub min_manual_path_length: f64,
    /// Log-space standard deviation of the per-trial manual effort factor.
    pub effort_jitter_sigma: f64,
    /// Number of generated subjects.
    pub subjects: usize,
}

impl Default for AgentCalibration {
    fn default() -> Self {
        Self {
            reaction_median: 0.35,
            reaction_sigma_log: 0.2,
            aggressiveness_min: 1.0,
            aggressiveness_max: 1.5,
            anticipation_min: 1.0,
            anticipation_max: 1.2,
            takeover_penalty: 0.3,
            trigger_latency: 0.10,
            human_torque_limit: 15.0,
            manual_path_margin: 4.0,
            takeover_path_scale: 0.7,
            min_manual_path_length: 8.0,
            effort_jitter_sigma: 0.5,
            subjects: 12,
        }
    }
}

impl AgentCalibration {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("reaction_median", self.reaction_median)?;
        ensure_positive("human_torque_limit", self.human_torque_limit)?;
        ensure_positive("takeover_path_scale", self.takeover_path_scale)?;
        ensure_positive("min_manual_path_length", self.min_manual_path_length)?;
        for (field, v) in [
            ("reaction_sigma_log", self.reaction_sigma_log),
            ("takeover_penalty", self.takeover_penalty),
            ("trigger_latency", self.trigger_latency),
            ("effort_jitter_sigma", self.effort_jitter_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        ensure_finite("manual_path_margin", self.manual_path_margin)?;
        if !(1.0 <= self.aggressiveness_min && self.aggressiveness_min <= self.aggressiveness_max) {
            return Err(Error::Config(format!(
                "aggressiveness range [{}, {}] must satisfy 1 <= min <= max",
                self.aggressiveness_min, self.aggressiveness_max
            )));
        }
        if !(0.0 < self.anticipation_min && self.anticipation_min <= self.anticipation_max) {
            return Err(Error::Config(format!(
                "anticipation range [{}, {}] must satisfy 0 < min <= max",
                self.anticipation_min, self.anticipation_max
            )));
        }
        Ok(())
    }

    /// Delay from perception to the start of evasive steering.
    pub fn response_delay(&self, interface: Interface, profile: &SubjectProfile) -> f64 {
        match interface {
            Interface::MyoArmband => profile.reaction_time + self.trigger_latency,
            Interface::SteeringWheel => profile.reaction_time,
            Interface::ManualTakeover => profile.reaction_time + self.takeover_penalty,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    Uniform::new(lo, hi).expect("validated range").sample(rng)
}

/// The subject population for a master seed. Each subject draws its own
/// seed from the master stream and its traits from that seed, so the set
/// regenerates exactly.
pub fn generate_profiles(master_seed: u64, calib: &AgentCalibration) -> Result<Vec<SubjectProfile>> {
    calib.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(master_seed);
    let reaction = LogNormal::new(calib.reaction_median.ln(), calib.reaction_sigma_log)
        .map_err(|e| Error::Config(format!("reaction-time distribution: {e}")))?;
    Ok((0..calib.subjects)
        .map(|subject_id| {
            let rng_seed: u64 = master.random();
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            SubjectProfile {
                subject_id,
                reaction_time: reaction.sample(&mut rng),
                aggressiveness: uniform(&mut rng, calib.aggressiveness_min, calib.aggressiveness_max),
                anticipation_crosswalk: uniform(&mut rng, calib.anticipation_min, calib.anticipation_max),
                rng_seed,
            }
        })
        .collect())
}

/// Trial-to-trial variation of a subject's manual steering effort
/// (lognormal with median 1), keyed on the subject seed and the condition.
pub fn trial_effort(profile: &SubjectProfile, condition_id: u8, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let key = profile.rng_seed ^ u64::from(condition_id).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    LogNormal::new(0.0, sigma).expect("finite sigma").sample(&mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    /// N·m, positive clockwise
    pub driver_torque: f64,
    pub assist_enabled: bool,
    pub active_trajectory: TrajectoryKind,
    /// Geometry the assist controller should track.
    pub target: TargetTrajectory,
    pub phase: Phase,
    /// True only on the step where the avoidance trajectory is adopted.
    pub trajectory_switched: bool,
}

/// Number of whole steps covering `delay`, tolerant of rounding noise.
pub fn delay_steps(delay: f64, dt: f64) -> u64 {
    let steps = delay / dt;
    if (steps - steps.round()).abs() < 1e-6 {
        steps.round() as u64
    } else {
        steps.ceil() as u64
    }
}

/// One interface policy for one trial.
#[derive(Debug, Clone)]
pub struct Agent {
    pub interface: Interface,
    pub profile: SubjectProfile,
    calib: AgentCalibration,
    crosswalk: bool,
    crossing_station: Option<f64>,
    lane_width: f64,
    avoidance_length: f64,
    lane_keep: TargetTrajectory,
    domain: (f64, f64),
    human: Controller,
    visible_step: Option<u64>,
    scheduled_step: Option<u64>,
    avoidance: Option<TargetTrajectory>,
    released: bool,
}

impl Agent {
    /// `effort` multiplies the manual gains for this trial (see [`trial_effort`]).
    pub fn new(
        interface: Interface,
        profile: SubjectProfile,
        calib: &AgentCalibration,
        effort: f64,
        base_gains: &ControllerGains,
        preview: &PreviewConfig,
        scene: &Scene,
    ) -> Self {
        let anticipation = if scene.crosswalk {
            profile.anticipation_crosswalk
        } else {
            1.0
        };
        let factor = profile.aggressiveness * anticipation * effort;
        let domain = (-preview.far_distance, scene.road_length + preview.far_distance);
        Self {
            interface,
            profile,
            calib: calib.clone(),
            crosswalk: scene.crosswalk,
            crossing_station: scene.crossing_station,
            lane_width: scene.lane_width,
            avoidance_length: scene.avoidance_length,
            lane_keep: TargetTrajectory::straight(0.0, domain.0, domain.1),
            domain,
            human: Controller::new(base_gains.scaled(factor, calib.human_torque_limit), *preview),
            visible_step: None,
            scheduled_step: None,
            avoidance: None,
            released: false,
        }
    }

    pub fn crosswalk(&self) -> bool {
        self.crosswalk
    }

    /// Gains of the simulated human arm.
    pub fn human_gains(&self) -> ControllerGains {
        self.human.gains
    }

    pub fn avoidance_trajectory(&self) -> Option<TargetTrajectory> {
        self.avoidance
    }

    /// Step at which the pedestrian was first seen.
    pub fn visible_step(&self) -> Option<u64> {
        self.visible_step
    }

    /// Adopts the avoidance trajectory starting at the vehicle's station.
    /// Latching: calls after the first have no effect. Returns whether this
    /// call switched.
    pub fn trigger(&mut self, world: &WorldState) -> bool {
        if self.avoidance.is_some() {
            return false;
        }
        let x = world.vehicle.x;
        let length = match self.interface {
            Interface::MyoArmband => self.avoidance_length,
            Interface::SteeringWheel | Interface::ManualTakeover => {
                let scale = if self.interface == Interface::ManualTakeover {
                    self.calib.takeover_path_scale
                } else {
                    1.0
                };
                let room =
                    self.crossing_station.unwrap_or(x + self.avoidance_length) - x - self.calib.manual_path_margin;
                (room * scale).max(self.calib.min_manual_path_length)
            }
        };
        let path = AvoidancePath::lane_change(x, length, self.lane_width);
        self.avoidance = Some(TargetTrajectory::lane_change(path, self.domain.0, self.domain.1));
        self.human.reset();
        true
    }

    /// Advances the policy to simulation step `step` (time `world.time`).
    pub fn step(&mut self, world: &WorldState, step: u64, dt: f64) -> Result<AgentOutput> {
        if self.visible_step.is_none() && world.pedestrian_visible {
            self.visible_step = Some(step);
            let delay = self.calib.response_delay(self.interface, &self.profile);
            self.scheduled_step = Some(step + delay_steps(delay, dt));
        }
        if self.interface == Interface::ManualTakeover && !self.released && world.pedestrian_position.is_some() {
            self.released = true;
        }
        let mut switched = false;
        if matches!(self.scheduled_step, Some(s) if step >= s) {
            switched = self.trigger(world);
        }
        let (kind, target) = match self.avoidance {
            Some(t) => (TrajectoryKind::Avoidance, t),
            None => (TrajectoryKind::LaneKeep, self.lane_keep),
        };

        let output = |driver_torque, assist_enabled, phase| AgentOutput {
            driver_torque,
            assist_enabled,
            active_trajectory: kind,
            target,
            phase,
            trajectory_switched: switched,
        };

        Ok(match self.interface {
            Interface::MyoArmband => {
                let phase = if kind == TrajectoryKind::Avoidance {
                    Phase::Evasion
                } else {
                    Phase::Automation
                };
                output(0.0, true, phase)
            }
            Interface::SteeringWheel => {
                let torque = self.human.torque(&world.vehicle, &target, dt)?;
                output(torque, false, Phase::Manual)
            }
            Interface::ManualTakeover => {
                if !self.released {
                    output(0.0, true, Phase::Automation)
                } else if kind == TrajectoryKind::LaneKeep {
                    // automation released, hands not yet back on the wheel
                    output(0.0, false, Phase::Manual)
                } else {
                    let torque = self.human.torque(&world.vehicle, &target, dt)?;
                    output(torque, false, Phase::Manual)
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DEFAULT_DT;
    use crate::scenario::{build_world, ScenarioConfig};

    fn profile(rt: f64, agg: f64) -> SubjectProfile {
        SubjectProfile {
            subject_id: 0,
            reaction_time: rt,
            aggressiveness: agg,
            anticipation_crosswalk: 1.25,
            rng_seed: 7,
        }
    }

    fn agent(interface: Interface, p: SubjectProfile, cfg: &ScenarioConfig) -> (Agent, WorldState) {
        let world = build_world(cfg, DEFAULT_DT).unwrap();
        let a = Agent::new(
            interface,
            p,
            &AgentCalibration::default(),
            1.0,
            &ControllerGains::default(),
            &PreviewConfig::default(),
            &world.scene,
        );
        (a, world)
    }

    /// Steps the agent over a world with the vehicle frozen at its start,
    /// forcing visibility from `visible_from` on.
    fn run(a: &mut Agent, world: &WorldState, steps: u64, visible_from: Option<u64>) -> Vec<AgentOutput> {
        let mut w = world.clone();
        (0..steps)
            .map(|k| {
                w.advance_to(k as f64 * DEFAULT_DT);
                if let Some(v) = visible_from {
                    w.pedestrian_visible = k >= v;
                    if k >= v && w.pedestrian_position.is_none() {
                        w.pedestrian_position = Some((60.0, 0.0));
                    }
                }
                a.step(&w, k, DEFAULT_DT).unwrap()
            })
            .collect()
    }

    #[test]
    fn myo_without_pedestrian_keeps_lane() {
        let cfg = ScenarioConfig {
            pedestrian_present: false,
            ..ScenarioConfig::default()
        };
        let (mut a, w) = agent(Interface::MyoArmband, profile(0.35, 1.0), &cfg);
        for out in run(&mut a, &w, 1000, None) {
            assert_eq!(out.active_trajectory, TrajectoryKind::LaneKeep);
            assert!(out.assist_enabled);
            assert_eq!(out.driver_torque, 0.0);
            assert_eq!(out.phase, Phase::Automation);
        }
    }

    #[test]
    fn myo_switches_exactly_after_reaction_plus_latency() {
        let (mut a, w) = agent(Interface::MyoArmband, profile(0.35, 1.0), &ScenarioConfig::default());
        let tv = 600;
        let outs = run(&mut a, &w, 800, Some(tv));
        let first = outs
            .iter()
            .position(|o| o.active_trajectory == TrajectoryKind::Avoidance)
            .unwrap() as u64;
        assert_eq!(first, tv + 54);
        assert!(((first - tv) as f64 * DEFAULT_DT - 0.45).abs() < 1e-12);
        assert!(outs[first as usize].trajectory_switched);
        assert_eq!(outs[first as usize].phase, Phase::Evasion);
        assert!(outs.iter().all(|o| o.driver_torque == 0.0 && o.assist_enabled));
    }

    #[test]
    fn trigger_latches() {
        let (mut a, w) = agent(Interface::MyoArmband, profile(0.35, 1.0), &ScenarioConfig::default());
        let mut w1 = w.clone();
        w1.vehicle.x = 10.0;
        assert!(a.trigger(&w1));
        let first = a.avoidance_trajectory();
        let mut w2 = w.clone();
        w2.vehicle.x = 20.0;
        assert!(!a.trigger(&w2));
        assert!(!a.trigger(&w2));
        assert_eq!(a.avoidance_trajectory(), first);
        let outs = run(&mut a, &w, 50, None);
        assert!(outs.iter().all(|o| o.active_trajectory == TrajectoryKind::Avoidance));
    }

    #[test]
    fn manual_on_lane_centre_gives_zero_torque() {
        let (mut a, w) = agent(Interface::SteeringWheel, profile(0.35, 2.0), &ScenarioConfig::default());
        let out = a.step(&w, 0, DEFAULT_DT).unwrap();
        assert_eq!(out.driver_torque, 0.0);
        assert!(!out.assist_enabled);
        assert_eq!(out.phase, Phase::Manual);
    }

    fn manual_torque(agg: f64, crosswalk: bool, y: f64) -> f64 {
        let cfg = ScenarioConfig {
            crosswalk,
            ..ScenarioConfig::default()
        };
        let (mut a, mut w) = agent(Interface::SteeringWheel, profile(0.35, agg), &cfg);
        w.vehicle.y = y;
        a.step(&w, 0, DEFAULT_DT).unwrap().driver_torque
    }

    #[test]
    fn crosswalk_scales_manual_torque_by_anticipation() {
        let off = manual_torque(1.0, false, 0.1);
        let on = manual_torque(1.0, true, 0.1);
        assert!(off.abs() > 0.0 && off.abs() < 15.0);
        assert!((on - off * 1.25).abs() < 1e-12);
    }

    #[test]
    fn aggressiveness_scales_manual_torque() {
        let one = manual_torque(1.0, false, 0.1);
        let two = manual_torque(2.0, false, 0.1);
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn takeover_hands_off_until_penalty_elapses() {
        let (mut a, w) = agent(
            Interface::ManualTakeover,
            profile(0.35, 1.0),
            &ScenarioConfig::default(),
        );
        let te = (w.event_time.unwrap() / DEFAULT_DT).round() as u64;
        let tv = te + 2;
        let mut wv = w.clone();
        let outs: Vec<_> = (0..te + 200)
            .map(|k| {
                wv.advance_to(k as f64 * DEFAULT_DT);
                wv.vehicle.y = 0.2; // off centre so any active human would steer
                wv.pedestrian_visible = k >= tv;
                a.step(&wv, k, DEFAULT_DT).unwrap()
            })
            .collect();
        for (k, o) in outs.iter().enumerate() {
            let k = k as u64;
            if k < te {
                assert!(o.assist_enabled && o.phase == Phase::Automation);
            } else {
                assert!(!o.assist_enabled, "assist after switch at step {k}");
            }
            if o.driver_torque != 0.0 {
                assert!((k - tv) as f64 * DEFAULT_DT >= 0.65 - 1e-12);
            }
        }
        let first = outs.iter().position(|o| o.driver_torque != 0.0).unwrap() as u64;
        assert_eq!(first, tv + 78);
    }

    #[test]
    fn takeover_without_pedestrian_is_pure_automation() {
        let cfg = ScenarioConfig {
            pedestrian_present: false,
            ..ScenarioConfig::default()
        };
        let (mut a, w) = agent(Interface::ManualTakeover, profile(0.35, 1.0), &cfg);
        let (mut m, _) = agent(Interface::MyoArmband, profile(0.35, 1.0), &cfg);
        let ta = run(&mut a, &w, 500, None);
        let tm = run(&mut m, &w, 500, None);
        assert_eq!(ta, tm);
    }

    #[test]
    fn profiles_regenerate_from_seed() {
        let c = AgentCalibration::default();
        let a = generate_profiles(42, &c).unwrap();
        assert_eq!(a, generate_profiles(42, &c).unwrap());
        assert_ne!(a, generate_profiles(43, &c).unwrap());
        assert_eq!(a.len(), 12);
        for p in &a {
            p.validate().unwrap();
            assert!((c.aggressiveness_min..=c.aggressiveness_max).contains(&p.aggressiveness));
            assert!((c.anticipation_min..=c.anticipation_max).contains(&p.anticipation_crosswalk));
        }
    }

    #[test]
    fn effort_is_keyed_on_subject_and_condition() {
        let p = profile(0.35, 1.0);
        assert_eq!(trial_effort(&p, 3, 0.4), trial_effort(&p, 3, 0.4));
        assert_ne!(trial_effort(&p, 3, 0.4), trial_effort(&p, 5, 0.4));
        assert_eq!(trial_effort(&p, 3, 0.0), 1.0);
    }

    #[test]
    fn delay_steps_tolerates_rounding() {
        assert_eq!(delay_steps(0.45, DEFAULT_DT), 54);
        assert_eq!(delay_steps(0.65, DEFAULT_DT), 78);
        assert_eq!(delay_steps(0.451, DEFAULT_DT), 55);
        assert_eq!(delay_steps(0.0, DEFAULT_DT), 0);
    }
}
