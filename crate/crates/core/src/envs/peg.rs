//! Swing peg: a peg hangs from the end effector on an elastic rope in a
//! vertical plane and has to be brought into a hole.
//!
//! The rope is a single tension-only spring-damper. The peg is light compared
//! to the arm, so the rope force is not fed back into the arm dynamics.

use super::arm::{self, ArmParams, ArmState, Vec2};

pub const PARAM_NAMES: [&str; 11] = [
    "joint1_compliance",
    "joint2_compliance",
    "joint1_damping",
    "joint2_damping",
    "joint1_action_scaling",
    "joint2_action_scaling",
    "rope_compliance",
    "rope_damping",
    "rope_length",
    "peg_mass",
    "hole_x",
];

pub const OBS_NAMES: [&str; 4] = ["q1", "q2", "peg_x", "peg_y"];

pub const COMPONENT_NAMES: [&str; 4] = ["l1_distance", "l2_distance", "solved_bonus", "action"];

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PegRewardWeights {
    pub l1: f64,
    pub l2: f64,
    pub solved: f64,
    pub action: f64,
}

impl Default for PegRewardWeights {
    fn default() -> Self {
        PegRewardWeights {
            l1: -10.0,
            l2: -4.0,
            solved: 0.1,
            action: -0.7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PegConstants {
    /// Hole centre for `hole_x = 0`.
    pub hole_origin: Vec2,
    pub hole_tolerance: f64,
    pub ee_rest: Vec2,
    /// Consecutive in-hole steps that count as solved.
    pub solved_steps: u32,
    pub weights: PegRewardWeights,
}

impl Default for PegConstants {
    fn default() -> Self {
        PegConstants {
            hole_origin: [0.5, -0.05],
            hole_tolerance: 0.02,
            ee_rest: [0.25, 0.35],
            solved_steps: 10,
            weights: PegRewardWeights::default(),
        }
    }
}

impl PegConstants {
    pub fn rest_pose(&self) -> [f64; 2] {
        arm::inverse_kinematics(self.ee_rest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PegParams {
    pub arm: ArmParams,
    pub rope_stiffness: f64,
    pub rope_damping: f64,
    pub rope_length: f64,
    pub peg_mass: f64,
    pub hole_x: f64,
}

impl PegParams {
    pub fn from_values(v: &[f64]) -> Self {
        PegParams {
            arm: ArmParams {
                stiffness: [(-v[0]).exp(), (-v[1]).exp()],
                damping: [v[2], v[3]],
                action_scaling: [v[4], v[5]],
            },
            rope_stiffness: (-v[6]).exp(),
            rope_damping: v[7],
            rope_length: v[8],
            peg_mass: v[9],
            hole_x: v[10],
        }
    }
}

pub const NOMINAL: [f64; 11] = [1.0, 1.0, 3.0, 3.0, 4.5, 4.5, -3.0, 0.05, 0.3, 0.1, 0.0];

pub const BOUNDS: [(f64, f64); 11] = [
    (-10.0, 10.0),
    (-10.0, 10.0),
    (1e-3, 100.0),
    (1e-3, 100.0),
    (1e-2, 50.0),
    (1e-2, 50.0),
    (-10.0, 10.0),
    (0.0, 10.0),
    (0.05, 0.6),
    (0.01, 2.0),
    (-0.3, 0.3),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PegState {
    pub arm: ArmState,
    pub peg: Vec2,
    pub peg_velocity: Vec2,
    /// Consecutive steps the peg has spent inside the hole tolerance.
    pub inside_streak: u32,
}

impl PegState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.arm.q[0], self.arm.q[1], self.peg[0], self.peg[1]]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.arm.q[0],
            self.arm.q[1],
            self.arm.qd[0],
            self.arm.qd[1],
            self.peg[0],
            self.peg[1],
            self.peg_velocity[0],
            self.peg_velocity[1],
        ]
    }
}

pub fn hole(c: &PegConstants, p: &PegParams) -> Vec2 {
    [c.hole_origin[0] + p.hole_x, c.hole_origin[1]]
}

pub fn reset(c: &PegConstants, p: &PegParams, jitter: [f64; 2]) -> PegState {
    let rest = c.rest_pose();
    let q = [rest[0] + jitter[0], rest[1] + jitter[1]];
    let ee = arm::end_effector(q);
    let sag = p.rope_length + p.peg_mass * GRAVITY / p.rope_stiffness;
    PegState {
        arm: ArmState { q, qd: [0.0; 2] },
        peg: [ee[0], ee[1] - sag],
        peg_velocity: [0.0; 2],
        inside_streak: 0,
    }
}

/// Force the rope exerts on the peg.
fn rope_force(p: &PegParams, ee: Vec2, ee_vel: Vec2, peg: Vec2, peg_vel: Vec2) -> Vec2 {
    let d = arm::sub(peg, ee);
    let len = arm::norm(d);
    let stretch = len - p.rope_length;
    if stretch <= 0.0 || len == 0.0 {
        return [0.0; 2];
    }
    let u = [d[0] / len, d[1] / len];
    let rel = arm::sub(peg_vel, ee_vel);
    let tension =
        (p.rope_stiffness * stretch + p.rope_damping * (rel[0] * u[0] + rel[1] * u[1])).max(0.0);
    [-tension * u[0], -tension * u[1]]
}

/// Total mechanical energy of the peg and the joint springs.
pub fn energy(s: &PegState, c: &PegConstants, p: &PegParams) -> f64 {
    let ee = arm::end_effector(s.arm.q);
    let stretch = (arm::norm(arm::sub(s.peg, ee)) - p.rope_length).max(0.0);
    let rest = c.rest_pose();
    let springs: f64 = (0..2)
        .map(|i| 0.5 * p.arm.stiffness[i] * (s.arm.q[i] - rest[i]).powi(2))
        .sum();
    let v2 = s.peg_velocity[0].powi(2) + s.peg_velocity[1].powi(2);
    arm::kinetic_energy(&s.arm)
        + springs
        + 0.5 * p.peg_mass * v2
        + p.peg_mass * GRAVITY * s.peg[1]
        + 0.5 * p.rope_stiffness * stretch * stretch
}

/// Peg acceleration at the given state; used by energy diagnostics.
pub fn peg_acceleration(s: &PegState, p: &PegParams) -> Vec2 {
    let ee = arm::end_effector(s.arm.q);
    let f = rope_force(p, ee, arm::ee_velocity(&s.arm), s.peg, s.peg_velocity);
    [f[0] / p.peg_mass, f[1] / p.peg_mass - GRAVITY]
}

pub fn step(c: &PegConstants, dt: f64, p: &PegParams, s: &PegState, action: &[f64]) -> PegState {
    let rest = c.rest_pose();
    let tau = arm::drive_torque(&p.arm, &s.arm, rest, action);
    let arm_next = arm::integrate(&s.arm, tau, p.arm.damping, dt);

    let acc = peg_acceleration(s, p);
    let vel = [
        s.peg_velocity[0] + dt * acc[0],
        s.peg_velocity[1] + dt * acc[1],
    ];
    let peg = [s.peg[0] + dt * vel[0], s.peg[1] + dt * vel[1]];

    let inside = arm::norm(arm::sub(peg, hole(c, p))) < c.hole_tolerance;
    PegState {
        arm: arm_next,
        peg,
        peg_velocity: vel,
        inside_streak: if inside { s.inside_streak + 1 } else { 0 },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PegFeatures {
    pub offset: Vec2,
    pub inside: bool,
}

impl PegFeatures {
    pub fn of(s: &PegState, c: &PegConstants, p: &PegParams) -> Self {
        let offset = arm::sub(s.peg, hole(c, p));
        PegFeatures {
            offset,
            inside: arm::norm(offset) < c.hole_tolerance,
        }
    }
}

pub fn reward(f: &PegFeatures, action: &[f64], c: &PegConstants) -> (f64, [f64; 4]) {
    let w = &c.weights;
    let a2: f64 = action.iter().map(|a| a * a).sum();
    let comps = [
        w.l1 * (f.offset[0].abs() + f.offset[1].abs()),
        w.l2 * arm::norm(f.offset),
        if f.inside { w.solved } else { 0.0 },
        w.action * a2,
    ];
    (comps.iter().sum(), comps)
}

pub fn is_success(s: &PegState, c: &PegConstants) -> bool {
    s.inside_streak >= c.solved_steps
}
