//! Drawer opening: the arm has to reach a handle on a laterally displaced
//! cabinet, latch onto it and pull the drawer out along `-y`.

use super::arm::{self, ArmParams, ArmState, Vec2};

pub const PARAM_NAMES: [&str; 10] = [
    "joint1_compliance",
    "joint2_compliance",
    "joint1_damping",
    "joint2_damping",
    "joint1_action_scaling",
    "joint2_action_scaling",
    "cabinet_x",
    "drawer_compliance",
    "drawer_damping",
    "handle_friction",
];

pub const OBS_NAMES: [&str; 5] = ["q1", "q2", "handle_x", "handle_y", "drawer_extension"];

pub const COMPONENT_NAMES: [&str; 5] = ["reach", "alignment", "opening", "grasp_bonus", "action"];

/// Reward weights (all weights enter with their sign).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawerRewardWeights {
    pub reach: f64,
    pub alignment: f64,
    pub opening: f64,
    pub grasp_bonus: f64,
    pub action: f64,
}

impl Default for DrawerRewardWeights {
    fn default() -> Self {
        DrawerRewardWeights {
            reach: -0.5,
            alignment: -0.07,
            opening: -0.4,
            grasp_bonus: 0.005,
            action: -0.005,
        }
    }
}

/// Geometry and contact constants that are not randomised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawerConstants {
    /// Handle position for `cabinet_x = 0` with the drawer closed.
    pub handle_origin: Vec2,
    pub max_extension: f64,
    /// End-effector position at the spring rest pose.
    pub ee_rest: Vec2,
    pub grasp_radius: f64,
    pub grasp_alignment: f64,
    pub release_radius: f64,
    pub grasp_stiffness: f64,
    pub grasp_damping: f64,
    pub drawer_mass: f64,
    pub weights: DrawerRewardWeights,
}

impl Default for DrawerConstants {
    fn default() -> Self {
        DrawerConstants {
            handle_origin: [0.0, 0.55],
            max_extension: 0.2,
            ee_rest: [0.0, 0.3],
            grasp_radius: 0.03,
            grasp_alignment: 0.3,
            release_radius: 0.06,
            grasp_stiffness: 100.0,
            grasp_damping: 4.0,
            drawer_mass: 0.5,
            weights: DrawerRewardWeights::default(),
        }
    }
}

impl DrawerConstants {
    pub fn rest_pose(&self) -> [f64; 2] {
        arm::inverse_kinematics(self.ee_rest)
    }
}

/// Physical parameters in the order of [`PARAM_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawerParams {
    pub arm: ArmParams,
    pub cabinet_x: f64,
    pub drawer_stiffness: f64,
    pub drawer_damping: f64,
    pub handle_friction: f64,
}

impl DrawerParams {
    pub fn from_values(v: &[f64]) -> Self {
        DrawerParams {
            arm: ArmParams {
                stiffness: [(-v[0]).exp(), (-v[1]).exp()],
                damping: [v[2], v[3]],
                action_scaling: [v[4], v[5]],
            },
            cabinet_x: v[6],
            drawer_stiffness: (-v[7]).exp(),
            drawer_damping: v[8],
            handle_friction: v[9],
        }
    }
}

pub const NOMINAL: [f64; 10] = [1.0, 1.0, 3.0, 3.0, 4.5, 4.5, 0.0, 3.0, 2.0, 0.5];

pub const BOUNDS: [(f64, f64); 10] = [
    (-10.0, 10.0),
    (-10.0, 10.0),
    (1e-3, 100.0),
    (1e-3, 100.0),
    (1e-2, 50.0),
    (1e-2, 50.0),
    (-0.35, 0.35),
    (-10.0, 10.0),
    (1e-3, 100.0),
    (0.0, 20.0),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawerState {
    pub arm: ArmState,
    pub extension: f64,
    pub extension_velocity: f64,
    pub grasped: bool,
}

impl DrawerState {
    pub fn handle(&self, c: &DrawerConstants, p: &DrawerParams) -> Vec2 {
        [
            c.handle_origin[0] + p.cabinet_x,
            c.handle_origin[1] - self.extension,
        ]
    }

    pub fn observation(&self, c: &DrawerConstants, p: &DrawerParams) -> Vec<f64> {
        let h = self.handle(c, p);
        vec![self.arm.q[0], self.arm.q[1], h[0], h[1], self.extension]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.arm.q[0],
            self.arm.q[1],
            self.arm.qd[0],
            self.arm.qd[1],
            self.extension,
            self.extension_velocity,
            if self.grasped { 1.0 } else { 0.0 },
        ]
    }
}

pub fn reset(c: &DrawerConstants, jitter: [f64; 2]) -> DrawerState {
    let rest = c.rest_pose();
    DrawerState {
        arm: ArmState {
            q: [rest[0] + jitter[0], rest[1] + jitter[1]],
            qd: [0.0; 2],
        },
        extension: 0.0,
        extension_velocity: 0.0,
        grasped: false,
    }
}

/// Angle between the distal link and the elbow-to-handle direction.
pub fn misalignment(q: [f64; 2], handle: Vec2) -> f64 {
    let e = arm::elbow(q);
    let link = arm::sub(arm::end_effector(q), e);
    let to_handle = arm::sub(handle, e);
    let n = arm::norm(link) * arm::norm(to_handle);
    if n == 0.0 {
        return 0.0;
    }
    ((link[0] * to_handle[0] + link[1] * to_handle[1]) / n)
        .clamp(-1.0, 1.0)
        .acos()
}

/// Scalar quantities the reward is built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawerFeatures {
    pub ee_handle_distance: f64,
    pub misalignment: f64,
    pub extension: f64,
    pub in_grasp: bool,
}

impl DrawerFeatures {
    pub fn of(s: &DrawerState, c: &DrawerConstants, p: &DrawerParams) -> Self {
        let h = s.handle(c, p);
        let d = arm::norm(arm::sub(arm::end_effector(s.arm.q), h));
        DrawerFeatures {
            ee_handle_distance: d,
            misalignment: misalignment(s.arm.q, h),
            extension: s.extension,
            in_grasp: d < c.grasp_radius,
        }
    }
}

/// Reward and its components, in [`COMPONENT_NAMES`] order.
pub fn reward(f: &DrawerFeatures, action: &[f64], c: &DrawerConstants) -> (f64, [f64; 5]) {
    let w = &c.weights;
    let a2: f64 = action.iter().map(|a| a * a).sum();
    let comps = [
        w.reach * f.ee_handle_distance,
        w.alignment * f.misalignment,
        w.opening * (c.max_extension - f.extension),
        if f.in_grasp { w.grasp_bonus } else { 0.0 },
        w.action * a2,
    ];
    (comps.iter().sum(), comps)
}

pub fn step(
    c: &DrawerConstants,
    dt: f64,
    p: &DrawerParams,
    s: &DrawerState,
    action: &[f64],
) -> DrawerState {
    let handle = s.handle(c, p);
    let ee = arm::end_effector(s.arm.q);
    // Force the end effector exerts on the handle through the latched grasp.
    let f = if s.grasped {
        let d = arm::sub(ee, handle);
        let v = arm::sub(arm::ee_velocity(&s.arm), [0.0, -s.extension_velocity]);
        [
            c.grasp_stiffness * d[0] + c.grasp_damping * v[0],
            c.grasp_stiffness * d[1] + c.grasp_damping * v[1],
        ]
    } else {
        [0.0; 2]
    };

    let rest = c.rest_pose();
    let drive = arm::drive_torque(&p.arm, &s.arm, rest, action);
    let reaction = arm::jt_force(s.arm.q, [-f[0], -f[1]]);
    let mut arm_next = arm::integrate(
        &s.arm,
        [drive[0] + reaction[0], drive[1] + reaction[1]],
        p.arm.damping,
        dt,
    );
    for i in 0..2 {
        let lim = std::f64::consts::TAU;
        if arm_next.q[i].abs() > lim {
            arm_next.q[i] = arm_next.q[i].clamp(-lim, lim);
            arm_next.qd[i] = 0.0;
        }
    }

    // Prismatic drawer: implicit viscous damping, then Coulomb friction with stiction.
    let m = c.drawer_mass;
    let open_force = -f[1] - p.drawer_stiffness * s.extension;
    let v_free = (m * s.extension_velocity + dt * open_force) / (m + dt * p.drawer_damping);
    let stick = dt * p.handle_friction / (m + dt * p.drawer_damping);
    let mut v = if v_free.abs() <= stick {
        0.0
    } else {
        v_free - stick * v_free.signum()
    };
    let mut x = s.extension + dt * v;
    if x <= 0.0 {
        x = 0.0;
        v = v.max(0.0);
    } else if x >= c.max_extension {
        x = c.max_extension;
        v = v.min(0.0);
    }

    let mut next = DrawerState {
        arm: arm_next,
        extension: x,
        extension_velocity: v,
        grasped: s.grasped,
    };
    let h = next.handle(c, p);
    let d = arm::norm(arm::sub(arm::end_effector(next.arm.q), h));
    next.grasped = if s.grasped {
        d < c.release_radius
    } else {
        d < c.grasp_radius && misalignment(next.arm.q, h) < c.grasp_alignment
    };
    next
}

pub fn is_success(s: &DrawerState, c: &DrawerConstants) -> bool {
    s.extension >= 0.8 * c.max_extension
}
