//! Planar two-link arm with point masses at the elbow and the end effector.

pub const LINK_LENGTHS: [f64; 2] = [0.4, 0.4];
pub const LINK_MASSES: [f64; 2] = [1.0, 1.0];

/// Per-joint physical parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmParams {
    pub stiffness: [f64; 2],
    pub damping: [f64; 2],
    pub action_scaling: [f64; 2],
}

/// Joint angles (absolute for the first link, relative for the second).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmState {
    pub q: [f64; 2],
    pub qd: [f64; 2],
}

pub type Vec2 = [f64; 2];

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn elbow(q: [f64; 2]) -> Vec2 {
    [LINK_LENGTHS[0] * q[0].cos(), LINK_LENGTHS[0] * q[0].sin()]
}

pub fn end_effector(q: [f64; 2]) -> Vec2 {
    let a = q[0] + q[1];
    let e = elbow(q);
    [
        e[0] + LINK_LENGTHS[1] * a.cos(),
        e[1] + LINK_LENGTHS[1] * a.sin(),
    ]
}

/// `d ee / d q`, row-major.
pub fn jacobian(q: [f64; 2]) -> [[f64; 2]; 2] {
    let [l1, l2] = LINK_LENGTHS;
    let a = q[0] + q[1];
    [
        [-l1 * q[0].sin() - l2 * a.sin(), -l2 * a.sin()],
        [l1 * q[0].cos() + l2 * a.cos(), l2 * a.cos()],
    ]
}

pub fn ee_velocity(s: &ArmState) -> Vec2 {
    let j = jacobian(s.q);
    [
        j[0][0] * s.qd[0] + j[0][1] * s.qd[1],
        j[1][0] * s.qd[0] + j[1][1] * s.qd[1],
    ]
}

/// Joint torques equivalent to a force applied at the end effector (`Jᵀ f`).
pub fn jt_force(q: [f64; 2], f: Vec2) -> [f64; 2] {
    let j = jacobian(q);
    [
        j[0][0] * f[0] + j[1][0] * f[1],
        j[0][1] * f[0] + j[1][1] * f[1],
    ]
}

pub fn mass_matrix(q2: f64) -> [[f64; 2]; 2] {
    let [l1, l2] = LINK_LENGTHS;
    let [m1, m2] = LINK_MASSES;
    let c = q2.cos();
    let m11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c;
    let m12 = m2 * l2 * l2 + m2 * l1 * l2 * c;
    [[m11, m12], [m12, m2 * l2 * l2]]
}

/// Coriolis and centrifugal terms.
fn velocity_terms(s: &ArmState) -> [f64; 2] {
    let [l1, l2] = LINK_LENGTHS;
    let h = LINK_MASSES[1] * l1 * l2 * s.q[1].sin();
    let [q1d, q2d] = s.qd;
    [-h * (2.0 * q1d * q2d + q2d * q2d), h * q1d * q1d]
}

pub fn kinetic_energy(s: &ArmState) -> f64 {
    let m = mass_matrix(s.q[1]);
    let [a, b] = s.qd;
    0.5 * (m[0][0] * a * a + 2.0 * m[0][1] * a * b + m[1][1] * b * b)
}

/// Joint torque from actuation and the joint springs. Damping is handled
/// implicitly by [`integrate`].
pub fn drive_torque(p: &ArmParams, s: &ArmState, rest: [f64; 2], action: &[f64]) -> [f64; 2] {
    let mut tau = [0.0; 2];
    for i in 0..2 {
        let a = action[i].clamp(-1.0, 1.0);
        tau[i] = p.action_scaling[i] * a - p.stiffness[i] * (s.q[i] - rest[i]);
    }
    tau
}

/// Semi-implicit Euler step: velocities first (joint damping taken implicitly,
/// `(M + dt B) q̇' = M q̇ + dt (τ - c)`), then positions with the new velocities.
pub fn integrate(s: &ArmState, tau: [f64; 2], damping: [f64; 2], dt: f64) -> ArmState {
    let m = mass_matrix(s.q[1]);
    let c = velocity_terms(s);
    let a = [
        [m[0][0] + dt * damping[0], m[0][1]],
        [m[1][0], m[1][1] + dt * damping[1]],
    ];
    let r = [
        m[0][0] * s.qd[0] + m[0][1] * s.qd[1] + dt * (tau[0] - c[0]),
        m[1][0] * s.qd[0] + m[1][1] * s.qd[1] + dt * (tau[1] - c[1]),
    ];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let qd = [
        (a[1][1] * r[0] - a[0][1] * r[1]) / det,
        (a[0][0] * r[1] - a[1][0] * r[0]) / det,
    ];
    ArmState {
        q: [s.q[0] + dt * qd[0], s.q[1] + dt * qd[1]],
        qd,
    }
}

/// Elbow-up inverse kinematics for a reachable end-effector position.
pub fn inverse_kinematics(p: Vec2) -> [f64; 2] {
    let [l1, l2] = LINK_LENGTHS;
    let r2 = p[0] * p[0] + p[1] * p[1];
    let c2 = ((r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q2 = c2.acos();
    let q1 = p[1].atan2(p[0]) - (l2 * q2.sin()).atan2(l1 + l2 * c2);
    [q1, q2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let q = [0.3, 1.1];
        let j = jacobian(q);
        let h = 1e-6;
        for k in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            let (ep, em) = (end_effector(qp), end_effector(qm));
            for r in 0..2 {
                assert!(((ep[r] - em[r]) / (2.0 * h) - j[r][k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn inverse_kinematics_round_trips() {
        for p in [[0.0, 0.3], [0.2, 0.55], [-0.1, 0.6], [0.5, 0.35]] {
            let e = end_effector(inverse_kinematics(p));
            assert!((e[0] - p[0]).abs() < 1e-12 && (e[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn kinetic_energy_matches_point_masses() {
        let s = ArmState {
            q: [0.4, -0.7],
            qd: [0.9, -1.3],
        };
        let h = 1e-6;
        let vel = |q: [f64; 2], f: fn([f64; 2]) -> Vec2| {
            let a = f([q[0] + h * s.qd[0], q[1] + h * s.qd[1]]);
            let b = f([q[0] - h * s.qd[0], q[1] - h * s.qd[1]]);
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        };
        let v1 = vel(s.q, elbow);
        let v2 = vel(s.q, end_effector);
        let ke = 0.5 * LINK_MASSES[0] * (v1[0] * v1[0] + v1[1] * v1[1])
            + 0.5 * LINK_MASSES[1] * (v2[0] * v2[0] + v2[1] * v2[1]);
        assert!((ke - kinetic_energy(&s)).abs() < 1e-8);
    }
}
