//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's math: matrices are plain arrays,
//! rotations are built from scratch.

#![allow(dead_code)]

pub type M4 = [[f64; 4]; 4];

pub fn identity() -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn with_rotation(r: [[f64; 3]; 3], t: [f64; 3]) -> M4 {
    let mut m = identity();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j];
        }
        m[i][3] = t[i];
    }
    m
}

/// Rotation about a unit axis (Rodrigues).
pub fn axis_angle(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let v = 1.0 - c;
    [
        [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
        [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
        [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
    ]
}

/// Fixed-axis roll-pitch-yaw: `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn rpy(r: [f64; 3]) -> [[f64; 3]; 3] {
    let m = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    };
    let rz = axis_angle([0.0, 0.0, 1.0], r[2]);
    let ry = axis_angle([0.0, 1.0, 0.0], r[1]);
    let rx = axis_angle([1.0, 0.0, 0.0], r[0]);
    m(m(rz, ry), rx)
}

pub fn frame(xyz: [f64; 3], r: [f64; 3]) -> M4 {
    with_rotation(rpy(r), xyz)
}

pub fn joint(axis: [f64; 3], q: f64) -> M4 {
    with_rotation(axis_angle(axis, q), [0.0; 3])
}

/// Raw chain description consumed by the oracle.
#[derive(Debug, Clone)]
pub struct RawJoint {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
    pub axis: [f64; 3],
    pub limits: [f64; 2],
}

/// `base · Π (offset_i · R(axis_i, q_i)) · ee` as a 4×4 product.
pub fn fk_matrix(base: (&[f64; 3], &[f64; 3]), joints: &[RawJoint], ee: (&[f64; 3], &[f64; 3]), q: &[f64]) -> M4 {
    let mut t = frame(*base.0, *base.1);
    for (j, qi) in joints.iter().zip(q) {
        t = mul(&t, &frame(j.xyz, j.rpy));
        t = mul(&t, &joint(j.axis, *qi));
    }
    mul(&t, &frame(*ee.0, *ee.1))
}

/// Verbatim waist formulas with the standard library's trig.
pub fn align_waist_ref(psi: [f64; 3]) -> (f64, f64, f64) {
    let at = |y: f64, x: f64| if y == 0.0 && x == 0.0 { 0.0 } else { y.atan2(x) };
    let r = at(psi[1], psi[2]);
    let p = at(psi[0] * r.cos(), psi[2]);
    let y = at(r.cos(), r.sin() * p.sin());
    (r, p, y)
}

/// Closed-form planar two-link IK; returns both elbow branches.
pub fn two_link_ik(x: f64, y: f64, l1: f64, l2: f64) -> Option<[[f64; 2]; 2]> {
    let c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let mut out = [[0.0; 2]; 2];
    for (k, s) in [1.0f64, -1.0].into_iter().enumerate() {
        let q2 = s * (1.0 - c2 * c2).sqrt().atan2(c2);
        let q1 = y.atan2(x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
        out[k] = [q1, q2];
    }
    Some(out)
}

/// Kolmogorov–Smirnov statistic of `samples` against U(lo, hi).
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI
}
