//! Chain builders and IK/Jacobian checks, shared with the acceptance suite.
//! The including crate must declare the `oracles` module at its root.

#![allow(dead_code)]

use assistlab_core::kinematics::{numeric_jacobian, ChainSpec, FrameSpec, JointSpec};
use assistlab_core::seeding::rng_from_seed;
use assistlab_core::{ik_dls, IkParams, JointChain, Pose6};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

use crate::oracles::{self, RawJoint};

pub fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n < 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub fn random_raw<R: Rng>(rng: &mut R, n: usize) -> Vec<RawJoint> {
    (0..n)
        .map(|_| RawJoint {
            xyz: [0.0; 3].map(|_: f64| rng.random_range(-0.3..0.3)),
            rpy: [0.0; 3].map(|_: f64| rng.random_range(-3.0..3.0)),
            axis: random_unit(rng),
            limits: [-3.0, 3.0],
        })
        .collect()
}

pub fn build(base: ([f64; 3], [f64; 3]), joints: &[RawJoint], ee: ([f64; 3], [f64; 3])) -> JointChain {
    ChainSpec {
        version: 1,
        base: FrameSpec { xyz: base.0, rpy: base.1 },
        joints: joints
            .iter()
            .enumerate()
            .map(|(i, j)| JointSpec {
                name: format!("j{i}"),
                xyz: j.xyz,
                rpy: j.rpy,
                axis: j.axis,
                limits: j.limits,
            })
            .collect(),
        ee: FrameSpec { xyz: ee.0, rpy: ee.1 },
    }
    .build()
    .unwrap()
}

pub fn random_q<R: Rng>(rng: &mut R, chain: &JointChain) -> Vec<f64> {
    chain.limits().map(|(lo, hi)| rng.random_range(lo..=hi)).collect()
}

/// Largest entry-wise gap between the analytic and central-difference Jacobians.
pub fn jacobian_fd_gap(chain: &JointChain, q: &[f64], h: f64) -> f64 {
    let j = chain.jacobian(q).unwrap();
    let fd = numeric_jacobian(chain, q, h).unwrap();
    let mut gap: f64 = 0.0;
    for r in 0..6 {
        for c in 0..q.len() {
            gap = gap.max((j[(r, c)] - fd[(r, c)]).abs());
        }
    }
    gap
}

/// Worst Jacobian gap over random 7-joint chains at two step sizes.
pub fn jacobian_fd_worst(chains: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..chains {
        let joints = random_raw(&mut rng, 7);
        let chain = build(([0.0; 3], [0.1, 0.2, 0.3]), &joints, ([0.0, 0.0, 0.1], [0.0; 3]));
        // stay inside the limits so both stencil points are valid
        let q: Vec<f64> = (0..7).map(|_| rng.random_range(-2.9..2.9)).collect();
        worst = worst.max(jacobian_fd_gap(&chain, &q, 1e-6)).max(jacobian_fd_gap(&chain, &q, 1e-5));
    }
    worst
}

pub fn planar(l1: f64, l2: f64) -> JointChain {
    let z = [0.0, 0.0, 1.0];
    build(
        ([0.0; 3], [0.0; 3]),
        &[
            RawJoint { xyz: [0.0; 3], rpy: [0.0; 3], axis: z, limits: [-3.1, 3.1] },
            RawJoint { xyz: [l1, 0.0, 0.0], rpy: [0.0; 3], axis: z, limits: [-3.1, 3.1] },
        ],
        ([l2, 0.0, 0.0], [0.0; 3]),
    )
}

/// Solves the unit two-link arm for (1, 1) and compares with the closed
/// form. The planar target carries the analytic solution's own heading.
pub fn two_link_agreement() -> Result<(), String> {
    let chain = planar(1.0, 1.0);
    let branches = oracles::two_link_ik(1.0, 1.0, 1.0, 1.0).ok_or("closed form found no solution")?;
    let heading = branches[0][0] + branches[0][1];
    let target = Pose6::new(Vector3::new(1.0, 1.0, 0.0), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading));
    let params = IkParams { max_iterations: 500, position_tolerance: 1e-5, orientation_tolerance: 1e-5, ..Default::default() };
    let sol = ik_dls(&chain, &[0.3, 0.8], &target, &params).map_err(|e| e.to_string())?;
    let ee = chain.forward_kinematics(&sol.q).map_err(|e| e.to_string())?.end_effector;
    let miss = (ee.position - target.position).norm();
    if miss >= 1e-3 {
        return Err(format!("end effector misses the target by {miss}"));
    }
    let matches_branch = branches
        .iter()
        .any(|b| oracles::wrap_angle(b[0] - sol.q[0]).abs() < 1e-3 && (b[1] - sol.q[1]).abs() < 1e-3);
    if !matches_branch {
        return Err(format!("{:?} matches neither branch of {:?}", sol.q, branches));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct RoundTrip {
    pub rate: f64,
    pub max_iterations: usize,
    pub all_within_limits: bool,
}

/// Fraction of FK-generated targets the solver reaches from a neutral seed
/// (position < 1 cm, orientation < 0.05 rad) with default parameters.
pub fn ik_round_trip(chain: &JointChain, n: usize, seed: u64) -> RoundTrip {
    let params = IkParams::default();
    let neutral = [0.0, 0.0, 0.0, 1.2, 0.0, 0.0, 0.0];
    let mut rng = rng_from_seed(seed);
    let mut ok = 0;
    let mut max_iterations = 0;
    let mut all_within_limits = true;
    for _ in 0..n {
        let q = random_q(&mut rng, chain);
        let target = chain.forward_kinematics(&q).unwrap().end_effector;
        let sol = ik_dls(chain, &neutral, &target, &params).unwrap();
        max_iterations = max_iterations.max(sol.iterations);
        all_within_limits &= chain.within_limits(&sol.q);
        if sol.position_residual < 0.01 && sol.orientation_residual < 0.05 {
            ok += 1;
        }
    }
    RoundTrip { rate: ok as f64 / n as f64, max_iterations, all_within_limits }
}
