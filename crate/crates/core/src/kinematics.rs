//! Serial revolute chains: forward kinematics, geometric Jacobians and
//! damped-least-squares inverse kinematics.
//!
//! Used for both the avatar arms and the robot arm. All operations are pure
//! functions of their inputs.

use nalgebra::{DMatrix, DVector, Matrix6, Matrix6xX, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::pose::{rotation_vector, Pose6};

/// Chain schema version understood by [`ChainSpec`].
pub const CHAIN_SCHEMA_VERSION: u32 = 1;

const AXIS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("joint {index} value {value} outside limits [{lo}, {hi}]")]
    JointLimitViolation { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("unsupported chain schema version {0}")]
    UnsupportedVersion(u32),
    #[error("chain config: {0}")]
    Parse(String),
}

/// One revolute joint: a fixed offset from the previous frame followed by a
/// rotation about `axis` (expressed in the offset frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub offset: Pose6,
    pub axis: Unit<Vector3<f64>>,
    pub limits: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointChain {
    base: Pose6,
    links: Vec<Link>,
    ee_offset: Pose6,
}

/// Per-link frames (after each joint rotation) and the end-effector frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    pub links: Vec<Pose6>,
    pub end_effector: Pose6,
}

impl JointChain {
    pub fn new(base: Pose6, links: Vec<Link>, ee_offset: Pose6) -> Result<Self, KinematicsError> {
        if links.is_empty() {
            return Err(KinematicsError::InvalidChain("chain has no joints".into()));
        }
        for (i, l) in links.iter().enumerate() {
            if (l.axis.norm() - 1.0).abs() > AXIS_TOLERANCE {
                return Err(KinematicsError::InvalidChain(format!("joint {i} axis is not unit")));
            }
            if !(l.limits.0 <= l.limits.1) {
                return Err(KinematicsError::InvalidChain(format!("joint {i} has lo > hi")));
            }
        }
        Ok(Self { base, links, ee_offset })
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn base(&self) -> &Pose6 {
        &self.base
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn ee_offset(&self) -> &Pose6 {
        &self.ee_offset
    }

    pub fn limits(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.links.iter().map(|l| l.limits)
    }

    /// Same links and tool frame on a different base.
    pub fn with_base(&self, base: Pose6) -> Self {
        Self { base, ..self.clone() }
    }

    /// Appends a fixed tool frame after the current end-effector offset.
    pub fn with_tool(&self, tool: &Pose6) -> Self {
        Self {
            ee_offset: self.ee_offset.compose(tool),
            ..self.clone()
        }
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, l) in q.iter_mut().zip(&self.links) {
            *v = v.clamp(l.limits.0, l.limits.1);
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        self.check(q).is_ok()
    }

    fn check_dim(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.links.len() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.links.len(),
                got: q.len(),
            });
        }
        Ok(())
    }

    fn check(&self, q: &[f64]) -> Result<(), KinematicsError> {
        self.check_dim(q)?;
        for (index, (&value, l)) in q.iter().zip(&self.links).enumerate() {
            let (lo, hi) = l.limits;
            if !(value >= lo && value <= hi) {
                return Err(KinematicsError::JointLimitViolation { index, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Forward kinematics. Joint values outside the limits are an error.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<FkResult, KinematicsError> {
        self.check(q)?;
        Ok(self.fk_unchecked(q))
    }

    fn fk_unchecked(&self, q: &[f64]) -> FkResult {
        let mut frame = self.base;
        let mut links = Vec::with_capacity(self.links.len());
        for (l, &angle) in self.links.iter().zip(q) {
            frame = frame.compose(&l.offset);
            frame.orientation *= UnitQuaternion::from_axis_angle(&l.axis, angle);
            links.push(frame);
        }
        let end_effector = frame.compose(&self.ee_offset);
        FkResult { links, end_effector }
    }

    /// Geometric Jacobian, linear rows first then angular rows, world frame.
    pub fn jacobian(&self, q: &[f64]) -> Result<Matrix6xX<f64>, KinematicsError> {
        self.check(q)?;
        Ok(self.jacobian_of(&self.fk_unchecked(q)))
    }

    fn jacobian_of(&self, fk: &FkResult) -> Matrix6xX<f64> {
        let p_ee = fk.end_effector.position;
        let mut j = Matrix6xX::zeros(self.links.len());
        for (i, (frame, l)) in fk.links.iter().zip(&self.links).enumerate() {
            let axis = frame.orientation * l.axis.into_inner();
            let lin = axis.cross(&(p_ee - frame.position));
            j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
        }
        j
    }
}

/// Damped-least-squares solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    pub step_scale: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iterations: 100,
            position_tolerance: 0.005,
            orientation_tolerance: 0.02,
            step_scale: 0.5,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let ok = self.damping >= 0.0
            && self.max_iterations > 0
            && self.position_tolerance > 0.0
            && self.orientation_tolerance > 0.0
            && self.step_scale > 0.0
            && self.step_scale <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(KinematicsError::InvalidChain(format!("invalid ik params {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Vec<f64>,
    /// Position residual in meters.
    pub position_residual: f64,
    /// Orientation residual in radians.
    pub orientation_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Pose error `(target.p - current.p, rotvec(target ∘ current⁻¹))`.
pub fn pose_error(current: &Pose6, target: &Pose6) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = rotation_vector(&(target.orientation * current.orientation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Damped-least-squares IK: `Δq = s · Jᵀ (J Jᵀ + λ² I)⁻¹ e`, clamped to the
/// joint limits after every iteration. A joint sitting at a limit whose step
/// points further out is removed from `J` for that iteration.
///
/// Unreachable targets are not an error: the best iterate is returned with
/// `converged = false`.
pub fn ik_dls(
    chain: &JointChain,
    q0: &[f64],
    target: &Pose6,
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    chain.check(q0)?;
    params.validate()?;
    let n = chain.dof();
    let lambda2 = params.damping * params.damping;
    let mut q = q0.to_vec();

    let residuals = |e: &Vector6<f64>| {
        (
            e.fixed_rows::<3>(0).norm(),
            e.fixed_rows::<3>(3).norm(),
        )
    };

    let mut best: Option<(f64, Vec<f64>, f64, f64)> = None;
    for iteration in 0..=params.max_iterations {
        let fk = chain.fk_unchecked(&q);
        let e = pose_error(&fk.end_effector, target);
        let (pos_res, ori_res) = residuals(&e);
        // score in meters with 1 rad ~ 0.1 m, used only to pick a best-effort answer
        let score = pos_res + 0.1 * ori_res;
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, q.clone(), pos_res, ori_res));
        }
        if pos_res <= params.position_tolerance && ori_res <= params.orientation_tolerance {
            return Ok(IkSolution {
                q,
                position_residual: pos_res,
                orientation_residual: ori_res,
                converged: true,
                iterations: iteration,
            });
        }
        if iteration == params.max_iterations {
            break;
        }
        let mut j = chain.jacobian_of(&fk);
        let Some(mut dq) = dls_step(&j, &e, lambda2) else { break };
        // joints already pinned at a limit and pushed further out would be
        // clamped straight back; drop them so the others take up the error
        let mut pinned = false;
        for (i, l) in chain.links.iter().enumerate() {
            if (q[i] <= l.limits.0 && dq[i] < 0.0) || (q[i] >= l.limits.1 && dq[i] > 0.0) {
                j.column_mut(i).fill(0.0);
                pinned = true;
            }
        }
        if pinned {
            let Some(d) = dls_step(&j, &e, lambda2) else { break };
            dq = d;
        }
        dq *= params.step_scale;
        for (qi, d) in q.iter_mut().zip(dq.iter()) {
            *qi += d;
        }
        chain.clamp(&mut q);
        debug_assert_eq!(q.len(), n);
    }
    let (_, q, pos_res, ori_res) = best.expect("at least one iterate");
    Ok(IkSolution {
        q,
        position_residual: pos_res,
        orientation_residual: ori_res,
        converged: false,
        iterations: params.max_iterations,
    })
}

/// `Jᵀ (J Jᵀ + λ² I)⁻¹ e`, Cholesky first with an LU fallback.
fn dls_step(j: &Matrix6xX<f64>, e: &Vector6<f64>, lambda2: f64) -> Option<DVector<f64>> {
    let jjt: Matrix6<f64> = j * j.transpose() + Matrix6::identity() * lambda2;
    let y = match jjt.cholesky() {
        Some(c) => c.solve(e),
        None => jjt.lu().solve(e)?,
    };
    Some(j.transpose() * y)
}

/// Numeric Jacobian by central differences; handy for diagnostics.
pub fn numeric_jacobian(chain: &JointChain, q: &[f64], h: f64) -> Result<DMatrix<f64>, KinematicsError> {
    chain.check_dim(q)?;
    let n = chain.dof();
    let mut out = DMatrix::zeros(6, n);
    for i in 0..n {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[i] += h;
        qm[i] -= h;
        let a = chain.fk_unchecked(&qp).end_effector;
        let b = chain.fk_unchecked(&qm).end_effector;
        let dp = (a.position - b.position) / (2.0 * h);
        let dr = rotation_vector(&(a.orientation * b.orientation.inverse())) / (2.0 * h);
        for r in 0..3 {
            out[(r, i)] = dp[r];
            out[(r + 3, i)] = dr[r];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// TOML chain schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl FrameSpec {
    pub fn pose(&self) -> Pose6 {
        Pose6::from_xyz_rpy(self.xyz, self.rpy)
    }
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { xyz: [0.0; 3], rpy: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    pub axis: [f64; 3],
    pub limits: [f64; 2],
}

/// Chain description as stored in TOML.
///
/// ```toml
/// version = 1
/// [base]
/// xyz = [0.0, 0.0, 0.0]
/// rpy = [0.0, 0.0, 0.0]
/// [[joint]]
/// name = "shoulder_pan"
/// xyz = [0.0, 0.0, 0.15]   # offset from the previous joint frame
/// rpy = [0.0, 0.0, 0.0]
/// axis = [0.0, 0.0, 1.0]
/// limits = [-3.0, 3.0]     # radians
/// [ee]
/// xyz = [0.0, 0.0, 0.1]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub version: u32,
    #[serde(default)]
    pub base: FrameSpec,
    #[serde(rename = "joint")]
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub ee: FrameSpec,
}

impl ChainSpec {
    pub fn from_toml(text: &str) -> Result<Self, KinematicsError> {
        let spec: ChainSpec = toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
        if spec.version != CHAIN_SCHEMA_VERSION {
            return Err(KinematicsError::UnsupportedVersion(spec.version));
        }
        Ok(spec)
    }

    pub fn build(&self) -> Result<JointChain, KinematicsError> {
        let links = self
            .joints
            .iter()
            .map(|j| {
                let axis = Vector3::from(j.axis);
                if (axis.norm() - 1.0).abs() > AXIS_TOLERANCE {
                    return Err(KinematicsError::InvalidChain(format!(
                        "joint '{}' axis is not unit",
                        j.name
                    )));
                }
                Ok(Link {
                    offset: Pose6::from_xyz_rpy(j.xyz, j.rpy),
                    axis: Unit::new_unchecked(axis),
                    limits: (j.limits[0], j.limits[1]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        JointChain::new(self.base.pose(), links, self.ee.pose())
    }
}
