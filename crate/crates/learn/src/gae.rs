//! Generalized advantage estimation.

use crate::LearnError;

/// Advantages and returns for a flat sequence of steps.
///
/// `values` holds one estimate per step plus a bootstrap value for the state
/// after the last step. A `done` flag cuts both the bootstrap and the
/// advantage recursion at that step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
    let n = rewards.len();
    if dones.len() != n {
        return Err(LearnError::DimensionMismatch { expected: n, got: dones.len() });
    }
    if values.len() != n + 1 {
        return Err(LearnError::DimensionMismatch { expected: n + 1, got: values.len() });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}
