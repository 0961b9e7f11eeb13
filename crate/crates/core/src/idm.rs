//! Intelligent Driver Model car following.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};

/// Hard floor on commanded deceleration (m/s²).
pub const IDM_MIN_ACCEL: f64 = -9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub v0: f64,
    /// Time headway (s).
    pub time_headway: f64,
    /// Jam distance (m).
    pub s0: f64,
    pub a_max: f64,
    pub b_comf: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 13.88,
            time_headway: 1.0,
            s0: 2.0,
            a_max: 2.0,
            b_comf: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [self.v0, self.time_headway, self.s0, self.a_max, self.b_comf];
        if positive.iter().any(|p| !(*p > 0.0)) {
            return Err(ConfigError::invalid("idm", "parameters must be positive"));
        }
        if !(self.delta >= 1.0) {
            return Err(ConfigError::invalid("idm.delta", "must be at least 1"));
        }
        Ok(())
    }

    /// Desired dynamic gap `s*`.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        self.s0 + v * self.time_headway + v * dv / (2.0 * libm::sqrt(self.a_max * self.b_comf))
    }
}

/// IDM acceleration for speed `v`, bumper gap `gap` to the leader
/// (`f64::INFINITY` on a free road) and closing speed `dv = v - v_leader`.
pub fn idm_accel(v: f64, gap: f64, dv: f64, params: &IdmParams) -> Result<f64, SimError> {
    if !(gap > 0.0) {
        return Err(SimError::Overlap(gap));
    }
    let free = 1.0 - libm::pow(v / params.v0, params.delta);
    let interaction = if gap.is_finite() {
        let ratio = params.desired_gap(v, dv) / gap;
        ratio * ratio
    } else {
        0.0
    };
    Ok((params.a_max * (free - interaction)).clamp(IDM_MIN_ACCEL, params.a_max))
}
