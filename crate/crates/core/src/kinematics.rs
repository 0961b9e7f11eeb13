//! Vehicle physical state, behavior modes and the ego action set.
//!
//! Headings follow a compass-like convention: `theta = 0` points along `+y`
//! and `theta = pi/2` along `+x`, so a vehicle moving at speed `v` has
//! velocity `(v sin theta, v cos theta)`.

use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = libm::fmod(theta, 2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Unit direction vector for a heading.
#[inline]
pub fn heading_dir(theta: f64) -> (f64, f64) {
    libm::sincos(theta)
}

/// Heading of a planar vector, inverse of [`heading_dir`].
#[inline]
pub fn heading_of(dx: f64, dy: f64) -> f64 {
    libm::atan2(dx, dy)
}

/// Pose, speed and longitudinal acceleration of a single car.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub a: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, a: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
            v: v.max(0.0),
            a,
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        let (sx, sy) = heading_dir(self.theta);
        (self.v * sx, self.v * sy)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.theta.is_finite()
            && self.v.is_finite()
            && self.a.is_finite()
            && self.v >= 0.0
            && self.theta > -PI
            && self.theta <= PI
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Latent driver model of another vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum BehaviorMode {
    ConstantVelocity,
    ConstantAcceleration,
}

impl BehaviorMode {
    pub const ALL: [BehaviorMode; 2] = [BehaviorMode::ConstantVelocity, BehaviorMode::ConstantAcceleration];

    pub fn index(self) -> usize {
        match self {
            BehaviorMode::ConstantVelocity => 0,
            BehaviorMode::ConstantAcceleration => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            BehaviorMode::ConstantVelocity
        } else {
            BehaviorMode::ConstantAcceleration
        }
    }
}

/// Longitudinal acceleration command of the ego car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum AccelAction {
    StrongBrake,
    ModerateBrake,
    Maintain,
    Accelerate,
}

impl AccelAction {
    /// In increasing acceleration order; the index into this array is the
    /// action index used for tie-breaking.
    pub const ALL: [AccelAction; 4] = [
        AccelAction::StrongBrake,
        AccelAction::ModerateBrake,
        AccelAction::Maintain,
        AccelAction::Accelerate,
    ];

    /// Acceleration in m/s².
    pub fn value(self) -> f64 {
        match self {
            AccelAction::StrongBrake => -4.0,
            AccelAction::ModerateBrake => -2.0,
            AccelAction::Maintain => 0.0,
            AccelAction::Accelerate => 2.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Nearest action to a continuous acceleration. Ties go to the action
    /// with the smaller magnitude.
    pub fn nearest(accel: f64) -> AccelAction {
        let mut best = AccelAction::Maintain;
        let mut best_err = f64::INFINITY;
        for action in AccelAction::ALL {
            let err = (action.value() - accel).abs();
            if err < best_err || (err == best_err && action.value().abs() < best.value().abs()) {
                best = action;
                best_err = err;
            }
        }
        best
    }
}

impl core::fmt::Display for AccelAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:+}", self.value())
    }
}
