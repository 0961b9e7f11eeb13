//! Linear-Gaussian motion models for the other drivers and the Gaussian
//! sensor model.
//!
//! Constant velocity uses the state `[x, vx, y, vy]` driven by white-noise
//! acceleration; constant acceleration uses `[x, vx, ax, y, vy, ay]` driven by
//! white-noise jerk. Both are the usual exact discretizations for a sampling
//! period `dt` and a continuous-time spectral density `q`.

use crate::kinematics::{heading_dir, heading_of, BehaviorMode, VehicleState};
use crate::linalg::{psd_factor, sample_gaussian, Mat, Vector};
use rand::Rng;

/// Dimension of the constant-velocity state.
pub const CV_DIM: usize = 4;
/// Dimension of the constant-acceleration state.
pub const CA_DIM: usize = 6;
/// Measured components: `x`, `y` and the speed along the known heading.
pub const MEAS_DIM: usize = 3;

/// Below this speed the heading of a predicted state is kept rather than
/// re-derived from a nearly-zero velocity vector.
const HEADING_SPEED_FLOOR: f64 = 0.5;

/// `x' = T x + w`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics<const N: usize> {
    pub transition: Mat<N, N>,
    pub process_noise: Mat<N, N>,
    pub spectral_density: f64,
    noise_factor: Mat<N, N>,
}

impl<const N: usize> LinearDynamics<N> {
    pub fn new(transition: Mat<N, N>, process_noise: Mat<N, N>, spectral_density: f64) -> Self {
        let noise_factor = psd_factor(&process_noise);
        Self {
            transition,
            process_noise,
            spectral_density,
            noise_factor,
        }
    }

    pub fn noise_factor(&self) -> &Mat<N, N> {
        &self.noise_factor
    }

    pub fn mean_step(&self, x: &Vector<N>) -> Vector<N> {
        self.transition * x
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, x: &Vector<N>, rng: &mut R) -> Vector<N> {
        sample_gaussian(&self.mean_step(x), &self.noise_factor, rng)
    }
}

pub type CvDynamics = LinearDynamics<CV_DIM>;
pub type CaDynamics = LinearDynamics<CA_DIM>;

/// Constant-velocity model with white-noise acceleration of density `q` (m²/s³).
pub fn constant_velocity(dt: f64, q: f64) -> CvDynamics {
    let mut t = Mat::<4, 4>::identity();
    let mut noise = Mat::<4, 4>::zeros();
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    for axis in 0..2 {
        let o = 2 * axis;
        t[(o, o + 1)] = dt;
        noise[(o, o)] = q * dt3 / 3.0;
        noise[(o, o + 1)] = q * dt2 / 2.0;
        noise[(o + 1, o)] = q * dt2 / 2.0;
        noise[(o + 1, o + 1)] = q * dt;
    }
    LinearDynamics::new(t, noise, q)
}

/// Constant-acceleration model with white-noise jerk of density `q` (m²/s⁵).
pub fn constant_acceleration(dt: f64, q: f64) -> CaDynamics {
    let mut t = Mat::<6, 6>::identity();
    let mut noise = Mat::<6, 6>::zeros();
    let p = [1.0, dt, dt * dt, dt * dt * dt, dt * dt * dt * dt, dt * dt * dt * dt * dt];
    let block = [
        [p[5] / 20.0, p[4] / 8.0, p[3] / 6.0],
        [p[4] / 8.0, p[3] / 3.0, p[2] / 2.0],
        [p[3] / 6.0, p[2] / 2.0, p[1]],
    ];
    for axis in 0..2 {
        let o = 3 * axis;
        t[(o, o + 1)] = dt;
        t[(o, o + 2)] = 0.5 * dt * dt;
        t[(o + 1, o + 2)] = dt;
        for i in 0..3 {
            for j in 0..3 {
                noise[(o + i, o + j)] = q * block[i][j];
            }
        }
    }
    LinearDynamics::new(t, noise, q)
}

/// Embeds a constant-velocity state into the constant-acceleration space
/// (zero acceleration); its transpose truncates in the other direction.
pub fn cv_to_ca_embedding() -> Mat<CA_DIM, CV_DIM> {
    let mut e = Mat::<6, 4>::zeros();
    e[(0, 0)] = 1.0;
    e[(1, 1)] = 1.0;
    e[(3, 2)] = 1.0;
    e[(4, 3)] = 1.0;
    e
}

/// Both motion hypotheses at one sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModels {
    pub cv: CvDynamics,
    pub ca: CaDynamics,
}

impl MotionModels {
    pub fn new(dt: f64, sigma_cv: f64, sigma_ca: f64) -> Self {
        Self {
            cv: constant_velocity(dt, sigma_cv),
            ca: constant_acceleration(dt, sigma_ca),
        }
    }
}

pub fn cv_vector(s: &VehicleState) -> Vector<CV_DIM> {
    let (hx, hy) = heading_dir(s.theta);
    Vector::<4>::new(s.x, s.v * hx, s.y, s.v * hy)
}

pub fn ca_vector(s: &VehicleState) -> Vector<CA_DIM> {
    let (hx, hy) = heading_dir(s.theta);
    Vector::<6>::from_column_slice(&[s.x, s.v * hx, s.a * hx, s.y, s.v * hy, s.a * hy])
}

/// Maps a predicted velocity back to speed and heading. Speed is clamped at
/// zero: a velocity that reverses against the previous heading means the car
/// has stopped.
fn speed_and_heading(prev_theta: f64, (hx, hy): (f64, f64), vx: f64, vy: f64) -> (f64, f64) {
    let along = vx * hx + vy * hy;
    if along <= 0.0 {
        return (0.0, prev_theta);
    }
    let speed = libm::sqrt(vx * vx + vy * vy);
    if speed < HEADING_SPEED_FLOOR {
        (along, prev_theta)
    } else {
        (speed, heading_of(vx, vy))
    }
}

pub fn state_from_cv(prev: &VehicleState, x: &Vector<CV_DIM>) -> VehicleState {
    cv_state(prev.theta, heading_dir(prev.theta), x)
}

pub fn state_from_ca(prev: &VehicleState, x: &Vector<CA_DIM>) -> VehicleState {
    ca_state(prev.theta, heading_dir(prev.theta), x)
}

fn cv_state(prev_theta: f64, dir: (f64, f64), x: &Vector<CV_DIM>) -> VehicleState {
    let (v, theta) = speed_and_heading(prev_theta, dir, x[1], x[3]);
    VehicleState::new(x[0], x[2], theta, v, 0.0)
}

fn ca_state(prev_theta: f64, dir: (f64, f64), x: &Vector<CA_DIM>) -> VehicleState {
    let (v, theta) = speed_and_heading(prev_theta, dir, x[1], x[4]);
    let (hx, hy) = if theta == prev_theta { dir } else { heading_dir(theta) };
    VehicleState::new(x[0], x[3], theta, v, x[2] * hx + x[5] * hy)
}

/// Advance another vehicle by one period under its behavior mode.
pub fn other_step<R: Rng + ?Sized>(vehicle: &VehicleState, mode: BehaviorMode, models: &MotionModels, rng: &mut R) -> VehicleState {
    let dir = heading_dir(vehicle.theta);
    let (hx, hy) = dir;
    let s = vehicle;
    match mode {
        BehaviorMode::ConstantVelocity => {
            let x = Vector::<4>::new(s.x, s.v * hx, s.y, s.v * hy);
            cv_state(s.theta, dir, &models.cv.sample_step(&x, rng))
        }
        BehaviorMode::ConstantAcceleration => {
            let x = Vector::<6>::from_column_slice(&[s.x, s.v * hx, s.a * hx, s.y, s.v * hy, s.a * hy]);
            ca_state(s.theta, dir, &models.ca.sample_step(&x, rng))
        }
    }
}

/// Linear measurement `z = H x + v`, `v ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<const N: usize, const M: usize> {
    pub projection: Mat<M, N>,
    pub noise: Mat<M, M>,
}

/// Gaussian sensor on position and speed; orientation is measured exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ObservationModel {
    /// Position noise standard deviation (m).
    pub sigma_p: f64,
    /// Velocity noise standard deviation (m/s).
    pub sigma_v: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            sigma_p: 0.1,
            sigma_v: 0.1,
        }
    }
}

impl ObservationModel {
    pub fn noise(&self) -> Mat<MEAS_DIM, MEAS_DIM> {
        let (p, v) = (self.sigma_p * self.sigma_p, self.sigma_v * self.sigma_v);
        Mat::<3, 3>::from_diagonal(&Vector::<3>::new(p, p, v))
    }

    /// The speed row projects the velocity onto the (known) heading.
    pub fn for_cv(&self, theta: f64) -> Measurement<CV_DIM, MEAS_DIM> {
        let (hx, hy) = heading_dir(theta);
        let mut h = Mat::<3, 4>::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 2)] = 1.0;
        h[(2, 1)] = hx;
        h[(2, 3)] = hy;
        Measurement {
            projection: h,
            noise: self.noise(),
        }
    }

    pub fn for_ca(&self, theta: f64) -> Measurement<CA_DIM, MEAS_DIM> {
        let (hx, hy) = heading_dir(theta);
        let mut h = Mat::<3, 6>::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 3)] = 1.0;
        h[(2, 1)] = hx;
        h[(2, 4)] = hy;
        Measurement {
            projection: h,
            noise: self.noise(),
        }
    }
}

/// Noisy reading of another vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VehicleObservation {
    pub z_x: f64,
    pub z_y: f64,
    pub theta: f64,
    pub z_v: f64,
}

impl VehicleObservation {
    pub fn vector(&self) -> Vector<MEAS_DIM> {
        Vector::<3>::new(self.z_x, self.z_y, self.z_v)
    }

    /// Treat the reading as a physical state (zero acceleration).
    pub fn as_state(&self) -> VehicleState {
        VehicleState::new(self.z_x, self.z_y, self.theta, self.z_v.max(0.0), 0.0)
    }
}

pub fn sample_observation<R: Rng + ?Sized>(vehicle: &VehicleState, obs: &ObservationModel, rng: &mut R) -> VehicleObservation {
    let noise = crate::linalg::standard_normal::<R, 3>(rng);
    VehicleObservation {
        z_x: vehicle.x + obs.sigma_p * noise[0],
        z_y: vehicle.y + obs.sigma_p * noise[1],
        theta: vehicle.theta,
        z_v: vehicle.v + obs.sigma_v * noise[2],
    }
}
