//! Interacting multiple model belief tracking.
//!
//! Each other vehicle carries a constant-velocity and a constant-acceleration
//! Kalman filter plus the probability of each mode. An update cycle mixes
//! the two model-conditioned estimates according to the switching matrix,
//! runs predict/update in each filter, and reweights the modes by their
//! measurement likelihoods. The constant-velocity estimate enters the
//! constant-acceleration space padded with zero acceleration and zero
//! acceleration variance; the reverse direction truncates.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::dynamics::{
    cv_to_ca_embedding, LinearDynamics, Measurement, MotionModels, ObservationModel, VehicleObservation, CA_DIM, CV_DIM,
};
use crate::error::FilterError;
use crate::kinematics::{heading_dir, BehaviorMode, VehicleState};
use crate::linalg::{is_psd, psd_factor, sample_gaussian, symmetrize, Mat, Vector};
use crate::model::{BehaviorSwitchMatrix, WorldState};
use crate::pomcp::Belief;

/// Mean and covariance of a model-conditioned state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimate<const N: usize> {
    pub mean: Vector<N>,
    pub covariance: Mat<N, N>,
}

impl<const N: usize> GaussianEstimate<N> {
    pub fn new(mean: Vector<N>, covariance: Mat<N, N>) -> Self {
        Self { mean, covariance }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && crate::linalg::asymmetry(&self.covariance) <= tol && is_psd(&self.covariance, tol)
    }
}

/// Measurement statistics of a Kalman update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    pub likelihood: f64,
    pub log_likelihood: f64,
    /// Normalized innovation squared.
    pub nis: f64,
}

pub fn kalman_predict<const N: usize>(est: &GaussianEstimate<N>, dynamics: &LinearDynamics<N>) -> GaussianEstimate<N> {
    let t = &dynamics.transition;
    GaussianEstimate {
        mean: t * est.mean,
        covariance: symmetrize(&(t * est.covariance * t.transpose() + dynamics.process_noise)),
    }
}

/// Kalman measurement update in Joseph form.
pub fn kalman_update<const N: usize, const M: usize>(
    est: &GaussianEstimate<N>,
    z: &Vector<M>,
    meas: &Measurement<N, M>,
) -> Result<(GaussianEstimate<N>, Innovation), FilterError> {
    let h = &meas.projection;
    let innovation = z - h * est.mean;
    let s = symmetrize(&(h * est.covariance * h.transpose() + meas.noise));
    let chol = nalgebra::Cholesky::new(s).ok_or(FilterError::SingularInnovation)?;
    let s_inv = chol.inverse();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * libm::log(*d)).sum();
    if !log_det.is_finite() {
        return Err(FilterError::SingularInnovation);
    }
    let nis = (innovation.transpose() * s_inv * innovation)[(0, 0)];
    let log_likelihood = -0.5 * (nis + log_det + M as f64 * libm::log(2.0 * PI));

    let gain = est.covariance * h.transpose() * s_inv;
    let i_kh = Mat::<N, N>::identity() - gain * h;
    let covariance = symmetrize(&(i_kh * est.covariance * i_kh.transpose() + gain * meas.noise * gain.transpose()));
    Ok((
        GaussianEstimate {
            mean: est.mean + gain * innovation,
            covariance,
        },
        Innovation {
            likelihood: libm::exp(log_likelihood),
            log_likelihood,
            nis,
        },
    ))
}

/// Two model-conditioned estimates (mode 0 in an `A`-dimensional space,
/// mode 1 in a `B`-dimensional one) and the mode probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePair<const A: usize, const B: usize> {
    pub first: GaussianEstimate<A>,
    pub second: GaussianEstimate<B>,
    pub probs: [f64; 2],
}

/// Per-cycle diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImmReport {
    pub log_likelihoods: [f64; 2],
    pub nis: [f64; 2],
    /// Both likelihoods vanished; the measurement was skipped.
    pub fallback: bool,
}

/// Models of one IMM cycle. `embed` maps the first space into the second.
pub struct ImmModels<'a, const A: usize, const B: usize, const M: usize> {
    pub switching: &'a BehaviorSwitchMatrix,
    pub first: &'a LinearDynamics<A>,
    pub second: &'a LinearDynamics<B>,
    pub embed: &'a Mat<B, A>,
    pub measure_first: &'a Measurement<A, M>,
    pub measure_second: &'a Measurement<B, M>,
}

fn outer<const N: usize>(d: &Vector<N>) -> Mat<N, N> {
    d * d.transpose()
}

/// Mixing, per-model filtering and likelihood reweighting.
pub fn imm_cycle<const A: usize, const B: usize, const M: usize>(
    prior: &ModePair<A, B>,
    z: &Vector<M>,
    models: &ImmModels<'_, A, B, M>,
) -> (ModePair<A, B>, ImmReport) {
    let p = &models.switching.p;
    let mu = prior.probs;
    let e = models.embed;

    // mixing
    let predicted = [p[0][0] * mu[0] + p[1][0] * mu[1], p[0][1] * mu[0] + p[1][1] * mu[1]];
    let weight = |i: usize, j: usize| {
        if predicted[j] > 0.0 {
            p[i][j] * mu[i] / predicted[j]
        } else if i == j {
            1.0
        } else {
            0.0
        }
    };

    let a_from_b_mean = e.transpose() * prior.second.mean;
    let a_from_b_cov = e.transpose() * prior.second.covariance * e;
    let (w00, w10) = (weight(0, 0), weight(1, 0));
    let mean0 = prior.first.mean * w00 + a_from_b_mean * w10;
    let d00 = prior.first.mean - mean0;
    let d10 = a_from_b_mean - mean0;
    let cov0 = (prior.first.covariance + outer(&d00)) * w00 + (a_from_b_cov + outer(&d10)) * w10;

    let b_from_a_mean = e * prior.first.mean;
    let b_from_a_cov = e * prior.first.covariance * e.transpose();
    let (w01, w11) = (weight(0, 1), weight(1, 1));
    let mean1 = b_from_a_mean * w01 + prior.second.mean * w11;
    let d01 = b_from_a_mean - mean1;
    let d11 = prior.second.mean - mean1;
    let cov1 = (b_from_a_cov + outer(&d01)) * w01 + (prior.second.covariance + outer(&d11)) * w11;

    // filtering
    let pred0 = kalman_predict(&GaussianEstimate::new(mean0, symmetrize(&cov0)), models.first);
    let pred1 = kalman_predict(&GaussianEstimate::new(mean1, symmetrize(&cov1)), models.second);
    let up0 = kalman_update(&pred0, z, models.measure_first).ok();
    let up1 = kalman_update(&pred1, z, models.measure_second).ok();
    let ll = [
        up0.as_ref().map_or(f64::NEG_INFINITY, |u| u.1.log_likelihood),
        up1.as_ref().map_or(f64::NEG_INFINITY, |u| u.1.log_likelihood),
    ];
    let nis = [
        up0.as_ref().map_or(f64::NAN, |u| u.1.nis),
        up1.as_ref().map_or(f64::NAN, |u| u.1.nis),
    ];

    // combining, in the log domain so tiny likelihoods do not underflow
    let log_w = [ll[0] + libm::log(predicted[0]), ll[1] + libm::log(predicted[1])];
    let max = log_w[0].max(log_w[1]);
    if !max.is_finite() {
        return (
            ModePair {
                first: pred0,
                second: pred1,
                probs: normalize(predicted),
            },
            ImmReport {
                log_likelihoods: ll,
                nis,
                fallback: true,
            },
        );
    }
    let w = [libm::exp(log_w[0] - max), libm::exp(log_w[1] - max)];
    let probs = normalize(w);
    let first = up0.map_or(pred0, |u| u.0);
    let second = up1.map_or(pred1, |u| u.0);
    (
        ModePair { first, second, probs },
        ImmReport {
            log_likelihoods: ll,
            nis,
            fallback: false,
        },
    )
}

fn normalize(w: [f64; 2]) -> [f64; 2] {
    let total = w[0] + w[1];
    if total > 0.0 && total.is_finite() {
        let p0 = w[0] / total;
        [p0, 1.0 - p0]
    } else {
        [0.5, 0.5]
    }
}

/// Moment-matched single Gaussian of the mode mixture, in the second space.
pub fn combine<const A: usize, const B: usize>(pair: &ModePair<A, B>, embed: &Mat<B, A>) -> GaussianEstimate<B> {
    let m0 = embed * pair.first.mean;
    let p0 = embed * pair.first.covariance * embed.transpose();
    let [mu0, mu1] = pair.probs;
    let mean = m0 * mu0 + pair.second.mean * mu1;
    let d0 = m0 - mean;
    let d1 = pair.second.mean - mean;
    let covariance = (p0 + outer(&d0)) * mu0 + (pair.second.covariance + outer(&d1)) * mu1;
    GaussianEstimate::new(mean, symmetrize(&covariance))
}

/// Settings of the per-vehicle filters.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmConfig {
    pub motion: MotionModels,
    pub switching: BehaviorSwitchMatrix,
    pub observation: ObservationModel,
    /// Acceleration variance given to a new track (m²/s⁴).
    pub initial_accel_variance: f64,
}

impl ImmConfig {
    pub fn new(dt: f64, sigma_cv: f64, sigma_ca: f64, switching: BehaviorSwitchMatrix, observation: ObservationModel) -> Self {
        Self {
            motion: MotionModels::new(dt, sigma_cv, sigma_ca),
            switching,
            observation,
            initial_accel_variance: 4.0,
        }
    }
}

/// Belief about one other vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    /// Heading, measured exactly and kept outside the filter state.
    pub theta: f64,
    pub modes: ModePair<CV_DIM, CA_DIM>,
}

impl Track {
    /// New track from a first detection: zero acceleration, symmetric mode
    /// prior, sensor-noise variances on position and velocity.
    pub fn from_observation(id: u64, z: &VehicleObservation, config: &ImmConfig) -> Self {
        let (hx, hy) = heading_dir(z.theta);
        let (vx, vy) = (z.z_v * hx, z.z_v * hy);
        let pv = config.observation.sigma_p * config.observation.sigma_p;
        let vv = config.observation.sigma_v * config.observation.sigma_v;
        let cv = GaussianEstimate::new(
            Vector::<4>::new(z.z_x, vx, z.z_y, vy),
            Mat::<4, 4>::from_diagonal(&Vector::<4>::new(pv, vv, pv, vv)),
        );
        let av = config.initial_accel_variance;
        let ca = GaussianEstimate::new(
            Vector::<6>::from_column_slice(&[z.z_x, vx, 0.0, z.z_y, vy, 0.0]),
            Mat::<6, 6>::from_diagonal(&Vector::<6>::from_column_slice(&[pv, vv, av, pv, vv, av])),
        );
        Self {
            id,
            theta: z.theta,
            modes: ModePair {
                first: cv,
                second: ca,
                probs: [0.5, 0.5],
            },
        }
    }

    pub fn mode_probabilities(&self) -> [f64; 2] {
        self.modes.probs
    }

    /// One IMM cycle with a new observation.
    pub fn step(&self, z: &VehicleObservation, config: &ImmConfig) -> (Track, ImmReport) {
        let embed = cv_to_ca_embedding();
        let m_cv = config.observation.for_cv(z.theta);
        let m_ca = config.observation.for_ca(z.theta);
        let models = ImmModels {
            switching: &config.switching,
            first: &config.motion.cv,
            second: &config.motion.ca,
            embed: &embed,
            measure_first: &m_cv,
            measure_second: &m_ca,
        };
        let (modes, report) = imm_cycle(&self.modes, &z.vector(), &models);
        (
            Track {
                id: self.id,
                theta: z.theta,
                modes,
            },
            report,
        )
    }

    pub fn combined(&self) -> GaussianEstimate<CA_DIM> {
        combine(&self.modes, &cv_to_ca_embedding())
    }
}

/// Numerical health of a belief.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hygiene {
    /// Covariances failing the `min eigenvalue >= -1e-9` check.
    pub non_psd: usize,
    /// Largest `|mu_cv + mu_ca - 1|`.
    pub max_prob_error: f64,
    /// Probabilities outside `[0, 1]`.
    pub bad_probs: usize,
}

impl Hygiene {
    pub fn merge(&mut self, other: &Hygiene) {
        self.non_psd += other.non_psd;
        self.bad_probs += other.bad_probs;
        self.max_prob_error = self.max_prob_error.max(other.max_prob_error);
    }

    pub fn is_clean(&self) -> bool {
        self.non_psd == 0 && self.bad_probs == 0 && self.max_prob_error <= 1e-9
    }
}

/// Belief over the full world: the exactly known ego plus one track per
/// observed vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmBelief {
    pub ego: VehicleState,
    pub ego_arclength: f64,
    pub tracks: Vec<Track>,
}

/// Outcome of a belief update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateSummary {
    pub new_tracks: usize,
    pub dropped_tracks: usize,
    pub fallbacks: usize,
}

impl ImmBelief {
    pub fn new(ego: VehicleState, ego_arclength: f64) -> Self {
        Self {
            ego,
            ego_arclength,
            tracks: Vec::new(),
        }
    }

    /// Replace the ego state, update matching tracks, start tracks for new
    /// vehicles and drop tracks that were not observed.
    pub fn update(
        &mut self,
        ego: VehicleState,
        ego_arclength: f64,
        observations: &[(u64, VehicleObservation)],
        config: &ImmConfig,
    ) -> UpdateSummary {
        let mut summary = UpdateSummary::default();
        let mut tracks = Vec::with_capacity(observations.len());
        for (id, z) in observations {
            match self.tracks.iter().find(|t| t.id == *id) {
                Some(track) => {
                    let (next, report) = track.step(z, config);
                    summary.fallbacks += report.fallback as usize;
                    tracks.push(next);
                }
                None => {
                    summary.new_tracks += 1;
                    tracks.push(Track::from_observation(*id, z, config));
                }
            }
        }
        summary.dropped_tracks = self.tracks.len() + summary.new_tracks - tracks.len();
        self.ego = ego;
        self.ego_arclength = ego_arclength;
        self.tracks = tracks;
        summary
    }

    pub fn combined_estimate(&self, index: usize) -> Result<GaussianEstimate<CA_DIM>, FilterError> {
        self.tracks.get(index).map(Track::combined).ok_or(FilterError::UnknownTrack(index))
    }

    pub fn hygiene(&self) -> Hygiene {
        let mut h = Hygiene::default();
        for t in &self.tracks {
            h.non_psd += !t.modes.first.is_valid(1e-9) as usize;
            h.non_psd += !t.modes.second.is_valid(1e-9) as usize;
            let [a, b] = t.modes.probs;
            h.bad_probs += (!(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b)) as usize;
            h.max_prob_error = h.max_prob_error.max((a + b - 1.0).abs());
        }
        h
    }

    /// Precompute covariance factors for repeated sampling.
    pub fn sampler(&self) -> PreparedBelief {
        PreparedBelief {
            ego: self.ego,
            ego_arclength: self.ego_arclength,
            tracks: self
                .tracks
                .iter()
                .map(|t| PreparedTrack {
                    theta: t.theta,
                    mu_cv: t.modes.probs[0],
                    cv_mean: t.modes.first.mean,
                    cv_factor: psd_factor(&t.modes.first.covariance),
                    ca_mean: t.modes.second.mean,
                    ca_factor: psd_factor(&t.modes.second.covariance),
                })
                .collect(),
        }
    }
}

/// One root state drawn from the belief.
pub fn belief_sample<R: Rng + ?Sized>(belief: &ImmBelief, rng: &mut R) -> WorldState {
    belief.sampler().sample(rng)
}

#[derive(Debug, Clone)]
struct PreparedTrack {
    theta: f64,
    mu_cv: f64,
    cv_mean: Vector<CV_DIM>,
    cv_factor: Mat<CV_DIM, CV_DIM>,
    ca_mean: Vector<CA_DIM>,
    ca_factor: Mat<CA_DIM, CA_DIM>,
}

/// [`ImmBelief`] with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct PreparedBelief {
    ego: VehicleState,
    ego_arclength: f64,
    tracks: Vec<PreparedTrack>,
}

impl PreparedBelief {
    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    /// Keep the tracks for which `keep(heading, x, y)` holds, judged on the
    /// constant-velocity mean. Returns how many were dropped.
    pub fn retain_tracks<F: FnMut(f64, f64, f64) -> bool>(&mut self, mut keep: F) -> usize {
        let before = self.tracks.len();
        self.tracks.retain(|t| keep(t.theta, t.cv_mean[0], t.cv_mean[2]));
        before - self.tracks.len()
    }
}

/// Physical state from a sampled filter state; the heading is the measured
/// one and speed/acceleration are the components along it.
fn state_along_heading(theta: f64, x: f64, y: f64, vx: f64, vy: f64, ax: f64, ay: f64) -> VehicleState {
    let (hx, hy) = heading_dir(theta);
    VehicleState::new(x, y, theta, (vx * hx + vy * hy).max(0.0), ax * hx + ay * hy)
}

impl Belief for PreparedBelief {
    type State = WorldState;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WorldState {
        let others = self
            .tracks
            .iter()
            .map(|t| {
                let u: f64 = rng.random();
                if u < t.mu_cv {
                    let s = sample_gaussian(&t.cv_mean, &t.cv_factor, rng);
                    (
                        state_along_heading(t.theta, s[0], s[2], s[1], s[3], 0.0, 0.0),
                        BehaviorMode::ConstantVelocity,
                    )
                } else {
                    let s = sample_gaussian(&t.ca_mean, &t.ca_factor, rng);
                    (
                        state_along_heading(t.theta, s[0], s[3], s[1], s[4], s[2], s[5]),
                        BehaviorMode::ConstantAcceleration,
                    )
                }
            })
            .collect();
        WorldState {
            ego: self.ego,
            ego_arclength: self.ego_arclength,
            others,
        }
    }
}

impl Belief for ImmBelief {
    type State = WorldState;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WorldState {
        self.sampler().sample(rng)
    }
}

/// Convenience aliases for the concrete filters.
pub type CvEstimate = GaussianEstimate<CV_DIM>;
pub type CaEstimate = GaussianEstimate<CA_DIM>;
