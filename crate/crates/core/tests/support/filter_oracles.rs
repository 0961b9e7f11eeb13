// Brute-force references for the IMM filter, shared by the filter tests and
// the acceptance run.
#![allow(dead_code)]

use crossing_core::dynamics::{LinearDynamics, Measurement, MotionModels, ObservationModel};
use crossing_core::imm::{imm_cycle, kalman_predict, kalman_update, GaussianEstimate, ImmModels, ModePair};
use crossing_core::linalg::{Mat, Vector};
use crossing_core::model::BehaviorSwitchMatrix;

/// Scalar two-mode problem: mode 0 is a random walk, mode 1 a damped one.
pub struct Scalar {
    pub switching: BehaviorSwitchMatrix,
    pub walk: LinearDynamics<1>,
    pub damped: LinearDynamics<1>,
    pub measure: Measurement<1, 1>,
    pub prior: GaussianEstimate<1>,
    pub mu: [f64; 2],
}

impl Scalar {
    pub fn new(switching: BehaviorSwitchMatrix, r: f64) -> Self {
        Self {
            switching,
            walk: LinearDynamics::new(Mat::<1, 1>::new(1.0), Mat::<1, 1>::new(0.5), 0.5),
            damped: LinearDynamics::new(Mat::<1, 1>::new(0.6), Mat::<1, 1>::new(0.2), 0.2),
            measure: Measurement {
                projection: Mat::<1, 1>::new(1.0),
                noise: Mat::<1, 1>::new(r),
            },
            prior: GaussianEstimate::new(Vector::<1>::new(0.3), Mat::<1, 1>::new(1.0)),
            mu: [0.3, 0.7],
        }
    }

    /// Mode probabilities after the IMM processes `zs`.
    pub fn imm(&self, zs: &[f64]) -> [f64; 2] {
        let embed = Mat::<1, 1>::identity();
        let models = ImmModels {
            switching: &self.switching,
            first: &self.walk,
            second: &self.damped,
            embed: &embed,
            measure_first: &self.measure,
            measure_second: &self.measure,
        };
        let mut pair = ModePair {
            first: self.prior.clone(),
            second: self.prior.clone(),
            probs: self.mu,
        };
        for z in zs {
            pair = imm_cycle(&pair, &Vector::<1>::new(*z), &models).0;
        }
        pair.probs
    }

    /// Exact posterior of the last mode, enumerating every mode sequence
    /// and running one Kalman filter per sequence.
    pub fn exhaustive(&self, zs: &[f64]) -> [f64; 2] {
        let n = zs.len();
        let p = &self.switching.p;
        let mut post = [0.0; 2];
        for code in 0..(1usize << n) {
            let modes: Vec<usize> = (0..n).map(|k| (code >> k) & 1).collect();
            let mut prior = 0.0;
            for (m0, mu0) in self.mu.iter().enumerate() {
                let mut w = *mu0;
                let mut prev = m0;
                for &m in &modes {
                    w *= p[prev][m];
                    prev = m;
                }
                prior += w;
            }
            if prior == 0.0 {
                continue;
            }
            let mut est = self.prior.clone();
            let mut lik = 1.0;
            for (k, &m) in modes.iter().enumerate() {
                let dynamics = if m == 0 { &self.walk } else { &self.damped };
                let (next, innov) = kalman_update(&kalman_predict(&est, dynamics), &Vector::<1>::new(zs[k]), &self.measure).unwrap();
                lik *= innov.likelihood;
                est = next;
            }
            post[modes[n - 1]] += prior * lik;
        }
        let total = post[0] + post[1];
        [post[0] / total, post[1] / total]
    }
}

/// Largest gap between the first-mode IMM estimate and a plain CV Kalman
/// filter when the IMM is pinned to that mode.
pub fn single_mode_gap(observations: &[(f64, f64, f64)], theta: f64) -> f64 {
    let motion = MotionModels::new(0.25, 1.0, 1.0);
    let obs = ObservationModel::default();
    let switching = BehaviorSwitchMatrix::identity();
    let embed = crossing_core::dynamics::cv_to_ca_embedding();
    let m_cv = obs.for_cv(theta);
    let m_ca = obs.for_ca(theta);
    let models = ImmModels {
        switching: &switching,
        first: &motion.cv,
        second: &motion.ca,
        embed: &embed,
        measure_first: &m_cv,
        measure_second: &m_ca,
    };
    let start = GaussianEstimate::new(Vector::<4>::new(0.0, 10.0, 0.0, 0.0), Mat::<4, 4>::identity() * 0.5);
    let mut pair = ModePair {
        first: start.clone(),
        second: GaussianEstimate::new(Vector::<6>::zeros(), Mat::<6, 6>::identity()),
        probs: [1.0, 0.0],
    };
    let mut plain = start;
    let mut worst: f64 = 0.0;
    for &(x, y, v) in observations {
        let z = Vector::<3>::new(x, y, v);
        pair = imm_cycle(&pair, &z, &models).0;
        plain = kalman_update(&kalman_predict(&plain, &motion.cv), &z, &m_cv).unwrap().0;
        worst = worst
            .max((pair.first.mean - plain.mean).amax())
            .max((pair.first.covariance - plain.covariance).amax());
    }
    worst
}
