use nalgebra::{Matrix2, Vector2};

use super::particles::ParticleSet;
use super::ImageUpdateError;
use crate::encoder_filter::{BeliefVector, JointBelief};

/// Floor applied to moment-matched variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Smallest prior angle variance [`recombine_bias`] accepts.
pub const MIN_ANGLE_VARIANCE: f64 = 1e-15;

/// 1-D Gaussian as `(mean, variance)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub var: f64,
}

/// Angle marginal of each joint: the bias row and column are dropped.
pub fn angle_prior_marginals(beliefs: &BeliefVector) -> Vec<Gaussian1> {
    beliefs
        .joints
        .iter()
        .map(|b| Gaussian1 {
            mean: b.mean[0],
            var: b.cov[(0, 0)],
        })
        .collect()
}

/// Per-dimension Gaussian fit of a particle set.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatch {
    pub marginals: Vec<Gaussian1>,
    /// Dimensions whose variance fell below [`VARIANCE_FLOOR`] and was raised to it.
    pub floored: Vec<bool>,
}

impl MomentMatch {
    pub fn any_floored(&self) -> bool {
        self.floored.iter().any(|&f| f)
    }
}

/// Weighted mean and variance per dimension. With bitwise-uniform weights the
/// plain `(1/L) sum` formulas are used, summed in particle order.
pub fn moment_match(particles: &ParticleSet) -> MomentMatch {
    let n = particles.count();
    let dim = particles.dim();
    let mut marginals = Vec::with_capacity(dim);
    let mut floored = Vec::with_capacity(dim);
    if particles.has_uniform_weights() {
        let inv = n as f64;
        for j in 0..dim {
            let mut s = 0.0;
            for l in 0..n {
                s += particles.particle(l)[j];
            }
            let mean = s / inv;
            let mut v = 0.0;
            for l in 0..n {
                let d = particles.particle(l)[j] - mean;
                v += d * d;
            }
            let var = v / inv;
            floored.push(var < VARIANCE_FLOOR);
            marginals.push(Gaussian1 {
                mean,
                var: var.max(VARIANCE_FLOOR),
            });
        }
    } else {
        let w = particles.weights();
        for j in 0..dim {
            let mut mean = 0.0;
            for (l, wl) in w.iter().enumerate() {
                mean += wl * particles.particle(l)[j];
            }
            let mut var = 0.0;
            for (l, wl) in w.iter().enumerate() {
                let d = particles.particle(l)[j] - mean;
                var += wl * d * d;
            }
            floored.push(var < VARIANCE_FLOOR);
            marginals.push(Gaussian1 {
                mean,
                var: var.max(VARIANCE_FLOOR),
            });
        }
    }
    MomentMatch { marginals, floored }
}

/// Replaces the angle marginal of `prior` by `angle_post` while keeping the
/// prior's conditional `p(bias | angle)`.
///
/// With gain `k = S_ab / S_aa` and ratio `r = S' / S_aa` the result is
/// mean `(m', m_b + k (m' - m_a))` and covariance
/// `[[S', S_ab r], [S_ab r, S_bb + (S_ab^2 / S_aa)(r - 1)]]`, which is the
/// usual `[[S', k S'], [k S', S_bb - k S_ab + k^2 S']]` written so that an
/// unchanged angle marginal reproduces the prior exactly.
pub fn recombine_bias(prior: &JointBelief, angle_post: Gaussian1) -> Result<JointBelief, ImageUpdateError> {
    let saa = prior.cov[(0, 0)];
    let sab = prior.cov[(0, 1)];
    let sbb = prior.cov[(1, 1)];
    if !(saa >= MIN_ANGLE_VARIANCE) {
        return Err(ImageUpdateError::DegenerateVariance(saa));
    }
    if !(angle_post.var > 0.0) {
        return Err(ImageUpdateError::DegenerateVariance(angle_post.var));
    }
    let k = sab / saa;
    let r = angle_post.var / saa;
    let cross = sab * r;
    let bias_var = sbb + (sab * sab / saa) * (r - 1.0);
    Ok(JointBelief {
        mean: Vector2::new(angle_post.mean, prior.mean[1] + k * (angle_post.mean - prior.mean[0])),
        cov: Matrix2::new(angle_post.var, cross, cross, bias_var),
        timestamp: prior.timestamp,
        role: prior.role,
    })
}
