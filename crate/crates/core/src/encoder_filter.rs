//! Per-joint Kalman filter over `(angle, bias)`.
//!
//! Angles follow a random walk, biases a mean-reverting random walk that
//! shrinks by `c^dt` per step, and an encoder reads `angle + bias + noise`.
//! Every joint is filtered independently; cross-joint covariances are zero.

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{JointKind, KinematicModel};

/// Smallest encoder noise std the update will use.
pub const SIGMA_Q_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("negative time step {0}")]
    NegativeDt(f64),
    #[error("encoder update on a joint without an encoder")]
    NoEncoder,
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite measurement {0}")]
    NonFinite(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Encoder noise std (rad).
    pub sigma_q: f64,
    /// Angle random-walk intensity (rad/sqrt(s)).
    pub sigma_a: f64,
    /// Bias random-walk intensity (rad/sqrt(s)).
    pub sigma_b: f64,
    /// Bias mean reversion per second, in (0, 1).
    pub c: f64,
    /// Random-walk intensity of the camera-offset joints.
    pub virtual_sigma_a: f64,
    /// Prior std of the offset translations (m) and rotations (rad).
    pub virtual_prior_std_translation: f64,
    pub virtual_prior_std_rotation: f64,
    /// Encoder period used for the stationary bias prior.
    pub nominal_dt: f64,
    /// When false, physical joints carry no bias state (pinned at zero).
    pub bias_enabled: bool,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma_q: 1e-3,
            sigma_a: 1.0,
            sigma_b: 0.02,
            c: 0.97,
            virtual_sigma_a: 0.01,
            virtual_prior_std_translation: 0.05,
            virtual_prior_std_rotation: 0.05,
            nominal_dt: 1e-3,
            bias_enabled: true,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), FilterError> {
        let positive = [
            self.sigma_q,
            self.sigma_a,
            self.sigma_b,
            self.c,
            self.virtual_sigma_a,
            self.virtual_prior_std_translation,
            self.virtual_prior_std_rotation,
            self.nominal_dt,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.c >= 1.0 {
            return Err(FilterError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

/// How a joint enters the filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointRole {
    /// Encoder joint with an estimated bias.
    Encoder,
    /// Encoder joint whose bias is pinned to zero.
    EncoderUnbiased,
    /// Camera-offset joint: no encoder, no bias.
    Virtual,
}

impl JointRole {
    pub fn has_encoder(self) -> bool {
        !matches!(self, JointRole::Virtual)
    }

    pub fn has_bias(self) -> bool {
        matches!(self, JointRole::Encoder)
    }
}

/// Gaussian over `(angle, bias)` of one joint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointBelief {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub timestamp: f64,
    pub role: JointRole,
}

impl JointBelief {
    pub fn angle_mean(&self) -> f64 {
        self.mean[0]
    }

    pub fn bias_mean(&self) -> f64 {
        self.mean[1]
    }

    pub fn angle_var(&self) -> f64 {
        self.cov[(0, 0)]
    }

    pub fn bias_var(&self) -> f64 {
        self.cov[(1, 1)]
    }
}

/// Stationary bias std of the discretized bias process:
/// `sqrt(dt sigma_b^2 / (1 - c^(2 dt)))`.
pub fn asymptotic_bias_std(params: &FilterParams, dt: f64) -> Result<f64, FilterError> {
    if !(params.c > 0.0 && params.c < 1.0) {
        return Err(FilterError::InvalidParams(format!("c = {} must lie in (0, 1)", params.c)));
    }
    if !(dt > 0.0) {
        return Err(FilterError::InvalidParams(format!("dt = {dt} must be positive")));
    }
    Ok((dt * params.sigma_b * params.sigma_b / (1.0 - params.c.powf(2.0 * dt))).sqrt())
}

/// Propagates one joint belief by `dt` seconds.
pub fn predict(belief: &JointBelief, dt: f64, params: &FilterParams) -> Result<JointBelief, FilterError> {
    if !(dt >= 0.0) {
        return Err(FilterError::NegativeDt(dt));
    }
    if dt == 0.0 {
        return Ok(*belief);
    }
    let mut out = *belief;
    out.timestamp = belief.timestamp + dt;
    match belief.role {
        JointRole::Virtual => {
            out.cov[(0, 0)] += dt * params.virtual_sigma_a * params.virtual_sigma_a;
        }
        JointRole::EncoderUnbiased => {
            out.cov[(0, 0)] += dt * params.sigma_a * params.sigma_a;
        }
        JointRole::Encoder => {
            let decay = params.c.powf(dt);
            out.cov[(0, 0)] += dt * params.sigma_a * params.sigma_a;
            out.mean[1] *= decay;
            out.cov[(1, 1)] = dt * params.sigma_b * params.sigma_b + decay * decay * belief.cov[(1, 1)];
            out.cov[(0, 1)] *= decay;
            out.cov[(1, 0)] = out.cov[(0, 1)];
        }
    }
    Ok(out)
}

/// Kalman update with an encoder reading `q = angle + bias + noise`,
/// covariance in Joseph form.
pub fn update_with_encoder(belief: &JointBelief, q: f64, params: &FilterParams) -> Result<JointBelief, FilterError> {
    if !belief.role.has_encoder() {
        return Err(FilterError::NoEncoder);
    }
    if !q.is_finite() {
        return Err(FilterError::NonFinite(q));
    }
    let h = RowVector2::new(1.0, 1.0);
    let r = params.sigma_q.max(SIGMA_Q_FLOOR).powi(2);
    let p = belief.cov;
    let ph = p * h.transpose();
    let s = (h * ph)[(0, 0)] + r;
    let k = ph / s;
    let innovation = q - (h * belief.mean)[(0, 0)];
    let a = Matrix2::identity() - k * h;
    let mut cov = a * p * a.transpose() + k * r * k.transpose();
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    Ok(JointBelief {
        mean: belief.mean + k * innovation,
        cov,
        timestamp: belief.timestamp,
        role: belief.role,
    })
}

/// Factorized belief over all joints of a model, in model order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefVector {
    pub joints: Vec<JointBelief>,
    pub timestamp: f64,
}

impl BeliefVector {
    /// Initial belief from the first encoder reading: angle at the reading
    /// with the encoder variance, bias at zero with its stationary variance,
    /// offset joints at zero with their prior variance.
    pub fn initialize(
        model: &KinematicModel,
        q: &[f64],
        timestamp: f64,
        params: &FilterParams,
    ) -> Result<Self, FilterError> {
        params.validate()?;
        let encoders = model.encoder_joint_indices();
        if q.len() != encoders.len() {
            return Err(FilterError::LengthMismatch {
                expected: encoders.len(),
                actual: q.len(),
            });
        }
        if let Some(v) = q.iter().find(|v| !v.is_finite()) {
            return Err(FilterError::NonFinite(*v));
        }
        let bias_var = asymptotic_bias_std(params, params.nominal_dt)?.powi(2);
        let angle_var = params.sigma_q.max(SIGMA_Q_FLOOR).powi(2);
        let mut measured = q.iter();
        let joints = model
            .joints()
            .iter()
            .map(|j| {
                if j.has_encoder {
                    let qj = *measured.next().expect("length checked");
                    let (role, bvar) = if params.bias_enabled {
                        (JointRole::Encoder, bias_var)
                    } else {
                        (JointRole::EncoderUnbiased, 0.0)
                    };
                    JointBelief {
                        mean: Vector2::new(qj, 0.0),
                        cov: Matrix2::new(angle_var, 0.0, 0.0, bvar),
                        timestamp,
                        role,
                    }
                } else {
                    let std = if j.kind == JointKind::VirtualPrismatic {
                        params.virtual_prior_std_translation
                    } else {
                        params.virtual_prior_std_rotation
                    };
                    JointBelief {
                        mean: Vector2::zeros(),
                        cov: Matrix2::new(std * std, 0.0, 0.0, 0.0),
                        timestamp,
                        role: JointRole::Virtual,
                    }
                }
            })
            .collect();
        Ok(Self { joints, timestamp })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn angle_means(&self) -> Vec<f64> {
        self.joints.iter().map(|b| b.mean[0]).collect()
    }

    pub fn encoder_count(&self) -> usize {
        self.joints.iter().filter(|b| b.role.has_encoder()).count()
    }

    /// Prediction only, for every joint.
    pub fn predict(&self, dt: f64, params: &FilterParams) -> Result<BeliefVector, FilterError> {
        if !(dt >= 0.0) {
            return Err(FilterError::NegativeDt(dt));
        }
        let joints = self
            .joints
            .iter()
            .map(|b| predict(b, dt, params))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BeliefVector {
            joints,
            timestamp: self.timestamp + dt,
        })
    }
}

/// Predicts every joint by `dt`, then updates each encoder joint with its
/// reading. `q` lists the encoder joints in model order.
pub fn filter_step(
    beliefs: &BeliefVector,
    q: &[f64],
    dt: f64,
    params: &FilterParams,
) -> Result<BeliefVector, FilterError> {
    let expected = beliefs.encoder_count();
    if q.len() != expected {
        return Err(FilterError::LengthMismatch {
            expected,
            actual: q.len(),
        });
    }
    let mut out = beliefs.predict(dt, params)?;
    let mut measured = q.iter();
    for b in out.joints.iter_mut() {
        if b.role.has_encoder() {
            *b = update_with_encoder(b, *measured.next().expect("length checked"), params)?;
        }
    }
    Ok(out)
}
