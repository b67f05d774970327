//! Synthetic datasets with ground truth: trajectories, biased noisy encoder
//! streams, rendered depth frames with occluders, and true end-effector poses.

mod dataset;
mod default_model;

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::{render_with_extra, DepthError, DepthImage};
use crate::kinematics::{Capsule, JointVector, KinematicModel, KinematicsError, RigidTransform};

pub use dataset::{
    read_dataset, read_jsonl, write_dataset, write_jsonl, Dataset, DatasetRecord, EncoderRecord,
    ImageRecord, ScenarioFile, TruthRecord,
};
pub use default_model::{default_model, default_model_document, DEFAULT_CENTER};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("non-finite trajectory value at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineJoint {
    pub center: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocitySegment {
    pub duration: f64,
    pub velocity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Trajectory {
    Sinusoidal {
        joints: Vec<SineJoint>,
    },
    /// Starts at `start` and integrates each segment's velocity; holds the
    /// last pose after the final segment.
    PiecewiseConstantVelocity {
        start: Vec<f64>,
        segments: Vec<VelocitySegment>,
    },
}

impl Trajectory {
    pub fn joint_count(&self) -> usize {
        match self {
            Trajectory::Sinusoidal { joints } => joints.len(),
            Trajectory::PiecewiseConstantVelocity { start, .. } => start.len(),
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        match self {
            Trajectory::Sinusoidal { joints } => joints
                .iter()
                .map(|j| j.center + j.amplitude * (2.0 * PI * j.frequency * t + j.phase).sin())
                .collect(),
            Trajectory::PiecewiseConstantVelocity { start, segments } => {
                let mut q = start.clone();
                let mut t0 = 0.0;
                for s in segments {
                    let span = (t - t0).clamp(0.0, s.duration);
                    for (qi, v) in q.iter_mut().zip(&s.velocity) {
                        *qi += v * span;
                    }
                    t0 += s.duration;
                    if t <= t0 {
                        break;
                    }
                }
                q
            }
        }
    }

    /// Sinusoids around [`DEFAULT_CENTER`] with distinct frequencies.
    /// `speed` scales every frequency.
    pub fn default_sinusoidal(speed: f64) -> Self {
        let amp = [0.3, 0.2, 0.3, 0.25, 0.3, 0.25, 0.3];
        let freq = [0.10, 0.13, 0.17, 0.11, 0.19, 0.15, 0.23];
        let joints = (0..7)
            .map(|i| SineJoint {
                center: DEFAULT_CENTER[i],
                amplitude: amp[i],
                frequency: freq[i] * speed,
                phase: 0.7 * i as f64,
            })
            .collect();
        Trajectory::Sinusoidal { joints }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BiasMode {
    None,
    /// Same offset on every encoder joint.
    Constant { value: f64 },
    SmoothSteps {
        amplitude: f64,
        step_period: f64,
        ramp: f64,
    },
}

impl BiasMode {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            BiasMode::None => 0.0,
            BiasMode::Constant { value } => value,
            BiasMode::SmoothSteps {
                amplitude,
                step_period,
                ramp,
            } => smooth_step_bias(t, amplitude, step_period, ramp),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSpec {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

impl CapsuleSpec {
    pub fn to_capsule(&self) -> Capsule {
        Capsule::new(Vector3::from(self.a), Vector3::from(self.b), self.radius)
    }
}

/// Capsule in the camera frame, present during `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccluderWindow {
    pub start: f64,
    pub end: f64,
    pub capsule: CapsuleSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

fn default_encoder_period() -> f64 {
    1e-3
}
fn default_image_period() -> f64 {
    1.0 / 30.0
}
fn default_truth_period() -> f64 {
    0.01
}
fn default_out_of_view_yaw() -> f64 {
    2.5
}
fn default_out_of_view_ramp() -> f64 {
    0.5
}
fn default_background() -> Option<f64> {
    Some(3.0)
}
fn default_depth_noise() -> f64 {
    0.005
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub duration: f64,
    #[serde(default = "default_encoder_period")]
    pub encoder_period: f64,
    #[serde(default = "default_image_period")]
    pub image_period: f64,
    #[serde(default)]
    pub image_delay: f64,
    #[serde(default = "default_truth_period")]
    pub truth_period: f64,
    pub trajectory: Trajectory,
    #[serde(default = "bias_none")]
    pub bias: BiasMode,
    /// True camera offset: `tx, ty, tz` (m), `rx, ry, rz` (rad).
    #[serde(default)]
    pub camera_offset: [f64; 6],
    #[serde(default)]
    pub occluders: Vec<OccluderWindow>,
    /// While active, the first joint swings by `out_of_view_yaw`, carrying
    /// the hand out of the camera's view.
    #[serde(default)]
    pub out_of_view: Vec<TimeWindow>,
    #[serde(default = "default_out_of_view_yaw")]
    pub out_of_view_yaw: f64,
    #[serde(default = "default_out_of_view_ramp")]
    pub out_of_view_ramp: f64,
    #[serde(default)]
    pub encoder_noise_std: f64,
    /// Depth of a flat backdrop behind the arm; `None` leaves empty pixels
    /// without a return.
    #[serde(default = "default_background")]
    pub background_depth: Option<f64>,
    #[serde(default = "default_depth_noise")]
    pub depth_noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn bias_none() -> BiasMode {
    BiasMode::None
}

impl ScenarioConfig {
    pub fn new(duration: f64, trajectory: Trajectory) -> Self {
        Self {
            name: String::new(),
            duration,
            encoder_period: default_encoder_period(),
            image_period: default_image_period(),
            image_delay: 0.0,
            truth_period: default_truth_period(),
            trajectory,
            bias: BiasMode::None,
            camera_offset: [0.0; 6],
            occluders: Vec::new(),
            out_of_view: Vec::new(),
            out_of_view_yaw: default_out_of_view_yaw(),
            out_of_view_ramp: default_out_of_view_ramp(),
            encoder_noise_std: 0.0,
            background_depth: default_background(),
            depth_noise_std: default_depth_noise(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulatorError> {
        let bad = |m: &str| Err(SimulatorError::InvalidConfig(m.to_string()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.encoder_period > 0.0 && self.image_period > 0.0 && self.truth_period > 0.0) {
            return bad("periods must be positive");
        }
        if !(self.image_delay >= 0.0) {
            return bad("image delay must be non-negative");
        }
        if !(self.encoder_noise_std >= 0.0 && self.depth_noise_std >= 0.0) {
            return bad("noise stds must be non-negative");
        }
        if let BiasMode::SmoothSteps {
            step_period, ramp, ..
        } = self.bias
        {
            if !(ramp > 0.0 && ramp < step_period) {
                return bad("smooth-step ramp must be in (0, step_period)");
            }
        }
        if let Some(d) = self.background_depth {
            if !(d > 0.0 && d.is_finite()) {
                return bad("background depth must be positive");
            }
        }
        if self.occluders.iter().any(|o| !o.capsule.to_capsule().is_valid()) {
            return bad("invalid occluder capsule");
        }
        if self.camera_offset.iter().any(|v| !v.is_finite()) {
            return bad("camera offset must be finite");
        }
        Ok(())
    }

    /// Encoder bias at `t` (same on every joint).
    pub fn bias_at(&self, t: f64) -> f64 {
        self.bias.at(t)
    }

    /// True joint angles at `t`, including out-of-view excursions.
    pub fn true_angles(&self, t: f64) -> Vec<f64> {
        let mut q = self.trajectory.sample(t);
        let w = self
            .out_of_view
            .iter()
            .map(|win| window_weight(t, win.start, win.end, self.out_of_view_ramp))
            .fold(0.0, f64::max);
        if w > 0.0 {
            if let Some(q0) = q.first_mut() {
                *q0 += w * self.out_of_view_yaw;
            }
        }
        q
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// 1 inside the window, 0 outside, smoothstep ramps of length `ramp` at
/// both ends (inside the window).
fn window_weight(t: f64, start: f64, end: f64, ramp: f64) -> f64 {
    if t < start || t >= end {
        return 0.0;
    }
    if ramp <= 0.0 {
        return 1.0;
    }
    smoothstep((t - start) / ramp).min(smoothstep((end - t) / ramp))
}

/// Alternates between `+amplitude` (first period) and `-amplitude`, switching
/// at every multiple of `step_period` through a `3u^2 - 2u^3` ramp of length
/// `ramp` centred on the switch time.
pub fn smooth_step_bias(t: f64, amplitude: f64, step_period: f64, ramp: f64) -> f64 {
    let sign = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let k = (t / step_period).round() as i64;
    let switch = k as f64 * step_period;
    if k >= 1 && (t - switch).abs() < 0.5 * ramp {
        let u = (t - switch + 0.5 * ramp) / ramp;
        let from = sign(k - 1);
        let to = sign(k);
        return amplitude * (from + (to - from) * smoothstep(u));
    }
    let segment = (t / step_period).floor().max(0.0) as i64;
    amplitude * sign(segment)
}

/// Occluder capsules active at `t` added to `scene` (camera frame).
pub fn occluder_inject(scene: &mut Vec<Capsule>, schedule: &[OccluderWindow], t: f64) {
    scene.extend(
        schedule
            .iter()
            .filter(|o| t >= o.start && t < o.end)
            .map(|o| o.capsule.to_capsule()),
    );
}

fn with_offset_joints(model: &KinematicModel) -> Result<KinematicModel, KinematicsError> {
    if model.is_injected() {
        Ok(model.clone())
    } else {
        model.inject_virtual_joints()
    }
}

fn sample_times(duration: f64, period: f64) -> impl Iterator<Item = f64> {
    let n = (duration / period + 1e-9).floor() as u64;
    (0..=n).map(move |k| k as f64 * period)
}

/// Full model values (physical angles, then the offset joints) at `t`.
fn scene_values(cfg: &ScenarioConfig, t: f64) -> Result<Vec<f64>, SimulatorError> {
    let mut v = cfg.true_angles(t);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SimulatorError::NonFinite(t));
    }
    v.extend_from_slice(&cfg.camera_offset);
    Ok(v)
}

/// Depth frame at `t` from the true configuration, occluders included.
pub fn render_frame(
    model: &KinematicModel,
    cfg: &ScenarioConfig,
    t: f64,
    frame_id: u64,
    rng: &mut ChaCha8Rng,
) -> Result<DepthImage, SimulatorError> {
    let model = with_offset_joints(model)?;
    let values = scene_values(cfg, t)?;
    let mut extra = Vec::new();
    occluder_inject(&mut extra, &cfg.occluders, t);
    let rendered = render_with_extra(&model, &values, &extra)?;
    let intr = model.intrinsics();
    let noise = Normal::new(0.0, cfg.depth_noise_std.max(0.0)).expect("finite std");
    let depth = rendered
        .depth
        .iter()
        .map(|&d| {
            let d = if d.is_finite() {
                d
            } else if let Some(bg) = cfg.background_depth {
                bg
            } else {
                return f32::NAN;
            };
            let z = if cfg.depth_noise_std > 0.0 {
                d + noise.sample(rng)
            } else {
                d
            };
            if z < intr.z_min || z > intr.z_max {
                f32::NAN
            } else {
                z as f32
            }
        })
        .collect();
    Ok(DepthImage::new(intr.width, intr.height, depth, t, frame_id)?)
}

/// Generates a dataset for `model` (offset joints are added when missing).
pub fn generate(model: &KinematicModel, cfg: &ScenarioConfig) -> Result<Dataset, SimulatorError> {
    cfg.validate()?;
    let model = with_offset_joints(model)?;
    let n = model.physical_joint_count();
    if cfg.trajectory.joint_count() != n {
        return Err(SimulatorError::InvalidConfig(format!(
            "trajectory has {} joints, model has {n}",
            cfg.trajectory.joint_count()
        )));
    }
    let encoder_joints = model.encoder_joint_indices();

    let mut enc_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut img_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    img_rng.set_stream(1);
    let noise = Normal::new(0.0, cfg.encoder_noise_std).expect("finite std");

    let mut encoders = Vec::new();
    for t in sample_times(cfg.duration, cfg.encoder_period) {
        let a = scene_values(cfg, t)?;
        let b = cfg.bias_at(t);
        let q = encoder_joints
            .iter()
            .map(|&j| {
                let e = if cfg.encoder_noise_std > 0.0 {
                    noise.sample(&mut enc_rng)
                } else {
                    0.0
                };
                a[j] + b + e
            })
            .collect();
        encoders.push(JointVector::new(q, t));
    }

    let mut images = Vec::new();
    let mut frames = Vec::new();
    for (k, t) in sample_times(cfg.duration, cfg.image_period).enumerate() {
        let frame = render_frame(&model, cfg, t, k as u64, &mut img_rng)?;
        images.push(ImageRecord {
            timestamp: t,
            delay: cfg.image_delay,
            frame: format!("frames/{k:06}.dpth"),
            frame_id: k as u64,
        });
        frames.push(frame);
    }

    let mut truth = Vec::new();
    for t in sample_times(cfg.duration, cfg.truth_period) {
        let values = scene_values(cfg, t)?;
        let pose: RigidTransform = model.end_effector_in_camera(&values)?;
        truth.push(TruthRecord {
            timestamp: t,
            angles: values[..n].to_vec(),
            camera_offset: cfg.camera_offset,
            end_effector: pose,
        });
    }

    Ok(Dataset {
        scenario: cfg.clone(),
        encoders,
        images,
        frames,
        truth,
    })
}
