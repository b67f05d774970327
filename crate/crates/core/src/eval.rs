//! Tracking methods, pose errors against ground truth, nearest-rank
//! summaries and the CSV artifacts.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::PixelModelParams;
use crate::encoder_filter::FilterParams;
use crate::fusion::{track_sequence, FusionError, TrackerConfig, TrackerOutput, DEFAULT_BUFFER_CAPACITY};
use crate::image_update::CpfConfig;
use crate::kinematics::{geodesic_angle, KinematicModel, KinematicsError, RigidTransform};
use crate::simulator::{Dataset, TruthRecord};

pub const PERCENTILES: [u32; 5] = [1, 25, 50, 75, 99];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to summarize")]
    Empty,
    #[error("dataset has no truth records")]
    MissingTruth,
    #[error("unknown method '{0}' (expected one of: encoders-only, camera-offset-only, full-fusion, vision-only)")]
    UnknownMethod(String),
    #[error("malformed csv: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    EncodersOnly,
    CameraOffsetOnly,
    FullFusion,
    VisionOnly,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [
        MethodId::EncodersOnly,
        MethodId::CameraOffsetOnly,
        MethodId::FullFusion,
        MethodId::VisionOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::EncodersOnly => "encoders-only",
            MethodId::CameraOffsetOnly => "camera-offset-only",
            MethodId::FullFusion => "full-fusion",
            MethodId::VisionOnly => "vision-only",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EvalError::UnknownMethod(s.to_string()))
    }
}

/// Parameters shared by all methods, as stored in the JSON parameter file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub filter: FilterParams,
    pub pixel: PixelModelParams,
    pub cpf: CpfConfig,
    pub buffer_capacity: usize,
    pub image_timestamp_offset: f64,
    /// Angle random-walk intensity used by the vision-only tracker, which has
    /// no encoder updates to follow fast motion.
    pub vision_sigma_a: f64,
    /// Samples before this time are excluded from post-convergence metrics.
    pub convergence_window: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            pixel: PixelModelParams::default(),
            cpf: CpfConfig::default(),
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            image_timestamp_offset: 0.0,
            vision_sigma_a: 0.3,
            convergence_window: 10.0,
        }
    }
}

impl EvalConfig {
    /// Tracker configuration of a filtering method; `None` for encoders-only.
    pub fn tracker_config(&self, method: MethodId) -> Option<TrackerConfig> {
        let mut cfg = TrackerConfig {
            filter: self.filter,
            pixel: self.pixel,
            cpf: self.cpf,
            buffer_capacity: self.buffer_capacity,
            encoder_updates: true,
            image_timestamp_offset: self.image_timestamp_offset,
        };
        match method {
            MethodId::EncodersOnly => return None,
            MethodId::CameraOffsetOnly => cfg.filter.bias_enabled = false,
            MethodId::FullFusion => {}
            MethodId::VisionOnly => {
                cfg.encoder_updates = false;
                cfg.filter.bias_enabled = false;
                cfg.filter.sigma_a = self.vision_sigma_a;
            }
        }
        Some(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub timestamp: f64,
    pub run: usize,
    pub trans_m: f64,
    pub ang_rad: f64,
}

/// Translational (m) and geodesic angular (rad) error between two poses.
pub fn pose_errors(estimate: &RigidTransform, truth: &RigidTransform) -> (f64, f64) {
    let trans = (estimate.translation - truth.translation).norm();
    (trans, geodesic_angle(&estimate.rotation, &truth.rotation))
}

/// Outputs of the encoders-only method: forward kinematics of the raw
/// readings with the camera-offset joints at zero.
pub fn encoders_only_outputs(dataset: &Dataset, model: &KinematicModel) -> Result<Vec<TrackerOutput>, EvalError> {
    let n = model.joint_count();
    let enc = model.encoder_joint_indices();
    let mut values = vec![0.0; n];
    dataset
        .encoders
        .iter()
        .map(|q| {
            if q.values.len() != enc.len() {
                return Err(EvalError::Kinematics(KinematicsError::LengthMismatch {
                    expected: enc.len(),
                    actual: q.values.len(),
                }));
            }
            for (&j, &v) in enc.iter().zip(&q.values) {
                values[j] = v;
            }
            Ok(TrackerOutput {
                timestamp: q.timestamp,
                angle_means: values.clone(),
                angle_stds: vec![0.0; n],
                bias_means: vec![0.0; n],
                bias_stds: vec![0.0; n],
                end_effector: model.end_effector_in_camera(&values)?,
                camera_offset: [0.0; 6],
            })
        })
        .collect()
}

/// Errors at every truth record against the most recent estimate at or
/// before it (zero-order hold). Truth records before the first estimate are
/// skipped. `estimates` must be in output order.
pub fn errors_against_truth(
    estimates: &[(f64, RigidTransform)],
    truth: &[TruthRecord],
    run: usize,
) -> Vec<ErrorSample> {
    let mut out = Vec::with_capacity(truth.len());
    let mut k = 0;
    let mut current: Option<&RigidTransform> = None;
    for rec in truth {
        while k < estimates.len() && estimates[k].0 <= rec.timestamp {
            current = Some(&estimates[k].1);
            k += 1;
        }
        if let Some(est) = current {
            let (trans_m, ang_rad) = pose_errors(est, &rec.end_effector);
            out.push(ErrorSample {
                timestamp: rec.timestamp,
                run,
                trans_m,
                ang_rad,
            });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: MethodId,
    pub outputs: Vec<TrackerOutput>,
    pub errors: Vec<ErrorSample>,
}

/// Runs one method over a dataset and scores it at the truth records.
/// `model` must carry the camera-offset joints.
pub fn run_method(
    method: MethodId,
    dataset: &Dataset,
    model: &KinematicModel,
    cfg: &EvalConfig,
    run: usize,
) -> Result<MethodRun, EvalError> {
    if dataset.truth.is_empty() {
        return Err(EvalError::MissingTruth);
    }
    let outputs = match cfg.tracker_config(method) {
        None => encoders_only_outputs(dataset, model)?,
        Some(tc) => track_sequence(dataset, model, &tc)?,
    };
    let poses: Vec<(f64, RigidTransform)> = outputs.iter().map(|o| (o.timestamp, o.end_effector)).collect();
    let errors = errors_against_truth(&poses, &dataset.truth, run);
    Ok(MethodRun {
        method,
        outputs,
        errors,
    })
}

/// Nearest-rank percentile of an ascending slice: element `ceil(p N / 100)`
/// (1-based).
pub fn nearest_rank(sorted: &[f64], p: u32) -> f64 {
    let n = sorted.len();
    let rank = ((p as usize * n + 99) / 100).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p1: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p99: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Result<Self, EvalError> {
        if values.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let [p1, p25, p50, p75, p99] = PERCENTILES.map(|p| nearest_rank(&v, p));
        Ok(Self { p1, p25, p50, p75, p99 })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p1, self.p25, self.p50, self.p75, self.p99]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sequence: String,
    pub method: String,
    /// `all` or `converged` (samples after the convergence window).
    pub window: String,
    pub runs: usize,
    pub samples: usize,
    pub trans: Percentiles,
    pub ang: Percentiles,
}

/// Pooled percentiles over every sample of every run.
pub fn summarize(
    samples: &[ErrorSample],
    runs: usize,
    sequence: &str,
    method: &str,
    window: &str,
) -> Result<SummaryRow, EvalError> {
    let trans: Vec<f64> = samples.iter().map(|s| s.trans_m).collect();
    let ang: Vec<f64> = samples.iter().map(|s| s.ang_rad).collect();
    Ok(SummaryRow {
        sequence: sequence.to_string(),
        method: method.to_string(),
        window: window.to_string(),
        runs,
        samples: samples.len(),
        trans: Percentiles::of(&trans)?,
        ang: Percentiles::of(&ang)?,
    })
}

/// Samples at or after `t0`.
pub fn after(samples: &[ErrorSample], t0: f64) -> Vec<ErrorSample> {
    samples.iter().filter(|s| s.timestamp >= t0).copied().collect()
}

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64, EvalError> {
    s.trim()
        .parse()
        .map_err(|_| EvalError::Format(format!("not a number: '{s}'")))
}

fn parse_usize(s: &str) -> Result<usize, EvalError> {
    s.trim()
        .parse()
        .map_err(|_| EvalError::Format(format!("not an integer: '{s}'")))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, EvalError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| EvalError::Format(format!("missing column '{name}'")))
}

pub const POSE_COLUMNS: [&str; 7] = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"];

/// Writes `estimates.csv`: run, timestamp, per-joint angle/bias means and
/// stds, then the end-effector pose in the camera frame.
pub fn write_estimates<W: Write>(
    w: W,
    joint_names: &[String],
    runs: &[(usize, &[TrackerOutput])],
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["run".to_string(), "timestamp".to_string()];
    for name in joint_names {
        for suffix in ["angle", "angle_std", "bias", "bias_std"] {
            header.push(format!("{name}_{suffix}"));
        }
    }
    header.extend(POSE_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for &(run, outputs) in runs {
        for o in outputs {
            let mut rec = vec![run.to_string(), fmt17(o.timestamp)];
            for j in 0..joint_names.len() {
                rec.push(fmt17(o.angle_means[j]));
                rec.push(fmt17(o.angle_stds[j]));
                rec.push(fmt17(o.bias_means[j]));
                rec.push(fmt17(o.bias_stds[j]));
            }
            let t = o.end_effector.translation;
            let [qw, qx, qy, qz] = o.end_effector.quaternion_wxyz();
            rec.extend([t.x, t.y, t.z, qw, qx, qy, qz].map(fmt17));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatePose {
    pub run: usize,
    pub timestamp: f64,
    pub pose: RigidTransform,
}

pub fn read_estimate_poses<R: Read>(r: R) -> Result<Vec<EstimatePose>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let run = column(&headers, "run")?;
    let ts = column(&headers, "timestamp")?;
    let pose_cols = POSE_COLUMNS
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let v = pose_cols
            .iter()
            .map(|&c| parse_f64(&rec[c]))
            .collect::<Result<Vec<_>, _>>()?;
        let pose = RigidTransform::from_quaternion_wxyz([v[3], v[4], v[5], v[6]], nalgebra::Vector3::new(v[0], v[1], v[2]));
        out.push(EstimatePose {
            run: parse_usize(&rec[run])?,
            timestamp: parse_f64(&rec[ts])?,
            pose,
        });
    }
    Ok(out)
}

pub fn write_errors<W: Write>(w: W, samples: &[ErrorSample]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["timestamp", "run", "trans_m", "ang_rad"])?;
    for s in samples {
        w.write_record([fmt17(s.timestamp), s.run.to_string(), fmt17(s.trans_m), fmt17(s.ang_rad)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_errors<R: Read>(r: R) -> Result<Vec<ErrorSample>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let ts = column(&headers, "timestamp")?;
    let run = column(&headers, "run")?;
    let tr = column(&headers, "trans_m")?;
    let an = column(&headers, "ang_rad")?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(ErrorSample {
            timestamp: parse_f64(&rec[ts])?,
            run: parse_usize(&rec[run])?,
            trans_m: parse_f64(&rec[tr])?,
            ang_rad: parse_f64(&rec[an])?,
        });
    }
    Ok(out)
}

const SUMMARY_HEADER: [&str; 15] = [
    "sequence", "method", "window", "runs", "samples", "trans_p1", "trans_p25", "trans_p50", "trans_p75",
    "trans_p99", "ang_p1", "ang_p25", "ang_p50", "ang_p75", "ang_p99",
];

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let mut rec = vec![
            r.sequence.clone(),
            r.method.clone(),
            r.window.clone(),
            r.runs.to_string(),
            r.samples.to_string(),
        ];
        rec.extend(r.trans.as_array().map(fmt17));
        rec.extend(r.ang.as_array().map(fmt17));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(EvalError::Format(format!("summary row has {} fields", rec.len())));
        }
        let f = |i: usize| parse_f64(&rec[i]);
        out.push(SummaryRow {
            sequence: rec[0].to_string(),
            method: rec[1].to_string(),
            window: rec[2].to_string(),
            runs: parse_usize(&rec[3])?,
            samples: parse_usize(&rec[4])?,
            trans: Percentiles {
                p1: f(5)?,
                p25: f(6)?,
                p50: f(7)?,
                p75: f(8)?,
                p99: f(9)?,
            },
            ang: Percentiles {
                p1: f(10)?,
                p25: f(11)?,
                p50: f(12)?,
                p75: f(13)?,
                p99: f(14)?,
            },
        });
    }
    Ok(out)
}

/// Plain-text percentile table, one block per sequence: translational
/// error in mm and angular error in degrees.
pub fn format_report(rows: &[SummaryRow]) -> String {
    let mut sequences: Vec<&str> = Vec::new();
    for r in rows {
        if !sequences.contains(&r.sequence.as_str()) {
            sequences.push(&r.sequence);
        }
    }
    let mut s = String::new();
    for seq in sequences {
        s.push_str(&format!("sequence: {seq}\n"));
        s.push_str(&format!(
            "  {:<20} {:<10} {:>5} | {:>8} {:>8} {:>8} {:>8} {:>8} | {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            "method", "window", "runs", "t p1", "t p25", "t p50", "t p75", "t p99", "a p1", "a p25", "a p50", "a p75",
            "a p99"
        ));
        for r in rows.iter().filter(|r| r.sequence == seq) {
            let t = r.trans.as_array().map(|v| v * 1e3);
            let a = r.ang.as_array().map(f64::to_degrees);
            s.push_str(&format!(
                "  {:<20} {:<10} {:>5} | {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} | {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
                r.method, r.window, r.runs, t[0], t[1], t[2], t[3], t[4], a[0], a[1], a[2], a[3], a[4]
            ));
        }
        s.push_str("  (translation in mm, rotation in degrees)\n");
    }
    s
}
