use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, SimulatorError};
use crate::depth::DepthImage;
use crate::kinematics::{JointVector, ModelDocument, RigidTransform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderRecord {
    pub timestamp: f64,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub timestamp: f64,
    pub delay: f64,
    /// Frame file, relative to the dataset directory.
    pub frame: String,
    pub frame_id: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub timestamp: f64,
    pub angles: Vec<f64>,
    pub camera_offset: [f64; 6],
    pub end_effector: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DatasetRecord {
    Encoder(EncoderRecord),
    Image(ImageRecord),
    Truth(TruthRecord),
}

/// Contents of `scenario.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: ScenarioConfig,
    /// Model document file, relative to the dataset directory.
    pub model: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scenario: ScenarioConfig,
    pub encoders: Vec<JointVector>,
    pub images: Vec<ImageRecord>,
    /// One frame per image record, same order.
    pub frames: Vec<DepthImage>,
    pub truth: Vec<TruthRecord>,
}

impl Dataset {
    /// Same dataset with every image declared at `delay`.
    pub fn with_image_delay(&self, delay: f64) -> Dataset {
        let mut d = self.clone();
        for r in &mut d.images {
            r.delay = delay;
        }
        d.scenario.image_delay = delay;
        d
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), SimulatorError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| SimulatorError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, SimulatorError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| SimulatorError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Writes `scenario.json`, `model.json`, the three record streams and the
/// depth frames under `dir`.
pub fn write_dataset(dir: &Path, dataset: &Dataset, model: &ModelDocument) -> Result<(), SimulatorError> {
    fs::create_dir_all(dir.join("frames"))?;
    fs::write(
        dir.join("scenario.json"),
        pretty(&ScenarioFile {
            scenario: dataset.scenario.clone(),
            model: "model.json".into(),
        })?,
    )?;
    fs::write(dir.join("model.json"), pretty(model)?)?;
    write_jsonl(
        &dir.join("encoders.jsonl"),
        dataset.encoders.iter().map(|q| {
            DatasetRecord::Encoder(EncoderRecord {
                timestamp: q.timestamp,
                q: q.values.clone(),
            })
        }),
    )?;
    write_jsonl(
        &dir.join("images.jsonl"),
        dataset.images.iter().cloned().map(DatasetRecord::Image),
    )?;
    write_jsonl(
        &dir.join("truth.jsonl"),
        dataset.truth.iter().cloned().map(DatasetRecord::Truth),
    )?;
    for (rec, frame) in dataset.images.iter().zip(&dataset.frames) {
        frame.write_to(&dir.join(&rec.frame))?;
    }
    Ok(())
}

fn expect_records<T>(
    records: Vec<DatasetRecord>,
    pick: impl Fn(DatasetRecord) -> Option<T>,
    what: &str,
) -> Result<Vec<T>, SimulatorError> {
    records
        .into_iter()
        .map(|r| pick(r).ok_or_else(|| SimulatorError::Format(format!("unexpected record in {what} stream"))))
        .collect()
}

fn check_monotone(ts: impl Iterator<Item = f64>, what: &str) -> Result<(), SimulatorError> {
    let mut prev = f64::NEG_INFINITY;
    for t in ts {
        if !(t >= prev) {
            return Err(SimulatorError::Format(format!("{what} timestamps decrease at {t}")));
        }
        prev = t;
    }
    Ok(())
}

/// Loads a dataset and its model document. A missing `truth.jsonl` gives an
/// empty truth stream.
pub fn read_dataset(dir: &Path) -> Result<(Dataset, ModelDocument), SimulatorError> {
    let parse = |e: serde_json::Error| SimulatorError::Format(e.to_string());
    let file: ScenarioFile = serde_json::from_str(&fs::read_to_string(dir.join("scenario.json"))?).map_err(parse)?;
    let model: ModelDocument = serde_json::from_str(&fs::read_to_string(dir.join(&file.model))?).map_err(parse)?;
    let encoders = expect_records(
        read_jsonl(&dir.join("encoders.jsonl"))?,
        |r| match r {
            DatasetRecord::Encoder(e) => Some(JointVector::new(e.q, e.timestamp)),
            _ => None,
        },
        "encoder",
    )?;
    let images = expect_records(
        read_jsonl(&dir.join("images.jsonl"))?,
        |r| match r {
            DatasetRecord::Image(i) => Some(i),
            _ => None,
        },
        "image",
    )?;
    let truth_path = dir.join("truth.jsonl");
    let truth = if truth_path.exists() {
        expect_records(
            read_jsonl(&truth_path)?,
            |r| match r {
                DatasetRecord::Truth(t) => Some(t),
                _ => None,
            },
            "truth",
        )?
    } else {
        Vec::new()
    };
    check_monotone(encoders.iter().map(|e| e.timestamp), "encoder")?;
    check_monotone(images.iter().map(|e| e.timestamp), "image")?;
    check_monotone(truth.iter().map(|e| e.timestamp), "truth")?;
    let mut frames = Vec::with_capacity(images.len());
    for rec in &images {
        frames.push(DepthImage::read_from(&dir.join(&rec.frame), rec.frame_id)?);
    }
    Ok((
        Dataset {
            scenario: file.scenario,
            encoders,
            images,
            frames,
            truth,
        },
        model,
    ))
}

fn pretty<T: Serialize>(v: &T) -> Result<String, SimulatorError> {
    serde_json::to_string_pretty(v).map_err(|e| SimulatorError::Format(e.to_string()))
}
