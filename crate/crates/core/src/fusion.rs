//! Belief buffer and the tracker that runs the encoder filter at the encoder
//! rate and folds in delayed depth images by replaying the buffer.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::{DepthImage, PixelModelParams};
use crate::encoder_filter::{filter_step, BeliefVector, FilterError, FilterParams};
use crate::image_update::{image_update_full, CpfConfig, ImageUpdateError};
use crate::kinematics::{JointVector, KinematicModel, KinematicsError, RigidTransform};
use crate::simulator::Dataset;

pub const DEFAULT_BUFFER_CAPACITY: usize = 2000;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("encoder timestamp {got} does not follow {previous}")]
    OutOfOrder { previous: f64, got: f64 },
    #[error("duplicate encoder timestamp {0}")]
    DuplicateTimestamp(f64),
    #[error("delay exceeds buffer horizon: image at {image}, oldest belief at {oldest}")]
    BeyondHorizon { image: f64, oldest: f64 },
    #[error("image at {image} is newer than the latest encoder reading at {head}")]
    ImageAheadOfHead { image: f64, head: f64 },
    #[error("no belief yet: push an encoder reading first")]
    Empty,
    #[error("malformed dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Image(#[from] ImageUpdateError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BufferEntry {
    pub timestamp: f64,
    pub beliefs: BeliefVector,
    pub encoder: JointVector,
}

/// Time-ordered ring of beliefs and the encoder readings that produced them.
#[derive(Clone, Debug)]
pub struct BeliefBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
}

impl BeliefBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&BufferEntry> {
        self.entries.back()
    }

    pub fn tail(&self) -> Option<&BufferEntry> {
        self.entries.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    fn push(&mut self, entry: BufferEntry) {
        self.entries.push_back(entry);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    /// Index of the newest entry with timestamp `<= t`.
    fn locate(&self, t: f64) -> Option<usize> {
        let after = self.entries.partition_point(|e| e.timestamp <= t);
        after.checked_sub(1)
    }
}

/// Estimate derived from the newest belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerOutput {
    pub timestamp: f64,
    pub angle_means: Vec<f64>,
    pub angle_stds: Vec<f64>,
    pub bias_means: Vec<f64>,
    pub bias_stds: Vec<f64>,
    pub end_effector: RigidTransform,
    /// `tx, ty, tz` (m) then `rx, ry, rz` (rad); zero without offset joints.
    pub camera_offset: [f64; 6],
}

impl TrackerOutput {
    pub fn from_beliefs(model: &KinematicModel, beliefs: &BeliefVector) -> Result<Self, KinematicsError> {
        let angle_means = beliefs.angle_means();
        let end_effector = model.end_effector_in_camera(&angle_means)?;
        let mut camera_offset = [0.0; 6];
        if let Some(off) = model.virtual_joint_offset() {
            camera_offset.copy_from_slice(&angle_means[off..off + 6]);
        }
        Ok(Self {
            timestamp: beliefs.timestamp,
            angle_stds: beliefs.joints.iter().map(|b| b.angle_var().sqrt()).collect(),
            bias_means: beliefs.joints.iter().map(|b| b.bias_mean()).collect(),
            bias_stds: beliefs.joints.iter().map(|b| b.bias_var().sqrt()).collect(),
            angle_means,
            end_effector,
            camera_offset,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub filter: FilterParams,
    pub pixel: PixelModelParams,
    pub cpf: CpfConfig,
    pub buffer_capacity: usize,
    /// When false, encoder readings only advance time (predict); the first
    /// reading still initializes the belief.
    pub encoder_updates: bool,
    /// Added to every image timestamp before it is matched to the buffer.
    pub image_timestamp_offset: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            pixel: PixelModelParams::default(),
            cpf: CpfConfig::default(),
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            encoder_updates: true,
            image_timestamp_offset: 0.0,
        }
    }
}

/// Seed of the particle filter for one frame. Depends only on the base seed
/// and the frame, never on arrival order.
pub fn frame_seed(base: u64, frame_id: u64) -> u64 {
    let mut z = base ^ frame_id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Image update prepared against one buffer entry. `run` needs no access to
/// the tracker, so it may execute while encoder readings keep arriving.
#[derive(Clone, Debug)]
pub struct ImageJob {
    pub target_timestamp: f64,
    pub prior: BeliefVector,
    image: DepthImage,
    cpf: CpfConfig,
    pixel: PixelModelParams,
}

#[derive(Clone, Debug)]
pub struct CompletedImageJob {
    pub target_timestamp: f64,
    pub posterior: BeliefVector,
}

impl ImageJob {
    pub fn run(self, model: &KinematicModel) -> Result<CompletedImageJob, ImageUpdateError> {
        let posterior = image_update_full(&self.prior, &self.image, model, &self.pixel, &self.cpf)?;
        Ok(CompletedImageJob {
            target_timestamp: self.target_timestamp,
            posterior,
        })
    }
}

pub struct Tracker {
    model: KinematicModel,
    config: TrackerConfig,
    buffer: BeliefBuffer,
}

impl Tracker {
    pub fn new(model: KinematicModel, config: TrackerConfig) -> Result<Self, FusionError> {
        config.filter.validate()?;
        config.cpf.validate()?;
        config.pixel.validate().map_err(ImageUpdateError::from)?;
        if config.buffer_capacity == 0 {
            return Err(ImageUpdateError::InvalidConfig("buffer capacity 0".into()).into());
        }
        Ok(Self {
            buffer: BeliefBuffer::new(config.buffer_capacity),
            model,
            config,
        })
    }

    pub fn model(&self) -> &KinematicModel {
        &self.model
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn buffer(&self) -> &BeliefBuffer {
        &self.buffer
    }

    pub fn head_beliefs(&self) -> Option<&BeliefVector> {
        self.buffer.head().map(|e| &e.beliefs)
    }

    pub fn output(&self) -> Result<TrackerOutput, FusionError> {
        let head = self.buffer.head().ok_or(FusionError::Empty)?;
        Ok(TrackerOutput::from_beliefs(&self.model, &head.beliefs)?)
    }

    fn step(&self, prev: &BeliefVector, q: &JointVector) -> Result<BeliefVector, FilterError> {
        let dt = q.timestamp - prev.timestamp;
        let mut next = if self.config.encoder_updates {
            filter_step(prev, &q.values, dt, &self.config.filter)?
        } else {
            if q.values.len() != prev.encoder_count() {
                return Err(FilterError::LengthMismatch {
                    expected: prev.encoder_count(),
                    actual: q.values.len(),
                });
            }
            prev.predict(dt, &self.config.filter)?
        };
        next.timestamp = q.timestamp;
        for b in &mut next.joints {
            b.timestamp = q.timestamp;
        }
        Ok(next)
    }

    pub fn push_encoder(&mut self, q: JointVector) -> Result<TrackerOutput, FusionError> {
        let beliefs = match self.buffer.head() {
            None => BeliefVector::initialize(&self.model, &q.values, q.timestamp, &self.config.filter)?,
            Some(head) => {
                if q.timestamp == head.timestamp {
                    return Err(FusionError::DuplicateTimestamp(q.timestamp));
                }
                if !(q.timestamp > head.timestamp) {
                    return Err(FusionError::OutOfOrder {
                        previous: head.timestamp,
                        got: q.timestamp,
                    });
                }
                self.step(&head.beliefs, &q)?
            }
        };
        let out = TrackerOutput::from_beliefs(&self.model, &beliefs)?;
        self.buffer.push(BufferEntry {
            timestamp: q.timestamp,
            beliefs,
            encoder: q,
        });
        Ok(out)
    }

    /// Selects the belief for `image` and snapshots everything the update needs.
    pub fn begin_image(&self, image: &DepthImage) -> Result<ImageJob, FusionError> {
        let t = image.timestamp + self.config.image_timestamp_offset;
        let (oldest, head) = match (self.buffer.tail(), self.buffer.head()) {
            (Some(a), Some(b)) => (a.timestamp, b.timestamp),
            _ => return Err(FusionError::Empty),
        };
        if t > head {
            return Err(FusionError::ImageAheadOfHead { image: t, head });
        }
        let idx = self
            .buffer
            .locate(t)
            .ok_or(FusionError::BeyondHorizon { image: t, oldest })?;
        let entry = &self.buffer.entries[idx];
        let mut image = image.clone();
        image.timestamp = entry.timestamp;
        let mut cpf = self.config.cpf;
        cpf.seed = frame_seed(self.config.cpf.seed, image.frame_id);
        Ok(ImageJob {
            target_timestamp: entry.timestamp,
            prior: entry.beliefs.clone(),
            image,
            cpf,
            pixel: self.config.pixel,
        })
    }

    /// Splices an image posterior into the buffer and re-filters every later
    /// encoder reading, including ones that arrived while the job ran.
    pub fn commit_image(&mut self, job: CompletedImageJob) -> Result<TrackerOutput, FusionError> {
        let idx = self
            .buffer
            .entries
            .iter()
            .position(|e| e.timestamp == job.target_timestamp)
            .ok_or_else(|| FusionError::BeyondHorizon {
                image: job.target_timestamp,
                oldest: self.buffer.tail().map_or(f64::NAN, |e| e.timestamp),
            })?;
        let mut replayed = Vec::with_capacity(self.buffer.len() - idx);
        replayed.push(job.posterior);
        for e in self.buffer.entries.iter().skip(idx + 1) {
            let next = self.step(replayed.last().expect("non-empty"), &e.encoder)?;
            replayed.push(next);
        }
        for (e, b) in self.buffer.entries.iter_mut().skip(idx).zip(replayed) {
            e.beliefs = b;
        }
        self.output()
    }

    pub fn push_image(&mut self, image: &DepthImage) -> Result<TrackerOutput, FusionError> {
        let job = self.begin_image(image)?;
        let done = job.run(&self.model)?;
        self.commit_image(done)
    }
}

/// Tracker shared between an encoder thread and an image thread. Buffer
/// mutations are serialized by one lock; the particle computation of an
/// image runs outside it, and image updates are applied one at a time in
/// the order they are started.
pub struct SharedTracker {
    state: Mutex<Tracker>,
    model: KinematicModel,
    image_lane: Mutex<()>,
}

impl SharedTracker {
    pub fn new(tracker: Tracker) -> Self {
        Self {
            model: tracker.model.clone(),
            state: Mutex::new(tracker),
            image_lane: Mutex::new(()),
        }
    }

    pub fn push_encoder(&self, q: JointVector) -> Result<TrackerOutput, FusionError> {
        self.state.lock().expect("tracker lock poisoned").push_encoder(q)
    }

    pub fn push_image(&self, image: &DepthImage) -> Result<TrackerOutput, FusionError> {
        let _lane = self.image_lane.lock().expect("image lane poisoned");
        let job = self.state.lock().expect("tracker lock poisoned").begin_image(image)?;
        let done = job.run(&self.model)?;
        self.state.lock().expect("tracker lock poisoned").commit_image(done)
    }

    pub fn output(&self) -> Result<TrackerOutput, FusionError> {
        self.state.lock().expect("tracker lock poisoned").output()
    }

    pub fn into_inner(self) -> Tracker {
        self.state.into_inner().expect("tracker lock poisoned")
    }
}

/// Streams a dataset through a tracker in arrival order: encoders at their
/// timestamp, images at timestamp plus their delay. An image whose corrected
/// timestamp is ahead of the newest encoder reading waits until a reading
/// reaches it. Returns one output per processed record.
pub fn track_sequence(
    dataset: &Dataset,
    model: &KinematicModel,
    config: &TrackerConfig,
) -> Result<Vec<TrackerOutput>, FusionError> {
    let mut tracker = Tracker::new(model.clone(), *config)?;
    if dataset.images.len() != dataset.frames.len() {
        return Err(FusionError::Dataset(format!(
            "{} image records but {} frames",
            dataset.images.len(),
            dataset.frames.len()
        )));
    }
    let mut events: Vec<(f64, u8, usize)> = Vec::with_capacity(dataset.encoders.len() + dataset.images.len());
    for (i, e) in dataset.encoders.iter().enumerate() {
        events.push((e.timestamp, 0, i));
    }
    for (i, r) in dataset.images.iter().enumerate() {
        if !(r.delay >= 0.0) || !r.timestamp.is_finite() {
            return Err(FusionError::Dataset(format!("bad image record {i}")));
        }
        events.push((r.timestamp + r.delay, 1, i));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let offset = config.image_timestamp_offset;
    let mut pending: VecDeque<usize> = VecDeque::new();
    let mut outputs = Vec::with_capacity(dataset.encoders.len() + dataset.images.len());
    for (_, kind, i) in events {
        if kind == 0 {
            outputs.push(tracker.push_encoder(dataset.encoders[i].clone())?);
        } else {
            pending.push_back(i);
        }
        let head = tracker.buffer().head().map_or(f64::NEG_INFINITY, |e| e.timestamp);
        while let Some(&i) = pending.front() {
            if dataset.frames[i].timestamp + offset > head {
                break;
            }
            pending.pop_front();
            outputs.push(tracker.push_image(&dataset.frames[i])?);
        }
    }
    Ok(outputs)
}
