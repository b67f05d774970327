use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DepthError;

pub const FRAME_MAGIC: &[u8; 4] = b"DPTH";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Observed depth frame. Row-major meters, NaN where the sensor gave no return.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub timestamp: f64,
    pub frame_id: u64,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, depth: Vec<f32>, timestamp: f64, frame_id: u64) -> Result<Self, DepthError> {
        if depth.len() != width * height {
            return Err(DepthError::Format(format!(
                "{} depth values for a {width}x{height} frame",
                depth.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            timestamp,
            frame_id,
        })
    }

    /// Frame without any returns.
    pub fn blank(width: usize, height: usize, timestamp: f64, frame_id: u64) -> Self {
        Self {
            width,
            height,
            depth: vec![f32::NAN; width * height],
            timestamp,
            frame_id,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| !d.is_nan()).count()
    }

    /// Checks that every return lies in `[z_min, z_max]`.
    pub fn check_range(&self, z_min: f64, z_max: f64) -> Result<(), DepthError> {
        match self
            .depth
            .iter()
            .find(|d| !d.is_nan() && !((**d as f64) >= z_min && (**d as f64) <= z_max))
        {
            Some(&d) => Err(DepthError::InvalidDepth(d as f64)),
            None => Ok(()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.depth.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.timestamp.to_le_bytes());
        for d in &self.depth {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    /// Decodes a frame; `frame_id` is not part of the binary and comes from the index.
    pub fn from_bytes(bytes: &[u8], frame_id: u64) -> Result<Self, DepthError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != FRAME_MAGIC {
            return Err(DepthError::Format("missing DPTH header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let width = u32_at(4);
        let height = u32_at(8);
        let timestamp = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let n = width
            .checked_mul(height)
            .ok_or_else(|| DepthError::Format("frame size overflow".into()))?;
        if bytes.len() != HEADER_LEN + 4 * n {
            return Err(DepthError::Format(format!(
                "expected {} bytes for a {width}x{height} frame, got {}",
                HEADER_LEN + 4 * n,
                bytes.len()
            )));
        }
        let depth = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            width,
            height,
            depth,
            timestamp,
            frame_id,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), DepthError> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path, frame_id: u64) -> Result<Self, DepthError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, frame_id)
    }
}

/// One line of the frame index file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameIndexEntry {
    pub frame_id: u64,
    pub file: String,
    pub timestamp: f64,
}

pub fn write_frame_index(path: &Path, entries: &[FrameIndexEntry]) -> Result<(), DepthError> {
    let mut f = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut f, e).map_err(|e| DepthError::Format(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_frame_index(path: &Path) -> Result<Vec<FrameIndexEntry>, DepthError> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| DepthError::Format(format!("index line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
