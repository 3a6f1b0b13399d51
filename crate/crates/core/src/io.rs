//! JSON Lines wire formats for detections, tracklets, localized points and
//! ground truth.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::association::Embedding;
use crate::detection::{Detection, LocalizedDetection};
use crate::metrics::LabeledPoint;
use crate::pose::{Joint, Keypoint};
use crate::tracker::TrackletPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointRecord {
    pub name: String,
    pub u: f64,
    pub v: f64,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: u64,
    pub view: u32,
    pub keypoints: Vec<KeypointRecord>,
    pub embedding: Vec<f64>,
}

impl DetectionRecord {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            frame: d.frame,
            view: d.view_id,
            keypoints: d
                .keypoints
                .iter()
                .map(|k| KeypointRecord { name: k.joint.to_string(), u: k.u, v: k.v, conf: k.confidence })
                .collect(),
            embedding: d.embedding.values().to_vec(),
        }
    }

    pub fn to_detection(&self) -> Result<Detection, String> {
        let keypoints = self
            .keypoints
            .iter()
            .map(|k| {
                let joint: Joint = k.name.parse()?;
                if !(0.0..=1.0).contains(&k.conf) {
                    return Err(format!("keypoint `{}` confidence {} outside [0, 1]", k.name, k.conf));
                }
                Ok(Keypoint::new(joint, k.u, k.v, k.conf))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let embedding = Embedding::new(self.embedding.clone()).map_err(|e| e.to_string())?;
        Ok(Detection { frame: self.frame, view_id: self.view, keypoints, embedding })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackletRecord {
    pub frame: u64,
    pub id: u64,
    pub x: f64,
    pub z: f64,
    pub estimated: bool,
    pub view: Option<u32>,
    pub u: Option<f64>,
}

impl From<&TrackletPoint> for TrackletRecord {
    fn from(p: &TrackletPoint) -> Self {
        Self {
            frame: p.frame,
            id: p.track_id,
            x: p.location.x,
            z: p.location.z,
            estimated: p.estimated,
            view: p.view_id,
            u: p.u_ref,
        }
    }
}

/// Ground-truth record; tracklet files are also accepted wherever these are
/// read, with the extra tracklet fields ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub frame: u64,
    pub id: u64,
    pub x: f64,
    pub z: f64,
}

impl From<&LabeledPoint> for GroundTruthRecord {
    fn from(p: &LabeledPoint) -> Self {
        Self { frame: p.frame, id: p.id, x: p.location.x, z: p.location.z }
    }
}

impl From<GroundTruthRecord> for LabeledPoint {
    fn from(r: GroundTruthRecord) -> Self {
        LabeledPoint::new(r.frame, r.id, r.x, r.z)
    }
}

/// Output of the localize-only pipeline: one line per detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub frame: u64,
    pub view: u32,
    pub x: f64,
    pub z: f64,
    pub u_ref: f64,
    pub h_body: f64,
}

impl From<&LocalizedDetection> for LocationRecord {
    fn from(d: &LocalizedDetection) -> Self {
        Self {
            frame: d.frame,
            view: d.view_id,
            x: d.location.x,
            z: d.location.z,
            u_ref: d.u_ref,
            h_body: d.pixel_height,
        }
    }
}

/// A line that failed to parse, 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug)]
pub enum ReadError {
    Io(std::io::Error),
    Schema(Vec<LineError>),
}

/// Reads every non-blank line as `T`, collecting all schema errors rather
/// than stopping at the first. Returns `(line_number, record)` pairs.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<(usize, T)>, ReadError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(ReadError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(v) => out.push((idx + 1, v)),
            Err(e) => errors.push(LineError { line: idx + 1, message: e.to_string() }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(ReadError::Schema(errors))
    }
}

/// Parses a detection file into domain detections, enforcing a constant
/// embedding length. Returns `(line_number, detection)` pairs.
pub fn read_detections<R: BufRead>(reader: R) -> Result<Vec<(usize, Detection)>, ReadError> {
    let records = read_jsonl::<DetectionRecord, _>(reader)?;
    let mut errors = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    let mut dim = None;
    for (line, rec) in records {
        let expected = *dim.get_or_insert(rec.embedding.len());
        if rec.embedding.len() != expected {
            errors.push(LineError {
                line,
                message: format!("embedding length {} differs from {}", rec.embedding.len(), expected),
            });
            continue;
        }
        match rec.to_detection() {
            Ok(d) => out.push((line, d)),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(ReadError::Schema(errors))
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, &r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
