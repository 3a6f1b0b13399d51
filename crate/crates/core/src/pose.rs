//! 2D pose keypoints and the per-person measurements derived from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint names of the 17-keypoint COCO skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const ALL: [Joint; 17] = [
        Joint::Nose,
        Joint::LeftEye,
        Joint::RightEye,
        Joint::LeftEar,
        Joint::RightEar,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::LeftEye => "left_eye",
            Joint::RightEye => "right_eye",
            Joint::LeftEar => "left_ear",
            Joint::RightEar => "right_ear",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightWrist => "right_wrist",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightAnkle => "right_ankle",
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Joint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.as_str() == s)
            .ok_or_else(|| format!("unknown keypoint name `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub joint: Joint,
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(joint: Joint, u: f64, v: f64, confidence: f64) -> Self {
        Self { joint, u, v, confidence }
    }
}

/// Thresholds used when turning keypoints into a pixel height and column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    /// Minimum confidence for a keypoint to count as visible.
    pub visibility_threshold: f64,
    /// Stature over torso length, used when the nose or both ankles are missing.
    pub torso_ratio: f64,
}

impl Default for PoseParams {
    fn default() -> Self {
        Self { visibility_threshold: 0.3, torso_ratio: 3.3 }
    }
}

struct Visible<'a> {
    keypoints: &'a [Keypoint],
    threshold: f64,
}

impl<'a> Visible<'a> {
    fn iter(&self) -> impl Iterator<Item = &'a Keypoint> + '_ {
        self.keypoints
            .iter()
            .filter(move |k| k.confidence >= self.threshold && k.u.is_finite() && k.v.is_finite())
    }

    fn get(&self, joint: Joint) -> Option<&'a Keypoint> {
        self.iter().find(|k| k.joint == joint)
    }

    fn mean_over(&self, joints: &[Joint], coord: impl Fn(&Keypoint) -> f64) -> Option<f64> {
        let vals: Vec<f64> = joints.iter().filter_map(|&j| self.get(j)).map(&coord).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Apparent body height in pixels.
///
/// Uses the nose-to-ankle span when the nose and at least one ankle are
/// visible, otherwise scales the shoulder-to-hip span by the torso ratio
/// (which needs both shoulders and both hips).
pub fn estimate_pixel_height(keypoints: &[Keypoint], params: &PoseParams) -> Result<f64> {
    let vis = Visible { keypoints, threshold: params.visibility_threshold };
    if vis.iter().count() < 2 {
        return Err(Error::InsufficientKeypoints);
    }

    let height = if let (Some(nose), Some(ankle_v)) =
        (vis.get(Joint::Nose), vis.mean_over(&[Joint::LeftAnkle, Joint::RightAnkle], |k| k.v))
    {
        ankle_v - nose.v
    } else {
        let torso = [Joint::LeftShoulder, Joint::RightShoulder, Joint::LeftHip, Joint::RightHip];
        if !torso.iter().all(|&j| vis.get(j).is_some()) {
            return Err(Error::InsufficientKeypoints);
        }
        let shoulders = vis.mean_over(&torso[..2], |k| k.v).unwrap_or_default();
        let hips = vis.mean_over(&torso[2..], |k| k.v).unwrap_or_default();
        params.torso_ratio * (hips - shoulders)
    };

    if height > 0.0 {
        Ok(height)
    } else {
        Err(Error::NonPositiveHeight(height))
    }
}

/// Image column used as the person's horizontal position.
///
/// Hip midpoint, then shoulder midpoint, then the mean of every visible keypoint.
pub fn reference_column(keypoints: &[Keypoint], params: &PoseParams) -> Result<f64> {
    let vis = Visible { keypoints, threshold: params.visibility_threshold };
    if let Some(u) = vis.mean_over(&[Joint::LeftHip, Joint::RightHip], |k| k.u) {
        return Ok(u);
    }
    if let Some(u) = vis.mean_over(&[Joint::LeftShoulder, Joint::RightShoulder], |k| k.u) {
        return Ok(u);
    }
    let all: Vec<f64> = vis.iter().map(|k| k.u).collect();
    if all.is_empty() {
        return Err(Error::InsufficientKeypoints);
    }
    Ok(all.iter().sum::<f64>() / all.len() as f64)
}
