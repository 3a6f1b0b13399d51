//! Frame-by-frame track management: match, spawn, age and retire tracks.
//!
//! Every live track is predicted one frame ahead before association, so rows
//! of the cost matrix are all live tracks (coasting ones included). Matched
//! tracks have their lifespan decremented and then reset, unmatched tracks
//! keep the decrement, and a track whose lifespan reaches zero is dropped at
//! the end of the frame.

use serde::{Deserialize, Serialize};

use crate::association::{build_cost_matrix, solve_assignment, CostMode, Cue, Embedding};
use crate::detection::{Detection, LocalizedDetection};
use crate::error::{Error, Result};
use crate::filtering::{ConstantVelocityFilter, KalmanParams, KalmanState};
use crate::geometry::{merge_cross_view_duplicates, Location, PanoramaRig, DEFAULT_BODY_HEIGHT_M};
use crate::pose::PoseParams;

pub const DEFAULT_LIFESPAN: u32 = 10;
pub const DEFAULT_EPSILON: f64 = 1.0;

/// How a track's appearance descriptor follows its matched detections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AppearanceUpdate {
    /// Replace with the most recent matched detection's embedding.
    #[default]
    Latest,
    /// Exponential moving average; `beta` is the weight kept on the old descriptor.
    Ema { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// A matched pair is accepted only if its cost is strictly below this.
    pub epsilon: f64,
    pub max_lifespan: u32,
    pub kalman: KalmanParams,
    /// Cross-view duplicate merge radius in meters; 0 disables merging.
    pub merge_radius_m: f64,
    pub pose: PoseParams,
    pub body_height_m: f64,
    pub cost_mode: CostMode,
    pub appearance: AppearanceUpdate,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_lifespan: DEFAULT_LIFESPAN,
            kalman: KalmanParams::default(),
            merge_radius_m: 0.0,
            pose: PoseParams::default(),
            body_height_m: DEFAULT_BODY_HEIGHT_M,
            cost_mode: CostMode::Combined,
            appearance: AppearanceUpdate::Latest,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTrackerConfig(msg));
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.max_lifespan < 1 {
            return bad("max_lifespan must be at least 1".into());
        }
        if !(self.body_height_m > 0.0 && self.body_height_m.is_finite()) {
            return bad(format!("body height must be positive, got {}", self.body_height_m));
        }
        if !(self.merge_radius_m >= 0.0) {
            return bad(format!("merge radius must be non-negative, got {}", self.merge_radius_m));
        }
        if let AppearanceUpdate::Ema { beta } = self.appearance {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("EMA beta must be in [0, 1), got {beta}"));
            }
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub lifespan: u32,
    pub state: KalmanState,
    pub embedding: Embedding,
    /// Observed `(frame, location)` pairs, frames strictly increasing.
    pub history: Vec<(u64, Location)>,
    /// Prediction for the most recently stepped frame.
    pub predicted: Location,
}

/// One row of tracker output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackletPoint {
    pub frame: u64,
    pub track_id: u64,
    pub location: Location,
    /// True when the track coasted this frame and `location` is a prediction.
    pub estimated: bool,
    pub view_id: Option<u32>,
    pub u_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrackerStats {
    pub frames: u64,
    pub created: u64,
    pub retired: u64,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    filter: ConstantVelocityFilter,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    stats: TrackerStats,
}

enum Outcome {
    Coasted,
    Observed { view_id: u32, u_ref: f64, location: Location },
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            filter: ConstantVelocityFilter::new(config.kalman),
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            stats: TrackerStats::default(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    pub fn stats(&self) -> TrackerStats {
        self.stats
    }

    /// Advances the track set by one frame and returns every live track's
    /// position for that frame, ordered by track id.
    pub fn step(&mut self, frame: u64, detections: Vec<LocalizedDetection>) -> Result<Vec<TrackletPoint>> {
        if let Some(previous) = self.last_frame {
            if frame <= previous {
                return Err(Error::NonMonotoneFrame { previous, frame });
            }
        }

        for track in &mut self.tracks {
            let (state, predicted) = self.filter.predict(&track.state);
            track.state = state;
            track.predicted = predicted;
        }

        let mut outcomes: Vec<Outcome> = self.tracks.iter().map(|_| Outcome::Coasted).collect();
        let mut matched_detection = vec![false; detections.len()];

        if !self.tracks.is_empty() && !detections.is_empty() {
            let track_cues: Vec<Cue<'_>> =
                self.tracks.iter().map(|t| Cue { location: t.predicted, embedding: &t.embedding }).collect();
            let detection_cues: Vec<Cue<'_>> =
                detections.iter().map(|d| Cue { location: d.location, embedding: &d.embedding }).collect();
            let costs = build_cost_matrix(
                &track_cues,
                &detection_cues,
                self.config.body_height_m,
                self.config.cost_mode,
            )?;
            let assignment = solve_assignment(&costs)?;

            for track in &mut self.tracks {
                track.lifespan = track.lifespan.saturating_sub(1);
            }
            for &(i, j) in &assignment.matches {
                if costs.get(i, j) < self.config.epsilon {
                    let det = &detections[j];
                    let track = &mut self.tracks[i];
                    track.lifespan = self.config.max_lifespan;
                    track.state = self.filter.update(&track.state, det.location);
                    track.history.push((frame, det.location));
                    track.embedding = match self.config.appearance {
                        AppearanceUpdate::Latest => det.embedding.clone(),
                        AppearanceUpdate::Ema { beta } => track.embedding.blend(&det.embedding, beta)?,
                    };
                    outcomes[i] =
                        Outcome::Observed { view_id: det.view_id, u_ref: det.u_ref, location: det.location };
                    matched_detection[j] = true;
                }
            }
        } else {
            for track in &mut self.tracks {
                track.lifespan = track.lifespan.saturating_sub(1);
            }
        }

        for (det, matched) in detections.into_iter().zip(matched_detection) {
            if matched {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.stats.created += 1;
            outcomes.push(Outcome::Observed {
                view_id: det.view_id,
                u_ref: det.u_ref,
                location: det.location,
            });
            self.tracks.push(Track {
                id,
                lifespan: self.config.max_lifespan,
                state: self.filter.initiate(det.location),
                history: vec![(frame, det.location)],
                predicted: det.location,
                embedding: det.embedding,
            });
        }

        let mut out = Vec::with_capacity(self.tracks.len());
        let mut kept = Vec::with_capacity(self.tracks.len());
        for (track, outcome) in std::mem::take(&mut self.tracks).into_iter().zip(outcomes) {
            if track.lifespan == 0 {
                self.stats.retired += 1;
                continue;
            }
            out.push(match outcome {
                Outcome::Coasted => TrackletPoint {
                    frame,
                    track_id: track.id,
                    location: track.predicted,
                    estimated: true,
                    view_id: None,
                    u_ref: None,
                },
                Outcome::Observed { view_id, u_ref, location } => TrackletPoint {
                    frame,
                    track_id: track.id,
                    location,
                    estimated: false,
                    view_id: Some(view_id),
                    u_ref: Some(u_ref),
                },
            });
            kept.push(track);
        }
        self.tracks = kept;
        self.last_frame = Some(frame);
        self.stats.frames += 1;
        out.sort_by_key(|p| p.track_id);
        Ok(out)
    }
}

/// A detection that could not be placed on the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedDetection {
    pub frame: u64,
    /// Position of the detection within its frame's input list.
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Clone, Default)]
pub struct FrameOutput {
    pub tracklets: Vec<TrackletPoint>,
    pub skipped: Vec<SkippedDetection>,
}

/// Localization, optional duplicate merging and tracking over a stream of
/// raw detections. Frames with no detections between two pushed frames are
/// stepped as empty frames so lifespans and predictions advance per frame.
#[derive(Debug, Clone)]
pub struct TrackingPipeline {
    rig: PanoramaRig,
    tracker: Tracker,
}

impl TrackingPipeline {
    pub fn new(config: TrackerConfig, rig: &PanoramaRig) -> Result<Self> {
        let rig = rig.with_body_height(config.body_height_m);
        rig.validate()?;
        Ok(Self { rig, tracker: Tracker::new(config)? })
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn rig(&self) -> &PanoramaRig {
        &self.rig
    }

    pub fn push_frame(&mut self, frame: u64, detections: Vec<Detection>) -> Result<FrameOutput> {
        let mut out = FrameOutput::default();
        if let Some(previous) = self.tracker.last_frame() {
            if frame <= previous {
                return Err(Error::NonMonotoneFrame { previous, frame });
            }
            for gap in previous + 1..frame {
                out.tracklets.extend(self.tracker.step(gap, Vec::new())?);
            }
        }

        let config = self.tracker.config();
        let mut localized = Vec::with_capacity(detections.len());
        for (index, det) in detections.iter().enumerate() {
            match det.localize(&self.rig, &config.pose) {
                Ok(loc) => localized.push(loc),
                Err(error) => out.skipped.push(SkippedDetection { frame, index, error }),
            }
        }
        let localized = merge_cross_view_duplicates(&self.rig, localized, config.merge_radius_m)?;
        out.tracklets.extend(self.tracker.step(frame, localized)?);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// Ordered by `(frame, track_id)`.
    pub tracklets: Vec<TrackletPoint>,
    pub skipped: Vec<SkippedDetection>,
    pub stats: TrackerStats,
}

/// Tracks a whole sequence given detections grouped by ascending frame.
pub fn run<I>(config: TrackerConfig, rig: &PanoramaRig, frames: I) -> Result<RunOutput>
where
    I: IntoIterator<Item = (u64, Vec<Detection>)>,
{
    let mut pipeline = TrackingPipeline::new(config, rig)?;
    let mut out = RunOutput::default();
    for (frame, detections) in frames {
        let f = pipeline.push_frame(frame, detections)?;
        out.tracklets.extend(f.tracklets);
        out.skipped.extend(f.skipped);
    }
    out.stats = pipeline.tracker().stats();
    Ok(out)
}

/// Groups a frame-sorted detection list into per-frame batches.
pub fn group_by_frame(detections: Vec<Detection>) -> Result<Vec<(u64, Vec<Detection>)>> {
    let mut frames: Vec<(u64, Vec<Detection>)> = Vec::new();
    for det in detections {
        match frames.last_mut() {
            Some((f, batch)) if *f == det.frame => batch.push(det),
            Some((f, _)) if *f > det.frame => {
                return Err(Error::NonMonotoneFrame { previous: *f, frame: det.frame })
            }
            _ => frames.push((det.frame, vec![det])),
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn det(frame: u64, x: f64, z: f64, e: &Embedding) -> LocalizedDetection {
        LocalizedDetection {
            frame,
            view_id: 0,
            u_ref: 320.0,
            pixel_height: 100.0,
            location: Location::new(x, z),
            embedding: e.clone(),
        }
    }

    #[test]
    fn first_frame_spawns_everything() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let e = emb(&[1.0, 0.0]);
        let out = t.step(1, vec![det(1, 0.0, 3.0, &e), det(1, 2.0, 3.0, &e), det(1, -2.0, 3.0, &e)]).unwrap();
        assert_eq!(out.iter().map(|p| p.track_id).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(t.tracks().iter().all(|tr| tr.lifespan == 10));
        assert!(out.iter().all(|p| !p.estimated));
    }

    #[test]
    fn cost_above_epsilon_spawns_new_track() {
        // trajectory ~1 (far) plus appearance 1.5 gives about 2.5 >= 1.0
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let a = emb(&[1.0, 0.0]);
        let h = 0.5f64;
        let b = emb(&[-h, (1.0 - h * h).sqrt()]);
        t.step(1, vec![det(1, 0.0, 3.0, &a)]).unwrap();
        let out = t.step(2, vec![det(2, 0.0, 13.0, &b)]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(t.tracks()[0].lifespan, 9);
        assert!(out[0].estimated);
        assert_eq!((out[1].track_id, out[1].estimated), (2, false));
        assert_eq!(t.tracks()[1].lifespan, 10);
    }

    #[test]
    fn zero_epsilon_never_matches() {
        let cfg = TrackerConfig { epsilon: 0.0, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        let e = emb(&[1.0]);
        for f in 1..=3 {
            t.step(f, vec![det(f, 0.0, 3.0, &e)]).unwrap();
        }
        assert_eq!(t.stats().created, 3);
    }

    #[test]
    fn lifespan_boundary() {
        for (gap, survives) in [(9u64, true), (10, false)] {
            let mut t = Tracker::new(TrackerConfig::default()).unwrap();
            let e = emb(&[0.2, 0.9]);
            t.step(0, vec![det(0, 1.0, 4.0, &e)]).unwrap();
            for f in 1..=gap {
                let out = t.step(f, vec![]).unwrap();
                assert_eq!(out.len() as u64, u64::from(f < 10));
            }
            let out = t.step(gap + 1, vec![det(gap + 1, 1.0, 4.0, &e)]).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].track_id == 1, survives, "gap {gap}");
        }
    }

    #[test]
    fn rejects_non_monotone_frames() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(5, vec![]).unwrap();
        assert_eq!(t.step(5, vec![]), Err(Error::NonMonotoneFrame { previous: 5, frame: 5 }));
    }

    #[test]
    fn ema_appearance() {
        let cfg =
            TrackerConfig { appearance: AppearanceUpdate::Ema { beta: 0.5 }, ..TrackerConfig::default() };
        let mut t = Tracker::new(cfg).unwrap();
        t.step(0, vec![det(0, 0.0, 3.0, &emb(&[1.0, 0.0]))]).unwrap();
        t.step(1, vec![det(1, 0.0, 3.0, &emb(&[0.8, 0.6]))]).unwrap();
        let e = t.tracks()[0].embedding.values();
        assert!((e[0] - 0.9).abs() < 1e-12 && (e[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrackerConfig { epsilon: -1.0, ..Default::default() },
            TrackerConfig { max_lifespan: 0, ..Default::default() },
            TrackerConfig { body_height_m: 0.0, ..Default::default() },
            TrackerConfig { appearance: AppearanceUpdate::Ema { beta: 1.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(Tracker::new(cfg).is_err());
        }
    }

    #[test]
    fn grouping_requires_sorted_frames() {
        let e = emb(&[1.0]);
        let d = |frame| Detection { frame, view_id: 0, keypoints: vec![], embedding: e.clone() };
        let g = group_by_frame(vec![d(0), d(0), d(2)]).unwrap();
        assert_eq!(g.iter().map(|(f, b)| (*f, b.len())).collect::<Vec<_>>(), vec![(0, 2), (2, 1)]);
        assert!(group_by_frame(vec![d(3), d(1)]).is_err());
    }
}
