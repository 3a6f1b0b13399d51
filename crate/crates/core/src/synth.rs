//! Synthetic ground-truth scenes: agents walking on the ground plane around
//! the rig, rendered to per-view pose detections with controllable noise.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::association::Embedding;
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::{project_into, Location, PanoramaRig, ViewConfig};
use crate::metrics::LabeledPoint;
use crate::pose::{Joint, Keypoint};

/// Keypoint heights above the ground as fractions of full stature.
pub const NOSE_FRACTION: f64 = 0.94;
pub const SHOULDER_FRACTION: f64 = 0.82;
pub const HIP_FRACTION: f64 = 0.52;
pub const ANKLE_FRACTION: f64 = 0.02;

const SHOULDER_HALF_WIDTH_M: f64 = 0.2;
const HIP_HALF_WIDTH_M: f64 = 0.15;
const ANKLE_HALF_WIDTH_M: f64 = 0.1;
const KEYPOINT_CONFIDENCE: f64 = 0.9;
const WAYPOINT_REACHED_M: f64 = 0.5;
const WAYPOINT_TIMEOUT_FRAMES: u32 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occlusion {
    pub agent: usize,
    pub start: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub n_agents: usize,
    pub n_frames: u64,
    pub arena_radius_m: f64,
    /// Waypoints are never placed closer than this to the rig center.
    pub min_range_m: f64,
    /// Walking speed bounds, meters per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    pub max_turn_deg: f64,
    /// Height of the camera centers above the ground.
    pub camera_height_m: f64,
    pub embedding_dim: usize,
    pub embedding_noise_std: f64,
    pub keypoint_noise_px: f64,
    pub detection_dropout_prob: f64,
    pub occlusions: Vec<Occlusion>,
    /// Extra angular width (degrees) beyond each view's sector in which an
    /// agent is also seen, producing cross-view duplicates.
    pub overlap_deg: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            n_frames: 300,
            arena_radius_m: 10.0,
            min_range_m: 2.0,
            speed_min: 0.02,
            speed_max: 0.06,
            max_turn_deg: 10.0,
            camera_height_m: 1.2,
            embedding_dim: Embedding::DEFAULT_DIM,
            embedding_noise_std: 0.0,
            keypoint_noise_px: 0.0,
            detection_dropout_prob: 0.0,
            occlusions: Vec::new(),
            overlap_deg: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.n_agents < 1 {
            return bad("n_agents must be at least 1".into());
        }
        if self.n_frames < 1 {
            return bad("n_frames must be at least 1".into());
        }
        if !(self.min_range_m >= 0.0 && self.arena_radius_m > self.min_range_m + 1.0) {
            return bad(format!(
                "need 0 <= min_range_m and arena_radius_m > min_range_m + 1 (got {} / {})",
                self.min_range_m, self.arena_radius_m
            ));
        }
        if !(self.speed_min >= 0.0 && self.speed_max >= self.speed_min && self.speed_max.is_finite()) {
            return bad(format!("invalid speed range [{}, {}]", self.speed_min, self.speed_max));
        }
        if !(self.max_turn_deg > 0.0 && self.max_turn_deg <= 180.0) {
            return bad(format!("max_turn_deg must be in (0, 180], got {}", self.max_turn_deg));
        }
        if !(self.camera_height_m.is_finite()) {
            return bad("camera_height_m must be finite".into());
        }
        if self.embedding_dim < 1 {
            return bad("embedding_dim must be at least 1".into());
        }
        if !(self.embedding_noise_std >= 0.0 && self.keypoint_noise_px >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.detection_dropout_prob) {
            return bad(format!("dropout probability {} outside [0, 1]", self.detection_dropout_prob));
        }
        if !(self.overlap_deg >= 0.0 && self.overlap_deg < 90.0) {
            return bad(format!("overlap_deg must be in [0, 90), got {}", self.overlap_deg));
        }
        if let Some(o) = self.occlusions.iter().find(|o| o.agent >= self.n_agents) {
            return bad(format!("occlusion names agent {} of {}", o.agent, self.n_agents));
        }
        Ok(())
    }
}

/// A rendered detection together with the ground-truth identity behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDetection {
    pub detection: Detection,
    pub truth_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// One record per agent per frame, ordered by `(frame, id)`.
    pub ground_truth: Vec<LabeledPoint>,
    /// Ordered by frame, then agent, then view.
    pub detections: Vec<SyntheticDetection>,
}

impl SyntheticScene {
    pub fn detection_stream(&self) -> Vec<Detection> {
        self.detections.iter().map(|d| d.detection.clone()).collect()
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The fixed unit-norm descriptor of one identity.
pub fn identity_embedding(identity_seed: u64, dim: usize) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(identity_seed);
    let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    Embedding::new(raw).expect("gaussian vector has positive norm").normalized()
}

/// Identity descriptor plus isotropic Gaussian noise, renormalized to unit
/// length. `noise_std` is the RMS norm of the perturbation, so each component
/// gets `noise_std / sqrt(dim)` and the same setting means the same thing at
/// any embedding dimension.
pub fn synth_embedding<R: Rng>(
    identity_seed: u64,
    dim: usize,
    noise_std: f64,
    frame_rng: &mut R,
) -> Embedding {
    perturb(&identity_embedding(identity_seed, dim), noise_std, frame_rng)
}

fn perturb<R: Rng>(base: &Embedding, noise_std: f64, rng: &mut R) -> Embedding {
    if noise_std == 0.0 {
        return base.clone();
    }
    let sigma = noise_std / (base.dim() as f64).sqrt();
    let values: Vec<f64> = base
        .values()
        .iter()
        .map(|v| {
            let n: f64 = StandardNormal.sample(rng);
            v + sigma * n
        })
        .collect();
    Embedding::new(values).map(|e| e.normalized()).unwrap_or_else(|_| base.clone())
}

struct Agent {
    position: Location,
    heading: f64,
    speed: f64,
    waypoint: Location,
    frames_on_waypoint: u32,
}

fn sample_annulus<R: Rng>(rng: &mut R, r0: f64, r1: f64) -> Location {
    let r = rng.random_range(r0 * r0..=r1 * r1).sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Location::new(r * a.sin(), r * a.cos())
}

fn segment_clearance(a: Location, b: Location) -> f64 {
    let (dx, dz) = (b.x - a.x, b.z - a.z);
    let len2 = dx * dx + dz * dz;
    let t = if len2 > 0.0 { (-(a.x * dx + a.z * dz) / len2).clamp(0.0, 1.0) } else { 0.0 };
    Location::new(a.x + t * dx, a.z + t * dz).range()
}

impl Agent {
    fn pick_waypoint<R: Rng>(&mut self, cfg: &SceneConfig, rng: &mut R) {
        let (r0, r1) = (cfg.min_range_m, cfg.arena_radius_m - 0.5);
        let mut candidate = sample_annulus(rng, r0, r1);
        // prefer paths that do not cut through the rig
        for _ in 0..32 {
            if segment_clearance(self.position, candidate) >= 0.7 * cfg.min_range_m {
                break;
            }
            candidate = sample_annulus(rng, r0, r1);
        }
        self.waypoint = candidate;
        self.frames_on_waypoint = 0;
    }

    fn advance<R: Rng>(&mut self, cfg: &SceneConfig, rng: &mut R) {
        if self.position.distance(&self.waypoint) < WAYPOINT_REACHED_M
            || self.frames_on_waypoint >= WAYPOINT_TIMEOUT_FRAMES
        {
            self.pick_waypoint(cfg, rng);
        }
        self.frames_on_waypoint += 1;
        let desired = (self.waypoint.x - self.position.x).atan2(self.waypoint.z - self.position.z);
        let diff = wrap_pi(desired - self.heading);
        let max_turn = cfg.max_turn_deg.to_radians();
        self.heading = wrap_pi(self.heading + diff.clamp(-max_turn, max_turn));
        let mut next = Location::new(
            self.position.x + self.speed * self.heading.sin(),
            self.position.z + self.speed * self.heading.cos(),
        );
        // projecting onto the disk never lengthens the step
        let r = next.range();
        if r > cfg.arena_radius_m {
            next = Location::new(next.x * cfg.arena_radius_m / r, next.z * cfg.arena_radius_m / r);
        }
        self.position = next;
    }
}

fn wrap_pi(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = a.rem_euclid(t);
    if w > std::f64::consts::PI {
        w - t
    } else {
        w
    }
}

fn angular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Views in which a ground point at `loc` is visible: the view whose yaw is
/// nearest to the point's azimuth, plus any neighbour within the overlap band.
fn visible_views(rig: &PanoramaRig, loc: Location, overlap_deg: f64) -> Vec<&ViewConfig> {
    let azimuth = loc.x.atan2(loc.z).to_degrees().rem_euclid(360.0);
    let dist: Vec<f64> = rig.views.iter().map(|v| angular_distance_deg(azimuth, v.yaw_deg)).collect();
    let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
    rig.views
        .iter()
        .zip(&dist)
        .filter(|(_, &d)| d == nearest || (overlap_deg > 0.0 && d < nearest + overlap_deg && d < 90.0))
        .map(|(v, _)| v)
        .collect()
}

/// Synthetic person whose nose-to-ankle span equals `span_m`, standing at `loc`.
fn render_person<R: Rng>(
    view: &ViewConfig,
    loc: Location,
    span_m: f64,
    camera_height_m: f64,
    noise: Option<&Normal<f64>>,
    rng: &mut R,
) -> Result<Vec<Keypoint>> {
    let stature = span_m / (NOSE_FRACTION - ANKLE_FRACTION);
    // lateral offsets lie along the camera's x axis
    let rot = view.rotation();
    let right = rot.to_panorama(&Vector3::new(1.0, 0.0, 0.0));
    let center = Vector3::new(loc.x, 0.0, loc.z);
    let joints = [
        (Joint::Nose, NOSE_FRACTION, 0.0),
        (Joint::LeftShoulder, SHOULDER_FRACTION, -SHOULDER_HALF_WIDTH_M),
        (Joint::RightShoulder, SHOULDER_FRACTION, SHOULDER_HALF_WIDTH_M),
        (Joint::LeftHip, HIP_FRACTION, -HIP_HALF_WIDTH_M),
        (Joint::RightHip, HIP_FRACTION, HIP_HALF_WIDTH_M),
        (Joint::LeftAnkle, ANKLE_FRACTION, -ANKLE_HALF_WIDTH_M),
        (Joint::RightAnkle, ANKLE_FRACTION, ANKLE_HALF_WIDTH_M),
    ];
    joints
        .iter()
        .map(|&(joint, frac, lateral)| {
            // image y points down: a point above the ground has smaller y
            let mut p = center + right * lateral;
            p.y = camera_height_m - frac * stature;
            let px = project_into(view, &p)?;
            let (du, dv) = match noise {
                Some(n) => (n.sample(rng), n.sample(rng)),
                None => (0.0, 0.0),
            };
            Ok(Keypoint::new(joint, px.u + du, px.v + dv, KEYPOINT_CONFIDENCE))
        })
        .collect()
}

/// Simulates a scene. Ground-truth identities are `1..=n_agents`; frames are
/// `0..n_frames`. The same `(config, rig)` always produces the same scene.
pub fn generate_scene(config: &SceneConfig, rig: &PanoramaRig) -> Result<SyntheticScene> {
    config.validate()?;
    rig.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;

    let mut motion_rng = ChaCha8Rng::seed_from_u64(config.seed);
    motion_rng.set_stream(1);
    let mut obs_rng = ChaCha8Rng::seed_from_u64(config.seed);
    obs_rng.set_stream(2);

    let mut agents: Vec<Agent> = (0..config.n_agents)
        .map(|_| {
            let position = sample_annulus(&mut motion_rng, config.min_range_m, config.arena_radius_m - 1.0);
            let mut a = Agent {
                position,
                heading: motion_rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                speed: motion_rng.random_range(config.speed_min..=config.speed_max),
                waypoint: position,
                frames_on_waypoint: 0,
            };
            a.pick_waypoint(config, &mut motion_rng);
            a
        })
        .collect();
    let bases: Vec<Embedding> = (0..config.n_agents)
        .map(|i| identity_embedding(mix_seed(config.seed, i as u64 + 1), config.embedding_dim))
        .collect();
    let kp_noise = (config.keypoint_noise_px > 0.0)
        .then(|| Normal::new(0.0, config.keypoint_noise_px).expect("finite std"));

    let mut ground_truth = Vec::with_capacity(config.n_agents * config.n_frames as usize);
    let mut detections = Vec::new();
    for frame in 0..config.n_frames {
        if frame > 0 {
            for a in &mut agents {
                a.advance(config, &mut motion_rng);
            }
        }
        for (i, agent) in agents.iter().enumerate() {
            let truth_id = i as u64 + 1;
            ground_truth.push(LabeledPoint { frame, id: truth_id, location: agent.position });

            let occluded = config
                .occlusions
                .iter()
                .any(|o| o.agent == i && frame >= o.start && frame < o.start + o.length);
            for view in visible_views(rig, agent.position, config.overlap_deg) {
                // always draw so dropout does not shift later random streams
                let dropped = obs_rng.random::<f64>() < config.detection_dropout_prob;
                let keypoints = render_person(
                    view,
                    agent.position,
                    rig.body_height_m,
                    config.camera_height_m,
                    kp_noise.as_ref(),
                    &mut obs_rng,
                )?;
                let embedding = perturb(&bases[i], config.embedding_noise_std, &mut obs_rng);
                if dropped || occluded {
                    continue;
                }
                detections.push(SyntheticDetection {
                    detection: Detection { frame, view_id: view.view_id, keypoints, embedding },
                    truth_id,
                });
            }
        }
    }
    Ok(SyntheticScene { ground_truth, detections })
}
