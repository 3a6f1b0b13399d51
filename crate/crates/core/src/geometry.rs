//! Pinhole views arranged around a common center by yaw, and the mapping
//! between image pixels and the shared ground-plane frame.
//!
//! Conventions: camera frames are x right, y down, z forward. A point in the
//! panoramic frame maps into the camera frame of a view with yaw `θ` as
//! `p_cam = R(θ) · p_pano`; all views share the rig center (zero translation).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BODY_HEIGHT_M: f64 = 1.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidRig(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidRig("principal point must be finite".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub view_id: u32,
    pub yaw_deg: f64,
    #[serde(flatten)]
    pub intrinsics: CameraIntrinsics,
    #[serde(rename = "width")]
    pub image_width: u32,
    #[serde(rename = "height")]
    pub image_height: u32,
}

impl ViewConfig {
    pub fn rotation(&self) -> YawRotation {
        YawRotation::new(self.yaw_deg)
    }

    /// Pixel distance from column `u` to the nearer left/right image edge.
    pub fn border_margin(&self, u: f64) -> f64 {
        u.min(self.image_width as f64 - u)
    }
}

/// A set of views sharing one center, plus the assumed stature of every person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaRig {
    pub body_height_m: f64,
    pub views: Vec<ViewConfig>,
}

impl PanoramaRig {
    pub fn new(views: Vec<ViewConfig>, body_height_m: f64) -> Result<Self> {
        let rig = Self { body_height_m, views };
        rig.validate()?;
        Ok(rig)
    }

    /// Four 90° views at yaw 0/90/180/270 with identical intrinsics.
    pub fn quad(width: u32, height: u32, body_height_m: f64) -> Self {
        let f = width as f64 / 2.0;
        let views = (0..4u32)
            .map(|i| ViewConfig {
                view_id: i,
                yaw_deg: 90.0 * i as f64,
                intrinsics: CameraIntrinsics {
                    fx: f,
                    fy: f,
                    cx: width as f64 / 2.0,
                    cy: height as f64 / 2.0,
                },
                image_width: width,
                image_height: height,
            })
            .collect();
        Self { body_height_m, views }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let rig: PanoramaRig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        rig.validate().map_err(|e| e.to_string())?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.body_height_m > 0.0 && self.body_height_m.is_finite()) {
            return Err(Error::InvalidRig(format!(
                "body_height_m must be positive, got {}",
                self.body_height_m
            )));
        }
        if self.views.is_empty() {
            return Err(Error::InvalidRig("rig has no views".into()));
        }
        for (i, v) in self.views.iter().enumerate() {
            v.intrinsics.validate()?;
            if !(0.0..360.0).contains(&v.yaw_deg) {
                return Err(Error::InvalidRig(format!(
                    "view {} yaw {} outside [0, 360)",
                    v.view_id, v.yaw_deg
                )));
            }
            if v.image_width == 0 || v.image_height == 0 {
                return Err(Error::InvalidRig(format!("view {} has an empty image", v.view_id)));
            }
            for w in &self.views[..i] {
                if w.view_id == v.view_id {
                    return Err(Error::InvalidRig(format!("duplicate view_id {}", v.view_id)));
                }
                if w.yaw_deg == v.yaw_deg {
                    return Err(Error::InvalidRig(format!("duplicate yaw {}", v.yaw_deg)));
                }
            }
        }
        Ok(())
    }

    pub fn view(&self, view_id: u32) -> Result<&ViewConfig> {
        self.views.iter().find(|v| v.view_id == view_id).ok_or(Error::UnknownView(view_id))
    }

    pub fn with_body_height(&self, body_height_m: f64) -> Self {
        Self { body_height_m, views: self.views.clone() }
    }
}

/// Rotation about the vertical (y) axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawRotation(Matrix3<f64>);

impl YawRotation {
    pub fn new(yaw_deg: f64) -> Self {
        let (s, c) = yaw_deg.to_radians().sin_cos();
        Self(Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Panoramic frame to camera frame.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0 * p
    }

    /// Camera frame to panoramic frame.
    pub fn to_panorama(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0.transpose() * p
    }
}

impl std::ops::Mul for YawRotation {
    type Output = Matrix3<f64>;

    fn mul(self, rhs: Self) -> Matrix3<f64> {
        self.0 * rhs.0
    }
}

pub fn rotation_y(yaw_deg: f64) -> YawRotation {
    YawRotation::new(yaw_deg)
}

/// A ground-plane position in the panoramic frame (y is implicitly 0).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub z: f64,
}

impl Location {
    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn distance_sq(&self, other: &Location) -> f64 {
        (self.x - other.x).powi(2) + (self.z - other.z).powi(2)
    }

    pub fn distance(&self, other: &Location) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

/// Projects a panoramic-frame point (with explicit y) into a view.
pub fn project(rig: &PanoramaRig, view_id: u32, point: &Vector3<f64>) -> Result<PixelPoint> {
    let view = rig.view(view_id)?;
    project_into(view, point)
}

pub fn project_into(view: &ViewConfig, point: &Vector3<f64>) -> Result<PixelPoint> {
    let cam = view.rotation().to_camera(point);
    if cam.z <= 0.0 {
        return Err(Error::BehindCamera { view_id: view.view_id, depth: cam.z });
    }
    let k = &view.intrinsics;
    Ok(PixelPoint { u: k.fx * cam.x / cam.z + k.cx, v: k.fy * cam.y / cam.z + k.cy })
}

/// Camera-frame `(x, z)` of a person of stature `body_height_m` whose
/// apparent height is `pixel_height` and whose reference column is `u_ref`.
pub fn localize_in_camera(
    view: &ViewConfig,
    u_ref: f64,
    pixel_height: f64,
    body_height_m: f64,
) -> Result<(f64, f64)> {
    if !(pixel_height > 0.0) {
        return Err(Error::DegenerateHeight(pixel_height));
    }
    let k = &view.intrinsics;
    let depth = k.fy * body_height_m / pixel_height;
    let lateral = (u_ref - k.cx) * depth / k.fx;
    Ok((lateral, depth))
}

/// Ground-plane location of a person seen in `view_id`, using the rig's height prior.
pub fn localize(rig: &PanoramaRig, view_id: u32, u_ref: f64, pixel_height: f64) -> Result<Location> {
    let view = rig.view(view_id)?;
    let (x_cam, z_cam) = localize_in_camera(view, u_ref, pixel_height, rig.body_height_m)?;
    let p = view.rotation().to_panorama(&Vector3::new(x_cam, 0.0, z_cam));
    Ok(Location::new(p.x, p.z))
}

pub const DEFAULT_MERGE_RADIUS_M: f64 = 0.3;

/// Something seen in one view and already placed on the ground plane.
pub trait ViewObservation {
    fn view_id(&self) -> u32;
    fn column(&self) -> f64;
    fn location(&self) -> Location;
}

/// Drops one member of every pair of observations from different views that
/// lie closer than `merge_radius_m`, keeping the one farther from its image's
/// left/right border. A radius of zero keeps everything.
pub fn merge_cross_view_duplicates<T: ViewObservation>(
    rig: &PanoramaRig,
    observations: Vec<T>,
    merge_radius_m: f64,
) -> Result<Vec<T>> {
    if !(merge_radius_m > 0.0) || observations.len() < 2 {
        return Ok(observations);
    }
    let margins = observations
        .iter()
        .map(|o| Ok(rig.view(o.view_id())?.border_margin(o.column())))
        .collect::<Result<Vec<f64>>>()?;

    let mut pairs = Vec::new();
    for i in 0..observations.len() {
        for j in i + 1..observations.len() {
            if observations[i].view_id() == observations[j].view_id() {
                continue;
            }
            let d = observations[i].location().distance(&observations[j].location());
            if d < merge_radius_m {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut alive = vec![true; observations.len()];
    for (_, i, j) in pairs {
        if alive[i] && alive[j] {
            let drop = if margins[j] > margins[i] { i } else { j };
            alive[drop] = false;
        }
    }
    Ok(observations.into_iter().zip(alive).filter_map(|(o, keep)| keep.then_some(o)).collect())
}
