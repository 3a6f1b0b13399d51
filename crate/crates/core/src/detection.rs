use crate::association::Embedding;
use crate::error::Result;
use crate::geometry::{localize, Location, PanoramaRig, ViewObservation};
use crate::pose::{estimate_pixel_height, reference_column, Keypoint, PoseParams};

/// One person seen in one view at one frame, as delivered by the pose and
/// re-identification stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub view_id: u32,
    pub keypoints: Vec<Keypoint>,
    pub embedding: Embedding,
}

impl Detection {
    pub fn localize(&self, rig: &PanoramaRig, pose: &PoseParams) -> Result<LocalizedDetection> {
        rig.view(self.view_id)?;
        let pixel_height = estimate_pixel_height(&self.keypoints, pose)?;
        let u_ref = reference_column(&self.keypoints, pose)?;
        let location = localize(rig, self.view_id, u_ref, pixel_height)?;
        Ok(LocalizedDetection {
            frame: self.frame,
            view_id: self.view_id,
            u_ref,
            pixel_height,
            location,
            embedding: self.embedding.clone(),
        })
    }
}

/// A detection placed on the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedDetection {
    pub frame: u64,
    pub view_id: u32,
    pub u_ref: f64,
    pub pixel_height: f64,
    pub location: Location,
    pub embedding: Embedding,
}

impl ViewObservation for LocalizedDetection {
    fn view_id(&self) -> u32 {
        self.view_id
    }

    fn column(&self) -> f64 {
        self.u_ref
    }

    fn location(&self) -> Location {
        self.location
    }
}
