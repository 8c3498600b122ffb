//! Detection-stage mathematics: heatmap encoding, losses, peak decoding,
//! 2D→3D fusion, and a simulated detector that perturbs ground truth in
//! place of a trained network.

mod fuse;
mod heatmap;
mod loss;
mod simulate;

pub use fuse::fuse_slices;
pub use heatmap::{
    encode_slice_gt, extract_peaks, heatmap_gt, offset_decode, offset_encode, FieldMaps,
};
pub use loss::{cosine_angle_loss, focal_loss, smooth_l1, total_loss, FocalParams, LossWeights};
pub use simulate::{simulate_detections, NoiseSpec};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, PolarAngle};
use crate::{Result, Scalar};

/// Keypoint class: one of the two needle endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeypointClass {
    Tip,
    Handle,
}

impl KeypointClass {
    pub const ALL: [KeypointClass; 2] = [KeypointClass::Tip, KeypointClass::Handle];

    pub fn plane(self) -> usize {
        match self {
            KeypointClass::Tip => 0,
            KeypointClass::Handle => 1,
        }
    }
}

/// Geometry shared by all heatmap-domain operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGeometry<T> {
    /// Down-sampling factor between input pixels and heatmap pixels.
    pub downsample: usize,
    /// Input-resolution slice dimensions (pixels).
    pub slice_dims: [usize; 2],
    /// In-plane pixel spacing, mm.
    pub slice_spacing_mm: [T; 2],
    /// World (x, y) of the center of input pixel (0, 0), mm.
    pub origin_mm: [T; 2],
    /// Gaussian footprint radius for tips, mm.
    pub tip_radius_mm: T,
    /// Gaussian footprint radius for handles, mm.
    pub handle_radius_mm: T,
}

impl<T: Scalar> HeatmapGeometry<T> {
    pub fn new(downsample: usize, slice_dims: [usize; 2], slice_spacing_mm: [T; 2]) -> Self {
        assert!(downsample >= 1);
        Self {
            downsample,
            slice_dims,
            slice_spacing_mm,
            origin_mm: [T::zero(), T::zero()],
            tip_radius_mm: T::cast(3.0),
            handle_radius_mm: T::cast(4.0),
        }
    }

    pub fn heatmap_dims(&self) -> [usize; 2] {
        let d = self.downsample;
        [
            self.slice_dims[0].div_ceil(d),
            self.slice_dims[1].div_ceil(d),
        ]
    }

    pub fn radius_mm(&self, class: KeypointClass) -> T {
        match class {
            KeypointClass::Tip => self.tip_radius_mm,
            KeypointClass::Handle => self.handle_radius_mm,
        }
    }

    /// Kernel standard deviation: radius / 3.
    pub fn sigma_mm(&self, class: KeypointClass) -> T {
        self.radius_mm(class) / T::cast(3.0)
    }

    /// World mm → input-resolution pixel coordinate.
    pub fn world_to_px(&self, x_mm: T, y_mm: T) -> (T, T) {
        (
            (x_mm - self.origin_mm[0]) / self.slice_spacing_mm[0],
            (y_mm - self.origin_mm[1]) / self.slice_spacing_mm[1],
        )
    }

    /// Input-resolution pixel coordinate → world mm.
    pub fn px_to_world(&self, x_px: T, y_px: T) -> (T, T) {
        (
            self.origin_mm[0] + x_px * self.slice_spacing_mm[0],
            self.origin_mm[1] + y_px * self.slice_spacing_mm[1],
        )
    }
}

/// Per-class heatmap planes at heatmap resolution, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap2D<T> {
    pub geom: HeatmapGeometry<T>,
    planes: [Vec<T>; 2],
}

impl<T: Scalar> Heatmap2D<T> {
    pub fn zeros(geom: HeatmapGeometry<T>) -> Self {
        let [w, h] = geom.heatmap_dims();
        Self {
            geom,
            planes: [vec![T::zero(); w * h], vec![T::zero(); w * h]],
        }
    }

    pub fn plane(&self, class: KeypointClass) -> &[T] {
        &self.planes[class.plane()]
    }

    pub fn plane_mut(&mut self, class: KeypointClass) -> &mut [T] {
        &mut self.planes[class.plane()]
    }

    #[inline]
    pub fn get(&self, class: KeypointClass, u: usize, v: usize) -> T {
        self.planes[class.plane()][v * self.geom.heatmap_dims()[0] + u]
    }

    #[inline]
    pub fn set(&mut self, class: KeypointClass, u: usize, v: usize, value: T) {
        let w = self.geom.heatmap_dims()[0];
        self.planes[class.plane()][v * w + u] = value;
    }
}

/// A ground-truth keypoint on one axial slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint2D<T> {
    pub class: KeypointClass,
    /// World (x, y), mm.
    pub center_mm: [T; 2],
    pub angle: PolarAngle<T>,
}

/// A decoded detection on one axial slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection2D<T> {
    pub class: KeypointClass,
    /// Axial slice index.
    pub slice: usize,
    /// Offset-corrected world (x, y), mm.
    pub center_mm: [T; 2],
    #[serde(rename = "angle_rad")]
    pub angle: PolarAngle<T>,
    pub confidence: T,
}

/// One fused 3D endpoint candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint3D<T> {
    pub pos: Point3<T>,
    pub angle: PolarAngle<T>,
    pub confidence: T,
}

/// Fused tip and handle candidates for a whole volume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet3D<T> {
    pub tips: Vec<Endpoint3D<T>>,
    pub handles: Vec<Endpoint3D<T>>,
}

#[derive(Serialize, Deserialize)]
struct EndpointRecord<T> {
    pos_mm: [T; 3],
    angle_rad: T,
    confidence: T,
}

#[derive(Serialize, Deserialize)]
struct DetectionSetFile<T> {
    tips: Vec<EndpointRecord<T>>,
    handles: Vec<EndpointRecord<T>>,
}

impl<T: Scalar> Endpoint3D<T> {
    pub fn new(pos: Point3<T>, angle: PolarAngle<T>, confidence: T) -> Self {
        Self {
            pos,
            angle,
            confidence,
        }
    }

    fn to_record(self) -> EndpointRecord<T> {
        EndpointRecord {
            pos_mm: [self.pos.x, self.pos.y, self.pos.z],
            angle_rad: self.angle.radians(),
            confidence: self.confidence,
        }
    }

    fn from_record(r: EndpointRecord<T>) -> Self {
        Self {
            pos: Point3::new(r.pos_mm[0], r.pos_mm[1], r.pos_mm[2]),
            angle: PolarAngle::new(r.angle_rad),
            confidence: r.confidence,
        }
    }
}

impl<T: Scalar> DetectionSet3D<T> {
    pub fn endpoints(&self, class: KeypointClass) -> &[Endpoint3D<T>] {
        match class {
            KeypointClass::Tip => &self.tips,
            KeypointClass::Handle => &self.handles,
        }
    }

    /// Write the `.det.json` representation.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = DetectionSetFile {
            tips: self.tips.iter().map(|e| e.to_record()).collect(),
            handles: self.handles.iter().map(|e| e.to_record()).collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file: DetectionSetFile<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Self {
            tips: file.tips.into_iter().map(Endpoint3D::from_record).collect(),
            handles: file
                .handles
                .into_iter()
                .map(Endpoint3D::from_record)
                .collect(),
        })
    }
}

/// Write a list of per-slice detections (`.det2d.json`).
pub fn write_detections_2d<T: Scalar>(dets: &[Detection2D<T>], path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(dets)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_detections_2d<T: Scalar>(path: &Path) -> Result<Vec<Detection2D<T>>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
