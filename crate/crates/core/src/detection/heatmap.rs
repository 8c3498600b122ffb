//! Heatmap ground-truth encoding, offset encoding/decoding, and peak
//! extraction.

use super::{Detection2D, Heatmap2D, HeatmapGeometry, Keypoint2D, KeypointClass};
use crate::geometry::PolarAngle;
use crate::Scalar;

/// Per-pixel regression targets at heatmap resolution, shared by both
/// classes: the subpixel offset of Eq-style quantization correction and
/// the polar angle.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMaps<T> {
    pub dims: [usize; 2],
    pub offset_x: Vec<T>,
    pub offset_y: Vec<T>,
    pub angle: Vec<T>,
}

impl<T: Scalar> FieldMaps<T> {
    pub fn zeros(dims: [usize; 2]) -> Self {
        let n = dims[0] * dims[1];
        Self {
            dims,
            offset_x: vec![T::zero(); n],
            offset_y: vec![T::zero(); n],
            angle: vec![T::zero(); n],
        }
    }

    #[inline]
    fn idx(&self, u: usize, v: usize) -> usize {
        v * self.dims[0] + u
    }
}

/// Quantize an input-resolution pixel coordinate by the down-sampling
/// factor `d`, returning the heatmap base pixel and the sub-pixel offset
/// in `[0, 1)²`.
pub fn offset_encode<T: Scalar>(x_px: T, y_px: T, d: usize) -> ((usize, usize), (T, T)) {
    let df = T::cast(d);
    let (gx, gy) = (x_px / df, y_px / df);
    let (bx, by) = (gx.floor(), gy.floor());
    (
        (
            bx.to_usize().expect("non-negative pixel coordinate"),
            by.to_usize().expect("non-negative pixel coordinate"),
        ),
        (gx - bx, gy - by),
    )
}

/// Invert [`offset_encode`]: reconstruct the input-resolution pixel
/// coordinate from the base pixel and offset.
pub fn offset_decode<T: Scalar>(base: (usize, usize), offset: (T, T), d: usize) -> (T, T) {
    let df = T::cast(d);
    (
        (T::cast(base.0) + offset.0) * df,
        (T::cast(base.1) + offset.1) * df,
    )
}

fn keypoint_base_pixel<T: Scalar>(geom: &HeatmapGeometry<T>, center_mm: [T; 2]) -> (usize, usize) {
    let (x_px, y_px) = geom.world_to_px(center_mm[0], center_mm[1]);
    let (base, _) = offset_encode(x_px, y_px, geom.downsample);
    base
}

/// Ground-truth heatmap: for every class plane, each pixel holds the max
/// over that class's keypoints of a Gaussian kernel centered at the
/// keypoint's quantized heatmap pixel, with σ = radius/3 (in mm, so
/// anisotropic pixel spacing is handled correctly). The keypoint pixel
/// itself is exactly 1.
pub fn heatmap_gt<T: Scalar>(
    centers: &[([T; 2], KeypointClass)],
    geom: &HeatmapGeometry<T>,
) -> Heatmap2D<T> {
    let mut map = Heatmap2D::zeros(*geom);
    let [w, h] = geom.heatmap_dims();
    let d = T::cast(geom.downsample);
    let step_x = d * geom.slice_spacing_mm[0];
    let step_y = d * geom.slice_spacing_mm[1];

    for &(center_mm, class) in centers {
        let (cu, cv) = keypoint_base_pixel(geom, center_mm);
        let sigma = geom.sigma_mm(class);
        let denom = T::cast(2.0) * sigma * sigma;
        let plane = map.plane_mut(class);
        for v in 0..h {
            let dy = (T::cast(v) - T::cast(cv)) * step_y;
            for u in 0..w {
                let dx = (T::cast(u) - T::cast(cu)) * step_x;
                let val = (-(dx * dx + dy * dy) / denom).exp();
                let cell = &mut plane[v * w + u];
                if val > *cell {
                    *cell = val;
                }
            }
        }
    }
    map
}

/// Ground-truth encoding of one slice: the class heatmaps plus the offset
/// and angle regression targets written at each keypoint's base pixel.
pub fn encode_slice_gt<T: Scalar>(
    keypoints: &[Keypoint2D<T>],
    geom: &HeatmapGeometry<T>,
) -> (Heatmap2D<T>, FieldMaps<T>) {
    let centers: Vec<([T; 2], KeypointClass)> =
        keypoints.iter().map(|k| (k.center_mm, k.class)).collect();
    let map = heatmap_gt(&centers, geom);

    let mut fields = FieldMaps::zeros(geom.heatmap_dims());
    for k in keypoints {
        let (x_px, y_px) = geom.world_to_px(k.center_mm[0], k.center_mm[1]);
        let (base, offset) = offset_encode(x_px, y_px, geom.downsample);
        let idx = fields.idx(base.0, base.1);
        fields.offset_x[idx] = offset.0;
        fields.offset_y[idx] = offset.1;
        fields.angle[idx] = k.angle.radians();
    }
    (map, fields)
}

/// Extract local maxima from a predicted heatmap.
///
/// A pixel is emitted iff its value is ≥ all in-bounds 8-neighbors and
/// strictly above `threshold`. On plateaus of equal-valued adjacent
/// qualifiers, only the first in row-major scan order survives: a
/// qualifier is dropped when an equal-valued 8-neighbor earlier in scan
/// order was already kept. The emitted center is the offset-corrected
/// subpixel position converted to world mm; the angle is read from the
/// angle field at the peak pixel.
pub fn extract_peaks<T: Scalar>(
    pred: &Heatmap2D<T>,
    fields: &FieldMaps<T>,
    threshold: T,
    slice: usize,
) -> Vec<Detection2D<T>> {
    let geom = &pred.geom;
    let [w, h] = geom.heatmap_dims();
    assert_eq!(fields.dims, [w, h], "field maps must match heatmap dims");
    let mut out = Vec::new();

    for class in KeypointClass::ALL {
        let plane = pred.plane(class);
        let mut kept = vec![false; w * h];
        for v in 0..h {
            for u in 0..w {
                let idx = v * w + u;
                let val = plane[idx];
                if !(val > threshold) {
                    continue;
                }
                let mut is_peak = true;
                let mut tied_to_kept = false;
                for dv in -1i64..=1 {
                    for du in -1i64..=1 {
                        if du == 0 && dv == 0 {
                            continue;
                        }
                        let (nu, nv) = (u as i64 + du, v as i64 + dv);
                        if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                            continue;
                        }
                        let nidx = nv as usize * w + nu as usize;
                        let nval = plane[nidx];
                        if nval > val {
                            is_peak = false;
                        } else if nval == val && kept[nidx] {
                            tied_to_kept = true;
                        }
                    }
                }
                if !is_peak || tied_to_kept {
                    continue;
                }
                kept[idx] = true;

                let offset = (fields.offset_x[idx], fields.offset_y[idx]);
                let (x_px, y_px) = offset_decode((u, v), offset, geom.downsample);
                let x_px = num_traits::clamp(x_px, T::zero(), T::cast(geom.slice_dims[0] - 1));
                let y_px = num_traits::clamp(y_px, T::zero(), T::cast(geom.slice_dims[1] - 1));
                let (x_mm, y_mm) = geom.px_to_world(x_px, y_px);
                out.push(Detection2D {
                    class,
                    slice,
                    center_mm: [x_mm, y_mm],
                    angle: PolarAngle::new(fields.angle[idx]),
                    confidence: val,
                });
            }
        }
    }
    out
}
