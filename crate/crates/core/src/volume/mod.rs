//! Voxel-grid container with HU sampling, preprocessing, and segment
//! profiling.
//!
//! Grid convention: `data` is row-major with x fastest and z slowest; the
//! voxel at index `(i, j, k)` has its center at
//! `origin + (i·s_x, j·s_y, k·s_z)` in world millimetres.

mod io;
pub mod morphology;

pub use io::VolumeDtype;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Segment3};
use crate::{Error, Result, Scalar};

/// Default lower clamp for normalization: air on the HU scale.
pub const HU_CLAMP_FLOOR: f64 = -1000.0;
/// Default upper clamp for normalization.
pub const HU_CLAMP_MAX: f64 = 800.0;

/// A 3D scalar grid with anisotropic spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelVolume<T> {
    pub dims: [usize; 3],
    pub spacing_mm: [T; 3],
    pub origin_mm: Point3<T>,
    data: Vec<T>,
}

impl<T: Scalar> VoxelVolume<T> {
    /// Allocate a constant-valued volume.
    pub fn filled(dims: [usize; 3], spacing_mm: [T; 3], origin_mm: Point3<T>, value: T) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "dims must be >= 1");
        assert!(
            spacing_mm.iter().all(|&s| s > T::zero()),
            "spacing must be positive"
        );
        Self {
            dims,
            spacing_mm,
            origin_mm,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    /// Wrap existing data; length must match `dims`.
    pub fn from_data(
        dims: [usize; 3],
        spacing_mm: [T; 3],
        origin_mm: Point3<T>,
        data: Vec<T>,
    ) -> Result<Self> {
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::DataSizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            dims,
            spacing_mm,
            origin_mm,
            data,
        })
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    /// World coordinate of the voxel center at `(i, j, k)`.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        Point3::new(
            self.origin_mm.x + T::cast(i) * self.spacing_mm[0],
            self.origin_mm.y + T::cast(j) * self.spacing_mm[1],
            self.origin_mm.z + T::cast(k) * self.spacing_mm[2],
        )
    }

    /// World z of slice `k`'s center plane.
    pub fn slice_z(&self, k: usize) -> T {
        self.origin_mm.z + T::cast(k) * self.spacing_mm[2]
    }

    /// Continuous grid coordinate of a world point (0 at the first voxel
    /// center, `n-1` at the last).
    pub fn grid_coord(&self, p: Point3<T>) -> [T; 3] {
        [
            (p.x - self.origin_mm.x) / self.spacing_mm[0],
            (p.y - self.origin_mm.y) / self.spacing_mm[1],
            (p.z - self.origin_mm.z) / self.spacing_mm[2],
        ]
    }

    /// Whether a world point lies inside the trilinear-sampleable region.
    pub fn contains(&self, p: Point3<T>) -> bool {
        let g = self.grid_coord(p);
        (0..3).all(|ax| g[ax] >= T::zero() && g[ax] <= T::cast(self.dims[ax] - 1))
    }

    /// Trilinear interpolation of the eight voxels surrounding `p`.
    ///
    /// Exact voxel-center queries return the stored value.
    pub fn sample_trilinear(&self, p: Point3<T>) -> Result<T> {
        let g = self.grid_coord(p);
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for ax in 0..3 {
            let upper = T::cast(self.dims[ax] - 1);
            if g[ax] < T::zero() || g[ax] > upper {
                return Err(Error::OutOfBounds {
                    x: p.x.to_f64().unwrap_or(f64::NAN),
                    y: p.y.to_f64().unwrap_or(f64::NAN),
                    z: p.z.to_f64().unwrap_or(f64::NAN),
                });
            }
            let floor = g[ax].floor();
            let mut i = floor.to_usize().unwrap_or(0);
            // queries exactly on the upper face interpolate from the last cell
            if i + 1 >= self.dims[ax] && self.dims[ax] > 1 {
                i = self.dims[ax] - 2;
            }
            base[ax] = i.min(self.dims[ax] - 1);
            frac[ax] = if self.dims[ax] > 1 {
                g[ax] - T::cast(base[ax])
            } else {
                T::zero()
            };
        }

        let one = T::one();
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let step = |ax: usize| usize::from(self.dims[ax] > 1);
        let (i0, j0, k0) = (base[0], base[1], base[2]);
        let (i1, j1, k1) = (i0 + step(0), j0 + step(1), k0 + step(2));

        let c00 = self.get(i0, j0, k0) * (one - fx) + self.get(i1, j0, k0) * fx;
        let c10 = self.get(i0, j1, k0) * (one - fx) + self.get(i1, j1, k0) * fx;
        let c01 = self.get(i0, j0, k1) * (one - fx) + self.get(i1, j0, k1) * fx;
        let c11 = self.get(i0, j1, k1) * (one - fx) + self.get(i1, j1, k1) * fx;
        let c0 = c00 * (one - fy) + c10 * fy;
        let c1 = c01 * (one - fy) + c11 * fy;
        Ok(c0 * (one - fz) + c1 * fz)
    }

    /// HU samples along a segment at uniform arclength spacing `<= step`,
    /// endpoints included; the sample count is `ceil(length/step) + 1`.
    pub fn segment_profile(&self, seg: &Segment3<T>, step_mm: T) -> Result<Vec<T>> {
        assert!(step_mm > T::zero(), "profile step must be positive");
        let n_intervals = (seg.length() / step_mm)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let mut samples = Vec::with_capacity(n_intervals + 1);
        for i in 0..=n_intervals {
            let t = T::cast(i) / T::cast(n_intervals);
            samples.push(self.sample_trilinear(seg.point_at(t))?);
        }
        Ok(samples)
    }

    /// Half the smallest spacing: the default profile step.
    pub fn default_profile_step(&self) -> T {
        let s = self.spacing_mm;
        s[0].min(s[1]).min(s[2]) / T::cast(2.0)
    }

    /// Copy axial slice `k` out of the volume.
    pub fn axial_slice(&self, k: usize) -> Slice2D<T> {
        let (nx, ny) = (self.dims[0], self.dims[1]);
        let start = self.index(0, 0, k);
        Slice2D {
            dims: [nx, ny],
            spacing_mm: [self.spacing_mm[0], self.spacing_mm[1]],
            data: self.data[start..start + nx * ny].to_vec(),
        }
    }

    /// Overwrite axial slice `k`.
    pub fn set_axial_slice(&mut self, k: usize, slice: &Slice2D<T>) {
        assert_eq!([self.dims[0], self.dims[1]], slice.dims);
        let start = self.index(0, 0, k);
        self.data[start..start + slice.data.len()].copy_from_slice(&slice.data);
    }

    /// Apply the white top-hat transform to every axial slice.
    pub fn white_top_hat_slices(&self, radius_px: usize) -> Self {
        let mut out = self.clone();
        for k in 0..self.dims[2] {
            let slice = morphology::white_top_hat(&self.axial_slice(k), radius_px);
            out.set_axial_slice(k, &slice);
        }
        out
    }
}

/// Clamp to `[floor_hu, max_hu]` and affinely map that range onto `[-1, 1]`.
pub fn clamp_normalize<T: Scalar>(vol: &VoxelVolume<T>, floor_hu: T, max_hu: T) -> Result<VoxelVolume<T>> {
    if !(max_hu > floor_hu) {
        return Err(Error::ConstantVolume {
            floor: floor_hu.to_f64().unwrap_or(f64::NAN),
            max: max_hu.to_f64().unwrap_or(f64::NAN),
        });
    }
    let two = T::cast(2.0);
    let span = max_hu - floor_hu;
    let mut out = vol.clone();
    for v in out.data_mut() {
        let clamped = num_traits::clamp(*v, floor_hu, max_hu);
        *v = two * (clamped - floor_hu) / span - T::one();
    }
    Ok(out)
}

/// A 2D scalar grid (one axial slice), row-major with x fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice2D<T> {
    pub dims: [usize; 2],
    pub spacing_mm: [T; 2],
    pub data: Vec<T>,
}

impl<T: Scalar> Slice2D<T> {
    pub fn filled(dims: [usize; 2], spacing_mm: [T; 2], value: T) -> Self {
        Self {
            dims,
            spacing_mm,
            data: vec![value; dims[0] * dims[1]],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.dims[0] + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[j * self.dims[0] + i] = value;
    }
}
