//! Fusing per-slice 2D detections into 3D endpoint candidates.

use super::{Detection2D, DetectionSet3D, Endpoint3D, KeypointClass};
use crate::geometry::{Point3, PolarAngle};
use crate::volume::VoxelVolume;
use crate::Scalar;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let root = self.find(self.0[i]);
            self.0[i] = root;
        }
        self.0[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Group per-slice detections into 3D endpoints.
///
/// Within each class, detections on adjacent slices whose in-plane
/// distance is at most `link_radius_mm` are chained into one group. Each
/// group collapses to a single 3D point at the intensity-weighted centroid
/// of its members (weights are the local HU sampled from `vol`, clamped
/// below at zero; equal weights if everything is non-positive) with the
/// circular mean of the member angles and the mean confidence.
pub fn fuse_slices<T: Scalar>(
    dets: &[Detection2D<T>],
    vol: &VoxelVolume<T>,
    link_radius_mm: T,
) -> DetectionSet3D<T> {
    let mut out = DetectionSet3D::default();
    for class in KeypointClass::ALL {
        let members: Vec<&Detection2D<T>> = dets.iter().filter(|d| d.class == class).collect();
        let n = members.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (members[i], members[j]);
                if a.slice.abs_diff(b.slice) != 1 {
                    continue;
                }
                let dx = a.center_mm[0] - b.center_mm[0];
                let dy = a.center_mm[1] - b.center_mm[1];
                if (dx * dx + dy * dy).sqrt() <= link_radius_mm {
                    uf.union(i, j);
                }
            }
        }

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of_root: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let root = uf.find(i);
            match group_of_root[root] {
                Some(g) => groups[g].push(i),
                None => {
                    group_of_root[root] = Some(groups.len());
                    groups.push(vec![i]);
                }
            }
        }

        for group in groups {
            let mut weights = Vec::with_capacity(group.len());
            for &idx in &group {
                let d = members[idx];
                let p = Point3::new(d.center_mm[0], d.center_mm[1], vol.slice_z(d.slice));
                let hu = vol.sample_trilinear(p).unwrap_or(T::zero());
                weights.push(hu.max(T::zero()));
            }
            let total: T = weights.iter().fold(T::zero(), |acc, &w| acc + w);
            if total <= T::zero() {
                weights.iter_mut().for_each(|w| *w = T::one());
            }
            let total: T = weights.iter().fold(T::zero(), |acc, &w| acc + w);

            let mut pos = Point3::new(T::zero(), T::zero(), T::zero());
            let (mut sin_sum, mut cos_sum) = (T::zero(), T::zero());
            let mut conf_sum = T::zero();
            for (&idx, &w) in group.iter().zip(weights.iter()) {
                let d = members[idx];
                pos.x = pos.x + w * d.center_mm[0];
                pos.y = pos.y + w * d.center_mm[1];
                pos.z = pos.z + w * vol.slice_z(d.slice);
                sin_sum = sin_sum + d.angle.radians().sin();
                cos_sum = cos_sum + d.angle.radians().cos();
                conf_sum = conf_sum + d.confidence;
            }
            pos.x = pos.x / total;
            pos.y = pos.y / total;
            pos.z = pos.z / total;

            let angle = if sin_sum.abs() + cos_sum.abs() > T::cast(1e-12) {
                PolarAngle::new(sin_sum.atan2(cos_sum))
            } else {
                members[group[0]].angle
            };
            let endpoint = Endpoint3D::new(pos, angle, conf_sum / T::cast(group.len()));
            match class {
                KeypointClass::Tip => out.tips.push(endpoint),
                KeypointClass::Handle => out.handles.push(endpoint),
            }
        }
    }
    out
}
