//! Synthetic CT scenes with known needle ground truth.
//!
//! Scenes are generated by seeded rejection sampling and rasterized into
//! voxel volumes, so every downstream stage can be validated in a closed
//! loop against exact geometry.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detection::KeypointClass;
use crate::geometry::{
    point_segment_distance, polar_angle, segment_min_distance, Point3, PolarAngle, Segment3,
    UnitVec3, Vec3,
};
use crate::volume::VoxelVolume;
use crate::{Error, Result, Scalar};

/// Derive a per-stage RNG seed from one root seed; stable across builds.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One implanted needle: endpoints plus its rendering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedleSpec<T> {
    pub tip_mm: Point3<T>,
    pub handle_mm: Point3<T>,
    /// Axis brightness of the rendered shaft, HU above background.
    pub peak_hu: T,
    pub radius_mm: T,
}

impl<T: Scalar> NeedleSpec<T> {
    pub fn segment(&self) -> Segment3<T> {
        Segment3::new(self.tip_mm, self.handle_mm).expect("needle endpoints are distinct")
    }

    pub fn length(&self) -> T {
        self.tip_mm.distance(self.handle_mm)
    }

    /// In-plane polar angle at the tip (toward the handle).
    pub fn tip_angle(&self) -> PolarAngle<T> {
        polar_angle(
            (self.tip_mm.x, self.tip_mm.y),
            (self.handle_mm.x, self.handle_mm.y),
        )
        .expect("needles have in-plane extent")
    }

    /// In-plane polar angle at the handle (toward the tip).
    pub fn handle_angle(&self) -> PolarAngle<T> {
        self.tip_angle().opposite()
    }

    /// 3D orientation from tip to handle.
    pub fn orientation(&self) -> UnitVec3<T> {
        self.segment().direction()
    }
}

/// Parameters of a random scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct SceneSpec<T: Scalar> {
    pub n_needles: usize,
    pub l_prior_mm: T,
    pub length_jitter_mm: T,
    pub min_pair_separation_mm: T,
    pub dims: [usize; 3],
    pub spacing_mm: [T; 3],
    pub origin_mm: [T; 3],
    pub background_hu: T,
    pub noise_sigma_hu: T,
    pub n_distractor_seeds: usize,
    pub needle_radius_mm: T,
    pub needle_peak_hu: T,
    /// Handle-end blob brightness relative to the shaft peak.
    pub handle_peak_factor: T,
    pub handle_blob_radius_mm: T,
    /// Inset from the volume boundary inside which endpoints are placed.
    pub placement_margin_mm: T,
    /// Minimum in-plane projection of a needle, so 2D angles are defined.
    pub min_inplane_extent_mm: T,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for SceneSpec<T> {
    fn default() -> Self {
        Self {
            n_needles: 15,
            l_prior_mm: T::cast(150.0),
            length_jitter_mm: T::cast(5.0),
            min_pair_separation_mm: T::cast(5.0),
            dims: [256, 256, 30],
            spacing_mm: [T::one(), T::one(), T::cast(5.0)],
            origin_mm: [T::zero(), T::zero(), T::zero()],
            background_hu: T::cast(40.0),
            noise_sigma_hu: T::cast(20.0),
            n_distractor_seeds: 0,
            needle_radius_mm: T::one(),
            needle_peak_hu: T::cast(900.0),
            handle_peak_factor: T::cast(1.5),
            handle_blob_radius_mm: T::cast(2.0),
            placement_margin_mm: T::cast(10.0),
            min_inplane_extent_mm: T::cast(20.0),
            rng_seed: 0,
        }
    }
}

impl<T: Scalar> SceneSpec<T> {
    /// World extent of the volume: centers of the first and last voxels.
    pub fn volume_bounds(&self) -> (Point3<T>, Point3<T>) {
        let lo = Point3::new(self.origin_mm[0], self.origin_mm[1], self.origin_mm[2]);
        let hi = Point3::new(
            self.origin_mm[0] + T::cast(self.dims[0] - 1) * self.spacing_mm[0],
            self.origin_mm[1] + T::cast(self.dims[1] - 1) * self.spacing_mm[1],
            self.origin_mm[2] + T::cast(self.dims[2] - 1) * self.spacing_mm[2],
        );
        (lo, hi)
    }

    /// Placement box: volume bounds inset by the placement margin.
    fn placement_box(&self) -> (Point3<T>, Point3<T>) {
        let (lo, hi) = self.volume_bounds();
        let m = self.placement_margin_mm;
        (
            Point3::new(lo.x + m, lo.y + m, lo.z + m),
            Point3::new(hi.x - m, hi.y - m, hi.z - m),
        )
    }

    /// Slice index whose center plane is nearest to a world z.
    pub fn nearest_slice(&self, z_mm: T) -> usize {
        let k = ((z_mm - self.origin_mm[2]) / self.spacing_mm[2])
            .round()
            .to_isize()
            .unwrap_or(0);
        (k.max(0) as usize).min(self.dims[2] - 1)
    }
}

/// A 2D annotation of one needle endpoint on its nearest axial slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceAnnotation<T> {
    pub needle: usize,
    pub class: KeypointClass,
    pub slice: usize,
    pub center_mm: [T; 2],
    pub angle: PolarAngle<T>,
}

/// A generated scene: needles plus derived orientations and 2D
/// annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Scalar> {
    pub scene: SceneSpec<T>,
    pub needles: Vec<NeedleSpec<T>>,
    pub orientations: Vec<UnitVec3<T>>,
    pub annotations: Vec<SliceAnnotation<T>>,
}

impl<T: Scalar> GroundTruth<T> {
    /// Build from needles, deriving orientations and per-slice
    /// annotations.
    pub fn from_needles(scene: SceneSpec<T>, needles: Vec<NeedleSpec<T>>) -> Self {
        let orientations = needles.iter().map(NeedleSpec::orientation).collect();
        let mut annotations = Vec::with_capacity(needles.len() * 2);
        for (i, n) in needles.iter().enumerate() {
            annotations.push(SliceAnnotation {
                needle: i,
                class: KeypointClass::Tip,
                slice: scene.nearest_slice(n.tip_mm.z),
                center_mm: [n.tip_mm.x, n.tip_mm.y],
                angle: n.tip_angle(),
            });
            annotations.push(SliceAnnotation {
                needle: i,
                class: KeypointClass::Handle,
                slice: scene.nearest_slice(n.handle_mm.z),
                center_mm: [n.handle_mm.x, n.handle_mm.y],
                angle: n.handle_angle(),
            });
        }
        Self {
            scene,
            needles,
            orientations,
            annotations,
        }
    }

    /// Write the `.gt.json` representation.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = GroundTruthFile {
            scene: self.scene.clone(),
            needles: self.needles.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file: GroundTruthFile<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Self::from_needles(file.scene, file.needles))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct GroundTruthFile<T: Scalar> {
    scene: SceneSpec<T>,
    needles: Vec<NeedleSpec<T>>,
}

const PLACEMENT_RETRIES: usize = 1000;

fn random_unit_vector<T: Scalar>(rng: &mut ChaCha8Rng) -> Vec3<T> {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1e-9 {
            return Vec3::new(T::cast(x / n), T::cast(y / n), T::cast(z / n));
        }
    }
}

fn uniform_point<T: Scalar>(rng: &mut ChaCha8Rng, lo: Point3<T>, hi: Point3<T>) -> Point3<T> {
    let mut u = |a: T, b: T| {
        let (af, bf) = (a.to_f64().unwrap(), b.to_f64().unwrap());
        T::cast(rng.gen_range(af..=bf))
    };
    let x = u(lo.x, hi.x);
    let y = u(lo.y, hi.y);
    let z = u(lo.z, hi.z);
    Point3::new(x, y, z)
}

/// Generate a random scene satisfying the length, in-plane-extent, and
/// pairwise-separation constraints. Deterministic for a fixed seed.
pub fn generate_scene<T: Scalar>(spec: &SceneSpec<T>) -> Result<GroundTruth<T>> {
    assert!(spec.n_needles >= 1, "scenes need at least one needle");
    assert!(
        spec.min_pair_separation_mm > T::zero(),
        "pair separation must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(spec.rng_seed, "placement"));
    let (lo, hi) = spec.placement_box();
    let jitter = spec.length_jitter_mm.to_f64().unwrap();

    let mut needles: Vec<NeedleSpec<T>> = Vec::with_capacity(spec.n_needles);
    let mut segments: Vec<Segment3<T>> = Vec::with_capacity(spec.n_needles);

    for needle_idx in 0..spec.n_needles {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let tip = uniform_point(&mut rng, lo, hi);
            let dir = random_unit_vector::<T>(&mut rng);
            let length = spec.l_prior_mm + T::cast(rng.gen_range(-jitter..=jitter));
            let handle = tip.add(dir.scale(length));

            let inside = handle.x >= lo.x
                && handle.x <= hi.x
                && handle.y >= lo.y
                && handle.y <= hi.y
                && handle.z >= lo.z
                && handle.z <= hi.z;
            if !inside {
                continue;
            }
            let dx = handle.x - tip.x;
            let dy = handle.y - tip.y;
            if (dx * dx + dy * dy).sqrt() < spec.min_inplane_extent_mm {
                continue;
            }
            let seg = Segment3::new(tip, handle).expect("length > 0");
            if segments
                .iter()
                .any(|s| segment_min_distance(s, &seg) < spec.min_pair_separation_mm)
            {
                continue;
            }

            needles.push(NeedleSpec {
                tip_mm: tip,
                handle_mm: handle,
                peak_hu: spec.needle_peak_hu,
                radius_mm: spec.needle_radius_mm,
            });
            segments.push(seg);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementInfeasible {
                needle: needle_idx,
                retries: PLACEMENT_RETRIES,
            });
        }
    }

    Ok(GroundTruth::from_needles(spec.clone(), needles))
}

/// Distractor seed rendering parameters (previously-implanted seeds).
const SEED_PEAK_HU: f64 = 1500.0;
const SEED_SEMIAXES_MM: [f64; 3] = [0.5, 0.5, 2.5];
const SEED_CLEARANCE_MM: f64 = 5.0;

/// Stamp `value = max(value, contribution)` over the voxels of slice `k`
/// inside an (x, y) world-space box.
fn stamp_slice<T: Scalar, F: Fn(Point3<T>) -> T>(
    field: &mut VoxelVolume<T>,
    k: usize,
    x_range: (T, T),
    y_range: (T, T),
    contribution: F,
) {
    let to_idx = |w: T, origin: T, s: T, n: usize, up: bool| -> usize {
        let g = (w - origin) / s;
        let g = if up { g.ceil() } else { g.floor() };
        g.to_isize().unwrap_or(0).clamp(0, n as isize - 1) as usize
    };
    let (i0, i1) = (
        to_idx(
            x_range.0,
            field.origin_mm.x,
            field.spacing_mm[0],
            field.dims[0],
            false,
        ),
        to_idx(
            x_range.1,
            field.origin_mm.x,
            field.spacing_mm[0],
            field.dims[0],
            true,
        ),
    );
    let (j0, j1) = (
        to_idx(
            y_range.0,
            field.origin_mm.y,
            field.spacing_mm[1],
            field.dims[1],
            false,
        ),
        to_idx(
            y_range.1,
            field.origin_mm.y,
            field.spacing_mm[1],
            field.dims[1],
            true,
        ),
    );
    for j in j0..=j1 {
        for i in i0..=i1 {
            let p = field.voxel_center(i, j, k);
            let c = contribution(p);
            if c > field.get(i, j, k) {
                field.set(i, j, k, c);
            }
        }
    }
}

/// Stamp one needle shaft.
///
/// A voxel's distance to the needle is measured from the voxel's z
/// extent (a vertical segment of one slice thickness), not from the
/// voxel center point: a thick axial slice shows every structure
/// crossing its slab, which is how the partial-volume geometry of
/// low-z-resolution CT behaves. A voxel exactly on the axis still
/// receives exactly `peak_hu`.
fn stamp_gaussian_tube<T: Scalar>(field: &mut VoxelVolume<T>, needle: &NeedleSpec<T>) {
    let seg = needle.segment();
    let sigma = needle.radius_mm / T::cast(2.0);
    let denom = T::cast(2.0) * sigma * sigma;
    let peak = needle.peak_hu;
    // cut the tube where the contribution falls below 0.5 HU
    let cut = sigma * (T::cast(2.0) * (peak / T::cast(0.5)).ln()).sqrt();
    let half_slab = field.spacing_mm[2] / T::cast(2.0);

    let (a, b) = (seg.a, seg.b);
    let dz = b.z - a.z;
    let reach = cut + half_slab;
    for k in 0..field.dims[2] {
        let zk = field.slice_z(k);
        let (t0, t1) = if dz.abs() < T::cast(1e-9) {
            if (a.z - zk).abs() > reach {
                continue;
            }
            (T::zero(), T::one())
        } else {
            let ta = ((zk - reach) - a.z) / dz;
            let tb = ((zk + reach) - a.z) / dz;
            let (mut t0, mut t1) = (ta.min(tb), ta.max(tb));
            t0 = t0.max(T::zero());
            t1 = t1.min(T::one());
            if t0 > t1 {
                continue;
            }
            (t0, t1)
        };
        let p0 = seg.point_at(t0);
        let p1 = seg.point_at(t1);
        let x_range = (p0.x.min(p1.x) - cut, p0.x.max(p1.x) + cut);
        let y_range = (p0.y.min(p1.y) - cut, p0.y.max(p1.y) + cut);
        stamp_slice(field, k, x_range, y_range, |p| {
            let column = Segment3 {
                a: Point3::new(p.x, p.y, p.z - half_slab),
                b: Point3::new(p.x, p.y, p.z + half_slab),
            };
            let r = segment_min_distance(&seg, &column);
            if r > cut {
                T::zero()
            } else {
                peak * (-(r * r) / denom).exp()
            }
        });
    }
}

fn stamp_gaussian_ball<T: Scalar>(
    field: &mut VoxelVolume<T>,
    center: Point3<T>,
    radius: T,
    amp: T,
) {
    let sigma = radius / T::cast(2.0);
    let denom = T::cast(2.0) * sigma * sigma;
    let cut = sigma * (T::cast(2.0) * (amp / T::cast(0.5)).ln()).sqrt();
    let half_slab = field.spacing_mm[2] / T::cast(2.0);
    for k in 0..field.dims[2] {
        let zk = field.slice_z(k);
        if (center.z - zk).abs() > cut + half_slab {
            continue;
        }
        stamp_slice(
            field,
            k,
            (center.x - cut, center.x + cut),
            (center.y - cut, center.y + cut),
            |p| {
                let column = Segment3 {
                    a: Point3::new(p.x, p.y, p.z - half_slab),
                    b: Point3::new(p.x, p.y, p.z + half_slab),
                };
                let d = point_segment_distance(center, &column);
                if d > cut {
                    T::zero()
                } else {
                    amp * (-(d * d) / denom).exp()
                }
            },
        );
    }
}

fn stamp_ellipsoid<T: Scalar>(field: &mut VoxelVolume<T>, center: Point3<T>, peak: T) {
    let ax = T::cast(SEED_SEMIAXES_MM[0]);
    let ay = T::cast(SEED_SEMIAXES_MM[1]);
    let az = T::cast(SEED_SEMIAXES_MM[2]);
    let three = T::cast(3.0);
    for k in 0..field.dims[2] {
        let zk = field.slice_z(k);
        if (center.z - zk).abs() > three * az {
            continue;
        }
        stamp_slice(
            field,
            k,
            (center.x - three * ax, center.x + three * ax),
            (center.y - three * ay, center.y + three * ay),
            |p| {
                let rx = (p.x - center.x) / ax;
                let ry = (p.y - center.y) / ay;
                let rz = (p.z - center.z) / az;
                let rho2 = rx * rx + ry * ry + rz * rz;
                if rho2 > three * three {
                    T::zero()
                } else {
                    peak * (-rho2 / T::cast(2.0)).exp()
                }
            },
        );
    }
}

/// Rasterize a scene: needles as Gaussian-falloff tubes with a brighter,
/// thicker handle end, distractor seeds as bright ellipsoids, all
/// composited by pointwise max and added to a noisy background.
/// Deterministic per scene seed.
pub fn rasterize<T: Scalar>(gt: &GroundTruth<T>, spec: &SceneSpec<T>) -> VoxelVolume<T> {
    let origin = Point3::new(spec.origin_mm[0], spec.origin_mm[1], spec.origin_mm[2]);
    let mut vol = VoxelVolume::filled(spec.dims, spec.spacing_mm, origin, spec.background_hu);

    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(spec.rng_seed, "raster"));
    if spec.noise_sigma_hu > T::zero() {
        let sigma = spec.noise_sigma_hu.to_f64().unwrap();
        for v in vol.data_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = *v + T::cast(n * sigma);
        }
    }

    let mut field = VoxelVolume::filled(spec.dims, spec.spacing_mm, origin, T::zero());
    for needle in &gt.needles {
        stamp_gaussian_tube(&mut field, needle);
        stamp_gaussian_ball(
            &mut field,
            needle.handle_mm,
            spec.handle_blob_radius_mm,
            spec.handle_peak_factor * needle.peak_hu,
        );
    }

    // distractors stay clear of every needle so they cannot sit on a
    // true path
    let segments: Vec<Segment3<T>> = gt.needles.iter().map(NeedleSpec::segment).collect();
    let (lo, hi) = spec.placement_box();
    let mut placed = 0usize;
    let mut attempts = 0usize;
    while placed < spec.n_distractor_seeds
        && attempts < PLACEMENT_RETRIES * spec.n_distractor_seeds
    {
        attempts += 1;
        let c = uniform_point(&mut rng, lo, hi);
        if segments
            .iter()
            .any(|s| point_segment_distance(c, s) < T::cast(SEED_CLEARANCE_MM))
        {
            continue;
        }
        stamp_ellipsoid(&mut field, c, T::cast(SEED_PEAK_HU));
        placed += 1;
    }

    for (v, f) in vol.data_mut().iter_mut().zip(field.data().iter()) {
        *v = *v + *f;
    }
    vol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circular_diff;
    use approx::assert_relative_eq;

    fn small_spec() -> SceneSpec<f64> {
        SceneSpec {
            n_needles: 4,
            l_prior_mm: 60.0,
            length_jitter_mm: 3.0,
            min_pair_separation_mm: 5.0,
            dims: [96, 96, 16],
            spacing_mm: [1.5, 1.5, 5.0],
            noise_sigma_hu: 15.0,
            rng_seed: 11,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn single_needle_scene_is_valid() {
        let spec = SceneSpec {
            n_needles: 1,
            ..small_spec()
        };
        let gt = generate_scene(&spec).unwrap();
        assert_eq!(gt.needles.len(), 1);
        let n = &gt.needles[0];
        assert!((n.length() - spec.l_prior_mm).abs() <= spec.length_jitter_mm);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = small_spec();
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.needles, b.needles);
        let other = generate_scene(&SceneSpec {
            rng_seed: 12,
            ..spec
        })
        .unwrap();
        assert_ne!(a.needles, other.needles);
    }

    #[test]
    fn pairwise_separation_holds_for_many_needles() {
        let spec = SceneSpec {
            n_needles: 15,
            l_prior_mm: 150.0,
            length_jitter_mm: 5.0,
            dims: [256, 256, 30],
            spacing_mm: [1.0, 1.0, 5.0],
            rng_seed: 3,
            ..SceneSpec::default()
        };
        let gt = generate_scene(&spec).unwrap();
        assert_eq!(gt.needles.len(), 15);
        let mut checked = 0;
        for i in 0..15 {
            for j in (i + 1)..15 {
                let d = segment_min_distance(&gt.needles[i].segment(), &gt.needles[j].segment());
                assert!(d >= spec.min_pair_separation_mm, "pair ({i},{j}) at {d}");
                checked += 1;
            }
        }
        assert_eq!(checked, 105);
    }

    #[test]
    fn infeasible_scene_errors_out() {
        let spec = SceneSpec {
            n_needles: 80,
            l_prior_mm: 60.0,
            dims: [48, 48, 10],
            spacing_mm: [1.5, 1.5, 5.0],
            min_pair_separation_mm: 12.0,
            ..SceneSpec::default()
        };
        assert!(matches!(
            generate_scene(&spec),
            Err(Error::PlacementInfeasible { .. })
        ));
    }

    #[test]
    fn projection_consistency_of_annotations() {
        let gt = generate_scene(&small_spec()).unwrap();
        for (i, n) in gt.needles.iter().enumerate() {
            let tip_ann = gt
                .annotations
                .iter()
                .find(|a| a.needle == i && a.class == KeypointClass::Tip)
                .unwrap();
            let hdl_ann = gt
                .annotations
                .iter()
                .find(|a| a.needle == i && a.class == KeypointClass::Handle)
                .unwrap();
            let expected =
                polar_angle((n.tip_mm.x, n.tip_mm.y), (n.handle_mm.x, n.handle_mm.y)).unwrap();
            assert!(circular_diff(tip_ann.angle, expected) < 1e-12);
            assert!(circular_diff(hdl_ann.angle, expected.opposite()) < 1e-12);
        }
    }

    #[test]
    fn zero_needles_zero_noise_is_constant_background() {
        let spec = SceneSpec {
            n_needles: 1,
            noise_sigma_hu: 0.0,
            ..small_spec()
        };
        let gt = GroundTruth::from_needles(spec.clone(), Vec::new());
        let vol = rasterize(&gt, &spec);
        assert!(vol.data().iter().all(|&v| v == spec.background_hu));
    }

    #[test]
    fn on_axis_voxel_reaches_background_plus_peak() {
        // needle along +x through voxel centers at y=30, z=2 (z_mm=10)
        let spec = SceneSpec {
            noise_sigma_hu: 0.0,
            n_needles: 1,
            dims: [64, 64, 6],
            spacing_mm: [1.0, 1.0, 5.0],
            ..SceneSpec::default()
        };
        let needle = NeedleSpec {
            tip_mm: Point3::new(5.0, 30.0, 10.0),
            handle_mm: Point3::new(55.0, 30.0, 10.0),
            peak_hu: 900.0,
            radius_mm: 1.0,
        };
        let gt = GroundTruth::from_needles(spec.clone(), vec![needle]);
        let vol = rasterize(&gt, &spec);
        // axis midpoint is the voxel (30, 30, 2)
        let v = vol.get(30, 30, 2);
        assert_relative_eq!(v, spec.background_hu + 900.0, epsilon = 1.0);
    }

    #[test]
    fn rasterization_is_monotone_in_peak() {
        let spec = SceneSpec {
            noise_sigma_hu: 10.0,
            n_needles: 2,
            ..small_spec()
        };
        let gt = generate_scene(&spec).unwrap();
        let dim = rasterize(&gt, &spec);
        let mut brighter = gt.clone();
        for n in &mut brighter.needles {
            n.peak_hu *= 1.5;
        }
        let bright = rasterize(&brighter, &spec);
        for (a, b) in dim.data().iter().zip(bright.data().iter()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn on_axis_profile_beats_background_profile() {
        let spec = SceneSpec {
            noise_sigma_hu: 30.0,
            ..small_spec()
        };
        let gt = generate_scene(&spec).unwrap();
        let vol = rasterize(&gt, &spec);
        let step = vol.default_profile_step();
        let mut compared = 0;
        for (idx, n) in gt.needles.iter().enumerate() {
            let on_axis = vol.segment_profile(&n.segment(), step).unwrap();
            let mean_on = on_axis.iter().sum::<f64>() / on_axis.len() as f64;

            // a parallel copy translated 10 mm perpendicular to the axis
            let u = n.orientation().as_vec();
            let mut w = u.cross(Vec3::new(0.0, 0.0, 1.0));
            if w.norm() < 1e-6 {
                w = u.cross(Vec3::new(1.0, 0.0, 0.0));
            }
            let w = w.scale(10.0 / w.norm());
            for offset in [w, w.scale(-1.0)] {
                let shifted =
                    Segment3::new(n.tip_mm.add(offset), n.handle_mm.add(offset)).unwrap();
                if !vol.contains(shifted.a) || !vol.contains(shifted.b) {
                    continue;
                }
                if gt.needles.iter().enumerate().any(|(j, m)| {
                    j != idx && segment_min_distance(&m.segment(), &shifted) < 10.0
                }) {
                    continue;
                }
                let off_axis = vol.segment_profile(&shifted, step).unwrap();
                let mean_off = off_axis.iter().sum::<f64>() / off_axis.len() as f64;
                assert!(
                    mean_on > mean_off,
                    "on-axis {mean_on} should beat background {mean_off}"
                );
                compared += 1;
            }
        }
        assert!(compared > 0, "no comparable background segment found");
    }

    #[test]
    fn distractors_render_bright_and_clear_of_needles() {
        let spec = SceneSpec {
            n_distractor_seeds: 5,
            noise_sigma_hu: 0.0,
            ..small_spec()
        };
        let gt = generate_scene(&spec).unwrap();
        let plain = rasterize(
            &gt,
            &SceneSpec {
                n_distractor_seeds: 0,
                ..spec.clone()
            },
        );
        let seeded = rasterize(&gt, &spec);
        let max_delta = seeded
            .data()
            .iter()
            .zip(plain.data().iter())
            .map(|(s, p)| s - p)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_delta > 1000.0, "seed peak delta {max_delta}");
    }

    #[test]
    fn gt_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.gt.json");
        let gt = generate_scene(&small_spec()).unwrap();
        gt.write_json(&path).unwrap();
        let back: GroundTruth<f64> = GroundTruth::read_json(&path).unwrap();
        assert_eq!(back, gt);

        // write -> read -> write is byte-identical
        let path2 = dir.path().join("again.gt.json");
        back.write_json(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}
