//! A simulated detector: perturbs ground-truth endpoints in place of a
//! trained network, so the matching stage can be exercised in isolation
//! with controlled noise, misses, false positives, and duplicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Detection2D, DetectionSet3D, Endpoint3D, KeypointClass};
use crate::geometry::{Point3, PolarAngle};
use crate::phantom::GroundTruth;
use crate::Scalar;

/// Perturbation model for the simulated detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct NoiseSpec<T: Scalar> {
    /// Per-axis Gaussian position jitter, mm.
    pub sigma_pos_mm: T,
    /// Gaussian angle jitter, radians.
    pub sigma_angle_rad: T,
    /// Per-endpoint false-positive injection probability.
    pub p_fp: f64,
    /// Per-endpoint miss probability.
    pub p_fn: f64,
    /// Number of duplicated needles to inject.
    pub dup_count: usize,
    /// Displacement magnitude of each duplicate, mm. A duplicate is the
    /// whole needle translated laterally: in-plane, perpendicular to the
    /// needle azimuth, with a random sign. Duplicate detections come from
    /// per-slice jitter to either side of the path, so they differ in
    /// (x, y) across the path while their z stays on the slice grid; the
    /// exact magnitude keeps duplicate-vs-original distances controlled.
    pub dup_offset_mm: T,
}

impl<T: Scalar> Default for NoiseSpec<T> {
    fn default() -> Self {
        Self {
            sigma_pos_mm: T::zero(),
            sigma_angle_rad: T::zero(),
            p_fp: 0.0,
            p_fn: 0.0,
            dup_count: 0,
            dup_offset_mm: T::one(),
        }
    }
}

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng, sigma: T) -> T {
    if sigma > T::zero() {
        let n: f64 = StandardNormal.sample(rng);
        T::cast(n) * sigma
    } else {
        T::zero()
    }
}

struct Bounds<T> {
    lo: Point3<T>,
    hi: Point3<T>,
}

impl<T: Scalar> Bounds<T> {
    fn clamp(&self, p: Point3<T>) -> Point3<T> {
        Point3::new(
            num_traits::clamp(p.x, self.lo.x, self.hi.x),
            num_traits::clamp(p.y, self.lo.y, self.hi.y),
            num_traits::clamp(p.z, self.lo.z, self.hi.z),
        )
    }

    fn random_inside(&self, rng: &mut ChaCha8Rng) -> Point3<T> {
        let mut u = |a: T, b: T| {
            T::cast(rng.gen_range(a.to_f64().unwrap()..=b.to_f64().unwrap()))
        };
        let x = u(self.lo.x, self.hi.x);
        let y = u(self.lo.y, self.hi.y);
        let z = u(self.lo.z, self.hi.z);
        Point3::new(x, y, z)
    }
}

/// Simulate a detection pass over a known scene.
///
/// Every ground-truth tip and handle is independently dropped with
/// probability `p_fn`, otherwise jittered; false endpoints are injected
/// with per-needle rate `p_fp`; `dup_count` whole-needle duplicates are
/// appended, each translated by `dup_offset_mm` in a random direction.
/// Deterministic for a fixed seed.
pub fn simulate_detections<T: Scalar>(
    gt: &GroundTruth<T>,
    noise: &NoiseSpec<T>,
    seed: u64,
) -> DetectionSet3D<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = gt.scene.volume_bounds();
    let bounds = Bounds { lo, hi };
    let mut out = DetectionSet3D::default();

    let emit = |rng: &mut ChaCha8Rng,
                    out: &mut DetectionSet3D<T>,
                    class: KeypointClass,
                    pos: Point3<T>,
                    angle: PolarAngle<T>,
                    confidence: T| {
        let jittered = Point3::new(
            pos.x + gaussian(rng, noise.sigma_pos_mm),
            pos.y + gaussian(rng, noise.sigma_pos_mm),
            pos.z + gaussian(rng, noise.sigma_pos_mm),
        );
        let endpoint = Endpoint3D::new(
            bounds.clamp(jittered),
            PolarAngle::new(angle.radians() + gaussian(rng, noise.sigma_angle_rad)),
            confidence,
        );
        match class {
            KeypointClass::Tip => out.tips.push(endpoint),
            KeypointClass::Handle => out.handles.push(endpoint),
        }
    };

    for needle in &gt.needles {
        if !(rng.gen::<f64>() < noise.p_fn) {
            emit(
                &mut rng,
                &mut out,
                KeypointClass::Tip,
                needle.tip_mm,
                needle.tip_angle(),
                T::one(),
            );
        }
        if !(rng.gen::<f64>() < noise.p_fn) {
            emit(
                &mut rng,
                &mut out,
                KeypointClass::Handle,
                needle.handle_mm,
                needle.handle_angle(),
                T::one(),
            );
        }
    }

    for _ in &gt.needles {
        for class in KeypointClass::ALL {
            if rng.gen::<f64>() < noise.p_fp {
                let pos = bounds.random_inside(&mut rng);
                let angle = PolarAngle::new(T::cast(rng.gen_range(0.0..std::f64::consts::TAU)));
                let endpoint = Endpoint3D::new(pos, angle, T::cast(0.5));
                match class {
                    KeypointClass::Tip => out.tips.push(endpoint),
                    KeypointClass::Handle => out.handles.push(endpoint),
                }
            }
        }
    }

    if noise.dup_count > 0 && !gt.needles.is_empty() {
        for d in 0..noise.dup_count {
            let needle = &gt.needles[d % gt.needles.len()];
            let lateral = needle.tip_angle().radians().to_f64().unwrap()
                + std::f64::consts::FRAC_PI_2;
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let dir = [
                T::cast(sign * lateral.cos()) * noise.dup_offset_mm,
                T::cast(sign * lateral.sin()) * noise.dup_offset_mm,
            ];
            let shift =
                |p: Point3<T>| bounds.clamp(Point3::new(p.x + dir[0], p.y + dir[1], p.z));
            out.tips.push(Endpoint3D::new(
                shift(needle.tip_mm),
                needle.tip_angle(),
                T::cast(0.8),
            ));
            out.handles.push(Endpoint3D::new(
                shift(needle.handle_mm),
                needle.handle_angle(),
                T::cast(0.8),
            ));
        }
    }

    out
}
