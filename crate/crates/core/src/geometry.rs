//! 3D/2D primitives for segments, distances, and angles.
//!
//! Everything here is an immutable value and every operation is pure, so
//! the whole module is trivially thread-safe.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// A point in world coordinates, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// A displacement between two points, millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn sub(self, other: Self) -> Vec3<T> {
        Vec3 {
            x: self.x - other.x,
            y: self.y - other.y,
            z: self.z - other.z,
        }
    }

    pub fn add(self, v: Vec3<T>) -> Self {
        Self {
            x: self.x + v.x,
            y: self.y + v.y,
            z: self.z + v.z,
        }
    }

    pub fn distance(self, other: Self) -> T {
        self.sub(other).norm()
    }

    /// Linear interpolation `self + t * (other - self)`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self.add(other.sub(self).scale(t))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self {
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }
}

/// A line segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment3<T> {
    pub a: Point3<T>,
    pub b: Point3<T>,
}

impl<T: Scalar> Segment3<T> {
    /// Build a segment; the endpoints must not coincide.
    pub fn new(a: Point3<T>, b: Point3<T>) -> Result<Self> {
        if a.distance(b) <= T::zero() {
            return Err(Error::DegenerateDirection);
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> T {
        self.a.distance(self.b)
    }

    /// Point at parameter `t` in [0, 1] along the segment.
    pub fn point_at(&self, t: T) -> Point3<T> {
        self.a.lerp(self.b, t)
    }

    /// Unit direction from `a` to `b`.
    pub fn direction(&self) -> UnitVec3<T> {
        UnitVec3::from_vec(self.b.sub(self.a)).expect("segment endpoints are distinct")
    }
}

/// An in-slice direction measured from the +X axis, wrapped to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolarAngle<T>(T);

impl<T: Scalar> PolarAngle<T> {
    /// Wrap an arbitrary angle in radians into `[0, 2π)`.
    pub fn new(theta: T) -> Self {
        let tau = T::TAU();
        let mut wrapped = theta % tau;
        if wrapped < T::zero() {
            wrapped = wrapped + tau;
        }
        // `theta % tau` can round up to exactly tau for tiny negative inputs
        if wrapped >= tau {
            wrapped = wrapped - tau;
        }
        Self(wrapped)
    }

    pub fn radians(self) -> T {
        self.0
    }

    /// The same direction rotated by half a turn.
    pub fn opposite(self) -> Self {
        Self::new(self.0 + T::PI())
    }
}

/// A 3D direction of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3<T> {
    pub ux: T,
    pub uy: T,
    pub uz: T,
}

impl<T: Scalar> UnitVec3<T> {
    /// Normalize a vector; fails on (near-)zero input.
    pub fn from_vec(v: Vec3<T>) -> Result<Self> {
        let n = v.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::DegenerateDirection);
        }
        Ok(Self {
            ux: v.x / n,
            uy: v.y / n,
            uz: v.z / n,
        })
    }

    pub fn as_vec(self) -> Vec3<T> {
        Vec3::new(self.ux, self.uy, self.uz)
    }

    pub fn dot(self, other: Self) -> T {
        self.as_vec().dot(other.as_vec())
    }

    pub fn negate(self) -> Self {
        Self {
            ux: -self.ux,
            uy: -self.uy,
            uz: -self.uz,
        }
    }
}

/// Minimum Euclidean distance between two segments.
///
/// Clamped closest-point parametric algorithm; near-parallel configurations
/// fall back to clamped endpoint projections, so the function is total.
pub fn segment_min_distance<T: Scalar>(a: &Segment3<T>, b: &Segment3<T>) -> T {
    let d1 = a.b.sub(a.a);
    let d2 = b.b.sub(b.a);
    let r = a.a.sub(b.a);
    let aa = d1.dot(d1);
    let ee = d2.dot(d2);
    let f = d2.dot(r);
    let c = d1.dot(r);
    let bb = d1.dot(d2);
    let denom = aa * ee - bb * bb;

    // s parametrizes a, t parametrizes b, both clamped to [0, 1]
    let mut s = if denom > T::zero() {
        num_traits::clamp((bb * f - c * ee) / denom, T::zero(), T::one())
    } else {
        T::zero()
    };
    let mut t = (bb * s + f) / ee;

    if t < T::zero() {
        t = T::zero();
        s = num_traits::clamp(-c / aa, T::zero(), T::one());
    } else if t > T::one() {
        t = T::one();
        s = num_traits::clamp((bb - c) / aa, T::zero(), T::one());
    }

    a.point_at(s).distance(b.point_at(t))
}

/// Distance from a point to a segment.
pub fn point_segment_distance<T: Scalar>(p: Point3<T>, seg: &Segment3<T>) -> T {
    let d = seg.b.sub(seg.a);
    let t = num_traits::clamp(p.sub(seg.a).dot(d) / d.dot(d), T::zero(), T::one());
    p.distance(seg.point_at(t))
}

/// Polar angle of the in-plane vector `to - from`, wrapped to `[0, 2π)`.
pub fn polar_angle<T: Scalar>(from: (T, T), to: (T, T)) -> Result<PolarAngle<T>> {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    if dx == T::zero() && dy == T::zero() {
        return Err(Error::DegenerateDirection);
    }
    Ok(PolarAngle::new(dy.atan2(dx)))
}

/// Unsigned circular difference between two polar angles, in `[0, π]`.
pub fn circular_diff<T: Scalar>(t1: PolarAngle<T>, t2: PolarAngle<T>) -> T {
    let d = (t1.radians() - t2.radians()).abs();
    d.min(T::TAU() - d)
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// The dot product is clamped to `[-1, 1]` before `acos`, so rounding can
/// never produce a NaN.
pub fn angle_between<T: Scalar>(u: UnitVec3<T>, v: UnitVec3<T>) -> T {
    num_traits::clamp(u.dot(v), -T::one(), T::one()).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    fn seg(a: Point3<f64>, b: Point3<f64>) -> Segment3<f64> {
        Segment3::new(a, b).unwrap()
    }

    /// Independent oracle: densely sample both segments and take the
    /// minimum pairwise distance. With step h on each side the sampled
    /// minimum overestimates the true distance by at most h (the distance
    /// function is 1-Lipschitz in each endpoint).
    fn sampled_min_distance(a: &Segment3<f64>, b: &Segment3<f64>, step_mm: f64) -> f64 {
        let na = (a.length() / step_mm).ceil() as usize + 1;
        let nb = (b.length() / step_mm).ceil() as usize + 1;
        let mut best = f64::INFINITY;
        for i in 0..na {
            let pa = a.point_at(i as f64 / (na - 1).max(1) as f64);
            for j in 0..nb {
                let pb = b.point_at(j as f64 / (nb - 1).max(1) as f64);
                best = best.min(pa.distance(pb));
            }
        }
        best
    }

    #[test]
    fn parallel_offset_segments() {
        let a = seg(p(0.0, 0.0, 0.0), p(10.0, 0.0, 0.0));
        let b = seg(p(0.0, 3.0, 0.0), p(10.0, 3.0, 0.0));
        assert_relative_eq!(segment_min_distance(&a, &b), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn segment_against_itself_is_zero() {
        let a = seg(p(1.0, 2.0, 3.0), p(4.0, 5.0, 6.0));
        assert_eq!(segment_min_distance(&a, &a), 0.0);
    }

    #[test]
    fn skew_segments_match_sampling_oracle() {
        let a = seg(p(0.0, 0.0, 0.0), p(10.0, 0.0, 0.0));
        let b = seg(p(5.0, 2.0, -1.0), p(5.0, 2.0, 1.0));
        let oracle = sampled_min_distance(&a, &b, 1e-3);
        assert_relative_eq!(oracle, 2.0, epsilon = 1e-9);
        assert_relative_eq!(segment_min_distance(&a, &b), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn intersecting_segments_are_zero() {
        let a = seg(p(-1.0, 0.0, 0.0), p(1.0, 0.0, 0.0));
        let b = seg(p(0.0, -1.0, 0.0), p(0.0, 1.0, 0.0));
        assert_relative_eq!(segment_min_distance(&a, &b), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn polar_angle_axes_and_quadrants() {
        assert_relative_eq!(
            polar_angle((0.0, 0.0), (1.0, 0.0)).unwrap().radians(),
            0.0
        );
        assert_relative_eq!(
            polar_angle((0.0, 0.0), (0.0, 1.0)).unwrap().radians(),
            std::f64::consts::FRAC_PI_2
        );
        assert_relative_eq!(
            polar_angle((0.0, 0.0), (-1.0, -1.0)).unwrap().radians(),
            5.0 * std::f64::consts::FRAC_PI_4
        );
    }

    #[test]
    fn polar_angle_rejects_coincident_points() {
        assert!(matches!(
            polar_angle((1.0, 1.0), (1.0, 1.0)),
            Err(Error::DegenerateDirection)
        ));
    }

    #[test]
    fn circular_diff_wraps() {
        let tau = std::f64::consts::TAU;
        let a = PolarAngle::new(0.1);
        let b = PolarAngle::new(tau - 0.1);
        assert_relative_eq!(circular_diff(a, b), 0.2, epsilon = 1e-12);
        assert_eq!(circular_diff(a, a), 0.0);
        let c = PolarAngle::new(std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(
            circular_diff(c, c.opposite()),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn angle_between_clamps_rounding() {
        let u = UnitVec3::from_vec(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(angle_between(u, u), 0.0);
        let v = UnitVec3::from_vec(Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(angle_between(u, v), std::f64::consts::FRAC_PI_2);
        // force a dot product a hair above 1
        let w = UnitVec3 {
            ux: 1.0 + 5e-17,
            uy: 0.0,
            uz: 0.0,
        };
        let got = angle_between(u, w);
        assert!(got.is_finite());
        assert_eq!(got, 0.0);
    }

    fn arb_point() -> impl Strategy<Value = Point3<f64>> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| p(x, y, z))
    }

    fn arb_segment() -> impl Strategy<Value = Segment3<f64>> {
        (arb_point(), arb_point())
            .prop_filter("distinct endpoints", |(a, b)| a.distance(*b) > 1e-3)
            .prop_map(|(a, b)| seg(a, b))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_segment(), b in arb_segment()) {
            let ab = segment_min_distance(&a, &b);
            let ba = segment_min_distance(&b, &a);
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab.abs()));
        }

        #[test]
        fn distance_bounded_by_sampling_oracle(a in arb_segment(), b in arb_segment()) {
            // 256 samples per side: the oracle overestimates by at most `gap`
            let step = (a.length().max(b.length()) / 256.0).max(1e-6);
            let oracle = sampled_min_distance(&a, &b, step);
            let exact = segment_min_distance(&a, &b);
            prop_assert!(exact <= oracle + 1e-6, "exact {} > oracle {}", exact, oracle);
            prop_assert!(exact >= oracle - step, "exact {} too far below oracle {}", exact, oracle);
        }

        #[test]
        fn distance_not_above_endpoint_pairs(a in arb_segment(), b in arb_segment()) {
            let d = segment_min_distance(&a, &b);
            for pa in [a.a, a.b] {
                for pb in [b.a, b.b] {
                    prop_assert!(d <= pa.distance(pb) + 1e-9);
                }
            }
        }

        #[test]
        fn circular_diff_never_exceeds_pi(t1 in -10.0..10.0f64, t2 in -10.0..10.0f64) {
            let d = circular_diff(PolarAngle::new(t1), PolarAngle::new(t2));
            prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&d));
        }

        #[test]
        fn polar_angle_rotation_shifts_result(
            (fx, fy) in (-10.0..10.0f64, -10.0..10.0f64),
            (tx, ty) in (-10.0..10.0f64, -10.0..10.0f64),
            phi in 0.0..std::f64::consts::TAU,
        ) {
            prop_assume!((fx - tx).abs() > 1e-6 || (fy - ty).abs() > 1e-6);
            let rot = |x: f64, y: f64| (x * phi.cos() - y * phi.sin(), x * phi.sin() + y * phi.cos());
            let base = polar_angle((fx, fy), (tx, ty)).unwrap();
            let rotated = polar_angle(rot(fx, fy), rot(tx, ty)).unwrap();
            let expected = PolarAngle::new(base.radians() + phi);
            prop_assert!(circular_diff(rotated, expected) < 1e-9);
        }
    }
}
