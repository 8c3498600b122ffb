//! The pairing score and the gated score matrix.

use super::{MatchConstraints, ScoreMatrix};
use crate::detection::DetectionSet3D;
use crate::geometry::{circular_diff, polar_angle, Point3, Segment3};
use crate::volume::VoxelVolume;
use crate::{Result, Scalar};

/// Mean-over-deviation score of the HU profile along the tip→handle
/// segment: μ/σ with a population σ floored at `sigma_min` so constant
/// profiles stay finite.
pub fn score_pair<T: Scalar>(
    vol: &VoxelVolume<T>,
    tip: Point3<T>,
    handle: Point3<T>,
    step_mm: T,
    sigma_min: T,
) -> Result<T> {
    let seg = Segment3::new(tip, handle)?;
    let samples = vol.segment_profile(&seg, step_mm)?;
    let count = T::cast(samples.len());
    let mean = samples.iter().fold(T::zero(), |a, &v| a + v) / count;
    let var = samples
        .iter()
        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
        / count;
    let sigma = var.sqrt().max(sigma_min);
    Ok(mean / sigma)
}

/// Build the gated score matrix over all tip-handle pairs.
///
/// An entry is -∞ when the pair length differs from the prior by at
/// least `eps_l`, when the endpoint angles are inconsistent (a tip and
/// its true handle point in opposite directions, so the gate compares
/// the tip angle against the handle angle plus π), or when the pair
/// cannot be scored at all (degenerate or outside the volume).
/// With `orientation_gate` set, both angles must additionally agree with
/// the pair's projected azimuth within `eps_a`.
pub fn build_score_matrix<T: Scalar>(
    vol: &VoxelVolume<T>,
    dets: &DetectionSet3D<T>,
    c: &MatchConstraints<T>,
) -> ScoreMatrix<T> {
    let step = vol.default_profile_step();
    let mut s = ScoreMatrix::new_masked(dets.tips.len(), dets.handles.len());
    for (i, tip) in dets.tips.iter().enumerate() {
        for (j, handle) in dets.handles.iter().enumerate() {
            let length = tip.pos.distance(handle.pos);
            if (length - c.l_prior_mm).abs() >= c.eps_l_mm {
                continue;
            }
            if circular_diff(tip.angle, handle.angle.opposite()) >= c.eps_a_rad {
                continue;
            }
            if c.orientation_gate {
                let azimuth = polar_angle(
                    (tip.pos.x, tip.pos.y),
                    (handle.pos.x, handle.pos.y),
                );
                match azimuth {
                    Ok(az) => {
                        if circular_diff(tip.angle, az) >= c.eps_a_rad
                            || circular_diff(handle.angle, az.opposite()) >= c.eps_a_rad
                        {
                            continue;
                        }
                    }
                    Err(_) => continue,
                }
            }
            if let Ok(score) = score_pair(vol, tip.pos, handle.pos, step, c.sigma_min_hu) {
                s.set(i, j, score);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Endpoint3D;
    use crate::geometry::PolarAngle;
    use approx::assert_relative_eq;

    fn flat_vol(value: f64) -> VoxelVolume<f64> {
        VoxelVolume::filled(
            [40, 40, 8],
            [1.0, 1.0, 5.0],
            Point3::new(0.0, 0.0, 0.0),
            value,
        )
    }

    #[test]
    fn constant_region_hits_the_sigma_floor() {
        let vol = flat_vol(800.0);
        let s = score_pair(
            &vol,
            Point3::new(2.0, 2.0, 5.0),
            Point3::new(22.0, 2.0, 5.0),
            0.5,
            1.0,
        )
        .unwrap();
        assert_relative_eq!(s, 800.0);
    }

    #[test]
    fn hand_computed_population_statistics() {
        // voxel values 100,100,200,200 along x; a 3 mm segment sampled at
        // step 1 gives exactly those four samples
        let mut vol = flat_vol(0.0);
        for (i, v) in [100.0, 100.0, 200.0, 200.0].iter().enumerate() {
            vol.set(i, 5, 1, *v);
        }
        let s = score_pair(
            &vol,
            Point3::new(0.0, 5.0, 5.0),
            Point3::new(3.0, 5.0, 5.0),
            1.0,
            1.0,
        )
        .unwrap();
        // mean 150, population sigma 50
        assert_relative_eq!(s, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gates_mask_bad_lengths_and_angles() {
        let vol = flat_vol(100.0);
        let c = MatchConstraints {
            l_prior_mm: 20.0,
            eps_l_mm: 4.0,
            n_prior: 2,
            ..MatchConstraints::default()
        };
        let tip = |x: f64, angle: f64| Endpoint3D::new(
            Point3::new(x, 10.0, 10.0),
            PolarAngle::new(angle),
            1.0,
        );
        let dets = DetectionSet3D {
            tips: vec![tip(2.0, 0.0), tip(4.0, 0.0)],
            handles: vec![
                // consistent: 20 mm away along +x, pointing back
                Endpoint3D::new(
                    Point3::new(22.0, 10.0, 10.0),
                    PolarAngle::new(std::f64::consts::PI),
                    1.0,
                ),
                // violates the length gate for tip 0: 28 mm = prior + 2*eps
                Endpoint3D::new(
                    Point3::new(30.0, 10.0, 10.0),
                    PolarAngle::new(std::f64::consts::PI),
                    1.0,
                ),
                // consistent length, inconsistent angle
                Endpoint3D::new(
                    Point3::new(24.0, 10.0, 10.0),
                    PolarAngle::new(std::f64::consts::FRAC_PI_2),
                    1.0,
                ),
            ],
        };
        let s = build_score_matrix(&vol, &dets, &c);
        assert!(s.get(0, 0).is_finite());
        assert_eq!(s.get(0, 1), f64::NEG_INFINITY);
        assert_eq!(s.get(0, 2), f64::NEG_INFINITY);
        // tip 1 -> handle 0 is 18 mm: inside the gate, finite
        assert!(s.get(1, 0).is_finite());
        assert!(!s.all_infeasible());
    }

    #[test]
    fn exact_prior_length_passes_the_gate() {
        let vol = flat_vol(50.0);
        let c = MatchConstraints {
            l_prior_mm: 20.0,
            n_prior: 1,
            ..MatchConstraints::default()
        };
        let dets = DetectionSet3D {
            tips: vec![Endpoint3D::new(
                Point3::new(5.0, 5.0, 10.0),
                PolarAngle::new(0.0),
                1.0,
            )],
            handles: vec![Endpoint3D::new(
                Point3::new(25.0, 5.0, 10.0),
                PolarAngle::new(std::f64::consts::PI),
                1.0,
            )],
        };
        let s = build_score_matrix(&vol, &dets, &c);
        assert!(s.get(0, 0).is_finite());
    }
}
