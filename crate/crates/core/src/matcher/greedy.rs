//! Greedy matching and duplicate merging.

use super::{
    build_score_matrix, score_pair, MatchConstraints, MatchSolution, MatchedPair, ScoreMatrix,
    SolveCounters,
};
use crate::detection::DetectionSet3D;
use crate::geometry::{segment_min_distance, Point3, Segment3};
use crate::volume::VoxelVolume;
use crate::{Error, Result, Scalar};

/// Iteratively select the highest-scoring feasible pair.
///
/// At each step the globally highest finite entry whose segment keeps at
/// least `cross_min_dist` from every already selected segment is chosen,
/// and its row and column are retired. Ties are broken by the lower
/// (tip, handle) index pair. Stops when no finite admissible entry
/// remains, so the result has at most `min(m, n)` pairs.
pub fn greedy_match<T: Scalar>(
    s: &ScoreMatrix<T>,
    c: &MatchConstraints<T>,
    tips: &[Point3<T>],
    handles: &[Point3<T>],
) -> Vec<(usize, usize, T)> {
    assert_eq!(s.m, tips.len());
    assert_eq!(s.n, handles.len());
    let mut candidates: Vec<(usize, usize, T)> = s.finite_entries().collect();
    // descending score, then lexicographic (tip, handle)
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite scores compare")
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    let mut tip_used = vec![false; s.m];
    let mut handle_used = vec![false; s.n];
    let mut selected: Vec<(usize, usize, T)> = Vec::new();
    let mut segments: Vec<Segment3<T>> = Vec::new();

    for (i, j, score) in candidates {
        if tip_used[i] || handle_used[j] {
            continue;
        }
        let Ok(seg) = Segment3::new(tips[i], handles[j]) else {
            continue;
        };
        if segments
            .iter()
            .any(|other| segment_min_distance(other, &seg) < c.cross_min_dist_mm)
        {
            continue;
        }
        tip_used[i] = true;
        handle_used[j] = true;
        segments.push(seg);
        selected.push((i, j, score));
    }
    selected
}

/// Mean of the strictly positive samples in a voxel ball around `center`;
/// zero when nothing positive is inside.
fn ball_mean_positive<T: Scalar>(vol: &VoxelVolume<T>, center: Point3<T>, radius: T) -> T {
    let g = vol.grid_coord(center);
    let mut sum = T::zero();
    let mut count = 0usize;
    let mut lo = [0isize; 3];
    let mut hi = [0isize; 3];
    for ax in 0..3 {
        let r = radius / vol.spacing_mm[ax];
        lo[ax] = (g[ax] - r).ceil().to_isize().unwrap_or(0);
        hi[ax] = (g[ax] + r).floor().to_isize().unwrap_or(-1);
    }
    for k in lo[2].max(0)..=hi[2].min(vol.dims[2] as isize - 1) {
        for j in lo[1].max(0)..=hi[1].min(vol.dims[1] as isize - 1) {
            for i in lo[0].max(0)..=hi[0].min(vol.dims[0] as isize - 1) {
                let p = vol.voxel_center(i as usize, j as usize, k as usize);
                if p.distance(center) > radius {
                    continue;
                }
                let v = vol.get(i as usize, j as usize, k as usize);
                if v > T::zero() {
                    sum = sum + v;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        T::zero()
    } else {
        sum / T::cast(count)
    }
}

fn weighted_midpoint<T: Scalar>(a: Point3<T>, wa: T, b: Point3<T>, wb: T) -> Point3<T> {
    let total = wa + wb;
    let (wa, wb, total) = if total > T::zero() {
        (wa, wb, total)
    } else {
        (T::one(), T::one(), T::cast(2.0))
    };
    Point3::new(
        (a.x * wa + b.x * wb) / total,
        (a.y * wa + b.y * wb) / total,
        (a.z * wa + b.z * wb) / total,
    )
}

/// One merge pass plus repetition; returns the surviving pairs and
/// whether merging stalled while still over budget.
fn merge_loop<T: Scalar>(
    mut pairs: Vec<MatchedPair<T>>,
    vol: &VoxelVolume<T>,
    c: &MatchConstraints<T>,
    merges: &mut usize,
) -> (Vec<MatchedPair<T>>, bool) {
    let step = vol.default_profile_step();
    while pairs.len() > c.n_prior {
        // scan candidate pairs in ascending score order: low scores are
        // the likeliest duplicates
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| {
            pairs[a]
                .score
                .partial_cmp(&pairs[b].score)
                .expect("finite scores compare")
        });

        let mut found: Option<(usize, usize, MatchedPair<T>)> = None;
        'scan: for (oa, &a) in order.iter().enumerate() {
            for &b in order.iter().skip(oa + 1) {
                let tip_close = pairs[a].tip_mm.distance(pairs[b].tip_mm) <= c.merge_radius_mm;
                let handle_close =
                    pairs[a].handle_mm.distance(pairs[b].handle_mm) <= c.merge_radius_mm;
                if !(tip_close && handle_close) {
                    continue;
                }
                let (pa, pb) = (pairs[a], pairs[b]);
                let tip = weighted_midpoint(
                    pa.tip_mm,
                    ball_mean_positive(vol, pa.tip_mm, c.tip_mask_radius_mm),
                    pb.tip_mm,
                    ball_mean_positive(vol, pb.tip_mm, c.tip_mask_radius_mm),
                );
                let handle = weighted_midpoint(
                    pa.handle_mm,
                    ball_mean_positive(vol, pa.handle_mm, c.handle_mask_radius_mm),
                    pb.handle_mm,
                    ball_mean_positive(vol, pb.handle_mm, c.handle_mask_radius_mm),
                );
                let Ok(merged_seg) = Segment3::new(tip, handle) else {
                    continue;
                };
                // the merged path must keep the non-crossing invariant
                // against every surviving path
                let crosses = pairs.iter().enumerate().any(|(idx, other)| {
                    idx != a
                        && idx != b
                        && segment_min_distance(&other.segment(), &merged_seg)
                            < c.cross_min_dist_mm
                });
                if crosses {
                    continue;
                }
                let score = score_pair(vol, tip, handle, step, c.sigma_min_hu)
                    .unwrap_or(T::neg_infinity());
                found = Some((
                    a,
                    b,
                    MatchedPair {
                        tip_mm: tip,
                        handle_mm: handle,
                        score,
                        tip_index: None,
                        handle_index: None,
                        merged: true,
                    },
                ));
                break 'scan;
            }
        }
        let Some((a, b, merged)) = found else {
            return (pairs, true);
        };

        let (first, second) = (a.min(b), a.max(b));
        pairs.remove(second);
        pairs.remove(first);
        pairs.push(merged);
        *merges += 1;
    }
    (pairs, false)
}

/// Merge duplicate paths until the needle count reaches the prior.
///
/// Candidates are scanned in ascending-score order; two paths merge when
/// their tips are within the merge radius and their handles are too. The
/// merged endpoints are the ball-HU-weighted averages of the originals
/// and the merged path is rescored. Errors with `NoDuplicatesFound` when
/// still over budget but nothing qualifies.
pub fn merge_duplicates<T: Scalar>(
    pairs: &[MatchedPair<T>],
    vol: &VoxelVolume<T>,
    c: &MatchConstraints<T>,
) -> Result<Vec<MatchedPair<T>>> {
    let mut merges = 0usize;
    let (merged, stalled) = merge_loop(pairs.to_vec(), vol, c, &mut merges);
    if stalled {
        return Err(Error::NoDuplicatesFound {
            over: merged.len() - c.n_prior,
        });
    }
    Ok(merged)
}

/// The full greedy matching and merging solve.
///
/// Greedy selection first; a result within the needle-count prior is
/// accepted as-is. Otherwise duplicates are merged until the count
/// reaches the prior; if merging stalls, the lowest-scoring paths are
/// dropped.
pub fn solve_gmm<T: Scalar>(
    vol: &VoxelVolume<T>,
    dets: &DetectionSet3D<T>,
    c: &MatchConstraints<T>,
) -> MatchSolution<T> {
    let mut counters = SolveCounters::default();
    if dets.tips.is_empty() || dets.handles.is_empty() {
        return MatchSolution {
            pairs: Vec::new(),
            constraints: *c,
            counters,
        };
    }

    let s = build_score_matrix(vol, dets, c);
    let tips: Vec<Point3<T>> = dets.tips.iter().map(|e| e.pos).collect();
    let handles: Vec<Point3<T>> = dets.handles.iter().map(|e| e.pos).collect();
    let selected = greedy_match(&s, c, &tips, &handles);
    counters.greedy_selected = selected.len();

    let mut pairs: Vec<MatchedPair<T>> = selected
        .into_iter()
        .map(|(i, j, score)| MatchedPair {
            tip_mm: tips[i],
            handle_mm: handles[j],
            score,
            tip_index: Some(i),
            handle_index: Some(j),
            merged: false,
        })
        .collect();

    if pairs.len() > c.n_prior {
        let (merged, stalled) = merge_loop(pairs, vol, c, &mut counters.merges);
        pairs = merged;
        if stalled && pairs.len() > c.n_prior {
            // no duplicates explain the surplus: keep the best-scoring
            // paths only
            pairs.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores compare"));
            counters.dropped = pairs.len() - c.n_prior;
            pairs.truncate(c.n_prior);
        }
    }

    MatchSolution {
        pairs,
        constraints: *c,
        counters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Endpoint3D;
    use crate::geometry::PolarAngle;
    use approx::assert_relative_eq;

    fn no_geometry_conflicts() -> (Vec<Point3<f64>>, Vec<Point3<f64>>) {
        // well-separated horizontal segments
        let tips = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 50.0, 0.0)];
        let handles = vec![Point3::new(20.0, 0.0, 0.0), Point3::new(20.0, 50.0, 0.0)];
        (tips, handles)
    }

    #[test]
    fn diagonal_dominant_matrix_selects_the_diagonal() {
        let (tips, handles) = no_geometry_conflicts();
        let mut s = ScoreMatrix::new_masked(2, 2);
        s.set(0, 0, 5.0);
        s.set(0, 1, 1.0);
        s.set(1, 0, 1.0);
        s.set(1, 1, 4.0);
        let c = MatchConstraints::default();
        let picked = greedy_match(&s, &c, &tips, &handles);
        assert_eq!(
            picked.iter().map(|&(i, j, _)| (i, j)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 1)]
        );
        let total: f64 = picked.iter().map(|p| p.2).sum();
        assert_relative_eq!(total, 9.0);
    }

    #[test]
    fn single_finite_entry_is_the_only_pair() {
        let (tips, handles) = no_geometry_conflicts();
        let mut s = ScoreMatrix::new_masked(2, 2);
        s.set(1, 0, 2.5);
        let picked = greedy_match(&s, &MatchConstraints::default(), &tips, &handles);
        assert_eq!(picked.len(), 1);
        assert_eq!((picked[0].0, picked[0].1), (1, 0));
    }

    #[test]
    fn crossing_candidates_are_rejected() {
        // two candidate paths that intersect: only the better one survives
        let tips = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 10.0, 0.0)];
        let handles = vec![Point3::new(20.0, 10.0, 0.0), Point3::new(20.0, 0.0, 0.0)];
        let mut s = ScoreMatrix::new_masked(2, 2);
        s.set(0, 0, 5.0); // crosses (1, 1)
        s.set(1, 1, 4.0);
        let c = MatchConstraints {
            cross_min_dist_mm: 1.0,
            ..MatchConstraints::default()
        };
        let picked = greedy_match(&s, &c, &tips, &handles);
        assert_eq!(picked.len(), 1);
        assert_eq!((picked[0].0, picked[0].1), (0, 0));
    }

    #[test]
    fn equal_scores_break_ties_lexicographically() {
        let (tips, handles) = no_geometry_conflicts();
        let mut s = ScoreMatrix::new_masked(2, 2);
        s.set(0, 0, 3.0);
        s.set(0, 1, 3.0);
        s.set(1, 0, 3.0);
        s.set(1, 1, 3.0);
        let picked = greedy_match(&s, &MatchConstraints::default(), &tips, &handles);
        assert_eq!(
            picked.iter().map(|&(i, j, _)| (i, j)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 1)]
        );
    }

    fn uniform_vol(value: f64) -> VoxelVolume<f64> {
        VoxelVolume::filled(
            [60, 60, 8],
            [1.0, 1.0, 5.0],
            Point3::new(0.0, 0.0, 0.0),
            value,
        )
    }

    fn pair(tip: Point3<f64>, handle: Point3<f64>, score: f64) -> MatchedPair<f64> {
        MatchedPair {
            tip_mm: tip,
            handle_mm: handle,
            score,
            tip_index: Some(0),
            handle_index: Some(0),
            merged: false,
        }
    }

    #[test]
    fn identical_paths_merge_in_place() {
        let vol = uniform_vol(100.0);
        let tip = Point3::new(10.0, 10.0, 10.0);
        let handle = Point3::new(40.0, 10.0, 10.0);
        let pairs = vec![pair(tip, handle, 2.0), pair(tip, handle, 1.5)];
        let c = MatchConstraints {
            n_prior: 1,
            l_prior_mm: 30.0,
            ..MatchConstraints::default()
        };
        let merged = merge_duplicates(&pairs, &vol, &c).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].tip_mm, tip);
        assert_eq!(merged[0].handle_mm, handle);
        assert!(merged[0].merged);
    }

    #[test]
    fn merge_weights_follow_ball_hu_means() {
        // each tip's 3 mm mask ball contains exactly one positive voxel:
        // 600 HU near tip A, 200 HU near tip B, everything else 0. The
        // merged tip must land at (600 A + 200 B) / 800 = A + 0.25 (B-A).
        let mut vol = uniform_vol(0.0);
        vol.set(8, 20, 2, 600.0); // 2 mm from A, 4 mm from B
        vol.set(14, 20, 2, 200.0); // 2 mm from B, 4 mm from A
        let tip_a = Point3::new(10.0, 20.0, 10.0);
        let tip_b = Point3::new(12.0, 20.0, 10.0);
        let handle = Point3::new(40.0, 20.0, 10.0);
        let c = MatchConstraints {
            n_prior: 1,
            l_prior_mm: 30.0,
            tip_mask_radius_mm: 3.0,
            handle_mask_radius_mm: 3.0,
            ..MatchConstraints::default()
        };
        let pairs = vec![pair(tip_a, handle, 2.0), pair(tip_b, handle, 1.0)];
        let merged = merge_duplicates(&pairs, &vol, &c).unwrap();
        assert_eq!(merged.len(), 1);
        assert_relative_eq!(merged[0].tip_mm.x, 10.5, epsilon = 1e-9);
        assert_relative_eq!(merged[0].tip_mm.y, 20.0, epsilon = 1e-9);
        // equal (empty) handle balls fall back to the plain midpoint of
        // two identical handles
        assert_relative_eq!(merged[0].handle_mm.x, 40.0, epsilon = 1e-9);
    }

    #[test]
    fn weighted_average_hand_value() {
        // direct check of the 600/200 weighting: p = (600 a + 200 b)/800
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(2.0, 0.0, 0.0);
        let p = weighted_midpoint(a, 600.0, b, 200.0);
        assert_relative_eq!(p.x, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn paths_three_mm_apart_do_not_merge() {
        let vol = uniform_vol(100.0);
        let pairs = vec![
            pair(
                Point3::new(10.0, 10.0, 10.0),
                Point3::new(40.0, 10.0, 10.0),
                2.0,
            ),
            pair(
                Point3::new(10.0, 13.0, 10.0),
                Point3::new(40.0, 13.0, 10.0),
                1.0,
            ),
        ];
        let c = MatchConstraints {
            n_prior: 1,
            l_prior_mm: 30.0,
            ..MatchConstraints::default()
        };
        let err = merge_duplicates(&pairs, &vol, &c);
        assert!(matches!(err, Err(Error::NoDuplicatesFound { over: 1 })));
    }

    #[test]
    fn merged_endpoint_stays_between_the_originals() {
        let vol = uniform_vol(100.0);
        let tip_a = Point3::new(10.0, 10.0, 10.0);
        let tip_b = Point3::new(11.5, 11.0, 10.0);
        let handle_a = Point3::new(40.0, 10.0, 10.0);
        let handle_b = Point3::new(41.0, 11.5, 10.0);
        let pairs = vec![pair(tip_a, handle_a, 2.0), pair(tip_b, handle_b, 1.0)];
        let c = MatchConstraints {
            n_prior: 1,
            l_prior_mm: 30.0,
            ..MatchConstraints::default()
        };
        let merged = merge_duplicates(&pairs, &vol, &c).unwrap();
        let t = merged[0].tip_mm;
        // convex combination: inside the axis-aligned box of the inputs
        assert!(t.x >= tip_a.x && t.x <= tip_b.x);
        assert!(t.y >= tip_a.y && t.y <= tip_b.y);
        assert_eq!(t.z, 10.0);
    }
}
