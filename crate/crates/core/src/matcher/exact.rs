//! Exhaustive reference solver for the constrained assignment model.

use super::{MatchConstraints, MatchSolution, MatchedPair, ScoreMatrix, SolveCounters};
use crate::geometry::{segment_min_distance, Point3, Segment3};
use crate::{Error, Result, Scalar};

const ENUMERATION_GUARD: usize = 8;

struct Search<'a, T: Scalar> {
    scores: &'a ScoreMatrix<T>,
    c: &'a MatchConstraints<T>,
    tips: &'a [Point3<T>],
    handles: &'a [Point3<T>],
    /// Recursion runs over the smaller side; when transposed, "rows" are
    /// handles.
    transposed: bool,
    cap: usize,
    chosen: Vec<(usize, usize)>,
    segments: Vec<Segment3<T>>,
    best_total: T,
    best_pairs: Option<Vec<(usize, usize)>>,
}

impl<T: Scalar> Search<'_, T> {
    fn rows(&self) -> usize {
        if self.transposed {
            self.scores.n
        } else {
            self.scores.m
        }
    }

    fn cols(&self) -> usize {
        if self.transposed {
            self.scores.m
        } else {
            self.scores.n
        }
    }

    fn score(&self, row: usize, col: usize) -> T {
        if self.transposed {
            self.scores.get(col, row)
        } else {
            self.scores.get(row, col)
        }
    }

    fn segment(&self, row: usize, col: usize) -> Option<Segment3<T>> {
        let (tip, handle) = if self.transposed {
            (self.tips[col], self.handles[row])
        } else {
            (self.tips[row], self.handles[col])
        };
        Segment3::new(tip, handle).ok()
    }

    /// Pairs in (tip, handle) orientation, sorted for the tie-break.
    fn normalized(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .chosen
            .iter()
            .map(|&(row, col)| {
                if self.transposed {
                    (col, row)
                } else {
                    (row, col)
                }
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    fn consider_current(&mut self, total: T) {
        let candidate = self.normalized();
        let better = match &self.best_pairs {
            None => true,
            Some(best) => total > self.best_total || (total == self.best_total && candidate < *best),
        };
        if better {
            self.best_total = total;
            self.best_pairs = Some(candidate);
        }
    }

    fn recurse(&mut self, row: usize, used_cols: &mut [bool], total: T) {
        if row == self.rows() || self.chosen.len() == self.cap {
            self.consider_current(total);
            return;
        }
        // leave this row unassigned
        self.recurse(row + 1, used_cols, total);

        for col in 0..self.cols() {
            if used_cols[col] {
                continue;
            }
            let s = self.score(row, col);
            if !s.is_finite() {
                continue;
            }
            let Some(seg) = self.segment(row, col) else {
                continue;
            };
            if self
                .segments
                .iter()
                .any(|other| segment_min_distance(other, &seg) < self.c.cross_min_dist_mm)
            {
                continue;
            }
            used_cols[col] = true;
            self.chosen.push((row, col));
            self.segments.push(seg);
            self.recurse(row + 1, used_cols, total + s);
            self.segments.pop();
            self.chosen.pop();
            used_cols[col] = false;
        }
    }
}

/// Enumerate every feasible one-to-one assignment of size up to
/// `min(m, n, n_prior)` and return the score-maximal one; ties break to
/// the lexicographically smallest pair list. Guarded to instances whose
/// smaller side has at most 8 endpoints.
pub fn brute_force_exact<T: Scalar>(
    scores: &ScoreMatrix<T>,
    c: &MatchConstraints<T>,
    tips: &[Point3<T>],
    handles: &[Point3<T>],
) -> Result<MatchSolution<T>> {
    let (m, n) = (scores.m, scores.n);
    assert_eq!(m, tips.len());
    assert_eq!(n, handles.len());
    if m.min(n) > ENUMERATION_GUARD {
        return Err(Error::TooLarge {
            m,
            n,
            max: ENUMERATION_GUARD,
        });
    }

    let mut search = Search {
        scores,
        c,
        tips,
        handles,
        transposed: n < m,
        cap: m.min(n).min(c.n_prior),
        chosen: Vec::new(),
        segments: Vec::new(),
        best_total: T::zero(),
        best_pairs: None,
    };
    let cols = search.cols();
    search.recurse(0, &mut vec![false; cols], T::zero());

    let best = search.best_pairs.unwrap_or_default();
    let pairs = best
        .into_iter()
        .map(|(i, j)| MatchedPair {
            tip_mm: tips[i],
            handle_mm: handles[j],
            score: scores.get(i, j),
            tip_index: Some(i),
            handle_index: Some(j),
            merged: false,
        })
        .collect::<Vec<_>>();
    let counters = SolveCounters {
        greedy_selected: pairs.len(),
        merges: 0,
        dropped: 0,
    };
    Ok(MatchSolution {
        pairs,
        constraints: *c,
        counters,
    })
}
