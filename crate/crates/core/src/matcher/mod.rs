//! Tip-handle matching: a constrained unbalanced assignment model over
//! detected endpoints, solved by greedy matching and merging, with an
//! exact brute-force solver for validation.
//!
//! The model pairs each detected tip with at most one detected handle
//! (and vice versa), maximizing the total path score, subject to a
//! needle-length gate, a tip/handle angle-consistency gate, a pairwise
//! non-crossing constraint, and the a-priori needle count.

mod exact;
mod greedy;
mod score;

pub use exact::brute_force_exact;
pub use greedy::{greedy_match, merge_duplicates, solve_gmm};
pub use score::{build_score_matrix, score_pair};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Segment3};
use crate::{Result, Scalar};

/// Tolerances and priors of the matching model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct MatchConstraints<T: Scalar> {
    /// Pre-known needle length, mm.
    pub l_prior_mm: T,
    /// Tolerance for the needle length difference, mm.
    pub eps_l_mm: T,
    /// Tolerance for the tip/handle angle difference, radians.
    pub eps_a_rad: T,
    /// Minimum separation between two selected needle paths, mm.
    pub cross_min_dist_mm: T,
    /// A-priori number of implanted needles.
    pub n_prior: usize,
    /// Two paths whose tips and handles are both within this radius are
    /// duplicates, mm.
    pub merge_radius_mm: T,
    /// Floor on the score denominator, HU.
    pub sigma_min_hu: T,
    /// Ball radius around a tip for merge weights, mm.
    pub tip_mask_radius_mm: T,
    /// Ball radius around a handle for merge weights, mm.
    pub handle_mask_radius_mm: T,
    /// Optional extra gate: both endpoint angles must also agree with the
    /// pair's projected azimuth.
    pub orientation_gate: bool,
}

impl<T: Scalar> Default for MatchConstraints<T> {
    fn default() -> Self {
        Self {
            l_prior_mm: T::cast(150.0),
            eps_l_mm: T::cast(10.0),
            eps_a_rad: T::cast(10.0_f64.to_radians()),
            cross_min_dist_mm: T::one(),
            n_prior: 15,
            merge_radius_mm: T::cast(2.5),
            sigma_min_hu: T::one(),
            tip_mask_radius_mm: T::cast(3.0),
            handle_mask_radius_mm: T::cast(4.0),
            orientation_gate: false,
        }
    }
}

/// Pairing scores: rows are tips, columns are handles; entries are finite
/// or -∞ (the pair violates a gate).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    pub m: usize,
    pub n: usize,
    data: Vec<T>,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn new_masked(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![T::neg_infinity(); m * n],
        }
    }

    #[inline]
    pub fn get(&self, tip: usize, handle: usize) -> T {
        self.data[tip * self.n + handle]
    }

    #[inline]
    pub fn set(&mut self, tip: usize, handle: usize, score: T) {
        self.data[tip * self.n + handle] = score;
    }

    /// True when every pairing is gated out.
    pub fn all_infeasible(&self) -> bool {
        self.data.iter().all(|v| *v == T::neg_infinity())
    }

    /// Finite entries as `(tip, handle, score)`.
    pub fn finite_entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.m).flat_map(move |i| {
            (0..self.n).filter_map(move |j| {
                let s = self.get(i, j);
                s.is_finite().then_some((i, j, s))
            })
        })
    }
}

/// One selected tip-handle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair<T> {
    pub tip_mm: Point3<T>,
    pub handle_mm: Point3<T>,
    pub score: T,
    /// Index into the detected tips, absent after merging.
    pub tip_index: Option<usize>,
    /// Index into the detected handles, absent after merging.
    pub handle_index: Option<usize>,
    pub merged: bool,
}

impl<T: Scalar> MatchedPair<T> {
    pub fn segment(&self) -> Segment3<T> {
        Segment3::new(self.tip_mm, self.handle_mm).expect("pair endpoints are distinct")
    }
}

/// Counters describing how a solve proceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SolveCounters {
    /// Pairs selected by the greedy pass.
    pub greedy_selected: usize,
    /// Duplicate merges performed.
    pub merges: usize,
    /// Lowest-score paths dropped by the over-budget fallback.
    pub dropped: usize,
}

/// The solver output: selected pairs plus solve metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSolution<T: Scalar> {
    pub pairs: Vec<MatchedPair<T>>,
    pub constraints: MatchConstraints<T>,
    pub counters: SolveCounters,
}

impl<T: Scalar> MatchSolution<T> {
    pub fn total_score(&self) -> T {
        self.pairs
            .iter()
            .fold(T::zero(), |acc, p| acc + p.score)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PairRecord<T> {
    tip_mm: [T; 3],
    handle_mm: [T; 3],
    score: T,
    merged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tip_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    handle_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct MatchSolutionFile<T: Scalar> {
    pairs: Vec<PairRecord<T>>,
    constraints: MatchConstraints<T>,
    counters: SolveCounters,
}

impl<T: Scalar> MatchSolution<T> {
    /// Write the `.match.json` representation. Wall time is reported by
    /// callers, not stored, so identical solves produce identical bytes.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = MatchSolutionFile {
            pairs: self
                .pairs
                .iter()
                .map(|p| PairRecord {
                    tip_mm: [p.tip_mm.x, p.tip_mm.y, p.tip_mm.z],
                    handle_mm: [p.handle_mm.x, p.handle_mm.y, p.handle_mm.z],
                    score: p.score,
                    merged: p.merged,
                    tip_index: p.tip_index,
                    handle_index: p.handle_index,
                })
                .collect(),
            constraints: self.constraints,
            counters: self.counters,
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file: MatchSolutionFile<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Self {
            pairs: file
                .pairs
                .into_iter()
                .map(|r| MatchedPair {
                    tip_mm: Point3::new(r.tip_mm[0], r.tip_mm[1], r.tip_mm[2]),
                    handle_mm: Point3::new(r.handle_mm[0], r.handle_mm[1], r.handle_mm[2]),
                    score: r.score,
                    merged: r.merged,
                    tip_index: r.tip_index,
                    handle_index: r.handle_index,
                })
                .collect(),
            constraints: file.constraints,
            counters: file.counters,
        })
    }
}
