//! 2D and 3D evaluation against ground truth.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::Detection2D;
use crate::geometry::{angle_between, circular_diff, Point3};
use crate::matcher::MatchSolution;
use crate::phantom::GroundTruth;
use crate::{Result, Scalar};

/// A detection counts as 2D-correct within this center distance, mm.
pub const TOL_POS_2D_MM: f64 = 2.0;
/// ... and within this angle difference, degrees.
pub const TOL_ANGLE_2D_DEG: f64 = 5.0;
/// A needle counts as 3D-correct when both endpoints are within this
/// distance of their ground truth, mm (half the 5 mm slice thickness).
pub const TOL_POS_3D_MM: f64 = 2.5;

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// 2D detection quality report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eval2DReport {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Mean absolute center distance over true positives, mm.
    pub mae_pos2d_mm: f64,
    /// Mean absolute angle difference over true positives, degrees.
    pub mae_agl2d_deg: f64,
}

/// Greedy one-to-one matching of predictions to ground truth by ascending
/// center distance, within the same class and slice. A matched pair is a
/// true positive iff its distance is within 2 mm and its circular angle
/// difference within 5°; the MAEs average over true positives only.
pub fn eval_2d<T: Scalar>(pred: &[Detection2D<T>], gt: &[Detection2D<T>]) -> Eval2DReport {
    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gt.iter().enumerate() {
            if p.class != g.class || p.slice != g.slice {
                continue;
            }
            let dx = (p.center_mm[0] - g.center_mm[0]).to_f64().unwrap();
            let dy = (p.center_mm[1] - g.center_mm[1]).to_f64().unwrap();
            let dist = (dx * dx + dy * dy).sqrt();
            let dang = circular_diff(p.angle, g.angle).to_f64().unwrap();
            candidates.push((dist, dang, pi, gi));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));

    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut tp = 0usize;
    let mut sum_dist = 0.0;
    let mut sum_ang = 0.0;
    for (dist, dang, pi, gi) in candidates {
        if pred_used[pi] || gt_used[gi] {
            continue;
        }
        pred_used[pi] = true;
        gt_used[gi] = true;
        if dist <= TOL_POS_2D_MM && dang.to_degrees() <= TOL_ANGLE_2D_DEG {
            tp += 1;
            sum_dist += dist;
            sum_ang += dang.to_degrees();
        }
    }

    let fp = pred.len() - tp;
    let fn_count = gt.len() - tp;
    let precision = if pred.is_empty() {
        0.0
    } else {
        tp as f64 / pred.len() as f64
    };
    let recall = if gt.is_empty() {
        0.0
    } else {
        tp as f64 / gt.len() as f64
    };
    Eval2DReport {
        tp,
        fp,
        r#fn: fn_count,
        recall,
        precision,
        f1: f1_of(precision, recall),
        mae_pos2d_mm: if tp > 0 { sum_dist / tp as f64 } else { 0.0 },
        mae_agl2d_deg: if tp > 0 { sum_ang / tp as f64 } else { 0.0 },
    }
}

/// 3D localization quality report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eval3DReport {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Mean absolute 3D endpoint errors over true positives, mm.
    pub mae_tip3d_mm: f64,
    pub mae_hdl3d_mm: f64,
    /// Per-axis errors divided by the spacing on that axis, voxel units.
    pub mae_tip_relx: f64,
    pub mae_tip_rely: f64,
    pub mae_tip_relz: f64,
    pub mae_hdl_relx: f64,
    pub mae_hdl_rely: f64,
    pub mae_hdl_relz: f64,
    /// Mean needle-path angle error over true positives, radians.
    pub mae_agl3d_rad: f64,
    /// Per detected needle: matched ground-truth index (if this needle is
    /// a true positive) plus its endpoint errors.
    pub per_needle: Vec<NeedleDiagnostic>,
}

/// Per-needle evaluation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleDiagnostic {
    pub pred_index: usize,
    pub gt_index: Option<usize>,
    pub tip_error_mm: Option<f64>,
    pub handle_error_mm: Option<f64>,
    pub angle_error_rad: Option<f64>,
    pub true_positive: bool,
}

/// Evaluate a matching solution against ground truth.
///
/// Detected needles are assigned one-to-one to ground-truth needles
/// greedily by ascending combined endpoint distance. An assigned needle
/// is a true positive iff both its tip and handle are within 2.5 mm of
/// the assigned ground truth. The endpoint, per-axis relative, and path
/// angle errors average over true positives. Orientations use tip→handle
/// unit vectors on both sides.
pub fn eval_3d<T: Scalar>(
    pred: &MatchSolution<T>,
    gt: &GroundTruth<T>,
    spacing_mm: [T; 3],
) -> Eval3DReport {
    let to64 = |p: Point3<T>| -> [f64; 3] {
        [
            p.x.to_f64().unwrap(),
            p.y.to_f64().unwrap(),
            p.z.to_f64().unwrap(),
        ]
    };
    let dist3 = |a: [f64; 3], b: [f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in pred.pairs.iter().enumerate() {
        for (gi, g) in gt.needles.iter().enumerate() {
            let td = dist3(to64(p.tip_mm), to64(g.tip_mm));
            let hd = dist3(to64(p.handle_mm), to64(g.handle_mm));
            candidates.push((td + hd, pi, gi));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_match: Vec<Option<usize>> = vec![None; pred.pairs.len()];
    let mut gt_used = vec![false; gt.needles.len()];
    for (_, pi, gi) in candidates {
        if pred_match[pi].is_some() || gt_used[gi] {
            continue;
        }
        pred_match[pi] = Some(gi);
        gt_used[gi] = true;
    }

    let s = [
        spacing_mm[0].to_f64().unwrap(),
        spacing_mm[1].to_f64().unwrap(),
        spacing_mm[2].to_f64().unwrap(),
    ];
    let mut per_needle = Vec::with_capacity(pred.pairs.len());
    let mut tp = 0usize;
    let mut sums = [0.0f64; 9]; // tip3d, hdl3d, trx, try, trz, hrx, hry, hrz, agl
    for (pi, p) in pred.pairs.iter().enumerate() {
        let mut diag = NeedleDiagnostic {
            pred_index: pi,
            gt_index: pred_match[pi],
            tip_error_mm: None,
            handle_error_mm: None,
            angle_error_rad: None,
            true_positive: false,
        };
        if let Some(gi) = pred_match[pi] {
            let g = &gt.needles[gi];
            let (pt, ph) = (to64(p.tip_mm), to64(p.handle_mm));
            let (gtip, ghdl) = (to64(g.tip_mm), to64(g.handle_mm));
            let td = dist3(pt, gtip);
            let hd = dist3(ph, ghdl);
            let ang = angle_between(p.segment().direction(), g.orientation())
                .to_f64()
                .unwrap();
            diag.tip_error_mm = Some(td);
            diag.handle_error_mm = Some(hd);
            diag.angle_error_rad = Some(ang);
            if td <= TOL_POS_3D_MM && hd <= TOL_POS_3D_MM {
                diag.true_positive = true;
                tp += 1;
                sums[0] += td;
                sums[1] += hd;
                for ax in 0..3 {
                    sums[2 + ax] += (pt[ax] - gtip[ax]).abs() / s[ax];
                    sums[5 + ax] += (ph[ax] - ghdl[ax]).abs() / s[ax];
                }
                sums[8] += ang;
            }
        }
        per_needle.push(diag);
    }

    let fp = pred.pairs.len() - tp;
    let fn_count = gt.needles.len() - tp;
    let precision = if pred.pairs.is_empty() {
        0.0
    } else {
        tp as f64 / pred.pairs.len() as f64
    };
    let recall = if gt.needles.is_empty() {
        0.0
    } else {
        tp as f64 / gt.needles.len() as f64
    };
    let over_tp = |x: f64| if tp > 0 { x / tp as f64 } else { 0.0 };

    Eval3DReport {
        tp,
        fp,
        r#fn: fn_count,
        recall,
        precision,
        f1: f1_of(precision, recall),
        mae_tip3d_mm: over_tp(sums[0]),
        mae_hdl3d_mm: over_tp(sums[1]),
        mae_tip_relx: over_tp(sums[2]),
        mae_tip_rely: over_tp(sums[3]),
        mae_tip_relz: over_tp(sums[4]),
        mae_hdl_relx: over_tp(sums[5]),
        mae_hdl_rely: over_tp(sums[6]),
        mae_hdl_relz: over_tp(sums[7]),
        mae_agl3d_rad: over_tp(sums[8]),
        per_needle,
    }
}

/// Both reports plus run identification, written as `{name}.report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_2d: Option<Eval2DReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_3d: Option<Eval3DReport>,
}

impl EvalReportFile {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Flat CSV export of the scalar metrics, one row per report.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("report,tp,fp,fn,recall,precision,f1,extra1,extra2\n");
        if let Some(r) = &self.eval_2d {
            out.push_str(&format!(
                "eval2d,{},{},{},{},{},{},{},{}\n",
                r.tp, r.fp, r.r#fn, r.recall, r.precision, r.f1, r.mae_pos2d_mm, r.mae_agl2d_deg
            ));
        }
        if let Some(r) = &self.eval_3d {
            out.push_str(&format!(
                "eval3d,{},{},{},{},{},{},{},{}\n",
                r.tp, r.fp, r.r#fn, r.recall, r.precision, r.f1, r.mae_tip3d_mm, r.mae_hdl3d_mm
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }
}
