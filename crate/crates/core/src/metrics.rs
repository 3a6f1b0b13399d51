//! CLEAR-MOT accuracy and distance-thresholded localization precision on
//! the ground plane.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::Location;

/// An identity-stamped location at one frame; used for both ground truth and
/// tracker output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub frame: u64,
    pub id: u64,
    pub location: Location,
}

impl LabeledPoint {
    pub fn new(frame: u64, id: u64, x: f64, z: f64) -> Self {
        Self { frame, id, location: Location::new(x, z) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    /// Ground-truth/prediction pairs farther apart than this never match.
    pub dist_threshold_m: f64,
    pub loc_thresholds_m: Vec<f64>,
    /// Records farther than this from the rig center are dropped from both
    /// sides before scoring. Infinite disables the filter.
    pub eval_radius_m: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { dist_threshold_m: 1.0, loc_thresholds_m: vec![0.5, 1.0, 2.0], eval_radius_m: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocPrecision {
    pub threshold_m: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mota: f64,
    pub mt_fraction: f64,
    pub ml_fraction: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
    pub matches: u64,
    pub total_gt: u64,
    pub gt_identities: u64,
    pub loc_precision: Vec<LocPrecision>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<14}{:>10}\n", "metric", "value"));
        s.push_str(&format!("{:<14}{:>10.4}\n", "MOTA", self.mota));
        s.push_str(&format!("{:<14}{:>9.1}%\n", "MT", 100.0 * self.mt_fraction));
        s.push_str(&format!("{:<14}{:>9.1}%\n", "ML", 100.0 * self.ml_fraction));
        s.push_str(&format!("{:<14}{:>10}\n", "FP", self.fp));
        s.push_str(&format!("{:<14}{:>10}\n", "FN", self.fn_));
        s.push_str(&format!("{:<14}{:>10}\n", "IDSW", self.idsw));
        s.push_str(&format!("{:<14}{:>10}\n", "GT points", self.total_gt));
        s.push_str(&format!("{:<14}{:>10}\n", "GT ids", self.gt_identities));
        for p in &self.loc_precision {
            let label = format!("loc < {} m", p.threshold_m);
            s.push_str(&format!("{:<14}{:>9.1}%\n", label, 100.0 * p.fraction));
        }
        s
    }
}

/// Correspondences within one frame, as indices into the inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Minimum-total-distance matching restricted to pairs within the gate.
///
/// Gated-out pairs get a cost larger than any sum of admissible distances,
/// so the solver first maximizes the number of admissible pairs and then
/// minimizes their summed distance.
pub fn match_frame(gt: &[LabeledPoint], pred: &[LabeledPoint], dist_threshold_m: f64) -> Result<FrameMatch> {
    let forbidden = (dist_threshold_m.max(1.0)) * (gt.len().max(pred.len()) as f64 + 1.0) * 4.0;
    let costs = CostMatrix::from_fn(gt.len(), pred.len(), |i, j| {
        let d = gt[i].location.distance(&pred[j].location);
        if d <= dist_threshold_m {
            d
        } else {
            forbidden
        }
    });
    let assignment = solve_assignment(&costs)?;
    let mut out = FrameMatch::default();
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    for (i, j) in assignment.matches {
        if costs.get(i, j) <= dist_threshold_m {
            out.pairs.push((i, j));
            gt_used[i] = true;
            pred_used[j] = true;
        }
    }
    out.unmatched_gt = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    out.unmatched_pred = (0..pred.len()).filter(|&j| !pred_used[j]).collect();
    Ok(out)
}

fn by_frame(points: &[LabeledPoint], radius: f64) -> BTreeMap<u64, Vec<LabeledPoint>> {
    let mut frames: BTreeMap<u64, Vec<LabeledPoint>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.location.range() <= radius) {
        frames.entry(p.frame).or_default().push(*p);
    }
    frames
}

fn check_unique(points: &[LabeledPoint]) -> Result<()> {
    let mut seen = HashSet::with_capacity(points.len());
    for p in points {
        if !seen.insert((p.frame, p.id)) {
            return Err(Error::DuplicateRecord { frame: p.frame, id: p.id });
        }
    }
    Ok(())
}

/// Scores a predicted sequence against ground truth.
pub fn evaluate(gt: &[LabeledPoint], pred: &[LabeledPoint], params: &EvalParams) -> Result<EvalReport> {
    check_unique(gt)?;
    check_unique(pred)?;
    let gt_frames = by_frame(gt, params.eval_radius_m);
    let mut pred_frames = by_frame(pred, params.eval_radius_m);
    let total_gt: u64 = gt_frames.values().map(|v| v.len() as u64).sum();
    if total_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }

    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut idsw = 0u64;
    let mut matches = 0u64;
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    // gt id -> (frames present, frames matched)
    let mut coverage: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    let mut within = vec![0u64; params.loc_thresholds_m.len()];

    for (frame, gts) in &gt_frames {
        let preds = pred_frames.remove(frame).unwrap_or_default();
        let m = match_frame(gts, &preds, params.dist_threshold_m)?;
        fp += m.unmatched_pred.len() as u64;
        fn_ += m.unmatched_gt.len() as u64;
        matches += m.pairs.len() as u64;
        for g in gts {
            coverage.entry(g.id).or_default().0 += 1;
        }
        for &(i, j) in &m.pairs {
            let (gid, pid) = (gts[i].id, preds[j].id);
            coverage.entry(gid).or_default().1 += 1;
            if let Some(prev) = last_match.insert(gid, pid) {
                if prev != pid {
                    idsw += 1;
                }
            }
        }
        for g in gts {
            let nearest =
                preds.iter().map(|p| g.location.distance(&p.location)).fold(f64::INFINITY, f64::min);
            for (count, &t) in within.iter_mut().zip(&params.loc_thresholds_m) {
                if nearest <= t {
                    *count += 1;
                }
            }
        }
    }
    // predictions on frames without any ground truth are all false positives
    fp += pred_frames.values().map(|v| v.len() as u64).sum::<u64>();

    let ids = coverage.len() as f64;
    let ratio = |(present, hit): &(u64, u64)| *hit as f64 / *present as f64;
    let mt = coverage.values().filter(|c| ratio(c) >= 0.8).count() as f64 / ids;
    let ml = coverage.values().filter(|c| ratio(c) <= 0.2).count() as f64 / ids;

    Ok(EvalReport {
        mota: 1.0 - (fp + fn_ + idsw) as f64 / total_gt as f64,
        mt_fraction: mt,
        ml_fraction: ml,
        fp,
        fn_,
        idsw,
        matches,
        total_gt,
        gt_identities: coverage.len() as u64,
        loc_precision: params
            .loc_thresholds_m
            .iter()
            .zip(&within)
            .map(|(&threshold_m, &n)| LocPrecision { threshold_m, fraction: n as f64 / total_gt as f64 })
            .collect(),
    })
}
