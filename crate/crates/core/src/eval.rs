//! Boundary scoring: tolerance-radius matching, precision/recall sweeps over
//! thresholds, and the dataset-level (ODS) and per-image (OIS) F-measures.
//!
//! The matching radius in pixels is `max_tolerance × √(H² + W²)`. Ground truth
//! counts as an edge where its value is at least [`GT_EDGE_THRESHOLD`].

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::maps::{BinaryMap, EdgeMap, GroundTruth};

pub const GT_EDGE_THRESHOLD: u8 = 64;
pub const DEFAULT_MAX_TOLERANCE: f64 = 0.0075;
pub const DEFAULT_THRESHOLD_COUNT: usize = 99;
/// Size limit for [`match_oracle`].
pub const ORACLE_LIMIT: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PRPoint {
    pub threshold: f64,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl PRPoint {
    pub fn new(threshold: f64, counts: MatchCounts) -> Self {
        Self {
            threshold,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f: counts.f_measure(),
        }
    }
}

/// `n` evenly spaced thresholds `k / (n + 1)`, `k = 1..=n`.
pub fn uniform_thresholds(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

pub fn tolerance_radius(max_tolerance: f64, height: usize, width: usize) -> f64 {
    max_tolerance * (height as f64).hypot(width as f64)
}

fn check_same(a: &BinaryMap, b: &BinaryMap) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// All `(squared distance, pred index, gt index)` pairs within `radius`,
/// indices being positions in the row-major point lists.
fn candidate_pairs(pred: &BinaryMap, gt: &BinaryMap, radius: f64) -> (Vec<(usize, usize, usize)>, usize, usize) {
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let mut gt_index = vec![usize::MAX; gt.bits.len()];
    let gt_points = gt.points();
    for (k, &(y, x)) in gt_points.iter().enumerate() {
        gt_index[y * gt.width + x] = k;
    }
    let pred_points = pred.points();
    let mut pairs = Vec::new();
    for (pi, &(py, px)) in pred_points.iter().enumerate() {
        for dy in -r..=r {
            let y = py as isize + dy;
            if y < 0 || y >= gt.height as isize {
                continue;
            }
            for dx in -r..=r {
                let x = px as isize + dx;
                if x < 0 || x >= gt.width as isize {
                    continue;
                }
                let d2 = (dy * dy + dx * dx) as usize;
                if d2 as f64 > r2 {
                    continue;
                }
                let gi = gt_index[y as usize * gt.width + x as usize];
                if gi != usize::MAX {
                    pairs.push((d2, pi, gi));
                }
            }
        }
    }
    (pairs, pred_points.len(), gt_points.len())
}

/// Greedy one-to-one matching: candidate pairs within `radius` are taken in
/// ascending distance, ties broken by row-major order of the prediction and
/// then of the ground-truth pixel.
pub fn match_edges(pred: &BinaryMap, gt: &BinaryMap, radius: f64) -> Result<MatchCounts> {
    check_same(pred, gt)?;
    let (mut pairs, np, ng) = candidate_pairs(pred, gt, radius.max(0.0));
    pairs.sort_unstable();
    let mut pred_used = vec![false; np];
    let mut gt_used = vec![false; ng];
    let mut tp = 0;
    for (_, pi, gi) in pairs {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            tp += 1;
        }
    }
    Ok(MatchCounts {
        tp,
        fp: np - tp,
        fn_: ng - tp,
    })
}

/// Maximum-cardinality matching under the same radius constraint, by
/// augmenting paths. Only for small instances (at most [`ORACLE_LIMIT`]
/// edge pixels per side).
pub fn match_oracle(pred: &BinaryMap, gt: &BinaryMap, radius: f64) -> Result<MatchCounts> {
    check_same(pred, gt)?;
    let (np, ng) = (pred.count(), gt.count());
    if np.max(ng) > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge(np.max(ng), ORACLE_LIMIT));
    }
    let (pairs, _, _) = candidate_pairs(pred, gt, radius.max(0.0));
    let mut adj = vec![Vec::new(); np];
    for (_, pi, gi) in pairs {
        adj[pi].push(gi);
    }
    let mut owner: Vec<Option<usize>> = vec![None; ng];

    fn augment(p: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &g in &adj[p] {
            if seen[g] {
                continue;
            }
            seen[g] = true;
            if owner[g].is_none_or(|q| augment(q, adj, seen, owner)) {
                owner[g] = Some(p);
                return true;
            }
        }
        false
    }

    let mut tp = 0;
    for p in 0..np {
        let mut seen = vec![false; ng];
        if augment(p, &adj, &mut seen, &mut owner) {
            tp += 1;
        }
    }
    Ok(MatchCounts {
        tp,
        fp: np - tp,
        fn_: ng - tp,
    })
}

/// One PR point per threshold: the prediction is binarized at `>= t` and
/// matched against the binarized ground truth.
pub fn pr_sweep(pred: &EdgeMap, gt: &GroundTruth, thresholds: &[f64], max_tolerance: f64) -> Result<Vec<PRPoint>> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    let gt_bits = gt.binarize(GT_EDGE_THRESHOLD);
    let radius = tolerance_radius(max_tolerance, gt.height, gt.width);
    thresholds
        .iter()
        .map(|&t| Ok(PRPoint::new(t, match_edges(&pred.binarize(t), &gt_bits, radius)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub ods: f64,
    /// Threshold at which the ODS is attained.
    pub ods_threshold: f64,
    pub ois: f64,
}

/// ODS: best F over thresholds of counts summed across images.
/// OIS: F of counts summed across images, each at its own best threshold.
/// Ties pick the lowest threshold.
pub fn ods_ois(curves: &[Vec<PRPoint>]) -> Result<Summary> {
    let first = curves.first().ok_or_else(|| Error::Empty("no images to evaluate".into()))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::Empty("empty threshold grid".into()));
    }
    for c in curves {
        if c.len() != n || c.iter().zip(first).any(|(a, b)| a.threshold != b.threshold) {
            return Err(Error::Shape("curves do not share a threshold grid".into()));
        }
    }
    let aggregate = aggregate_curve(curves);
    let (best, ods) = argmax_f(&aggregate);
    let mut per_image = MatchCounts::default();
    for c in curves {
        per_image += c[argmax_f(c).0].counts;
    }
    Ok(Summary {
        ods,
        ods_threshold: first[best].threshold,
        ois: per_image.f_measure(),
    })
}

/// Counts summed over images at each threshold.
pub fn aggregate_curve(curves: &[Vec<PRPoint>]) -> Vec<PRPoint> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|k| {
            let mut c = MatchCounts::default();
            for curve in curves {
                c += curve[k].counts;
            }
            PRPoint::new(first[k].threshold, c)
        })
        .collect()
}

fn argmax_f(curve: &[PRPoint]) -> (usize, f64) {
    let mut best = (0, curve[0].f);
    for (k, p) in curve.iter().enumerate().skip(1) {
        if p.f > best.1 {
            best = (k, p.f);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub per_image: Vec<Vec<PRPoint>>,
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub tolerance: f64,
}

impl EvalReport {
    /// First line `ods<TAB>ois<TAB>tolerance` (values), then one
    /// `t<TAB>tp<TAB>fp<TAB>fn<TAB>P<TAB>R<TAB>F` row per threshold with
    /// counts summed over images.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\t{}\t{}\n", self.ods, self.ois, self.tolerance);
        for p in aggregate_curve(&self.per_image) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.threshold, p.counts.tp, p.counts.fp, p.counts.fn_, p.precision, p.recall, p.f
            )
            .unwrap();
        }
        out
    }
}

/// Scores `preds` (already thinned if desired) against `gts`.
pub fn evaluate(preds: &[EdgeMap], gts: &[GroundTruth], thresholds: &[f64], max_tolerance: f64) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth maps",
            preds.len(),
            gts.len()
        )));
    }
    let per_image = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| pr_sweep(p, g, thresholds, max_tolerance))
        .collect::<Result<Vec<_>>>()?;
    let s = ods_ois(&per_image)?;
    Ok(EvalReport {
        per_image,
        ods: s.ods,
        ods_threshold: s.ods_threshold,
        ois: s.ois,
        tolerance: max_tolerance,
    })
}
