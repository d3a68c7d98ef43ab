//! EER, FA at a fixed FR, and DET points.
//!
//! Directed queries are the positive class. For a threshold `t`, queries with
//! `score >= t` are accepted:
//!
//! ```text
//! FA(t) = #{not-directed, score >= t} / #not-directed
//! FR(t) = #{directed, score < t} / #directed
//! ```
//!
//! The DET curve has one point per distinct score plus a final point at
//! `t = +inf` (everything rejected). Metrics interpolate linearly between
//! adjacent points.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{CoreError, Result};

/// Scores paired with directedness labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredSet {
    pub entries: Vec<(f64, bool)>,
}

impl ScoredSet {
    pub fn new(entries: Vec<(f64, bool)>) -> Self {
        ScoredSet { entries }
    }

    pub fn from_parts(scores: &[f64], directed: &[bool]) -> Self {
        ScoredSet {
            entries: scores.iter().copied().zip(directed.iter().copied()).collect(),
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.1).count();
        (pos, self.entries.len() - pos)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fr: f64,
    pub fa: f64,
}

/// DET points in percent, ordered by increasing threshold.
pub fn det_points(set: &ScoredSet) -> Result<Vec<DetPoint>> {
    let (pos, neg) = set.counts();
    if pos == 0 || neg == 0 {
        return Err(CoreError::Metric(format!(
            "need both classes, got {pos} directed and {neg} not-directed"
        )));
    }
    if let Some((s, _)) = set.entries.iter().find(|e| !e.0.is_finite()) {
        return Err(CoreError::NonFinite(format!("score {s}")));
    }
    let mut sorted = set.entries.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points = Vec::new();
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        points.push(DetPoint {
            threshold: t,
            fr: 100.0 * pos_below as f64 / pos as f64,
            fa: 100.0 * (neg - neg_below) as f64 / neg as f64,
        });
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        fr: 100.0,
        fa: 0.0,
    });
    Ok(points)
}

/// Equal error rate in percent.
pub fn compute_eer(set: &ScoredSet) -> Result<f64> {
    Ok(eer_from_points(&det_points(set)?))
}

pub fn eer_from_points(points: &[DetPoint]) -> f64 {
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (da, db) = (a.fa - a.fr, b.fa - b.fr);
        if da == 0.0 {
            return a.fa;
        }
        if da > 0.0 && db <= 0.0 {
            return a.fa + (b.fa - a.fa) * da / (da - db);
        }
    }
    points.last().map_or(0.0, |p| p.fa)
}

/// FA in percent at `fr_target` percent FR, and the corresponding threshold.
pub fn compute_fa_at_fr(set: &ScoredSet, fr_target: f64) -> Result<(f64, f64)> {
    if !(0.0..=100.0).contains(&fr_target) {
        return Err(CoreError::Metric(format!("FR target {fr_target}% outside [0, 100]")));
    }
    Ok(fa_at_fr_from_points(&det_points(set)?, fr_target))
}

pub fn fa_at_fr_from_points(points: &[DetPoint], fr_target: f64) -> (f64, f64) {
    let j = points.iter().rposition(|p| p.fr <= fr_target).unwrap_or(0);
    let a = points[j];
    if a.fr == fr_target || j + 1 == points.len() {
        return (a.fa, a.threshold);
    }
    let b = points[j + 1];
    let alpha = (fr_target - a.fr) / (b.fr - a.fr);
    let threshold = if b.threshold.is_finite() {
        a.threshold + alpha * (b.threshold - a.threshold)
    } else {
        a.threshold
    };
    (a.fa + alpha * (b.fa - a.fa), threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub name: String,
    pub eer: f64,
    pub fa_at_fr10: f64,
    pub threshold_at_fr10: f64,
    pub n_directed: usize,
    pub n_not_directed: usize,
    #[serde(skip)]
    pub det_points: Vec<DetPoint>,
}

impl EvalReport {
    pub fn evaluate(name: &str, set: &ScoredSet) -> Result<Self> {
        let det_points = det_points(set)?;
        let (pos, neg) = set.counts();
        let (fa, threshold) = fa_at_fr_from_points(&det_points, 10.0);
        Ok(EvalReport {
            name: name.to_string(),
            eer: eer_from_points(&det_points),
            fa_at_fr10: fa,
            threshold_at_fr10: threshold,
            n_directed: pos,
            n_not_directed: neg,
            det_points,
        })
    }

    /// `EER x.xx, FA@10%FR y.yy`
    pub fn summary_line(&self) -> String {
        format!("EER {:.2}, FA@10%FR {:.2}", self.eer, self.fa_at_fr10)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}", self.name);
        let _ = writeln!(s, "directed: {}", self.n_directed);
        let _ = writeln!(s, "not-directed: {}", self.n_not_directed);
        let _ = writeln!(s, "EER [%]: {:.2}", self.eer);
        let _ = writeln!(s, "FA@10%FR [%]: {:.2}", self.fa_at_fr10);
        let _ = writeln!(s, "threshold@10%FR: {:.6}", self.threshold_at_fr10);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Columns `threshold,FR%,FA%`.
    pub fn det_csv(&self) -> String {
        let mut s = String::from("threshold,FR%,FA%\n");
        for p in &self.det_points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.fr, p.fa);
        }
        s
    }
}
