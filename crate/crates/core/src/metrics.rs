//! IoU-based similarity between detections on an attacked clip and the
//! ground truth of candidate source clips.
//!
//! * frame level: mean over predicted boxes of the best IoU against any
//!   ground-truth box in that frame;
//! * video level: mean of the frame scores over frames `0..T`;
//! * attribution: the candidate with the highest video score.
//!
//! An empty prediction set or an empty ground-truth set scores 0 for the
//! frame. Frames are aligned by index.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{BoundingBox, FrameDetections, VideoLabels};

/// Intersection over union with continuous coordinates (no +1 pixel
/// convention). Two zero-area boxes give 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right.min(b.right) - a.left.max(b.left)).max(0.0);
    let h = (a.bottom.min(b.bottom) - a.top.max(b.top)).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    /// Geometry only.
    #[default]
    Spatial,
    /// A prediction only matches ground truth with the same class label.
    ClassAware,
}

pub fn frame_level_similarity(preds: &[BoundingBox], gts: &[BoundingBox]) -> f64 {
    frame_level_similarity_with(preds, gts, MatchMode::Spatial)
}

pub fn frame_level_similarity_with(preds: &[BoundingBox], gts: &[BoundingBox], mode: MatchMode) -> f64 {
    if preds.is_empty() || gts.is_empty() {
        return 0.0;
    }
    let total: f64 = preds
        .iter()
        .map(|p| {
            gts.iter()
                .filter(|g| mode == MatchMode::Spatial || g.class_label == p.class_label)
                .map(|g| iou(p, g))
                .fold(0.0, f64::max)
        })
        .sum();
    total / preds.len() as f64
}

fn index_detections(dets: &[FrameDetections]) -> BTreeMap<u32, Vec<&BoundingBox>> {
    let mut by_frame: BTreeMap<u32, Vec<&BoundingBox>> = BTreeMap::new();
    for d in dets {
        by_frame.entry(d.frame_index).or_default().extend(&d.boxes);
    }
    by_frame
}

fn per_frame_scores(
    by_frame: &BTreeMap<u32, Vec<&BoundingBox>>,
    candidate: &VideoLabels,
    frame_count: u32,
    mode: MatchMode,
) -> Vec<f64> {
    (0..frame_count)
        .map(|t| {
            let preds: Vec<BoundingBox> = by_frame
                .get(&t)
                .map(|v| v.iter().map(|b| (*b).clone()).collect())
                .unwrap_or_default();
            frame_level_similarity_with(&preds, candidate.boxes(t), mode)
        })
        .collect()
}

fn check_frame_count(frame_count: u32) -> Result<()> {
    if frame_count == 0 {
        return Err(Error::invalid("frame count T must be at least 1"));
    }
    Ok(())
}

/// Mean frame score over frames `0..frame_count`; frames missing from
/// either side score 0.
pub fn video_level_similarity(attacked: &[FrameDetections], candidate: &VideoLabels, frame_count: u32) -> Result<f64> {
    video_level_similarity_with(attacked, candidate, frame_count, MatchMode::Spatial)
}

pub fn video_level_similarity_with(
    attacked: &[FrameDetections],
    candidate: &VideoLabels,
    frame_count: u32,
    mode: MatchMode,
) -> Result<f64> {
    check_frame_count(frame_count)?;
    let scores = per_frame_scores(&index_detections(attacked), candidate, frame_count, mode);
    Ok(scores.iter().sum::<f64>() / f64::from(frame_count))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub attacked_video_id: String,
    pub frame_count: u32,
    pub per_candidate: BTreeMap<String, f64>,
    pub top1: String,
    /// Every candidate sharing the top score; `top1` is the lexicographically
    /// smallest of them.
    pub tied_top: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_frame: Option<BTreeMap<u32, BTreeMap<String, f64>>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AttributionOptions {
    pub mode: MatchMode,
    pub keep_per_frame: bool,
}

/// Scores every candidate and picks the most similar one.
pub fn attribute(
    attacked_video_id: &str,
    attacked: &[FrameDetections],
    candidates: &BTreeMap<String, VideoLabels>,
    frame_count: u32,
    options: &AttributionOptions,
) -> Result<SimilarityReport> {
    check_frame_count(frame_count)?;
    if candidates.is_empty() {
        return Err(Error::invalid("attribution needs at least one candidate"));
    }
    let by_frame = index_detections(attacked);
    let scored: Vec<(&String, Vec<f64>)> = candidates
        .par_iter()
        .map(|(id, labels)| (id, per_frame_scores(&by_frame, labels, frame_count, options.mode)))
        .collect();

    let per_candidate: BTreeMap<String, f64> = scored
        .iter()
        .map(|(id, s)| ((*id).clone(), s.iter().sum::<f64>() / f64::from(frame_count)))
        .collect();
    // BTreeMap iterates ids ascending; only a strictly higher score replaces.
    let mut best: Option<(&String, f64)> = None;
    for (id, &v) in &per_candidate {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((id, v));
        }
    }
    let (top1, top) = best.expect("non-empty");
    let tied_top = per_candidate
        .iter()
        .filter(|(_, &v)| v == top)
        .map(|(id, _)| id.clone())
        .collect();

    let per_frame = options.keep_per_frame.then(|| {
        let mut frames: BTreeMap<u32, BTreeMap<String, f64>> = BTreeMap::new();
        for (id, scores) in &scored {
            for (t, &s) in scores.iter().enumerate() {
                frames.entry(t as u32).or_default().insert((*id).clone(), s);
            }
        }
        frames
    });

    Ok(SimilarityReport {
        attacked_video_id: attacked_video_id.to_owned(),
        frame_count,
        top1: top1.clone(),
        per_candidate,
        tied_top,
        per_frame,
    })
}

/// Which candidates an attacked clip was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPair {
    pub attacked: String,
    pub true_id: String,
    pub fake_id: String,
}

impl AttackPair {
    /// Parses whitespace-separated `attacked true fake` lines; `#` starts a
    /// comment.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [a, t, f] => out.push(Self {
                    attacked: (*a).to_owned(),
                    true_id: (*t).to_owned(),
                    fake_id: (*f).to_owned(),
                }),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "expected `attacked true fake`".into(),
                    })
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub attacked: String,
    pub vls_fake: f64,
    pub vls_true: f64,
    pub top1: String,
}

/// Aggregate over attacked clips: average similarity to each source and
/// how often each source wins top-1, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub rows: Vec<SummaryRow>,
    pub avg_vls_fake_pct: f64,
    pub avg_vls_true_pct: f64,
    pub fake_top1_pct: f64,
    pub true_top1_pct: f64,
}

pub fn summarize(reports: &[SimilarityReport], pairs: &[AttackPair]) -> Result<AttributionSummary> {
    if pairs.is_empty() {
        return Err(Error::invalid("no attack pairs to summarize"));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for p in pairs {
        let r = reports
            .iter()
            .find(|r| r.attacked_video_id == p.attacked)
            .ok_or_else(|| Error::invalid(format!("no report for attacked video {:?}", p.attacked)))?;
        let vls = |id: &str| {
            r.per_candidate
                .get(id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("candidate {id:?} missing from report for {:?}", p.attacked)))
        };
        rows.push(SummaryRow {
            attacked: p.attacked.clone(),
            vls_fake: vls(&p.fake_id)?,
            vls_true: vls(&p.true_id)?,
            top1: r.top1.clone(),
        });
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&SummaryRow) -> f64| 100.0 * rows.iter().map(f).sum::<f64>() / n;
    let wins = |pick: &dyn Fn(&AttackPair) -> &str| {
        100.0 * pairs.iter().zip(&rows).filter(|(p, row)| row.top1 == pick(p)).count() as f64 / n
    };
    Ok(AttributionSummary {
        avg_vls_fake_pct: mean(&|r| r.vls_fake),
        avg_vls_true_pct: mean(&|r| r.vls_true),
        fake_top1_pct: wins(&|p| &p.fake_id),
        true_top1_pct: wins(&|p| &p.true_id),
        rows,
    })
}

/// Plain-text table: one row per attacked clip, then the averages.
pub fn render_summary_table(summary: &AttributionSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>20} {:>20} {:>16}",
        "attacked", "VLS to fake (%)", "VLS to true (%)", "top-1"
    );
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "{:<16} {:>20.3} {:>20.3} {:>16}",
            r.attacked,
            100.0 * r.vls_fake,
            100.0 * r.vls_true,
            r.top1
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>20} {:>20} {:>16} {:>16}",
        "avg VLS fake (%)", "avg VLS true (%)", "fake top-1 (%)", "true top-1 (%)"
    );
    let _ = writeln!(
        out,
        "{:>20.3} {:>20.3} {:>16.1} {:>16.1}",
        summary.avg_vls_fake_pct, summary.avg_vls_true_pct, summary.fake_top1_pct, summary.true_top1_pct
    );
    out
}

/// Plain-text table of per-candidate VLS for each attacked clip.
pub fn render_reports_table(reports: &[SimilarityReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "attacked {} (T = {})", r.attacked_video_id, r.frame_count);
        for (id, v) in &r.per_candidate {
            let mark = if *id == r.top1 { "  <- top-1" } else { "" };
            let _ = writeln!(out, "  {id:<16} {:>10.3}%{mark}", 100.0 * v);
        }
    }
    out
}
