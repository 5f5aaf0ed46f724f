//! Box geometry, KITTI tracking label parsing and the detection
//! interchange format.
//!
//! Interchange files are JSON Lines. The first line is a header
//! `{"format":"alphacloak-detections","version":1}`; every following line
//! is one box:
//!
//! ```text
//! {"video_id":"0003","frame":12,"label":"Car","confidence":0.91,"left":10.5,"top":20,"right":80,"bottom":64}
//! ```
//!
//! A line carrying only `video_id` and `frame` marks a frame that was
//! processed but produced no boxes, so frame counts survive a round trip.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DETECTIONS_FORMAT: &str = "alphacloak-detections";
pub const DETECTIONS_VERSION: u32 = 1;

/// Ground-truth class that KITTI uses for regions to ignore.
pub const KITTI_DONT_CARE: &str = "DontCare";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub class_label: String,
    pub confidence: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64, class_label: impl Into<String>, confidence: f64) -> Result<Self> {
        if ![left, top, right, bottom].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("box coordinates must be finite"));
        }
        if left > right || top > bottom {
            return Err(Error::invalid(format!(
                "box ({left}, {top}, {right}, {bottom}) has left > right or top > bottom"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Range(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
            class_label: class_label.into(),
            confidence,
        })
    }

    /// Ground-truth box (confidence 1).
    pub fn ground_truth(left: f64, top: f64, right: f64, bottom: f64, class_label: impl Into<String>) -> Result<Self> {
        Self::new(left, top, right, bottom, class_label, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.right - self.left) * (self.bottom - self.top)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u32,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VideoLabels {
    pub video_id: String,
    pub frames: BTreeMap<u32, Vec<BoundingBox>>,
}

impl VideoLabels {
    pub fn new(video_id: impl Into<String>) -> Self {
        Self {
            video_id: video_id.into(),
            frames: BTreeMap::new(),
        }
    }

    pub fn boxes(&self, frame: u32) -> &[BoundingBox] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    /// One past the highest labelled frame index, 0 when unlabelled.
    pub fn frame_span(&self) -> u32 {
        self.frames.keys().next_back().map_or(0, |&k| k + 1)
    }

    pub fn to_detections(&self) -> Vec<FrameDetections> {
        self.frames
            .iter()
            .map(|(&frame_index, boxes)| FrameDetections {
                frame_index,
                boxes: boxes.clone(),
            })
            .collect()
    }
}

/// Keeps boxes with `confidence >= threshold`, preserving order.
pub fn filter_by_confidence(dets: &FrameDetections, threshold: f64) -> FrameDetections {
    FrameDetections {
        frame_index: dets.frame_index,
        boxes: dets.boxes.iter().filter(|b| b.confidence >= threshold).cloned().collect(),
    }
}

/// Column count of a KITTI tracking ground-truth line; result files add a
/// trailing score column.
const KITTI_COLUMNS: usize = 17;

/// Parses KITTI tracking labels. Each non-`DontCare` line yields one box
/// with confidence 1; the 3-D fields are validated but not kept.
pub fn parse_kitti_tracking_str(video_id: &str, text: &str) -> Result<VideoLabels> {
    let mut labels = VideoLabels::new(video_id);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != KITTI_COLUMNS && fields.len() != KITTI_COLUMNS + 1 {
            return Err(Error::format(format!(
                "line {line_no}: {} columns, expected {KITTI_COLUMNS} or {}",
                fields.len(),
                KITTI_COLUMNS + 1
            )));
        }
        let err = |msg: String| Error::Parse {
            line: line_no,
            message: msg,
        };
        let frame: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("frame {:?} is not a non-negative integer", fields[0])))?;
        fields[1]
            .parse::<i64>()
            .map_err(|_| err(format!("track id {:?} is not an integer", fields[1])))?;
        let class = fields[2];
        let mut numeric = [0.0f64; 14];
        for (slot, (col, raw)) in numeric.iter_mut().zip(fields.iter().enumerate().skip(3).take(14)) {
            *slot = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("column {} value {raw:?} is not a number", col + 1)))?;
        }
        if class == KITTI_DONT_CARE {
            continue;
        }
        // numeric[3..7] are columns 7-10: left, top, right, bottom.
        let [left, top, right, bottom] = [numeric[3], numeric[4], numeric[5], numeric[6]];
        let b = BoundingBox::ground_truth(left, top, right, bottom, class).map_err(|e| err(e.to_string()))?;
        labels.frames.entry(frame).or_default().push(b);
    }
    Ok(labels)
}

/// Parses a KITTI label file; the video id is the file stem.
pub fn parse_kitti_tracking(path: impl AsRef<Path>) -> Result<VideoLabels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_kitti_tracking_str(&id, &text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Loads every `*.txt` label file in a directory, keyed by video id.
pub fn load_kitti_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, VideoLabels>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            let labels = parse_kitti_tracking(&path)?;
            out.insert(labels.video_id.clone(), labels);
        }
    }
    Ok(out)
}

pub type DetectionSet = BTreeMap<String, Vec<FrameDetections>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    video_id: String,
    frame: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    top: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bottom: Option<f64>,
}

impl Record {
    fn into_box(self, line: usize) -> Result<(String, u32, Option<BoundingBox>)> {
        let Record {
            video_id,
            frame,
            label,
            confidence,
            left,
            top,
            right,
            bottom,
        } = self;
        let fields = [
            ("label", label.is_some()),
            ("confidence", confidence.is_some()),
            ("left", left.is_some()),
            ("top", top.is_some()),
            ("right", right.is_some()),
            ("bottom", bottom.is_some()),
        ];
        if fields.iter().all(|(_, present)| !present) {
            return Ok((video_id, frame, None));
        }
        if let Some((name, _)) = fields.iter().find(|(_, present)| !present) {
            return Err(Error::format(format!("line {line}: missing field `{name}`")));
        }
        let confidence = confidence.unwrap();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Range(format!(
                "line {line}: field `confidence` = {confidence} outside [0, 1]"
            )));
        }
        let (l, t, r, b) = (left.unwrap(), top.unwrap(), right.unwrap(), bottom.unwrap());
        if l > r {
            return Err(Error::format(format!("line {line}: field `right` ({r}) is less than `left` ({l})")));
        }
        if t > b {
            return Err(Error::format(format!("line {line}: field `bottom` ({b}) is less than `top` ({t})")));
        }
        let bx = BoundingBox::new(l, t, r, b, label.unwrap(), confidence)
            .map_err(|e| Error::format(format!("line {line}: {e}")))?;
        Ok((video_id, frame, Some(bx)))
    }
}

/// Parses interchange text. Frames come out in ascending index order with
/// box order preserved within a frame.
pub fn read_detections_str(text: &str) -> Result<DetectionSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::format("empty detections file (no header line)"))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::format(format!("line 1: bad header: {e}")))?;
    if header.format != DETECTIONS_FORMAT {
        return Err(Error::format(format!("line 1: field `format` is {:?}", header.format)));
    }
    if header.version != DETECTIONS_VERSION {
        return Err(Error::Unsupported(format!("detections version {}", header.version)));
    }

    let mut acc: BTreeMap<String, BTreeMap<u32, Vec<BoundingBox>>> = BTreeMap::new();
    for (i, line) in lines {
        let n = i + 1;
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::format(format!("line {n}: {e}")))?;
        let (video, frame, bx) = rec.into_box(n)?;
        let frames = acc.entry(video).or_default().entry(frame).or_default();
        frames.extend(bx);
    }
    Ok(acc
        .into_iter()
        .map(|(video, frames)| {
            let dets = frames
                .into_iter()
                .map(|(frame_index, boxes)| FrameDetections { frame_index, boxes })
                .collect();
            (video, dets)
        })
        .collect())
}

pub fn write_detections_string(set: &DetectionSet) -> String {
    let mut out = serde_json::to_string(&Header {
        format: DETECTIONS_FORMAT.to_owned(),
        version: DETECTIONS_VERSION,
    })
    .expect("header serializes");
    out.push('\n');
    for (video, frames) in set {
        for f in frames {
            let records: Vec<Record> = if f.boxes.is_empty() {
                vec![Record {
                    video_id: video.clone(),
                    frame: f.frame_index,
                    label: None,
                    confidence: None,
                    left: None,
                    top: None,
                    right: None,
                    bottom: None,
                }]
            } else {
                f.boxes
                    .iter()
                    .map(|b| Record {
                        video_id: video.clone(),
                        frame: f.frame_index,
                        label: Some(b.class_label.clone()),
                        confidence: Some(b.confidence),
                        left: Some(b.left),
                        top: Some(b.top),
                        right: Some(b.right),
                        bottom: Some(b.bottom),
                    })
                    .collect()
            };
            for r in records {
                let _ = writeln!(out, "{}", serde_json::to_string(&r).expect("record serializes"));
            }
        }
    }
    out
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_detections_str(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_detections(set: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_detections_string(set)).map_err(|e| Error::io(path, e))
}
