//! Alpha-channel video fusion toolkit.
//!
//! Builds RGBA clips that look like one video when a player composites them
//! over its background and like a different video to any pipeline that
//! simply drops the alpha channel. Also provides both consumption paths,
//! lossless RGBA containers, IoU-based detection similarity scoring for
//! source attribution, and an alpha-profiling countermeasure.

pub mod codec;
pub mod compositor;
pub mod defense;
pub mod error;
pub mod frame;
pub mod fusion;
pub mod labels;
pub mod metrics;
pub mod presets;

pub use compositor::{composite, drop_alpha, verify_round_trip, VerificationReport};
pub use error::{Error, Result};
pub use frame::{dequantize, quantize, resize, to_grayscale, Clip, ClipMeta, FrameRate, GrayFrame, ResizeFilter, RgbFrame, RgbaFrame};
pub use fusion::{fuse_frames, generate_fused_clip, FuseOptions, FusionParams};
pub use labels::{BoundingBox, FrameDetections, VideoLabels};
pub use metrics::{attribute, frame_level_similarity, iou, video_level_similarity, SimilarityReport};
pub use presets::{BackgroundColor, PlayerPreset, PresetRegistry, ViewMode};
