//! Alpha-channel profiling and composite-on-black input normalization.
//!
//! The flag rule is global: a frame is flagged when more than
//! `flag_fraction` of its pixels have alpha below `opaque_threshold`.
//! Region-aware rules can be layered on top of [`AlphaProfile::histogram`]
//! or by profiling crops.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositor::composite_clip;
use crate::error::{Error, Result};
use crate::frame::{Clip, RgbFrame, RgbaFrame};
use crate::presets::BackgroundColor;

pub const DEFAULT_OPAQUE_THRESHOLD: u8 = 250;
pub const DEFAULT_FLAG_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Alpha values strictly below this count as transparent.
    pub opaque_threshold: u8,
    /// Flag when the transparent fraction is strictly above this.
    pub flag_fraction: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            opaque_threshold: DEFAULT_OPAQUE_THRESHOLD,
            flag_fraction: DEFAULT_FLAG_FRACTION,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flag_fraction) {
            return Err(Error::invalid(format!(
                "flag fraction must be in [0, 1], got {}",
                self.flag_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub frame_index: u32,
    /// 256 bins of alpha counts.
    pub histogram: Vec<u64>,
    pub transparent_fraction: f64,
    /// Shannon entropy of the normalized histogram, in bits.
    pub entropy: f64,
    pub flagged: bool,
}

pub fn profile_alpha(frame: &RgbaFrame, frame_index: u32, config: &ProfileConfig) -> AlphaProfile {
    let mut histogram = vec![0u64; 256];
    for [_, _, _, a] in frame.pixels() {
        histogram[usize::from(a)] += 1;
    }
    let total = histogram.iter().sum::<u64>();
    let transparent: u64 = histogram[..usize::from(config.opaque_threshold)].iter().sum();
    let (transparent_fraction, entropy) = if total == 0 {
        (0.0, 0.0)
    } else {
        let n = total as f64;
        let h = histogram
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum::<f64>();
        (transparent as f64 / n, h.max(0.0))
    };
    AlphaProfile {
        frame_index,
        histogram,
        transparent_fraction,
        entropy,
        flagged: transparent_fraction > config.flag_fraction,
    }
}

pub fn profile_clip(clip: &Clip<RgbaFrame>, config: &ProfileConfig) -> Vec<AlphaProfile> {
    clip.frames()
        .par_iter()
        .enumerate()
        .map(|(i, f)| profile_alpha(f, i as u32, config))
        .collect()
}

/// One JSON object per line; the histogram is included only when asked.
pub fn profiles_to_jsonl(profiles: &[AlphaProfile], with_histogram: bool) -> String {
    let mut out = String::new();
    for p in profiles {
        let row = if with_histogram {
            serde_json::to_value(p).expect("profile serializes")
        } else {
            serde_json::json!({
                "frame_index": p.frame_index,
                "transparent_fraction": p.transparent_fraction,
                "entropy": p.entropy,
                "flagged": p.flagged,
            })
        };
        out.push_str(&row.to_string());
        out.push('\n');
    }
    out
}

/// Composites every frame over black so a detector sees what a viewer on a
/// black-background player sees.
pub fn normalize_on_black(clip: &Clip<RgbaFrame>) -> Clip<RgbFrame> {
    composite_clip(clip, BackgroundColor::BLACK)
}
