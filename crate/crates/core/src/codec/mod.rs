//! Alpha-preserving clip containers: PNG, APNG, the ACLK raw format and
//! numbered PNG directories.

pub mod apng;
pub mod png;
pub mod raw;
pub mod sequence;

use std::path::Path;
use std::str::FromStr;

pub use apng::{decode_apng, encode_apng, read_apng, write_apng, ApngTimingInfo};
pub use png::{decode_png, encode_png, read_png_rgba, write_png, write_png_rgba, EncodeOptions};
pub use raw::{read_raw_clip, write_raw_clip, RawClip, RawClipHeader};
pub use sequence::{export_frame_sequence, import_frame_sequence, DEFAULT_PATTERN};

use crate::compositor::drop_alpha_clip;
use crate::error::{Error, Result};
use crate::frame::{Clip, PixelFrame, RgbFrame, RgbaFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerFormat {
    Apng,
    Raw,
    PngSequence,
}

impl ContainerFormat {
    /// `.apng` / `.png` are APNG, `.aclk` is raw, anything else is a frame
    /// directory.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("apng" | "png") => Self::Apng,
            Some("aclk") => Self::Raw,
            _ => Self::PngSequence,
        }
    }
}

impl FromStr for ContainerFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apng" => Ok(Self::Apng),
            "aclk" | "raw" => Ok(Self::Raw),
            "png-seq" | "sequence" | "dir" => Ok(Self::PngSequence),
            _ => Err(Error::invalid(format!("unknown container format {s:?} (apng | aclk | png-seq)"))),
        }
    }
}

fn resolve(path: &Path, format: Option<ContainerFormat>) -> ContainerFormat {
    format.unwrap_or_else(|| ContainerFormat::from_path(path))
}

/// Reads any container as RGBA; RGB sources become fully opaque.
pub fn read_clip_rgba(path: impl AsRef<Path>, format: Option<ContainerFormat>) -> Result<Clip<RgbaFrame>> {
    let path = path.as_ref();
    match resolve(path, format) {
        ContainerFormat::Apng => Ok(read_apng(path)?.0),
        ContainerFormat::PngSequence => import_frame_sequence(path),
        ContainerFormat::Raw => Ok(match read_raw_clip(path)? {
            RawClip::Rgba(c) => c,
            RawClip::Rgb(c) => c.map(|f| {
                let data = f.pixels().flat_map(|[r, g, b]| [r, g, b, 255]).collect();
                RgbaFrame::new(f.width(), f.height(), data).expect("same dimensions")
            })?,
        }),
    }
}

/// Reads any container as RGB, discarding alpha if present.
pub fn read_clip_rgb(path: impl AsRef<Path>, format: Option<ContainerFormat>) -> Result<Clip<RgbFrame>> {
    let path = path.as_ref();
    if resolve(path, format) == ContainerFormat::Raw {
        if let RawClip::Rgb(c) = read_raw_clip(path)? {
            return Ok(c);
        }
    }
    Ok(drop_alpha_clip(&read_clip_rgba(path, format)?))
}

pub fn write_clip<F: PixelFrame>(clip: &Clip<F>, path: impl AsRef<Path>, format: Option<ContainerFormat>) -> Result<()> {
    let path = path.as_ref();
    match resolve(path, format) {
        ContainerFormat::Apng => write_apng(clip, path),
        ContainerFormat::Raw => write_raw_clip(clip, path),
        ContainerFormat::PngSequence => export_frame_sequence(clip, path, DEFAULT_PATTERN),
    }
}
