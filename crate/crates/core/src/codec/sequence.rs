//! Numbered PNG frame directories with a JSON sidecar, the hand-off format
//! for external encoders (ProRes 4444, VP9 alpha, ...).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::png::{read_png_rgba, write_png};
use crate::error::{Error, Result};
use crate::frame::{Clip, FrameRate, PixelFrame, RgbaFrame};

pub const SIDECAR_NAME: &str = "sequence.json";
pub const DEFAULT_PATTERN: &str = "frame_%04d.png";
const SIDECAR_FORMAT: &str = "alphacloak-sequence";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSidecar {
    pub format: String,
    pub version: u32,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub frame_rate: FrameRate,
    pub channels: u8,
    pub pattern: String,
}

/// A printf-style file name pattern with one `%d` or `%0Nd` field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePattern {
    prefix: String,
    width: usize,
    suffix: String,
}

impl NamePattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("name pattern {pattern:?} needs exactly one %d or %0Nd field"));
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        let end = rest.find('d').ok_or_else(bad)?;
        let spec = &rest[..end];
        let width = match spec {
            "" => 0,
            s if s.starts_with('0') && s[1..].chars().all(|c| c.is_ascii_digit()) && s.len() > 1 => {
                s[1..].parse().map_err(|_| bad())?
            }
            _ => return Err(bad()),
        };
        let suffix = &rest[end + 1..];
        if suffix.contains('%') || pattern[..start].contains('/') || suffix.contains('/') {
            return Err(bad());
        }
        Ok(Self {
            prefix: pattern[..start].to_owned(),
            width,
            suffix: suffix.to_owned(),
        })
    }

    pub fn format(&self, index: usize) -> String {
        format!("{}{:0width$}{}", self.prefix, index, self.suffix, width = self.width)
    }
}

/// Writes each frame as `dir/<pattern>` plus a sidecar with clip metadata.
pub fn export_frame_sequence<F: PixelFrame>(clip: &Clip<F>, dir: impl AsRef<Path>, pattern: &str) -> Result<()> {
    let dir = dir.as_ref();
    let names = NamePattern::parse(pattern)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in clip.frames().iter().enumerate() {
        write_png(frame, dir.join(names.format(i)))?;
    }
    let m = clip.meta();
    let sidecar = SequenceSidecar {
        format: SIDECAR_FORMAT.to_owned(),
        version: 1,
        width: m.width,
        height: m.height,
        frame_count: m.frame_count,
        frame_rate: m.frame_rate,
        channels: F::CHANNELS as u8,
        pattern: pattern.to_owned(),
    };
    let path = dir.join(SIDECAR_NAME);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn read_sidecar(path: &Path) -> Result<SequenceSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s: SequenceSidecar =
        serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if s.format != SIDECAR_FORMAT || s.version != 1 {
        return Err(Error::format(format!(
            "{}: unsupported sidecar {} v{}",
            path.display(),
            s.format,
            s.version
        )));
    }
    Ok(s)
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads a frame directory. With a sidecar the listed frames and frame
/// rate are used; without one every `*.png` is loaded in name order at the
/// default rate.
pub fn import_frame_sequence(dir: impl AsRef<Path>) -> Result<Clip<RgbaFrame>> {
    let dir = dir.as_ref();
    let sidecar_path = dir.join(SIDECAR_NAME);
    if sidecar_path.exists() {
        let s = read_sidecar(&sidecar_path)?;
        let names = NamePattern::parse(&s.pattern)?;
        let frames = (0..s.frame_count as usize)
            .map(|i| read_png_rgba(dir.join(names.format(i))))
            .collect::<Result<Vec<_>>>()?;
        if frames.iter().any(|f| (f.width(), f.height()) != (s.width, s.height)) {
            return Err(Error::format(format!(
                "{}: frame size differs from sidecar {}x{}",
                dir.display(),
                s.width,
                s.height
            )));
        }
        return Clip::with_dimensions(s.width, s.height, s.frame_rate, frames);
    }
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(Error::format(format!("{}: no PNG frames found", dir.display())));
    }
    let frames = files.iter().map(read_png_rgba).collect::<Result<Vec<_>>>()?;
    Clip::new(frames, FrameRate::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_expansion() {
        let p = NamePattern::parse("frame_%04d.png").unwrap();
        assert_eq!(p.format(0), "frame_0000.png");
        assert_eq!(p.format(12345), "frame_12345.png");
        assert_eq!(NamePattern::parse("%d.png").unwrap().format(7), "7.png");
        for bad in ["frame.png", "%4d.png", "%d_%d.png", "a/%d.png", "%x.png"] {
            assert!(NamePattern::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn export_and_reimport() {
        let dir = tempfile::tempdir().unwrap();
        let frames = (0..3u8)
            .map(|i| RgbaFrame::new(2, 1, vec![i, 1, 2, 3, 4, 5, 6, 255 - i]).unwrap())
            .collect();
        let clip = Clip::new(frames, FrameRate::new(12, 1).unwrap()).unwrap();
        export_frame_sequence(&clip, dir.path(), DEFAULT_PATTERN).unwrap();
        for name in ["frame_0000.png", "frame_0001.png", "frame_0002.png", SIDECAR_NAME] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        assert!(!dir.path().join("frame_0003.png").exists());
        assert_eq!(import_frame_sequence(dir.path()).unwrap(), clip);
    }

    #[test]
    fn unwritable_target_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let clip = Clip::new(vec![RgbaFrame::filled(1, 1, [0; 4]).unwrap()], FrameRate::default()).unwrap();
        let err = export_frame_sequence(&clip, blocker.join("sub"), DEFAULT_PATTERN).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err:?}");
    }
}
