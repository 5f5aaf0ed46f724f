//! `ACLK` raw clip container: a fixed little-endian header followed by
//! uncompressed interleaved frames.
//!
//! ```text
//! offset size field
//!      0    4 magic "ACLK"
//!      4    2 version (1)
//!      6    4 width
//!     10    4 height
//!     14    4 frame_count
//!     18    4 frame_rate_num
//!     22    4 frame_rate_den
//!     26    1 channels (3 = RGB, 4 = RGBA)
//!     27    . frame_count * width * height * channels bytes
//! ```

use std::path::Path;

use crate::codec::png::{read_file, write_file};
use crate::error::{Error, Result};
use crate::frame::{Clip, FrameRate, PixelFrame, RgbFrame, RgbaFrame};

pub const MAGIC: [u8; 4] = *b"ACLK";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawClipHeader {
    pub version: u16,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub frame_rate_num: u32,
    pub frame_rate_den: u32,
    pub channels: u8,
}

impl RawClipHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(&MAGIC);
        h[4..6].copy_from_slice(&self.version.to_le_bytes());
        h[6..10].copy_from_slice(&self.width.to_le_bytes());
        h[10..14].copy_from_slice(&self.height.to_le_bytes());
        h[14..18].copy_from_slice(&self.frame_count.to_le_bytes());
        h[18..22].copy_from_slice(&self.frame_rate_num.to_le_bytes());
        h[22..26].copy_from_slice(&self.frame_rate_den.to_le_bytes());
        h[26] = self.channels;
        h
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!("ACLK header needs {HEADER_LEN} bytes, got {}", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::format("bad magic, not an ACLK file"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let header = Self {
            version: u16::from_le_bytes([bytes[4], bytes[5]]),
            width: u32_at(6),
            height: u32_at(10),
            frame_count: u32_at(14),
            frame_rate_num: u32_at(18),
            frame_rate_den: u32_at(22),
            channels: bytes[26],
        };
        if header.version != VERSION {
            return Err(Error::Unsupported(format!("ACLK version {}", header.version)));
        }
        if !matches!(header.channels, 3 | 4) {
            return Err(Error::format(format!("ACLK channels = {} (expected 3 or 4)", header.channels)));
        }
        if header.frame_rate_den == 0 || header.frame_rate_num == 0 {
            return Err(Error::format("ACLK frame rate must be positive"));
        }
        Ok(header)
    }

    pub fn payload_len(&self) -> Option<usize> {
        (self.width as usize)
            .checked_mul(self.height as usize)?
            .checked_mul(self.channels as usize)?
            .checked_mul(self.frame_count as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawClip {
    Rgb(Clip<RgbFrame>),
    Rgba(Clip<RgbaFrame>),
}

impl RawClip {
    pub fn channels(&self) -> u8 {
        match self {
            Self::Rgb(_) => 3,
            Self::Rgba(_) => 4,
        }
    }
}

pub fn encode_raw<F: PixelFrame>(clip: &Clip<F>) -> Vec<u8> {
    let m = clip.meta();
    let header = RawClipHeader {
        version: VERSION,
        width: m.width,
        height: m.height,
        frame_count: m.frame_count,
        frame_rate_num: m.frame_rate.num,
        frame_rate_den: m.frame_rate.den,
        channels: F::CHANNELS as u8,
    };
    let mut out = header.encode().to_vec();
    for f in clip.frames() {
        out.extend_from_slice(f.as_bytes());
    }
    out
}

fn decode_frames<F: PixelFrame + crate::frame::Dimensions>(h: &RawClipHeader, payload: &[u8]) -> Result<Clip<F>> {
    let frame_len = h.width as usize * h.height as usize * h.channels as usize;
    let frames = if frame_len == 0 {
        Vec::new()
    } else {
        payload
            .chunks_exact(frame_len)
            .map(|d| F::from_raw(h.width, h.height, d.to_vec()))
            .collect::<Result<_>>()?
    };
    let rate = FrameRate::new(h.frame_rate_num, h.frame_rate_den)?;
    Clip::with_dimensions(h.width, h.height, rate, frames)
}

pub fn decode_raw(bytes: &[u8]) -> Result<RawClip> {
    let h = RawClipHeader::decode(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let want = h.payload_len().ok_or_else(|| Error::format("ACLK payload size overflows"))?;
    if payload.len() != want {
        return Err(Error::format(format!(
            "ACLK payload is {} bytes, header implies {want}",
            payload.len()
        )));
    }
    if h.frame_count > 0 && (h.width == 0 || h.height == 0) {
        return Err(Error::format("ACLK frames with zero width or height"));
    }
    Ok(match h.channels {
        3 => RawClip::Rgb(decode_frames(&h, payload)?),
        _ => RawClip::Rgba(decode_frames(&h, payload)?),
    })
}

pub fn write_raw_clip<F: PixelFrame>(clip: &Clip<F>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_raw(clip))
}

pub fn read_raw_clip(path: impl AsRef<Path>) -> Result<RawClip> {
    let path = path.as_ref();
    decode_raw(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
