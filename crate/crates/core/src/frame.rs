//! Frame and clip value types plus the elementary pixel conversions.
//!
//! `GrayFrame` holds normalized intensities in `[0, 1]` as `f64`; the 8-bit
//! frame types hold row-major interleaved channels. Every constructor checks
//! its length and range invariants, so a value of any of these types is
//! always well-formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BT.601 luma weights used by [`to_grayscale`].
pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

/// Maps a normalized scalar to an 8-bit level, rounding half away from zero.
pub fn quantize(x: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("quantize input {x} outside [0, 1]")));
    }
    Ok((x * 255.0).round() as u8)
}

/// Quantize for values that are in range by construction. Float noise just
/// outside `[0, 1]` is clamped rather than rejected.
pub(crate) fn quantize_clamped(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn dequantize(v: u8) -> f64 {
    f64::from(v) / 255.0
}

fn check_dims(width: u32, height: u32) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "frame dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(width as usize * height as usize)
}

/// Single-channel frame of normalized intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(width, height)?;
        if data.len() != len {
            return Err(Error::shape(format!(
                "gray frame {width}x{height} needs {len} samples, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("gray sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        let len = check_dims(width, height)?;
        Self::new(width, height, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Common surface of the 8-bit interleaved frame types.
pub trait PixelFrame: Dimensions + Sized + Clone + Send + Sync {
    const CHANNELS: usize;

    fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self>;
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn as_bytes(&self) -> &[u8];
    fn into_bytes(self) -> Vec<u8>;
}

macro_rules! interleaved_frame {
    ($(#[$doc:meta])* $name:ident, $channels:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        pub struct $name {
            width: u32,
            height: u32,
            data: Vec<u8>,
        }

        impl $name {
            pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
                let len = check_dims(width, height)? * $channels;
                if data.len() != len {
                    return Err(Error::shape(format!(
                        "{} {width}x{height} needs {len} bytes, got {}",
                        stringify!($name),
                        data.len()
                    )));
                }
                Ok(Self { width, height, data })
            }

            pub fn filled(width: u32, height: u32, pixel: [u8; $channels]) -> Result<Self> {
                let len = check_dims(width, height)?;
                let data = pixel.iter().copied().cycle().take(len * $channels).collect();
                Self::new(width, height, data)
            }

            pub fn width(&self) -> u32 {
                self.width
            }

            pub fn height(&self) -> u32 {
                self.height
            }

            pub fn data(&self) -> &[u8] {
                &self.data
            }

            pub fn pixel(&self, x: u32, y: u32) -> [u8; $channels] {
                let i = (y as usize * self.width as usize + x as usize) * $channels;
                self.data[i..i + $channels].try_into().unwrap()
            }

            pub fn pixels(&self) -> impl Iterator<Item = [u8; $channels]> + '_ {
                self.data.chunks_exact($channels).map(|p| p.try_into().unwrap())
            }
        }

        impl PixelFrame for $name {
            const CHANNELS: usize = $channels;

            fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
                Self::new(width, height, data)
            }

            fn width(&self) -> u32 {
                self.width
            }

            fn height(&self) -> u32 {
                self.height
            }

            fn as_bytes(&self) -> &[u8] {
                &self.data
            }

            fn into_bytes(self) -> Vec<u8> {
                self.data
            }
        }
    };
}

interleaved_frame!(
    /// 8-bit RGB frame.
    RgbFrame,
    3
);
interleaved_frame!(
    /// 8-bit RGBA frame with straight (non-premultiplied) alpha, alpha last.
    RgbaFrame,
    4
);

impl RgbFrame {
    /// Replicates each quantized gray level into all three channels.
    pub fn from_gray(frame: &GrayFrame) -> Self {
        let data = frame
            .data()
            .iter()
            .flat_map(|&v| [quantize_clamped(v); 3])
            .collect();
        Self {
            width: frame.width(),
            height: frame.height(),
            data,
        }
    }
}

/// Positive rational frame rate in frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid(format!(
                "frame rate {num}/{den} must be positive"
            )));
        }
        Ok(Self { num, den })
    }

    pub fn fps(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        Self { num: 30, den: 1 }
    }
}

impl std::fmt::Display for FrameRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for FrameRate {
    type Err = Error;

    /// Accepts `30`, `30/1` or `30000/1001`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::invalid(format!("bad frame rate {s:?}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Self::new(parse(n)?, parse(d)?),
            None => Self::new(parse(s)?, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub width: u32,
    pub height: u32,
    pub frame_rate: FrameRate,
    pub frame_count: u32,
}

/// An ordered frame sequence with uniform dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip<F> {
    meta: ClipMeta,
    frames: Vec<F>,
}

/// Anything with pixel dimensions; lets [`Clip`] validate uniformity.
pub trait Dimensions {
    fn dims(&self) -> (u32, u32);
}

impl Dimensions for GrayFrame {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensions for RgbFrame {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl Dimensions for RgbaFrame {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl<F: Dimensions> Clip<F> {
    /// Builds a clip from a non-empty frame list; dimensions come from the
    /// first frame.
    pub fn new(frames: Vec<F>, frame_rate: FrameRate) -> Result<Self> {
        let (width, height) = frames
            .first()
            .map(Dimensions::dims)
            .ok_or_else(|| Error::invalid("clip has no frames"))?;
        Self::with_dimensions(width, height, frame_rate, frames)
    }

    /// Like [`Clip::new`] but allows an empty frame list.
    pub fn with_dimensions(
        width: u32,
        height: u32,
        frame_rate: FrameRate,
        frames: Vec<F>,
    ) -> Result<Self> {
        FrameRate::new(frame_rate.num, frame_rate.den)?;
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.dims() != (width, height))
        {
            let (w, h) = f.dims();
            return Err(Error::shape(format!(
                "frame {i} is {w}x{h}, clip is {width}x{height}"
            )));
        }
        let frame_count = u32::try_from(frames.len())
            .map_err(|_| Error::invalid("too many frames for a clip"))?;
        Ok(Self {
            meta: ClipMeta {
                width,
                height,
                frame_rate,
                frame_count,
            },
            frames,
        })
    }

    pub fn meta(&self) -> &ClipMeta {
        &self.meta
    }

    pub fn frames(&self) -> &[F] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<F> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn with_frame_rate(mut self, frame_rate: FrameRate) -> Self {
        self.meta.frame_rate = frame_rate;
        self
    }

    /// Applies `f` to every frame, keeping metadata; `f` must preserve
    /// dimensions.
    pub fn map<G: Dimensions>(&self, f: impl Fn(&F) -> G) -> Result<Clip<G>> {
        let frames = self.frames.iter().map(f).collect();
        Clip::with_dimensions(
            self.meta.width,
            self.meta.height,
            self.meta.frame_rate,
            frames,
        )
    }
}

/// Converts an RGB frame to normalized BT.601 luma.
pub fn to_grayscale(frame: &RgbFrame) -> GrayFrame {
    let data = frame
        .pixels()
        .map(|[r, g, b]| {
            let y = LUMA_R * f64::from(r) + LUMA_G * f64::from(g) + LUMA_B * f64::from(b);
            (y / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    GrayFrame {
        width: frame.width(),
        height: frame.height(),
        data,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ResizeFilter {
    #[default]
    Bilinear,
    Nearest,
}

impl std::str::FromStr for ResizeFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Self::Bilinear),
            "nearest" => Ok(Self::Nearest),
            _ => Err(Error::invalid(format!("unknown resize filter {s:?}"))),
        }
    }
}

/// Source coordinate of destination sample `i`, aligning pixel centers.
fn source_coord(i: u32, src: u32, dst: u32) -> f64 {
    (f64::from(i) + 0.5) * f64::from(src) / f64::from(dst) - 0.5
}

/// Per-axis taps: (lower index, upper index, weight of upper).
fn taps(src: u32, dst: u32, filter: ResizeFilter) -> Vec<(usize, usize, f64)> {
    let last = (src - 1) as usize;
    (0..dst)
        .map(|i| match filter {
            ResizeFilter::Bilinear => {
                let s = source_coord(i, src, dst).clamp(0.0, last as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(last);
                (lo, hi, s - lo as f64)
            }
            ResizeFilter::Nearest => {
                let s = ((f64::from(i) + 0.5) * f64::from(src) / f64::from(dst)).floor() as usize;
                let s = s.min(last);
                (s, s, 0.0)
            }
        })
        .collect()
}

/// Resizes an RGB frame to exactly `width` x `height`. Bilinear sampling
/// clamps at the edges.
pub fn resize(frame: &RgbFrame, width: u32, height: u32, filter: ResizeFilter) -> Result<RgbFrame> {
    check_dims(width, height)?;
    if (width, height) == (frame.width, frame.height) {
        return Ok(frame.clone());
    }
    let xs = taps(frame.width, width, filter);
    let ys = taps(frame.height, height, filter);
    let stride = frame.width as usize * 3;
    let src = &frame.data;
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let at = |x: usize, y: usize| f64::from(src[y * stride + x * 3 + c]);
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbFrame::new(width, height, data)
}
