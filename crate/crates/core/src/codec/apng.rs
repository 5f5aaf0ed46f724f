//! Animated PNG: acTL / fcTL / fdAT on top of the PNG chunk layer.
//!
//! The writer emits one full-canvas frame per fcTL with dispose-none and
//! blend-source, so every frame stands alone. The reader implements the
//! full compositing model (offsets, all dispose and blend ops) so files
//! from other encoders decode to the frames a conformant player shows.

use std::path::Path;

use crate::codec::png::{
    chunk_name, compress_image, decompress_image, parse_chunks, read_file, to_rgba, write_chunk, write_file,
    Chunk, ColorType, EncodeOptions, Header, ACTL, FCTL, FDAT, IDAT, IEND, IHDR, SIGNATURE,
};
use crate::error::{Error, Result};
use crate::frame::{Clip, FrameRate, PixelFrame, RgbaFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisposeOp {
    None = 0,
    Background = 1,
    Previous = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendOp {
    Source = 0,
    Over = 1,
}

/// Parsed fcTL payload (without its sequence number).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameControl {
    pub width: u32,
    pub height: u32,
    pub x_offset: u32,
    pub y_offset: u32,
    pub delay_num: u16,
    pub delay_den: u16,
    pub dispose: DisposeOp,
    pub blend: BlendOp,
}

impl FrameControl {
    pub fn encode(&self, sequence: u32) -> [u8; 26] {
        let mut d = [0u8; 26];
        d[..4].copy_from_slice(&sequence.to_be_bytes());
        d[4..8].copy_from_slice(&self.width.to_be_bytes());
        d[8..12].copy_from_slice(&self.height.to_be_bytes());
        d[12..16].copy_from_slice(&self.x_offset.to_be_bytes());
        d[16..20].copy_from_slice(&self.y_offset.to_be_bytes());
        d[20..22].copy_from_slice(&self.delay_num.to_be_bytes());
        d[22..24].copy_from_slice(&self.delay_den.to_be_bytes());
        d[24] = self.dispose as u8;
        d[25] = self.blend as u8;
        d
    }

    fn decode(data: &[u8]) -> Result<(u32, Self)> {
        if data.len() != 26 {
            return Err(Error::format(format!("fcTL length {} (expected 26)", data.len())));
        }
        let u32_at = |i: usize| u32::from_be_bytes(data[i..i + 4].try_into().unwrap());
        let u16_at = |i: usize| u16::from_be_bytes(data[i..i + 2].try_into().unwrap());
        let dispose = match data[24] {
            0 => DisposeOp::None,
            1 => DisposeOp::Background,
            2 => DisposeOp::Previous,
            v => return Err(Error::format(format!("fcTL: invalid dispose op {v}"))),
        };
        let blend = match data[25] {
            0 => BlendOp::Source,
            1 => BlendOp::Over,
            v => return Err(Error::format(format!("fcTL: invalid blend op {v}"))),
        };
        Ok((
            u32_at(0),
            Self {
                width: u32_at(4),
                height: u32_at(8),
                x_offset: u32_at(12),
                y_offset: u32_at(16),
                delay_num: u16_at(20),
                delay_den: u16_at(22),
                dispose,
                blend,
            },
        ))
    }

    /// Delay in seconds as a rational; a zero denominator means 1/100 s.
    pub fn delay(&self) -> (u16, u16) {
        (self.delay_num, if self.delay_den == 0 { 100 } else { self.delay_den })
    }
}

/// Animation-level timing carried alongside a decoded clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApngTimingInfo {
    pub num_frames: u32,
    /// 0 loops forever.
    pub num_plays: u32,
    /// Per-frame delay as (numerator, denominator) seconds.
    pub delays: Vec<(u16, u16)>,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Frame delay for a rate: `den / num` seconds in lowest terms.
pub fn delay_for_rate(rate: FrameRate) -> Result<(u16, u16)> {
    let g = gcd(rate.num, rate.den);
    let (n, d) = (rate.den / g, rate.num / g);
    match (u16::try_from(n), u16::try_from(d)) {
        (Ok(n), Ok(d)) => Ok((n, d)),
        _ => Err(Error::Unsupported(format!(
            "frame rate {rate} needs a delay of {n}/{d} s, which does not fit APNG's 16-bit fields"
        ))),
    }
}

fn rate_for_delay((num, den): (u16, u16)) -> FrameRate {
    if num == 0 {
        return FrameRate::default();
    }
    let g = gcd(u32::from(num), u32::from(den));
    FrameRate {
        num: u32::from(den) / g,
        den: u32::from(num) / g,
    }
}

pub fn encode_apng<F: PixelFrame>(clip: &Clip<F>, num_plays: u32, opts: &EncodeOptions) -> Result<Vec<u8>> {
    let meta = clip.meta();
    if clip.is_empty() {
        return Err(Error::invalid("cannot write an APNG with no frames"));
    }
    let (delay_num, delay_den) = delay_for_rate(meta.frame_rate)?;
    let header = Header {
        width: meta.width,
        height: meta.height,
        color: ColorType::for_channels(F::CHANNELS),
    };

    let mut out = SIGNATURE.to_vec();
    write_chunk(&mut out, IHDR, &header.encode());
    let mut actl = [0u8; 8];
    actl[..4].copy_from_slice(&meta.frame_count.to_be_bytes());
    actl[4..].copy_from_slice(&num_plays.to_be_bytes());
    write_chunk(&mut out, ACTL, &actl);

    let control = FrameControl {
        width: meta.width,
        height: meta.height,
        x_offset: 0,
        y_offset: 0,
        delay_num,
        delay_den,
        dispose: DisposeOp::None,
        blend: BlendOp::Source,
    };
    let mut sequence = 0u32;
    for (i, frame) in clip.frames().iter().enumerate() {
        write_chunk(&mut out, FCTL, &control.encode(sequence));
        sequence += 1;
        let z = compress_image(frame.as_bytes(), meta.width, F::CHANNELS, opts);
        if i == 0 {
            write_chunk(&mut out, IDAT, &z);
        } else {
            let mut data = Vec::with_capacity(z.len() + 4);
            data.extend_from_slice(&sequence.to_be_bytes());
            data.extend_from_slice(&z);
            write_chunk(&mut out, FDAT, &data);
            sequence += 1;
        }
    }
    write_chunk(&mut out, IEND, &[]);
    Ok(out)
}

pub fn write_apng<F: PixelFrame>(clip: &Clip<F>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_apng(clip, 0, &EncodeOptions::default())?)
}

struct PendingFrame {
    control: FrameControl,
    data: Vec<u8>,
}

/// Straight-alpha "over" for one RGBA pixel, in 8-bit integer arithmetic.
fn blend_over(dst: &mut [u8], src: &[u8]) {
    let sa = u32::from(src[3]);
    if sa == 255 {
        dst.copy_from_slice(src);
        return;
    }
    if sa == 0 {
        return;
    }
    let da = u32::from(dst[3]);
    let u = sa * 255;
    let v = (255 - sa) * da;
    let al = u + v;
    for c in 0..3 {
        dst[c] = ((u32::from(src[c]) * u + u32::from(dst[c]) * v) / al) as u8;
    }
    dst[3] = (al / 255) as u8;
}

struct Canvas {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
}

impl Canvas {
    fn region_rows(&self, c: &FrameControl) -> impl Iterator<Item = (usize, std::ops::Range<usize>)> {
        let c = *c;
        let stride = self.width as usize * 4;
        let (x, w) = (c.x_offset as usize, c.width as usize);
        (0..c.height as usize).map(move |row| {
            let start = (c.y_offset as usize + row) * stride + x * 4;
            (row, start..start + w * 4)
        })
    }

    fn apply(&mut self, c: &FrameControl, pixels: &[u8]) {
        let w = c.width as usize * 4;
        let rows: Vec<_> = self.region_rows(c).collect();
        for (row, range) in rows {
            let src = &pixels[row * w..(row + 1) * w];
            let dst = &mut self.rgba[range];
            match c.blend {
                BlendOp::Source => dst.copy_from_slice(src),
                BlendOp::Over => {
                    for (d, s) in dst.chunks_exact_mut(4).zip(src.chunks_exact(4)) {
                        blend_over(d, s);
                    }
                }
            }
        }
    }

    fn clear(&mut self, c: &FrameControl) {
        let rows: Vec<_> = self.region_rows(c).map(|(_, r)| r).collect();
        for range in rows {
            self.rgba[range].fill(0);
        }
    }

    fn restore(&mut self, c: &FrameControl, saved: &[u8]) {
        let rows: Vec<_> = self.region_rows(c).map(|(_, r)| r).collect();
        for range in rows {
            self.rgba[range.clone()].copy_from_slice(&saved[range]);
        }
    }
}

/// Decodes an APNG into full-canvas frames. A plain PNG (no animation
/// chunks at all) decodes as a one-frame clip.
pub fn decode_apng(bytes: &[u8]) -> Result<(Clip<RgbaFrame>, ApngTimingInfo)> {
    let chunks = parse_chunks(bytes)?;
    let mut iter = chunks.iter();
    let header = match iter.next() {
        Some(Chunk { ty, data }) if *ty == IHDR => Header::decode(data)?,
        Some(c) => return Err(Error::format(format!("first chunk is {}, expected IHDR", chunk_name(&c.ty)))),
        None => return Err(Error::format("no chunks")),
    };

    let mut actl: Option<(u32, u32)> = None;
    let mut next_sequence = 0u32;
    let mut check_sequence = |seq: u32, what: &str| {
        if seq != next_sequence {
            return Err(Error::format(format!(
                "{what} sequence number {seq}, expected {next_sequence} (gap or out of order)"
            )));
        }
        next_sequence += 1;
        Ok(())
    };

    let mut default_image = Vec::new();
    let mut default_in_animation = false;
    let mut seen_idat = false;
    let mut frames: Vec<PendingFrame> = Vec::new();
    let mut current: Option<PendingFrame> = None;

    for chunk in iter {
        match chunk.ty {
            ACTL => {
                if seen_idat || actl.is_some() {
                    return Err(Error::format("acTL must appear once, before IDAT"));
                }
                if chunk.data.len() != 8 {
                    return Err(Error::format("acTL length must be 8"));
                }
                let n = u32::from_be_bytes(chunk.data[..4].try_into().unwrap());
                let plays = u32::from_be_bytes(chunk.data[4..].try_into().unwrap());
                if n == 0 {
                    return Err(Error::format("acTL: num_frames is 0"));
                }
                actl = Some((n, plays));
            }
            FCTL => {
                if actl.is_none() {
                    return Err(Error::format("fcTL without preceding acTL"));
                }
                let (seq, control) = FrameControl::decode(chunk.data)?;
                check_sequence(seq, "fcTL")?;
                let fits = |off: u32, len: u32, max: u32| len > 0 && off.checked_add(len).is_some_and(|e| e <= max);
                if !fits(control.x_offset, control.width, header.width)
                    || !fits(control.y_offset, control.height, header.height)
                {
                    return Err(Error::format(format!("fcTL {seq}: frame region leaves the canvas")));
                }
                if frames.is_empty()
                    && current.is_none()
                    && (control.width, control.height, control.x_offset, control.y_offset)
                        != (header.width, header.height, 0, 0)
                {
                    return Err(Error::format("first fcTL must cover the full canvas"));
                }
                if !seen_idat && current.is_none() && frames.is_empty() {
                    default_in_animation = true;
                }
                if let Some(done) = current.take() {
                    frames.push(done);
                }
                current = Some(PendingFrame {
                    control,
                    data: Vec::new(),
                });
            }
            IDAT => {
                seen_idat = true;
                default_image.extend_from_slice(chunk.data);
                if default_in_animation {
                    if let Some(cur) = current.as_mut() {
                        cur.data.extend_from_slice(chunk.data);
                    }
                }
            }
            FDAT => {
                if chunk.data.len() < 4 {
                    return Err(Error::format("fdAT shorter than its sequence number"));
                }
                let seq = u32::from_be_bytes(chunk.data[..4].try_into().unwrap());
                check_sequence(seq, "fdAT")?;
                match current.as_mut() {
                    Some(cur) if seen_idat => cur.data.extend_from_slice(&chunk.data[4..]),
                    _ => return Err(Error::format(format!("fdAT {seq} without a frame to belong to"))),
                }
            }
            _ => {}
        }
    }
    if let Some(done) = current.take() {
        frames.push(done);
    }
    if !seen_idat {
        return Err(Error::format("no IDAT chunk"));
    }

    let rate_meta = |delays: &[(u16, u16)]| delays.first().copied().map(rate_for_delay).unwrap_or_default();

    let Some((num_frames, num_plays)) = actl else {
        let pixels = decompress_image(&default_image, header.width, header.height, header.color)?;
        let frame = RgbaFrame::new(header.width, header.height, to_rgba(&pixels, header.color))?;
        let clip = Clip::new(vec![frame], FrameRate::default())?;
        let timing = ApngTimingInfo {
            num_frames: 1,
            num_plays: 0,
            delays: vec![],
        };
        return Ok((clip, timing));
    };
    if frames.len() != num_frames as usize {
        return Err(Error::format(format!(
            "acTL declares {num_frames} frames, file has {}",
            frames.len()
        )));
    }

    let mut canvas = Canvas {
        width: header.width,
        height: header.height,
        rgba: vec![0; header.width as usize * header.height as usize * 4],
    };
    let mut out = Vec::with_capacity(frames.len());
    let mut delays = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let c = &f.control;
        if f.data.is_empty() {
            return Err(Error::format(format!("frame {i} has no image data")));
        }
        let pixels = decompress_image(&f.data, c.width, c.height, header.color)?;
        let pixels = to_rgba(&pixels, header.color);
        let saved = (c.dispose == DisposeOp::Previous).then(|| canvas.rgba.clone());
        canvas.apply(c, &pixels);
        out.push(RgbaFrame::new(canvas.width, canvas.height, canvas.rgba.clone())?);
        delays.push(c.delay());
        match (c.dispose, saved) {
            (DisposeOp::None, _) => {}
            // Previous on the first frame behaves like Background.
            (DisposeOp::Background, _) => canvas.clear(c),
            (DisposeOp::Previous, _) if i == 0 => canvas.clear(c),
            (DisposeOp::Previous, Some(saved)) => canvas.restore(c, &saved),
            (DisposeOp::Previous, None) => unreachable!(),
        }
    }
    let clip = Clip::new(out, rate_meta(&delays))?;
    Ok((
        clip,
        ApngTimingInfo {
            num_frames,
            num_plays,
            delays,
        },
    ))
}

pub fn read_apng(path: impl AsRef<Path>) -> Result<(Clip<RgbaFrame>, ApngTimingInfo)> {
    let path = path.as_ref();
    decode_apng(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::png::decode_png;

    fn clip(n: usize, rate: FrameRate) -> Clip<RgbaFrame> {
        let frames = (0..n)
            .map(|i| RgbaFrame::new(3, 2, (0..24).map(|v| (v * 11 + i * 50) as u8).collect()).unwrap())
            .collect();
        Clip::new(frames, rate).unwrap()
    }

    #[test]
    fn round_trip_with_timing() {
        let c = clip(3, FrameRate::new(30, 1).unwrap());
        let bytes = encode_apng(&c, 0, &EncodeOptions::default()).unwrap();
        let (back, timing) = decode_apng(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(timing.num_frames, 3);
        assert_eq!(timing.delays, vec![(1, 30); 3]);
    }

    #[test]
    fn single_frame_is_also_plain_png() {
        let c = clip(1, FrameRate::default());
        let bytes = encode_apng(&c, 0, &EncodeOptions::default()).unwrap();
        assert_eq!(decode_png(&bytes).unwrap(), c.frames()[0]);
    }

    #[test]
    fn plain_png_is_one_frame_clip() {
        let f = clip(1, FrameRate::default()).frames()[0].clone();
        let bytes = crate::codec::png::encode_png(&f, &EncodeOptions::default());
        let (back, _) = decode_apng(&bytes).unwrap();
        assert_eq!(back.frames(), &[f]);
    }

    #[test]
    fn delay_arithmetic() {
        assert_eq!(delay_for_rate(FrameRate::new(30, 1).unwrap()).unwrap(), (1, 30));
        assert_eq!(delay_for_rate(FrameRate::new(60, 2).unwrap()).unwrap(), (1, 30));
        assert_eq!(delay_for_rate(FrameRate::new(30000, 1001).unwrap()).unwrap(), (1001, 30000));
        assert!(matches!(
            delay_for_rate(FrameRate::new(100_000, 1).unwrap()),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(rate_for_delay((1001, 30000)), FrameRate::new(30000, 1001).unwrap());
        assert_eq!(rate_for_delay((0, 30)), FrameRate::default());
    }

    #[test]
    fn blend_over_rules() {
        let mut d = [10, 20, 30, 255];
        blend_over(&mut d, &[200, 200, 200, 0]);
        assert_eq!(d, [10, 20, 30, 255]);
        blend_over(&mut d, &[200, 100, 0, 255]);
        assert_eq!(d, [200, 100, 0, 255]);
        let mut d = [0, 0, 0, 255];
        blend_over(&mut d, &[255, 255, 255, 51]);
        // u = 51*255, v = 204*255: c = 255*51/255 = 51, a = 255
        assert_eq!(d, [51, 51, 51, 255]);
    }
}
