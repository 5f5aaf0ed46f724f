//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::io::Cursor;

use alphacloak::{Clip, FrameRate, RgbFrame, RgbaFrame};
use rand::rngs::StdRng;
use rand::Rng;

/// A frame as seen by the `png` crate, expanded to 8-bit RGBA.
pub struct RefFrame {
    pub width: u32,
    pub height: u32,
    pub x_offset: u32,
    pub y_offset: u32,
    pub delay: (u16, u16),
    pub rgba: Vec<u8>,
}

fn to_rgba(color: png::ColorType, raw: &[u8]) -> Vec<u8> {
    match color {
        png::ColorType::Rgba => raw.to_vec(),
        png::ColorType::Rgb => raw.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect(),
        png::ColorType::Grayscale => raw.iter().flat_map(|&v| [v, v, v, 255]).collect(),
        png::ColorType::GrayscaleAlpha => raw.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0], p[1]]).collect(),
        other => panic!("unexpected color type {other:?}"),
    }
}

/// Decodes every frame (sub-images, not composited) with the `png` crate.
pub fn reference_decode(bytes: &[u8]) -> Result<Vec<RefFrame>, png::DecodingError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let count = reader.info().animation_control().map_or(1, |a| a.num_frames);
    let mut out = Vec::new();
    let mut buf = vec![0; reader.output_buffer_size().expect("buffer size")];
    for _ in 0..count {
        let info = reader.next_frame(&mut buf)?;
        let fc = reader.info().frame_control();
        let raw = &buf[..info.line_size * info.height as usize];
        out.push(RefFrame {
            width: info.width,
            height: info.height,
            x_offset: fc.map_or(0, |f| f.x_offset),
            y_offset: fc.map_or(0, |f| f.y_offset),
            delay: fc.map_or((0, 0), |f| (f.delay_num, f.delay_den)),
            rgba: to_rgba(info.color_type, raw),
        });
    }
    // Reading to the end also validates the trailing chunks.
    reader.finish()?;
    Ok(out)
}

pub fn random_rgba(rng: &mut StdRng, w: u32, h: u32) -> RgbaFrame {
    let mut data = vec![0u8; (w * h * 4) as usize];
    if rng.random_bool(0.5) {
        rng.fill(&mut data[..]);
    } else {
        // Smooth content exercises the predictive filters.
        let (a, b, c) = (rng.random_range(0..8u32), rng.random_range(0..8u32), rng.random::<u8>());
        for (i, v) in data.iter_mut().enumerate() {
            let px = i as u32 / 4;
            let (x, y) = (px % w, px / w);
            *v = (x * a + y * b + (i as u32 % 4) * 40) as u8 ^ c;
        }
    }
    RgbaFrame::new(w, h, data).unwrap()
}

pub fn random_rgb(rng: &mut StdRng, w: u32, h: u32) -> RgbFrame {
    let mut data = vec![0u8; (w * h * 3) as usize];
    rng.fill(&mut data[..]);
    RgbFrame::new(w, h, data).unwrap()
}

pub fn random_rgb_clip(rng: &mut StdRng, w: u32, h: u32, n: usize) -> Clip<RgbFrame> {
    let frames = (0..n).map(|_| random_rgb(rng, w, h)).collect();
    Clip::new(frames, FrameRate::new(rng.random_range(1..=60), 1).unwrap()).unwrap()
}

pub fn random_rgba_clip(rng: &mut StdRng, w: u32, h: u32, n: usize) -> Clip<RgbaFrame> {
    let frames = (0..n).map(|_| random_rgba(rng, w, h)).collect();
    Clip::new(frames, FrameRate::new(rng.random_range(1..=60), 1).unwrap()).unwrap()
}

/// Axis-aligned rectangle moving linearly across frames, drawn in one of
/// the horizontal bands of the canvas so objects never touch.
pub struct MovingRect {
    pub band: u32,
    pub x0: u32,
    pub dx: i32,
    pub w: u32,
    pub h: u32,
    pub label: &'static str,
}

pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub rects: Vec<MovingRect>,
    pub bands: u32,
}

impl Scene {
    pub fn random(rng: &mut StdRng, width: u32, height: u32, frames: u32) -> Self {
        let bands = 3;
        let band_h = height / bands;
        let n = rng.random_range(1..=bands);
        let mut used: Vec<u32> = (0..bands).collect();
        let rects = (0..n)
            .map(|_| {
                let band = used.remove(rng.random_range(0..used.len()));
                let w = rng.random_range(6..width / 3);
                MovingRect {
                    band,
                    x0: rng.random_range(0..width - w - 2 * frames),
                    dx: rng.random_range(0..=2),
                    w,
                    h: rng.random_range(4..band_h - 1),
                    label: if rng.random_bool(0.7) { "Car" } else { "Pedestrian" },
                }
            })
            .collect();
        Self { width, height, frames, rects, bands }
    }

    /// (left, top, right, bottom) in continuous pixel-edge coordinates.
    pub fn rect_at(&self, r: &MovingRect, t: u32) -> (u32, u32, u32, u32) {
        let band_h = self.height / self.bands;
        let x = (r.x0 as i64 + i64::from(r.dx) * i64::from(t)) as u32;
        let y = r.band * band_h + 1;
        (x, y, x + r.w, y + r.h)
    }

    /// White objects on black.
    pub fn render(&self) -> Clip<RgbFrame> {
        let frames = (0..self.frames)
            .map(|t| {
                let mut data = vec![0u8; (self.width * self.height * 3) as usize];
                for r in &self.rects {
                    let (l, tp, rt, b) = self.rect_at(r, t);
                    for y in tp..b {
                        for x in l..rt {
                            let i = ((y * self.width + x) * 3) as usize;
                            data[i..i + 3].fill(255);
                        }
                    }
                }
                RgbFrame::new(self.width, self.height, data).unwrap()
            })
            .collect();
        Clip::new(frames, FrameRate::new(10, 1).unwrap()).unwrap()
    }

    pub fn labels(&self, id: &str) -> alphacloak::VideoLabels {
        let mut v = alphacloak::VideoLabels::new(id);
        for t in 0..self.frames {
            let boxes = self
                .rects
                .iter()
                .map(|r| {
                    let (l, tp, rt, b) = self.rect_at(r, t);
                    alphacloak::BoundingBox::ground_truth(l.into(), tp.into(), rt.into(), b.into(), r.label).unwrap()
                })
                .collect();
            v.frames.insert(t, boxes);
        }
        v
    }
}

/// Toy detector: threshold the luma of an RGB frame and box each
/// 4-connected bright component.
pub fn blob_detect(frame: &RgbFrame, threshold: u8) -> Vec<alphacloak::BoundingBox> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let bright: Vec<bool> = frame
        .pixels()
        .map(|[r, g, b]| (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) > f64::from(threshold))
        .collect();
    let mut seen = vec![false; w * h];
    let mut boxes = Vec::new();
    for start in 0..w * h {
        if !bright[start] || seen[start] {
            continue;
        }
        let (mut l, mut t, mut r, mut b) = (usize::MAX, usize::MAX, 0, 0);
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            (l, t, r, b) = (l.min(x), t.min(y), r.max(x), b.max(y));
            let mut push = |j: usize| {
                if bright[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        boxes.push(
            alphacloak::BoundingBox::new(l as f64, t as f64, (r + 1) as f64, (b + 1) as f64, "blob", 1.0).unwrap(),
        );
    }
    boxes
}
