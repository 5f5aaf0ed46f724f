//! Frame fusion: builds RGBA frames whose alpha carries the benign content
//! and whose gray RGB payload carries the target content.
//!
//! Per pixel, with `t = true * true_scale` and `k = fake * fake_scale +
//! fake_offset`, the fused pixel is `(k, k, k, t / k)` quantized to 8 bits.
//! Compositing over black gives back `t`; dropping alpha leaves `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{quantize_clamped, resize, to_grayscale, Clip, FrameRate, GrayFrame, ResizeFilter, RgbFrame, RgbaFrame};

pub const DEFAULT_TRUE_SCALE: f64 = 0.4;
pub const DEFAULT_FAKE_SCALE: f64 = 0.6;
pub const DEFAULT_FAKE_OFFSET: f64 = 0.4;

// Slack for sums like fake_scale + fake_offset that are 1 up to rounding.
const BOUND_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub true_scale: f64,
    pub fake_scale: f64,
    pub fake_offset: f64,
    pub target_width: u32,
    pub target_height: u32,
}

impl FusionParams {
    /// Default intensity constants at the given output size.
    pub fn new(target_width: u32, target_height: u32) -> Self {
        Self {
            true_scale: DEFAULT_TRUE_SCALE,
            fake_scale: DEFAULT_FAKE_SCALE,
            fake_offset: DEFAULT_FAKE_OFFSET,
            target_width,
            target_height,
        }
    }

    /// Checks `0 < true_scale <= fake_offset`, `fake_scale > 0` and
    /// `fake_scale + fake_offset <= 1`, which together keep `t / k` in
    /// `[0, 1]` for every input pair.
    pub fn validate(&self) -> Result<()> {
        let Self {
            true_scale,
            fake_scale,
            fake_offset,
            ..
        } = *self;
        if ![true_scale, fake_scale, fake_offset].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("fusion parameters must be finite"));
        }
        if true_scale <= 0.0 {
            return Err(Error::invalid(format!("true_scale {true_scale} must be > 0")));
        }
        if true_scale > fake_offset {
            return Err(Error::invalid(format!(
                "true_scale {true_scale} exceeds fake_offset {fake_offset}; alpha could leave [0, 1]"
            )));
        }
        if fake_scale <= 0.0 {
            return Err(Error::invalid(format!("fake_scale {fake_scale} must be > 0")));
        }
        if fake_scale + fake_offset > 1.0 + BOUND_EPS {
            return Err(Error::invalid(format!(
                "fake_scale + fake_offset = {} exceeds 1",
                fake_scale + fake_offset
            )));
        }
        if self.target_width == 0 || self.target_height == 0 {
            return Err(Error::invalid(format!(
                "target size {}x{} must be positive",
                self.target_width, self.target_height
            )));
        }
        Ok(())
    }

    /// Largest alpha level a fused pixel can take.
    pub fn max_alpha(&self) -> u8 {
        quantize_clamped(self.true_scale / self.fake_offset)
    }

    /// Smallest RGB level a fused pixel can take.
    pub fn min_payload(&self) -> u8 {
        quantize_clamped(self.fake_offset)
    }

    pub(crate) fn dimmed_true(&self, v: f64) -> f64 {
        v * self.true_scale
    }

    pub(crate) fn lifted_fake(&self, v: f64) -> f64 {
        v * self.fake_scale + self.fake_offset
    }
}

/// Fuses one benign/target frame pair into an RGBA frame.
pub fn fuse_frames(f_true: &GrayFrame, f_fake: &GrayFrame, params: &FusionParams) -> Result<RgbaFrame> {
    params.validate()?;
    fuse_unchecked(f_true, f_fake, params)
}

fn fuse_unchecked(f_true: &GrayFrame, f_fake: &GrayFrame, params: &FusionParams) -> Result<RgbaFrame> {
    if (f_true.width(), f_true.height()) != (f_fake.width(), f_fake.height()) {
        return Err(Error::shape(format!(
            "benign frame is {}x{}, target frame is {}x{}",
            f_true.width(),
            f_true.height(),
            f_fake.width(),
            f_fake.height()
        )));
    }
    let data = f_true
        .data()
        .iter()
        .zip(f_fake.data())
        .flat_map(|(&t, &f)| {
            let t = params.dimmed_true(t);
            let k = params.lifted_fake(f);
            let c = quantize_clamped(k);
            [c, c, c, quantize_clamped(t / k)]
        })
        .collect();
    RgbaFrame::new(f_true.width(), f_true.height(), data)
}

/// Resizes and converts one frame to the normalized gray domain.
pub fn prepare_frame(frame: &RgbFrame, width: u32, height: u32, filter: ResizeFilter) -> Result<GrayFrame> {
    Ok(to_grayscale(&resize(frame, width, height, filter)?))
}

/// Resizes every frame of a clip to `width` x `height` and converts to gray.
pub fn prepare_clip(clip: &Clip<RgbFrame>, width: u32, height: u32, filter: ResizeFilter) -> Result<Clip<GrayFrame>> {
    let frames = clip
        .frames()
        .par_iter()
        .map(|f| prepare_frame(f, width, height, filter))
        .collect::<Result<Vec<_>>>()?;
    Clip::with_dimensions(width, height, clip.meta().frame_rate, frames)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FuseOptions {
    pub filter: ResizeFilter,
    /// Output frame rate; the benign clip's rate when unset.
    pub frame_rate: Option<FrameRate>,
}

/// Fuses two clips frame by frame. The output has
/// `min(v_true.len(), v_fake.len())` frames at the target size.
pub fn generate_fused_clip(
    v_true: &Clip<RgbFrame>,
    v_fake: &Clip<RgbFrame>,
    params: &FusionParams,
    options: &FuseOptions,
) -> Result<Clip<RgbaFrame>> {
    params.validate()?;
    if v_true.is_empty() || v_fake.is_empty() {
        return Err(Error::invalid(format!(
            "cannot fuse empty clips (benign {} frames, target {} frames)",
            v_true.len(),
            v_fake.len()
        )));
    }
    let (w, h) = (params.target_width, params.target_height);
    let count = v_true.len().min(v_fake.len());
    let frames = v_true.frames()[..count]
        .par_iter()
        .zip(&v_fake.frames()[..count])
        .map(|(t, f)| {
            let t = prepare_frame(t, w, h, options.filter)?;
            let f = prepare_frame(f, w, h, options.filter)?;
            fuse_unchecked(&t, &f, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = options.frame_rate.unwrap_or(v_true.meta().frame_rate);
    Clip::with_dimensions(w, h, rate, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(v: f64) -> GrayFrame {
        GrayFrame::filled(1, 1, v).unwrap()
    }

    #[test]
    fn mid_gray_pixel() {
        let out = fuse_frames(&gray(0.5), &gray(0.5), &FusionParams::new(1, 1)).unwrap();
        assert_eq!(out.pixel(0, 0), [179, 179, 179, 73]);
    }

    #[test]
    fn black_benign_is_transparent() {
        for f in [0.0, 0.3, 1.0] {
            let out = fuse_frames(&gray(0.0), &gray(f), &FusionParams::new(1, 1)).unwrap();
            assert_eq!(out.pixel(0, 0)[3], 0);
        }
    }

    #[test]
    fn white_pair() {
        let out = fuse_frames(&gray(1.0), &gray(1.0), &FusionParams::new(1, 1)).unwrap();
        assert_eq!(out.pixel(0, 0), [255, 255, 255, 102]);
    }

    #[test]
    fn black_target_keeps_offset() {
        // k = fake_offset, never zero.
        let out = fuse_frames(&gray(1.0), &gray(0.0), &FusionParams::new(1, 1)).unwrap();
        assert_eq!(out.pixel(0, 0), [102, 102, 102, 255]);
    }

    #[test]
    fn shape_mismatch() {
        let a = GrayFrame::filled(2, 2, 0.1).unwrap();
        let b = GrayFrame::filled(2, 3, 0.1).unwrap();
        assert!(matches!(
            fuse_frames(&a, &b, &FusionParams::new(2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn param_validation() {
        let ok = FusionParams::new(4, 4);
        assert!(ok.validate().is_ok());
        let bad = [
            FusionParams { fake_offset: 0.3, ..ok },
            FusionParams { true_scale: 0.0, ..ok },
            FusionParams { fake_scale: 0.0, ..ok },
            FusionParams { fake_scale: 0.7, ..ok },
            FusionParams { true_scale: f64::NAN, ..ok },
            FusionParams { target_width: 0, ..ok },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(Error::InvalidArgument(_))), "{p:?}");
        }
        assert_eq!(ok.max_alpha(), 255);
        assert_eq!(ok.min_payload(), 102);
    }

    fn mid_gray_clip(frames: usize, w: u32, h: u32) -> Clip<RgbFrame> {
        let f = RgbFrame::filled(w, h, [128, 128, 128]).unwrap();
        Clip::new(vec![f; frames], FrameRate::new(25, 1).unwrap()).unwrap()
    }

    #[test]
    fn clip_length_is_minimum() {
        let a = mid_gray_clip(10, 4, 3);
        let b = mid_gray_clip(7, 4, 3).with_frame_rate(FrameRate::new(60, 1).unwrap());
        let out = generate_fused_clip(&a, &b, &FusionParams::new(4, 3), &FuseOptions::default()).unwrap();
        assert_eq!(out.len(), 7);
        assert_eq!(out.meta().frame_count, 7);
        assert_eq!(out.meta().frame_rate, FrameRate::new(25, 1).unwrap());

        let opts = FuseOptions {
            frame_rate: Some(FrameRate::new(12, 1).unwrap()),
            ..Default::default()
        };
        let out = generate_fused_clip(&a, &b, &FusionParams::new(4, 3), &opts).unwrap();
        assert_eq!(out.meta().frame_rate.num, 12);
    }

    #[test]
    fn constant_clip_replicates_pixel_result() {
        let a = mid_gray_clip(2, 3, 2);
        let out = generate_fused_clip(&a, &a, &FusionParams::new(6, 4), &FuseOptions::default()).unwrap();
        let g = to_grayscale(&RgbFrame::filled(1, 1, [128, 128, 128]).unwrap()).data()[0];
        let expected = fuse_frames(&gray(g), &gray(g), &FusionParams::new(1, 1)).unwrap().pixel(0, 0);
        for f in out.frames() {
            assert_eq!((f.width(), f.height()), (6, 4));
            assert!(f.pixels().all(|p| p == expected));
        }
    }

    #[test]
    fn clip_at_target_size_equals_direct_fusion() {
        let t = RgbFrame::new(2, 1, vec![10, 20, 30, 200, 100, 50]).unwrap();
        let f = RgbFrame::new(2, 1, vec![255, 0, 0, 0, 0, 255]).unwrap();
        let rate = FrameRate::default();
        let out = generate_fused_clip(
            &Clip::new(vec![t.clone()], rate).unwrap(),
            &Clip::new(vec![f.clone()], rate).unwrap(),
            &FusionParams::new(2, 1),
            &FuseOptions::default(),
        )
        .unwrap();
        let direct = fuse_frames(&to_grayscale(&t), &to_grayscale(&f), &FusionParams::new(2, 1)).unwrap();
        assert_eq!(out.frames()[0], direct);
    }

    #[test]
    fn empty_clip_rejected() {
        let a = mid_gray_clip(2, 2, 2);
        let empty = Clip::<RgbFrame>::with_dimensions(2, 2, FrameRate::default(), vec![]).unwrap();
        assert!(matches!(
            generate_fused_clip(&a, &empty, &FusionParams::new(2, 2), &FuseOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn gray_pair() -> impl Strategy<Value = (GrayFrame, GrayFrame)> {
        (1u32..8, 1u32..8).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                proptest::collection::vec(0.0f64..=1.0, n),
                proptest::collection::vec(0.0f64..=1.0, n),
            )
                .prop_map(move |(a, b)| (GrayFrame::new(w, h, a).unwrap(), GrayFrame::new(w, h, b).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn fused_pixels_respect_identities((t, f) in gray_pair()) {
            let params = FusionParams::new(t.width(), t.height());
            let out = fuse_frames(&t, &f, &params).unwrap();
            prop_assert_eq!(&out, &fuse_frames(&t, &f, &params).unwrap());
            for (i, [r, g, b, a]) in out.pixels().enumerate() {
                prop_assert!(r == g && g == b);
                prop_assert!(a <= params.max_alpha() && r >= params.min_payload());
                let product = crate::frame::dequantize(a) * crate::frame::dequantize(r);
                prop_assert!(product <= 102.0 / 255.0 + 1.5 / 255.0);
                prop_assert!((product - t.data()[i] * 0.4).abs() <= 2.0 / 255.0);
            }
        }
    }
}
