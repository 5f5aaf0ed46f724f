//! The two ways a fused clip gets consumed: a player blends it over its
//! background color, a detector pipeline strips the alpha channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{dequantize, quantize_clamped, Clip, GrayFrame, RgbFrame, RgbaFrame};
use crate::fusion::FusionParams;
use crate::presets::BackgroundColor;

/// Default verification tolerance in 8-bit levels.
pub const DEFAULT_TOLERANCE: u8 = 2;

/// Straight-alpha "over" onto an opaque background, in normalized space,
/// quantized once at the end.
pub fn composite(frame: &RgbaFrame, bg: BackgroundColor) -> RgbFrame {
    let bg = [bg.r, bg.g, bg.b].map(dequantize);
    let data = frame
        .pixels()
        .flat_map(|[r, g, b, a]| {
            let a = dequantize(a);
            let mut out = [0u8; 3];
            for (o, (c, bgc)) in out.iter_mut().zip([r, g, b].into_iter().zip(bg)) {
                *o = quantize_clamped(a * dequantize(c) + (1.0 - a) * bgc);
            }
            out
        })
        .collect();
    RgbFrame::new(frame.width(), frame.height(), data).expect("dimensions carried over")
}

pub fn drop_alpha(frame: &RgbaFrame) -> RgbFrame {
    let data = frame.pixels().flat_map(|[r, g, b, _]| [r, g, b]).collect();
    RgbFrame::new(frame.width(), frame.height(), data).expect("dimensions carried over")
}

pub fn composite_clip(clip: &Clip<RgbaFrame>, bg: BackgroundColor) -> Clip<RgbFrame> {
    clip.map(|f| composite(f, bg)).expect("dimensions carried over")
}

pub fn drop_alpha_clip(clip: &Clip<RgbaFrame>) -> Clip<RgbFrame> {
    clip.map(drop_alpha).expect("dimensions carried over")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub frames: usize,
    pub max_abs_error_human: u8,
    pub max_abs_error_machine: u8,
    /// Infinite (serialized as null) when the paths match exactly.
    pub psnr_human: f64,
    pub psnr_machine: f64,
    pub tolerance: u8,
    pub pass: bool,
}

#[derive(Default)]
struct ErrorStats {
    max: u8,
    sq_sum: f64,
    n: usize,
}

impl ErrorStats {
    fn push(&mut self, got: u8, want: u8) {
        let d = got.abs_diff(want);
        self.max = self.max.max(d);
        self.sq_sum += f64::from(d) * f64::from(d);
        self.n += 1;
    }

    fn psnr(&self) -> f64 {
        if self.sq_sum == 0.0 || self.n == 0 {
            return f64::INFINITY;
        }
        let mse = self.sq_sum / self.n as f64;
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Checks that a fused clip shows the dimmed benign clip when composited
/// over black and the lifted target clip when alpha is dropped.
///
/// The prepared clips are the gray frames the fusion consumed.
pub fn verify_round_trip(
    fused: &Clip<RgbaFrame>,
    v_true_prepared: &Clip<GrayFrame>,
    v_fake_prepared: &Clip<GrayFrame>,
    params: &FusionParams,
    tolerance: u8,
) -> Result<VerificationReport> {
    let dims = |m: &crate::frame::ClipMeta| (m.width, m.height, m.frame_count);
    let want = dims(fused.meta());
    for (name, clip) in [("benign", v_true_prepared), ("target", v_fake_prepared)] {
        if dims(clip.meta()) != want {
            let (w, h, n) = dims(clip.meta());
            return Err(Error::shape(format!(
                "{name} clip is {w}x{h}x{n}, fused clip is {}x{}x{}",
                want.0, want.1, want.2
            )));
        }
    }

    let mut human = ErrorStats::default();
    let mut machine = ErrorStats::default();
    for ((f, t), k) in fused
        .frames()
        .iter()
        .zip(v_true_prepared.frames())
        .zip(v_fake_prepared.frames())
    {
        let seen = composite(f, BackgroundColor::BLACK);
        let stripped = drop_alpha(f);
        for (i, (&tv, &kv)) in t.data().iter().zip(k.data()).enumerate() {
            let want_h = quantize_clamped(params.dimmed_true(tv));
            let want_m = quantize_clamped(params.lifted_fake(kv));
            for c in 0..3 {
                human.push(seen.data()[i * 3 + c], want_h);
                machine.push(stripped.data()[i * 3 + c], want_m);
            }
        }
    }

    Ok(VerificationReport {
        frames: fused.len(),
        max_abs_error_human: human.max,
        max_abs_error_machine: machine.max,
        psnr_human: human.psnr(),
        psnr_machine: machine.psnr(),
        tolerance,
        pass: human.max <= tolerance && machine.max <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameRate;
    use crate::fusion::fuse_frames;
    use proptest::prelude::*;

    #[test]
    fn opaque_frame_passes_through() {
        let f = RgbaFrame::new(2, 1, vec![10, 20, 30, 255, 200, 100, 0, 255]).unwrap();
        for bg in [BackgroundColor::BLACK, BackgroundColor::WHITE, BackgroundColor::GREY] {
            assert_eq!(composite(&f, bg), drop_alpha(&f));
        }
    }

    #[test]
    fn transparent_frame_shows_background() {
        let f = RgbaFrame::filled(3, 2, [200, 10, 99, 0]).unwrap();
        assert_eq!(
            composite(&f, BackgroundColor::new(128, 128, 128)),
            RgbFrame::filled(3, 2, [128, 128, 128]).unwrap()
        );
    }

    #[test]
    fn fused_pixel_over_black() {
        // 73/255 * 179 = 51.24
        let f = RgbaFrame::filled(1, 1, [179, 179, 179, 73]).unwrap();
        assert_eq!(composite(&f, BackgroundColor::BLACK).pixel(0, 0), [51, 51, 51]);
    }

    #[test]
    fn drop_alpha_projects() {
        let f = RgbaFrame::new(2, 1, vec![179, 179, 179, 73, 255, 255, 255, 0]).unwrap();
        assert_eq!(drop_alpha(&f).data(), &[179, 179, 179, 255, 255, 255]);
    }

    fn clip_of(frames: Vec<GrayFrame>) -> Clip<GrayFrame> {
        Clip::new(frames, FrameRate::default()).unwrap()
    }

    #[test]
    fn black_benign_verifies_exactly() {
        let t = clip_of(vec![GrayFrame::filled(3, 3, 0.0).unwrap(); 2]);
        let k = clip_of(vec![GrayFrame::filled(3, 3, 0.8).unwrap(); 2]);
        let params = FusionParams::new(3, 3);
        let fused = Clip::new(
            t.frames()
                .iter()
                .zip(k.frames())
                .map(|(a, b)| fuse_frames(a, b, &params).unwrap())
                .collect(),
            FrameRate::default(),
        )
        .unwrap();
        assert!(composite(&fused.frames()[0], BackgroundColor::BLACK)
            .data()
            .iter()
            .all(|&v| v == 0));
        let report = verify_round_trip(&fused, &t, &k, &params, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.max_abs_error_human, 0);
        assert_eq!(report.max_abs_error_machine, 0);
        assert!(report.psnr_human.is_infinite());
        assert!(report.pass);
        assert_eq!(report, verify_round_trip(&fused, &t, &k, &params, DEFAULT_TOLERANCE).unwrap());
    }

    #[test]
    fn verify_rejects_shape_mismatch() {
        let t = clip_of(vec![GrayFrame::filled(3, 3, 0.2).unwrap()]);
        let k = clip_of(vec![GrayFrame::filled(3, 2, 0.2).unwrap()]);
        let params = FusionParams::new(3, 3);
        let fused = Clip::new(
            vec![fuse_frames(&t.frames()[0], &t.frames()[0], &params).unwrap()],
            FrameRate::default(),
        )
        .unwrap();
        assert!(matches!(
            verify_round_trip(&fused, &t, &k, &params, 2),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tight_tolerance_can_fail() {
        // A perturbed payload must be caught.
        let t = clip_of(vec![GrayFrame::filled(1, 1, 0.5).unwrap()]);
        let params = FusionParams::new(1, 1);
        let mut px = fuse_frames(&t.frames()[0], &t.frames()[0], &params).unwrap().pixel(0, 0);
        px[0] += 5;
        let fused = Clip::new(vec![RgbaFrame::new(1, 1, px.to_vec()).unwrap()], FrameRate::default()).unwrap();
        let report = verify_round_trip(&fused, &t, &t, &params, 2).unwrap();
        assert_eq!(report.max_abs_error_machine, 5);
        assert!(!report.pass);
        assert!(report.psnr_machine.is_finite());
    }

    proptest! {
        #[test]
        fn composite_between_payload_and_background(
            px in proptest::array::uniform4(any::<u8>()),
            bg in proptest::array::uniform3(any::<u8>()),
        ) {
            let f = RgbaFrame::new(1, 1, px.to_vec()).unwrap();
            let out = composite(&f, BackgroundColor::new(bg[0], bg[1], bg[2])).pixel(0, 0);
            for c in 0..3 {
                let (lo, hi) = (px[c].min(bg[c]), px[c].max(bg[c]));
                prop_assert!((lo..=hi).contains(&out[c]));
            }
        }

        #[test]
        fn human_and_machine_paths(t in 0.0f64..=1.0, k in 0.0f64..=1.0) {
            let params = FusionParams::new(1, 1);
            let f = fuse_frames(&GrayFrame::filled(1, 1, t).unwrap(), &GrayFrame::filled(1, 1, k).unwrap(), &params).unwrap();
            let seen = composite(&f, BackgroundColor::BLACK).pixel(0, 0)[0];
            let stripped = drop_alpha(&f).pixel(0, 0)[0];
            prop_assert!(seen.abs_diff(quantize_clamped(0.4 * t)) <= 2);
            prop_assert!(stripped.abs_diff(quantize_clamped(0.6 * k + 0.4)) <= 1);
        }
    }
}
