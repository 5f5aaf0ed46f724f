//! Attribution with a toy detector run on the alpha-dropped frames.

mod common;

use std::collections::BTreeMap;

use alphacloak::compositor::{composite_clip, drop_alpha_clip};
use alphacloak::metrics::{attribute, AttributionOptions};
use alphacloak::{generate_fused_clip, BackgroundColor, FrameDetections, FuseOptions, FusionParams};
use common::{blob_detect, Scene};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn detect(clip: &alphacloak::Clip<alphacloak::RgbFrame>) -> Vec<FrameDetections> {
    clip.frames()
        .iter()
        .enumerate()
        .map(|(i, f)| FrameDetections { frame_index: i as u32, boxes: blob_detect(f, 200) })
        .collect()
}

#[test]
fn blob_detector_sees_the_target_clip() {
    let mut rng = StdRng::seed_from_u64(21);
    let (w, h, n) = (96, 60, 8);
    for _ in 0..5 {
        let benign = Scene::random(&mut rng, w, h, n);
        let target = Scene::random(&mut rng, w, h, n);
        let fused =
            generate_fused_clip(&benign.render(), &target.render(), &FusionParams::new(w, h), &FuseOptions::default())
                .unwrap();
        let candidates: BTreeMap<_, _> =
            [("benign".to_string(), benign.labels("benign")), ("target".to_string(), target.labels("target"))].into();

        // Machine path: the target's objects are lifted to 255 over a 102 background.
        let machine = detect(&drop_alpha_clip(&fused));
        let r = attribute("fused", &machine, &candidates, n, &AttributionOptions::default()).unwrap();
        assert_eq!(r.top1, "target");
        assert_eq!(r.per_candidate["target"], 1.0);
        assert!(r.per_candidate["benign"] < 1.0);

        // Over black the viewer sees the benign objects dimmed to 102, so
        // stretch them back to full brightness before detecting.
        let human = composite_clip(&fused, BackgroundColor::BLACK);
        let lifted = human
            .map(|f| {
                let data = f.data().iter().map(|&v| if v >= 100 { 255 } else { 0 }).collect();
                alphacloak::RgbFrame::new(f.width(), f.height(), data).unwrap()
            })
            .unwrap();
        let r = attribute("viewer", &detect(&lifted), &candidates, n, &AttributionOptions::default()).unwrap();
        assert_eq!(r.top1, "benign");
    }
}
