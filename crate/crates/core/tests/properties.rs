mod common;

use matx_core::evaluation::{cosine_similarity, psnr, PSNR_CAP_DB};
use matx_core::generation::{GenerationParams, MaterialExemplar, Pipeline};
use matx_core::imaging::{
    compose_init_image, feather_support, normalize_depth, to_grayscale, ForegroundMask, InitMode, RasterImage,
    ScalarField,
};
use matx_core::session::{ExemplarHints, SessionState, StepStatus};
use proptest::prelude::*;

fn image_strategy(max: u32) -> impl Strategy<Value = RasterImage> {
    (1..=max, 1..=max, prop_oneof![Just(3u8), Just(4u8)]).prop_flat_map(|(w, h, c)| {
        proptest::collection::vec(any::<u8>(), (w * h * c as u32) as usize)
            .prop_map(move |bytes| RasterImage::from_u8(w, h, c, &bytes).unwrap())
    })
}

fn soft_mask_for(w: u32, h: u32) -> impl Strategy<Value = ForegroundMask> {
    proptest::collection::vec(0.0f32..=1.0, (w * h) as usize).prop_map(move |v| ForegroundMask::new(w, h, v).unwrap())
}

fn oracle_composite(image: &RasterImage, mask: &ForegroundMask) -> Vec<f32> {
    let mut out = Vec::new();
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.pixel(x, y);
            let f = mask.get(x, y) as f64;
            let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            for &c in &p[..3] {
                out.push((f * l + (1.0 - f) * c as f64) as f32);
            }
            if p.len() == 4 {
                out.push(p[3]);
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn composite_matches_oracle(
        (image, mask) in image_strategy(12).prop_flat_map(|img| {
            let (w, h) = img.extent();
            (Just(img), soft_mask_for(w, h))
        })
    ) {
        let out = compose_init_image(&image, &mask, InitMode::ForegroundGrayscale, 0).unwrap();
        prop_assert_eq!(out.data(), &oracle_composite(&image, &mask)[..]);
    }

    #[test]
    fn composite_endpoints(image in image_strategy(10)) {
        let (w, h) = image.extent();
        let zero = compose_init_image(&image, &ForegroundMask::empty(w, h).unwrap(), InitMode::ForegroundGrayscale, 0).unwrap();
        prop_assert_eq!(&zero, &image);
        let one = compose_init_image(&image, &ForegroundMask::full(w, h).unwrap(), InitMode::ForegroundGrayscale, 0).unwrap();
        let gray = to_grayscale(&image).unwrap();
        for (px, &g) in one.pixels().zip(gray.values()) {
            prop_assert_eq!(&px[..3], &[g, g, g][..]);
        }
    }

    #[test]
    fn composite_is_idempotent(
        (image, mask) in image_strategy(10).prop_flat_map(|img| {
            let (w, h) = img.extent();
            (Just(img), soft_mask_for(w, h))
        })
    ) {
        let binary = ForegroundMask::from_binary(&mask.binary_view());
        let once = compose_init_image(&image, &binary, InitMode::ForegroundGrayscale, 0).unwrap();
        let twice = compose_init_image(&once, &binary, InitMode::ForegroundGrayscale, 0).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn depth_normalization_is_affine_invariant(
        values in proptest::collection::vec(-50.0f32..50.0, 16),
        scale in 0.1f32..10.0,
        shift in -20.0f32..20.0,
    ) {
        let span = values.iter().cloned().fold(f32::MIN, f32::max) - values.iter().cloned().fold(f32::MAX, f32::min);
        prop_assume!(span > 1e-2);
        let a = normalize_depth(&ScalarField::new(4, 4, values.clone()).unwrap()).unwrap();
        let moved: Vec<f32> = values.iter().map(|v| v * scale + shift).collect();
        let b = normalize_depth(&ScalarField::new(4, 4, moved).unwrap()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-3);
            prop_assert!((0.0..=1.0).contains(x));
        }
    }

    #[test]
    fn psnr_is_symmetric_and_capped(
        (a, b) in image_strategy(8).prop_flat_map(|img| {
            let (w, h) = img.extent();
            let c = img.channels();
            (Just(img), proptest::collection::vec(any::<u8>(), (w * h * c as u32) as usize)
                .prop_map(move |bytes| RasterImage::from_u8(w, h, c, &bytes).unwrap()))
        })
    ) {
        let ab = psnr(&a, &b).unwrap();
        prop_assert_eq!(ab, psnr(&b, &a).unwrap());
        prop_assert!((0.0..=PSNR_CAP_DB).contains(&ab));
    }

    #[test]
    fn cosine_is_bounded(
        a in proptest::collection::vec(-1e3f64..1e3, 1..32),
        b_seed in proptest::collection::vec(-1e3f64..1e3, 32),
    ) {
        let b = &b_seed[..a.len()];
        if let Ok(c) = cosine_similarity(&a, b) {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn reorder_never_moves_done_steps(
        n in 1usize..6,
        done in 0usize..6,
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let done = done.min(n);
        let perm: Vec<usize> = perm.into_iter().filter(|&i| i < n).collect();
        let mut s = SessionState::new("base");
        for i in 0..n {
            s.add_step(format!("m{i}"), "e", ExemplarHints::default(), GenerationParams::with_seed(i as u64)).unwrap();
        }
        for st in s.plan.steps.iter_mut().take(done) {
            st.status = StepStatus::Done;
            st.result = Some("r".into());
        }
        let before = s.clone();
        let moves_done = perm.iter().enumerate().any(|(new, &old)| new != old && (old < done || new < done));
        match s.reorder_steps(&perm) {
            Ok(()) => {
                prop_assert!(!moves_done);
                for (new, &old) in perm.iter().enumerate() {
                    prop_assert_eq!(&s.plan.steps[new], &before.plan.steps[old]);
                }
            }
            Err(_) => {
                prop_assert!(moves_done);
                prop_assert_eq!(&s, &before);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn background_outside_support_is_preserved(
        seed in any::<u64>(),
        x0 in 0u32..20, y0 in 0u32..20, w in 1u32..12, h in 1u32..12,
        feather in 0u32..5,
        img_seed in any::<u64>(),
    ) {
        let mut rng = common::rng(img_seed);
        let input = common::random_image(&mut rng, 32, 32);
        let mask = common::rect_mask(32, 32, x0, y0, x0 + w, y0 + h);
        let exemplar = MaterialExemplar::new(common::random_image(&mut rng, 8, 8));
        let params = GenerationParams { seed, feather, working_size: 32, ..Default::default() };
        let out = Pipeline::mock().transfer_material(&input, &mask, &exemplar, &params).unwrap();
        let support = feather_support(&mask, feather);
        for (i, (o, p)) in out.image.pixels().zip(input.pixels()).enumerate() {
            if !support.bits()[i] {
                prop_assert_eq!(o, p);
            }
        }
    }
}
