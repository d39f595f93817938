//! Optimized operators against the direct reference implementations.

use domainscope_core::vision::{
    canny_gradients, fast_keypoints, highfreq_energy_ratio, laplacian, non_max_suppression, sobel_gradients,
    GrayImage,
};
use domainscope_testkit::{oracle, random_gray, to_grid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn image(seed: u64, w: usize, h: usize) -> GrayImage {
    random_gray(&mut ChaCha8Rng::seed_from_u64(seed), w, h)
}

fn flat(grid: &oracle::Grid) -> Vec<f64> {
    grid.iter().flatten().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sobel_and_laplacian_match_reference(seed: u64, w in 3usize..=32, h in 3usize..=32) {
        let img = image(seed, w, h);
        let grid = to_grid(&img);
        let g = sobel_gradients(&img).unwrap();
        let (gx, gy) = oracle::sobel(&grid);
        prop_assert_eq!(g.gx, flat(&gx));
        prop_assert_eq!(g.gy, flat(&gy));
        prop_assert_eq!(laplacian(&img).unwrap(), flat(&oracle::laplacian(&grid)));
    }

    #[test]
    fn canny_suppression_matches_reference(seed: u64, w in 3usize..=32, h in 3usize..=32) {
        let img = image(seed, w, h);
        let nms = non_max_suppression(&canny_gradients(&img, 1.4).unwrap());
        prop_assert_eq!(nms, flat(&oracle::canny_nms(&to_grid(&img), 1.4)));
    }

    #[test]
    fn fast_matches_reference(seed: u64, w in 7usize..=32, h in 7usize..=32, t in 5.0f64..60.0) {
        let img = image(seed, w, h);
        let got: Vec<(usize, usize, f64)> =
            fast_keypoints(&img, t).unwrap().into_iter().map(|k| (k.x, k.y, k.score)).collect();
        prop_assert_eq!(got, oracle::fast_keypoints(&to_grid(&img), t));
    }

    #[test]
    fn spectral_ratio_matches_direct_dft(seed: u64, w in 2usize..=24, h in 2usize..=24, cutoff in 0.05f64..0.95) {
        let img = image(seed, w, h);
        let got = highfreq_energy_ratio(&img, cutoff).unwrap();
        let want = oracle::highfreq_ratio(&to_grid(&img), cutoff);
        prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-12) + 1e-12, "{} vs {}", got, want);
    }
}

#[test]
fn fast_on_plateau_corner() {
    // Symmetric block: equal neighbouring scores fall back to raster order.
    let img = GrayImage::from_fn(15, 15, |x, y| if (6..9).contains(&x) && (6..9).contains(&y) { 200.0 } else { 0.0 })
        .unwrap();
    let got: Vec<(usize, usize, f64)> =
        fast_keypoints(&img, 20.0).unwrap().into_iter().map(|k| (k.x, k.y, k.score)).collect();
    assert_eq!(got, oracle::fast_keypoints(&to_grid(&img), 20.0));
}
