mod common;

use eigensal::eval::binarize_mean;
use eigensal::imagekit::{reflect_index, rgb_pixel_to_lab};
use eigensal::methods::{
    ft_pca_mpcnn_saliency, ft_saliency, proposed_trace, run_method, wt_baseline_saliency,
    ColorSpace,
};
use eigensal::mpcnn::mpcnn_fuse;
use eigensal::pca::{channel_weights, fit_pca, project_all};
use eigensal::wavelet::{channel_feature_maps, conspicuity_map};
use eigensal::{Error, MethodId, Plane, RgbImage, SaliencyConfig, WaveletBasis};

/// Direct 2-D Gaussian convolution with half-sample mirrored borders.
fn blur_oracle(p: &Plane<f64>, sigma: f64) -> Plane<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut w = 0.0;
    let mut weights = vec![];
    for dy in -r..=r {
        for dx in -r..=r {
            let k = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            weights.push((dy, dx, k));
            w += k;
        }
    }
    let (h, wd) = p.dims();
    Plane::from_fn(h, wd, |y, x| {
        weights
            .iter()
            .map(|&(dy, dx, k)| {
                k * p[(
                    reflect_index(y as isize + dy, h),
                    reflect_index(x as isize + dx, wd),
                )]
            })
            .sum::<f64>()
            / w
    })
}

fn unit(p: &Plane<f64>) -> Plane<f64> {
    let (lo, hi) = (p.min(), p.max());
    if hi == lo {
        return Plane::zeros(p.height(), p.width());
    }
    p.map(|v| (v - lo) / (hi - lo))
}

fn blur_image(img: &RgbImage<f64>, sigma: f64) -> RgbImage<f64> {
    RgbImage {
        r: blur_oracle(&img.r, sigma),
        g: blur_oracle(&img.g, sigma),
        b: blur_oracle(&img.b, sigma),
    }
}

fn lab_planes(img: &RgbImage<f64>) -> Vec<Plane<f64>> {
    let (h, w) = img.dims();
    (0..3)
        .map(|c| Plane::from_fn(h, w, |y, x| rgb_pixel_to_lab(img.pixel(y, x))[c]))
        .collect()
}

#[test]
fn wt_baseline_matches_straight_line_oracle() {
    let mut rng = common::rng(51);
    let img = common::random_image(&mut rng, 33, 41);
    let cfg = SaliencyConfig::<f64>::default();
    let got = wt_baseline_saliency(&img, &cfg).unwrap();

    let lab = lab_planes(&blur_image(&img, 1.0));
    let maps: Vec<Vec<Plane<f64>>> = lab
        .iter()
        .map(|c| channel_feature_maps(c, WaveletBasis::Db4).unwrap())
        .collect();
    let total = Plane::from_fn(33, 41, |y, x| {
        (0..maps[0].len())
            .map(|s| maps.iter().map(|m| m[s][(y, x)]).fold(f64::MIN, f64::max))
            .sum()
    });
    let want = unit(&blur_oracle(&total, 0.02 * 41.0));
    assert!(got.max_abs_diff(&want) < 1e-9);
}

#[test]
fn ft_matches_brute_force_oracle() {
    let mut rng = common::rng(52);
    let img = common::random_image(&mut rng, 20, 27);
    let got = ft_saliency(&img, &SaliencyConfig::default()).unwrap();
    let lab = lab_planes(&blur_image(&img, 1.0));
    let means: Vec<f64> = lab
        .iter()
        .map(|p| p.as_slice().iter().sum::<f64>() / p.len() as f64)
        .collect();
    let dist = Plane::from_fn(20, 27, |y, x| {
        (0..3)
            .map(|c| (lab[c][(y, x)] - means[c]).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    assert!(got.max_abs_diff(&unit(&dist)) < 1e-9);
}

#[test]
fn ft_pca_mpcnn_fuses_mean_contrast_components() {
    let mut rng = common::rng(53);
    let img = common::random_image(&mut rng, 24, 30);
    let cfg = SaliencyConfig::<f64>::default();
    let got = ft_pca_mpcnn_saliency(&img, &cfg).unwrap();
    let smooth = blur_image(&img, 1.0);
    let basis = fit_pca(&smooth).unwrap();
    let comps = project_all(&smooth, &basis).unwrap();
    let inputs: Vec<Plane<f64>> = comps
        .iter()
        .map(|c| {
            let m = c.as_slice().iter().sum::<f64>() / c.len() as f64;
            unit(&c.map(|v| (v - m).abs()))
        })
        .collect();
    let want = mpcnn_fuse(
        &inputs,
        &channel_weights(&basis),
        &cfg.pcnn_params().unwrap(),
    )
    .unwrap();
    assert!(got.max_abs_diff(&want) < 1e-9);
}

#[test]
fn proposed_trace_composes_the_stages() {
    let mut rng = common::rng(54);
    let img = common::random_image(&mut rng, 32, 40);
    let cfg = SaliencyConfig::<f64>::default();
    let tr = proposed_trace(&img, &cfg).unwrap();
    let smooth = blur_image(&img, 1.0);
    let basis = fit_pca(&smooth).unwrap();
    let comps = project_all(&smooth, &basis).unwrap();
    for i in 0..3 {
        assert!(tr.components[i].max_abs_diff(&comps[i]) < 1e-9);
        let c = conspicuity_map(&comps[i], cfg.wavelet).unwrap();
        assert!(tr.conspicuity[i].max_abs_diff(&c) < 1e-9);
        assert_eq!(tr.feature_maps[i].len(), 5);
    }
    let w = channel_weights(&basis);
    for i in 0..3 {
        assert!((tr.weights[i] - w[i]).abs() < 1e-12);
    }
    let fused = mpcnn_fuse(&tr.conspicuity, &tr.weights, &cfg.pcnn_params().unwrap()).unwrap();
    assert_eq!(fused, tr.saliency);
}

#[test]
fn proposed_ignores_global_affine_intensity_change() {
    let mut rng = common::rng(55);
    let img = common::random_image(&mut rng, 40, 48);
    let moved = img.map_channels(|p| p.map(|v| 0.6 * v + 40.0));
    let cfg = SaliencyConfig::<f64>::default();
    for id in [MethodId::Proposed, MethodId::FtPcaMpcnn] {
        let a = run_method(id, &img, &cfg).unwrap();
        let b = run_method(id, &moved, &cfg).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9, "{id}");
    }
}

#[test]
fn proposed_is_flip_equivariant_with_haar() {
    let mut rng = common::rng(56);
    let img = common::random_image(&mut rng, 64, 64);
    let cfg = SaliencyConfig::<f64> {
        wavelet: WaveletBasis::Haar,
        ..SaliencyConfig::default()
    };
    let a = run_method(MethodId::Proposed, &img, &cfg).unwrap();
    let b = run_method(MethodId::Proposed, &img.flip_horizontal(), &cfg).unwrap();
    assert!(a.flip_horizontal().max_abs_diff(&b) < 1e-9);
}

#[test]
fn every_method_returns_a_normalized_map_of_input_size() {
    let mut rng = common::rng(57);
    let img = common::random_image(&mut rng, 30, 45);
    let cfg = SaliencyConfig::<f64>::default();
    for id in MethodId::ALL {
        let s = run_method(id, &img, &cfg).unwrap();
        assert_eq!(s.dims(), (30, 45));
        assert_eq!((s.min(), s.max()), (0.0, 1.0), "{id}");
        assert_eq!(s, run_method(id, &img, &cfg).unwrap(), "{id}");
    }
}

#[test]
fn constant_images_give_zero_maps() {
    let cfg = SaliencyConfig::<f64>::default();
    for rgb in [[0.0; 3], [255.0; 3], [12.0, 200.0, 77.0]] {
        let img = RgbImage::uniform(32, 24, rgb);
        for id in MethodId::ALL {
            let s = run_method(id, &img, &cfg).unwrap();
            assert_eq!(s.max(), 0.0, "{id} {rgb:?}");
            assert_eq!(s.min(), 0.0, "{id} {rgb:?}");
        }
    }
}

#[test]
fn rgb_baseline_space_is_selectable() {
    let (img, _) = common::box_scene(
        40,
        40,
        [30.0, 30.0, 30.0],
        [30.0, 30.0, 230.0],
        10,
        10,
        16,
        16,
    );
    let mut cfg = SaliencyConfig::<f64>::default();
    let lab = wt_baseline_saliency(&img, &cfg).unwrap();
    cfg.baseline_space = ColorSpace::Rgb;
    let rgb = wt_baseline_saliency(&img, &cfg).unwrap();
    assert!(lab.max_abs_diff(&rgb) > 1e-6);
}

#[test]
fn contrasting_box_is_found_by_mean_contrast_methods() {
    let (img, mask) = common::box_scene(64, 64, [120.0; 3], [200.0, 60.0, 60.0], 20, 24, 18, 14);
    let cfg = SaliencyConfig::<f64>::default();
    for id in [MethodId::Ft, MethodId::FtPcaMpcnn] {
        let iou = binarize_mean(&run_method(id, &img, &cfg).unwrap()).iou(&mask);
        assert!(iou > 0.7, "{id}: {iou}");
    }
}

#[test]
fn small_images_and_bad_configs_are_rejected() {
    let img = RgbImage::<f64>::uniform(15, 40, [1.0, 2.0, 3.0]);
    let cfg = SaliencyConfig::<f64>::default();
    for id in [MethodId::Proposed, MethodId::WtBaseline] {
        assert!(matches!(
            run_method(id, &img, &cfg),
            Err(Error::ImageTooSmall { min: 16, .. })
        ));
    }
    let img = RgbImage::<f64>::uniform(20, 20, [1.0, 2.0, 3.0]);
    let bad = SaliencyConfig::<f64> {
        blur_sigma: 0.0,
        ..SaliencyConfig::default()
    };
    assert!(matches!(
        run_method(MethodId::Ft, &img, &bad),
        Err(Error::NonPositiveSigma(_))
    ));
    let bad = SaliencyConfig::<f64> {
        kernel_radius: 0,
        ..SaliencyConfig::default()
    };
    assert!(matches!(
        run_method(MethodId::Proposed, &img, &bad),
        Err(Error::NonPositiveRadius)
    ));
    let bad = SaliencyConfig::<f64> {
        n_iter: 0,
        ..SaliencyConfig::default()
    };
    assert!(matches!(
        run_method(MethodId::FtPcaMpcnn, &img, &bad),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn f32_pipelines_run() {
    let mut rng = common::rng(58);
    let img = common::random_image(&mut rng, 32, 32);
    let img32 = RgbImage::<f32>::from_fn(32, 32, |y, x| img.pixel(y, x).map(|v| v as f32));
    let cfg64 = SaliencyConfig::<f64>::default();
    let cfg32 = SaliencyConfig::<f32>::default();
    for id in MethodId::ALL {
        let s = run_method(id, &img32, &cfg32).unwrap();
        assert!(s.is_finite());
        assert_eq!((s.min(), s.max()), (0.0, 1.0), "{id}");
        let d = run_method(id, &img, &cfg64).unwrap();
        let mean_gap = s
            .as_slice()
            .iter()
            .zip(d.as_slice())
            .map(|(&a, &b)| (a as f64 - b).abs())
            .sum::<f64>()
            / s.len() as f64;
        assert!(mean_gap < 1e-2, "{id}: {mean_gap}");
    }
}
