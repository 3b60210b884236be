#![allow(dead_code)]

use eigensal::{BinaryMap, Plane, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> Plane<f64> {
    Plane::from_fn(h, w, |_, _| rng.gen_range(lo..hi))
}

pub fn random_unit_planes(rng: &mut ChaCha8Rng, k: usize, h: usize, w: usize) -> Vec<Plane<f64>> {
    (0..k).map(|_| random_plane(rng, h, w, 0.0, 1.0)).collect()
}

/// Correlated colour noise: a random mix of three independent fields plus
/// a smooth gradient, so the covariance has distinct eigenvalues.
pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> RgbImage<f64> {
    let mix: [[f64; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(0.1..1.0)));
    let fields: Vec<[f64; 3]> = (0..h * w)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let tilt: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    RgbImage::from_fn(h, w, |y, x| {
        let f = fields[y * w + x];
        let ramp = (y as f64 / h as f64 - 0.5) + (x as f64 / w as f64 - 0.5);
        std::array::from_fn(|c| {
            let v = mix[c][0] * f[0] + mix[c][1] * f[1] + mix[c][2] * f[2] + tilt[c] * ramp;
            127.5 + 60.0 * v
        })
    })
}

/// Flat background with an axis-aligned coloured box; returns the image and its mask.
pub fn box_scene(
    h: usize,
    w: usize,
    bg: [f64; 3],
    fg: [f64; 3],
    top: usize,
    left: usize,
    bh: usize,
    bw: usize,
) -> (RgbImage<f64>, BinaryMap) {
    let inside = move |y: usize, x: usize| y >= top && y < top + bh && x >= left && x < left + bw;
    let img = RgbImage::from_fn(h, w, |y, x| if inside(y, x) { fg } else { bg });
    (img, BinaryMap::from_fn(h, w, inside))
}

pub fn rel_err(a: &Plane<f64>, b: &Plane<f64>) -> f64 {
    let scale = b
        .as_slice()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    a.max_abs_diff(b) / scale
}

/// Cyclic Jacobi rotations on a symmetric 3x3 matrix; returns eigenvalues
/// and eigenvectors (columns), unsorted.
pub fn jacobi3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 * (a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2)).max(1e-300) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

pub fn covariance(img: &RgbImage<f64>) -> [[f64; 3]; 3] {
    let n = img.r.len();
    let ch = [img.r.as_slice(), img.g.as_slice(), img.b.as_slice()];
    let mean: Vec<f64> = ch
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = (0..n)
                .map(|k| (ch[i][k] - mean[i]) * (ch[j][k] - mean[j]))
                .sum::<f64>()
                / (n - 1) as f64;
        }
    }
    cov
}

/// Smooth low-texture background with one rectangle or ellipse covering
/// roughly `area_lo..area_hi` of the frame, plus mild pixel noise.
pub fn synthetic_scene(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    area_lo: f64,
    area_hi: f64,
) -> (RgbImage<f64>, BinaryMap) {
    let bg: [f64; 3] = std::array::from_fn(|_| rng.gen_range(60.0..190.0));
    let tilt: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-25.0..25.0));
    let fg: [f64; 3] = loop {
        let c: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..255.0));
        if (0..3).map(|i| (c[i] - bg[i]).abs()).sum::<f64>() > 120.0 {
            break c;
        }
    };
    let area = rng.gen_range(area_lo..area_hi) * (h * w) as f64;
    let aspect = rng.gen_range(0.6..1.6);
    let ellipse = rng.gen_bool(0.5);
    // ellipse area is pi/4 of its bounding box
    let box_area = if ellipse {
        area * 4.0 / std::f64::consts::PI
    } else {
        area
    };
    let bh = (box_area / aspect).sqrt().min(h as f64 - 4.0);
    let bw = (box_area / bh).min(w as f64 - 4.0);
    let cy = rng.gen_range(bh / 2.0 + 1.0..h as f64 - bh / 2.0 - 1.0);
    let cx = rng.gen_range(bw / 2.0 + 1.0..w as f64 - bw / 2.0 - 1.0);
    let inside = move |y: usize, x: usize| {
        let dy = (y as f64 + 0.5 - cy) / (bh / 2.0);
        let dx = (x as f64 + 0.5 - cx) / (bw / 2.0);
        if ellipse {
            dy * dy + dx * dx <= 1.0
        } else {
            dy.abs() <= 1.0 && dx.abs() <= 1.0
        }
    };
    let noise: Vec<[f64; 3]> = (0..h * w)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-6.0..6.0)))
        .collect();
    let img = RgbImage::from_fn(h, w, |y, x| {
        let ramp = y as f64 / h as f64 - 0.5;
        let n = noise[y * w + x];
        std::array::from_fn(|c| {
            if inside(y, x) {
                fg[c] + n[c]
            } else {
                bg[c] + tilt[c] * ramp + n[c]
            }
        })
    });
    (img, BinaryMap::from_fn(h, w, inside))
}
