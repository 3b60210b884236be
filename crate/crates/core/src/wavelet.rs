//! Multilevel separable 2-D discrete wavelet transform and the wavelet
//! conspicuity map built from per-level detail energy.
//!
//! Analysis uses half-sample symmetric extension. A level maps a length-`n`
//! signal to `floor((n + L - 1) / 2)` coefficients per band for a filter of
//! length `L` (`ceil(n / 2)` for Haar); synthesis evaluates the orthogonal
//! filter bank only at the original sample positions, which reproduces the
//! input exactly for any length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imagekit::{gaussian_blur, normalize_to, normalize_unit, reflect_index};
use crate::{Error, Plane, Result, Scalar};

/// Deepest decomposition ever used.
pub const MAX_LEVEL_CAP: usize = 8;

/// Gaussian smoothing sigma of a conspicuity map, as a fraction of the larger image side.
pub const SMOOTHING_FRACTION: f64 = 0.02;

const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

const DB2: [f64; 4] = [
    0.482_962_913_144_534_143_4,
    0.836_516_303_737_807_905_6,
    0.224_143_868_042_013_381_0,
    -0.129_409_522_551_260_381_2,
];

const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_9,
    0.714_846_570_552_915_647_1,
    0.630_880_767_929_858_907_9,
    -0.027_983_769_416_859_854_2,
    -0.187_034_811_719_093_084_1,
    0.030_841_381_835_560_763_6,
    0.032_883_011_666_885_199_7,
    -0.010_597_401_785_069_032_1,
];

/// Orthonormal Daubechies family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletBasis {
    Haar,
    Db2,
    #[default]
    Db4,
}

impl WaveletBasis {
    pub const ALL: [WaveletBasis; 3] = [WaveletBasis::Haar, WaveletBasis::Db2, WaveletBasis::Db4];

    /// Scaling (lowpass) filter taps.
    pub fn scaling_taps(self) -> &'static [f64] {
        match self {
            WaveletBasis::Haar => &HAAR,
            WaveletBasis::Db2 => &DB2,
            WaveletBasis::Db4 => &DB4,
        }
    }

    /// Decomposition filter pair `(lowpass, highpass)`: the time-reversed
    /// scaling taps and their alternating flip `(-1)^(j+1) h[j]`.
    pub fn analysis_taps(self) -> (Vec<f64>, Vec<f64>) {
        let h = self.scaling_taps();
        let lo = h.iter().rev().copied().collect();
        let hi = h
            .iter()
            .enumerate()
            .map(|(j, &v)| if j % 2 == 0 { -v } else { v })
            .collect();
        (lo, hi)
    }

    pub fn filter_len(self) -> usize {
        self.scaling_taps().len()
    }

    /// Coefficient count per band produced from a length-`n` signal.
    pub fn coeff_len(self, n: usize) -> usize {
        (n + self.filter_len() - 1) / 2
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveletBasis::Haar => "haar",
            WaveletBasis::Db2 => "db2",
            WaveletBasis::Db4 => "db4",
        }
    }
}

impl fmt::Display for WaveletBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletBasis::Haar),
            "db2" => Ok(WaveletBasis::Db2),
            "db4" => Ok(WaveletBasis::Db4),
            _ => Err(Error::UnknownName {
                kind: "wavelet",
                value: s.to_string(),
            }),
        }
    }
}

/// Detail bands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands<T> {
    /// Highpass along rows, lowpass along columns.
    pub horizontal: Plane<T>,
    /// Lowpass along rows, highpass along columns.
    pub vertical: Plane<T>,
    pub diagonal: Plane<T>,
}

impl<T: Scalar> DetailBands<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.horizontal.dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid<T> {
    pub basis: WaveletBasis,
    /// Approximation at the coarsest level.
    pub approx: Plane<T>,
    /// `details[s - 1]` holds level `s`, finest first.
    pub details: Vec<DetailBands<T>>,
    /// `shapes[s - 1]` is the size of the signal level `s` decomposed.
    pub shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> WaveletPyramid<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn original_dims(&self) -> (usize, usize) {
        self.shapes[0]
    }

    fn check_structure(&self) -> Result<()> {
        if self.details.is_empty() || self.shapes.len() != self.details.len() {
            return Err(Error::InvalidPlane("pyramid has no levels".into()));
        }
        for (lvl, (det, &(h, w))) in self.details.iter().zip(&self.shapes).enumerate() {
            let expected = (self.basis.coeff_len(h), self.basis.coeff_len(w));
            for band in [&det.horizontal, &det.vertical, &det.diagonal] {
                if band.dims() != expected {
                    return Err(Error::ShapeMismatch {
                        expected,
                        found: band.dims(),
                    });
                }
            }
            if lvl + 1 < self.shapes.len() && self.shapes[lvl + 1] != expected {
                return Err(Error::ShapeMismatch {
                    expected,
                    found: self.shapes[lvl + 1],
                });
            }
        }
        let coarsest = self.details.last().expect("non-empty").dims();
        if self.approx.dims() != coarsest {
            return Err(Error::ShapeMismatch {
                expected: coarsest,
                found: self.approx.dims(),
            });
        }
        Ok(())
    }
}

/// `min(8, floor(log2(min(height, width))))`.
pub fn max_levels(height: usize, width: usize) -> Result<usize> {
    let side = height.min(width);
    if side < 2 {
        return Err(Error::ImageTooSmall {
            height,
            width,
            min: 2,
        });
    }
    Ok((side.ilog2() as usize).min(MAX_LEVEL_CAP))
}

struct Filters<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> Filters<T> {
    fn new(basis: WaveletBasis) -> Self {
        let (lo, hi) = basis.analysis_taps();
        Self {
            lo: lo.into_iter().map(T::lit).collect(),
            hi: hi.into_iter().map(T::lit).collect(),
        }
    }

    /// `lo[i] = sum_j h[j] x~[2i+1-j]`, likewise for `hi`.
    fn analyze(&self, x: &[T], lo: &mut [T], hi: &mut [T]) {
        let n = x.len();
        for i in 0..lo.len() {
            let base = 2 * i as isize + 1;
            let mut a = T::zero();
            let mut d = T::zero();
            for (j, (&hj, &gj)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[reflect_index(base - j as isize, n)];
                a = a + hj * v;
                d = d + gj * v;
            }
            lo[i] = a;
            hi[i] = d;
        }
    }

    /// `x[n] = sum_i lo[i] h[2i+1-n] + hi[i] g[2i+1-n]` over the stored coefficients.
    fn synthesize(&self, lo: &[T], hi: Option<&[T]>, out: &mut [T]) {
        let f = self.lo.len();
        let m = lo.len();
        for (n, o) in out.iter_mut().enumerate() {
            let first = n / 2;
            let last = ((n + f - 2) / 2).min(m - 1);
            let mut acc = T::zero();
            for i in first..=last {
                let j = 2 * i + 1 - n;
                acc = acc + lo[i] * self.lo[j];
                if let Some(hi) = hi {
                    acc = acc + hi[i] * self.hi[j];
                }
            }
            *o = acc;
        }
    }
}

fn analyze_rows<T: Scalar>(p: &Plane<T>, flt: &Filters<T>, m: usize) -> (Plane<T>, Plane<T>) {
    let (h, _) = p.dims();
    let mut lo = Plane::zeros(h, m);
    let mut hi = Plane::zeros(h, m);
    for y in 0..h {
        let (l, r) = (
            &mut lo.as_mut_slice()[y * m..(y + 1) * m],
            &mut hi.as_mut_slice()[y * m..(y + 1) * m],
        );
        flt.analyze(p.row(y), l, r);
    }
    (lo, hi)
}

fn analyze_cols<T: Scalar>(p: &Plane<T>, flt: &Filters<T>, m: usize) -> (Plane<T>, Plane<T>) {
    let (h, w) = p.dims();
    let mut lo = Plane::zeros(m, w);
    let mut hi = Plane::zeros(m, w);
    let mut col = vec![T::zero(); h];
    let mut l = vec![T::zero(); m];
    let mut r = vec![T::zero(); m];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = p[(y, x)];
        }
        flt.analyze(&col, &mut l, &mut r);
        for i in 0..m {
            lo[(i, x)] = l[i];
            hi[(i, x)] = r[i];
        }
    }
    (lo, hi)
}

fn synthesize_cols<T: Scalar>(
    lo: &Plane<T>,
    hi: Option<&Plane<T>>,
    flt: &Filters<T>,
    h: usize,
) -> Plane<T> {
    let (m, w) = lo.dims();
    let mut out = Plane::zeros(h, w);
    let mut l = vec![T::zero(); m];
    let mut r = vec![T::zero(); m];
    let mut col = vec![T::zero(); h];
    for x in 0..w {
        for i in 0..m {
            l[i] = lo[(i, x)];
            if let Some(hi) = hi {
                r[i] = hi[(i, x)];
            }
        }
        flt.synthesize(&l, hi.map(|_| r.as_slice()), &mut col);
        for (y, &c) in col.iter().enumerate() {
            out[(y, x)] = c;
        }
    }
    out
}

fn synthesize_rows<T: Scalar>(
    lo: &Plane<T>,
    hi: Option<&Plane<T>>,
    flt: &Filters<T>,
    w: usize,
) -> Plane<T> {
    let (h, _) = lo.dims();
    let mut out = Plane::zeros(h, w);
    for y in 0..h {
        let dst = &mut out.as_mut_slice()[y * w..(y + 1) * w];
        flt.synthesize(lo.row(y), hi.map(|p| p.row(y)), dst);
    }
    out
}

/// One analysis level: `(approx, details)`.
fn analyze_level<T: Scalar>(
    p: &Plane<T>,
    basis: WaveletBasis,
    flt: &Filters<T>,
) -> (Plane<T>, DetailBands<T>) {
    let (h, w) = p.dims();
    let (lo_x, hi_x) = analyze_rows(p, flt, basis.coeff_len(w));
    let mh = basis.coeff_len(h);
    let (approx, vertical) = analyze_cols(&lo_x, flt, mh);
    let (horizontal, diagonal) = analyze_cols(&hi_x, flt, mh);
    (
        approx,
        DetailBands {
            horizontal,
            vertical,
            diagonal,
        },
    )
}

/// One synthesis level back to `out` dims; `None` details are treated as zero.
fn synthesize_level<T: Scalar>(
    approx: Option<&Plane<T>>,
    det: Option<&DetailBands<T>>,
    coeff_dims: (usize, usize),
    out: (usize, usize),
    flt: &Filters<T>,
) -> Plane<T> {
    let zero = Plane::zeros(coeff_dims.0, coeff_dims.1);
    let approx = approx.unwrap_or(&zero);
    let lo_x = synthesize_cols(approx, det.map(|d| &d.vertical), flt, out.0);
    let hi_x = match det {
        Some(d) => Some(synthesize_cols(
            &d.horizontal,
            Some(&d.diagonal),
            flt,
            out.0,
        )),
        None => None,
    };
    synthesize_rows(&lo_x, hi_x.as_ref(), flt, out.1)
}

/// Multilevel forward transform; the approximation of each level feeds the next.
pub fn dwt2<T: Scalar>(
    p: &Plane<T>,
    levels: usize,
    basis: WaveletBasis,
) -> Result<WaveletPyramid<T>> {
    let max = max_levels(p.height(), p.width())?;
    if levels == 0 || levels > max {
        return Err(Error::TooManyLevels {
            requested: levels,
            max,
        });
    }
    let flt = Filters::new(basis);
    let mut details = Vec::with_capacity(levels);
    let mut shapes = Vec::with_capacity(levels);
    let mut current = p.clone();
    for _ in 0..levels {
        shapes.push(current.dims());
        let (approx, det) = analyze_level(&current, basis, &flt);
        details.push(det);
        current = approx;
    }
    Ok(WaveletPyramid {
        basis,
        approx: current,
        details,
        shapes,
    })
}

/// Full synthesis back to the original dimensions.
pub fn idwt2<T: Scalar>(pyr: &WaveletPyramid<T>) -> Result<Plane<T>> {
    pyr.check_structure()?;
    let flt = Filters::new(pyr.basis);
    let mut current = pyr.approx.clone();
    for s in (0..pyr.levels()).rev() {
        let det = &pyr.details[s];
        current = synthesize_level(Some(&current), Some(det), det.dims(), pyr.shapes[s], &flt);
    }
    Ok(current)
}

/// Synthesizes the given level's details alone (`None` = approximation
/// alone) back to full resolution, without squaring.
pub fn band_reconstruction<T: Scalar>(
    pyr: &WaveletPyramid<T>,
    level: Option<usize>,
) -> Result<Plane<T>> {
    pyr.check_structure()?;
    let flt = Filters::new(pyr.basis);
    let levels = pyr.levels();
    let start = match level {
        Some(s) if s == 0 || s > levels => {
            return Err(Error::LevelOutOfRange { level: s, levels });
        }
        Some(s) => s,
        None => levels,
    };
    let coarse = &pyr.details[start - 1];
    let mut current = match level {
        Some(_) => synthesize_level(
            None,
            Some(coarse),
            coarse.dims(),
            pyr.shapes[start - 1],
            &flt,
        ),
        None => synthesize_level(
            Some(&pyr.approx),
            None,
            coarse.dims(),
            pyr.shapes[start - 1],
            &flt,
        ),
    };
    for s in (0..start - 1).rev() {
        current = synthesize_level(
            Some(&current),
            None,
            pyr.details[s].dims(),
            pyr.shapes[s],
            &flt,
        );
    }
    Ok(current)
}

/// Squared full-resolution reconstruction of level `s` details alone.
pub fn feature_map<T: Scalar>(pyr: &WaveletPyramid<T>, s: usize) -> Result<Plane<T>> {
    Ok(band_reconstruction(pyr, Some(s))?.map(|v| v * v))
}

/// Feature maps of every level, finest first.
pub fn feature_maps<T: Scalar>(pyr: &WaveletPyramid<T>) -> Result<Vec<Plane<T>>> {
    (1..=pyr.levels()).map(|s| feature_map(pyr, s)).collect()
}

/// Feature maps of a raw channel: min-max normalized to 0..255, then
/// decomposed to `max_levels`.
pub fn channel_feature_maps<T: Scalar>(
    channel: &Plane<T>,
    basis: WaveletBasis,
) -> Result<Vec<Plane<T>>> {
    let (h, w) = channel.dims();
    let levels = max_levels(h, w)?;
    let scaled = normalize_to(channel, T::lit(255.0));
    let pyr = dwt2(&scaled, levels, basis)?;
    feature_maps(&pyr)
}

/// Gaussian smoothing (sigma proportional to image size) then unit normalization.
pub fn smooth_and_normalize<T: Scalar>(energy: &Plane<T>) -> Result<Plane<T>> {
    let (h, w) = energy.dims();
    let sigma = T::lit(SMOOTHING_FRACTION) * T::from_count(h.max(w));
    Ok(normalize_unit(&gaussian_blur(energy, sigma)?))
}

/// Sum of planes of equal shape.
pub fn sum_planes<T: Scalar>(maps: &[Plane<T>]) -> Result<Plane<T>> {
    let first = maps.first().ok_or(Error::EmptyInput)?;
    let mut acc = first.clone();
    for m in &maps[1..] {
        acc = acc.zip_map(m, |a, b| a + b)?;
    }
    Ok(acc)
}

/// Conspicuity map of one channel: summed per-level detail energy, smoothed
/// and normalized to `[0, 1]`.
pub fn conspicuity_map<T: Scalar>(channel: &Plane<T>, basis: WaveletBasis) -> Result<Plane<T>> {
    let maps = channel_feature_maps(channel, basis)?;
    smooth_and_normalize(&sum_planes(&maps)?)
}
