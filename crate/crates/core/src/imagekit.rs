//! Image carriers and the low-level primitives every other module builds on:
//! loading and saving, Gaussian filtering, min-max normalization and the
//! sRGB to CIELAB conversion.

use std::ops::{Index, IndexMut};
use std::path::Path;

use image::{ImageFormat, ImageReader};

use crate::{Error, Result, Scalar};

/// Row-major 2-D field of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidPlane(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidPlane(format!(
                "{height}x{width} plane needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, T::zero())
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two planes of equal shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_count(self.len())
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| {
            self[(y, self.width - 1 - x)]
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| {
            self[(self.height - 1 - y, x)]
        })
    }

    /// Quarter turn clockwise; the result is `width x height`.
    pub fn rotate90(&self) -> Self {
        Self::from_fn(self.width, self.height, |y, x| {
            self[(self.height - 1 - x, y)]
        })
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T> Index<(usize, usize)> for Plane<T> {
    type Output = T;

    #[inline]
    fn index(&self, (y, x): (usize, usize)) -> &T {
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Plane<T> {
    #[inline]
    fn index_mut(&mut self, (y, x): (usize, usize)) -> &mut T {
        &mut self.data[y * self.width + x]
    }
}

/// Three equally sized channel planes holding intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    pub r: Plane<T>,
    pub g: Plane<T>,
    pub b: Plane<T>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(r: Plane<T>, g: Plane<T>, b: Plane<T>) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        let lo = T::zero();
        let hi = T::lit(255.0);
        for p in [&r, &g, &b] {
            if p.as_slice().iter().any(|&v| !(v >= lo && v <= hi)) {
                return Err(Error::InvalidPlane(
                    "channel values must lie within [0, 255]".into(),
                ));
            }
        }
        Ok(Self { r, g, b })
    }

    /// Builds an image from interleaved 8-bit RGB bytes.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::InvalidPlane(format!(
                "{height}x{width} RGB image needs {} bytes, got {}",
                height * width * 3,
                bytes.len()
            )));
        }
        let channel = |c: usize| {
            Plane::new(
                height,
                width,
                bytes
                    .chunks_exact(3)
                    .map(|px| T::lit(px[c] as f64))
                    .collect(),
            )
        };
        Ok(Self {
            r: channel(0)?,
            g: channel(1)?,
            b: channel(2)?,
        })
    }

    /// Builds an image from a per-pixel `[r, g, b]` function; values are clamped to `[0, 255]`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [T; 3]) -> Self {
        let clamp = |v: T| v.max(T::zero()).min(T::lit(255.0));
        Self {
            r: Plane::from_fn(height, width, |y, x| clamp(f(y, x)[0])),
            g: Plane::from_fn(height, width, |y, x| clamp(f(y, x)[1])),
            b: Plane::from_fn(height, width, |y, x| clamp(f(y, x)[2])),
        }
    }

    pub fn uniform(height: usize, width: usize, rgb: [T; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.r.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.r.width()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [T; 3] {
        [self.r[(y, x)], self.g[(y, x)], self.b[(y, x)]]
    }

    pub fn channels(&self) -> [&Plane<T>; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Applies `f` to every channel; range validation is the caller's concern.
    pub fn map_channels(&self, f: impl Fn(&Plane<T>) -> Plane<T>) -> Self {
        Self {
            r: f(&self.r),
            g: f(&self.g),
            b: f(&self.b),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        self.map_channels(Plane::flip_horizontal)
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.r.len() * 3);
        for i in 0..self.r.len() {
            for p in self.channels() {
                out.push(quantize_u8(p.as_slice()[i] / T::lit(255.0)));
            }
        }
        out
    }
}

/// Map of exact zeros and ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(Error::InvalidPlane(format!(
                "binary map {height}x{width} with {} bits",
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(height > 0 && width > 0);
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |_, _| false)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn all(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// The map as a 0/1 plane.
    pub fn to_plane<T: Scalar>(&self) -> Plane<T> {
        Plane {
            height: self.height,
            width: self.width,
            data: self
                .bits
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
        }
    }

    /// Intersection over union; two empty maps give 0.
    pub fn iou(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| {
            self.get(y, self.width - 1 - x)
        })
    }
}

/// Half-sample symmetric extension: `.. x1 x0 | x0 x1 .. xn-1 | xn-1 xn-2 ..`,
/// valid for any offset (reflections repeat with period `2n`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// One-sided taps `k[0..=r]` of a normalized Gaussian with radius `ceil(3 sigma)`.
pub fn gaussian_taps<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma.as_f64()));
    }
    let radius = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_var = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=radius)
        .map(|i| {
            let d = T::from_count(i);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let total = raw[0] + T::lit(2.0) * raw[1..].iter().copied().sum::<T>();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Separable Gaussian blur with mirror boundary handling.
///
/// Symmetric taps are applied as `k[i] * (left + right)`, so the result is
/// exactly equivariant under horizontal and vertical flips.
pub fn gaussian_blur<T: Scalar>(p: &Plane<T>, sigma: T) -> Result<Plane<T>> {
    let taps = gaussian_taps(sigma)?;
    let (h, w) = p.dims();
    let mut tmp = Plane::zeros(h, w);
    for y in 0..h {
        let row = p.row(y);
        for x in 0..w {
            let xi = x as isize;
            let mut acc = taps[0] * row[x];
            for (i, &k) in taps.iter().enumerate().skip(1) {
                let off = i as isize;
                acc = acc + k * (row[reflect_index(xi - off, w)] + row[reflect_index(xi + off, w)]);
            }
            tmp[(y, x)] = acc;
        }
    }
    let mut out = Plane::zeros(h, w);
    for y in 0..h {
        let yi = y as isize;
        for x in 0..w {
            let mut acc = taps[0] * tmp[(y, x)];
            for (i, &k) in taps.iter().enumerate().skip(1) {
                let off = i as isize;
                acc = acc
                    + k * (tmp[(reflect_index(yi - off, h), x)]
                        + tmp[(reflect_index(yi + off, h), x)]);
            }
            out[(y, x)] = acc;
        }
    }
    Ok(out)
}

/// Min-max rescale to `[0, 1]`; a constant plane maps to all zeros.
pub fn normalize_unit<T: Scalar>(p: &Plane<T>) -> Plane<T> {
    let lo = p.min();
    let hi = p.max();
    if !(hi > lo) {
        return Plane::zeros(p.height(), p.width());
    }
    let span = hi - lo;
    p.map(|v| (v - lo) / span)
}

/// Min-max rescale to `[0, top]`; a constant plane maps to all zeros.
pub fn normalize_to<T: Scalar>(p: &Plane<T>, top: T) -> Plane<T> {
    normalize_unit(p).map(|v| v * top)
}

/// `[0, 1]` value to an 8-bit level, rounding half up.
#[inline]
pub fn quantize_u8<T: Scalar>(v: T) -> u8 {
    let scaled = (v * T::lit(255.0) + T::lit(0.5)).floor();
    scaled
        .max(T::zero())
        .min(T::lit(255.0))
        .to_u8()
        .unwrap_or(0)
}

fn open_reader(path: &Path) -> Result<ImageReader<std::io::BufReader<std::fs::File>>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| Error::IoFailure {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Bmp | ImageFormat::Pnm) => Ok(reader),
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    open_reader(path)?.decode().map_err(|e| Error::CorruptData {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Decodes a PNG, BMP or PPM/PGM file to 8-bit RGB; gray sources are
/// replicated into all three channels.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<RgbImage<T>> {
    let path = path.as_ref();
    let rgb = decode(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::from_rgb8(h as usize, w as usize, rgb.as_raw())
}

/// Loads a ground-truth mask; 8-bit luma above 127 counts as foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMap> {
    let path = path.as_ref();
    let luma = decode(path)?.to_luma8();
    let (w, h) = luma.dimensions();
    BinaryMap::new(
        h as usize,
        w as usize,
        luma.as_raw().iter().map(|&v| v > 127).collect(),
    )
}

fn write_gray_png(path: &Path, width: usize, height: usize, pixels: Vec<u8>) -> Result<()> {
    let io_err = |reason: String| Error::IoFailure {
        path: path.to_path_buf(),
        reason,
    };
    let img = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| io_err("pixel buffer size mismatch".into()))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| io_err(e.to_string()))
}

/// Writes `normalize_unit(p)` as an 8-bit grayscale PNG.
pub fn save_plane<T: Scalar>(p: &Plane<T>, path: impl AsRef<Path>) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::InvalidPlane("cannot save non-finite plane".into()));
    }
    let pixels = normalize_unit(p)
        .as_slice()
        .iter()
        .map(|&v| quantize_u8(v))
        .collect();
    write_gray_png(path.as_ref(), p.width(), p.height(), pixels)
}

/// Writes a binary map as a 0/255 grayscale PNG.
pub fn save_binary(map: &BinaryMap, path: impl AsRef<Path>) -> Result<()> {
    let pixels = map
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    write_gray_png(path.as_ref(), map.width(), map.height(), pixels)
}

/// Writes an RGB image as an 8-bit PNG.
pub fn save_rgb<T: Scalar>(img: &RgbImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_rgb8())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::IoFailure {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

// sRGB primaries, D65 white
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn srgb_to_linear<T: Scalar>(c: T) -> T {
    let c = c / T::lit(255.0);
    if c <= T::lit(0.04045) {
        c / T::lit(12.92)
    } else {
        ((c + T::lit(0.055)) / T::lit(1.055)).powf(T::lit(2.4))
    }
}

fn lab_f<T: Scalar>(t: T) -> T {
    let delta = T::lit(6.0 / 29.0);
    if t > delta * delta * delta {
        t.cbrt()
    } else {
        t / (T::lit(3.0) * delta * delta) + T::lit(4.0 / 29.0)
    }
}

/// sRGB (D65) to CIELAB for one pixel with channels in `[0, 255]`.
pub fn rgb_pixel_to_lab<T: Scalar>(rgb: [T; 3]) -> [T; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut xyz = [T::zero(); 3];
    let mut white = [T::zero(); 3];
    for (row, (out, wn)) in RGB_TO_XYZ.iter().zip(xyz.iter_mut().zip(white.iter_mut())) {
        for (&m, &c) in row.iter().zip(&lin) {
            *out = *out + T::lit(m) * c;
            *wn = *wn + T::lit(m);
        }
    }
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    [
        T::lit(116.0) * fy - T::lit(16.0),
        T::lit(500.0) * (fx - fy),
        T::lit(200.0) * (fy - fz),
    ]
}

/// Converts an image to its `L` (0..100), `a` and `b` planes.
pub fn rgb_to_lab<T: Scalar>(img: &RgbImage<T>) -> (Plane<T>, Plane<T>, Plane<T>) {
    let (h, w) = img.dims();
    let mut l = Plane::zeros(h, w);
    let mut a = Plane::zeros(h, w);
    let mut b = Plane::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let [lv, av, bv] = rgb_pixel_to_lab(img.pixel(y, x));
            l[(y, x)] = lv;
            a[(y, x)] = av;
            b[(y, x)] = bv;
        }
    }
    (l, a, b)
}

/// Blurs every channel of an image.
pub fn blur_rgb<T: Scalar>(img: &RgbImage<T>, sigma: T) -> Result<RgbImage<T>> {
    Ok(RgbImage {
        r: gaussian_blur(&img.r, sigma)?,
        g: gaussian_blur(&img.g, sigma)?,
        b: gaussian_blur(&img.b, sigma)?,
    })
}
