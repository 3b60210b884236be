//! Multi-channel pulse-coupled neural network fusion.
//!
//! Every pixel is a neuron. Each input channel `k` drives its own external
//! stimulus `H^k`, all channels share the linking field `W * Y` of the
//! previous firing map, and the internal activity is the product
//! `U = prod_k (1 + beta_k H^k)`. A neuron fires when `U` exceeds its
//! dynamic threshold `T`, which then jumps by `V_T` and decays afterwards.
//! The fused map is `sqrt(U)` after the last iteration.
//!
//! Linking sums are accumulated exactly in 64.64 fixed point. Since firing
//! maps are binary, the sum at a neuron is a sum of kernel weights, so the
//! result does not depend on accumulation order: flips, rotations and
//! channel permutations commute with the dynamics bit for bit, and the
//! linking field can be updated incrementally from the neurons whose
//! firing state changed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imagekit::{normalize_unit, reflect_index};
use crate::{BinaryMap, Error, Plane, Result, Scalar};

pub const DEFAULT_ALPHA_H: f64 = 0.001;
pub const DEFAULT_V_H: f64 = 15.0;
pub const DEFAULT_ALPHA_T: f64 = 0.012;
pub const DEFAULT_V_T: f64 = 100.0;
/// 35x35 linking window.
pub const DEFAULT_KERNEL_RADIUS: usize = 17;
pub const DEFAULT_ITERATIONS: usize = 20;
/// Iteration cap of [`StopMode::AllFired`].
pub const ALL_FIRED_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    /// Run exactly `n_iter` iterations.
    #[default]
    Fixed,
    /// Stop once every neuron has fired at least once (capped at 200).
    AllFired,
}

impl fmt::Display for StopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopMode::Fixed => "fixed",
            StopMode::AllFired => "all-fired",
        })
    }
}

impl FromStr for StopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(StopMode::Fixed),
            "all-fired" | "all_fired" => Ok(StopMode::AllFired),
            _ => Err(Error::UnknownName {
                kind: "stop mode",
                value: s.into(),
            }),
        }
    }
}

/// What the linking field sees outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkBoundary {
    /// Absent neurons never fire.
    Zero,
    /// Half-sample mirror of the firing map.
    #[default]
    Mirror,
}

impl fmt::Display for LinkBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkBoundary::Zero => "zero",
            LinkBoundary::Mirror => "mirror",
        })
    }
}

impl FromStr for LinkBoundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(LinkBoundary::Zero),
            "mirror" => Ok(LinkBoundary::Mirror),
            _ => Err(Error::UnknownName {
                kind: "link boundary",
                value: s.into(),
            }),
        }
    }
}

/// Inverse squared distance weights `W(m, n) = 1 / (m^2 + n^2)` on a
/// `(2r+1) x (2r+1)` window, with the center weight set to zero.
pub fn linking_kernel<T: Scalar>(radius: usize) -> Result<Plane<T>> {
    if radius == 0 {
        return Err(Error::NonPositiveRadius);
    }
    let side = 2 * radius + 1;
    let r = radius as isize;
    Ok(Plane::from_fn(side, side, |y, x| {
        let m = y as isize - r;
        let n = x as isize - r;
        let d2 = m * m + n * n;
        if d2 == 0 {
            T::zero()
        } else {
            T::one() / T::from_count(d2 as usize)
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcnnParams<T> {
    pub alpha_h: T,
    pub v_h: T,
    pub alpha_t: T,
    pub v_t: T,
    /// Square, odd-sided, non-negative linking kernel.
    pub kernel: Plane<T>,
    pub n_iter: usize,
    pub stop_mode: StopMode,
    pub boundary: LinkBoundary,
}

impl<T: Scalar> Default for PcnnParams<T> {
    fn default() -> Self {
        Self {
            alpha_h: T::lit(DEFAULT_ALPHA_H),
            v_h: T::lit(DEFAULT_V_H),
            alpha_t: T::lit(DEFAULT_ALPHA_T),
            v_t: T::lit(DEFAULT_V_T),
            kernel: linking_kernel(DEFAULT_KERNEL_RADIUS).expect("default radius is positive"),
            n_iter: DEFAULT_ITERATIONS,
            stop_mode: StopMode::Fixed,
            boundary: LinkBoundary::default(),
        }
    }
}

impl<T: Scalar> PcnnParams<T> {
    pub fn with_kernel_radius(mut self, radius: usize) -> Result<Self> {
        self.kernel = linking_kernel(radius)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("alpha_H", self.alpha_h)?;
        positive("V_H", self.v_h)?;
        positive("alpha_T", self.alpha_t)?;
        positive("V_T", self.v_t)?;
        let (kh, kw) = self.kernel.dims();
        if kh != kw || kh % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "linking kernel must be square with odd side, got {kh}x{kw}"
            )));
        }
        if self
            .kernel
            .as_slice()
            .iter()
            .any(|&w| !(w >= T::zero()) || !w.is_finite())
        {
            return Err(Error::InvalidParams(
                "linking kernel weights must be finite and >= 0".into(),
            ));
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidParams(
                "iteration count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Network state after `n` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct PcnnState<T> {
    /// External stimulus per channel.
    pub h: Vec<Plane<T>>,
    /// Internal activity.
    pub u: Plane<T>,
    /// Firing map of the latest iteration.
    pub y: BinaryMap,
    /// Dynamic threshold.
    pub t: Plane<T>,
    pub n: usize,
}

impl<T: Scalar> PcnnState<T> {
    /// `H^k = I^k`, everything else zero.
    pub fn initial(inputs: &[Plane<T>]) -> Result<Self> {
        let (h, w) = check_inputs(inputs)?;
        Ok(Self {
            h: inputs.to_vec(),
            u: Plane::zeros(h, w),
            y: BinaryMap::zeros(h, w),
            t: Plane::zeros(h, w),
            n: 0,
        })
    }
}

fn check_inputs<T: Scalar>(inputs: &[Plane<T>]) -> Result<(usize, usize)> {
    let first = inputs.first().ok_or(Error::EmptyInput)?;
    for p in &inputs[1..] {
        first.ensure_same_dims(p)?;
    }
    Ok(first.dims())
}

const FIXED_ONE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Exact linking-field accumulator.
struct Linker {
    height: usize,
    width: usize,
    radius: isize,
    /// Non-zero kernel entries as `(dy, dx, weight * 2^64)`.
    taps: Vec<(isize, isize, i128)>,
    row_images: Vec<Vec<isize>>,
    col_images: Vec<Vec<isize>>,
    acc: Vec<i128>,
}

impl Linker {
    fn new<T: Scalar>(
        kernel: &Plane<T>,
        height: usize,
        width: usize,
        boundary: LinkBoundary,
    ) -> Self {
        let radius = (kernel.height() / 2) as isize;
        let mut taps = Vec::new();
        for ky in 0..kernel.height() {
            for kx in 0..kernel.width() {
                let w = kernel[(ky, kx)].as_f64();
                if w != 0.0 {
                    let fixed = (w * FIXED_ONE).round() as i128;
                    taps.push((ky as isize - radius, kx as isize - radius, fixed));
                }
            }
        }
        let images = |n: usize| -> Vec<Vec<isize>> {
            let mut out = vec![Vec::new(); n];
            match boundary {
                LinkBoundary::Zero => {
                    for (i, v) in out.iter_mut().enumerate() {
                        v.push(i as isize);
                    }
                }
                LinkBoundary::Mirror => {
                    for e in -radius..(n as isize + radius) {
                        out[reflect_index(e, n)].push(e);
                    }
                }
            }
            out
        };
        Self {
            height,
            width,
            radius,
            taps,
            row_images: images(height),
            col_images: images(width),
            acc: vec![0; height * width],
        }
    }

    /// Adds (or removes) the pulse of neuron `(y, x)` to every neuron it reaches.
    fn scatter(&mut self, y: usize, x: usize, add: bool) {
        let (h, w) = (self.height as isize, self.width as isize);
        for &ey in &self.row_images[y] {
            for &ex in &self.col_images[x] {
                // skip images whose whole window misses the plane
                if ey + self.radius < 0
                    || ey - self.radius >= h
                    || ex + self.radius < 0
                    || ex - self.radius >= w
                {
                    continue;
                }
                for &(dy, dx, wt) in &self.taps {
                    let qy = ey + dy;
                    let qx = ex + dx;
                    if qy < 0 || qy >= h || qx < 0 || qx >= w {
                        continue;
                    }
                    let cell = &mut self.acc[(qy * w + qx) as usize];
                    if add {
                        *cell += wt;
                    } else {
                        *cell -= wt;
                    }
                }
            }
        }
    }

    /// Moves the accumulated field from firing map `old` to `new`.
    fn update(&mut self, old: &BinaryMap, new: &BinaryMap) {
        for y in 0..self.height {
            for x in 0..self.width {
                let (a, b) = (old.get(y, x), new.get(y, x));
                if a != b {
                    self.scatter(y, x, b);
                }
            }
        }
    }

    fn value<T: Scalar>(&self, i: usize) -> T {
        T::lit(self.acc[i] as f64 / FIXED_ONE)
    }
}

struct Dynamics<T> {
    decay_h: T,
    decay_t: T,
    v_h: T,
    v_t: T,
}

impl<T: Scalar> Dynamics<T> {
    fn new(params: &PcnnParams<T>) -> Self {
        Self {
            decay_h: (-params.alpha_h).exp(),
            decay_t: (-params.alpha_t).exp(),
            v_h: params.v_h,
            v_t: params.v_t,
        }
    }

    /// One synchronous iteration given the linking field of the previous firing map.
    fn advance(&self, state: &mut PcnnState<T>, inputs: &[Plane<T>], betas: &[T], linker: &Linker) {
        let k = inputs.len();
        let mut factors = vec![T::zero(); k];
        for i in 0..state.u.len() {
            let link: T = linker.value(i);
            for (c, f) in factors.iter_mut().enumerate() {
                let h = &mut state.h[c].as_mut_slice()[i];
                *h = self.decay_h * *h + self.v_h * link + inputs[c].as_slice()[i];
                *f = T::one() + betas[c] * *h;
            }
            // canonical order keeps the product invariant under channel permutation
            factors.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let u = factors.iter().fold(T::one(), |acc, &f| acc * f);
            state.u.as_mut_slice()[i] = u;
            let t_prev = state.t.as_slice()[i];
            let fired = u > t_prev;
            let (y, x) = (i / state.u.width(), i % state.u.width());
            state.y.set(y, x, fired);
            state.t.as_mut_slice()[i] =
                self.decay_t * t_prev + if fired { self.v_t } else { T::zero() };
        }
        state.n += 1;
    }
}

fn validate_run<T: Scalar>(
    inputs: &[Plane<T>],
    betas: &[T],
    params: &PcnnParams<T>,
) -> Result<(usize, usize)> {
    let dims = check_inputs(inputs)?;
    params.validate()?;
    if betas.len() != inputs.len() {
        return Err(Error::InvalidParams(format!(
            "{} channel weights for {} channels",
            betas.len(),
            inputs.len()
        )));
    }
    if betas.iter().any(|&b| !(b >= T::zero()) || !b.is_finite()) {
        return Err(Error::InvalidParams(
            "channel weights must be finite and >= 0".into(),
        ));
    }
    for p in inputs {
        if p.as_slice()
            .iter()
            .any(|&v| !(v >= T::zero() && v <= T::one()))
        {
            return Err(Error::InvalidParams(
                "m-PCNN inputs must lie within [0, 1]".into(),
            ));
        }
    }
    Ok(dims)
}

/// Advances the network by one iteration. All reads use the previous
/// iteration's firing map and threshold.
pub fn mpcnn_step<T: Scalar>(
    state: &PcnnState<T>,
    inputs: &[Plane<T>],
    betas: &[T],
    params: &PcnnParams<T>,
) -> Result<PcnnState<T>> {
    let (h, w) = validate_run(inputs, betas, params)?;
    if state.h.len() != inputs.len() {
        return Err(Error::InvalidParams(
            "state and input channel counts differ".into(),
        ));
    }
    for p in state.h.iter().chain([&state.u, &state.t]) {
        if p.dims() != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: (h, w),
                found: p.dims(),
            });
        }
    }
    if state.y.dims() != (h, w) {
        return Err(Error::ShapeMismatch {
            expected: (h, w),
            found: state.y.dims(),
        });
    }
    let mut linker = Linker::new(&params.kernel, h, w, params.boundary);
    linker.update(&BinaryMap::zeros(h, w), &state.y);
    let mut next = state.clone();
    Dynamics::new(params).advance(&mut next, inputs, betas, &linker);
    Ok(next)
}

/// Runs the network from its initial state and returns the final state.
pub fn mpcnn_run<T: Scalar>(
    inputs: &[Plane<T>],
    betas: &[T],
    params: &PcnnParams<T>,
) -> Result<PcnnState<T>> {
    let weight_sum: T = betas.iter().copied().sum();
    let (h, w) = validate_run(inputs, betas, params)?;
    if (weight_sum - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::InvalidParams(format!(
            "channel weights sum to {weight_sum}, expected 1"
        )));
    }
    let dynamics = Dynamics::new(params);
    let mut linker = Linker::new(&params.kernel, h, w, params.boundary);
    let mut state = PcnnState::initial(inputs)?;
    let mut prev_y = state.y.clone();
    let mut ever_fired = BinaryMap::zeros(h, w);
    let mut remaining = h * w;
    let cap = match params.stop_mode {
        StopMode::Fixed => params.n_iter,
        StopMode::AllFired => ALL_FIRED_CAP,
    };
    while state.n < cap {
        linker.update(&prev_y, &state.y);
        prev_y.clone_from(&state.y);
        dynamics.advance(&mut state, inputs, betas, &linker);
        if params.stop_mode == StopMode::AllFired {
            for y in 0..h {
                for x in 0..w {
                    if state.y.get(y, x) && !ever_fired.get(y, x) {
                        ever_fired.set(y, x, true);
                        remaining -= 1;
                    }
                }
            }
            if remaining == 0 {
                break;
            }
        }
    }
    Ok(state)
}

/// Fuses `K` maps in `[0, 1]` into one: the unit-normalized square root of
/// the final internal activity.
pub fn mpcnn_fuse<T: Scalar>(
    inputs: &[Plane<T>],
    betas: &[T],
    params: &PcnnParams<T>,
) -> Result<Plane<T>> {
    let state = mpcnn_run(inputs, betas, params)?;
    Ok(normalize_unit(&state.u.map(|u| u.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Plane<f64> {
        Plane::filled(1, 1, v)
    }

    #[test]
    fn kernel_spot_values() {
        let k = linking_kernel::<f64>(17).unwrap();
        assert_eq!(k.dims(), (35, 35));
        assert_eq!(k[(17, 17)], 0.0);
        assert_eq!(k[(18, 17)], 1.0);
        assert_eq!(k[(18, 18)], 0.5);
        assert_eq!(k[(20, 21)], 0.04);
        assert!(matches!(
            linking_kernel::<f64>(0),
            Err(Error::NonPositiveRadius)
        ));
    }

    #[test]
    fn fixed_point_weights_are_exact() {
        let k = linking_kernel::<f64>(17).unwrap();
        let l = Linker::new(&k, 1, 1, LinkBoundary::Zero);
        for &(dy, dx, wt) in &l.taps {
            let w = k[((dy + 17) as usize, (dx + 17) as usize)];
            assert_eq!(wt as f64 / FIXED_ONE, w);
        }
    }

    #[test]
    fn incremental_linking_matches_fresh_accumulation() {
        let k = linking_kernel::<f64>(3).unwrap();
        for boundary in [LinkBoundary::Zero, LinkBoundary::Mirror] {
            let a = BinaryMap::from_fn(9, 11, |y, x| (y * 7 + x * 3) % 5 == 0);
            let b = BinaryMap::from_fn(9, 11, |y, x| (y + 2 * x) % 3 == 0);
            let mut inc = Linker::new(&k, 9, 11, boundary);
            inc.update(&BinaryMap::zeros(9, 11), &a);
            inc.update(&a, &b);
            let mut fresh = Linker::new(&k, 9, 11, boundary);
            fresh.update(&BinaryMap::zeros(9, 11), &b);
            assert_eq!(inc.acc, fresh.acc);
        }
    }

    /// Direct gather convolution in f64 for comparison.
    fn gather(k: &Plane<f64>, y_map: &BinaryMap, boundary: LinkBoundary) -> Plane<f64> {
        let r = (k.height() / 2) as isize;
        let (h, w) = y_map.dims();
        Plane::from_fn(h, w, |qy, qx| {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sy, sx) = (qy as isize - dy, qx as isize - dx);
                    let fired = match boundary {
                        LinkBoundary::Zero => {
                            sy >= 0
                                && sx >= 0
                                && sy < h as isize
                                && sx < w as isize
                                && y_map.get(sy as usize, sx as usize)
                        }
                        LinkBoundary::Mirror => {
                            y_map.get(reflect_index(sy, h), reflect_index(sx, w))
                        }
                    };
                    if fired {
                        acc += k[((dy + r) as usize, (dx + r) as usize)];
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn linking_matches_direct_convolution() {
        let k = linking_kernel::<f64>(4).unwrap();
        let y_map = BinaryMap::from_fn(7, 6, |y, x| (y * 5 + x * 2) % 4 == 1);
        for boundary in [LinkBoundary::Zero, LinkBoundary::Mirror] {
            let mut l = Linker::new(&k, 7, 6, boundary);
            l.update(&BinaryMap::zeros(7, 6), &y_map);
            let want = gather(&k, &y_map, boundary);
            for i in 0..42 {
                assert!((l.value::<f64>(i) - want.as_slice()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_neuron_trajectory() {
        let mut params = PcnnParams::<f64>::default();
        params.kernel = Plane::zeros(3, 3);
        let inputs = [single(1.0)];
        let s0 = PcnnState::initial(&inputs).unwrap();
        let s1 = mpcnn_step(&s0, &inputs, &[1.0], &params).unwrap();
        let h1 = (-0.001f64).exp() + 1.0;
        assert!((s1.h[0][(0, 0)] - h1).abs() < 1e-12);
        assert!((s1.u[(0, 0)] - (1.0 + h1)).abs() < 1e-12);
        assert!(s1.y.get(0, 0));
        assert_eq!(s1.t[(0, 0)], 100.0);

        let s2 = mpcnn_step(&s1, &inputs, &[1.0], &params).unwrap();
        let h2 = (-0.001f64).exp() * h1 + 1.0;
        assert!((s2.h[0][(0, 0)] - h2).abs() < 1e-12);
        assert!(!s2.y.get(0, 0));
        assert!((s2.t[(0, 0)] - 100.0 * (-0.012f64).exp()).abs() < 1e-12);
        assert_eq!(s2.n, 2);
    }

    #[test]
    fn zero_inputs_fire_everywhere_first() {
        let mut params = PcnnParams::<f64>::default();
        params.kernel = Plane::zeros(1, 1);
        let inputs = vec![Plane::zeros(3, 4); 2];
        let s0 = PcnnState::initial(&inputs).unwrap();
        let s1 = mpcnn_step(&s0, &inputs, &[0.5, 0.5], &params).unwrap();
        assert!(s1.u.as_slice().iter().all(|&u| u == 1.0));
        assert!(s1.y.all());
        assert!(s1.t.as_slice().iter().all(|&t| t == 100.0));
    }

    #[test]
    fn fuse_validation() {
        let params = PcnnParams::<f64>::default();
        let p = Plane::filled(4, 4, 0.5);
        assert!(matches!(
            mpcnn_fuse(&[], &[], &params),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            mpcnn_fuse(&[p.clone(), Plane::zeros(4, 5)], &[0.5, 0.5], &params),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(mpcnn_fuse(&[p.clone(), p.clone()], &[0.6, 0.6], &params).is_err());
        assert!(mpcnn_fuse(&[Plane::filled(4, 4, 1.5)], &[1.0], &params).is_err());
        let mut bad = params.clone();
        bad.kernel = Plane::zeros(2, 2);
        assert!(matches!(
            mpcnn_fuse(&[p], &[1.0], &bad),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn all_fired_mode_stops_once_everyone_fired() {
        let mut params = PcnnParams::<f64>::default().with_kernel_radius(2).unwrap();
        params.stop_mode = StopMode::AllFired;
        let inputs = [Plane::from_fn(5, 5, |y, x| ((y + x) % 3) as f64 / 2.0)];
        let state = mpcnn_run(&inputs, &[1.0], &params).unwrap();
        // U >= 1 > T = 0 on the first iteration
        assert_eq!(state.n, 1);
        assert!(state.y.all());
    }
}
