//! End-to-end saliency methods: the eigenvector-space pipeline fused by the
//! m-PCNN, the wavelet max-fusion baseline, the frequency-tuned mean-contrast
//! baseline, and the frequency-tuned contrast in eigenvector space fused by
//! the m-PCNN.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imagekit::{blur_rgb, normalize_unit, rgb_to_lab};
use crate::mpcnn::{self, LinkBoundary, PcnnParams, StopMode};
use crate::pca::{self, PcaBasis};
use crate::wavelet::{self, WaveletBasis};
use crate::{Error, Plane, Result, RgbImage, Scalar};

/// Smallest side accepted by the wavelet-based methods.
pub const MIN_SIDE: usize = 16;

pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    Proposed,
    WtBaseline,
    Ft,
    FtPcaMpcnn,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [
        MethodId::Proposed,
        MethodId::WtBaseline,
        MethodId::Ft,
        MethodId::FtPcaMpcnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Proposed => "proposed",
            MethodId::WtBaseline => "wt-baseline",
            MethodId::Ft => "ft",
            MethodId::FtPcaMpcnn => "ft-pca-mpcnn",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "method",
                value: s.into(),
            })
    }
}

/// Channel space the wavelet baseline decomposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Lab,
    Rgb,
}

impl FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(ColorSpace::Lab),
            "rgb" => Ok(ColorSpace::Rgb),
            _ => Err(Error::UnknownName {
                kind: "color space",
                value: s.into(),
            }),
        }
    }
}

/// Every tunable of the four methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig<T> {
    /// Pre-filter sigma applied to the RGB input.
    pub blur_sigma: T,
    pub wavelet: WaveletBasis,
    pub alpha_h: T,
    pub v_h: T,
    pub alpha_t: T,
    pub v_t: T,
    pub kernel_radius: usize,
    pub n_iter: usize,
    pub stop_mode: StopMode,
    pub link_boundary: LinkBoundary,
    pub baseline_space: ColorSpace,
}

impl<T: Scalar> Default for SaliencyConfig<T> {
    fn default() -> Self {
        Self {
            blur_sigma: T::lit(DEFAULT_BLUR_SIGMA),
            wavelet: WaveletBasis::default(),
            alpha_h: T::lit(mpcnn::DEFAULT_ALPHA_H),
            v_h: T::lit(mpcnn::DEFAULT_V_H),
            alpha_t: T::lit(mpcnn::DEFAULT_ALPHA_T),
            v_t: T::lit(mpcnn::DEFAULT_V_T),
            kernel_radius: mpcnn::DEFAULT_KERNEL_RADIUS,
            n_iter: mpcnn::DEFAULT_ITERATIONS,
            stop_mode: StopMode::Fixed,
            link_boundary: LinkBoundary::default(),
            baseline_space: ColorSpace::Lab,
        }
    }
}

impl<T: Scalar> SaliencyConfig<T> {
    pub fn pcnn_params(&self) -> Result<PcnnParams<T>> {
        let params = PcnnParams {
            alpha_h: self.alpha_h,
            v_h: self.v_h,
            alpha_t: self.alpha_t,
            v_t: self.v_t,
            kernel: mpcnn::linking_kernel(self.kernel_radius)?,
            n_iter: self.n_iter,
            stop_mode: self.stop_mode,
            boundary: self.link_boundary,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma > T::zero()) || !self.blur_sigma.is_finite() {
            return Err(Error::NonPositiveSigma(self.blur_sigma.as_f64()));
        }
        self.pcnn_params().map(|_| ())
    }
}

fn ensure_min_side(h: usize, w: usize) -> Result<()> {
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            min: MIN_SIDE,
        });
    }
    Ok(())
}

/// Every intermediate of the eigenvector-space pipeline.
#[derive(Debug, Clone)]
pub struct ProposedTrace<T> {
    pub basis: PcaBasis<T>,
    pub weights: [T; 3],
    /// Principal component transforms `C_1..C_3`.
    pub components: [Plane<T>; 3],
    /// Per-component wavelet feature maps, finest level first.
    pub feature_maps: [Vec<Plane<T>>; 3],
    pub conspicuity: [Plane<T>; 3],
    pub saliency: Plane<T>,
}

/// Runs the proposed pipeline, keeping every intermediate.
pub fn proposed_trace<T: Scalar>(
    img: &RgbImage<T>,
    cfg: &SaliencyConfig<T>,
) -> Result<ProposedTrace<T>> {
    ensure_min_side(img.height(), img.width())?;
    let params = cfg.pcnn_params()?;
    let smooth = blur_rgb(img, cfg.blur_sigma)?;
    let basis = pca::fit_pca(&smooth)?;
    let weights = pca::channel_weights(&basis);
    let components = pca::project_all(&smooth, &basis)?;
    let mut feature_maps: [Vec<Plane<T>>; 3] = Default::default();
    let mut conspicuity = Vec::with_capacity(3);
    for (c, comp) in components.iter().enumerate() {
        let maps = wavelet::channel_feature_maps(comp, cfg.wavelet)?;
        conspicuity.push(wavelet::smooth_and_normalize(&wavelet::sum_planes(&maps)?)?);
        feature_maps[c] = maps;
    }
    let saliency = mpcnn::mpcnn_fuse(&conspicuity, &weights, &params)?;
    let conspicuity: [Plane<T>; 3] = conspicuity.try_into().expect("three channels");
    Ok(ProposedTrace {
        basis,
        weights,
        components,
        feature_maps,
        conspicuity,
        saliency,
    })
}

/// Blur, PCA projection, per-component wavelet conspicuity, eigenvalue-weighted m-PCNN fusion.
pub fn proposed_saliency<T: Scalar>(
    img: &RgbImage<T>,
    cfg: &SaliencyConfig<T>,
) -> Result<Plane<T>> {
    Ok(proposed_trace(img, cfg)?.saliency)
}

/// Wavelet baseline fusion: per level, elementwise maximum of the channel
/// feature maps; summed over levels, then smoothed and normalized.
pub fn wt_max_fusion<T: Scalar>(channels: &[Plane<T>], basis: WaveletBasis) -> Result<Plane<T>> {
    let per_channel = channels
        .iter()
        .map(|c| wavelet::channel_feature_maps(c, basis))
        .collect::<Result<Vec<_>>>()?;
    let first = per_channel.first().ok_or(Error::EmptyInput)?;
    let mut total: Option<Plane<T>> = None;
    for level in 0..first.len() {
        let mut fused = first[level].clone();
        for maps in &per_channel[1..] {
            fused = fused.zip_map(&maps[level], T::max)?;
        }
        total = Some(match total {
            None => fused,
            Some(acc) => acc.zip_map(&fused, |a, b| a + b)?,
        });
    }
    wavelet::smooth_and_normalize(&total.expect("at least one level"))
}

fn baseline_channels<T: Scalar>(img: &RgbImage<T>, space: ColorSpace) -> [Plane<T>; 3] {
    match space {
        ColorSpace::Lab => {
            let (l, a, b) = rgb_to_lab(img);
            [l, a, b]
        }
        ColorSpace::Rgb => [img.r.clone(), img.g.clone(), img.b.clone()],
    }
}

/// Wavelet local saliency with per-level channel max fusion.
pub fn wt_baseline_saliency<T: Scalar>(
    img: &RgbImage<T>,
    cfg: &SaliencyConfig<T>,
) -> Result<Plane<T>> {
    ensure_min_side(img.height(), img.width())?;
    let smooth = blur_rgb(img, cfg.blur_sigma)?;
    wt_max_fusion(&baseline_channels(&smooth, cfg.baseline_space), cfg.wavelet)
}

/// Euclidean distance of each pixel's channel vector from the channel means,
/// normalized to `[0, 1]`.
pub fn mean_contrast<T: Scalar>(channels: &[Plane<T>]) -> Result<Plane<T>> {
    let first = channels.first().ok_or(Error::EmptyInput)?;
    let means: Vec<T> = channels.iter().map(Plane::mean).collect();
    let mut dist = Plane::zeros(first.height(), first.width());
    for (c, (p, &m)) in channels.iter().zip(&means).enumerate() {
        first.ensure_same_dims(p)?;
        for (d, &v) in dist.as_mut_slice().iter_mut().zip(p.as_slice()) {
            let diff = v - m;
            *d = if c == 0 {
                diff * diff
            } else {
                *d + diff * diff
            };
        }
    }
    Ok(normalize_unit(&dist.map(|v| v.sqrt())))
}

/// Frequency-tuned saliency: blurred Lab pixel distance from the mean Lab color.
pub fn ft_saliency<T: Scalar>(img: &RgbImage<T>, cfg: &SaliencyConfig<T>) -> Result<Plane<T>> {
    let smooth = blur_rgb(img, cfg.blur_sigma)?;
    let (l, a, b) = rgb_to_lab(&smooth);
    mean_contrast(&[l, a, b])
}

/// Per-component conspicuity `normalize_unit(|C_i - mean(C_i)|)`.
pub fn mean_contrast_conspicuity<T: Scalar>(component: &Plane<T>) -> Plane<T> {
    let m = component.mean();
    normalize_unit(&component.map(|v| (v - m).abs()))
}

/// Mean-contrast conspicuity of the principal component transforms, fused by the m-PCNN.
pub fn ft_pca_mpcnn_saliency<T: Scalar>(
    img: &RgbImage<T>,
    cfg: &SaliencyConfig<T>,
) -> Result<Plane<T>> {
    let params = cfg.pcnn_params()?;
    let smooth = blur_rgb(img, cfg.blur_sigma)?;
    let basis = pca::fit_pca(&smooth)?;
    let weights = pca::channel_weights(&basis);
    let maps: Vec<Plane<T>> = pca::project_all(&smooth, &basis)?
        .iter()
        .map(mean_contrast_conspicuity)
        .collect();
    mpcnn::mpcnn_fuse(&maps, &weights, &params)
}

/// Dispatches on the method id.
pub fn run_method<T: Scalar>(
    id: MethodId,
    img: &RgbImage<T>,
    cfg: &SaliencyConfig<T>,
) -> Result<Plane<T>> {
    match id {
        MethodId::Proposed => proposed_saliency(img, cfg),
        MethodId::WtBaseline => wt_baseline_saliency(img, cfg),
        MethodId::Ft => ft_saliency(img, cfg),
        MethodId::FtPcaMpcnn => ft_pca_mpcnn_saliency(img, cfg),
    }
}
