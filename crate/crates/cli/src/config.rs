use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use eigensal::methods::ColorSpace;
use eigensal::{eval, LinkBoundary, MethodId, SaliencyConfig64, StopMode, WaveletBasis};

/// Fully resolved parameters of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: MethodId,
    pub wavelet: WaveletBasis,
    pub sigma: f64,
    pub alpha_h: f64,
    pub v_h: f64,
    pub alpha_t: f64,
    pub v_t: f64,
    pub kernel_radius: usize,
    pub iters: usize,
    pub stop_mode: StopMode,
    pub link_boundary: LinkBoundary,
    pub baseline_space: ColorSpace,
    /// F-measure weight.
    pub alpha: f64,
    pub out: PathBuf,
    /// 0 = every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SaliencyConfig64::default();
        Self {
            method: MethodId::Proposed,
            wavelet: s.wavelet,
            sigma: s.blur_sigma,
            alpha_h: s.alpha_h,
            v_h: s.v_h,
            alpha_t: s.alpha_t,
            v_t: s.v_t,
            kernel_radius: s.kernel_radius,
            iters: s.n_iter,
            stop_mode: s.stop_mode,
            link_boundary: s.link_boundary,
            baseline_space: s.baseline_space,
            alpha: eval::DEFAULT_ALPHA,
            out: PathBuf::from("."),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            anyhow::anyhow!("config {}: {msg}", path.display())
        })
    }

    pub fn saliency(&self) -> SaliencyConfig64 {
        SaliencyConfig64 {
            blur_sigma: self.sigma,
            wavelet: self.wavelet,
            alpha_h: self.alpha_h,
            v_h: self.v_h,
            alpha_t: self.alpha_t,
            v_t: self.v_t,
            kernel_radius: self.kernel_radius,
            n_iter: self.iters,
            stop_mode: self.stop_mode,
            link_boundary: self.link_boundary,
            baseline_space: self.baseline_space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.saliency().validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            bail!("alpha must be positive, got {}", self.alpha);
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Parameter flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with any subset of the parameters
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// proposed | wt-baseline | ft | ft-pca-mpcnn
    #[arg(long)]
    pub method: Option<MethodId>,
    /// haar | db2 | db4
    #[arg(long)]
    pub wavelet: Option<WaveletBasis>,
    /// m-PCNN iteration count
    #[arg(long)]
    pub iters: Option<usize>,
    /// fixed | all-fired
    #[arg(long)]
    pub stop_mode: Option<StopMode>,
    /// F-measure weight
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gaussian pre-blur sigma
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Linking kernel radius
    #[arg(long)]
    pub kernel_radius: Option<usize>,
    /// mirror | zero
    #[arg(long)]
    pub link_boundary: Option<LinkBoundary>,
    /// Channel space of the wavelet baseline: lab | rgb
    #[arg(long)]
    pub baseline_space: Option<ColorSpace>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for batch evaluation (0 = all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Echo the resolved parameters as TOML before running
    #[arg(long)]
    pub print_config: bool,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        take!(
            method => method,
            wavelet => wavelet,
            iters => iters,
            stop_mode => stop_mode,
            alpha => alpha,
            sigma => sigma,
            kernel_radius => kernel_radius,
            link_boundary => link_boundary,
            baseline_space => baseline_space,
            out => out,
            threads => threads
        );
        cfg.validate()?;
        Ok(cfg)
    }
}
