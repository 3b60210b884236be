//! Visual saliency in eigenvector space.
//!
//! An RGB image is projected onto the eigenvectors of its channel covariance,
//! each projection is turned into a conspicuity map from multilevel wavelet
//! detail energy, and the maps are fused by a multi-channel pulse-coupled
//! neural network weighted by the normalized eigenvalues. Two baselines and
//! an evaluation harness (precision, recall, F-measure, ROC/AUC) ship
//! alongside.
//!
//! All numerics are generic over [`Scalar`]; the aliases at the crate root
//! pin the common `f64` and `f32` instantiations.

pub mod eval;
pub mod imagekit;
pub mod methods;
pub mod mpcnn;
pub mod pca;
pub mod scalar;
pub mod wavelet;

mod error;

pub use error::{Error, Result};
pub use imagekit::{BinaryMap, Plane, RgbImage};
pub use methods::{MethodId, SaliencyConfig};
pub use mpcnn::{LinkBoundary, PcnnParams, StopMode};
pub use scalar::Scalar;
pub use wavelet::WaveletBasis;

pub type Plane64 = Plane<f64>;
pub type Plane32 = Plane<f32>;
pub type RgbImage64 = RgbImage<f64>;
pub type RgbImage32 = RgbImage<f32>;
pub type PcaBasis64 = pca::PcaBasis<f64>;
pub type PcaBasis32 = pca::PcaBasis<f32>;
pub type WaveletPyramid64 = wavelet::WaveletPyramid<f64>;
pub type WaveletPyramid32 = wavelet::WaveletPyramid<f32>;
pub type PcnnParams64 = PcnnParams<f64>;
pub type PcnnParams32 = PcnnParams<f32>;
pub type PcnnState64 = mpcnn::PcnnState<f64>;
pub type SaliencyConfig64 = SaliencyConfig<f64>;
pub type SaliencyConfig32 = SaliencyConfig<f32>;
