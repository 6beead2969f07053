//! Monte Carlo checks: sampled block matrices, soft-spin Hessians and
//! Gaussian landscapes.

pub mod landscape;
pub mod rng;
pub mod sampling;

pub use landscape::{landscape_demo, landscape_minima_count, CorrelatorSpec, LandscapeDemo, LandscapeSampler};
pub use sampling::{
    block_spectra, logdet_rate, outlier_check, sample_block_matrix, sample_block_spectrum,
    sample_softspin_hessian, validate_block_model, BlockValidation, DiagonalSpec, LogdetReport,
    OutlierReport, SamplerConfig,
};
