//! Evaluation tooling: calibration ranks, posterior error, summary PCA and
//! severity sweeps.

mod pca;
mod posterior;
mod samplers;
mod sbc;
mod sweep;

pub use pca::{pca, PcaResult};
pub use posterior::{analytic_means, posterior_error, posterior_means, rmse};
pub use samplers::{AnalyticSampler, PriorSampler};
pub use sbc::{sbc, sbc_from_draws, SbcResult, Uniformity, CHI_SQUARE_BINS, ECDF_BAND_LEVEL};
pub use sweep::{severity_sweep, sweep_cell, SeverityAxis, SeverityCell, SeverityGrid, SweepConfig};
