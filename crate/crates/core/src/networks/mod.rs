//! Summary network, conditional coupling flow and their standardization.

mod approximator;
mod flow;
mod mlp;
mod standardizer;
mod summary;

pub use approximator::{AmortizedApproximator, PosteriorSampler};
pub use flow::{ConditionalCouplingFlow, CouplingLayer, FlowConfig, DEFAULT_CLAMP};
pub use mlp::{Binder, Dense, Mlp};
pub use standardizer::Standardizer;
pub use summary::{Pooling, SummaryConfig, SummaryNetwork};
