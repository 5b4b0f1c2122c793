//! Dense float64 arrays and a reverse-mode tape sufficient for MLPs,
//! coupling flows, set pooling and kernel matrices.

mod array;
mod gemm;
mod tape;

pub use array::Array;
pub use tape::{concat_cols, Gradients, NonFinitePolicy, Tape, Var};
