//! Classical emulation of relaxation iterations embedded in a block-bidiagonal
//! linear system, solved with a polynomial quantum linear-system emulation and
//! read out by index-register measurement.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocksys;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod iterate;
pub mod linalg;
pub mod measure;
pub mod qlsa;
pub mod theory;

pub use error::{QrlsError, Result};
