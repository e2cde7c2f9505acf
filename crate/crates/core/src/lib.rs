//! Numerical laboratory for Cohen-class time-frequency concentration problems,
//! built on quantum harmonic analysis over the finite phase space `ℤ_n × ℤ_n`.

// Guards of the form `!(x > 0.0)` are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ascent;
pub mod concentration;
pub mod error;
pub mod experiments;
pub mod gap_criteria;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod operator_rep;
pub mod oracle;
pub mod phase_space;
pub mod qha;
pub mod quad;
pub mod windows;

pub use error::{LabError, Result};
