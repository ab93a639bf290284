// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conditions;
pub mod config;
pub mod error;
pub mod experiment;
pub mod field;
pub mod harness;
pub mod nonlinearity;
pub mod semigroup;
pub mod solver;

pub use error::{Error, Result};
pub use field::{GridField, GridSpec};
pub use nonlinearity::{EnvelopeFunctions, Nonlinearity};
pub use semigroup::HeatPropagator;
