//! Energy disaggregation toolkit: a household data model with on-disk
//! storage, data-quality diagnostics, usage statistics, preprocessing,
//! combinatorial optimisation and factorial HMM disaggregation, accuracy
//! metrics and a seeded synthetic data generator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod disaggregation;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocessing;
pub mod stats;
pub mod synth;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
pub use model::{Building, Channel, DataSet, Gap, Measurement, Quantity, Variant};
