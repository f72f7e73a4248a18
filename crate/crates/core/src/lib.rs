// SPDX-License-Identifier: Apache-2.0

//! Elastic flow of closed curves in `R^n`.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod seeds;
pub mod spectral;
pub mod variation;

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use flow::{FlowState, FlowTrace, Scheme, StepperConfig, TraceRow};
pub use geometry::{DiscreteCurve, NormalField, ScalarField, VectorField};
pub use graph::TubularData;
pub use seeds::{seed_curve, SeedKind, SeedSpec};
pub use spectral::DiffScheme;
pub use variation::{EnergyParams, OperatorMatrix};
