//! PLS1 regression via NIPALS on complete and incomplete data.
//!
//! The crate covers the full pipeline studied for choosing the number of
//! PLS components when predictors have missing cells:
//!
//! - [`data`]: masked matrices, standardization over observed cells.
//! - [`nipals`]: NIPALS principal components with missing values.
//! - [`plsr`]: NIPALS-PLSR fitting and regular / missing-data prediction.
//! - [`dof`]: Krylov-based unbiased degrees of freedom for PLS.
//! - [`selection`]: Q² (LOO / k-fold, standard / adaptative), AIC, BIC.
//! - [`impute`]: MICE (normal linear model), kNN with Gower distance,
//!   iterative SVD, and mode pooling.
//! - [`simulate`]: reference data with a known component count, MCAR / MAR
//!   amputation and the replicate pipeline.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and the parallel grid runner live in the `plsmiss` crate.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod data;
pub mod dof;
mod error;
pub mod impute;
pub mod linalg;
mod math;
pub mod nipals;
pub mod plsr;
pub mod rng;
pub mod selection;
pub mod simulate;

pub use data::{center_scale, MaskedMatrix, ResponseVector, ScalingParams};
pub use error::{Axis, Error, Result};
pub use linalg::Matrix;
pub use plsr::{PlsModel, PredictionMode};
pub use rng::SeededRng;
