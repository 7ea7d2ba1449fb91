//! Unsupervised semantic segmentation of multidimensional time series in
//! a learned latent space.
//!
//! The crate covers the whole chain: matrix profiles on raw channels
//! ([`matprof`]), arc-curve segmentation ([`arc`]), a small autoencoder
//! engine ([`autoenc`]), latent-space matrix profiles ([`lsmp`]), change-point
//! extractors ([`extract`]), end-to-end pipelines ([`pipeline`]), metrics and
//! grid search ([`eval`]) and dataset I/O ([`io`]).

pub mod arc;
pub mod autoenc;
pub mod lsmp;
pub mod error;
pub mod eval;
pub mod extract;
pub mod io;
pub mod matprof;
pub mod pipeline;
pub mod series;

pub use error::{Error, ErrorClass, Result};
