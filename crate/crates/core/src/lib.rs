//! Principal component analysis for multivariate extremes.
//!
//! The pipeline: turn observations into angles `X/‖X‖`, keep the `k` with
//! the largest radius, fit the leading eigenspace of their mixed second
//! moments, and estimate the angular measure from projections onto it.
//!
//! ```
//! use expca::{extract_exceedances, empirical_moment_matrix, fit_pca, sample_model, ModelSpec, RngStream};
//!
//! let spec = ModelSpec::dirichlet(5, 2, 1.0);
//! let data = sample_model(RngStream::new(1, 0), &spec, 2000).unwrap();
//! let sample = extract_exceedances(&data, 100).unwrap();
//! let fit = fit_pca(&empirical_moment_matrix(&sample).unwrap(), 2).unwrap();
//! assert!(fit.captured > 0.9);
//! ```

pub mod config;
pub mod dimension;
pub mod error;
pub mod experiments;
pub mod extremes;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod models;
pub mod numeric;
pub mod pca;

pub use config::Config;
pub use dimension::{select_dimension, DimensionSelection};
pub use error::{Error, Result};
pub use extremes::{
    empirical_angular_measure, empirical_moment_matrix, extract_exceedances, AngularSample,
    DataMatrix, DiscreteAngularMeasure, MomentMatrix,
};
pub use functionals::{
    all_functionals, pca_angular_measure, DimMode, EstimatorConfig, TailFunctionalParams,
};
pub use linalg::{Matrix, ProjectionMatrix, SymmetricEigen};
pub use models::{sample_model, Family, ModelSpec, RngStream};
pub use pca::{fit_pca, EigenFrame, PcaFit, SkewMatrix};
