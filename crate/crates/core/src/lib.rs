//! Regret-guided revision of interpretable multi-attribute choice models.
//!
//! A candidate model written in a small expression language is fitted per
//! subject by maximum likelihood, compared trial by trial against a cached
//! black-box reference predictor, and the trials where the reference wins by
//! at least a threshold are handed to a reviser that proposes a new model.
//!
//! The numeric core (`msl` evaluation, `fitting`) is generic over [`Scalar`];
//! the orchestration layers work in `f64`, exposed through the aliases below.

pub mod data;
pub mod engine;
pub mod fitting;
pub mod msl;
pub mod regret;
pub mod reviser;
pub mod scalar;
pub mod synth;

pub use scalar::Scalar;

/// Scalar used by the data, regret and engine layers.
pub type Real = f64;

pub type FeatureMatrix = msl::FeatureMatrix<Real>;
pub type EvalOutput = msl::EvalOutput<Real>;
pub type FitResult = fitting::FitResult<Real>;
pub type FitOptions = fitting::FitOptions<Real>;
pub type SubjectData = fitting::SubjectData<Real>;

pub type FeatureMatrixF32 = msl::FeatureMatrix<f32>;
pub type EvalOutputF32 = msl::EvalOutput<f32>;
pub type FitResultF32 = fitting::FitResult<f32>;
