//! Blind and side-information-guided one-unit independent vector extraction.
//!
//! The blind algorithm is the one-unit FastICA/FastIVA iteration expressed on
//! the mixing vector of the source of interest, with the separating vector
//! tied to it by the MPDR beamformer (the orthogonal constraint). The informed
//! variant replaces the sample covariance inside that beamformer by a
//! covariance whose samples are weighted by a scalar guide signal, which turns
//! the coupling into an approximate MVDR beamformer and steers the iteration
//! toward the guided source.
//!
//! ```no_run
//! use ive_core::{run_extraction, ExtractionConfig, MixtureTensor, SideInfo};
//! # fn demo(x: MixtureTensor, r: Vec<num_complex::Complex64>) -> ive_core::Result<()> {
//! let side = SideInfo::shared(r)?;
//! let out = run_extraction(&x, Some(&side), &ExtractionConfig::default(), None)?;
//! println!("{} iterations", out.trace.len());
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod beamformer;
pub mod error;
pub mod extractor;
pub mod linalg;
pub mod rng;
pub mod room;
pub mod score;
pub mod signal;
pub mod sim;

pub use beamformer::{
    mpdr, mvdr, mvdr_constraint, oc_constraint, reproject_mixing, BeamformerOutput,
};
pub use error::{Error, Result};
pub use extractor::{
    approx_hessian, collapsed_hessian, newton_step, normalized_gradient, raw_gradient,
    run_extraction, run_with_covariances, BlockingMatrix, ExtractionConfig, ExtractionResult,
    GradientParts, IterationRecord, IterationTrace, Mode, StepOptions,
};
pub use linalg::{CMat, CVec, C64};
pub use score::{
    contrast, phi_default, scalar_stats, NormalizedSourceVector, ScalarStats, Score, ScoreFunction,
};
pub use signal::{
    sample_covariance, weighted_covariance, CovarianceSet, MixingVector, MixtureTensor,
    SeparatingVector, SideInfo, WeightFunction,
};

/// Algorithm components implemented by this crate, as listed by `ive --version`.
pub const IMPLEMENTED_COMPONENTS: &[&str] = &[
    "weighted-covariance",
    "reciprocal-power-weighting",
    "oc-constraint",
    "mvdr-constraint",
    "mixing-reprojection",
    "newton-update",
    "fastica-reduction",
    "contrast-gradient",
    "approx-hessian",
];
