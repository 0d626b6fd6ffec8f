//! Mini-batch Metropolis–Hastings with batch tempering.
//!
//! Each MH step scores the proposal on a fresh uniformly drawn mini-batch,
//! using `c_n · μ̂_I(θ)` in place of the full log-likelihood. The chain is an
//! exact MH chain on the augmented space `(θ, I)` whose θ-marginal is a
//! tempered posterior at temperature `T = n / c_n`, up to a subsampling bias
//! term. Gradient-guided proposals (SGLD and the reversible forward/backward
//! mixture, RSGLD) come with exact proposal densities so the acceptance test
//! stays valid.
//!
//! Modules:
//! - [`model`]: likelihood families, datasets, synthetic data
//! - [`sampler`]: the MH step, chain state and chain runners
//! - [`proposals`]: random walk, SGLD and RSGLD kernels with log densities
//! - [`oracle`]: closed-form and enumerated reference distributions
//! - [`diagnostics`]: acceptance accounting, β control, TV distance, mode visits
//! - [`experiments`]: configurable end-to-end experiments and run manifests

pub mod batch;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod math;
pub mod model;
pub mod oracle;
pub mod par;
pub mod proposals;
pub mod rng;
pub mod sampler;

pub use batch::{sample_batch, BatchIndex, BatchSampler};
pub use error::{Error, Result};
pub use model::{Dataset, ModelSpec, ParamVector, Record};
pub use par::Execution;
pub use proposals::{Direction, Proposal, RsgldConfig, RwConfig};
pub use sampler::{ChainState, StepRecord, TemperSpec};
