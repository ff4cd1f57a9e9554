//! Exact toolkit for causal inference with multiple causes and an
//! unobserved multi-cause confounder.
//!
//! Everything is finite-discrete, so every claim is checkable by
//! enumeration: joint tables ([`table`]), copula factorization ([`copula`]),
//! structural models with ground-truth potential outcomes and the
//! identical-observables witness pair ([`scm`]), latent-class EM
//! ([`latent`]), the conditional-independence gate ([`gate`]), the
//! observable-only identification estimands ([`identify`]), and sharp
//! linear-program ignorance intervals over the unconstrained outcome copula
//! ([`sensitivity`]).

pub mod copula;
pub mod dataset;
pub mod error;
pub mod gate;
pub mod identify;
pub mod latent;
pub mod rng;
pub mod scm;
pub mod sensitivity;
pub mod simplex;
pub mod table;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use scm::{PotentialOutcomeDist, ScmSpec};
pub use table::{JointTable, VarSpec, EPS_NORM};
