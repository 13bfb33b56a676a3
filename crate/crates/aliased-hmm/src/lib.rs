//! Hidden Markov models with two *aliased* states — states that share one
//! output distribution and are therefore indistinguishable from any single
//! observation.
//!
//! The crate answers four questions about such models:
//!
//! * **Minimality** — can the aliased pair be merged without changing the
//!   output law? ([`structure::is_minimal`])
//! * **Identifiability** — is the transition matrix pinned down by the output
//!   law, up to state relabeling? ([`structure::feasible_region`],
//!   [`structure::effective_region`])
//! * **Detection** — given one long output sequence, is the generating chain
//!   aliased at all? ([`learner::detect`])
//! * **Learning** — recover the full transition matrix from a single pass of
//!   second- and third-order moments ([`learner::learn`]), benchmarked
//!   against Baum–Welch ([`baselines::baum_welch`]).
//!
//! Transition matrices are **column-stochastic** throughout:
//! `a[(i, j)] = P(next = i | current = j)`, every column sums to one. Most
//! HMM software is row-stochastic; transpose when importing models.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `ahmm` binary wraps the same entry points in a small CLI.

pub mod baselines;
pub mod decomp;
pub mod emission;
pub mod error;
pub mod generate;
pub mod io;
pub mod learner;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod structure;
pub mod sweep;
pub mod util;

pub use emission::Gaussian;
pub use error::{Error, Result};
pub use model::{Hmm, StationaryInfo, ValidationReport};
