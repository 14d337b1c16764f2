//! Exact belief update in conditional linear Gaussian (CLG) Bayesian networks.
//!
//! A CLG network mixes discrete variables (conditional probability tables)
//! with continuous variables whose conditional densities are univariate
//! normals with means linear in the continuous parents and parameters indexed
//! by the discrete parents. Belief update runs as lazy propagation on a
//! strong junction tree: clique and separator contents stay factorized into
//! sets of discrete factors and CLG densities, variables are eliminated with
//! arc-reversal (EXCHANGE) operations and barren-variable removals, and
//! continuous evidence is inserted by pushing densities toward the root.
//!
//! The crate also ships a brute-force enumeration oracle used to verify the
//! propagation engine, plus a benchmark harness for randomized sweeps.

pub mod algebra;
pub mod bench;
pub mod engine;
pub mod fixtures;
pub mod jtree;
pub mod model;
pub mod oracle;

pub use algebra::{AlgebraError, Density, Factor, GaussianMixture, Potential};
pub use engine::{EngineError, TreeState};
pub use jtree::StrongJunctionTree;
pub use model::{Evidence, Network, VarId};
