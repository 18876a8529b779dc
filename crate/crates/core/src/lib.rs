//! Quantum annealing of maximum-independent-set instances studied through
//! the fidelity susceptibility.
//!
//! The crate covers the whole pipeline at the library level: random graph
//! ensembles with unique maximum independent sets, exact classical solvers,
//! the transverse-field Ising Hamiltonian of an instance, stochastic series
//! expansion Monte Carlo with replica exchange over the annealing parameter,
//! Monte Carlo estimators, and dense exact diagonalization used as a
//! reference for small systems.

pub mod bitset;
pub mod ed;
pub mod error;
pub mod estimators;
pub mod exchange;
pub mod graph;
pub mod hamiltonian;
pub mod instance;
pub mod rng;
pub mod simulation;
pub mod solver;
pub mod sse;

pub use error::{Error, Result};
pub use graph::Graph;
pub use hamiltonian::{build_operator_table, build_problem, OperatorTable, ProblemHamiltonian};
pub use instance::{MisInstance, VertexLabel};
pub use sse::SseState;
