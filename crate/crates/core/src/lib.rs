//! Simulation and analysis of state discrimination and unstructured search
//! when the Schrödinger equation carries an amplitude-dependent diagonal
//! nonlinearity of the Gross-Pitaevskii family.
//!
//! The qubit picture lives in [`blochdyn`] and [`discrimination`], the general
//! theorems about separation speed are checked in [`bounds`], the search
//! pipeline and the N-dimensional integrator are in [`search`], higher
//! dimensional embeddings are explored by [`optimizer`] and [`meanfield`]
//! covers the mean-field consistency relations.

pub mod blochdyn;
pub mod bounds;
pub mod discrimination;
pub mod error;
pub mod interp;
pub mod meanfield;
pub mod nonlinearity;
pub mod ode;
pub mod optimizer;
pub mod search;
pub mod table;

pub use error::{Error, Result};
pub use nonlinearity::{Kind, Nonlinearity, ReducedNonlinearity};
