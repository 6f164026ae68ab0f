//! Criticality theory for Schrödinger operators `H = L + q` on locally
//! finite weighted graphs, computed along exhaustions by finite regions.

pub mod criticality;
pub mod error;
pub mod forms;
pub mod graph;
pub mod heat;
pub mod io;
pub mod oracle;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use forms::RegionFunction;
pub use graph::{
    BallShape, ExhaustionFamily, ExplicitGraph, Field, FiniteRegion, GraphModel, Topology, Vertex,
};
