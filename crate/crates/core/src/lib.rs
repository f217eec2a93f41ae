//! Star-network transport: Kedem–Katchalsky couplings, hyperbolic
//! transmission coefficients and the vanishing-viscosity limit.

pub mod error;
pub mod linalg;
pub mod network;
pub mod transmission;
pub mod config;
pub mod data_prep;
pub mod design;
pub mod experiment;
pub mod piecewise;
pub mod poly;
pub mod hyperbolic;
pub mod parabolic;

pub use error::{Error, Result};
pub use network::{
    alpha_from_k, build_network, validate_assumptions, AlphaMatrix, Arc, ArcSpec, AssumptionReport,
    CouplingMatrix, Orientation, StarNetwork,
};
