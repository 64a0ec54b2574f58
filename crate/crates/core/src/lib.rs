//! Simulation and decoding of Z_d toric codes under generalized bit-flip
//! noise, with a renormalization-group soft decoder, optional belief
//! propagation between cells, and Monte Carlo threshold estimation.

pub mod bp;
pub mod cell;
pub mod cli;
pub mod error;
pub mod exact;
pub mod fit;
pub mod harness;
pub mod hashing;
pub mod lattice;
pub mod marginal;
pub mod noise;
pub mod par;
pub mod rg;
pub mod zd;

pub use error::{Error, Result};
pub use lattice::{ClassLabel, Syndrome, TorusLattice};
pub use noise::{NoiseModel, QuditDistribution};
pub use rg::{DecoderConfig, RgDecoder};
pub use zd::{XOperator, Zd, ZdCharge};
