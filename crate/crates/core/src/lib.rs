//! Guaranteed interval enclosures for linear parameter-varying systems.
//!
//! The crate provides interval arithmetic on dense matrices, similarity
//! transforms into Metzler form, a naive and a stable interval predictor,
//! stability certificates for the latter, and a highway traffic
//! application that predicts vehicle trajectory tubes.

pub mod highway;
pub mod interval;
pub mod io;
pub mod lmi;
pub mod metzler;
pub mod predictor;

pub use interval::{IntervalMatrix, IntervalVector, Matrix, Vector};
pub use predictor::{IntervalTrajectory, Method, PolytopicModel, SignalBounds};
