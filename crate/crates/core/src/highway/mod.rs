//! Highway traffic prediction.
//!
//! Vehicles follow a kinematic bicycle model driven by a linear IDM-like
//! longitudinal controller and a cascade lateral controller with unknown
//! gains. The closed loop is linearised around the lane centerlines and
//! cast into LPV form, diagonalised, and fed to the interval predictors.

mod embedding;
mod model;
mod predict;
mod truth;

pub use embedding::{
    active_features, build_lateral_embedding, build_longitudinal_embedding, center_shift,
    follow_order, lateral_matrix, longitudinal_center, longitudinal_input, longitudinal_matrix,
    ActiveFeatures, LpvEmbedding,
};
pub use model::{
    bicycle_rhs, lateral_closed_loop, longitudinal_acceleration, BehaviorParams, Lane,
    LateralCommand, Road, Rules, Scenario, Vehicle, VehicleState, MIN_LATERAL_SPEED,
};
pub use predict::{predict_highway, HighwayPrediction, LaneTube, VehiclePrediction, COORDS};
pub use truth::{
    inclusion_violations, monte_carlo_truth, InclusionReport, TruthConfig, TruthModel, TruthSample,
};

use thiserror::Error;

use crate::interval::IntervalError;
use crate::metzler::MetzlerError;
use crate::predictor::PredictError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HighwayError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("front-vehicle assignments form a cycle through vehicle {0}")]
    CyclicFollowing(String),
    #[error("speed {v} m/s is below the lateral model minimum {min} m/s")]
    SpeedTooLow { v: f64, min: f64 },
    #[error(transparent)]
    Metzler(#[from] MetzlerError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}
