use rayon::prelude::*;

use super::embedding::{build_lateral_embedding, build_longitudinal_embedding, LpvEmbedding};
use super::model::{Scenario, MIN_LATERAL_SPEED};
use super::HighwayError;
use crate::interval::{IntervalVector, Vector};
use crate::predictor::{integrate, IntervalTrajectory, Method, Predictor};

/// Coordinate order of per-vehicle tubes.
pub const COORDS: [&str; 4] = ["x", "y", "v", "psi"];

/// Prediction under one lane hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTube {
    pub lane: usize,
    pub tube: IntervalTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePrediction {
    pub id: String,
    /// Elementwise hull of the lane tubes, in `COORDS` order.
    pub tube: IntervalTrajectory,
    pub lanes: Vec<LaneTube>,
    /// The speed interval dropped below the lateral model's minimum and the
    /// lateral tube assumes a constant heading.
    pub lateral_degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighwayPrediction {
    pub method: Method,
    pub vehicles: Vec<VehiclePrediction>,
    /// `[positions; velocities]` tube in original coordinates.
    pub longitudinal: IntervalTrajectory,
    pub truncated_at: Option<f64>,
}

/// Integrates an embedding from a point initial state and maps every
/// sample back to original coordinates.
fn run_embedding(
    emb: &LpvEmbedding,
    z0: Vector,
    method: Method,
    horizon: f64,
    dt: f64,
) -> Result<IntervalTrajectory, HighwayError> {
    let x0 = emb.to_transformed(&IntervalVector::point(z0));
    let predictor = Predictor::for_model(method, &emb.model);
    let mut traj = integrate(&predictor, &x0, &emb.input, horizon, dt)?;
    traj.states = traj.states.iter().map(|s| emb.to_original(s)).collect();
    Ok(traj)
}

/// Lateral tube with a frozen heading: `y(t) = y₀ + t v sin ψ₀`.
fn constant_heading(y0: f64, psi0: f64, speed: (f64, f64), times: &[f64]) -> Vec<IntervalVector> {
    times
        .iter()
        .map(|&t| {
            let s = t * psi0.sin();
            let (a, b) = (y0 + s * speed.0, y0 + s * speed.1);
            IntervalVector::from_slices(&[a.min(b), psi0], &[a.max(b), psi0]).expect("ordered")
        })
        .collect()
}

fn truncate(traj: &mut IntervalTrajectory, len: usize, truncated_at: Option<f64>) {
    traj.times.truncate(len);
    traj.states.truncate(len);
    traj.truncated_at = truncated_at;
}

/// Interval prediction of every vehicle over `horizon`.
///
/// The longitudinal chain is predicted jointly in diagonalising
/// coordinates. Each vehicle's lateral motion is then predicted per
/// admissible lane, using the hull of its predicted speed over the whole
/// horizon as the speed parameter range. A non-finite state (expected for
/// the naive predictor on long horizons) truncates all tubes at the same
/// sample.
pub fn predict_highway(
    scenario: &Scenario,
    horizon: f64,
    dt: f64,
    method: Method,
) -> Result<HighwayPrediction, HighwayError> {
    let vs = scenario.vehicles();
    let n = vs.len();
    let emb = build_longitudinal_embedding(scenario)?;
    let z0 = Vector::from_iterator(
        2 * n,
        vs.iter()
            .map(|v| v.state.x)
            .chain(vs.iter().map(|v| v.state.v)),
    );
    let longitudinal = run_embedding(&emb, z0, method, horizon, dt)?;
    let times = longitudinal.times.clone();

    struct Lateral {
        lane: usize,
        states: Vec<IntervalVector>,
        truncated_at: Option<f64>,
        degraded: bool,
    }

    let per_vehicle: Vec<Vec<Lateral>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = &vs[i];
            let speed = longitudinal
                .states
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, s| {
                    (acc.0.min(s.lower()[n + i]), acc.1.max(s.upper()[n + i]))
                });
            scenario
                .admissible_lanes(i)
                .into_par_iter()
                .map(|lane| {
                    if speed.0 < MIN_LATERAL_SPEED {
                        return Ok(Lateral {
                            lane,
                            states: constant_heading(v.state.y, v.state.psi, speed, &times),
                            truncated_at: None,
                            degraded: true,
                        });
                    }
                    let emb = build_lateral_embedding(v, &scenario.road().lanes[lane], speed)?;
                    let z0 = Vector::from_vec(vec![v.state.y, v.state.psi]);
                    let traj = run_embedding(&emb, z0, method, horizon, dt)?;
                    Ok(Lateral {
                        lane,
                        states: traj.states,
                        truncated_at: traj.truncated_at,
                        degraded: false,
                    })
                })
                .collect::<Result<Vec<_>, HighwayError>>()
        })
        .collect::<Result<Vec<_>, HighwayError>>()?;

    let mut len = times.len();
    let mut truncated_at = longitudinal.truncated_at;
    for lat in per_vehicle.iter().flatten() {
        if lat.states.len() < len {
            len = lat.states.len();
            truncated_at = lat.truncated_at;
        }
    }

    let vehicles = per_vehicle
        .into_iter()
        .enumerate()
        .map(|(i, lats)| {
            let degraded = lats.iter().any(|l| l.degraded);
            let lanes: Vec<LaneTube> = lats
                .into_iter()
                .map(|lat| {
                    let states = (0..len)
                        .map(|k| {
                            let lon = &longitudinal.states[k];
                            let side = &lat.states[k];
                            IntervalVector::from_slices(
                                &[
                                    lon.lower()[i],
                                    side.lower()[0],
                                    lon.lower()[n + i],
                                    side.lower()[1],
                                ],
                                &[
                                    lon.upper()[i],
                                    side.upper()[0],
                                    lon.upper()[n + i],
                                    side.upper()[1],
                                ],
                            )
                            .expect("ordered tubes")
                        })
                        .collect();
                    LaneTube {
                        lane: lat.lane,
                        tube: IntervalTrajectory {
                            times: times[..len].to_vec(),
                            states,
                            method,
                            dt,
                            truncated_at,
                        },
                    }
                })
                .collect();
            let mut tube = lanes[0].tube.clone();
            for other in &lanes[1..] {
                for (s, o) in tube.states.iter_mut().zip(&other.tube.states) {
                    *s = s.hull(o).expect("same dimension");
                }
            }
            VehiclePrediction {
                id: vs[i].id.clone(),
                tube,
                lanes,
                lateral_degraded: degraded,
            }
        })
        .collect();

    let mut longitudinal = longitudinal;
    truncate(&mut longitudinal, len, truncated_at);
    Ok(HighwayPrediction {
        method,
        vehicles,
        longitudinal,
        truncated_at,
    })
}
