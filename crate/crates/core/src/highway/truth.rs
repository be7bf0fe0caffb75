//! Sampled ground truth for checking the predicted tubes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::embedding::{active_features, center_shift, longitudinal_input, longitudinal_matrix};
use super::model::{
    bicycle_rhs, lateral_closed_loop, longitudinal_acceleration, BehaviorParams, Scenario,
    VehicleState, MIN_LATERAL_SPEED,
};
use super::predict::HighwayPrediction;
use super::HighwayError;
use crate::interval::Vector;
use crate::predictor::{rk4_step, step_count, PredictError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthModel {
    /// Bicycle kinematics with the original controllers.
    Nonlinear,
    /// The linearised LPV dynamics the predictor encloses.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthConfig {
    pub samples: usize,
    /// Gains are redrawn at this period; use infinity for constant gains.
    pub resample_period: f64,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub model: TruthModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    /// Lane followed by each vehicle.
    pub lanes: Vec<usize>,
    /// `states[k][i]`: vehicle `i` at `t = k dt`.
    pub states: Vec<Vec<VehicleState>>,
}

/// Half of the draws land on an endpoint so that extreme gains are
/// exercised; the rest are uniform.
fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    match rng.gen_range(0..4) {
        0 => lo,
        1 => hi,
        _ => rng.gen_range(lo..=hi),
    }
}

fn draw_gains(rng: &mut ChaCha8Rng, scenario: &Scenario) -> Vec<BehaviorParams> {
    scenario
        .vehicles()
        .iter()
        .map(|v| {
            let (lo, hi) = (v.theta_lower.to_array(), v.theta_upper.to_array());
            BehaviorParams::from_array(std::array::from_fn(|k| draw(rng, lo[k], hi[k])))
        })
        .collect()
}

struct Dynamics<'a> {
    scenario: &'a Scenario,
    lanes: Vec<usize>,
    model: TruthModel,
    zc: Vector,
    d: Vector,
    active: Vec<super::embedding::ActiveFeatures>,
}

impl Dynamics<'_> {
    fn rhs(&self, z: &Vector, gains: &[BehaviorParams]) -> Vector {
        let vs = self.scenario.vehicles();
        let n = vs.len();
        let state = |i: usize| VehicleState::from_slice(&z.as_slice()[4 * i..4 * i + 4]);
        let mut out = Vector::zeros(4 * n);
        match self.model {
            TruthModel::Nonlinear => {
                for (i, v) in vs.iter().enumerate() {
                    let s = state(i);
                    let front = v.front.map(|f| {
                        let sf = state(f);
                        (sf.v, sf.x - s.x)
                    });
                    let a = longitudinal_acceleration(&gains[i], s.v, front, self.scenario.rules());
                    let lane = &self.scenario.road().lanes[self.lanes[i]];
                    let slip = lateral_closed_loop(&gains[i], s.y, s.psi, lane, s.v, v.half_length)
                        .map(|c| c.slip)
                        .unwrap_or(0.0);
                    out.rows_mut(4 * i, 4)
                        .copy_from(&bicycle_rhs(&s, a, slip, v.half_length));
                }
            }
            TruthModel::Linearized => {
                let lon = Vector::from_iterator(
                    2 * n,
                    (0..n).map(|i| z[4 * i]).chain((0..n).map(|i| z[4 * i + 2])),
                );
                let a = longitudinal_matrix(self.scenario, &self.active, gains);
                let dlon = a * (lon - &self.zc) + &self.d;
                for i in 0..n {
                    let s = state(i);
                    let lane = &self.scenario.road().lanes[self.lanes[i]];
                    let g = &gains[i];
                    out[4 * i] = dlon[i];
                    out[4 * i + 2] = dlon[n + i];
                    out[4 * i + 1] = s.v * (s.psi - lane.psi) + s.v * lane.psi;
                    out[4 * i + 3] = if s.v >= MIN_LATERAL_SPEED {
                        -g.lateral_gain * g.heading_gain / s.v * (s.y - lane.y)
                            - g.heading_gain * (s.psi - lane.psi)
                    } else {
                        0.0
                    };
                }
            }
        }
        out
    }
}

fn simulate(
    scenario: &Scenario,
    cfg: &TruthConfig,
    index: usize,
    zc: &Vector,
    d: &Vector,
) -> Result<TruthSample, HighwayError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let vs = scenario.vehicles();
    let n = vs.len();
    let lanes: Vec<usize> = (0..n)
        .map(|i| {
            let adm = scenario.admissible_lanes(i);
            adm[rng.gen_range(0..adm.len())]
        })
        .collect();
    let dynamics = Dynamics {
        scenario,
        lanes: lanes.clone(),
        model: cfg.model,
        zc: zc.clone(),
        d: d.clone(),
        active: active_features(scenario),
    };

    let steps = step_count(cfg.horizon, cfg.dt);
    let period = if cfg.resample_period.is_finite() && cfg.resample_period > 0.0 {
        step_count(cfg.resample_period, cfg.dt).max(1)
    } else {
        usize::MAX
    };
    let mut z = Vector::from_iterator(4 * n, vs.iter().flat_map(|v| v.state.to_array()));
    let to_states = |z: &Vector| -> Vec<VehicleState> {
        (0..n)
            .map(|i| VehicleState::from_slice(&z.as_slice()[4 * i..4 * i + 4]))
            .collect()
    };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(to_states(&z));
    let mut gains = draw_gains(&mut rng, scenario);
    for k in 0..steps {
        if k > 0 && k % period == 0 {
            gains = draw_gains(&mut rng, scenario);
        }
        let mut f = |s: &Vector| -> Result<Vector, PredictError> { Ok(dynamics.rhs(s, &gains)) };
        z = rk4_step(&mut f, &z, cfg.dt)?;
        states.push(to_states(&z));
    }
    Ok(TruthSample { lanes, states })
}

/// Draws `samples` gain realisations (and lane choices among the
/// admissible hypotheses) and integrates the chosen truth model with RK4
/// at the prediction step. Each sample has its own random stream, so the
/// result does not depend on scheduling.
pub fn monte_carlo_truth(
    scenario: &Scenario,
    cfg: &TruthConfig,
) -> Result<Vec<TruthSample>, HighwayError> {
    if cfg.samples == 0 {
        return Err(HighwayError::Predict(PredictError::InvalidSettings(
            "at least one truth sample is required".into(),
        )));
    }
    if !(cfg.dt > 0.0 && cfg.horizon >= cfg.dt) {
        return Err(HighwayError::Predict(PredictError::InvalidSettings(
            format!("invalid horizon {} / step {}", cfg.horizon, cfg.dt),
        )));
    }
    let zc = center_shift(scenario)?;
    let d = longitudinal_input(scenario);
    (0..cfg.samples)
        .into_par_iter()
        .map(|k| simulate(scenario, cfg, k, &zc, &d))
        .collect()
}

/// Result of comparing truth samples with a predicted tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionReport {
    /// Samples that leave the tube at least once.
    pub violations: usize,
    /// Largest distance outside the tube, before slack.
    pub worst_excess: f64,
}

/// Counts samples leaving the per-vehicle tubes by more than
/// `slack(states at t)`. Samples are matched by index, so the truth must
/// use the prediction's step.
pub fn inclusion_violations<F>(
    prediction: &HighwayPrediction,
    samples: &[TruthSample],
    slack: F,
) -> InclusionReport
where
    F: Fn(&[VehicleState]) -> f64 + Sync,
{
    let per_sample: Vec<(bool, f64)> = samples
        .par_iter()
        .map(|sample| {
            let mut bad = false;
            let mut worst = 0.0f64;
            for (k, states) in sample.states.iter().enumerate() {
                let tol = slack(states);
                for (veh, st) in prediction.vehicles.iter().zip(states) {
                    let Some(b) = veh.tube.states.get(k) else {
                        continue;
                    };
                    for (c, x) in st.to_array().iter().enumerate() {
                        let excess = (b.lower()[c] - x).max(x - b.upper()[c]);
                        worst = worst.max(excess);
                        if !(excess <= tol) {
                            bad = true;
                        }
                    }
                }
            }
            (bad, worst)
        })
        .collect();
    InclusionReport {
        violations: per_sample.iter().filter(|s| s.0).count(),
        worst_excess: per_sample.iter().fold(0.0, |acc, s| acc.max(s.1)),
    }
}
