use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::HighwayError;
use crate::interval::{neg, Vector};

/// Lateral models divide by the speed; below this the lateral prediction
/// falls back to a constant-heading tube.
pub const MIN_LATERAL_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub psi: f64,
}

impl VehicleState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.v, self.psi]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            x: s[0],
            y: s[1],
            v: s[2],
            psi: s[3],
        }
    }
}

/// Controller gains of one driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorParams {
    /// Tracking of the speed limit.
    pub speed_gain: f64,
    /// Braking to match a slower front vehicle.
    pub front_speed_gain: f64,
    /// Braking to restore the safe distance.
    pub distance_gain: f64,
    /// Lateral position to lateral speed.
    pub lateral_gain: f64,
    /// Heading tracking.
    pub heading_gain: f64,
}

impl BehaviorParams {
    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            speed_gain: a[0],
            front_speed_gain: a[1],
            distance_gain: a[2],
            lateral_gain: a[3],
            heading_gain: a[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.speed_gain,
            self.front_speed_gain,
            self.distance_gain,
            self.lateral_gain,
            self.heading_gain,
        ]
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|k| 0.5 * (a[k] + b[k])))
    }
}

/// Traffic rules shared by all drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rules {
    pub speed_limit: f64,
    pub jam_distance: f64,
    pub time_gap: f64,
}

impl Rules {
    pub fn safe_distance(&self, v: f64) -> f64 {
        self.jam_distance + v * self.time_gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub lanes: Vec<Lane>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: String,
    pub state: VehicleState,
    pub half_length: f64,
    /// Index of the followed vehicle, frozen for the whole prediction.
    pub front: Option<usize>,
    /// Lane hypotheses (indices into `Road::lanes`).
    pub lanes: Vec<usize>,
    pub theta_lower: BehaviorParams,
    pub theta_upper: BehaviorParams,
}

/// A validated traffic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    rules: Rules,
    road: Road,
    right_hand_traffic: bool,
    vehicles: Vec<Vehicle>,
}

fn invalid(what: impl Into<String>) -> HighwayError {
    HighwayError::InvalidScenario(what.into())
}

impl Scenario {
    pub fn new(
        rules: Rules,
        road: Road,
        right_hand_traffic: bool,
        vehicles: Vec<Vehicle>,
    ) -> Result<Self, HighwayError> {
        let finite = |x: f64| x.is_finite();
        if !(finite(rules.speed_limit) && rules.speed_limit > 0.0)
            || !(finite(rules.jam_distance) && rules.jam_distance >= 0.0)
            || !(finite(rules.time_gap) && rules.time_gap >= 0.0)
        {
            return Err(invalid("traffic rules must be finite and nonnegative"));
        }
        if road.lanes.is_empty() {
            return Err(invalid("road has no lanes"));
        }
        if !(finite(road.width) && road.width > 0.0) {
            return Err(invalid("lane width must be positive"));
        }
        if road.lanes.iter().any(|l| !finite(l.y) || !finite(l.psi)) {
            return Err(invalid("lane geometry must be finite"));
        }
        if vehicles.is_empty() {
            return Err(invalid("scenario has no vehicles"));
        }
        let mut ids = HashSet::new();
        for (i, v) in vehicles.iter().enumerate() {
            let who = &v.id;
            if !ids.insert(v.id.as_str()) {
                return Err(invalid(format!("duplicate vehicle id {who}")));
            }
            if v.state.to_array().iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("vehicle state must be finite ({who})")));
            }
            if v.state.v < 0.0 {
                return Err(invalid(format!(
                    "vehicle speed must be nonnegative ({who})"
                )));
            }
            if !(finite(v.half_length) && v.half_length > 0.0) {
                return Err(invalid(format!("vehicle length must be positive ({who})")));
            }
            if v.lanes.is_empty() || v.lanes.iter().any(|&l| l >= road.lanes.len()) {
                return Err(invalid(format!("lane index out of range ({who})")));
            }
            match v.front {
                Some(f) if f == i => {
                    return Err(invalid(format!("vehicle follows itself ({who})")))
                }
                Some(f) if f >= vehicles.len() => {
                    return Err(invalid(format!(
                        "front vehicle reference out of range ({who})"
                    )))
                }
                _ => {}
            }
            let (lo, hi) = (v.theta_lower.to_array(), v.theta_upper.to_array());
            if lo.iter().chain(hi.iter()).any(|x| !x.is_finite()) {
                return Err(invalid(format!("parameter box must be finite ({who})")));
            }
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return Err(invalid(format!("parameter box order ({who})")));
            }
            if lo.iter().any(|&x| x < 0.0) {
                return Err(invalid(format!(
                    "parameter box must be nonnegative ({who})"
                )));
            }
        }
        Ok(Self {
            rules,
            road,
            right_hand_traffic,
            vehicles,
        })
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    pub fn road(&self) -> &Road {
        &self.road
    }

    pub fn right_hand_traffic(&self) -> bool {
        self.right_hand_traffic
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    /// Same scene with the right-hand-traffic option replaced.
    pub fn with_right_hand_traffic(&self, on: bool) -> Self {
        Self {
            right_hand_traffic: on,
            ..self.clone()
        }
    }

    /// Same scene with every parameter box collapsed to its midpoint.
    pub fn with_nominal_parameters(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.vehicles {
            let mid = v.theta_lower.midpoint(&v.theta_upper);
            v.theta_lower = mid;
            v.theta_upper = mid;
        }
        out
    }

    /// Lane whose centerline is nearest to the vehicle.
    pub fn current_lane(&self, vehicle: usize) -> usize {
        let y = self.vehicles[vehicle].state.y;
        let lanes = &self.road.lanes;
        (0..lanes.len())
            .min_by(|&a, &b| (lanes[a].y - y).abs().total_cmp(&(lanes[b].y - y).abs()))
            .expect("road has lanes")
    }

    /// Lane hypotheses that survive the traffic rules. With right-hand
    /// traffic (lateral coordinate increasing to the left), a vehicle with
    /// nobody in front has no reason to move further left, so lanes left
    /// of its current one are dropped unless that leaves nothing.
    pub fn admissible_lanes(&self, vehicle: usize) -> Vec<usize> {
        let v = &self.vehicles[vehicle];
        if !self.right_hand_traffic || v.front.is_some() {
            return v.lanes.clone();
        }
        let here = self.road.lanes[self.current_lane(vehicle)].y;
        let kept: Vec<usize> = v
            .lanes
            .iter()
            .copied()
            .filter(|&l| self.road.lanes[l].y <= here)
            .collect();
        if kept.is_empty() {
            v.lanes.clone()
        } else {
            kept
        }
    }
}

/// Kinematic bicycle model: `(ẋ, ẏ, v̇, ψ̇)`.
pub fn bicycle_rhs(z: &VehicleState, accel: f64, slip: f64, half_length: f64) -> Vector {
    Vector::from_vec(vec![
        z.v * z.psi.cos(),
        z.v * z.psi.sin(),
        accel,
        z.v / half_length * slip.tan(),
    ])
}

/// Linear IDM-like acceleration. The two braking terms only act through
/// negative parts, so they vanish when the front vehicle is faster or
/// farther than the safe distance; without a front vehicle they are absent.
pub fn longitudinal_acceleration(
    theta: &BehaviorParams,
    v: f64,
    front: Option<(f64, f64)>,
    rules: &Rules,
) -> f64 {
    let mut a = theta.speed_gain * (rules.speed_limit - v);
    if let Some((v_front, gap)) = front {
        a -= theta.front_speed_gain * neg(v_front - v);
        a -= theta.distance_gain * neg(gap - rules.safe_distance(v));
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralCommand {
    pub heading_rate: f64,
    pub slip: f64,
    /// The arcsine argument left `[-1, 1]` and was clamped.
    pub clamped: bool,
}

/// Cascade lane-keeping controller and the slip angle realising it.
pub fn lateral_closed_loop(
    theta: &BehaviorParams,
    y: f64,
    psi: f64,
    lane: &Lane,
    v: f64,
    half_length: f64,
) -> Result<LateralCommand, HighwayError> {
    if !(v >= MIN_LATERAL_SPEED) {
        return Err(HighwayError::SpeedTooLow {
            v,
            min: MIN_LATERAL_SPEED,
        });
    }
    let lateral_speed = theta.lateral_gain * (lane.y - y);
    let ratio = lateral_speed / v;
    let clamped = !(-1.0..=1.0).contains(&ratio);
    let heading_rate = theta.heading_gain * (lane.psi + ratio.clamp(-1.0, 1.0).asin() - psi);
    Ok(LateralCommand {
        heading_rate,
        slip: (half_length / v * heading_rate).atan(),
        clamped,
    })
}
