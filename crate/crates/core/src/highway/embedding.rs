//! LPV embeddings `Ż = A(θ)(Z − Zc) + d` of the linearised closed loop.
//!
//! Every uncertain parameter enters `A` affinely and separately, so with a
//! center `θc` and `A₀ = A(θc)`, `A(θ) = A₀ + Σₖ (θₖ − θc,ₖ) Gₖ`. Each
//! parameter contributes the deviations `A(θc with θₖ at an endpoint) − A₀`,
//! weighted independently in `[0, 1]`. Enumerating box corners instead
//! would multiply the deviation sums by roughly `2^(p−1)`.

use super::model::{BehaviorParams, Lane, Scenario, Vehicle, MIN_LATERAL_SPEED};
use super::HighwayError;
use crate::interval::{IntervalVector, Matrix, Vector};
use crate::metzler::{eigendecomposition_transform, SimilarityTransform};
use crate::predictor::{PolytopicModel, SignalBounds};

/// A polytopic model in diagonalising coordinates `Z' = S⁻¹(Z − Zc)`.
#[derive(Debug, Clone)]
pub struct LpvEmbedding {
    pub center_shift: Vector,
    /// Bounds on `d`; the transformed model uses `B = S⁻¹`.
    pub input: SignalBounds,
    pub model: PolytopicModel,
    pub transform: SimilarityTransform,
    pub labels: Vec<String>,
}

impl LpvEmbedding {
    fn build(
        a0: Matrix,
        vertices: Vec<Matrix>,
        center_shift: Vector,
        input: IntervalVector,
        labels: Vec<String>,
    ) -> Result<Self, HighwayError> {
        let transform = eigendecomposition_transform(&a0)?;
        // Deviations are conjugated directly so that a vertex equal to the
        // center yields an exactly zero deviation.
        let deltas = vertices
            .iter()
            .map(|v| transform.conjugate(&(v - &a0)))
            .collect();
        let model = PolytopicModel::new(
            transform.transformed_center.clone(),
            deltas,
            transform.s_inv.clone(),
        )?;
        Ok(Self {
            center_shift,
            input: SignalBounds::constant(input),
            model,
            transform,
            labels,
        })
    }

    /// Maps an initial box in original coordinates to transformed ones.
    pub fn to_transformed(&self, z: &IntervalVector) -> IntervalVector {
        let shifted = z
            .translate(&-&self.center_shift)
            .expect("matching dimension");
        crate::interval::mul_const_interval(&self.transform.s_inv, &shifted)
            .expect("matching dimension")
    }

    /// Maps a transformed box back: `S Z' + Zc`.
    pub fn to_original(&self, z: &IntervalVector) -> IntervalVector {
        crate::interval::mul_const_interval(&self.transform.s, z)
            .expect("matching dimension")
            .translate(&self.center_shift)
            .expect("matching dimension")
    }
}

/// Which braking features a follower uses over the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveFeatures {
    pub front_speed: bool,
    pub distance: bool,
}

/// Braking features are decided once, from the initial scene: the speed
/// term is active when the front vehicle is slower, the distance term when
/// the gap is below the safe distance. Inactive gains are fixed to zero.
pub fn active_features(scenario: &Scenario) -> Vec<ActiveFeatures> {
    let vs = scenario.vehicles();
    vs.iter()
        .map(|v| match v.front {
            None => ActiveFeatures::default(),
            Some(f) => {
                let front = &vs[f].state;
                ActiveFeatures {
                    front_speed: front.v < v.state.v,
                    distance: front.x - v.state.x < scenario.rules().safe_distance(v.state.v),
                }
            }
        })
        .collect()
}

/// Vehicle indices ordered so that every front vehicle precedes its
/// followers.
pub fn follow_order(scenario: &Scenario) -> Result<Vec<usize>, HighwayError> {
    let vs = scenario.vehicles();
    let n = vs.len();
    let mut depth: Vec<Option<usize>> = vec![None; n];
    for start in 0..n {
        let mut chain = Vec::new();
        let mut cur = start;
        let base = loop {
            if let Some(d) = depth[cur] {
                break d + 1;
            }
            if chain.contains(&cur) {
                return Err(HighwayError::CyclicFollowing(vs[cur].id.clone()));
            }
            chain.push(cur);
            match vs[cur].front {
                Some(f) => cur = f,
                None => break 0,
            }
        };
        for (k, &i) in chain.iter().rev().enumerate() {
            depth[i] = Some(base + k);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (depth[i].expect("all visited"), i));
    Ok(order)
}

/// `Zc`: velocities at the speed limit and every follower one safe
/// distance (at the limit) behind its leader. State order is
/// `[positions; velocities]`.
pub fn center_shift(scenario: &Scenario) -> Result<Vector, HighwayError> {
    let vs = scenario.vehicles();
    let n = vs.len();
    let rules = scenario.rules();
    let mut zc = Vector::zeros(2 * n);
    for i in follow_order(scenario)? {
        if let Some(f) = vs[i].front {
            zc[i] = zc[f] - rules.safe_distance(rules.speed_limit);
        }
        zc[n + i] = rules.speed_limit;
    }
    Ok(zc)
}

/// The constant input `d = (v₀, …, v₀, 0, …, 0)`.
pub fn longitudinal_input(scenario: &Scenario) -> Vector {
    let n = scenario.vehicles().len();
    let v0 = scenario.rules().speed_limit;
    Vector::from_iterator(2 * n, (0..2 * n).map(|k| if k < n { v0 } else { 0.0 }))
}

/// `A(θ)` of the linearised longitudinal loop for one gain per vehicle.
pub fn longitudinal_matrix(
    scenario: &Scenario,
    active: &[ActiveFeatures],
    thetas: &[BehaviorParams],
) -> Matrix {
    let vs = scenario.vehicles();
    let n = vs.len();
    let gap = scenario.rules().time_gap;
    let mut a = Matrix::zeros(2 * n, 2 * n);
    for (i, v) in vs.iter().enumerate() {
        let th = &thetas[i];
        a[(i, n + i)] = 1.0;
        a[(n + i, n + i)] = -th.speed_gain;
        if let Some(f) = v.front {
            if active[i].front_speed {
                a[(n + i, n + i)] -= th.front_speed_gain;
                a[(n + i, n + f)] += th.front_speed_gain;
            }
            if active[i].distance {
                a[(n + i, i)] -= th.distance_gain;
                a[(n + i, f)] += th.distance_gain;
                a[(n + i, n + i)] -= th.distance_gain * gap;
            }
        }
    }
    a
}

/// Parameter points defining the deviations around `center`: the center
/// moved to each endpoint of one entry's range. A range collapsed to the
/// center's value contributes nothing; with no deviation at all the center
/// itself is returned so that the single deviation is zero.
fn deviation_points(ranges: &[(f64, f64)], center: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (k, r) in ranges.iter().enumerate() {
        let ends: &[f64] = if r.0 < r.1 { &[r.0, r.1] } else { &[r.0] };
        for &end in ends {
            if end != center[k] {
                let mut c = center.to_vec();
                c[k] = end;
                out.push(c);
            }
        }
    }
    if out.is_empty() {
        out.push(center.to_vec());
    }
    out
}

/// Center gains: the box midpoint, except that an active distance gain is
/// lowered until the follower's block `[[0, 1], [−q, −b]]` has a
/// discriminant `b² − 4q` of at least `b²/5` (real, distinct eigenvalues).
pub fn longitudinal_center(scenario: &Scenario, active: &[ActiveFeatures]) -> Vec<BehaviorParams> {
    let gap = scenario.rules().time_gap;
    scenario
        .vehicles()
        .iter()
        .zip(active)
        .map(|(v, f)| {
            let mut c = v.theta_lower.midpoint(&v.theta_upper);
            if f.distance {
                let b0 = c.speed_gain
                    + if f.front_speed {
                        c.front_speed_gain
                    } else {
                        0.0
                    };
                // 0.2 (b0 + qT)² − q >= 0 holds on [0, r], r the smallest root.
                let (qa, qb, qc) = (0.2 * gap * gap, 0.4 * b0 * gap - 1.0, 0.2 * b0 * b0);
                let root = if qa == 0.0 {
                    -qc / qb
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc < 0.0 {
                        f64::INFINITY
                    } else {
                        (-qb - disc.sqrt()) / (2.0 * qa)
                    }
                };
                if root > 0.0 {
                    c.distance_gain = c.distance_gain.min(root);
                }
            }
            c
        })
        .collect()
}

/// Longitudinal embedding over the active gains, diagonalised around
/// [`longitudinal_center`].
pub fn build_longitudinal_embedding(scenario: &Scenario) -> Result<LpvEmbedding, HighwayError> {
    let vs = scenario.vehicles();
    let n = vs.len();
    let zc = center_shift(scenario)?;
    let active = active_features(scenario);

    // (vehicle, gain index) of every gain that enters A(θ).
    let mut slots = Vec::new();
    for (i, f) in active.iter().enumerate() {
        slots.push((i, 0));
        if f.front_speed {
            slots.push((i, 1));
        }
        if f.distance {
            slots.push((i, 2));
        }
    }
    let ranges: Vec<(f64, f64)> = slots
        .iter()
        .map(|&(i, k)| {
            (
                vs[i].theta_lower.to_array()[k],
                vs[i].theta_upper.to_array()[k],
            )
        })
        .collect();

    let center = longitudinal_center(scenario, &active);
    let center_values: Vec<f64> = slots
        .iter()
        .map(|&(i, k)| center[i].to_array()[k])
        .collect();
    let at = |values: &[f64]| {
        let mut th = center.clone();
        for (&(i, k), &x) in slots.iter().zip(values) {
            let mut arr = th[i].to_array();
            arr[k] = x;
            th[i] = BehaviorParams::from_array(arr);
        }
        longitudinal_matrix(scenario, &active, &th)
    };
    let a0 = longitudinal_matrix(scenario, &active, &center);
    let vertices = deviation_points(&ranges, &center_values)
        .iter()
        .map(|c| at(c))
        .collect();

    let labels = vs
        .iter()
        .map(|v| format!("x:{}", v.id))
        .chain(vs.iter().map(|v| format!("v:{}", v.id)))
        .collect();
    let d = IntervalVector::point(longitudinal_input(scenario));
    debug_assert_eq!(zc.len(), 2 * n);
    LpvEmbedding::build(a0, vertices, zc, d, labels)
}

/// `A = [[0, v], [−c, −k]]` for lateral/heading coordinates relative to the
/// lane, with speed `v`, coupling `c = θ_lat θ_head / v` and heading gain `k`.
pub fn lateral_matrix(coupling: f64, speed: f64, heading_gain: f64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, speed, -coupling, -heading_gain])
}

/// Lateral embedding for one lane hypothesis with the speed known only to
/// lie in `speed`. The coupling `θ_lat θ_head / v` is bounded by its
/// extreme values and then treated as an independent parameter.
///
/// The midpoint center can have complex eigenvalues, so its coupling is
/// capped to keep the discriminant at least a fifth of `k²`. The deviations
/// are taken from that center, so every admissible matrix stays covered.
pub fn build_lateral_embedding(
    vehicle: &Vehicle,
    lane: &Lane,
    speed: (f64, f64),
) -> Result<LpvEmbedding, HighwayError> {
    let (v_lo, v_hi) = speed;
    if !(v_lo >= MIN_LATERAL_SPEED) {
        return Err(HighwayError::SpeedTooLow {
            v: v_lo,
            min: MIN_LATERAL_SPEED,
        });
    }
    let (lo, hi) = (vehicle.theta_lower, vehicle.theta_upper);
    let coupling = (
        lo.lateral_gain * lo.heading_gain / v_hi,
        hi.lateral_gain * hi.heading_gain / v_lo,
    );
    let heading = (lo.heading_gain, hi.heading_gain);
    let ranges = [coupling, (v_lo, v_hi), heading];

    let v_mid = 0.5 * (v_lo + v_hi);
    let k_mid = 0.5 * (heading.0 + heading.1);
    let c_mid = 0.5 * (coupling.0 + coupling.1);
    let c0 = c_mid.min(0.8 * k_mid * k_mid / (4.0 * v_mid));
    let a0 = lateral_matrix(c0, v_mid, k_mid);
    let vertices = deviation_points(&ranges, &[c0, v_mid, k_mid])
        .iter()
        .map(|c| lateral_matrix(c[0], c[1], c[2]))
        .collect();

    let (d_lo, d_hi) = {
        let (a, b) = (v_lo * lane.psi, v_hi * lane.psi);
        (a.min(b), a.max(b))
    };
    let input = IntervalVector::from_slices(&[d_lo, 0.0], &[d_hi, 0.0])?;
    let zc = Vector::from_vec(vec![lane.y, lane.psi]);
    let labels = vec![format!("y:{}", vehicle.id), format!("psi:{}", vehicle.id)];
    LpvEmbedding::build(a0, vertices, zc, input, labels)
}
