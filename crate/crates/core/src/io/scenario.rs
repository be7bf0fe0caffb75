//! Scenario, model and certificate files.
//!
//! All files are JSON objects with `"schema": 1`. Unknown fields are
//! rejected. Syntax and type errors carry a line and column; semantic
//! problems are reported as validation errors naming the broken invariant.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_text, write_bytes, IoError, SCHEMA_VERSION};
use crate::highway::{BehaviorParams, Lane, Road, Rules, Scenario, Vehicle, VehicleState};
use crate::interval::{IntervalVector, Matrix};
use crate::lmi::LmiCertificate;
use crate::predictor::PolytopicModel;

/// The scalar example `ẋ = −θ x + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarScenario {
    pub theta: (f64, f64),
    pub input: IntervalVector,
    pub initial: IntervalVector,
}

impl ScalarScenario {
    pub fn new(theta: (f64, f64), d: (f64, f64), x0: (f64, f64)) -> Result<Self, IoError> {
        let all = [theta.0, theta.1, d.0, d.1, x0.0, x0.1];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(IoError::Validation("scalar values must be finite".into()));
        }
        if theta.0 > theta.1 {
            return Err(IoError::Validation("parameter box order".into()));
        }
        let input = IntervalVector::from_slices(&[d.0], &[d.1])
            .map_err(|_| IoError::Validation("input bounds order".into()))?;
        let initial = IntervalVector::from_slices(&[x0.0], &[x0.1])
            .map_err(|_| IoError::Validation("initial interval order".into()))?;
        Ok(Self {
            theta,
            input,
            initial,
        })
    }

    /// The worked scalar example: `θ ∈ [0.5, 1.5]`, `d ∈ [−0.1, 0.1]`,
    /// `x(0) ∈ [1.0, 1.1]`.
    pub fn demo() -> Self {
        Self::new((0.5, 1.5), (-0.1, 0.1), (1.0, 1.1)).expect("valid demo")
    }

    /// Polytope centered at `−θ̄` with vertices `−θ̄` and `−θ̲`.
    pub fn model(&self) -> PolytopicModel {
        PolytopicModel::scalar_decay(self.theta.0, self.theta.1).expect("1x1 center is Metzler")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioFile {
    Highway(Scenario),
    Scalar(ScalarScenario),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarJson {
    schema: u32,
    scalar: ScalarBody,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarBody {
    theta: [f64; 2],
    d: [f64; 2],
    x0: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HighwayJson {
    schema: u32,
    rules: RulesJson,
    road: RoadJson,
    #[serde(default)]
    right_hand_traffic: bool,
    vehicles: Vec<VehicleJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesJson {
    v0: f64,
    d0: f64,
    #[serde(rename = "T")]
    time_gap: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadJson {
    lanes: Vec<Lane>,
    width: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum LaneJson {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleJson {
    id: String,
    state: VehicleState,
    /// Half-length of the vehicle.
    l: f64,
    front: Option<String>,
    lane: LaneJson,
    theta_lower: [f64; 5],
    theta_upper: [f64; 5],
}

fn check_schema(v: &Value) -> Result<(), IoError> {
    match v.get("schema") {
        None => Err(IoError::Validation("missing schema version".into())),
        Some(s) if s.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(()),
        Some(s) => Err(IoError::Validation(format!(
            "unsupported schema version {s} (expected {SCHEMA_VERSION})"
        ))),
    }
}

fn parse_object(text: &str) -> Result<Value, IoError> {
    let v: Value = serde_json::from_str(text).map_err(IoError::parse)?;
    if !v.is_object() {
        return Err(IoError::Validation(
            "top level must be a JSON object".into(),
        ));
    }
    check_schema(&v)?;
    Ok(v)
}

fn highway_from_json(h: HighwayJson) -> Result<Scenario, IoError> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in h.vehicles.iter().enumerate() {
        if index.insert(v.id.as_str(), i).is_some() {
            return Err(IoError::Validation(format!(
                "duplicate vehicle id {}",
                v.id
            )));
        }
    }
    let mut vehicles = Vec::with_capacity(h.vehicles.len());
    for v in &h.vehicles {
        let front = match &v.front {
            None => None,
            Some(id) => Some(*index.get(id.as_str()).ok_or_else(|| {
                IoError::Validation(format!("front vehicle reference {id} unknown ({})", v.id))
            })?),
        };
        let lanes = match &v.lane {
            LaneJson::One(l) => vec![*l],
            LaneJson::Many(ls) => ls.clone(),
        };
        vehicles.push(Vehicle {
            id: v.id.clone(),
            state: v.state,
            half_length: v.l,
            front,
            lanes,
            theta_lower: BehaviorParams::from_array(v.theta_lower),
            theta_upper: BehaviorParams::from_array(v.theta_upper),
        });
    }
    Scenario::new(
        Rules {
            speed_limit: h.rules.v0,
            jam_distance: h.rules.d0,
            time_gap: h.rules.time_gap,
        },
        Road {
            lanes: h.road.lanes,
            width: h.road.width,
        },
        h.right_hand_traffic,
        vehicles,
    )
    .map_err(|e| {
        IoError::Validation(
            e.to_string()
                .trim_start_matches("invalid scenario: ")
                .to_string(),
        )
    })
}

/// Parses either scenario form; the scalar form is recognised by its
/// `scalar` field.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, IoError> {
    let v = parse_object(text)?;
    if v.get("scalar").is_some() {
        let s: ScalarJson = serde_json::from_str(text).map_err(IoError::parse)?;
        let b = s.scalar;
        ScalarScenario::new(
            (b.theta[0], b.theta[1]),
            (b.d[0], b.d[1]),
            (b.x0[0], b.x0[1]),
        )
        .map(ScenarioFile::Scalar)
    } else {
        let h: HighwayJson = serde_json::from_str(text).map_err(IoError::parse)?;
        highway_from_json(h).map(ScenarioFile::Highway)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile, IoError> {
    parse_scenario(&read_text(path.as_ref())?)
}

/// Serialises a scenario back to the documented schema.
pub fn scenario_to_json(scenario: &ScenarioFile) -> String {
    let value = match scenario {
        ScenarioFile::Scalar(s) => serde_json::to_value(ScalarJson {
            schema: SCHEMA_VERSION,
            scalar: ScalarBody {
                theta: [s.theta.0, s.theta.1],
                d: [s.input.lower()[0], s.input.upper()[0]],
                x0: [s.initial.lower()[0], s.initial.upper()[0]],
            },
        }),
        ScenarioFile::Highway(h) => {
            let vs = h.vehicles();
            serde_json::to_value(HighwayJson {
                schema: SCHEMA_VERSION,
                rules: RulesJson {
                    v0: h.rules().speed_limit,
                    d0: h.rules().jam_distance,
                    time_gap: h.rules().time_gap,
                },
                road: RoadJson {
                    lanes: h.road().lanes.clone(),
                    width: h.road().width,
                },
                right_hand_traffic: h.right_hand_traffic(),
                vehicles: vs
                    .iter()
                    .map(|v| VehicleJson {
                        id: v.id.clone(),
                        state: v.state,
                        l: v.half_length,
                        front: v.front.map(|f| vs[f].id.clone()),
                        lane: if v.lanes.len() == 1 {
                            LaneJson::One(v.lanes[0])
                        } else {
                            LaneJson::Many(v.lanes.clone())
                        },
                        theta_lower: v.theta_lower.to_array(),
                        theta_upper: v.theta_upper.to_array(),
                    })
                    .collect(),
            })
        }
    };
    serde_json::to_string_pretty(&value.expect("plain data")).expect("plain data")
}

/// A polytopic model file: row-major `center`, `deviations` and `input`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    schema: u32,
    center: Vec<Vec<f64>>,
    deviations: Vec<Vec<Vec<f64>>>,
    input: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix, IoError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(IoError::Validation(format!(
            "{what} must be a nonempty rectangular matrix"
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(IoError::Validation(format!(
            "{what} entries must be finite"
        )));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn parse_model(text: &str) -> Result<PolytopicModel, IoError> {
    parse_object(text)?;
    let m: ModelJson = serde_json::from_str(text).map_err(IoError::parse)?;
    let center = matrix_from_rows(&m.center, "center")?;
    let deviations = m
        .deviations
        .iter()
        .map(|d| matrix_from_rows(d, "deviation"))
        .collect::<Result<Vec<_>, _>>()?;
    let input = matrix_from_rows(&m.input, "input")?;
    PolytopicModel::new(center, deviations, input).map_err(|e| IoError::Validation(e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PolytopicModel, IoError> {
    parse_model(&read_text(path.as_ref())?)
}

pub fn model_to_json(model: &PolytopicModel) -> String {
    serde_json::to_string_pretty(&ModelJson {
        schema: SCHEMA_VERSION,
        center: rows_of(model.a0()),
        deviations: model.deltas().iter().map(rows_of).collect(),
        input: rows_of(model.b()),
    })
    .expect("plain data")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateJson {
    schema: u32,
    certificate: LmiCertificate,
}

pub fn parse_certificate(text: &str) -> Result<LmiCertificate, IoError> {
    parse_object(text)?;
    let c: CertificateJson = serde_json::from_str(text).map_err(IoError::parse)?;
    if c.certificate.len().is_none() {
        return Err(IoError::Validation(
            "certificate diagonals differ in length".into(),
        ));
    }
    if c.certificate.to_flat().iter().any(|x| !x.is_finite()) {
        return Err(IoError::Validation(
            "certificate entries must be finite".into(),
        ));
    }
    Ok(c.certificate)
}

pub fn load_certificate(path: impl AsRef<Path>) -> Result<LmiCertificate, IoError> {
    parse_certificate(&read_text(path.as_ref())?)
}

pub fn certificate_to_json(cert: &LmiCertificate) -> String {
    serde_json::to_string_pretty(&CertificateJson {
        schema: SCHEMA_VERSION,
        certificate: cert.clone(),
    })
    .expect("plain data")
}

pub fn write_certificate(cert: &LmiCertificate, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), certificate_to_json(cert).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIGHWAY: &str = r#"{
        "schema": 1,
        "rules": {"v0": 25.0, "d0": 10.0, "T": 1.5},
        "road": {"lanes": [{"y": 0.0, "psi": 0.0}, {"y": 4.0, "psi": 0.0}], "width": 4.0},
        "right_hand_traffic": false,
        "vehicles": [
            {"id": "target", "state": {"x": 50.0, "y": 0.0, "v": 30.0, "psi": 0.0}, "l": 2.5,
             "front": "front", "lane": [0, 1],
             "theta_lower": [0.3, 0.5, 0.05, 0.5, 1.0], "theta_upper": [0.7, 1.5, 0.2, 2.0, 3.0]},
            {"id": "front", "state": {"x": 120.0, "y": 0.0, "v": 25.0, "psi": 0.0}, "l": 2.5,
             "front": null, "lane": 0,
             "theta_lower": [0.3, 0.5, 0.05, 0.5, 1.0], "theta_upper": [0.7, 1.5, 0.2, 2.0, 3.0]}
        ]
    }"#;

    fn validation(text: &str) -> String {
        match parse_scenario(text) {
            Err(IoError::Validation(m)) => m,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn scalar_form_loads() {
        let s = parse_scenario(
            r#"{"schema": 1, "scalar": {"theta": [0.5, 1.5], "d": [-0.1, 0.1], "x0": [1.0, 1.1]}}"#,
        )
        .unwrap();
        assert_eq!(s, ScenarioFile::Scalar(ScalarScenario::demo()));
    }

    #[test]
    fn highway_form_loads_and_round_trips() {
        let s = parse_scenario(HIGHWAY).unwrap();
        let ScenarioFile::Highway(h) = &s else {
            panic!("highway expected")
        };
        assert_eq!(h.vehicles()[0].front, Some(1));
        assert_eq!(h.vehicles()[0].lanes, vec![0, 1]);
        assert_eq!(h.vehicles()[1].lanes, vec![0]);
        assert_eq!(h.rules().time_gap, 1.5);
        assert_eq!(parse_scenario(&scenario_to_json(&s)).unwrap(), s);
    }

    #[test]
    fn syntax_errors_have_positions() {
        for text in ["", "{", "{\"schema\": 1,\n \"scalar\": }"] {
            match parse_scenario(text) {
                Err(IoError::Parse { line, .. }) => assert!(line >= 1),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        match parse_scenario("{\"schema\": 1,\n\"scalar\": {\"theta\": [0.5, 1.5], \"d\": [0, 0], \"x0\": [1, 1], \"extra\": 2}}") {
            Err(IoError::Parse { line: 2, message, .. }) => assert!(message.contains("extra")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_version_is_required() {
        assert!(
            validation(r#"{"scalar": {"theta": [0, 1], "d": [0, 0], "x0": [0, 0]}}"#)
                .contains("schema")
        );
        assert!(validation(
            r#"{"schema": 2, "scalar": {"theta": [0, 1], "d": [0, 0], "x0": [0, 0]}}"#
        )
        .contains("schema"));
        assert!(validation("[1, 2]").contains("object"));
    }

    #[test]
    fn scalar_invariants_are_named() {
        let s = |t: &str, d: &str, x: &str| {
            validation(&format!(
                r#"{{"schema": 1, "scalar": {{"theta": {t}, "d": {d}, "x0": {x}}}}}"#
            ))
        };
        assert_eq!(s("[1.5, 0.5]", "[0, 0]", "[0, 0]"), "parameter box order");
        assert_eq!(
            s("[0.5, 1.5]", "[0.1, -0.1]", "[0, 0]"),
            "input bounds order"
        );
        assert_eq!(
            s("[0.5, 1.5]", "[0, 0]", "[1.1, 1.0]"),
            "initial interval order"
        );
    }

    #[test]
    fn highway_invariants_are_named() {
        let cases = [
            (
                "\"theta_lower\": [0.3",
                "\"theta_lower\": [0.8",
                "parameter box order",
            ),
            ("\"lane\": 0,", "\"lane\": 5,", "lane index out of range"),
            (
                "\"front\": \"front\"",
                "\"front\": \"target\"",
                "vehicle follows itself",
            ),
            (
                "\"front\": \"front\"",
                "\"front\": \"ghost\"",
                "front vehicle reference",
            ),
            (
                "\"id\": \"front\"",
                "\"id\": \"target\"",
                "duplicate vehicle id",
            ),
            (
                "\"v\": 30.0",
                "\"v\": -1.0",
                "vehicle speed must be nonnegative",
            ),
            (
                "\"l\": 2.5",
                "\"l\": 0.0",
                "vehicle length must be positive",
            ),
            (
                "\"lanes\": [{\"y\": 0.0, \"psi\": 0.0}, {\"y\": 4.0, \"psi\": 0.0}]",
                "\"lanes\": []",
                "road has no lanes",
            ),
            (
                "\"width\": 4.0",
                "\"width\": -4.0",
                "lane width must be positive",
            ),
            ("\"v0\": 25.0", "\"v0\": -25.0", "traffic rules"),
            (
                "\"theta_lower\": [0.3",
                "\"theta_lower\": [-0.3",
                "parameter box must be nonnegative",
            ),
        ];
        for (from, to, expected) in cases {
            assert!(HIGHWAY.contains(from), "fixture lacks {from}");
            let msg = validation(&HIGHWAY.replacen(from, to, 1));
            assert!(msg.contains(expected), "{expected}: got {msg}");
        }
        let cyclic = HIGHWAY.replacen("\"front\": null", "\"front\": \"target\"", 1);
        let ScenarioFile::Highway(h) = parse_scenario(&cyclic).unwrap() else {
            unreachable!()
        };
        assert!(crate::highway::follow_order(&h).is_err());
        let empty = r#"{"schema": 1, "rules": {"v0": 25, "d0": 10, "T": 1.5},
            "road": {"lanes": [{"y": 0, "psi": 0}], "width": 4}, "vehicles": []}"#;
        assert!(validation(empty).contains("no vehicles"));
    }

    #[test]
    fn model_and_certificate_files_round_trip() {
        let model = ScalarScenario::demo().model();
        let back = parse_model(&model_to_json(&model)).unwrap();
        assert_eq!(back, model);

        let cert = LmiCertificate::zeros(2);
        assert_eq!(
            parse_certificate(&certificate_to_json(&cert)).unwrap(),
            cert
        );
        let ragged = r#"{"schema": 1, "certificate": {"p": [1], "q": [1, 2], "q_plus": [1], "q_minus": [1],
            "z_plus": [1], "z_minus": [1], "psi_plus": [1], "psi_minus": [1], "psi": [1], "gamma": [1]}}"#;
        assert!(matches!(
            parse_certificate(ragged),
            Err(IoError::Validation(_))
        ));
    }

    #[test]
    fn model_validation() {
        let bad =
            r#"{"schema": 1, "center": [[0, -1], [1, 0]], "deviations": [], "input": [[1], [0]]}"#;
        assert!(matches!(parse_model(bad), Err(IoError::Validation(m)) if m.contains("Metzler")));
        let ragged =
            r#"{"schema": 1, "center": [[0, 1], [1]], "deviations": [], "input": [[1], [0]]}"#;
        assert!(matches!(parse_model(ragged), Err(IoError::Validation(_))));
    }
}
