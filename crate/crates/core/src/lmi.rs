//! Stability certificates for the stable predictor.
//!
//! A certificate is ten diagonal `2n × 2n` matrices. It is valid when
//! `P + min{Z₊,Z₋} > 0`, `Γ > 0`, `Q + min{Q₊,Q₋} + 2 min{Ψ₊,Ψ₋} > 0` and
//! the symmetric `8n × 8n` block matrix `Υ` is negative semidefinite.
//! Then `V(X) = XᵀPX + XᵀZ₊X⁺ − XᵀZ₋X⁻` is an ISS Lyapunov function for
//! the extended predictor state `X = (x̲, x̄)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{neg, pos, Matrix, Vector};
use crate::metzler::sorted_symmetric_eigen;
use crate::predictor::{extended_system_matrices, PolytopicModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub const DEFAULT_TOL: f64 = 1e-8;
const STARTS: u64 = 8;

/// Diagonals of the ten certificate matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmiCertificate {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub z_plus: Vec<f64>,
    pub z_minus: Vec<f64>,
    pub psi_plus: Vec<f64>,
    pub psi_minus: Vec<f64>,
    pub psi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl LmiCertificate {
    pub const FIELDS: usize = 10;

    pub fn zeros(len: usize) -> Self {
        Self::from_flat(&vec![0.0; Self::FIELDS * len])
    }

    /// Inverse of [`LmiCertificate::to_flat`]; `flat.len()` must be a
    /// multiple of ten.
    pub fn from_flat(flat: &[f64]) -> Self {
        let len = flat.len() / Self::FIELDS;
        let part = |k: usize| flat[k * len..(k + 1) * len].to_vec();
        Self {
            p: part(0),
            q: part(1),
            q_plus: part(2),
            q_minus: part(3),
            z_plus: part(4),
            z_minus: part(5),
            psi_plus: part(6),
            psi_minus: part(7),
            psi: part(8),
            gamma: part(9),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.fields()
            .iter()
            .flat_map(|f| f.iter().copied())
            .collect()
    }

    fn fields(&self) -> [&Vec<f64>; 10] {
        [
            &self.p,
            &self.q,
            &self.q_plus,
            &self.q_minus,
            &self.z_plus,
            &self.z_minus,
            &self.psi_plus,
            &self.psi_minus,
            &self.psi,
            &self.gamma,
        ]
    }

    /// Common diagonal length, if all ten agree.
    pub fn len(&self) -> Option<usize> {
        let n = self.p.len();
        self.fields().iter().all(|f| f.len() == n).then_some(n)
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_flat(&self.to_flat().iter().map(|x| x * alpha).collect::<Vec<_>>())
    }
}

/// Elementwise minimum of two diagonals.
pub fn min_diag(a: &[f64], b: &[f64]) -> Result<Vec<f64>, LmiError> {
    if a.len() != b.len() {
        return Err(LmiError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x.min(*y)).collect())
}

fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(v))
}

fn check_len(model: &PolytopicModel, cert: &LmiCertificate) -> Result<usize, LmiError> {
    let expected = 2 * model.dim();
    match cert.len() {
        Some(n) if n == expected => Ok(n),
        _ => Err(LmiError::DimensionMismatch {
            expected,
            got: cert
                .fields()
                .iter()
                .map(|f| f.len())
                .find(|&l| l != expected)
                .unwrap_or(0),
        }),
    }
}

/// Assembles the symmetric `8n × 8n` matrix `Υ`.
pub fn build_upsilon(model: &PolytopicModel, cert: &LmiCertificate) -> Result<Matrix, LmiError> {
    let m = check_len(model, cert)?;
    let ext = extended_system_matrices(model);
    let (a, rp, rm) = (&ext.a_cal, &ext.r_plus, &ext.r_minus);
    let p = diag(&cert.p);
    let zp = diag(&cert.z_plus);
    let zm = diag(&cert.z_minus);

    let u11 = a.transpose() * &p + &p * a + diag(&cert.q);
    let u12 = a.transpose() * &zp + &p * rp + diag(&cert.psi_plus);
    let u13 = a.transpose() * &zm + &p * rm + diag(&cert.psi_minus);
    let u22 = &zp * rp + rp.transpose() * &zp + diag(&cert.q_plus);
    let u23 = &zp * rm + rp.transpose() * &zm + diag(&cert.psi);
    let u33 = &zm * rm + rm.transpose() * &zm + diag(&cert.q_minus);
    let u44 = -diag(&cert.gamma);

    let blocks: [[Matrix; 4]; 4] = [
        [u11, u12.clone(), u13.clone(), p.clone()],
        [u12.transpose(), u22, u23.clone(), zp.clone()],
        [u13.transpose(), u23.transpose(), u33, zm.clone()],
        [p, zp, zm, u44],
    ];
    let mut out = Matrix::zeros(4 * m, 4 * m);
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            out.view_mut((i * m, j * m), (m, m)).copy_from(b);
        }
    }
    Ok(out)
}

/// Margins of each certificate condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `min(P + min{Z₊,Z₋})`.
    pub positivity1_margin: f64,
    /// `min Ω`, `Ω = Q + min{Q₊,Q₋} + 2 min{Ψ₊,Ψ₋}`.
    pub positivity2_margin: f64,
    pub gamma_margin: f64,
    pub upsilon_max_eig: f64,
    pub feasible: bool,
}

fn min_entry(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// Diagonal of `Ω = Q + min{Q₊,Q₋} + 2 min{Ψ₊,Ψ₋}`.
pub fn omega(cert: &LmiCertificate) -> Vec<f64> {
    (0..cert.q.len())
        .map(|i| {
            cert.q[i]
                + cert.q_plus[i].min(cert.q_minus[i])
                + 2.0 * cert.psi_plus[i].min(cert.psi_minus[i])
        })
        .collect()
}

/// Evaluates every condition. Never fails: a dimension mismatch yields an
/// infeasible report with NaN margins.
pub fn check_certificate(
    model: &PolytopicModel,
    cert: &LmiCertificate,
    tol: f64,
) -> CertificateReport {
    let upsilon = match build_upsilon(model, cert) {
        Ok(u) => u,
        Err(_) => {
            return CertificateReport {
                positivity1_margin: f64::NAN,
                positivity2_margin: f64::NAN,
                gamma_margin: f64::NAN,
                upsilon_max_eig: f64::NAN,
                feasible: false,
            }
        }
    };
    let p1 = min_entry((0..cert.p.len()).map(|i| cert.p[i] + cert.z_plus[i].min(cert.z_minus[i])));
    let p2 = min_entry(omega(cert));
    let g = min_entry(cert.gamma.iter().copied());
    let (eigs, _) = sorted_symmetric_eigen(&upsilon);
    let lmax = eigs[0];
    CertificateReport {
        positivity1_margin: p1,
        positivity2_margin: p2,
        gamma_margin: g,
        upsilon_max_eig: lmax,
        feasible: p1 > 0.0 && p2 > 0.0 && g > 0.0 && lmax <= tol,
    }
}

/// `V(X) = XᵀPX + XᵀZ₊X⁺ − XᵀZ₋X⁻` for diagonal matrices.
pub fn lyapunov_value(cert: &LmiCertificate, x: &[f64]) -> Result<f64, LmiError> {
    let n = cert.len().ok_or(LmiError::DimensionMismatch {
        expected: cert.p.len(),
        got: 0,
    })?;
    if x.len() != n {
        return Err(LmiError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok((0..n)
        .map(|i| {
            let xi = x[i];
            cert.p[i] * xi * xi + cert.z_plus[i] * xi * pos(xi) - cert.z_minus[i] * xi * neg(xi)
        })
        .sum())
}

/// Outcome of a certificate search.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(LmiCertificate),
    /// The heuristic search gave up. This is not a proof of infeasibility.
    Infeasible {
        best_penalty: f64,
    },
}

/// Penalty `max(λmax(Υ), −margins)` and one subgradient. Negative means
/// strictly feasible.
fn penalty(basis: &[Matrix], flat: &[f64]) -> (f64, Vec<f64>) {
    let cert = LmiCertificate::from_flat(flat);
    let m = cert.p.len();
    let k = flat.len();
    let upsilon = basis
        .iter()
        .zip(flat)
        .fold(Matrix::zeros(4 * m, 4 * m), |acc, (b, c)| acc + b * *c);
    let (eigs, vecs) = sorted_symmetric_eigen(&upsilon);

    let mut worst = eigs[0];
    let mut grad: Vec<f64> = {
        let v = vecs.column(0);
        basis.iter().map(|b| v.dot(&(b * v))).collect()
    };
    let idx = |field: usize, i: usize| field * m + i;

    let mut consider = |value: f64, g: Vec<(usize, f64)>| {
        if value > worst {
            worst = value;
            let mut dense = vec![0.0; k];
            for (j, w) in g {
                dense[j] += w;
            }
            grad = dense;
        }
    };
    for i in 0..m {
        // −(P + min Z)
        let zsel = if cert.z_plus[i] <= cert.z_minus[i] {
            4
        } else {
            5
        };
        let v1 = -(cert.p[i] + flat[idx(zsel, i)]);
        consider(v1, vec![(idx(0, i), -1.0), (idx(zsel, i), -1.0)]);
        // −Ω
        let qsel = if cert.q_plus[i] <= cert.q_minus[i] {
            2
        } else {
            3
        };
        let psel = if cert.psi_plus[i] <= cert.psi_minus[i] {
            6
        } else {
            7
        };
        let v2 = -(cert.q[i] + flat[idx(qsel, i)] + 2.0 * flat[idx(psel, i)]);
        consider(
            v2,
            vec![
                (idx(1, i), -1.0),
                (idx(qsel, i), -1.0),
                (idx(psel, i), -2.0),
            ],
        );
        // −Γ
        consider(-cert.gamma[i], vec![(idx(9, i), -1.0)]);
    }
    (worst, grad)
}

/// Searches for a feasible certificate by projected subgradient descent
/// on the penalty over the box `[-1, 1]^(20n)`, from eight seeded starts.
///
/// A returned certificate always passes [`check_certificate`] at
/// [`DEFAULT_TOL`]. The result is deterministic for a given seed.
pub fn search_certificate(model: &PolytopicModel, max_iters: usize, seed: u64) -> SearchOutcome {
    let m = 2 * model.dim();
    let k = LmiCertificate::FIELDS * m;
    // Υ is linear in the certificate: precompute the image of each unit
    // coordinate.
    let basis: Vec<Matrix> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            build_upsilon(model, &LmiCertificate::from_flat(&e)).expect("consistent sizes")
        })
        .collect();

    let runs: Vec<(f64, Option<LmiCertificate>)> = (0..STARTS)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(start);
            run_start(model, &basis, &mut rng, max_iters)
        })
        .collect();

    if let Some(cert) = runs.iter().find_map(|(_, c)| c.clone()) {
        return SearchOutcome::Found(cert);
    }
    let best_penalty = runs.iter().map(|(p, _)| *p).fold(f64::INFINITY, f64::min);
    SearchOutcome::Infeasible { best_penalty }
}

fn run_start(
    model: &PolytopicModel,
    basis: &[Matrix],
    rng: &mut ChaCha8Rng,
    max_iters: usize,
) -> (f64, Option<LmiCertificate>) {
    let k = basis.len();
    let m = k / LmiCertificate::FIELDS;
    // Positive diagonals for P, Q, Γ; small random values elsewhere.
    let mut x: Vec<f64> = (0..k)
        .map(|j| match j / m {
            0 | 1 | 9 => rng.gen_range(0.2..1.0),
            _ => rng.gen_range(-0.2..0.2),
        })
        .collect();
    let mut best = f64::INFINITY;
    for it in 0..max_iters {
        let (f, g) = penalty(basis, &x);
        best = best.min(f);
        if f < 0.0 {
            let cert = LmiCertificate::from_flat(&x);
            if check_certificate(model, &cert, DEFAULT_TOL).feasible {
                return (f, Some(cert));
            }
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let step = 0.5 / (1.0 + it as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi = (*xi - step * gi / gnorm).clamp(-1.0, 1.0);
        }
    }
    (best, None)
}
