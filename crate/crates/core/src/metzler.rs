//! Metzler structure and similarity transforms into Metzler form.
//!
//! Two routes are provided:
//!
//! - [`eigendecomposition_transform`] diagonalises a matrix with a real
//!   spectrum. The transformed center is diagonal, hence Metzler, and the
//!   polytope vertices are mapped through the same change of basis.
//! - [`interval_metzler_transform`] builds an orthogonal `S` such that
//!   `SᵀDS` is Metzler for every `D` in a symmetric matrix interval, by
//!   matching the spectrum with a matrix `μE − Υ` whose off-diagonal
//!   entries are all `μ`.

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::interval::{dims, Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetzlerError {
    #[error("matrix must be square, got {0}")]
    NotSquare(String),
    #[error("matrix is not diagonalisable over the reals (eigenvalue imaginary part {imag:e})")]
    NotRealDiagonalisable { imag: f64 },
    #[error("eigenvector matrix is ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("mu = {mu} must exceed n * max|Delta| = {bound}")]
    MuTooSmall { mu: f64, bound: f64 },
    #[error("center matrix must be symmetric")]
    NotSymmetric,
    #[error("interval radius must be nonnegative")]
    NegativeRadius,
    #[error("could not match the spectrum of the center (residual {residual:e})")]
    SpectrumMatchFailure { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
}

const IMAG_TOL: f64 = 1e-9;
const MAX_CONDITION: f64 = 1e12;
const SPECTRUM_TOL: f64 = 1e-8;

/// A change of basis `x = S x'` together with its inverse and the
/// transformed center `S⁻¹ A₀ S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    pub s: Matrix,
    pub s_inv: Matrix,
    pub transformed_center: Matrix,
}

impl SimilarityTransform {
    pub fn identity(a0: &Matrix) -> Self {
        let n = a0.nrows();
        Self {
            s: Matrix::identity(n, n),
            s_inv: Matrix::identity(n, n),
            transformed_center: a0.clone(),
        }
    }

    /// `S⁻¹ M S`.
    pub fn conjugate(&self, m: &Matrix) -> Matrix {
        &self.s_inv * m * &self.s
    }

    /// `‖S S⁻¹ − I‖max`.
    pub fn round_trip_error(&self) -> f64 {
        let n = self.s.nrows();
        max_abs(&(&self.s * &self.s_inv - Matrix::identity(n, n)))
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// True iff every off-diagonal entry is `>= -tol`.
pub fn is_metzler(a: &Matrix, tol: f64) -> Result<bool, MetzlerError> {
    if !a.is_square() {
        return Err(MetzlerError::NotSquare(dims(a)));
    }
    let n = a.nrows();
    Ok((0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= -tol)))
}

/// Eigenvalues of a symmetric matrix, sorted descending, with matching
/// eigenvector columns.
pub(crate) fn sorted_symmetric_eigen(m: &Matrix) -> (Vector, Matrix) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_norm(m: &Matrix) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn normalize_column(mut v: Vector) -> Vector {
    v /= v.norm();
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v = -v;
    }
    v
}

/// Diagonalises `a0`: `S` holds unit right eigenvectors (largest-magnitude
/// component positive), eigenvalues sorted descending.
pub fn eigendecomposition_transform(a0: &Matrix) -> Result<SimilarityTransform, MetzlerError> {
    if !a0.is_square() {
        return Err(MetzlerError::NotSquare(dims(a0)));
    }
    let n = a0.nrows();
    let scale = spectral_norm(a0);
    if scale == 0.0 {
        return Ok(SimilarityTransform::identity(a0));
    }

    let eigs = a0.clone().complex_eigenvalues();
    let imag = eigs.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if imag > IMAG_TOL * scale {
        return Err(MetzlerError::NotRealDiagonalisable { imag });
    }
    let mut values: Vec<f64> = eigs.iter().map(|z| z.re).collect();
    values.sort_by(|a, b| b.total_cmp(a));

    // Group numerically repeated eigenvalues and take the null space of
    // (A0 - λI) with the matching multiplicity.
    let cluster_tol = 1e-8 * scale;
    let mut columns: Vec<Vector> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] <= cluster_tol {
            end += 1;
        }
        let k = end - start;
        let lambda = values[start..end].iter().sum::<f64>() / k as f64;
        let shifted = a0 - Matrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let mut basis: Vec<Vector> = order[..k]
            .iter()
            .map(|&i| normalize_column(v_t.row(i).transpose()))
            .collect();
        if k > 1 {
            // Deterministic basis for a repeated eigenvalue: project the
            // coordinate axes onto the null space, Gram-Schmidt, keep the
            // best-conditioned k.
            basis = canonical_basis(&basis, n);
        }
        columns.extend(basis);
        start = end;
    }

    let s = Matrix::from_columns(&columns);
    let sv = s.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > MAX_CONDITION {
        return Err(MetzlerError::IllConditioned { cond });
    }
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or(MetzlerError::IllConditioned { cond })?;

    let product = &s_inv * a0 * &s;
    let off_diag = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .fold(0.0f64, |acc, (i, j)| acc.max(product[(i, j)].abs()));
    // A defective matrix yields a near-singular S; anything left off the
    // diagonal beyond rounding means the basis is not an eigenbasis.
    if off_diag > 1e-6 * scale * cond.max(1.0) {
        return Err(MetzlerError::IllConditioned { cond });
    }
    let transformed_center = Matrix::from_diagonal(&product.diagonal());
    Ok(SimilarityTransform {
        s,
        s_inv,
        transformed_center,
    })
}

fn canonical_basis(null_space: &[Vector], n: usize) -> Vec<Vector> {
    let k = null_space.len();
    let q = Matrix::from_columns(null_space);
    let projector = &q * q.transpose();
    let mut out: Vec<Vector> = Vec::with_capacity(k);
    for axis in 0..n {
        if out.len() == k {
            break;
        }
        let mut v = projector.column(axis).into_owned();
        for u in &out {
            v -= u * u.dot(&v);
        }
        if v.norm() > 1e-6 {
            out.push(normalize_column(v));
        }
    }
    out
}

/// Orthogonal transform making `SᵀDS` Metzler for all `D` with
/// `da − delta <= D <= da + delta`, provided `mu > n ‖delta‖max`.
///
/// The diagonal `Υ` is found by damped Newton iteration on the sorted
/// eigenvalues of `μE − Υ`. The search can fail even when `mu` satisfies
/// the precondition; that is reported as `SpectrumMatchFailure`.
pub fn interval_metzler_transform(
    da: &Matrix,
    delta: &Matrix,
    mu: f64,
) -> Result<SimilarityTransform, MetzlerError> {
    if !da.is_square() {
        return Err(MetzlerError::NotSquare(dims(da)));
    }
    if delta.shape() != da.shape() {
        return Err(MetzlerError::DimensionMismatch {
            expected: dims(da),
            got: dims(delta),
        });
    }
    let n = da.nrows();
    if max_abs(&(da - da.transpose())) > 1e-12 * (1.0 + max_abs(da)) {
        return Err(MetzlerError::NotSymmetric);
    }
    if delta.iter().any(|x| *x < 0.0) {
        return Err(MetzlerError::NegativeRadius);
    }
    let bound = n as f64 * max_abs(delta);
    if !(mu > bound) {
        return Err(MetzlerError::MuTooSmall { mu, bound });
    }

    // Already Metzler for the whole interval: nothing to do.
    if is_metzler(&(da - delta), 0.0)? {
        return Ok(SimilarityTransform::identity(da));
    }

    let (target, u) = sorted_symmetric_eigen(da);
    let upsilon = match_spectrum(&target, mu)?;
    let y = Matrix::from_element(n, n, mu) - Matrix::from_diagonal(&upsilon);
    let (_, w) = sorted_symmetric_eigen(&y);

    // Da = U Λ Uᵀ, Y = W Λ Wᵀ  =>  Sᵀ Da S = Y for S = U Wᵀ.
    let s = &u * w.transpose();
    let s_inv = s.transpose();
    let transformed_center = &s_inv * da * &s;
    Ok(SimilarityTransform {
        s,
        s_inv,
        transformed_center,
    })
}

/// Ascending coefficients of `∏ (x − rₖ)`.
fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    roots.iter().fold(vec![1.0], |c, &r| {
        let mut next = vec![0.0; c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= r * ci;
        }
        next
    })
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
}

/// Direct candidate for `υ`. With `d = −υ`, the characteristic polynomial
/// of `μE + diag(d)` is `q − μq'` where `q(x) = ∏(x − dᵢ)`. So
/// `q = Σₖ μᵏ p⁽ᵏ⁾` for the target polynomial `p`, and the `dᵢ` are the
/// roots of `q`, which interlace the target spectrum. Returns `None` when
/// `q` lacks the interlacing real roots (no solution exists).
fn secular_start(target: &Vector, mu: f64) -> Option<Vector> {
    let n = target.len();
    let p = poly_from_roots(target.as_slice());
    let mut q = vec![0.0; n + 1];
    let mut deriv = p;
    let mut scale = 1.0;
    for _ in 0..=n {
        for (qi, di) in q.iter_mut().zip(&deriv) {
            *qi += scale * di;
        }
        deriv = deriv
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        scale *= mu;
    }
    let mut d = Vec::with_capacity(n);
    for k in 0..n.saturating_sub(1) {
        let (mut lo, mut hi) = (target[k + 1], target[k]);
        let (mut flo, fhi) = (poly_eval(&q, lo), poly_eval(&q, hi));
        if flo * fhi > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = poly_eval(&q, mid);
            if (fm <= 0.0) == (flo <= 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        d.push(0.5 * (lo + hi));
    }
    let last = target.sum() - n as f64 * mu - d.iter().sum::<f64>();
    d.push(last);
    Some(-Vector::from_vec(d))
}

/// Solves `λ(μE − diag(υ)) = target` (both sorted descending) for `υ`.
pub(crate) fn match_spectrum(target: &Vector, mu: f64) -> Result<Vector, MetzlerError> {
    let n = target.len();
    let ones = Vector::from_element(n, 1.0);
    let scale = 1.0 + target.amax() + mu * n as f64;
    let residual_of = |u: &Vector| -> (Vector, Matrix) {
        let y = Matrix::from_element(n, n, mu) - Matrix::from_diagonal(u);
        let (vals, vecs) = sorted_symmetric_eigen(&y);
        (vals - target, vecs)
    };

    // Starting points: the shifted spectrum μn·1 − λ, then the first-order
    // guess μ·1 − λ, which is exact when eigenvalue gaps dominate μ.
    let starts = secular_start(target, mu).into_iter().chain([
        &ones * (mu * n as f64) - target,
        &ones * mu - target,
        &ones * (mu * 0.5) - target,
    ]);
    let mut best = f64::INFINITY;
    for start in starts {
        let mut u = start;
        let (mut r, mut vecs) = residual_of(&u);
        let mut norm = r.amax();
        for _ in 0..200 {
            if norm <= 1e-13 * scale {
                break;
            }
            // dλ_k/dυ_j = −w_k[j]².
            let jac = Matrix::from_fn(n, n, |k, j| -vecs[(j, k)] * vecs[(j, k)]);
            let step = match jac.svd(true, true).solve(&(-&r), 1e-14) {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut alpha = 1.0;
            let mut improved = false;
            while alpha > 1e-6 {
                let trial = &u + &step * alpha;
                let (tr, tv) = residual_of(&trial);
                let tn = tr.amax();
                if tn < norm {
                    u = trial;
                    r = tr;
                    vecs = tv;
                    norm = tn;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.min(norm);
        if norm <= SPECTRUM_TOL {
            return Ok(u);
        }
    }
    Err(MetzlerError::SpectrumMatchFailure { residual: best })
}
