//! Interval predictors for `ẋ = A(θ) x + B d`.
//!
//! [`naive_rhs`] applies the interval product to the whole matrix interval
//! `[A̲, Ā]`. It is inclusive but typically unstable. [`stable_rhs`] works
//! on a polytopic decomposition `A(θ) = A₀ + Σ λᵢ ΔAᵢ` with Metzler `A₀`
//! and only bounds the deviation part, which keeps the stability of `A₀`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{
    dims, split_parts, split_vector, IntervalError, IntervalMatrix, IntervalVector, Matrix, Vector,
};
use crate::metzler::{is_metzler, max_abs};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("polytope center is not Metzler (most negative off-diagonal entry {0})")]
    CenterNotMetzler(f64),
    #[error("interval order broke at t = {time}; the step size is probably too large")]
    OrderViolation { time: f64 },
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

fn mismatch(expected: impl ToString, got: impl ToString) -> PredictError {
    PredictError::DimensionMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

/// `A(θ) = A₀ + Σ λᵢ ΔAᵢ` with every weight `λᵢ ∈ [0, 1]`, plus the input
/// matrix.
///
/// Simplex weights are the special case of a vertex polytope. Independent
/// weights also cover `A₀ ± rₖ Gₖ` pairs for parameters entering affinely,
/// which keeps the deviation sums linear in the number of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopicModel {
    a0: Matrix,
    deltas: Vec<Matrix>,
    b: Matrix,
    delta_plus: Matrix,
    delta_minus: Matrix,
}

impl PolytopicModel {
    pub const METZLER_TOL: f64 = 1e-9;

    pub fn new(a0: Matrix, deltas: Vec<Matrix>, b: Matrix) -> Result<Self, PredictError> {
        if !a0.is_square() {
            return Err(mismatch("square center", dims(&a0)));
        }
        let n = a0.nrows();
        if b.nrows() != n {
            return Err(mismatch(format!("{n} input rows"), dims(&b)));
        }
        if let Some(d) = deltas.iter().find(|d| d.shape() != (n, n)) {
            return Err(mismatch(dims(&a0), dims(d)));
        }
        if !is_metzler(&a0, Self::METZLER_TOL).expect("square") {
            let worst = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| a0[(i, j)])
                .fold(f64::INFINITY, f64::min);
            return Err(PredictError::CenterNotMetzler(worst));
        }
        let mut delta_plus = Matrix::zeros(n, n);
        let mut delta_minus = Matrix::zeros(n, n);
        for d in &deltas {
            let (p, m) = split_parts(d);
            delta_plus += p;
            delta_minus += m;
        }
        Ok(Self {
            a0,
            deltas,
            b,
            delta_plus,
            delta_minus,
        })
    }

    /// Polytope from its vertex matrices and a chosen center: `ΔAᵢ = Aᵢ − A₀`.
    pub fn from_vertices(a0: Matrix, vertices: &[Matrix], b: Matrix) -> Result<Self, PredictError> {
        let deltas = vertices.iter().map(|v| v - &a0).collect();
        Self::new(a0, deltas, b)
    }

    /// The scalar system `ẋ = −θ x + d`, `θ ∈ [θ̲, θ̄]`, centered at `−θ̄`.
    pub fn scalar_decay(theta_lo: f64, theta_hi: f64) -> Result<Self, PredictError> {
        let a0 = Matrix::from_element(1, 1, -theta_hi);
        let vertices = [
            Matrix::from_element(1, 1, -theta_hi),
            Matrix::from_element(1, 1, -theta_lo),
        ];
        Self::from_vertices(a0, &vertices, Matrix::identity(1, 1))
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn deltas(&self) -> &[Matrix] {
        &self.deltas
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn delta_plus(&self) -> &Matrix {
        &self.delta_plus
    }

    pub fn delta_minus(&self) -> &Matrix {
        &self.delta_minus
    }

    /// `A₀ + ΔAᵢ` for each vertex.
    pub fn vertices(&self) -> Vec<Matrix> {
        self.deltas.iter().map(|d| &self.a0 + d).collect()
    }

    /// `A(λ) = A₀ + Σ λᵢ ΔAᵢ`.
    pub fn realize(&self, weights: &[f64]) -> Matrix {
        let mut a = self.a0.clone();
        for (w, d) in weights.iter().zip(&self.deltas) {
            a += d * *w;
        }
        a
    }

    /// Elementwise bounds `[A₀ − ΔA₋, A₀ + ΔA₊]` of every admissible
    /// `A(λ)`, as consumed by the naive predictor.
    pub fn interval_hull(&self) -> IntervalMatrix {
        IntervalMatrix::new(&self.a0 - &self.delta_minus, &self.a0 + &self.delta_plus)
            .expect("parts are nonnegative")
    }
}

/// Input bounds `d̲(t) <= d(t) <= d̄(t)`, piecewise constant between
/// samples and left-continuous: sample `k` holds on `(tₖ, tₖ₊₁]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBounds {
    times: Vec<f64>,
    lower: Vec<Vector>,
    upper: Vec<Vector>,
}

impl SignalBounds {
    pub fn new(
        times: Vec<f64>,
        lower: Vec<Vector>,
        upper: Vec<Vector>,
    ) -> Result<Self, PredictError> {
        if times.is_empty() || times.len() != lower.len() || times.len() != upper.len() {
            return Err(mismatch(
                format!("{} samples", times.len()),
                format!("{} / {}", lower.len(), upper.len()),
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PredictError::InvalidSettings(
                "signal sample times must be strictly increasing".into(),
            ));
        }
        let m = lower[0].len();
        for (l, u) in lower.iter().zip(&upper) {
            if l.len() != m || u.len() != m {
                return Err(mismatch(m, l.len().max(u.len())));
            }
            // Validates the order at each sample.
            IntervalVector::new(l.clone(), u.clone())?;
        }
        Ok(Self {
            times,
            lower,
            upper,
        })
    }

    pub fn constant(bounds: IntervalVector) -> Self {
        Self {
            times: vec![0.0],
            lower: vec![bounds.lower().clone()],
            upper: vec![bounds.upper().clone()],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower[0].len()
    }

    fn index_at(&self, t: f64) -> usize {
        // Largest k with times[k] < t, or 0.
        self.times.partition_point(|&s| s < t).saturating_sub(1)
    }

    pub fn at(&self, t: f64) -> IntervalVector {
        let k = self.index_at(t);
        IntervalVector::new_unchecked(self.lower[k].clone(), self.upper[k].clone())
    }
}

fn check_state(x_lo: &Vector, x_hi: &Vector, n: usize) -> Result<(), PredictError> {
    if x_lo.len() != n || x_hi.len() != n {
        return Err(mismatch(n, format!("{} / {}", x_lo.len(), x_hi.len())));
    }
    Ok(())
}

/// `B⁺d̲ − B⁻d̄` and `B⁺d̄ − B⁻d̲`.
fn input_terms(b: &Matrix, d: &IntervalVector) -> Result<(Vector, Vector), PredictError> {
    if b.ncols() != d.dim() {
        return Err(mismatch(b.ncols(), d.dim()));
    }
    let (bp, bm) = split_parts(b);
    Ok((
        &bp * d.lower() - &bm * d.upper(),
        &bp * d.upper() - &bm * d.lower(),
    ))
}

/// Right-hand side of the naive predictor, built from `[A̲, Ā]` directly.
pub fn naive_rhs(
    x_lo: &Vector,
    x_hi: &Vector,
    a: &IntervalMatrix,
    b: &Matrix,
    d: &IntervalVector,
) -> Result<(Vector, Vector), PredictError> {
    let (n, m) = a.shape();
    if n != m {
        return Err(mismatch("square matrix interval", format!("{n}x{m}")));
    }
    if b.nrows() != n {
        return Err(mismatch(format!("{n} input rows"), dims(b)));
    }
    check_state(x_lo, x_hi, n)?;
    let (al_p, al_m) = split_parts(a.lower());
    let (au_p, au_m) = split_parts(a.upper());
    let (xl_p, xl_m) = split_vector(x_lo);
    let (xu_p, xu_m) = split_vector(x_hi);
    let (d_lo, d_hi) = input_terms(b, d)?;
    let dx_lo = &al_p * &xl_p - &au_p * &xl_m - &al_m * &xu_p + &au_m * &xu_m + d_lo;
    let dx_hi = &au_p * &xu_p - &al_p * &xu_m - &au_m * &xl_p + &al_m * &xl_m + d_hi;
    Ok((dx_lo, dx_hi))
}

/// Right-hand side of the stable polytopic predictor.
pub fn stable_rhs(
    x_lo: &Vector,
    x_hi: &Vector,
    model: &PolytopicModel,
    d: &IntervalVector,
) -> Result<(Vector, Vector), PredictError> {
    check_state(x_lo, x_hi, model.dim())?;
    let (_, xl_m) = split_vector(x_lo);
    let (xu_p, _) = split_vector(x_hi);
    let (d_lo, d_hi) = input_terms(&model.b, d)?;
    let dx_lo = &model.a0 * x_lo - &model.delta_plus * &xl_m - &model.delta_minus * &xu_p + d_lo;
    let dx_hi = &model.a0 * x_hi + &model.delta_plus * &xu_p + &model.delta_minus * &xl_m + d_hi;
    Ok((dx_lo, dx_hi))
}

/// Block matrices of the extended system `Ẋ = 𝒜X + R₊X⁺ − R₋X⁻ + δ` with
/// `X = (x̲, x̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    pub a_cal: Matrix,
    pub r_plus: Matrix,
    pub r_minus: Matrix,
}

pub fn extended_system_matrices(model: &PolytopicModel) -> ExtendedSystem {
    let n = model.dim();
    let mut a_cal = Matrix::zeros(2 * n, 2 * n);
    let mut r_plus = Matrix::zeros(2 * n, 2 * n);
    let mut r_minus = Matrix::zeros(2 * n, 2 * n);
    a_cal.view_mut((0, 0), (n, n)).copy_from(&model.a0);
    a_cal.view_mut((n, n), (n, n)).copy_from(&model.a0);
    r_plus
        .view_mut((0, n), (n, n))
        .copy_from(&(-&model.delta_minus));
    r_plus.view_mut((n, n), (n, n)).copy_from(&model.delta_plus);
    r_minus
        .view_mut((0, 0), (n, n))
        .copy_from(&model.delta_plus);
    r_minus
        .view_mut((n, 0), (n, n))
        .copy_from(&(-&model.delta_minus));
    ExtendedSystem {
        a_cal,
        r_plus,
        r_minus,
    }
}

/// The input term `δ = [[−B⁻, B⁺], [B⁺, −B⁻]] (d̄, d̲)` of the extended system.
pub fn extended_input(model: &PolytopicModel, d: &IntervalVector) -> Result<Vector, PredictError> {
    let (lo, hi) = input_terms(&model.b, d)?;
    let n = model.dim();
    Ok(Vector::from_iterator(
        2 * n,
        lo.iter().chain(hi.iter()).copied(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Stable,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Stable => "stable",
        }
    }
}

/// The system a predictor integrates.
#[derive(Debug, Clone)]
pub enum Predictor {
    Naive { a: IntervalMatrix, b: Matrix },
    Stable(PolytopicModel),
}

impl Predictor {
    /// Builds the predictor of the given kind for a polytopic model; the
    /// naive one uses the elementwise hull of the polytope.
    pub fn for_model(method: Method, model: &PolytopicModel) -> Self {
        match method {
            Method::Naive => Predictor::Naive {
                a: model.interval_hull(),
                b: model.b.clone(),
            },
            Method::Stable => Predictor::Stable(model.clone()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Predictor::Naive { .. } => Method::Naive,
            Predictor::Stable(_) => Method::Stable,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Predictor::Naive { a, .. } => a.shape().0,
            Predictor::Stable(m) => m.dim(),
        }
    }

    pub fn rhs(
        &self,
        x_lo: &Vector,
        x_hi: &Vector,
        d: &IntervalVector,
    ) -> Result<(Vector, Vector), PredictError> {
        match self {
            Predictor::Naive { a, b } => naive_rhs(x_lo, x_hi, a, b, d),
            Predictor::Stable(m) => stable_rhs(x_lo, x_hi, m, d),
        }
    }
}

/// A sampled interval tube.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<IntervalVector>,
    pub method: Method,
    pub dt: f64,
    /// Set when the integration produced a non-finite state; the
    /// trajectory stops at the last finite sample before this time.
    pub truncated_at: Option<f64>,
}

impl IntervalTrajectory {
    pub fn last(&self) -> &IntervalVector {
        self.states.last().expect("trajectories hold at least x0")
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Hull of all samples.
    pub fn envelope(&self) -> IntervalVector {
        self.states
            .iter()
            .skip(1)
            .fold(self.states[0].clone(), |acc, s| {
                acc.hull(s).expect("same dimension")
            })
    }

    /// Width of coordinate `i` at every sample.
    pub fn widths(&self, i: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.upper()[i] - s.lower()[i])
            .collect()
    }

    /// Index of the sample closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            0
        } else if k >= self.times.len() {
            self.times.len() - 1
        } else if (self.times[k] - t).abs() < (t - self.times[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }
}

/// One classical RK4 step of `ẏ = f(y)` for a state stored as a vector.
pub fn rk4_step<F, E>(f: &mut F, y: &Vector, h: f64) -> Result<Vector, E>
where
    F: FnMut(&Vector) -> Result<Vector, E>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + &k1 * (h / 2.0)))?;
    let k3 = f(&(y + &k2 * (h / 2.0)))?;
    let k4 = f(&(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Number of fixed steps covering `horizon`, rounding near-integers.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let raw = horizon / dt;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

pub(crate) fn validate_settings(horizon: f64, dt: f64) -> Result<usize, PredictError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(PredictError::InvalidSettings(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(PredictError::InvalidSettings(format!(
            "horizon must be at least dt, got {horizon}"
        )));
    }
    Ok(step_count(horizon, dt))
}

/// Integrates a predictor with fixed-step RK4 on the coupled `2n` system.
///
/// Input bounds are sampled at each step midpoint and held over the step.
/// A non-finite state truncates the trajectory and sets `truncated_at`;
/// an order violation (`x̲ > x̄`) is an error.
pub fn integrate(
    predictor: &Predictor,
    x0: &IntervalVector,
    d: &SignalBounds,
    horizon: f64,
    dt: f64,
) -> Result<IntervalTrajectory, PredictError> {
    let steps = validate_settings(horizon, dt)?;
    let n = predictor.dim();
    if x0.dim() != n {
        return Err(mismatch(n, x0.dim()));
    }
    let mut y = Vector::from_iterator(2 * n, x0.lower().iter().chain(x0.upper().iter()).copied());
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.clone());
    let mut truncated_at = None;

    for k in 0..steps {
        let t = k as f64 * dt;
        let dk = d.at(t + 0.5 * dt);
        let mut f = |s: &Vector| -> Result<Vector, PredictError> {
            let lo = s.rows(0, n).into_owned();
            let hi = s.rows(n, n).into_owned();
            let (dlo, dhi) = predictor.rhs(&lo, &hi, &dk)?;
            Ok(Vector::from_iterator(
                2 * n,
                dlo.iter().chain(dhi.iter()).copied(),
            ))
        };
        let next = rk4_step(&mut f, &y, dt)?;
        let t_next = (k + 1) as f64 * dt;
        if next.iter().any(|x| !x.is_finite()) {
            truncated_at = Some(t_next);
            break;
        }
        let lo = next.rows(0, n).into_owned();
        let hi = next.rows(n, n).into_owned();
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(PredictError::OrderViolation { time: t_next });
        }
        states.push(IntervalVector::new_unchecked(lo, hi));
        times.push(t_next);
        y = next;
    }

    Ok(IntervalTrajectory {
        times,
        states,
        method: predictor.method(),
        dt,
        truncated_at,
    })
}

/// Integrates one realization `ẋ = A(t) x + B d(t)` with the same RK4
/// scheme; `system(t)` supplies the matrix and input held over the step
/// starting at `t`.
pub fn integrate_realization<F>(
    b: &Matrix,
    x0: &Vector,
    horizon: f64,
    dt: f64,
    mut system: F,
) -> Result<Vec<Vector>, PredictError>
where
    F: FnMut(f64) -> (Matrix, Vector),
{
    let steps = validate_settings(horizon, dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for k in 0..steps {
        let (a, d) = system(k as f64 * dt);
        let forcing = b * d;
        let mut f = |s: &Vector| -> Result<Vector, PredictError> { Ok(&a * s + &forcing) };
        x = rk4_step(&mut f, &x, dt)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// `‖ΔA₊‖max + ‖ΔA₋‖max`, a crude measure of the polytope size.
pub fn deviation_size(model: &PolytopicModel) -> f64 {
    max_abs(&model.delta_plus) + max_abs(&model.delta_minus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model() -> PolytopicModel {
        PolytopicModel::scalar_decay(0.5, 1.5).unwrap()
    }

    fn d_scalar() -> IntervalVector {
        IntervalVector::from_slices(&[-0.1], &[0.1]).unwrap()
    }

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn scalar_model_parts() {
        let m = scalar_model();
        assert_eq!(m.delta_plus()[(0, 0)], 1.0);
        assert_eq!(m.delta_minus()[(0, 0)], 0.0);
        let hull = m.interval_hull();
        assert_eq!(hull.lower()[(0, 0)], -1.5);
        assert_eq!(hull.upper()[(0, 0)], -0.5);
    }

    #[test]
    fn naive_rhs_scalar_example() {
        let m = scalar_model();
        let (lo, hi) =
            naive_rhs(&v1(1.0), &v1(1.1), &m.interval_hull(), m.b(), &d_scalar()).unwrap();
        assert!((lo[0] - -1.75).abs() < 1e-12);
        assert!((hi[0] - -0.4).abs() < 1e-12);
    }

    #[test]
    fn naive_rhs_degenerate_is_vector_field() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, 0.3]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let v = Vector::from_vec(vec![0.7, -1.2]);
        let w = IntervalVector::point(v1(0.4));
        let (lo, hi) = naive_rhs(&v, &v, &IntervalMatrix::point(a.clone()), &b, &w).unwrap();
        let truth = &a * &v + &b * v1(0.4);
        assert!((lo - &truth).amax() < 1e-12);
        assert!((hi - &truth).amax() < 1e-12);

        let z = Vector::zeros(2);
        let (lo, hi) = naive_rhs(
            &z,
            &z,
            &IntervalMatrix::point(Matrix::zeros(2, 2)),
            &b,
            &IntervalVector::zeros(1),
        )
        .unwrap();
        assert_eq!((lo, hi), (z.clone(), z));
    }

    #[test]
    fn stable_rhs_scalar_example() {
        let (lo, hi) = stable_rhs(&v1(1.0), &v1(1.1), &scalar_model(), &d_scalar()).unwrap();
        assert!((lo[0] - -1.6).abs() < 1e-12);
        assert!((hi[0] - -0.45).abs() < 1e-12);
        let (lo, hi) = stable_rhs(
            &v1(0.0),
            &v1(0.0),
            &scalar_model(),
            &IntervalVector::zeros(1),
        )
        .unwrap();
        assert_eq!((lo[0], hi[0]), (0.0, 0.0));
    }

    #[test]
    fn stable_rhs_lti_degenerate() {
        let a0 = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -2.0]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let m = PolytopicModel::new(a0.clone(), vec![Matrix::zeros(2, 2)], b.clone()).unwrap();
        let x = Vector::from_vec(vec![-0.3, 2.0]);
        let w = IntervalVector::point(v1(0.25));
        let (lo, hi) = stable_rhs(&x, &x, &m, &w).unwrap();
        let truth = &a0 * &x + &b * v1(0.25);
        assert!((lo - &truth).amax() < 1e-12);
        assert!((hi - &truth).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_metzler_center() {
        let a0 = Matrix::from_row_slice(2, 2, &[-1.0, -0.5, 0.0, -1.0]);
        assert!(matches!(
            PolytopicModel::new(a0, vec![], Matrix::identity(2, 2)),
            Err(PredictError::CenterNotMetzler(_))
        ));
    }

    #[test]
    fn dimension_errors() {
        let m = scalar_model();
        let two = Vector::zeros(2);
        assert!(stable_rhs(&two, &two, &m, &d_scalar()).is_err());
        assert!(stable_rhs(&v1(0.0), &v1(0.0), &m, &IntervalVector::zeros(2)).is_err());
        assert!(naive_rhs(&two, &two, &m.interval_hull(), m.b(), &d_scalar()).is_err());
    }

    #[test]
    fn extended_matrices_scalar() {
        let ext = extended_system_matrices(&scalar_model());
        assert_eq!(
            ext.a_cal,
            Matrix::from_diagonal(&Vector::from_vec(vec![-1.5, -1.5]))
        );
        assert_eq!(
            ext.r_plus,
            Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
        assert_eq!(
            ext.r_minus,
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );

        let zero = PolytopicModel::new(
            Matrix::from_element(1, 1, -1.0),
            vec![Matrix::zeros(1, 1)],
            Matrix::identity(1, 1),
        )
        .unwrap();
        let ext = extended_system_matrices(&zero);
        assert_eq!(ext.r_plus, Matrix::zeros(2, 2));
        assert_eq!(ext.r_minus, Matrix::zeros(2, 2));
    }

    #[test]
    fn signal_bounds_are_left_continuous() {
        let s = SignalBounds::new(
            vec![0.0, 1.0],
            vec![v1(0.0), v1(5.0)],
            vec![v1(1.0), v1(6.0)],
        )
        .unwrap();
        assert_eq!(s.at(-1.0).lower()[0], 0.0);
        assert_eq!(s.at(0.5).lower()[0], 0.0);
        assert_eq!(s.at(1.0).lower()[0], 0.0);
        assert_eq!(s.at(1.0 + 1e-12).lower()[0], 5.0);
        assert!(SignalBounds::new(vec![0.0], vec![v1(1.0)], vec![v1(0.0)]).is_err());
        assert!(SignalBounds::new(vec![1.0, 1.0], vec![v1(0.0); 2], vec![v1(0.0); 2]).is_err());
    }

    #[test]
    fn zero_dynamics_keep_initial_box() {
        let m = PolytopicModel::new(
            Matrix::zeros(2, 2),
            vec![Matrix::zeros(2, 2)],
            Matrix::zeros(2, 1),
        )
        .unwrap();
        let x0 = IntervalVector::from_slices(&[-1.0, 0.5], &[1.0, 0.75]).unwrap();
        let d = SignalBounds::constant(IntervalVector::from_slices(&[-1.0], &[1.0]).unwrap());
        for method in [Method::Naive, Method::Stable] {
            let tr = integrate(&Predictor::for_model(method, &m), &x0, &d, 1.0, 0.1).unwrap();
            assert_eq!(tr.states.len(), 11);
            assert!(tr.states.iter().all(|s| s == &x0));
        }
    }

    #[test]
    fn settings_are_validated() {
        let m = scalar_model();
        let p = Predictor::Stable(m);
        let x0 = IntervalVector::from_slices(&[1.0], &[1.1]).unwrap();
        let d = SignalBounds::constant(d_scalar());
        assert!(integrate(&p, &x0, &d, 1.0, 0.0).is_err());
        assert!(integrate(&p, &x0, &d, 1.0, -0.1).is_err());
        assert!(integrate(&p, &x0, &d, 0.01, 0.1).is_err());
        assert_eq!(step_count(10.0, 0.01), 1000);
        assert_eq!(step_count(2.0, 0.02), 100);
    }

    #[test]
    fn naive_scalar_truncates_on_overflow() {
        let m = scalar_model();
        let x0 = IntervalVector::from_slices(&[1.0], &[1.1]).unwrap();
        let d = SignalBounds::constant(d_scalar());
        let tr = integrate(
            &Predictor::for_model(Method::Naive, &m),
            &x0,
            &d,
            1000.0,
            0.01,
        )
        .unwrap();
        let cut = tr.truncated_at.expect("diverges to infinity");
        assert!(cut < 1000.0);
        assert!(tr.states.iter().all(|s| s.is_finite()));
    }
}
