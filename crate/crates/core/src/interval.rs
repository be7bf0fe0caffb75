//! Dense interval vectors/matrices and the interval-product bounds.
//!
//! Every bound here is computed in ordinary floating point. There is no
//! outward rounding: the enclosures are exact at the model level and the
//! tests compare with tolerances where integration is involved.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("interval order violated at index {index}: lower {lower} > upper {upper}")]
    OrderViolation {
        index: usize,
        lower: f64,
        upper: f64,
    },
}

pub(crate) fn dims(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Positive part `max(0, x)` of a scalar.
#[inline]
pub fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Negative part `max(0, -x)` of a scalar, so that `x = pos(x) - neg(x)`.
#[inline]
pub fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Splits `m` into its positive and negative parts.
///
/// `plus = max(0, m)` and `minus = plus - m`; both are nonnegative and
/// `plus + minus = |m|`.
pub fn split_parts(m: &Matrix) -> (Matrix, Matrix) {
    (m.map(pos), m.map(neg))
}

/// Elementwise positive/negative parts of a vector.
pub fn split_vector(v: &Vector) -> (Vector, Vector) {
    (v.map(pos), v.map(neg))
}

/// A box `lower <= x <= upper` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lower: Vector,
    upper: Vector,
}

impl IntervalVector {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self, IntervalError> {
        if lower.len() != upper.len() {
            return Err(IntervalError::DimensionMismatch {
                expected: lower.len().to_string(),
                got: upper.len().to_string(),
            });
        }
        // NaN compares false, so `!(l <= u)` also rejects NaN bounds.
        if let Some((index, (l, u))) = lower
            .iter()
            .zip(upper.iter())
            .enumerate()
            .find(|(_, (l, u))| !(l <= u))
        {
            return Err(IntervalError::OrderViolation {
                index,
                lower: *l,
                upper: *u,
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self, IntervalError> {
        Self::new(
            Vector::from_column_slice(lower),
            Vector::from_column_slice(upper),
        )
    }

    /// Degenerate box containing only `point`.
    pub fn point(point: Vector) -> Self {
        Self {
            lower: point.clone(),
            upper: point,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::point(Vector::zeros(n))
    }

    /// Builds a box without the order check. Callers must already know
    /// that `lower <= upper`, e.g. because the bounds come from interval
    /// products of a valid box.
    pub(crate) fn new_unchecked(lower: Vector, upper: Vector) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self) -> Vector {
        &self.upper - &self.lower
    }

    pub fn max_width(&self) -> f64 {
        self.width().iter().copied().fold(0.0, f64::max)
    }

    pub fn midpoint(&self) -> Vector {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn contains(&self, v: &Vector, slack: f64) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(x, (l, u))| *x >= l - slack && *x <= u + slack)
    }

    pub fn is_finite(&self) -> bool {
        self.lower
            .iter()
            .chain(self.upper.iter())
            .all(|x| x.is_finite())
    }

    /// Smallest box containing both `self` and `other`.
    pub fn hull(&self, other: &Self) -> Result<Self, IntervalError> {
        check_len(self.dim(), other.dim())?;
        Ok(Self {
            lower: self.lower.zip_map(&other.lower, f64::min),
            upper: self.upper.zip_map(&other.upper, f64::max),
        })
    }

    /// Shifts both bounds by `offset`.
    pub fn translate(&self, offset: &Vector) -> Result<Self, IntervalError> {
        check_len(self.dim(), offset.len())?;
        Ok(Self {
            lower: &self.lower + offset,
            upper: &self.upper + offset,
        })
    }
}

/// A matrix interval `lower <= A <= upper`, elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lower: Matrix,
    upper: Matrix,
}

impl IntervalMatrix {
    pub fn new(lower: Matrix, upper: Matrix) -> Result<Self, IntervalError> {
        if lower.shape() != upper.shape() {
            return Err(IntervalError::DimensionMismatch {
                expected: dims(&lower),
                got: dims(&upper),
            });
        }
        if let Some((index, (l, u))) = lower
            .iter()
            .zip(upper.iter())
            .enumerate()
            .find(|(_, (l, u))| !(l <= u))
        {
            return Err(IntervalError::OrderViolation {
                index,
                lower: *l,
                upper: *u,
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn point(m: Matrix) -> Self {
        Self {
            lower: m.clone(),
            upper: m,
        }
    }

    /// Elementwise hull of a nonempty family of matrices.
    pub fn hull_of<'a, I>(mats: I) -> Result<Self, IntervalError>
    where
        I: IntoIterator<Item = &'a Matrix>,
    {
        let mut it = mats.into_iter();
        let first = it.next().ok_or_else(|| IntervalError::DimensionMismatch {
            expected: "at least one matrix".into(),
            got: "none".into(),
        })?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for m in it {
            if m.shape() != lower.shape() {
                return Err(IntervalError::DimensionMismatch {
                    expected: dims(&lower),
                    got: dims(m),
                });
            }
            lower.zip_apply(m, |l, x| *l = l.min(x));
            upper.zip_apply(m, |u, x| *u = u.max(x));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn upper(&self) -> &Matrix {
        &self.upper
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), IntervalError> {
    if expected != got {
        return Err(IntervalError::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

/// Bounds `A x` for a constant matrix `A` and `x` in the box:
/// `[A⁺x̲ − A⁻x̄, A⁺x̄ − A⁻x̲]`.
pub fn mul_const_interval(a: &Matrix, x: &IntervalVector) -> Result<IntervalVector, IntervalError> {
    check_len(a.ncols(), x.dim())?;
    let (ap, am) = split_parts(a);
    let lower = &ap * &x.lower - &am * &x.upper;
    let upper = &ap * &x.upper - &am * &x.lower;
    Ok(IntervalVector::new_unchecked(lower, upper))
}

/// Bounds `A x` when both `A` and `x` range over intervals.
///
/// Uses the four-term form built from the positive/negative parts of the
/// matrix bounds and of the vector bounds.
pub fn mul_interval_interval(
    a: &IntervalMatrix,
    x: &IntervalVector,
) -> Result<IntervalVector, IntervalError> {
    check_len(a.shape().1, x.dim())?;
    let (al_p, al_m) = split_parts(&a.lower);
    let (au_p, au_m) = split_parts(&a.upper);
    let (xl_p, xl_m) = split_vector(&x.lower);
    let (xu_p, xu_m) = split_vector(&x.upper);
    let lower = &al_p * &xl_p - &au_p * &xl_m - &al_m * &xu_p + &au_m * &xu_m;
    let upper = &au_p * &xu_p - &al_p * &xu_m - &au_m * &xl_p + &al_m * &xl_m;
    Ok(IntervalVector::new_unchecked(lower, upper))
}

/// The simplified product for a sign-symmetric matrix interval
/// `-Ā = A̲ <= 0 <= Ā`: `±Ā (x̄⁺ + x̲⁻)`.
pub fn mul_symmetric_interval(
    a_upper: &Matrix,
    x: &IntervalVector,
) -> Result<IntervalVector, IntervalError> {
    check_len(a_upper.ncols(), x.dim())?;
    let r = a_upper * (x.upper.map(pos) + x.lower.map(neg));
    Ok(IntervalVector::new_unchecked(-&r, r))
}
