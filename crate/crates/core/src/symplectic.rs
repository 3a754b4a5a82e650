//! Linear symplectic algebra in Darboux coordinates.
//!
//! Sign convention, used by every module: for a = (x, y) and b = (x', y'),
//! omega(a, b) = x . y' - y . x', i.e. omega = sum_i dx_i ^ dy_i.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of R^{2n} split into position-like and momentum-like halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "DarbouxLiteral", into = "DarbouxLiteral")]
pub struct DarbouxPoint {
    x: DVector<f64>,
    y: DVector<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DarbouxLiteral {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<DarbouxLiteral> for DarbouxPoint {
    type Error = Error;
    fn try_from(l: DarbouxLiteral) -> Result<Self> {
        DarbouxPoint::new(DVector::from_vec(l.x), DVector::from_vec(l.y))
    }
}

impl From<DarbouxPoint> for DarbouxLiteral {
    fn from(p: DarbouxPoint) -> Self {
        DarbouxLiteral {
            x: p.x.iter().copied().collect(),
            y: p.y.iter().copied().collect(),
        }
    }
}

impl DarbouxPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::invalid("Darboux point needs dimension at least 1"));
        }
        Ok(DarbouxPoint { x, y })
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(y))
    }

    /// Splits a flat (x_1..x_n, y_1..y_n) vector.
    pub fn from_flat(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 || v.is_empty() {
            return Err(Error::invalid("flat Darboux vector must have even positive length"));
        }
        let n = v.len() / 2;
        Self::new(v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Concatenates into (x_1..x_n, y_1..y_n).
    pub fn flat(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.x[i] } else { self.y[i - n] })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::new(&self.x + &other.x, &self.y + &other.y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::new(&self.x - &other.x, &self.y - &other.y)
    }

    pub fn scale(&self, c: f64) -> Self {
        DarbouxPoint {
            x: &self.x * c,
            y: &self.y * c,
        }
    }

    /// Reflection of `self` through `center`: 2·center − self.
    pub fn reflect_through(&self, center: &Self) -> Result<Self> {
        center.scale(2.0).sub(self)
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.amax().max(self.y.amax())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

/// The standard symplectic pairing x . y' - y . x'.
pub fn omega(a: &DarbouxPoint, b: &DarbouxPoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.x().dot(b.y()) - a.y().dot(b.x()))
}

/// Matrix of omega in the flat (x, y) basis: [[0, I], [-I, 0]].
pub fn omega_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// Central-difference Jacobian of `map` at `point`.
pub fn fd_jacobian<F>(map: F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    try_fd_jacobian(|p| Ok(map(p)), point, step)
}

/// Like [`fd_jacobian`] but lets the map signal evaluation failure.
pub fn try_fd_jacobian<F>(map: F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidStep(step));
    }
    let rows = map(point)?.len();
    let cols = point.len();
    let mut jac = DMatrix::zeros(rows, cols);
    let mut probe = point.clone();
    for j in 0..cols {
        probe[j] = point[j] + step;
        let plus = map(&probe)?;
        probe[j] = point[j] - step;
        let minus = map(&probe)?;
        probe[j] = point[j];
        if plus.len() != rows || minus.len() != rows {
            return Err(Error::invalid("map output dimension changed between evaluations"));
        }
        jac.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    Ok(jac)
}

/// Result of a symplecticity test: the max-entry defect of J^T Omega J - Omega
/// and the verdict at the requested tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticCheck {
    pub defect: f64,
    pub symplectic: bool,
}

/// Tests whether a 2n x 2n matrix preserves omega.
pub fn is_symplectic(j: &DMatrix<f64>, tol: f64) -> Result<SymplecticCheck> {
    let (rows, cols) = j.shape();
    if rows != cols || rows % 2 != 0 || rows == 0 {
        return Err(Error::NotEvenSquare { rows, cols });
    }
    let om = omega_matrix(rows / 2);
    let defect = (j.transpose() * &om * j - &om).amax();
    Ok(SymplecticCheck {
        defect,
        symplectic: defect <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dp(x: &[f64], y: &[f64]) -> DarbouxPoint {
        DarbouxPoint::from_slices(x, y).unwrap()
    }

    #[test]
    fn omega_basis_pairings() {
        assert_eq!(omega(&dp(&[1.0], &[0.0]), &dp(&[0.0], &[1.0])).unwrap(), 1.0);
        let a = dp(&[0.3, -0.7], &[2.0, 0.1]);
        assert_eq!(omega(&a, &a).unwrap(), 0.0);

        let e1 = dp(&[1.0, 0.0], &[0.0, 0.0]);
        let f1 = dp(&[0.0, 0.0], &[1.0, 0.0]);
        let e2 = dp(&[0.0, 1.0], &[0.0, 0.0]);
        let f2 = dp(&[0.0, 0.0], &[0.0, 1.0]);
        assert_eq!(omega(&e1, &f1).unwrap(), 1.0);
        assert_eq!(omega(&e1, &e2).unwrap(), 0.0);
        assert_eq!(omega(&e1, &f2).unwrap(), 0.0);
        assert_eq!(omega(&f1, &f2).unwrap(), 0.0);
        assert_eq!(omega(&e2, &f2).unwrap(), 1.0);
    }

    #[test]
    fn omega_matrix_squares_to_minus_identity() {
        for n in 1..=4 {
            let om = omega_matrix(n);
            let id = DMatrix::<f64>::identity(2 * n, 2 * n);
            assert_eq!(&om * &om, -id);
        }
    }

    #[test]
    fn flat_round_trip() {
        let a = dp(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(DarbouxPoint::from_flat(&a.flat()).unwrap(), a);
    }

    #[test]
    fn fd_jacobian_recovers_linear_map() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.5, 3.0]);
        let p = DVector::from_row_slice(&[0.3, -0.8]);
        // Central differences have no truncation error on a linear map, so
        // a large step leaves only rounding.
        let j = fd_jacobian(|v| &m * v, &p, 0.5).unwrap();
        assert!((j - &m).amax() <= 1e-12);

        // A small step divides the cancellation error by 2h.
        let j = fd_jacobian(|v| &m * v, &p, 1e-5).unwrap();
        assert!((j - &m).amax() <= 1e-10);

        let id = fd_jacobian(|v| v.clone(), &p, 0.5).unwrap();
        assert!((id - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
    }

    #[test]
    fn fd_jacobian_quadratic_map_accuracy() {
        // f(u, v) = (u^2, u v): analytic Jacobian [[2u, 0], [v, u]].
        let p = DVector::from_row_slice(&[0.7, -0.4]);
        let j = fd_jacobian(
            |v| DVector::from_row_slice(&[v[0] * v[0], v[0] * v[1]]),
            &p,
            1e-5,
        )
        .unwrap();
        let analytic = DMatrix::from_row_slice(2, 2, &[1.4, 0.0, -0.4, 0.7]);
        assert!((j - analytic).amax() <= 1e-8);
    }

    #[test]
    fn fd_jacobian_rejects_bad_step() {
        let p = DVector::from_row_slice(&[0.0]);
        assert!(matches!(
            fd_jacobian(|v| v.clone(), &p, 0.0),
            Err(Error::InvalidStep(_))
        ));
        assert!(matches!(
            fd_jacobian(|v| v.clone(), &p, -1e-3),
            Err(Error::InvalidStep(_))
        ));
    }

    #[test]
    fn symplectic_check_hand_cases() {
        let id = DMatrix::<f64>::identity(2, 2);
        let chk = is_symplectic(&id, 1e-12).unwrap();
        assert_eq!(chk.defect, 0.0);
        assert!(chk.symplectic);

        let area_preserving = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let chk = is_symplectic(&area_preserving, 1e-12).unwrap();
        assert_eq!(chk.defect, 0.0);
        assert!(chk.symplectic);

        let doubling = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let chk = is_symplectic(&doubling, 1e-9).unwrap();
        assert_abs_diff_eq!(chk.defect, 3.0, epsilon = 1e-15);
        assert!(!chk.symplectic);

        let odd = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            is_symplectic(&odd, 1e-9),
            Err(Error::NotEvenSquare { rows: 3, cols: 3 })
        ));
    }
}
