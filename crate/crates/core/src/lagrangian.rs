//! Lagrangian submanifold models and their tangent-space data.
//!
//! Two models are supported: the graph of the differential of a polynomial
//! generating function (local patches, arbitrary dimension) and products of
//! strictly convex plane curves (compact, used for orbit searches). The
//! graph model caches every symbolic derivative it needs, so numeric
//! evaluation of gradients, Hessians, and the third-derivative contraction
//! A(q, t) costs only polynomial evaluations.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planar::{CurveSpec, PlaneCurve};
use crate::poly::{PolyLiteral, SparsePolynomial};
use crate::symplectic::{omega, DarbouxPoint};

/// A foot-point parameter q on the submanifold together with tangent-space
/// coordinates t.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    q: DVector<f64>,
    t: DVector<f64>,
}

impl TangentFrame {
    pub fn new(q: DVector<f64>, t: DVector<f64>) -> Result<Self> {
        if q.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: t.len(),
            });
        }
        if q.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("frame entries must be finite"));
        }
        Ok(TangentFrame { q, t })
    }

    pub fn from_slices(q: &[f64], t: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(q), DVector::from_row_slice(t))
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn t(&self) -> &DVector<f64> {
        &self.t
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Flat (q, t) coordinates, the domain of the sweep maps.
    pub fn flat(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.t[i - n] })
    }

    pub fn from_flat(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 || v.is_empty() {
            return Err(Error::invalid("flat frame must have even positive length"));
        }
        let n = v.len() / 2;
        Self::new(v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }
}

/// The graph p = grad F(q) of a polynomial generating function.
#[derive(Debug, Clone)]
pub struct LagrangianGraph {
    f: SparsePolynomial,
    grad: Vec<SparsePolynomial>,
    hess: Vec<Vec<SparsePolynomial>>,
    third: Vec<Vec<Vec<SparsePolynomial>>>,
}

/// A pair of nearby graph points whose displacement pairing under omega is
/// visibly nonzero, certifying that the patch is not locally affine.
#[derive(Debug, Clone)]
pub struct NondegeneracyWitness {
    pub first: DarbouxPoint,
    pub second: DarbouxPoint,
    pub pairing: f64,
}

const WITNESS_BUDGET: usize = 1000;

impl LagrangianGraph {
    pub fn new(f: SparsePolynomial) -> Self {
        let grad = f.gradient();
        let hess = f.hessian();
        let third = f.third_tensor();
        LagrangianGraph {
            f,
            grad,
            hess,
            third,
        }
    }

    pub fn n(&self) -> usize {
        self.f.nvars()
    }

    pub fn generating(&self) -> &SparsePolynomial {
        &self.f
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn f_at(&self, q: &DVector<f64>) -> f64 {
        self.f.eval(q.as_slice()).expect("dimension checked by caller")
    }

    pub fn grad_at(&self, q: &DVector<f64>) -> DVector<f64> {
        let qs = q.as_slice();
        DVector::from_fn(self.n(), |i, _| {
            self.grad[i].eval(qs).expect("dimension checked by caller")
        })
    }

    pub fn hess_at(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let qs = q.as_slice();
        DMatrix::from_fn(self.n(), self.n(), |i, j| {
            self.hess[i][j].eval(qs).expect("dimension checked by caller")
        })
    }

    /// Largest |F_ijk| over all index triples at q; the local scale of the
    /// third-derivative tensor.
    pub fn max_third_at(&self, q: &DVector<f64>) -> f64 {
        let qs = q.as_slice();
        let n = self.n();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    m = m.max(
                        self.third[i][j][k]
                            .eval(qs)
                            .expect("dimension checked by caller")
                            .abs(),
                    );
                }
            }
        }
        m
    }

    /// The point (q, grad F(q)) on the submanifold.
    pub fn point_on_graph(&self, q: &DVector<f64>) -> Result<DarbouxPoint> {
        self.check_dim(q.len())?;
        DarbouxPoint::new(q.clone(), self.grad_at(q))
    }

    /// The point of the affine tangent space at q with tangent coordinates
    /// t: (q + t, grad F(q) + Hess F(q) t).
    ///
    /// Panics if the frame dimension differs from the graph dimension.
    pub fn tangent_point(&self, frame: &TangentFrame) -> DarbouxPoint {
        self.assert_frame(frame);
        let x = frame.q() + frame.t();
        let y = self.grad_at(frame.q()) + self.hess_at(frame.q()) * frame.t();
        DarbouxPoint::new(x, y).expect("equal lengths by construction")
    }

    fn assert_frame(&self, frame: &TangentFrame) {
        assert_eq!(
            frame.dim(),
            self.n(),
            "frame dimension {} does not match graph dimension {}",
            frame.dim(),
            self.n()
        );
    }

    /// The symmetric contraction A(q, t)_ij = sum_k t_k F_ijk(q).
    ///
    /// Panics if the frame dimension differs from the graph dimension.
    pub fn matrix_a(&self, frame: &TangentFrame) -> DMatrix<f64> {
        self.assert_frame(frame);
        let n = self.n();
        let qs = frame.q().as_slice();
        let t = frame.t();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    if t[k] != 0.0 {
                        acc += t[k]
                            * self.third[i][j][k]
                                .eval(qs)
                                .expect("dimension checked by caller");
                    }
                }
                a[(i, j)] = acc;
                a[(j, i)] = acc;
            }
        }
        a
    }

    /// det A(q, t); closed forms up to n = 3, LU beyond.
    pub fn det_a(&self, frame: &TangentFrame) -> f64 {
        let a = self.matrix_a(frame);
        match self.n() {
            1 => a[(0, 0)],
            2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
            3 => {
                a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
                    - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
                    + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)])
            }
            _ => a.determinant(),
        }
    }

    /// Whether the frame lies in the critical locus det A = 0 (which
    /// includes all of L at t = 0). The tolerance is relative to the local
    /// scale of det A, which is homogeneous of degree n in t.
    pub fn in_critical_set(&self, frame: &TangentFrame, tol: f64) -> bool {
        let scale =
            (frame.t().norm().powi(self.n() as i32) * self.max_third_at(frame.q())).max(1.0);
        self.det_a(frame).abs() <= tol * scale
    }

    /// Random search for two nearby graph points whose displacements from
    /// (q, grad F(q)) have nonzero omega pairing. Failure after the fixed
    /// budget suggests the patch is affine (quadratic F).
    pub fn nondegeneracy_witness(
        &self,
        q: &DVector<f64>,
        radius: f64,
        seed: u64,
    ) -> Result<Option<NondegeneracyWitness>> {
        self.check_dim(q.len())?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRadius(radius));
        }
        let base = self.point_on_graph(q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let threshold = 1e-10 * radius * radius;
        for _ in 0..WITNESS_BUDGET {
            let q1 = DVector::from_fn(self.n(), |i, _| {
                q[i] + rng.random_range(-radius..radius)
            });
            let q2 = DVector::from_fn(self.n(), |i, _| {
                q[i] + rng.random_range(-radius..radius)
            });
            let p1 = self.point_on_graph(&q1)?;
            let p2 = self.point_on_graph(&q2)?;
            let pairing = omega(&p1.sub(&base)?, &p2.sub(&base)?)?;
            if pairing.abs() > threshold {
                return Ok(Some(NondegeneracyWitness {
                    first: p1,
                    second: p2,
                    pairing,
                }));
            }
        }
        Ok(None)
    }
}

/// Product of strictly convex plane curves, a compact Lagrangian in R^{2n}:
/// the i-th factor contributes coordinate pair (x_i, y_i).
#[derive(Debug, Clone)]
pub struct ProductCurveLagrangian {
    curves: Vec<PlaneCurve>,
}

impl ProductCurveLagrangian {
    pub fn new(curves: Vec<PlaneCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::invalid("product model needs at least one curve"));
        }
        Ok(ProductCurveLagrangian { curves })
    }

    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn curves(&self) -> &[PlaneCurve] {
        &self.curves
    }

    fn check_angles(&self, angles: &[f64]) -> Result<()> {
        if angles.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: angles.len(),
            });
        }
        Ok(())
    }

    /// Point of L at the given per-curve parameters.
    pub fn point(&self, angles: &[f64]) -> Result<DarbouxPoint> {
        self.check_angles(angles)?;
        let n = self.n();
        let pts: Vec<Vector2<f64>> = self
            .curves
            .iter()
            .zip(angles)
            .map(|(c, &th)| c.point(th))
            .collect();
        Ok(DarbouxPoint::new(
            DVector::from_fn(n, |i, _| pts[i].x),
            DVector::from_fn(n, |i, _| pts[i].y),
        )
        .expect("equal lengths by construction"))
    }

    /// Per-factor curve tangent vectors; together they span the tangent
    /// space of the product at the given parameters.
    pub fn factor_tangents(&self, angles: &[f64]) -> Result<Vec<Vector2<f64>>> {
        self.check_angles(angles)?;
        Ok(self
            .curves
            .iter()
            .zip(angles)
            .map(|(c, &th)| c.derivative(th))
            .collect())
    }
}

/// Either supported model, as configured from a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub enum LagrangianModel {
    Graph(LagrangianGraph),
    Product(ProductCurveLagrangian),
}

impl LagrangianModel {
    pub fn n(&self) -> usize {
        match self {
            LagrangianModel::Graph(g) => g.n(),
            LagrangianModel::Product(p) => p.n(),
        }
    }
}

/// Wire format: `{"type":"graph","F":<polynomial literal>}` or
/// `{"type":"product","curves":[<curve spec>,...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PolyLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<CurveSpec>>,
}

impl TryFrom<ModelSpec> for LagrangianModel {
    type Error = Error;
    fn try_from(spec: ModelSpec) -> Result<Self> {
        match spec.kind.as_str() {
            "graph" => {
                if spec.curves.is_some() {
                    return Err(Error::invalid("graph model cannot carry curves"));
                }
                let lit = spec.f.ok_or_else(|| Error::invalid("graph model needs 'F'"))?;
                Ok(LagrangianModel::Graph(LagrangianGraph::new(
                    SparsePolynomial::try_from(lit)?,
                )))
            }
            "product" => {
                if spec.f.is_some() {
                    return Err(Error::invalid("product model cannot carry 'F'"));
                }
                let specs = spec
                    .curves
                    .ok_or_else(|| Error::invalid("product model needs 'curves'"))?;
                let curves = specs
                    .into_iter()
                    .map(PlaneCurve::try_from)
                    .collect::<Result<Vec<_>>>()?;
                Ok(LagrangianModel::Product(ProductCurveLagrangian::new(
                    curves,
                )?))
            }
            other => Err(Error::invalid(format!("unknown model type '{other}'"))),
        }
    }
}

impl From<LagrangianModel> for ModelSpec {
    fn from(m: LagrangianModel) -> Self {
        match m {
            LagrangianModel::Graph(g) => ModelSpec {
                kind: "graph".into(),
                f: Some(PolyLiteral::from(g.f)),
                curves: None,
            },
            LagrangianModel::Product(p) => ModelSpec {
                kind: "product".into(),
                f: None,
                curves: Some(p.curves.into_iter().map(CurveSpec::from).collect()),
            },
        }
    }
}
