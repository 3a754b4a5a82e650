//! The tangent-sweep and tangent-cluster maps and the covering-multiplicity
//! machinery.
//!
//! For a graph patch L, the sweep map sends a frame (q, t) to the point of
//! the affine tangent space at q with coordinates t; the cluster map sends
//! it to the same point after translating the foot to the origin. The
//! composition (cluster after inverse sweep) is symplectic wherever the
//! sweep is a local diffeomorphism, which fails exactly on det A(q, t) = 0.
//! Counting how many tangent spaces pass through a test point reduces to
//! root counting for the gradient of a cubic-corrected polynomial, and the
//! expected generic counts come from Newton numbers of diagonal germs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianGraph, TangentFrame};
use crate::poly::SparsePolynomial;
use crate::symplectic::{fd_jacobian, omega_matrix, DarbouxPoint};

/// Internal tolerance for deciding whether a frame sits in the critical set
/// before attempting pullback verification.
const DELTA_TOL: f64 = 1e-9;

/// A frame with its images under both maps. `source` is the point of the
/// tangent sweep, `target` the corresponding point of the tangent cluster;
/// their difference is always the foot point on L.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample {
    pub frame: TangentFrame,
    pub source: DarbouxPoint,
    pub target: DarbouxPoint,
}

/// Applies both maps to one frame.
///
/// Panics if the frame dimension differs from the graph dimension.
pub fn sweep_map(graph: &LagrangianGraph, frame: &TangentFrame) -> SweepSample {
    let source = graph.tangent_point(frame);
    let target = DarbouxPoint::new(
        frame.t().clone(),
        graph.hess_at(frame.q()) * frame.t(),
    )
    .expect("equal lengths by construction");
    SweepSample {
        frame: frame.clone(),
        source,
        target,
    }
}

/// Outcome of a pullback check at one frame: the max-entry defect of
/// J_sweep^T Omega J_sweep - J_cluster^T Omega J_cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackReport {
    pub defect: f64,
    pub det_a: f64,
    pub pass: bool,
}

/// Verifies at one frame that the sweep-to-cluster composition is
/// symplectic, by comparing the omega pullbacks of both finite-difference
/// Jacobians (no inversion involved).
///
/// A frame in the critical set is a precondition failure: the composition
/// is not locally defined there. The error still carries the computed
/// defect, since both pullbacks exist and agree even on the critical set
/// (for quadratic F they are equal identically).
pub fn verify_symplectomorphism(
    graph: &LagrangianGraph,
    frame: &TangentFrame,
    step: f64,
    tol: f64,
) -> Result<PullbackReport> {
    let n = graph.n();
    let source_flat = |v: &DVector<f64>| {
        let fr = TangentFrame::from_flat(v).expect("probe stays finite");
        graph.tangent_point(&fr).flat()
    };
    let target_flat = |v: &DVector<f64>| {
        let fr = TangentFrame::from_flat(v).expect("probe stays finite");
        let y = graph.hess_at(fr.q()) * fr.t();
        DarbouxPoint::new(fr.t().clone(), y)
            .expect("equal lengths by construction")
            .flat()
    };
    let flat = frame.flat();
    let j_source = fd_jacobian(source_flat, &flat, step)?;
    let j_target = fd_jacobian(target_flat, &flat, step)?;
    let om = omega_matrix(n);
    let pull_source = j_source.transpose() * &om * &j_source;
    let pull_target = j_target.transpose() * &om * &j_target;
    let defect = (pull_source - pull_target).amax();

    let det_a = graph.det_a(frame);
    if graph.in_critical_set(frame, DELTA_TOL) {
        return Err(Error::CriticalFrame { det_a, defect });
    }
    Ok(PullbackReport {
        defect,
        det_a,
        pass: defect <= tol,
    })
}

/// The polynomial whose gradient cuts out the feet of tangent spaces
/// through test points over x: x . grad F - q . grad F + 2 F, as a
/// polynomial in q.
pub fn critical_function(graph: &LagrangianGraph, x: &DVector<f64>) -> Result<SparsePolynomial> {
    let n = graph.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let f = graph.generating();
    let mut acc = f.scale(2.0);
    for i in 0..n {
        let fi = f.partial(i)?;
        acc = acc.add(&fi.scale(x[i]))?;
        acc = acc.add(&fi.mul_var(i)?.scale(-1.0))?;
    }
    Ok(acc)
}

/// Axis-aligned search box for the multiplicity counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl SearchBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::BadSearchBox);
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() || !(lo[i] < hi[i]) {
                return Err(Error::BadSearchBox);
            }
        }
        Ok(SearchBox { lo, hi })
    }

    /// The cube [-r, r]^n.
    pub fn symmetric(n: usize, r: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(n, -r),
            DVector::from_element(n, r),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn diameter(&self) -> f64 {
        (&self.hi - &self.lo).norm()
    }

    fn contains(&self, q: &DVector<f64>, slack: f64) -> bool {
        (0..self.dim()).all(|i| self.lo[i] - slack <= q[i] && q[i] <= self.hi[i] + slack)
    }

    /// Inclusive per-axis linspace, full cartesian product.
    fn nodes(&self, grid: usize) -> Vec<DVector<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(grid.pow(n as u32));
        let mut idx = vec![0usize; n];
        loop {
            out.push(DVector::from_fn(n, |i, _| {
                self.lo[i] + (self.hi[i] - self.lo[i]) * idx[i] as f64 / (grid - 1) as f64
            }));
            let mut axis = 0;
            loop {
                if axis == n {
                    return out;
                }
                idx[axis] += 1;
                if idx[axis] < grid {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

/// Knobs for [`count_tangent_spaces`]. Defaults: unit box, 8 nodes per
/// axis, residual 1e-10, critical-set tolerance 1e-4, 60 Newton steps.
///
/// The critical tolerance is the square root of the residual tolerance:
/// at a degenerate root the residual is quadratic in the distance while
/// the system determinant is linear in it, so a solver that stops at
/// residual eps can place the root no better than sqrt(eps) and leaves a
/// determinant of that order.
#[derive(Debug, Clone)]
pub struct CountParams {
    pub search_box: SearchBox,
    pub grid: usize,
    pub residual_tol: f64,
    pub critical_tol: f64,
    pub max_iter: usize,
}

impl CountParams {
    pub fn for_dim(n: usize) -> Result<Self> {
        Ok(CountParams::with_box(SearchBox::symmetric(n, 1.0)?))
    }

    pub fn with_box(search_box: SearchBox) -> Self {
        CountParams {
            grid: 8,
            residual_tol: 1e-10,
            critical_tol: 1e-4,
            max_iter: 60,
            search_box,
        }
    }
}

/// One deduplicated solution of the tangency system.
#[derive(Debug, Clone)]
pub struct RootRecord {
    pub q: DVector<f64>,
    pub residual: f64,
    pub det_a: f64,
    pub near_critical: bool,
}

/// Outcome of a multiplicity count. `count` is the number of roots off the
/// critical set; flagged roots are kept for inspection but not counted.
#[derive(Debug, Clone)]
pub struct RootReport {
    pub roots: Vec<RootRecord>,
    pub flagged_near_critical: Vec<usize>,
    pub count: usize,
    pub all_starts_diverged: bool,
}

const MIN_GRID: usize = 8;
const DEDUPE_FACTOR: f64 = 1e-6;

/// Counts tangent spaces of the graph passing through `test` with feet in
/// the search box, by damped Newton on grad Phi_x(q) = y from every grid
/// node. The Newton matrix is exactly A(q, x - q), so the iteration itself
/// degenerates on the critical set; such roots are flagged, not counted.
pub fn count_tangent_spaces(
    graph: &LagrangianGraph,
    test: &DarbouxPoint,
    params: &CountParams,
) -> Result<RootReport> {
    let n = graph.n();
    if test.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: test.dim(),
        });
    }
    if params.search_box.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: params.search_box.dim(),
        });
    }
    if params.grid < MIN_GRID {
        return Err(Error::GridTooCoarse {
            got: params.grid,
            min: MIN_GRID,
        });
    }

    let x = test.x();
    let y = test.y();
    // grad Phi_x(q) - y = Hess F(q) (x - q) + grad F(q) - y.
    let residual = |q: &DVector<f64>| {
        graph.hess_at(q) * (x - q) + graph.grad_at(q) - y
    };
    let newton_matrix = |q: &DVector<f64>| {
        let fr = TangentFrame::new(q.clone(), x - q).expect("finite iterate");
        graph.matrix_a(&fr)
    };

    let nodes = params.search_box.nodes(params.grid);
    let converged: Vec<Option<DVector<f64>>> = nodes
        .into_par_iter()
        .map(|start| {
            newton_solve(
                &residual,
                &newton_matrix,
                start,
                params.residual_tol,
                params.max_iter,
            )
        })
        .collect();

    let any_converged = converged.iter().any(Option::is_some);
    let slack = DEDUPE_FACTOR * params.search_box.diameter();
    let mut in_box: Vec<DVector<f64>> = converged
        .into_iter()
        .flatten()
        .filter(|q| params.search_box.contains(q, slack))
        .collect();
    in_box.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .fold(std::cmp::Ordering::Equal, |ord, (u, v)| {
                ord.then(u.total_cmp(v))
            })
    });

    let dedupe_radius = DEDUPE_FACTOR * params.search_box.diameter();
    let mut reps: Vec<DVector<f64>> = Vec::new();
    for q in in_box {
        match reps
            .iter_mut()
            .find(|r| (&q - &**r).norm() <= dedupe_radius)
        {
            Some(rep) => {
                if residual(&q).amax() < residual(rep).amax() {
                    *rep = q;
                }
            }
            None => reps.push(q),
        }
    }

    let mut roots = Vec::with_capacity(reps.len());
    let mut flagged = Vec::new();
    for (i, q) in reps.into_iter().enumerate() {
        let fr = TangentFrame::new(q.clone(), x - &q).expect("finite root");
        let near_critical = graph.in_critical_set(&fr, params.critical_tol);
        if near_critical {
            flagged.push(i);
        }
        roots.push(RootRecord {
            residual: residual(&q).amax(),
            det_a: graph.det_a(&fr),
            near_critical,
            q,
        });
    }
    let count = roots.len() - flagged.len();
    Ok(RootReport {
        roots,
        flagged_near_critical: flagged,
        count,
        all_starts_diverged: !any_converged,
    })
}

/// Damped Newton with the analytic system matrix; `None` on divergence.
fn newton_solve(
    residual: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Sync),
    matrix: &(dyn Fn(&DVector<f64>) -> DMatrix<f64> + Sync),
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<DVector<f64>> {
    let mut q = start;
    let mut r = residual(&q);
    for _ in 0..max_iter {
        if r.amax() <= tol {
            return Some(q);
        }
        let delta = matrix(&q).lu().solve(&r)?;
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..25 {
            let trial = &q - &delta * lambda;
            let r_trial = residual(&trial);
            if r_trial.norm() < r.norm() {
                q = trial;
                r = r_trial;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    (r.amax() <= tol).then_some(q)
}

/// Newton number of the diagonal germ with axis intercepts d_1..d_n: the
/// alternating sum over coordinate subsets of intercept products,
/// cross-checked against the closed form prod (d_i - 1).
pub fn newton_number(intercepts: &[u32]) -> Result<u64> {
    let n = intercepts.len();
    if n == 0 {
        return Err(Error::invalid("need at least one intercept"));
    }
    if n > 24 {
        return Err(Error::invalid("subset enumeration capped at 24 intercepts"));
    }
    if intercepts.iter().any(|&d| d < 1) {
        return Err(Error::BadIntercept);
    }

    let overflow = || Error::invalid("intercepts too large for exact arithmetic");
    let mut alternating: i128 = 0;
    for mask in 0u32..(1u32 << n) {
        let mut prod: i128 = 1;
        for (i, &d) in intercepts.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prod = prod.checked_mul(i128::from(d)).ok_or_else(overflow)?;
            }
        }
        let picked = mask.count_ones() as usize;
        let signed = if (n - picked) % 2 == 0 { prod } else { -prod };
        alternating = alternating.checked_add(signed).ok_or_else(overflow)?;
    }

    let mut closed: i128 = 1;
    for &d in intercepts {
        closed = closed
            .checked_mul(i128::from(d) - 1)
            .ok_or_else(overflow)?;
    }
    assert_eq!(
        alternating, closed,
        "alternating sum disagrees with closed form"
    );
    u64::try_from(closed).map_err(|_| overflow())
}

/// Expected generic covering multiplicity 2^(n-m) near a diagonal cubic
/// germ, where m counts nonzero components of x. Requires every q_i^3
/// coefficient of F to be nonzero (the genericity the prediction rests on).
pub fn predicted_multiplicity(graph: &LagrangianGraph, x: &DVector<f64>) -> Result<u64> {
    let n = graph.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    for i in 0..n {
        let mut exps = vec![0u32; n];
        exps[i] = 3;
        if graph.generating().coefficient(&exps) == 0.0 {
            return Err(Error::NonGenericCubic { index: i });
        }
    }
    let m = x.iter().filter(|&&xi| xi != 0.0).count();
    Ok(1u64 << (n - m))
}
