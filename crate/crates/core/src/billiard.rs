//! The outer-billiard correspondence on a Lagrangian submanifold and the
//! variational search for its odd-period orbits.
//!
//! Two points correspond when they lie on the same affine tangent space of
//! L, centrally symmetric about the foot point. On graph models the
//! correspondence is computed through the tangency counter; orbit searches
//! run on compact product-of-curves models, where k-periodic orbits are
//! critical points of an alternating action over midpoint tuples.

use nalgebra::{DVector, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianGraph, ProductCurveLagrangian, TangentFrame};
use crate::optim::{bfgs_max, newton_root};
use crate::planar::{dihedral_equivalent, planar_outer_step, Branch};
use crate::sweep::{count_tangent_spaces, CountParams};
use crate::symplectic::{fd_jacobian, omega, DarbouxPoint};

/// A correspondence pair: a and b on the same tangent space, centrally
/// symmetric about the foot.
#[derive(Debug, Clone)]
pub struct CorrespondencePair {
    pub a: DarbouxPoint,
    pub b: DarbouxPoint,
    pub foot: DarbouxPoint,
    pub frame: TangentFrame,
}

/// Builds the pair with the given frame: a at tangent coordinates t, b at
/// -t, foot on L.
///
/// Panics if the frame dimension differs from the graph dimension.
pub fn step_from_foot(graph: &LagrangianGraph, frame: &TangentFrame) -> CorrespondencePair {
    let a = graph.tangent_point(frame);
    let neg = TangentFrame::new(frame.q().clone(), -frame.t()).expect("negation stays finite");
    let b = graph.tangent_point(&neg);
    let foot = graph
        .point_on_graph(frame.q())
        .expect("frame dimension asserted by tangent_point");
    CorrespondencePair {
        a,
        b,
        foot,
        frame: frame.clone(),
    }
}

/// The pair through a specific foot parameter: residual refinement is the
/// caller's job (see `sweep::count_tangent_spaces` for finding feet).
pub fn pair_through_foot(
    graph: &LagrangianGraph,
    a: &DarbouxPoint,
    q: &DVector<f64>,
) -> Result<CorrespondencePair> {
    let foot = graph.point_on_graph(q)?;
    if a.dim() != foot.dim() {
        return Err(Error::DimensionMismatch {
            expected: foot.dim(),
            got: a.dim(),
        });
    }
    let frame = TangentFrame::new(q.clone(), a.x() - q)?;
    Ok(CorrespondencePair {
        a: a.clone(),
        b: a.reflect_through(&foot)?,
        foot,
        frame,
    })
}

/// All correspondence partners of `a` with feet in the search box, one per
/// tangent space through `a`. Pairs whose feet sit near the critical set
/// (including the degenerate partner b = a when a lies on L) are flagged by
/// index, mirroring the underlying root report.
#[derive(Debug, Clone)]
pub struct CorrespondentsReport {
    pub pairs: Vec<CorrespondencePair>,
    pub flagged_near_critical: Vec<usize>,
    pub all_starts_diverged: bool,
}

pub fn correspondents(
    graph: &LagrangianGraph,
    a: &DarbouxPoint,
    params: &CountParams,
) -> Result<CorrespondentsReport> {
    let report = count_tangent_spaces(graph, a, params)?;
    let pairs = report
        .roots
        .iter()
        .map(|r| pair_through_foot(graph, a, &r.q))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrespondentsReport {
        pairs,
        flagged_near_critical: report.flagged_near_critical,
        all_starts_diverged: report.all_starts_diverged,
    })
}

/// Coordinates of a point pair under the linear change of variables that
/// straightens the correspondence graph: q is the midpoint, p the
/// half-difference with its halves swapped and one sign flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoCoords {
    pub q1: DVector<f64>,
    pub q2: DVector<f64>,
    pub p1: DVector<f64>,
    pub p2: DVector<f64>,
}

/// Applies the linear isomorphism (a, a_bar) -> (q1, q2, p1, p2).
pub fn linear_iso(a: &DarbouxPoint, a_bar: &DarbouxPoint) -> Result<IsoCoords> {
    if a.dim() != a_bar.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: a_bar.dim(),
        });
    }
    Ok(IsoCoords {
        q1: (a.x() + a_bar.x()) * 0.5,
        q2: (a.y() + a_bar.y()) * 0.5,
        p1: (a_bar.y() - a.y()) * 0.5,
        p2: (a.x() - a_bar.x()) * 0.5,
    })
}

/// Inverts [`linear_iso`]: x = q1 + p2, x_bar = q1 - p2, y = q2 - p1,
/// y_bar = q2 + p1.
pub fn linear_iso_inverse(c: &IsoCoords) -> Result<(DarbouxPoint, DarbouxPoint)> {
    let n = c.q1.len();
    if c.q2.len() != n || c.p1.len() != n || c.p2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.q2.len().max(c.p1.len()).max(c.p2.len()),
        });
    }
    let a = DarbouxPoint::new(&c.q1 + &c.p2, &c.q2 - &c.p1)?;
    let a_bar = DarbouxPoint::new(&c.q1 - &c.p2, &c.q2 + &c.p1)?;
    Ok((a, a_bar))
}

/// Matrix of [`linear_iso`] on flat (x, y, x_bar, y_bar) coordinates,
/// producing flat (q1, q2, p1, p2). All entries are +-1/2, so products with
/// it are exact in binary floating point.
pub fn linear_iso_matrix(n: usize) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        // q1 = (x + x_bar)/2
        m[(i, i)] = 0.5;
        m[(i, 2 * n + i)] = 0.5;
        // q2 = (y + y_bar)/2
        m[(n + i, n + i)] = 0.5;
        m[(n + i, 3 * n + i)] = 0.5;
        // p1 = (y_bar - y)/2
        m[(2 * n + i, n + i)] = -0.5;
        m[(2 * n + i, 3 * n + i)] = 0.5;
        // p2 = (x - x_bar)/2
        m[(3 * n + i, i)] = 0.5;
        m[(3 * n + i, 2 * n + i)] = -0.5;
    }
    m
}

/// Matrix of the difference form (omega on the bar copy minus omega on the
/// plain copy) in flat (x, y, x_bar, y_bar) coordinates.
pub fn omega_difference_matrix(n: usize) -> nalgebra::DMatrix<f64> {
    let om = crate::symplectic::omega_matrix(n);
    let mut m = nalgebra::DMatrix::zeros(4 * n, 4 * n);
    m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&(-&om));
    m.view_mut((2 * n, 2 * n), (2 * n, 2 * n)).copy_from(&om);
    m
}

/// Defects of the conormal test for a point pair against a graph model:
/// the straightened midpoint must lie on L and the straightened covector
/// must annihilate its tangent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConormalReport {
    pub on_l_defect: f64,
    pub tangency_defect: f64,
    pub pass: bool,
}

pub fn conormal_check(
    graph: &LagrangianGraph,
    a: &DarbouxPoint,
    a_bar: &DarbouxPoint,
    tol: f64,
) -> Result<ConormalReport> {
    let iso = linear_iso(a, a_bar)?;
    if iso.q1.len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: iso.q1.len(),
        });
    }
    let on_l_defect = (&iso.q2 - graph.grad_at(&iso.q1)).amax();
    let tangency_defect = (&iso.p1 + graph.hess_at(&iso.q1) * &iso.p2).amax();
    Ok(ConormalReport {
        on_l_defect,
        tangency_defect,
        pass: on_l_defect <= tol && tangency_defect <= tol,
    })
}

/// Alternating action of a cyclically ordered midpoint tuple.
pub fn action(points: &[DarbouxPoint]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::invalid("action needs at least 3 points"));
    }
    let mut acc = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * omega(&points[i], &points[j])?;
        }
    }
    Ok(acc)
}

/// A candidate k-periodic orbit on a product model: per-point curve
/// parameters, the midpoints and reconstructed orbit points, and the
/// diagnostics that qualify it.
#[derive(Debug, Clone)]
pub struct OrbitCandidate {
    pub k: usize,
    /// k rows of n curve parameters.
    pub angles: Vec<Vec<f64>>,
    pub midpoints: Vec<DarbouxPoint>,
    pub points: Vec<DarbouxPoint>,
    pub action: f64,
    /// Max normalized tangency defect over points and factors.
    pub residual: f64,
    /// Min distance between consecutive midpoints (no-backtracking margin).
    pub margin: f64,
    pub grad_norm: f64,
    /// Whether the finite-difference projected Hessian is negative
    /// semidefinite at the critical point (a local maximum of the action).
    pub is_max: bool,
}

const GRAD_TOL: f64 = 1e-9;
const BACKTRACK_MARGIN: f64 = 1e-6;
const DEDUPE_ANGLE_TOL: f64 = 1e-5;

fn angles_of(flat: &DVector<f64>, k: usize, n: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..n).map(|m| flat[i * n + m].rem_euclid(std::f64::consts::TAU)).collect())
        .collect()
}

fn product_points(product: &ProductCurveLagrangian, flat: &DVector<f64>, k: usize) -> Vec<DarbouxPoint> {
    let n = product.n();
    (0..k)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|m| flat[i * n + m]).collect();
            product.point(&row).expect("row length matches model")
        })
        .collect()
}

fn product_action(product: &ProductCurveLagrangian, flat: &DVector<f64>, k: usize) -> f64 {
    let pts = product_points(product, flat, k);
    action(&pts).expect("k >= 3 checked on entry")
}

/// Analytic gradient of the action with respect to each curve parameter:
/// entry (i, m) pairs the factor tangent with the alternating sum of the
/// other midpoints.
fn product_action_gradient(
    product: &ProductCurveLagrangian,
    flat: &DVector<f64>,
    k: usize,
) -> DVector<f64> {
    let n = product.n();
    let pts = product_points(product, flat, k);
    DVector::from_fn(k * n, |idx, _| {
        let i = idx / n;
        let m = idx % n;
        let mut c = Vector2::zeros();
        for j in 0..k {
            if j == i {
                continue;
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let qj = Vector2::new(pts[j].x()[m], pts[j].y()[m]);
            if j > i {
                c += sign * qj;
            } else {
                c -= sign * qj;
            }
        }
        let tangent = product.curves()[m].derivative(flat[idx]);
        tangent.x * c.y - tangent.y * c.x
    })
}

/// Alternating-sum reconstruction of orbit points from midpoints (odd k).
pub fn reconstruct_orbit_points(midpoints: &[DarbouxPoint]) -> Result<Vec<DarbouxPoint>> {
    let k = midpoints.len();
    if k < 3 || k % 2 == 0 {
        return Err(Error::BadPeriod(k));
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut z = midpoints[i].scale(0.0);
        for j in 0..k {
            let term = &midpoints[(i + j) % k];
            z = if j % 2 == 0 { z.add(term)? } else { z.sub(term)? };
        }
        out.push(z);
    }
    Ok(out)
}

/// Max normalized tangency defect: per orbit point and factor, the sine of
/// the angle between the step chord and the curve tangent at the midpoint.
fn tangency_residual(
    product: &ProductCurveLagrangian,
    angles: &[Vec<f64>],
    points: &[DarbouxPoint],
) -> f64 {
    let k = points.len();
    let n = product.n();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let next = &points[(i + 1) % k];
        for m in 0..n {
            let d = Vector2::new(
                next.x()[m] - points[i].x()[m],
                next.y()[m] - points[i].y()[m],
            );
            let t = product.curves()[m].derivative(angles[i][m]);
            let scale = d.norm() * t.norm();
            if scale > 1e-300 {
                worst = worst.max((d.x * t.y - d.y * t.x).abs() / scale);
            }
        }
    }
    worst
}

const ORBIT_BFGS_ITERS: usize = 400;
const ORBIT_NEWTON_ITERS: usize = 80;

/// Searches for k-periodic orbits (odd k) on a product model by multistart
/// maximization of the action over the k·n curve parameters, refined by
/// quasi-Newton, plus a Newton polish on the gradient so non-maximal
/// critical points are retained as well. Survivors are deduplicated under
/// the dihedral symmetry of the cyclic index.
pub fn find_periodic_orbits(
    product: &ProductCurveLagrangian,
    k: usize,
    starts: usize,
    seed: u64,
) -> Result<Vec<OrbitCandidate>> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::BadPeriod(k));
    }
    if starts == 0 {
        return Err(Error::invalid("need at least one start"));
    }
    let n = product.n();
    let dim = k * n;
    let f = |v: &DVector<f64>| product_action(product, v, k);
    let grad = |v: &DVector<f64>| product_action_gradient(product, v, k);

    let raw: Vec<DVector<f64>> = (0..starts)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let start = DVector::from_fn(dim, |_, _| {
                rng.random_range(0.0..std::f64::consts::TAU)
            });
            let mut out = Vec::new();
            let ascent = bfgs_max(f, grad, start.clone(), ORBIT_BFGS_ITERS, GRAD_TOL * 0.1);
            if ascent.converged {
                out.push(ascent.x);
            }
            if let Some(root) = newton_root(grad, start, 1e-12, ORBIT_NEWTON_ITERS, 1e-7) {
                out.push(root);
            }
            out
        })
        .collect();

    let mut orbits: Vec<OrbitCandidate> = Vec::new();
    for cand in raw {
        let grad_norm = product_action_gradient(product, &cand, k).norm();
        if grad_norm > GRAD_TOL {
            continue;
        }
        let angles = angles_of(&cand, k, n);
        let midpoints = product_points(product, &cand, k);
        let margin = (0..k)
            .map(|i| {
                midpoints[i]
                    .sub(&midpoints[(i + 1) % k])
                    .expect("equal dims")
                    .flat()
                    .norm()
            })
            .fold(f64::INFINITY, f64::min);
        if margin < BACKTRACK_MARGIN {
            continue;
        }
        let points = reconstruct_orbit_points(&midpoints)?;
        let residual = tangency_residual(product, &angles, &points);
        let flat_angles: Vec<f64> = angles.iter().flatten().copied().collect();
        let dup = orbits.iter().any(|o| {
            let existing: Vec<f64> = o.angles.iter().flatten().copied().collect();
            dihedral_equivalent(&existing, &flat_angles, n, DEDUPE_ANGLE_TOL)
        });
        if dup {
            continue;
        }
        let is_max = hessian_negative_semidefinite(&grad, &cand);
        orbits.push(OrbitCandidate {
            k,
            action: product_action(product, &cand, k),
            angles,
            midpoints,
            points,
            residual,
            margin,
            grad_norm,
            is_max,
        });
    }

    orbits.sort_by(|a, b| {
        b.action.total_cmp(&a.action).then_with(|| {
            a.angles
                .iter()
                .flatten()
                .zip(b.angles.iter().flatten())
                .fold(std::cmp::Ordering::Equal, |ord, (x, y)| ord.then(x.total_cmp(y)))
        })
    });
    Ok(orbits)
}

/// Negative semidefiniteness of the symmetrized finite-difference Hessian,
/// with slack for differencing noise.
fn hessian_negative_semidefinite<G>(grad: &G, at: &DVector<f64>) -> bool
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let Ok(j) = fd_jacobian(grad, at, 1e-5) else {
        return false;
    };
    let sym = (&j + j.transpose()) * 0.5;
    let eigen = sym.symmetric_eigen();
    eigen.eigenvalues.iter().all(|&l| l <= 1e-6)
}

/// Per-check worst defects for one orbit candidate.
#[derive(Debug, Clone, Copy)]
pub struct OrbitVerifyReport {
    /// Max |z_i + z_{i+1} - 2 q_i| entry.
    pub midpoint_defect: f64,
    /// Max normalized chord-tangency defect.
    pub tangency_defect: f64,
    /// Max distance between a planar-stepped projection and the stored
    /// next point, over factors and steps.
    pub stepping_defect: f64,
    pub margin: f64,
    pub backtracking: bool,
    pub max_defect: f64,
    pub pass: bool,
}

/// Independently verifies an orbit candidate: midpoint relation, chord
/// tangency, no backtracking, and per-factor consistency with the planar
/// outer-billiard step.
pub fn orbit_verify(
    product: &ProductCurveLagrangian,
    orbit: &OrbitCandidate,
    tol: f64,
) -> Result<OrbitVerifyReport> {
    let k = orbit.k;
    let n = product.n();
    if orbit.points.len() != k || orbit.midpoints.len() != k || orbit.angles.len() != k {
        return Err(Error::invalid("orbit candidate has inconsistent lengths"));
    }
    for row in &orbit.angles {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
    }

    let mut midpoint_defect: f64 = 0.0;
    for i in 0..k {
        let sum = orbit.points[i].add(&orbit.points[(i + 1) % k])?;
        let defect = sum.sub(&orbit.midpoints[i].scale(2.0))?.norm_inf();
        midpoint_defect = midpoint_defect.max(defect);
    }

    let tangency_defect = tangency_residual(product, &orbit.angles, &orbit.points);

    let margin = (0..k)
        .map(|i| {
            orbit.midpoints[i]
                .sub(&orbit.midpoints[(i + 1) % k])
                .expect("equal dims")
                .flat()
                .norm()
        })
        .fold(f64::INFINITY, f64::min);
    let backtracking = margin < BACKTRACK_MARGIN;

    let mut stepping_defect: f64 = 0.0;
    for m in 0..n {
        let curve = &product.curves()[m];
        for i in 0..k {
            let z = Vector2::new(orbit.points[i].x()[m], orbit.points[i].y()[m]);
            let znext = Vector2::new(
                orbit.points[(i + 1) % k].x()[m],
                orbit.points[(i + 1) % k].y()[m],
            );
            let mut best = f64::INFINITY;
            for branch in [Branch::Forward, Branch::Backward] {
                if let Ok(step) = planar_outer_step(curve, z, branch) {
                    best = best.min((step.b - znext).norm());
                }
            }
            stepping_defect = stepping_defect.max(best);
        }
    }

    let max_defect = midpoint_defect.max(tangency_defect).max(stepping_defect);
    Ok(OrbitVerifyReport {
        midpoint_defect,
        tangency_defect,
        stepping_defect,
        margin,
        backtracking,
        max_defect,
        pass: !backtracking && max_defect <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::PlaneCurve;
    use crate::poly::SparsePolynomial;
    use crate::sweep::SearchBox;
    use approx::assert_abs_diff_eq;

    fn cube() -> LagrangianGraph {
        LagrangianGraph::new(SparsePolynomial::monomial(1, vec![3], 1.0).unwrap())
    }

    fn dp(x: &[f64], y: &[f64]) -> DarbouxPoint {
        DarbouxPoint::from_slices(x, y).unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn step_from_foot_hand_values() {
        let g = cube();
        let fr = TangentFrame::from_slices(&[1.0], &[1.0]).unwrap();
        let pair = step_from_foot(&g, &fr);
        assert_eq!(pair.a, dp(&[2.0], &[9.0]));
        assert_eq!(pair.b, dp(&[0.0], &[-3.0]));
        assert_eq!(pair.foot, dp(&[1.0], &[3.0]));
        // Central symmetry.
        let mid = pair.a.add(&pair.b).unwrap().scale(0.5);
        assert!(mid.sub(&pair.foot).unwrap().norm_inf() <= 1e-12);

        let fixed = step_from_foot(&g, &TangentFrame::from_slices(&[0.4], &[0.0]).unwrap());
        assert_eq!(fixed.a, fixed.b);
        assert_eq!(fixed.a, fixed.foot);
    }

    #[test]
    fn correspondents_of_external_point() {
        let g = cube();
        let a = dp(&[0.0], &[-3.0]);
        let params = CountParams {
            grid: 16,
            ..CountParams::with_box(SearchBox::symmetric(1, 3.0).unwrap())
        };
        let rep = correspondents(&g, &a, &params).unwrap();
        assert_eq!(rep.pairs.len(), 2);
        assert!(rep.flagged_near_critical.is_empty());
        let mut partners: Vec<(f64, f64)> =
            rep.pairs.iter().map(|p| (p.b.x()[0], p.b.y()[0])).collect();
        partners.sort_by(|u, v| u.0.total_cmp(&v.0));
        assert_abs_diff_eq!(partners[0].0, -2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(partners[0].1, 9.0, epsilon = 1e-6);
        assert_abs_diff_eq!(partners[1].0, 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(partners[1].1, 9.0, epsilon = 1e-6);
    }

    #[test]
    fn correspondents_on_l_include_degenerate_partner() {
        let g = cube();
        let q = dv(&[0.5]);
        let a = g.point_on_graph(&q).unwrap();
        let params = CountParams::for_dim(1).unwrap();
        let rep = correspondents(&g, &a, &params).unwrap();
        // Degenerate partner: resolved to sqrt(residual_tol) only.
        let window = 20.0 * params.residual_tol.sqrt();
        let degenerate = rep
            .pairs
            .iter()
            .find(|p| p.b.sub(&p.a).unwrap().norm_inf() < window)
            .expect("degenerate partner b = a");
        assert!(degenerate.frame.t().amax() < window);
        assert!(!rep.flagged_near_critical.is_empty());
    }

    #[test]
    fn linear_iso_hand_values_and_round_trip() {
        let a = dp(&[2.0], &[9.0]);
        let a_bar = dp(&[0.0], &[-3.0]);
        let iso = linear_iso(&a, &a_bar).unwrap();
        assert_eq!(iso.q1, dv(&[1.0]));
        assert_eq!(iso.q2, dv(&[3.0]));
        assert_eq!(iso.p1, dv(&[-6.0]));
        assert_eq!(iso.p2, dv(&[1.0]));

        let (back_a, back_bar) = linear_iso_inverse(&iso).unwrap();
        assert_eq!(back_a, a);
        assert_eq!(back_bar, a_bar);

        // Diagonal pairs straighten to the zero section.
        let iso = linear_iso(&a, &a).unwrap();
        assert_eq!(iso.p1.amax(), 0.0);
        assert_eq!(iso.p2.amax(), 0.0);
        assert_eq!(iso.q1, a.x().clone_owned());
    }

    #[test]
    fn linear_iso_matrix_identity() {
        use crate::symplectic::omega_matrix;
        for n in 1..=4 {
            let m = linear_iso_matrix(n);
            let lhs = m.transpose() * omega_matrix(2 * n) * &m;
            let rhs = omega_difference_matrix(n) * 0.5;
            // Entries are dyadic; the identity holds without rounding.
            assert_eq!((lhs - rhs).amax(), 0.0, "n = {n}");
        }
    }

    #[test]
    fn conormal_check_accepts_construction_and_sees_perturbations() {
        let g = cube();
        let fr = TangentFrame::from_slices(&[1.0], &[1.0]).unwrap();
        let pair = step_from_foot(&g, &fr);
        let rep = conormal_check(&g, &pair.a, &pair.b, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");

        // Off-L everywhere: a = a_bar away from the graph.
        let off = dp(&[0.0], &[5.0]);
        let rep = conormal_check(&g, &off, &off, 1e-9).unwrap();
        assert!(!rep.pass);
        assert!(rep.on_l_defect > 1.0);

        // Half the y-perturbation of a_bar lands in each defect.
        let nudged = dp(&[0.0], &[-2.9]);
        let rep = conormal_check(&g, &pair.a, &nudged, 1e-9).unwrap();
        assert!(!rep.pass);
        assert_abs_diff_eq!(rep.tangency_defect, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.on_l_defect, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn action_hand_value_and_degenerate_cases() {
        let q1 = dp(&[0.0], &[0.0]);
        let q2 = dp(&[1.0], &[0.0]);
        let q3 = dp(&[0.0], &[1.0]);
        assert_eq!(action(&[q1.clone(), q2, q3]).unwrap(), -1.0);

        let same = vec![dp(&[0.3], &[-0.7]); 5];
        assert_eq!(action(&same).unwrap(), 0.0);

        assert!(action(&[q1.clone(), q1]).is_err());
    }

    #[test]
    fn reconstruction_inverts_midpoint_relation() {
        let mids = vec![
            dp(&[1.0, 0.0], &[0.0, 1.0]),
            dp(&[0.5, -0.3], &[0.2, 0.9]),
            dp(&[-0.8, 0.1], &[1.1, -0.4]),
        ];
        let pts = reconstruct_orbit_points(&mids).unwrap();
        for i in 0..3 {
            let sum = pts[i].add(&pts[(i + 1) % 3]).unwrap();
            let defect = sum.sub(&mids[i].scale(2.0)).unwrap().norm_inf();
            assert!(defect <= 1e-12);
        }
        assert!(reconstruct_orbit_points(&mids[..2]).is_err());
    }

    #[test]
    fn orbit_search_on_circle_pair_smoke() {
        let c1 = PlaneCurve::circle(1.0).unwrap();
        let prod = ProductCurveLagrangian::new(vec![c1]).unwrap();
        let orbits = find_periodic_orbits(&prod, 3, 40, 5).unwrap();
        assert!(!orbits.is_empty());
        let top = &orbits[0];
        let rep = orbit_verify(&prod, top, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(top.is_max);

        assert!(matches!(
            find_periodic_orbits(&prod, 4, 10, 0),
            Err(Error::BadPeriod(4))
        ));
    }

    #[test]
    fn orbit_verify_flags_defects() {
        let c1 = PlaneCurve::circle(1.0).unwrap();
        let prod = ProductCurveLagrangian::new(vec![c1]).unwrap();
        let orbits = find_periodic_orbits(&prod, 3, 40, 5).unwrap();
        let mut orbit = orbits[0].clone();

        // Perturb one orbit point: the midpoint defect responds linearly.
        let z0 = orbit.points[0].clone();
        orbit.points[0] = z0
            .add(&dp(&[1e-3], &[0.0]))
            .unwrap();
        let rep = orbit_verify(&prod, &orbit, 1e-6).unwrap();
        assert!(!rep.pass);
        assert_abs_diff_eq!(rep.midpoint_defect, 1e-3, epsilon = 1e-9);

        // Hand-built backtracking candidate: repeated midpoint.
        let theta = [0.0, 0.0, 2.0];
        let mids: Vec<DarbouxPoint> = theta
            .iter()
            .map(|&t| prod.point(&[t]).unwrap())
            .collect();
        let pts = reconstruct_orbit_points(&mids).unwrap();
        let fake = OrbitCandidate {
            k: 3,
            angles: theta.iter().map(|&t| vec![t]).collect(),
            midpoints: mids,
            points: pts,
            action: 0.0,
            residual: 0.0,
            margin: 0.0,
            grad_norm: 0.0,
            is_max: false,
        };
        let rep = orbit_verify(&prod, &fake, 1e-6).unwrap();
        assert!(rep.backtracking);
        assert!(!rep.pass);
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        let e1 = PlaneCurve::ellipse(1.0, 0.6, Vector2::zeros()).unwrap();
        let e2 = PlaneCurve::ellipse(1.3, 0.8, Vector2::zeros()).unwrap();
        let prod = ProductCurveLagrangian::new(vec![e1, e2]).unwrap();
        let k = 3;
        let flat = dv(&[0.3, 1.1, 2.0, 2.9, 4.1, 5.3]);
        let g = product_action_gradient(&prod, &flat, k);
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut p = flat.clone();
            p[i] += h;
            let mut m = flat.clone();
            m[i] -= h;
            let fd =
                (product_action(&prod, &p, k) - product_action(&prod, &m, k)) / (2.0 * h);
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-6);
        }
    }
}
