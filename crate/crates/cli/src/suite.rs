//! The battery behind `verify-suite`: one named check per documented
//! library invariant, each with an independent oracle where one exists.
//! Every check draws from its own seeded generator, so the battery is
//! deterministic for a fixed seed and immune to reordering.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lagsweep::symplectic::{fd_jacobian, is_symplectic};
use lagsweep::{
    action, conormal_check, count_tangent_spaces, find_periodic_orbits, linear_iso,
    linear_iso_inverse, linear_iso_matrix, mamikon_area_check, newton_number,
    omega, omega_difference_matrix, omega_matrix, orbit_verify, pair_through_foot,
    reconstruct_orbit_points, step_from_foot, tractrix_area, Branch, CountParams, DarbouxPoint,
    LagrangianGraph, PlaneCurve, ProductCurveLagrangian, SearchBox, SparsePolynomial,
    SweepRegion, TangentFrame,
};

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> anyhow::Result<(bool, String)>;

/// Runs every check in a fixed order. Unexpected errors inside a check
/// fail that line instead of aborting the battery.
pub fn run(seed: u64) -> Vec<CheckResult> {
    let checks: &[(&'static str, Check)] = &[
        ("poly-partial-fd", poly_partial_fd),
        ("poly-euler-degree3", poly_euler_degree3),
        ("poly-hessian-partials-commute", poly_hessian_partials_commute),
        ("omega-antisym-bilinear", omega_antisym_bilinear),
        ("omega-matrix-squares", omega_matrix_squares),
        ("fd-jacobian-quadratic", fd_jacobian_quadratic),
        ("system-matrix-symmetric", system_matrix_symmetric),
        ("system-matrix-linear", system_matrix_linear),
        ("tangent-affine", tangent_affine),
        ("sweep-jacobian-det", sweep_jacobian_det),
        ("pullback-pairing-random-directions", pullback_pairing),
        ("roots-reproduce-test-point", roots_reproduce_test_point),
        ("newton-number-closed-form", newton_number_closed_form),
        ("multiplicity-bound", multiplicity_bound),
        ("count-locally-constant", count_locally_constant),
        ("step-pair-construction", step_pair_construction),
        ("correspondence-branch-symplectic", correspondence_branch_symplectic),
        ("conormal-accepts-pairs", conormal_accepts_pairs),
        ("linear-iso-exact", linear_iso_exact),
        ("action-shift-reversal", action_shift_reversal),
        ("action-gradient-fd", action_gradient_fd),
        ("orbit-reconstruction-identity", orbit_reconstruction_identity),
        ("planar-step-involution", planar_step_involution),
        ("planar-step-area", planar_step_area),
        ("product-orbit-projections", product_orbit_projections),
        ("tractrix-pi-over-2", tractrix_pi_over_2),
        ("mamikon-sweep-cluster", mamikon_sweep_cluster),
        ("sci-notation-roundtrip", sci_notation_roundtrip),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED_0000 + i as u64));
            let (pass, detail) = match check(&mut rng) {
                Ok(outcome) => outcome,
                Err(e) => (false, format!("errored: {e}")),
            };
            CheckResult { name, pass, detail }
        })
        .collect()
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..=r)).collect()
}

/// A handful of monomials of total degree at most `maxdeg`, none constant.
fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, maxdeg: u32) -> anyhow::Result<SparsePolynomial> {
    let nterms = rng.random_range(3..6);
    let mut terms = Vec::with_capacity(nterms);
    for _ in 0..nterms {
        let mut exps = vec![0u32; nvars];
        let total = rng.random_range(1..=maxdeg);
        let mut left = total;
        for (i, e) in exps.iter_mut().enumerate() {
            let take = if i + 1 == nvars {
                left
            } else {
                rng.random_range(0..=left)
            };
            *e = take;
            left -= take;
        }
        terms.push((exps, rng.random_range(-2.0..=2.0)));
    }
    Ok(SparsePolynomial::new(nvars, terms)?)
}

fn exponent_tuples(nvars: usize, total: u32) -> Vec<Vec<u32>> {
    if nvars == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for head in 0..=total {
        for mut tail in exponent_tuples(nvars - 1, total - head) {
            let mut e = vec![head];
            e.append(&mut tail);
            out.push(e);
        }
    }
    out
}

fn random_homogeneous_cubic(
    rng: &mut ChaCha8Rng,
    nvars: usize,
) -> anyhow::Result<SparsePolynomial> {
    let terms: Vec<(Vec<u32>, f64)> = exponent_tuples(nvars, 3)
        .into_iter()
        .map(|e| (e, rng.random_range(-1.5..=1.5)))
        .collect();
    Ok(SparsePolynomial::new(nvars, terms)?)
}

/// Homogeneous cubic with coefficients bounded away from zero, plus small
/// quartic noise; nonzero third derivatives everywhere that matters.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> anyhow::Result<LagrangianGraph> {
    let mut terms: Vec<(Vec<u32>, f64)> = exponent_tuples(n, 3)
        .into_iter()
        .map(|e| {
            let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            (e, sign * rng.random_range(0.3..1.5))
        })
        .collect();
    for e in exponent_tuples(n, 4) {
        terms.push((e, 0.05 * rng.random_range(-1.0..=1.0)));
    }
    Ok(LagrangianGraph::new(SparsePolynomial::new(n, terms)?))
}

fn random_frame(rng: &mut ChaCha8Rng, n: usize, r: f64) -> TangentFrame {
    TangentFrame::new(
        DVector::from_fn(n, |_, _| rng.random_range(-r..=r)),
        DVector::from_fn(n, |_, _| rng.random_range(-r..=r)),
    )
    .expect("sampled entries are finite")
}

fn random_darboux(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DarbouxPoint {
    DarbouxPoint::from_slices(&random_point(rng, n, r), &random_point(rng, n, r))
        .expect("equal halves")
}

fn poly_partial_fd(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let nvars = rng.random_range(1..=3);
        let p = random_poly(rng, nvars, 4)?;
        let q = random_point(rng, nvars, 1.0);
        for i in 0..nvars {
            let mut qp = q.clone();
            qp[i] += h;
            let mut qm = q.clone();
            qm[i] -= h;
            let fd = (p.eval(&qp)? - p.eval(&qm)?) / (2.0 * h);
            let an = p.partial(i)?.eval(&q)?;
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1.0));
        }
    }
    Ok((worst <= 1e-6, format!("20 polynomials, max relative defect {worst:.3e}")))
}

fn poly_euler_degree3(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let nvars = rng.random_range(1..=3);
        let g = random_homogeneous_cubic(rng, nvars)?;
        let q = random_point(rng, nvars, 1.5);
        let mut dot = 0.0;
        for i in 0..nvars {
            dot += q[i] * g.partial(i)?.eval(&q)?;
        }
        let rhs = 3.0 * g.eval(&q)?;
        worst = worst.max((dot - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok((worst <= 1e-12, format!("q.grad G = 3G, max relative defect {worst:.3e}")))
}

fn poly_hessian_partials_commute(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    for _ in 0..10 {
        let nvars = rng.random_range(1..=3);
        let p = random_poly(rng, nvars, 5)?;
        let hess = p.hessian();
        for i in 0..nvars {
            for j in 0..nvars {
                if hess[i][j] != p.partial(i)?.partial(j)? {
                    return Ok((false, format!("entry ({i},{j}) differs structurally")));
                }
            }
        }
    }
    Ok((true, "10 polynomials, all second partials equal term-for-term".into()))
}

fn omega_antisym_bilinear(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let a = random_darboux(rng, n, 2.0);
        let b = random_darboux(rng, n, 2.0);
        let c = random_darboux(rng, n, 2.0);
        let s = rng.random_range(-2.0..=2.0);
        let t = rng.random_range(-2.0..=2.0);
        let anti = (omega(&a, &b)? + omega(&b, &a)?).abs();
        let combo = a.scale(s).add(&c.scale(t))?;
        let lin =
            (omega(&combo, &b)? - s * omega(&a, &b)? - t * omega(&c, &b)?).abs();
        let scale = omega(&a, &b)?.abs().max(omega(&c, &b)?.abs()).max(1.0);
        worst = worst.max(anti / scale).max(lin / scale);
    }
    Ok((worst <= 1e-12, format!("antisymmetry and bilinearity defect {worst:.3e}")))
}

fn omega_matrix_squares(_rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    for n in 1..=4 {
        let om = omega_matrix(n);
        let defect = (&om * &om + DMatrix::<f64>::identity(2 * n, 2 * n)).amax();
        if defect != 0.0 {
            return Ok((false, format!("omega^2 + I nonzero at n = {n}")));
        }
    }
    Ok((true, "omega^2 = -identity exactly for n = 1..4".into()))
}

fn fd_jacobian_quadratic(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let f = |v: &DVector<f64>| {
            dv(&[
                c[0] * v[0] * v[0] + c[1] * v[1] + c[2] * v[0] * v[2],
                c[3] * v[1] * v[1] + c[4] * v[2],
                c[5] * v[2] * v[2] + c[6] * v[0] * v[1] + c[7] * v[0] + c[8],
            ])
        };
        let x = dv(&random_point(rng, 3, 1.0));
        let analytic = DMatrix::from_row_slice(
            3,
            3,
            &[
                2.0 * c[0] * x[0] + c[2] * x[2],
                c[1],
                c[2] * x[0],
                0.0,
                2.0 * c[3] * x[1],
                c[4],
                c[6] * x[1] + c[7],
                c[6] * x[0],
                2.0 * c[5] * x[2],
            ],
        );
        let j = fd_jacobian(f, &x, 1e-5)?;
        worst = worst.max((j - analytic).amax());
    }
    Ok((worst <= 1e-8, format!("quadratic map, max Jacobian entry defect {worst:.3e}")))
}

fn system_matrix_symmetric(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        let frame = random_frame(rng, n, 1.5);
        let a = graph.matrix_a(&frame);
        if (&a - a.transpose()).amax() != 0.0 {
            return Ok((false, "asymmetric system matrix".into()));
        }
    }
    Ok((true, "10 frames, transpose equality is exact".into()))
}

fn system_matrix_linear(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        let q = dv(&random_point(rng, n, 1.2));
        let t = dv(&random_point(rng, n, 1.2));
        let s = dv(&random_point(rng, n, 1.2));
        let alpha = rng.random_range(-2.0..=2.0);
        let beta = rng.random_range(-2.0..=2.0);
        let combo = TangentFrame::new(q.clone(), &t * alpha + &s * beta)?;
        let lhs = graph.matrix_a(&combo);
        let rhs = graph.matrix_a(&TangentFrame::new(q.clone(), t)?) * alpha
            + graph.matrix_a(&TangentFrame::new(q, s)?) * beta;
        let scale = lhs.amax().max(rhs.amax()).max(1.0);
        worst = worst.max((lhs - rhs).amax() / scale);
    }
    Ok((worst <= 1e-11, format!("A(q, .) linearity defect {worst:.3e}")))
}

fn tangent_affine(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        let q = dv(&random_point(rng, n, 1.2));
        let t = dv(&random_point(rng, n, 1.2));
        let d = dv(&random_point(rng, n, 1.0));
        let at = |tt: DVector<f64>| {
            graph
                .tangent_point(&TangentFrame::new(q.clone(), tt).expect("finite"))
                .flat()
        };
        let second = at(t.clone()) + at(&t + &d * 2.0) - at(&t + &d) * 2.0;
        worst = worst.max(second.amax());
    }
    Ok((worst <= 1e-10, format!("second differences in t, max entry {worst:.3e}")))
}

fn sweep_jacobian_det(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        for _ in 0..40 {
            let frame = random_frame(rng, n, 1.2);
            let det_a = graph.det_a(&frame);
            if det_a.abs() < 1e-3 {
                continue;
            }
            let map = |v: &DVector<f64>| {
                let fr = TangentFrame::from_flat(v).expect("probe stays finite");
                graph.tangent_point(&fr).flat()
            };
            let j = fd_jacobian(map, &frame.flat(), 1e-5)?;
            let det_j = j.determinant();
            worst = worst.max((det_j.abs() - det_a.abs()).abs() / det_a.abs());
            checked += 1;
            break;
        }
    }
    Ok((
        worst <= 1e-5 && checked == 10,
        format!("{checked} frames, |det J| vs |det A| relative defect {worst:.3e}"),
    ))
}

fn pullback_pairing(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..5 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        for _ in 0..40 {
            let frame = random_frame(rng, n, 1.2);
            if graph.in_critical_set(&frame, 1e-3) {
                continue;
            }
            let source = |v: &DVector<f64>| {
                let fr = TangentFrame::from_flat(v).expect("probe stays finite");
                graph.tangent_point(&fr).flat()
            };
            let target = |v: &DVector<f64>| {
                let fr = TangentFrame::from_flat(v).expect("probe stays finite");
                let y = graph.hess_at(fr.q()) * fr.t();
                DarbouxPoint::new(fr.t().clone(), y).expect("equal halves").flat()
            };
            let flat = frame.flat();
            let j_phi = fd_jacobian(source, &flat, 1e-4)?;
            let j_psi = fd_jacobian(target, &flat, 1e-4)?;
            let om = omega_matrix(n);
            for _ in 0..5 {
                let u = dv(&random_point(rng, 2 * n, 1.0)).normalize();
                let v = dv(&random_point(rng, 2 * n, 1.0)).normalize();
                let lhs = (&j_phi * &u).transpose() * &om * (&j_phi * &v);
                let rhs = (&j_psi * &u).transpose() * &om * (&j_psi * &v);
                worst = worst.max((lhs[(0, 0)] - rhs[(0, 0)]).abs());
            }
            checked += 1;
            break;
        }
    }
    Ok((
        worst <= 1e-6 && checked == 5,
        format!("{checked} frames x 5 direction pairs, pairing defect {worst:.3e}"),
    ))
}

/// Worked counting examples with known root sets; every returned root must
/// reproduce the test point through its tangent space.
fn counting_examples() -> anyhow::Result<Vec<(LagrangianGraph, DarbouxPoint, SearchBox, usize)>> {
    Ok(vec![
        (
            LagrangianGraph::new(SparsePolynomial::monomial(1, vec![3], 1.0)?),
            DarbouxPoint::from_slices(&[0.0], &[-3.0])?,
            SearchBox::symmetric(1, 3.0)?,
            2,
        ),
        (
            LagrangianGraph::new(SparsePolynomial::new(
                2,
                vec![(vec![3, 0], 1.0), (vec![0, 3], 1.0)],
            )?),
            DarbouxPoint::from_slices(&[0.0, 0.0], &[-3.0, -3.0])?,
            SearchBox::symmetric(2, 3.0)?,
            4,
        ),
        (
            LagrangianGraph::new(SparsePolynomial::new(
                2,
                vec![(vec![2, 1], 1.0), (vec![1, 2], 1.0)],
            )?),
            DarbouxPoint::from_slices(&[1.0, 1.0], &[0.0, 0.0])?,
            SearchBox::symmetric(2, 3.0)?,
            2,
        ),
    ])
}

fn roots_reproduce_test_point(_rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (graph, test, search_box, expected) in counting_examples()? {
        let params = CountParams {
            grid: 12,
            ..CountParams::with_box(search_box)
        };
        let rep = count_tangent_spaces(&graph, &test, &params)?;
        if rep.count != expected {
            return Ok((false, format!("count {} where {expected} expected", rep.count)));
        }
        for root in &rep.roots {
            let frame = TangentFrame::new(root.q.clone(), test.x() - &root.q)?;
            let through = graph.tangent_point(&frame);
            worst = worst.max(through.sub(&test)?.norm_inf());
        }
    }
    let bound = 10.0 * CountParams::for_dim(1)?.residual_tol;
    Ok((
        worst <= bound,
        format!("3 examples, worst reproduction defect {worst:.3e}"),
    ))
}

fn newton_number_closed_form(_rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut tuples = 0u64;
    for n in 1..=6usize {
        let mut d = vec![1u32; n];
        'tuples: loop {
            let expected: u64 = d.iter().map(|&x| u64::from(x - 1)).product();
            let got = newton_number(&d)?;
            if got != expected {
                return Ok((false, format!("{d:?} gave {got}, product formula says {expected}")));
            }
            tuples += 1;
            let mut i = 0;
            loop {
                if i == n {
                    break 'tuples;
                }
                d[i] += 1;
                if d[i] <= 6 {
                    break;
                }
                d[i] = 1;
                i += 1;
            }
        }
    }
    Ok((true, format!("{tuples} intercept tuples match the product formula")))
}

/// Diagonal cubic with small quartic noise; the local tangency count near
/// the origin stays within the generic bound, and the clean diagonal
/// example attains it.
fn multiplicity_bound(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst_excess = 0i64;
    for trial in 0..12 {
        let n = 1 + trial % 2;
        let mut terms: Vec<(Vec<u32>, f64)> = Vec::new();
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = 3;
            let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            terms.push((e, sign * rng.random_range(0.5..1.5)));
        }
        for e in exponent_tuples(n, 4) {
            terms.push((e, 0.05 * rng.random_range(-1.0..=1.0)));
        }
        let graph = LagrangianGraph::new(SparsePolynomial::new(n, terms)?);
        let params = CountParams::with_box(SearchBox::symmetric(n, 0.5)?);
        let bound = 1usize << n;
        for _ in 0..6 {
            let test = random_darboux(rng, n, 0.05);
            let rep = count_tangent_spaces(&graph, &test, &params)?;
            worst_excess = worst_excess.max(rep.count as i64 - bound as i64);
            if rep.count > bound {
                return Ok((false, format!("count {} exceeds bound {bound}", rep.count)));
            }
        }
    }
    let diag = LagrangianGraph::new(SparsePolynomial::new(
        2,
        vec![(vec![3, 0], 1.0), (vec![0, 3], 1.0)],
    )?);
    let sharp = count_tangent_spaces(
        &diag,
        &DarbouxPoint::from_slices(&[0.0, 0.0], &[-3.0, -3.0])?,
        &CountParams {
            grid: 12,
            ..CountParams::with_box(SearchBox::symmetric(2, 2.0)?)
        },
    )?;
    Ok((
        sharp.count == 4,
        format!("72 germ counts within 2^n, sharpness count {}", sharp.count),
    ))
}

fn count_locally_constant(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    for (graph, test, search_box, expected) in counting_examples()? {
        let params = CountParams {
            grid: 12,
            ..CountParams::with_box(search_box)
        };
        for trial in 0..4 {
            let moved = if trial == 0 {
                test.clone()
            } else {
                test.add(&random_darboux(rng, test.dim(), 1e-4))?
            };
            let rep = count_tangent_spaces(&graph, &moved, &params)?;
            if rep.count != expected {
                return Ok((
                    false,
                    format!("count moved from {expected} to {} under 1e-4 nudge", rep.count),
                ));
            }
        }
    }
    Ok((true, "3 examples x 3 nudges of 1e-4, counts unchanged".into()))
}

fn step_pair_construction(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        let frame = random_frame(rng, n, 1.2);
        let pair = step_from_foot(&graph, &frame);
        let scale = 1.0 + pair.a.norm_inf().max(pair.b.norm_inf());
        let midpoint = pair.a.add(&pair.b)?.scale(0.5).sub(&pair.foot)?.norm_inf();
        let spoke = DarbouxPoint::new(
            frame.t().clone(),
            graph.hess_at(frame.q()) * frame.t(),
        )?;
        let offset = pair.a.sub(&pair.foot)?.sub(&spoke)?.norm_inf();
        worst = worst.max(midpoint / scale).max(offset / scale);
    }
    Ok((worst <= 1e-12, format!("20 pairs, construction defect {worst:.3e}")))
}

/// Tracks one solution branch through a tiny box and differentiates it.
fn branch_defect(
    graph: &LagrangianGraph,
    a0: &DarbouxPoint,
    q0: &DVector<f64>,
) -> anyhow::Result<f64> {
    let radius = 0.05 * (1.0 + q0.norm());
    let params = CountParams {
        residual_tol: 1e-13,
        max_iter: 80,
        ..CountParams::with_box(SearchBox::new(
            q0.map(|v| v - radius),
            q0.map(|v| v + radius),
        )?)
    };
    let step = |flat: &DVector<f64>| {
        let a = DarbouxPoint::from_flat(flat).expect("probe stays finite");
        let report = count_tangent_spaces(graph, &a, &params).expect("dimensions fixed");
        let root = report
            .roots
            .iter()
            .min_by(|r, s| (&r.q - q0).norm().total_cmp(&(&s.q - q0).norm()))
            .expect("branch root stays in the local box");
        pair_through_foot(graph, &a, &root.q)
            .expect("root is a valid foot")
            .b
            .flat()
    };
    let j = fd_jacobian(step, &a0.flat(), 1e-4)?;
    Ok(is_symplectic(&j, 1e-5)?.defect)
}

fn correspondence_branch_symplectic(_rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let cube = LagrangianGraph::new(SparsePolynomial::monomial(1, vec![3], 1.0)?);
    let d1 = branch_defect(
        &cube,
        &DarbouxPoint::from_slices(&[0.0], &[-3.0])?,
        &dv(&[1.0]),
    )?;
    let mixed = LagrangianGraph::new(SparsePolynomial::new(
        2,
        vec![(vec![2, 1], 1.0), (vec![1, 2], 1.0)],
    )?);
    let d2 = branch_defect(
        &mixed,
        &DarbouxPoint::from_slices(&[1.0, 1.0], &[0.0, 0.0])?,
        &dv(&[2.0, 2.0]),
    )?;
    let worst = d1.max(d2);
    Ok((worst <= 1e-5, format!("two branches, symplectic defect {worst:.3e}")))
}

fn conormal_accepts_pairs(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.random_range(1..=3);
        let graph = random_graph(rng, n)?;
        let pair = step_from_foot(&graph, &random_frame(rng, n, 1.2));
        let rep = conormal_check(&graph, &pair.a, &pair.b, 1e-9)?;
        if !rep.pass {
            return Ok((
                false,
                format!(
                    "constructed pair rejected: on-L {:.3e}, tangency {:.3e}",
                    rep.on_l_defect, rep.tangency_defect
                ),
            ));
        }
        worst = worst.max(rep.on_l_defect).max(rep.tangency_defect);

        let nudged = pair.b.add(&random_darboux(rng, n, 1e-3))?;
        let rep = conormal_check(&graph, &pair.a, &nudged, 1e-9)?;
        if rep.pass {
            return Ok((false, "perturbed pair accepted".into()));
        }
    }
    Ok((worst <= 1e-9, format!("25 pairs pass, 25 perturbed fail; worst defect {worst:.3e}")))
}

fn linear_iso_exact(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    for n in 1..=4 {
        let m = linear_iso_matrix(n);
        let lhs = m.transpose() * omega_matrix(2 * n) * &m;
        let rhs = omega_difference_matrix(n) * 0.5;
        if (lhs - rhs).amax() != 0.0 {
            return Ok((false, format!("matrix identity fails at n = {n}")));
        }
    }
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let dyadic = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| f64::from(rng.random_range(-64..=64)) / 64.0).collect()
        };
        let a = DarbouxPoint::from_slices(&dyadic(rng), &dyadic(rng))?;
        let a_bar = DarbouxPoint::from_slices(&dyadic(rng), &dyadic(rng))?;
        let (back_a, back_bar) = linear_iso_inverse(&linear_iso(&a, &a_bar)?)?;
        if back_a != a || back_bar != a_bar {
            return Ok((false, "round trip moved a dyadic pair".into()));
        }
    }
    Ok((true, "identity exact for n = 1..4; 20 dyadic round trips bitwise".into()))
}

fn action_shift_reversal(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &k in &[3usize, 5, 7, 9] {
        for _ in 0..5 {
            let n = rng.random_range(1..=2);
            let pts: Vec<DarbouxPoint> = (0..k).map(|_| random_darboux(rng, n, 2.0)).collect();
            let base = action(&pts)?;
            let scale = base.abs().max(1.0);
            let mut shifted = pts.clone();
            shifted.rotate_left(1);
            worst = worst.max((action(&shifted)? - base).abs() / scale);
            let mut reversed = pts.clone();
            reversed.reverse();
            worst = worst.max((action(&reversed)? + base).abs() / scale);
        }
    }
    Ok((worst <= 1e-12, format!("odd k up to 9, invariance defect {worst:.3e}")))
}

fn action_gradient_fd(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let product = ProductCurveLagrangian::new(vec![
        PlaneCurve::ellipse(1.0, 0.6, Vector2::zeros())?,
        PlaneCurve::ellipse(1.3, 0.8, Vector2::zeros())?,
    ])?;
    let n = product.n();
    let k = 3;
    let points_of = |flat: &DVector<f64>| -> anyhow::Result<Vec<DarbouxPoint>> {
        (0..k)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|m| flat[i * n + m]).collect();
                Ok(product.point(&row)?)
            })
            .collect()
    };
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let flat = DVector::from_fn(k * n, |_, _| rng.random_range(0.0..TAU));
        let pts = points_of(&flat)?;
        // Independent oracle: differentiate the alternating pairing by hand,
        // factor by factor.
        let analytic = DVector::<f64>::from_fn(k * n, |idx, _| {
            let i = idx / n;
            let m = idx % n;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for j in 0..k {
                if j == i {
                    continue;
                }
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let s = if j > i { sign } else { -sign };
                cx += s * pts[j].x()[m];
                cy += s * pts[j].y()[m];
            }
            let t = product.curves()[m].derivative(flat[idx]);
            t.x * cy - t.y * cx
        });
        let h = 1e-6;
        for idx in 0..k * n {
            let mut p = flat.clone();
            p[idx] += h;
            let mut q = flat.clone();
            q[idx] -= h;
            let fd = (action(&points_of(&p)?)? - action(&points_of(&q)?)?) / (2.0 * h);
            worst = worst.max((analytic[idx] - fd).abs());
        }
    }
    Ok((worst <= 1e-6, format!("3 angle tuples, gradient defect {worst:.3e}")))
}

fn orbit_reconstruction_identity(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &k in &[3usize, 5, 7] {
        for _ in 0..5 {
            let n = rng.random_range(1..=2);
            let mids: Vec<DarbouxPoint> = (0..k).map(|_| random_darboux(rng, n, 2.0)).collect();
            let z = reconstruct_orbit_points(&mids)?;
            for i in 0..k {
                let defect = z[i]
                    .add(&z[(i + 1) % k])?
                    .sub(&mids[i].scale(2.0))?
                    .norm_inf();
                worst = worst.max(defect / (1.0 + mids[i].norm_inf()));
            }
        }
    }
    Ok((worst <= 1e-12, format!("midpoint relation defect {worst:.3e}")))
}

fn planar_step_involution(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let curve = PlaneCurve::ellipse(
            rng.random_range(0.6..1.8),
            rng.random_range(0.6..1.8),
            Vector2::zeros(),
        )?;
        let a = curve.point(rng.random_range(0.0..TAU)) * rng.random_range(1.2..2.5);
        let fwd = lagsweep::planar_outer_step(&curve, a, Branch::Forward)?;
        let back = lagsweep::planar_outer_step(&curve, fwd.b, Branch::Backward)?;
        worst = worst.max((back.b - a).norm());
    }
    Ok((worst <= 1e-8, format!("10 points, forward-backward defect {worst:.3e}")))
}

fn planar_step_area(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let curve = PlaneCurve::ellipse(
            rng.random_range(0.6..1.8),
            rng.random_range(0.6..1.8),
            Vector2::zeros(),
        )?;
        let start = curve.point(rng.random_range(0.0..TAU)) * rng.random_range(1.2..2.5);
        let map = |v: &DVector<f64>| {
            let out = lagsweep::planar_outer_step(&curve, Vector2::new(v[0], v[1]), Branch::Forward)
                .expect("probe stays exterior")
                .b;
            dv(&[out.x, out.y])
        };
        let j = fd_jacobian(map, &dv(&[start.x, start.y]), 1e-5)?;
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        worst = worst.max((det - 1.0).abs());
    }
    Ok((worst <= 1e-5, format!("10 points, |det J - 1| at most {worst:.3e}")))
}

fn product_orbit_projections(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let product = ProductCurveLagrangian::new(vec![
        PlaneCurve::ellipse(1.0, 0.6, Vector2::zeros())?,
        PlaneCurve::ellipse(1.3, 0.8, Vector2::zeros())?,
    ])?;
    let seed = rng.random_range(0..u64::MAX / 2);
    let orbits = find_periodic_orbits(&product, 3, 80, seed)?;
    let Some(best) = orbits.first() else {
        return Ok((false, "no period-3 orbit found in 80 starts".into()));
    };
    let ver = orbit_verify(&product, best, 1e-6)?;
    let pass = ver.pass && ver.stepping_defect <= 1e-6 && ver.midpoint_defect <= 1e-12;
    Ok((
        pass,
        format!(
            "{} orbits; best: stepping defect {:.3e}, midpoint defect {:.3e}",
            orbits.len(),
            ver.stepping_defect,
            ver.midpoint_defect
        ),
    ))
}

fn tractrix_pi_over_2(_rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let area = tractrix_area(1e-3)?;
    let defect = (area - FRAC_PI_2).abs();
    Ok((defect <= 1e-4, format!("area {area:.10}, off pi/2 by {defect:.3e}")))
}

fn mamikon_sweep_cluster(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let curve = PlaneCurve::circle(1.0)?;
    let region = SweepRegion::full(1.0);
    let seed = rng.random_range(0..u64::MAX / 2);
    let (sweep, cluster) = mamikon_area_check(&curve, &region, 1_000_000, seed)?;
    let gap = (sweep - cluster).abs() / sweep.abs().max(cluster.abs()).max(f64::MIN_POSITIVE);
    Ok((
        gap <= 1e-2,
        format!("sweep {sweep:.6}, cluster {cluster:.6}, relative gap {gap:.3e}"),
    ))
}

fn sci_notation_roundtrip(rng: &mut ChaCha8Rng) -> anyhow::Result<(bool, String)> {
    let mut values = vec![
        std::f64::consts::PI,
        1.0 / 3.0,
        0.1,
        f64::EPSILON,
        1e300,
        -3.5e-17,
        f64::MIN_POSITIVE,
    ];
    for _ in 0..50 {
        let mantissa: f64 = rng.random_range(-1.0..=1.0);
        let exp = rng.random_range(-30..=30);
        values.push(mantissa * 10f64.powi(exp));
    }
    for &v in &values {
        let text = crate::output::to_json(&v)?;
        let back: f64 = serde_json::from_str(&text)?;
        if back.to_bits() != v.to_bits() {
            return Ok((false, format!("{v:?} reread as {back:?}")));
        }
    }
    Ok((true, format!("{} floats survive print-and-parse bitwise", values.len())))
}
