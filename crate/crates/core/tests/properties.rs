//! Randomized cross-checks of the structural identities tying the modules
//! together: analytic derivatives against finite differences, dual routes
//! to the same quantity, symplectic pullbacks, determinant bridges, and
//! invariances of the variational action.

use lagsweep::{
    action, conormal_check, count_tangent_spaces, fd_jacobian, is_symplectic, newton_number,
    omega, omega_matrix, pair_through_foot, planar_outer_step, reconstruct_orbit_points,
    step_from_foot, verify_symplectomorphism, Branch, CountParams, DarbouxPoint, Error,
    LagrangianGraph, PlaneCurve, SearchBox, SparsePolynomial, TangentFrame,
};
use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

fn exponent_rows(nvars: usize, total: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=total, nvars)
        .prop_filter("bounded total degree", move |e| e.iter().sum::<u32>() <= total)
}

fn sparse_poly(nvars: usize, maxdeg: u32) -> impl Strategy<Value = SparsePolynomial> {
    prop::collection::vec((exponent_rows(nvars, maxdeg), -2.0..2.0f64), 1..6)
        .prop_map(move |terms| SparsePolynomial::new(nvars, terms).expect("valid exponents"))
}

fn homogeneous_cubic(nvars: usize) -> impl Strategy<Value = SparsePolynomial> {
    prop::collection::vec((exponent_rows(nvars, 3), -2.0..2.0f64), 1..6)
        .prop_map(move |mut terms| {
            for (e, _) in &mut terms {
                let total: u32 = e.iter().sum();
                // Top up the first variable so every term has degree 3.
                e[0] += 3 - total;
            }
            SparsePolynomial::new(nvars, terms).expect("valid exponents")
        })
}

fn point(nvars: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, nvars)
}

proptest! {
    #[test]
    fn partials_match_centered_differences(
        (f, q) in (1usize..=3).prop_flat_map(|n| (sparse_poly(n, 4), point(n, 1.5)))
    ) {
        let h = 5e-5;
        for i in 0..q.len() {
            let mut plus = q.clone();
            plus[i] += h;
            let mut minus = q.clone();
            minus[i] -= h;
            let fd = (f.eval(&plus).unwrap() - f.eval(&minus).unwrap()) / (2.0 * h);
            let an = f.partial(i).unwrap().eval(&q).unwrap();
            prop_assert!(
                (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                "var {i}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn homogeneous_cubics_satisfy_the_degree_identity(
        (f, q) in (1usize..=3).prop_flat_map(|n| (homogeneous_cubic(n), point(n, 2.0)))
    ) {
        // q . grad f = 3 f for degree-3 homogeneous f.
        let mut lhs = 0.0;
        for i in 0..q.len() {
            lhs += q[i] * f.partial(i).unwrap().eval(&q).unwrap();
        }
        let rhs = 3.0 * f.eval(&q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.abs().max(1.0));
    }

    #[test]
    fn tangency_residual_is_the_gradient_of_the_critical_function(
        (f, x, q) in (1usize..=3)
            .prop_flat_map(|n| (sparse_poly(n, 4), point(n, 1.5), point(n, 1.5)))
    ) {
        let graph = LagrangianGraph::new(f);
        let xv = dv(&x);
        let qv = dv(&q);
        let phi = lagsweep::critical_function(&graph, &xv).unwrap();
        let direct = graph.hess_at(&qv) * (&xv - &qv) + graph.grad_at(&qv);
        for i in 0..q.len() {
            let via_phi = phi.partial(i).unwrap().eval(&q).unwrap();
            prop_assert!(
                (via_phi - direct[i]).abs() <= 1e-10 * direct[i].abs().max(1.0),
                "component {i}: {via_phi} vs {}", direct[i]
            );
        }
    }

    #[test]
    fn pairing_is_bilinear_and_antisymmetric(
        (a, b, c, lambda) in (1usize..=3).prop_flat_map(|n| {
            (point(2 * n, 2.0), point(2 * n, 2.0), point(2 * n, 2.0), -2.0..2.0f64)
        })
    ) {
        let p = DarbouxPoint::from_flat(&dv(&a)).unwrap();
        let q = DarbouxPoint::from_flat(&dv(&b)).unwrap();
        let r = DarbouxPoint::from_flat(&dv(&c)).unwrap();
        prop_assert!((omega(&p, &q).unwrap() + omega(&q, &p).unwrap()).abs() <= 1e-12);
        let shifted = p.add(&r.scale(lambda)).unwrap();
        let lhs = omega(&shifted, &q).unwrap();
        let rhs = omega(&p, &q).unwrap() + lambda * omega(&r, &q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11);
    }

    #[test]
    fn shears_and_their_products_are_symplectic(
        (n, upper, lower) in (1usize..=3).prop_flat_map(|n| {
            (Just(n), point(n * n, 2.0), point(n * n, 2.0))
        })
    ) {
        let sym = |vals: &[f64]| {
            let m = DMatrix::from_row_slice(n, n, vals);
            (&m + m.transpose()) * 0.5
        };
        let mut ju = DMatrix::<f64>::identity(2 * n, 2 * n);
        ju.view_mut((0, n), (n, n)).copy_from(&sym(&upper));
        let mut jl = DMatrix::<f64>::identity(2 * n, 2 * n);
        jl.view_mut((n, 0), (n, n)).copy_from(&sym(&lower));

        prop_assert!(is_symplectic(&ju, 1e-12).unwrap().symplectic);
        prop_assert!(is_symplectic(&jl, 1e-12).unwrap().symplectic);
        prop_assert!(is_symplectic(&(&ju * &jl), 1e-10).unwrap().symplectic);
        prop_assert!(is_symplectic(&omega_matrix(n), 1e-12).unwrap().symplectic);
    }

    #[test]
    fn system_matrix_is_symmetric_and_linear_in_the_direction(
        (f, q, t, s, alpha, beta) in (1usize..=3).prop_flat_map(|n| {
            (sparse_poly(n, 4), point(n, 1.5), point(n, 1.5), point(n, 1.5),
             -2.0..2.0f64, -2.0..2.0f64)
        })
    ) {
        let graph = LagrangianGraph::new(f);
        let qv = dv(&q);
        let frame_t = TangentFrame::new(qv.clone(), dv(&t)).unwrap();
        let frame_s = TangentFrame::new(qv.clone(), dv(&s)).unwrap();
        let a_t = graph.matrix_a(&frame_t);
        prop_assert_eq!(&a_t, &a_t.transpose());

        let combo = TangentFrame::new(qv, dv(&t) * alpha + dv(&s) * beta).unwrap();
        let lhs = graph.matrix_a(&combo);
        let rhs = &a_t * alpha + graph.matrix_a(&frame_s) * beta;
        let scale = lhs.amax().max(rhs.amax()).max(1.0);
        prop_assert!((lhs - rhs).amax() <= 1e-11 * scale);
    }

    #[test]
    fn tangent_points_are_affine_in_the_direction(
        (f, q, t, d) in (1usize..=3).prop_flat_map(|n| {
            (sparse_poly(n, 4), point(n, 1.5), point(n, 1.5), point(n, 1.0))
        })
    ) {
        let graph = LagrangianGraph::new(f);
        let qv = dv(&q);
        let at = |tv: DVector<f64>| {
            graph
                .tangent_point(&TangentFrame::new(qv.clone(), tv).unwrap())
                .flat()
        };
        let f0 = at(dv(&t));
        let f1 = at(dv(&t) + dv(&d));
        let f2 = at(dv(&t) + dv(&d) * 2.0);
        let second_difference = (f2 - &f1 * 2.0 + f0).amax();
        prop_assert!(second_difference <= 1e-10);
    }

    #[test]
    fn alternating_action_shift_invariance_and_reversal_sign(
        (k, n, flat) in (0usize..=3).prop_flat_map(|ki| {
            let k = 3 + 2 * ki;
            (1usize..=2).prop_flat_map(move |n| (Just(k), Just(n), point(2 * n * k, 2.0)))
        }),
        shift in 0usize..9,
    ) {
        let pts: Vec<DarbouxPoint> = (0..k)
            .map(|i| DarbouxPoint::from_flat(&dv(&flat[2 * n * i..2 * n * (i + 1)])).unwrap())
            .collect();
        let base = action(&pts).unwrap();
        let shift = shift % k;
        let shifted: Vec<DarbouxPoint> =
            (0..k).map(|i| pts[(i + shift) % k].clone()).collect();
        let reversed: Vec<DarbouxPoint> = pts.iter().rev().cloned().collect();
        let scale = base.abs().max(1.0);
        prop_assert!((action(&shifted).unwrap() - base).abs() <= 1e-12 * scale);
        // Reversing the cyclic order flips the sign.
        prop_assert!((action(&reversed).unwrap() + base).abs() <= 1e-12 * scale);
    }

    #[test]
    fn reconstruction_solves_the_midpoint_relation(
        (k, n, flat) in (0usize..=3).prop_flat_map(|ki| {
            let k = 3 + 2 * ki;
            (1usize..=2).prop_flat_map(move |n| (Just(k), Just(n), point(2 * n * k, 2.0)))
        })
    ) {
        let mids: Vec<DarbouxPoint> = (0..k)
            .map(|i| DarbouxPoint::from_flat(&dv(&flat[2 * n * i..2 * n * (i + 1)])).unwrap())
            .collect();
        let pts = reconstruct_orbit_points(&mids).unwrap();
        for i in 0..k {
            let defect = pts[i]
                .add(&pts[(i + 1) % k])
                .unwrap()
                .sub(&mids[i].scale(2.0))
                .unwrap()
                .norm_inf();
            prop_assert!(defect <= 1e-11, "index {i}: {defect}");
        }
    }

    #[test]
    fn correspondence_pairs_pass_the_conormal_test(
        (f, q, t) in (1usize..=2).prop_flat_map(|n| {
            (sparse_poly(n, 4), point(n, 1.5), point(n, 1.5))
        })
    ) {
        let graph = LagrangianGraph::new(f);
        let frame = TangentFrame::new(dv(&q), dv(&t)).unwrap();
        let pair = step_from_foot(&graph, &frame);
        let report = conormal_check(&graph, &pair.a, &pair.b, 1e-9).unwrap();
        prop_assert!(report.pass, "{report:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweep_jacobian_determinant_matches_the_system_determinant(
        (f, q, t) in (1usize..=2).prop_flat_map(|n| {
            (sparse_poly(n, 4), point(n, 1.2), point(n, 1.2))
        })
    ) {
        let graph = LagrangianGraph::new(f);
        let frame = TangentFrame::new(dv(&q), dv(&t)).unwrap();
        let det_a = graph.det_a(&frame);
        prop_assume!(det_a.abs() >= 1e-2);

        let flat_map = |v: &DVector<f64>| {
            let fr = TangentFrame::from_flat(v).unwrap();
            graph.tangent_point(&fr).flat()
        };
        let j = fd_jacobian(flat_map, &frame.flat(), 1e-5).unwrap();
        let det_j = j.determinant();
        prop_assert!(
            (det_j.abs() - det_a.abs()).abs() <= 1e-5 * det_a.abs(),
            "|det J| = {det_j}, det A = {det_a}"
        );
    }

    #[test]
    fn sweep_and_cluster_pullbacks_agree_off_the_critical_set(
        (f, noise, q, t) in (1usize..=2).prop_flat_map(|n| {
            (homogeneous_cubic(n), sparse_poly(n, 4), point(n, 1.2), point(n, 1.2))
        })
    ) {
        let graph = LagrangianGraph::new(f.add(&noise.scale(0.05)).unwrap());
        let frame = TangentFrame::new(dv(&q), dv(&t)).unwrap();
        match verify_symplectomorphism(&graph, &frame, 1e-4, 1e-6) {
            Ok(report) => prop_assert!(report.pass, "defect {}", report.defect),
            // A frame inside the critical set is outside the contract.
            Err(Error::CriticalFrame { .. }) => {}
            Err(other) => return Err(TestCaseError::fail(other.to_string())),
        }
    }

    #[test]
    fn planar_steps_invert_across_branches(
        (a, b, theta, radial) in (0.6..1.8f64, 0.6..1.8f64, 0.0..std::f64::consts::TAU, 1.2..3.0f64)
    ) {
        let curve = PlaneCurve::ellipse(a, b, Vector2::zeros()).unwrap();
        let start = curve.point(theta) * radial;
        let fwd = planar_outer_step(&curve, start, Branch::Forward).unwrap();
        let back = planar_outer_step(&curve, fwd.b, Branch::Backward).unwrap();
        prop_assert!((back.b - start).norm() <= 1e-8);
    }
}

#[test]
fn planar_step_preserves_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let curve = PlaneCurve::ellipse(
            rng.random_range(0.6..1.8),
            rng.random_range(0.6..1.8),
            Vector2::zeros(),
        )
        .unwrap();
        let start =
            curve.point(rng.random_range(0.0..std::f64::consts::TAU)) * rng.random_range(1.2..2.5);
        let step_map = |v: &DVector<f64>| {
            let out = planar_outer_step(&curve, Vector2::new(v[0], v[1]), Branch::Forward)
                .expect("probe stays exterior")
                .b;
            dv(&[out.x, out.y])
        };
        let j = fd_jacobian(step_map, &dv(&[start.x, start.y]), 1e-5).unwrap();
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        assert!((det - 1.0).abs() <= 1e-5, "det {det}");
    }
}

/// Follows one fixed solution branch of the correspondence and checks its
/// Jacobian is symplectic.
fn branch_jacobian_is_symplectic(graph: &LagrangianGraph, a0: &DarbouxPoint, q0: &DVector<f64>) {
    let radius = 0.05 * (1.0 + q0.norm());
    let lo = q0.map(|v| v - radius);
    let hi = q0.map(|v| v + radius);
    let params = CountParams {
        residual_tol: 1e-13,
        max_iter: 80,
        ..CountParams::with_box(SearchBox::new(lo, hi).unwrap())
    };
    let step = |flat: &DVector<f64>| {
        let a = DarbouxPoint::from_flat(flat).unwrap();
        let report = count_tangent_spaces(graph, &a, &params).unwrap();
        let root = report
            .roots
            .iter()
            .min_by(|r, s| (&r.q - q0).norm().total_cmp(&(&s.q - q0).norm()))
            .expect("branch root stays in the local box");
        pair_through_foot(graph, &a, &root.q).unwrap().b.flat()
    };
    let j = fd_jacobian(step, &a0.flat(), 1e-4).unwrap();
    let check = is_symplectic(&j, 1e-5).unwrap();
    assert!(check.symplectic, "defect {}", check.defect);
}

#[test]
fn correspondence_branches_are_symplectic() {
    let cube = LagrangianGraph::new(SparsePolynomial::monomial(1, vec![3], 1.0).unwrap());
    branch_jacobian_is_symplectic(
        &cube,
        &DarbouxPoint::from_slices(&[0.0], &[-3.0]).unwrap(),
        &dv(&[1.0]),
    );

    let mixed = LagrangianGraph::new(
        SparsePolynomial::new(2, vec![(vec![2, 1], 1.0), (vec![1, 2], 1.0)]).unwrap(),
    );
    branch_jacobian_is_symplectic(
        &mixed,
        &DarbouxPoint::from_slices(&[1.0, 1.0], &[0.0, 0.0]).unwrap(),
        &dv(&[2.0, 2.0]),
    );
}

#[test]
fn tangency_counts_are_stable_under_small_test_point_motion() {
    let cases: Vec<(LagrangianGraph, DarbouxPoint, SearchBox, usize)> = vec![
        (
            LagrangianGraph::new(SparsePolynomial::monomial(1, vec![3], 1.0).unwrap()),
            DarbouxPoint::from_slices(&[0.0], &[-3.0]).unwrap(),
            SearchBox::symmetric(1, 3.0).unwrap(),
            2,
        ),
        (
            LagrangianGraph::new(
                SparsePolynomial::new(2, vec![(vec![3, 0], 1.0), (vec![0, 3], 1.0)]).unwrap(),
            ),
            DarbouxPoint::from_slices(&[0.0, 0.0], &[-3.0, -3.0]).unwrap(),
            SearchBox::symmetric(2, 3.0).unwrap(),
            4,
        ),
        (
            LagrangianGraph::new(
                SparsePolynomial::new(2, vec![(vec![2, 1], 1.0), (vec![1, 2], 1.0)]).unwrap(),
            ),
            DarbouxPoint::from_slices(&[1.0, 1.0], &[0.0, 0.0]).unwrap(),
            SearchBox::symmetric(2, 3.0).unwrap(),
            2,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (graph, test, search_box, expected) in cases {
        let params = CountParams {
            grid: 12,
            ..CountParams::with_box(search_box)
        };
        for trial in 0..4 {
            let eps = if trial == 0 { 0.0 } else { 1e-4 };
            let delta = DarbouxPoint::new(
                DVector::from_fn(test.dim(), |_, _| rng.random_range(-eps..=eps)),
                DVector::from_fn(test.dim(), |_, _| rng.random_range(-eps..=eps)),
            )
            .unwrap();
            let moved = test.add(&delta).unwrap();
            let report = count_tangent_spaces(&graph, &moved, &params).unwrap();
            assert_eq!(report.count, expected, "trial {trial}");
        }
    }
}

#[test]
fn alternating_sum_matches_the_product_formula_exhaustively() {
    fn tuples(n: usize, max: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|base| {
                    (1..=max).map(move |d| {
                        let mut next = base.clone();
                        next.push(d);
                        next
                    })
                })
                .collect();
        }
        out
    }
    for n in 1..=4 {
        for d in tuples(n, 6) {
            let closed: u64 = d.iter().map(|&x| u64::from(x - 1)).product();
            assert_eq!(newton_number(&d).unwrap(), closed, "{d:?}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(5..=6);
        let d: Vec<u32> = (0..n).map(|_| rng.random_range(1..=6)).collect();
        let closed: u64 = d.iter().map(|&x| u64::from(x - 1)).product();
        assert_eq!(newton_number(&d).unwrap(), closed, "{d:?}");
    }
}
