//! Planar outer-billiard machinery on strictly convex closed curves.
//!
//! Everything here is two-dimensional and self-contained, so it can serve
//! as an independent cross-check for the higher-dimensional billiard code:
//! the planar step is solved straight from the tangency equation, periodic
//! orbits come from a direct maximization over tangency parameters, and the
//! two area oracles (tractrix, sweep vs. cluster) use plain quadrature and
//! Monte Carlo.

use nalgebra::{DVector, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::optim::{bfgs_max, newton_root};

const CONVEXITY_SAMPLES: usize = 720;

/// Closed, counterclockwise, strictly convex plane curve given either as an
/// ellipse or as a trigonometric polynomial per coordinate. Convexity is
/// validated by sampling the signed curvature at construction; this is a
/// sanity gate, not a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct PlaneCurve {
    kind: CurveKind,
}

#[derive(Debug, Clone, PartialEq)]
enum CurveKind {
    Ellipse { a: f64, b: f64, center: Vector2<f64> },
    Trig { cx: Vec<f64>, sx: Vec<f64>, cy: Vec<f64>, sy: Vec<f64> },
}

/// Wire format for curves, e.g. `{"kind":"ellipse","a":1.0,"b":0.6,"center":[0,0]}`
/// or `{"kind":"trig","cx":[0,1],"sy":[0,1]}` (harmonic m coefficients of
/// cos(m th)/sin(m th) per coordinate; omitted lists default to empty).
/// A plain struct with a discriminant field so unknown fields are rejected
/// reliably.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sx: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sy: Option<Vec<f64>>,
}

impl TryFrom<CurveSpec> for PlaneCurve {
    type Error = Error;
    fn try_from(spec: CurveSpec) -> Result<Self> {
        match spec.kind.as_str() {
            "ellipse" => {
                if spec.cx.is_some() || spec.sx.is_some() || spec.cy.is_some() || spec.sy.is_some()
                {
                    return Err(Error::invalid("ellipse spec cannot carry trig coefficients"));
                }
                let a = spec.a.ok_or_else(|| Error::invalid("ellipse spec needs 'a'"))?;
                let b = spec.b.ok_or_else(|| Error::invalid("ellipse spec needs 'b'"))?;
                let c = spec.center.unwrap_or([0.0, 0.0]);
                PlaneCurve::ellipse(a, b, Vector2::new(c[0], c[1]))
            }
            "trig" => {
                if spec.a.is_some() || spec.b.is_some() || spec.center.is_some() {
                    return Err(Error::invalid("trig spec cannot carry ellipse fields"));
                }
                PlaneCurve::trig(
                    spec.cx.unwrap_or_default(),
                    spec.sx.unwrap_or_default(),
                    spec.cy.unwrap_or_default(),
                    spec.sy.unwrap_or_default(),
                )
            }
            other => Err(Error::invalid(format!("unknown curve kind '{other}'"))),
        }
    }
}

impl From<PlaneCurve> for CurveSpec {
    fn from(c: PlaneCurve) -> Self {
        let empty = CurveSpec {
            kind: String::new(),
            a: None,
            b: None,
            center: None,
            cx: None,
            sx: None,
            cy: None,
            sy: None,
        };
        match c.kind {
            CurveKind::Ellipse { a, b, center } => CurveSpec {
                kind: "ellipse".into(),
                a: Some(a),
                b: Some(b),
                center: Some([center.x, center.y]),
                ..empty
            },
            CurveKind::Trig { cx, sx, cy, sy } => CurveSpec {
                kind: "trig".into(),
                cx: Some(cx),
                sx: Some(sx),
                cy: Some(cy),
                sy: Some(sy),
            ..empty
            },
        }
    }
}

fn cross2(u: Vector2<f64>, v: Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

impl PlaneCurve {
    pub fn ellipse(a: f64, b: f64, center: Vector2<f64>) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("ellipse semi-axes must be positive and finite"));
        }
        let curve = PlaneCurve {
            kind: CurveKind::Ellipse { a, b, center },
        };
        curve.validate_convexity()?;
        Ok(curve)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::ellipse(radius, radius, Vector2::zeros())
    }

    pub fn trig(cx: Vec<f64>, sx: Vec<f64>, cy: Vec<f64>, sy: Vec<f64>) -> Result<Self> {
        for c in cx.iter().chain(&sx).chain(&cy).chain(&sy) {
            if !c.is_finite() {
                return Err(Error::invalid("trig coefficients must be finite"));
            }
        }
        let curve = PlaneCurve {
            kind: CurveKind::Trig { cx, sx, cy, sy },
        };
        curve.validate_convexity()?;
        Ok(curve)
    }

    fn validate_convexity(&self) -> Result<()> {
        for i in 0..CONVEXITY_SAMPLES {
            let th = TAU * i as f64 / CONVEXITY_SAMPLES as f64;
            let d1 = self.derivative(th);
            let speed = d1.norm();
            if speed < 1e-9 {
                return Err(Error::SingularCurve(th));
            }
            let kappa = cross2(d1, self.second_derivative(th)) / speed.powi(3);
            if kappa <= 1e-9 {
                return Err(Error::NotConvex { theta: th, kappa });
            }
        }
        Ok(())
    }

    pub fn point(&self, theta: f64) -> Vector2<f64> {
        match &self.kind {
            CurveKind::Ellipse { a, b, center } => {
                center + Vector2::new(a * theta.cos(), b * theta.sin())
            }
            CurveKind::Trig { cx, sx, cy, sy } => {
                Vector2::new(trig_eval(cx, sx, theta, 0), trig_eval(cy, sy, theta, 0))
            }
        }
    }

    pub fn derivative(&self, theta: f64) -> Vector2<f64> {
        match &self.kind {
            CurveKind::Ellipse { a, b, .. } => {
                Vector2::new(-a * theta.sin(), b * theta.cos())
            }
            CurveKind::Trig { cx, sx, cy, sy } => {
                Vector2::new(trig_eval(cx, sx, theta, 1), trig_eval(cy, sy, theta, 1))
            }
        }
    }

    pub fn second_derivative(&self, theta: f64) -> Vector2<f64> {
        match &self.kind {
            CurveKind::Ellipse { a, b, .. } => {
                Vector2::new(-a * theta.cos(), -b * theta.sin())
            }
            CurveKind::Trig { cx, sx, cy, sy } => {
                Vector2::new(trig_eval(cx, sx, theta, 2), trig_eval(cy, sy, theta, 2))
            }
        }
    }

    pub fn unit_tangent(&self, theta: f64) -> Vector2<f64> {
        let d = self.derivative(theta);
        d / d.norm()
    }
}

/// Derivative-order-aware evaluation of sum_m c_m cos(m th) + s_m sin(m th).
fn trig_eval(cos_coeff: &[f64], sin_coeff: &[f64], theta: f64, order: u32) -> f64 {
    let harmonics = cos_coeff.len().max(sin_coeff.len());
    let mut acc = 0.0;
    for m in 0..harmonics {
        let c = cos_coeff.get(m).copied().unwrap_or(0.0);
        let s = sin_coeff.get(m).copied().unwrap_or(0.0);
        let mf = m as f64;
        let (mc, ms) = ((mf * theta).cos(), (mf * theta).sin());
        let term = match order {
            0 => c * mc + s * ms,
            1 => mf * (-c * ms + s * mc),
            2 => mf * mf * (-c * mc - s * ms),
            _ => unreachable!("orders above 2 unused"),
        };
        acc += term;
    }
    acc
}

/// Which of the two tangent lines through an exterior point to follow:
/// `Forward` advances along the curve orientation (the tangent ray from the
/// point runs with the curve's derivative), `Backward` is its inverse map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Forward,
    Backward,
}

/// One planar outer-billiard step: reflected point, tangency parameter, and
/// the scale-free tangency residual at that parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarStep {
    pub b: Vector2<f64>,
    pub theta: f64,
    pub residual: f64,
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t == TAU {
        0.0
    } else {
        t
    }
}

/// Scale-free tangency defect of parameter `theta` for the line through `p`:
/// the sine of the angle between p - curve(theta) and the tangent direction.
fn tangency_residual(curve: &PlaneCurve, p: Vector2<f64>, theta: f64) -> f64 {
    let d = p - curve.point(theta);
    let t = curve.derivative(theta);
    let scale = d.norm() * t.norm();
    if scale == 0.0 {
        return f64::INFINITY;
    }
    cross2(d, t).abs() / scale
}

/// Requires `p` strictly outside; returns the normalized support margin
/// (most negative sampled value of sin of the turning angle).
fn require_outside(curve: &PlaneCurve, p: Vector2<f64>) -> Result<()> {
    let mut min_val = f64::INFINITY;
    for i in 0..CONVEXITY_SAMPLES {
        let th = TAU * i as f64 / CONVEXITY_SAMPLES as f64;
        let d = p - curve.point(th);
        let nd = d.norm();
        if nd < 1e-13 {
            return Err(Error::PointNotOutside);
        }
        let t = curve.derivative(th);
        min_val = min_val.min(cross2(t, d) / (nd * t.norm()));
    }
    // Interior points see every tangent line from the same side.
    if min_val > -1e-9 {
        return Err(Error::PointNotOutside);
    }
    Ok(())
}

/// All tangency parameters of lines through `p`, found by damped Newton from
/// 64 uniform seeds, deduplicated on the circle. A convex curve and exterior
/// point give exactly two.
fn tangency_parameters(curve: &PlaneCurve, p: Vector2<f64>) -> Vec<(f64, f64)> {
    let f = |th: f64| cross2(p - curve.point(th), curve.derivative(th));
    let fp = |th: f64| cross2(p - curve.point(th), curve.second_derivative(th));

    let mut found: Vec<(f64, f64)> = Vec::new();
    for s in 0..64 {
        let mut th = TAU * s as f64 / 64.0;
        let mut val = f(th);
        let mut ok = false;
        for _ in 0..60 {
            if tangency_residual(curve, p, th) <= 1e-12 {
                ok = true;
                break;
            }
            let slope = fp(th);
            if slope.abs() < 1e-300 {
                break;
            }
            let mut delta = val / slope;
            // Damping keeps the iteration inside the tangency basin.
            let mut accepted = false;
            for _ in 0..20 {
                let cand = th - delta;
                let cand_val = f(cand);
                if cand_val.abs() < val.abs() {
                    th = cand;
                    val = cand_val;
                    accepted = true;
                    break;
                }
                delta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if ok {
            let th = wrap_angle(th);
            let res = tangency_residual(curve, p, th);
            match found.iter_mut().find(|(existing, _)| {
                let d = (existing - th).rem_euclid(TAU);
                d.min(TAU - d) < 1e-7
            }) {
                Some(slot) => {
                    if res < slot.1 {
                        *slot = (th, res);
                    }
                }
                None => found.push((th, res)),
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found
}

/// One step of the planar outer billiard from an exterior point: find the
/// tangent line through `a` on the requested branch and reflect `a` through
/// the tangency point.
pub fn planar_outer_step(
    curve: &PlaneCurve,
    a: Vector2<f64>,
    branch: Branch,
) -> Result<PlanarStep> {
    require_outside(curve, a)?;
    let candidates = tangency_parameters(curve, a);
    let mut best: Option<(f64, f64)> = None;
    for &(th, res) in &candidates {
        let g = (a - curve.point(th)).dot(&curve.derivative(th));
        let wanted = match branch {
            Branch::Forward => g < 0.0,
            Branch::Backward => g > 0.0,
        };
        if wanted && best.map_or(true, |(_, r)| res < r) {
            best = Some((th, res));
        }
    }
    let (theta, residual) = best.ok_or(Error::TangencyDiverged)?;
    if residual > 1e-10 {
        return Err(Error::TangencyDiverged);
    }
    Ok(PlanarStep {
        b: 2.0 * curve.point(theta) - a,
        theta,
        residual,
    })
}

/// A verified planar k-periodic orbit: tangency parameters of the midpoints,
/// the midpoints and orbit points themselves, the action value, and the
/// worst per-step deviation under re-stepping with `planar_outer_step`.
#[derive(Debug, Clone)]
pub struct PlanarOrbit {
    pub k: usize,
    pub thetas: Vec<f64>,
    pub midpoints: Vec<Vector2<f64>>,
    pub points: Vec<Vector2<f64>>,
    pub action: f64,
    pub grad_norm: f64,
    pub step_defect: f64,
}

const PLANAR_STARTS: usize = 160;
const BACKTRACK_MARGIN: f64 = 1e-6;
const STEP_CONSISTENCY: f64 = 1e-8;

/// Alternating action of a midpoint tuple on the curve.
fn planar_action(curve: &PlaneCurve, thetas: &DVector<f64>) -> f64 {
    let pts: Vec<Vector2<f64>> = thetas.iter().map(|&t| curve.point(t)).collect();
    let k = pts.len();
    let mut acc = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * cross2(pts[i], pts[j]);
        }
    }
    acc
}

fn planar_action_gradient(curve: &PlaneCurve, thetas: &DVector<f64>) -> DVector<f64> {
    let k = thetas.len();
    let pts: Vec<Vector2<f64>> = thetas.iter().map(|&t| curve.point(t)).collect();
    DVector::from_fn(k, |i, _| {
        let mut c = Vector2::zeros();
        for j in 0..k {
            if j == i {
                continue;
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // d/d th_i of sign * cross(p_i, p_j) for j > i, and of
            // sign * cross(p_j, p_i) = -sign * cross(p_i, p_j) for j < i.
            if j > i {
                c += sign * pts[j];
            } else {
                c -= sign * pts[j];
            }
        }
        cross2(curve.derivative(thetas[i]), c)
    })
}

/// Reconstructs orbit points from midpoints by the odd-k alternating sum.
pub(crate) fn alternating_orbit_points(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let k = points.len();
    (0..k)
        .map(|i| {
            let mut z = Vector2::zeros();
            for j in 0..k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                z += sign * points[(i + j) % k];
            }
            z
        })
        .collect()
}

/// Wrap-aware max distance between angle tuples.
pub(crate) fn circular_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).rem_euclid(TAU);
            d.min(TAU - d)
        })
        .fold(0.0, f64::max)
}

/// True when two angle tuples agree up to some rotation or reflection of the
/// cyclic index (`blocks` angles per orbit point).
pub(crate) fn dihedral_equivalent(a: &[f64], b: &[f64], blocks: usize, tol: f64) -> bool {
    let k = a.len() / blocks;
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len() % blocks, 0);
    let mut transformed = vec![0.0; a.len()];
    for shift in 0..k {
        for reflect in [false, true] {
            for i in 0..k {
                let src = if reflect {
                    (k + shift).wrapping_sub(i) % k
                } else {
                    (i + shift) % k
                };
                transformed[i * blocks..(i + 1) * blocks]
                    .copy_from_slice(&b[src * blocks..(src + 1) * blocks]);
            }
            if circular_distance(a, &transformed) <= tol {
                return true;
            }
        }
    }
    false
}

/// Finds planar k-periodic outer-billiard orbits (odd k) by multistart
/// maximization of the alternating action over tangency parameters, plus a
/// Newton polish on the gradient so saddle-type critical points are kept
/// too. Every returned orbit re-steps consistently under
/// `planar_outer_step` to within `1e-8`.
pub fn find_planar_periodic(curve: &PlaneCurve, k: usize, seed: u64) -> Result<Vec<PlanarOrbit>> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::BadPeriod(k));
    }

    let f = |th: &DVector<f64>| planar_action(curve, th);
    let grad = |th: &DVector<f64>| planar_action_gradient(curve, th);

    let raw: Vec<DVector<f64>> = (0..PLANAR_STARTS)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let start =
                DVector::from_fn(k, |_, _| rng.random_range(0.0..TAU));
            let mut out = Vec::new();
            let ascent = bfgs_max(f, grad, start.clone(), 400, 1e-11);
            if ascent.converged {
                out.push(ascent.x);
            }
            if let Some(root) = newton_root(grad, start, 1e-12, 80, 1e-7) {
                out.push(root);
            }
            out
        })
        .collect();

    let mut orbits: Vec<PlanarOrbit> = Vec::new();
    for cand in raw {
        let grad_norm = planar_action_gradient(curve, &cand).norm();
        if grad_norm > 1e-9 {
            continue;
        }
        let thetas: Vec<f64> = cand.iter().map(|&t| wrap_angle(t)).collect();
        let midpoints: Vec<Vector2<f64>> = thetas.iter().map(|&t| curve.point(t)).collect();
        let margin = (0..k)
            .map(|i| (midpoints[i] - midpoints[(i + 1) % k]).norm())
            .fold(f64::INFINITY, f64::min);
        if margin < BACKTRACK_MARGIN {
            continue;
        }
        let points = alternating_orbit_points(&midpoints);
        let Some(step_defect) = orbit_step_defect(curve, &points) else {
            continue;
        };
        if step_defect > STEP_CONSISTENCY {
            continue;
        }
        let orbit = PlanarOrbit {
            k,
            action: planar_action(curve, &cand),
            thetas,
            midpoints,
            points,
            grad_norm,
            step_defect,
        };
        let dup = orbits
            .iter()
            .any(|o| dihedral_equivalent(&o.thetas, &orbit.thetas, 1, 1e-5));
        if !dup {
            orbits.push(orbit);
        }
    }

    orbits.sort_by(|a, b| {
        b.action
            .total_cmp(&a.action)
            .then_with(|| a.thetas.iter().zip(&b.thetas).fold(
                std::cmp::Ordering::Equal,
                |ord, (x, y)| ord.then(x.total_cmp(y)),
            ))
    });
    Ok(orbits)
}

/// Worst distance between the stepped image of each orbit point and its
/// successor, minimized over the two branches. `None` when stepping fails
/// outright (point inside the curve).
pub(crate) fn orbit_step_defect(curve: &PlaneCurve, points: &[Vector2<f64>]) -> Option<f64> {
    let k = points.len();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let next = points[(i + 1) % k];
        let mut best = f64::INFINITY;
        for branch in [Branch::Forward, Branch::Backward] {
            if let Ok(step) = planar_outer_step(curve, points[i], branch) {
                best = best.min((step.b - next).norm());
            }
        }
        if !best.is_finite() {
            return None;
        }
        worst = worst.max(best);
    }
    Some(worst)
}

/// Adaptive Simpson quadrature with the classical 1/15 error update.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * eps {
            return left + right + err / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Truncation bound for the tractrix parameter; the tail beyond it
/// contributes less than 1e-8 to the area.
const TRACTRIX_SPAN: f64 = 20.0;

/// Area between the tractrix (s - tanh s, sech s) and its asymptote over a
/// parameter range. `step` sets the quadrature refinement target (the
/// adaptive tolerance scales as step^3).
pub fn tractrix_area_on(s0: f64, s1: f64, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidStep(step));
    }
    if !(s0 < s1) || !s0.is_finite() || !s1.is_finite() {
        return Err(Error::invalid("parameter range must be finite with s0 < s1"));
    }
    // Area under the curve: y dx with y = sech s and dx = tanh^2 s ds.
    let integrand = |s: f64| {
        let sech = 1.0 / s.cosh();
        let t = s.tanh();
        sech * t * t
    };
    let eps = step.powi(3).clamp(1e-13, 1e-3);
    Ok(adaptive_simpson(&integrand, s0, s1, eps))
}

/// Full area between the tractrix and its asymptote (both branches).
pub fn tractrix_area(step: f64) -> Result<f64> {
    tractrix_area_on(-TRACTRIX_SPAN, TRACTRIX_SPAN, step)
}

/// Annular family of tangent segments: tangency parameters in
/// `theta_range`, signed distances along the forward unit tangent in
/// `length_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRegion {
    pub theta_range: (f64, f64),
    pub length_range: (f64, f64),
}

impl SweepRegion {
    pub fn full(length: f64) -> Self {
        SweepRegion {
            theta_range: (0.0, TAU),
            length_range: (0.0, length),
        }
    }

    fn validate(&self) -> Result<()> {
        let (t0, t1) = self.theta_range;
        let (l0, l1) = self.length_range;
        if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
            return Err(Error::invalid("theta range must be finite with t0 <= t1"));
        }
        if !(l0.is_finite() && l1.is_finite() && 0.0 <= l0 && l0 <= l1) {
            return Err(Error::invalid("length range must satisfy 0 <= l0 <= l1"));
        }
        Ok(())
    }

    fn contains_theta(&self, theta: f64) -> bool {
        let (t0, t1) = self.theta_range;
        if t1 - t0 >= TAU {
            return true;
        }
        (theta - t0).rem_euclid(TAU) <= t1 - t0
    }

    fn contains_length(&self, s: f64) -> bool {
        let (l0, l1) = self.length_range;
        (l0 - 1e-12..=l1 + 1e-12).contains(&s)
    }
}

const MC_CHUNKS: u64 = 256;
const MC_GRID: usize = 256;

struct CurveTable {
    theta: Vec<f64>,
    gamma: Vec<Vector2<f64>>,
    d1: Vec<Vector2<f64>>,
}

impl CurveTable {
    fn build(curve: &PlaneCurve) -> Self {
        let theta: Vec<f64> = (0..MC_GRID).map(|i| TAU * i as f64 / MC_GRID as f64).collect();
        let gamma = theta.iter().map(|&t| curve.point(t)).collect();
        let d1 = theta.iter().map(|&t| curve.derivative(t)).collect();
        CurveTable { theta, gamma, d1 }
    }
}

/// Finds zeros of a continuous function on the parameter circle from a
/// coarse sign table, then bisection.
fn circle_roots<F: Fn(f64) -> f64>(table_vals: &[f64], thetas: &[f64], f: &F) -> Vec<f64> {
    let n = table_vals.len();
    let mut roots = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let (va, vb) = (table_vals[i], table_vals[j]);
        if va == 0.0 {
            roots.push(thetas[i]);
            continue;
        }
        if va * vb < 0.0 {
            let mut lo = thetas[i];
            let mut hi = thetas[i] + TAU / n as f64;
            let mut flo = va;
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                let fmid = f(mid);
                if flo * fmid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            roots.push(wrap_angle(0.5 * (lo + hi)));
        }
    }
    roots
}

/// Monte Carlo areas of a tangent sweep (segments in place) and its tangent
/// cluster (segments translated to a common origin), with the same sample
/// budget and seed for both. Returns (sweep area, cluster area).
pub fn mamikon_area_check(
    curve: &PlaneCurve,
    region: &SweepRegion,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    region.validate()?;
    if samples == 0 {
        return Err(Error::invalid("sample budget must be positive"));
    }
    let l1 = region.length_range.1;
    if l1 == 0.0 {
        return Ok((0.0, 0.0));
    }

    let table = CurveTable::build(curve);

    // Sweep membership: some tangency parameter in range whose segment
    // covers the point.
    let sweep_member = |p: Vector2<f64>| -> bool {
        let vals: Vec<f64> = (0..MC_GRID)
            .map(|i| cross2(p - table.gamma[i], table.d1[i]))
            .collect();
        let f = |th: f64| cross2(p - curve.point(th), curve.derivative(th));
        circle_roots(&vals, &table.theta, &f).into_iter().any(|th| {
            if !region.contains_theta(th) {
                return false;
            }
            let s = (p - curve.point(th)).dot(&curve.unit_tangent(th));
            region.contains_length(s)
        })
    };

    // Cluster membership: radius in the length range and direction matching
    // some in-range forward tangent.
    let cluster_member = |p: Vector2<f64>| -> bool {
        let r = p.norm();
        if !region.contains_length(r) {
            return false;
        }
        if r < 1e-300 {
            return true;
        }
        let vals: Vec<f64> = (0..MC_GRID).map(|i| cross2(table.d1[i], p)).collect();
        let f = |th: f64| cross2(curve.derivative(th), p);
        circle_roots(&vals, &table.theta, &f)
            .into_iter()
            .any(|th| region.contains_theta(th) && curve.derivative(th).dot(&p) > 0.0)
    };

    // Bounding boxes; the sweep box pads the whole curve by the longest
    // segment, which is safe if not tight.
    let mut lo = Vector2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for g in &table.gamma {
        lo = lo.inf(g);
        hi = hi.sup(g);
    }
    let sweep_box = (lo.add_scalar(-l1), hi.add_scalar(l1));
    let cluster_box = (Vector2::new(-l1, -l1), Vector2::new(l1, l1));

    let estimate = |member: &(dyn Fn(Vector2<f64>) -> bool + Sync),
                    bbox: (Vector2<f64>, Vector2<f64>)|
     -> f64 {
        let (lo, hi) = bbox;
        let span = hi - lo;
        let base = samples as u64 / MC_CHUNKS;
        let rem = samples as u64 % MC_CHUNKS;
        let hits: u64 = (0..MC_CHUNKS)
            .into_par_iter()
            .map(|chunk| {
                let count = base + u64::from(chunk < rem);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (chunk + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut h = 0u64;
                for _ in 0..count {
                    let p = Vector2::new(
                        lo.x + span.x * rng.random_range(0.0..1.0),
                        lo.y + span.y * rng.random_range(0.0..1.0),
                    );
                    if member(p) {
                        h += 1;
                    }
                }
                h
            })
            .sum();
        span.x * span.y * hits as f64 / samples as f64
    };

    let area_sweep = estimate(&sweep_member, sweep_box);
    let area_cluster = estimate(&cluster_member, cluster_box);
    Ok((area_sweep, area_cluster))
}
