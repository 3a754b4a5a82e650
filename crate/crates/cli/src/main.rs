//! Scenario-driven front end for the lagsweep library.
//!
//! Every command reads a JSON scenario (except `newton-number` and the
//! built-in suites), runs one library operation, and prints a JSON envelope
//! echoing the seed, the effective tolerance, and both crate versions.
//! Output is byte-identical for a fixed seed regardless of `--threads`.
//!
//! Exit codes: 0 on success, 1 when the computation ran but failed its
//! verification (diagnostic JSON still printed), 2 when the request itself
//! is malformed.

mod output;
mod scenario;
mod suite;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use lagsweep::{
    correspondents, count_tangent_spaces, find_periodic_orbits, find_planar_periodic,
    mamikon_area_check, newton_number, orbit_verify, planar_outer_step, tractrix_area,
    verify_symplectomorphism, DarbouxPoint, Error as LagError, TangentFrame,
};

use output::{cell, emit, envelope, write_csv};
use scenario::{
    MamikonScenario, OrbitScenario, PlanarPeriodicScenario, PlanarStepScenario, PointScenario,
    SweepScenario,
};

const PULLBACK_STEP: f64 = 1e-4;
const PULLBACK_TOL: f64 = 1e-6;
const ORBIT_VERIFY_TOL: f64 = 1e-6;
const TRACTRIX_TOL: f64 = 1e-4;
const MAMIKON_TOL: f64 = 1e-2;

#[derive(Parser)]
#[command(
    name = "lagsweep",
    version,
    about = "Tangent sweeps of Lagrangian submanifolds and their outer billiards"
)]
struct Cli {
    /// Seed for every randomized sampling in the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Override the command's default verification tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Cap the worker-thread count; 0 keeps the machine default. The output
    /// does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write the JSON envelope here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write a CSV projection of the tabular part of the result.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the sweep-to-cluster pullback identity at random frames.
    SweepCheck { scenario: PathBuf },
    /// Count tangent spaces of a graph model through a test point.
    Multiplicity { scenario: PathBuf },
    /// Closed-form generic root-count prediction from axis intercepts.
    NewtonNumber {
        /// Comma-separated diagonal degrees, e.g. 3,3.
        #[arg(long, value_delimiter = ',', required = true)]
        intercepts: Vec<u32>,
    },
    /// Correspondence pairs through a test point of a graph model.
    BilliardStep { scenario: PathBuf },
    /// Search a product model for odd-period orbits and verify each.
    OrbitSearch { scenario: PathBuf },
    /// Single-curve oracles for the planar outer billiard.
    Planar {
        #[command(subcommand)]
        planar: PlanarCommand,
    },
    /// Run the built-in invariant battery; nonzero exit on any failure.
    VerifySuite,
}

#[derive(Subcommand)]
enum PlanarCommand {
    /// One outer-billiard step from a point outside the curve.
    Step { scenario: PathBuf },
    /// Multistart search for odd-period planar orbits.
    Periodic { scenario: PathBuf },
    /// Area between the tractrix and its asymptote.
    Tractrix {
        /// Simpson panel width for the arc-length integral.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Monte Carlo comparison of tangent sweep and tangent cluster areas.
    Mamikon { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: configuring {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::SweepCheck { scenario } => cmd_sweep_check(cli, scenario),
        Command::Multiplicity { scenario } => cmd_multiplicity(cli, scenario),
        Command::NewtonNumber { intercepts } => cmd_newton_number(cli, intercepts),
        Command::BilliardStep { scenario } => cmd_billiard_step(cli, scenario),
        Command::OrbitSearch { scenario } => cmd_orbit_search(cli, scenario),
        Command::Planar { planar } => match planar {
            PlanarCommand::Step { scenario } => cmd_planar_step(cli, scenario),
            PlanarCommand::Periodic { scenario } => cmd_planar_periodic(cli, scenario),
            PlanarCommand::Tractrix { step } => cmd_tractrix(cli, *step),
            PlanarCommand::Mamikon { scenario } => cmd_mamikon(cli, scenario),
        },
        Command::VerifySuite => cmd_verify_suite(cli),
    }
}

/// Emits a diagnostic envelope for a computation that ran and failed;
/// the caller turns the `false` into exit code 1.
fn fail(cli: &Cli, command: &str, tol: Option<f64>, err: &dyn Display) -> anyhow::Result<bool> {
    let env = envelope(command, cli.seed, tol, json!({ "error": err.to_string() }));
    emit(&env, cli.out.as_deref())?;
    Ok(false)
}

fn no_csv(cli: &Cli, command: &str) -> anyhow::Result<()> {
    if cli.csv.is_some() {
        anyhow::bail!(
            "{command} has no tabular projection; --csv applies to multiplicity, \
             billiard-step, orbit-search, and planar periodic"
        );
    }
    Ok(())
}

fn cmd_sweep_check(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    no_csv(cli, "sweep-check")?;
    let sc: SweepScenario = scenario::load(path)?;
    let graph = scenario::graph_of(&sc.model)?;
    if sc.frames == 0 {
        anyhow::bail!("frames must be positive");
    }
    if !sc.radius.is_finite() || !(sc.radius > 0.0) {
        anyhow::bail!("radius must be positive and finite");
    }
    let tol = cli.tol.unwrap_or(PULLBACK_TOL);
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut max_defect = 0.0f64;
    let mut all_pass = true;
    for _ in 0..sc.frames {
        let q = DVector::from_fn(n, |_, _| rng.random_range(-sc.radius..=sc.radius));
        let t = DVector::from_fn(n, |_, _| rng.random_range(-sc.radius..=sc.radius));
        let frame = TangentFrame::new(q, t).expect("sampled entries are finite");
        match verify_symplectomorphism(graph, &frame, PULLBACK_STEP, tol) {
            Ok(rep) => {
                checked += 1;
                max_defect = max_defect.max(rep.defect);
                all_pass &= rep.pass;
            }
            Err(LagError::CriticalFrame { .. }) => skipped += 1,
            Err(e) => return fail(cli, "sweep-check", Some(tol), &e),
        }
    }
    let ok = all_pass && checked > 0;
    let result = json!({
        "frames": sc.frames,
        "checked": checked,
        "skipped_critical": skipped,
        "max_defect": max_defect,
        "all_pass": all_pass,
    });
    emit(&envelope("sweep-check", cli.seed, Some(tol), result), cli.out.as_deref())?;
    Ok(ok)
}

fn cmd_multiplicity(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    let sc: PointScenario = scenario::load(path)?;
    let graph = scenario::graph_of(&sc.model)?;
    let test = DarbouxPoint::from_slices(&sc.x, &sc.y)?;
    if test.dim() != graph.n() {
        anyhow::bail!("test point has {} components, model has {}", test.dim(), graph.n());
    }
    let mut params = sc.params()?;
    if let Some(tol) = cli.tol {
        params.residual_tol = tol;
    }
    let tol = params.residual_tol;
    let rep = match count_tangent_spaces(graph, &test, &params) {
        Ok(rep) => rep,
        Err(e) => return fail(cli, "multiplicity", Some(tol), &e),
    };
    let roots: Vec<_> = rep
        .roots
        .iter()
        .map(|r| {
            json!({
                "q": r.q.as_slice(),
                "residual": r.residual,
                "det_a": r.det_a,
                "near_critical": r.near_critical,
            })
        })
        .collect();
    let result = json!({
        "count": rep.count,
        "roots": roots,
        "flagged_near_critical": rep.flagged_near_critical,
        "all_starts_diverged": rep.all_starts_diverged,
    });
    emit(&envelope("multiplicity", cli.seed, Some(tol), result), cli.out.as_deref())?;
    if let Some(csv) = &cli.csv {
        let n = graph.n();
        let mut header: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
        header.extend(["residual", "det_a", "near_critical"].map(String::from));
        let rows: Vec<Vec<String>> = rep
            .roots
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.q.iter().map(|&v| cell(v)).collect();
                row.push(cell(r.residual));
                row.push(cell(r.det_a));
                row.push(r.near_critical.to_string());
                row
            })
            .collect();
        write_csv(csv, &header, &rows)?;
    }
    Ok(!rep.all_starts_diverged)
}

fn cmd_newton_number(cli: &Cli, intercepts: &[u32]) -> anyhow::Result<bool> {
    no_csv(cli, "newton-number")?;
    let nu = newton_number(intercepts)?;
    let result = json!({ "intercepts": intercepts, "nu": nu });
    emit(&envelope("newton-number", cli.seed, None, result), cli.out.as_deref())?;
    Ok(true)
}

fn cmd_billiard_step(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    let sc: PointScenario = scenario::load(path)?;
    let graph = scenario::graph_of(&sc.model)?;
    let a = DarbouxPoint::from_slices(&sc.x, &sc.y)?;
    if a.dim() != graph.n() {
        anyhow::bail!("test point has {} components, model has {}", a.dim(), graph.n());
    }
    let mut params = sc.params()?;
    if let Some(tol) = cli.tol {
        params.residual_tol = tol;
    }
    let tol = params.residual_tol;
    let rep = match correspondents(graph, &a, &params) {
        Ok(rep) => rep,
        Err(e) => return fail(cli, "billiard-step", Some(tol), &e),
    };
    let pairs: Vec<_> = rep
        .pairs
        .iter()
        .map(|p| {
            json!({
                "a": p.a,
                "b": p.b,
                "foot": p.foot,
                "q": p.frame.q().as_slice(),
                "t": p.frame.t().as_slice(),
            })
        })
        .collect();
    let result = json!({
        "pairs": pairs,
        "flagged_near_critical": rep.flagged_near_critical,
        "all_starts_diverged": rep.all_starts_diverged,
    });
    emit(&envelope("billiard-step", cli.seed, Some(tol), result), cli.out.as_deref())?;
    if let Some(csv) = &cli.csv {
        let n = graph.n();
        let mut header = Vec::new();
        for tag in ["q", "t", "a_x", "a_y", "b_x", "b_y"] {
            header.extend((1..=n).map(|i| format!("{tag}{i}")));
        }
        let rows: Vec<Vec<String>> = rep
            .pairs
            .iter()
            .map(|p| {
                p.frame
                    .q()
                    .iter()
                    .chain(p.frame.t().iter())
                    .chain(p.a.x().iter())
                    .chain(p.a.y().iter())
                    .chain(p.b.x().iter())
                    .chain(p.b.y().iter())
                    .map(|&v| cell(v))
                    .collect()
            })
            .collect();
        write_csv(csv, &header, &rows)?;
    }
    Ok(!rep.all_starts_diverged)
}

fn cmd_orbit_search(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    let sc: OrbitScenario = scenario::load(path)?;
    let product = scenario::product_of(&sc.model)?;
    if sc.k < 3 || sc.k % 2 == 0 {
        anyhow::bail!("period must be odd and at least 3, got {}", sc.k);
    }
    if sc.starts == 0 {
        anyhow::bail!("starts must be positive");
    }
    let tol = cli.tol.unwrap_or(ORBIT_VERIFY_TOL);
    let orbits = match find_periodic_orbits(product, sc.k, sc.starts, cli.seed) {
        Ok(orbits) => orbits,
        Err(e) => return fail(cli, "orbit-search", Some(tol), &e),
    };
    let mut records = Vec::with_capacity(orbits.len());
    let mut verification = Vec::with_capacity(orbits.len());
    let mut reports = Vec::with_capacity(orbits.len());
    for orb in &orbits {
        let ver = match orbit_verify(product, orb, tol) {
            Ok(ver) => ver,
            Err(e) => return fail(cli, "orbit-search", Some(tol), &e),
        };
        records.push(json!({
            "k": orb.k,
            "action": orb.action,
            "residual": orb.residual,
            "margin": orb.margin,
            "grad_norm": orb.grad_norm,
            "is_max": orb.is_max,
            "angles": orb.angles,
            "midpoints": orb.midpoints,
            "z": orb.points,
        }));
        // Saddle-type critical points can reconstruct to a point inside a
        // factor curve; their stepping defect is then infinite and shows up
        // as null in the JSON.
        verification.push(json!({
            "midpoint_defect": ver.midpoint_defect,
            "tangency_defect": ver.tangency_defect,
            "stepping_defect": ver.stepping_defect,
            "margin": ver.margin,
            "backtracking": ver.backtracking,
            "max_defect": ver.max_defect,
            "pass": ver.pass,
        }));
        reports.push(ver);
    }
    let verified = reports.iter().filter(|r| r.pass).count();
    let ok = verified > 0;
    let result = json!({
        "k": sc.k,
        "starts": sc.starts,
        "found": orbits.len(),
        "verified": verified,
        "orbits": records,
        "verification": verification,
    });
    emit(&envelope("orbit-search", cli.seed, Some(tol), result), cli.out.as_deref())?;
    if let Some(csv) = &cli.csv {
        let header: Vec<String> = [
            "k", "action", "residual", "margin", "grad_norm", "is_max", "max_defect", "pass",
        ]
        .map(String::from)
        .to_vec();
        let rows: Vec<Vec<String>> = orbits
            .iter()
            .zip(&reports)
            .map(|(orb, ver)| {
                vec![
                    orb.k.to_string(),
                    cell(orb.action),
                    cell(orb.residual),
                    cell(orb.margin),
                    cell(orb.grad_norm),
                    orb.is_max.to_string(),
                    cell(ver.max_defect),
                    ver.pass.to_string(),
                ]
            })
            .collect();
        write_csv(csv, &header, &rows)?;
    }
    Ok(ok)
}

fn cmd_planar_step(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    no_csv(cli, "planar step")?;
    let sc: PlanarStepScenario = scenario::load(path)?;
    let a = Vector2::new(sc.point[0], sc.point[1]);
    let step = match planar_outer_step(&sc.curve, a, sc.branch.into()) {
        Ok(step) => step,
        Err(e) => return fail(cli, "planar step", cli.tol, &e),
    };
    let result = json!({
        "b": [step.b.x, step.b.y],
        "theta": step.theta,
        "residual": step.residual,
    });
    emit(&envelope("planar step", cli.seed, cli.tol, result), cli.out.as_deref())?;
    Ok(true)
}

fn cmd_planar_periodic(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    let sc: PlanarPeriodicScenario = scenario::load(path)?;
    if sc.k < 3 || sc.k % 2 == 0 {
        anyhow::bail!("period must be odd and at least 3, got {}", sc.k);
    }
    let orbits = match find_planar_periodic(&sc.curve, sc.k, cli.seed) {
        Ok(orbits) => orbits,
        Err(e) => return fail(cli, "planar periodic", cli.tol, &e),
    };
    let records: Vec<_> = orbits
        .iter()
        .map(|orb| {
            json!({
                "k": orb.k,
                "thetas": orb.thetas,
                "action": orb.action,
                "grad_norm": orb.grad_norm,
                "step_defect": orb.step_defect,
                "midpoints": orb.midpoints.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
                "points": orb.points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let ok = !orbits.is_empty();
    let result = json!({
        "k": sc.k,
        "found": orbits.len(),
        "orbits": records,
    });
    emit(&envelope("planar periodic", cli.seed, cli.tol, result), cli.out.as_deref())?;
    if let Some(csv) = &cli.csv {
        let mut header: Vec<String> = ["k", "action", "grad_norm", "step_defect"]
            .map(String::from)
            .to_vec();
        header.extend((1..=sc.k).map(|i| format!("theta{i}")));
        let rows: Vec<Vec<String>> = orbits
            .iter()
            .map(|orb| {
                let mut row = vec![
                    orb.k.to_string(),
                    cell(orb.action),
                    cell(orb.grad_norm),
                    cell(orb.step_defect),
                ];
                row.extend(orb.thetas.iter().map(|&t| cell(t)));
                row
            })
            .collect();
        write_csv(csv, &header, &rows)?;
    }
    Ok(ok)
}

fn cmd_tractrix(cli: &Cli, step: f64) -> anyhow::Result<bool> {
    no_csv(cli, "planar tractrix")?;
    if !step.is_finite() || !(step > 0.0) {
        anyhow::bail!("step must be positive and finite");
    }
    let tol = cli.tol.unwrap_or(TRACTRIX_TOL);
    let area = match tractrix_area(step) {
        Ok(area) => area,
        Err(e) => return fail(cli, "planar tractrix", Some(tol), &e),
    };
    let target = std::f64::consts::FRAC_PI_2;
    let difference = (area - target).abs();
    let pass = difference <= tol;
    let result = json!({
        "area": area,
        "target": "pi/2",
        "difference": difference,
        "pass": pass,
    });
    emit(&envelope("planar tractrix", cli.seed, Some(tol), result), cli.out.as_deref())?;
    Ok(pass)
}

fn cmd_mamikon(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    no_csv(cli, "planar mamikon")?;
    let sc: MamikonScenario = scenario::load(path)?;
    let tol = cli.tol.unwrap_or(MAMIKON_TOL);
    let (sweep_area, cluster_area) = match mamikon_area_check(&sc.curve, &sc.region, sc.samples, cli.seed)
    {
        Ok(areas) => areas,
        Err(e) => return fail(cli, "planar mamikon", Some(tol), &e),
    };
    let scale = sweep_area.abs().max(cluster_area.abs()).max(f64::MIN_POSITIVE);
    let relative_gap = (sweep_area - cluster_area).abs() / scale;
    let pass = relative_gap <= tol;
    let result = json!({
        "sweep_area": sweep_area,
        "cluster_area": cluster_area,
        "relative_gap": relative_gap,
        "samples": sc.samples,
        "pass": pass,
    });
    emit(&envelope("planar mamikon", cli.seed, Some(tol), result), cli.out.as_deref())?;
    Ok(pass)
}

fn cmd_verify_suite(cli: &Cli) -> anyhow::Result<bool> {
    no_csv(cli, "verify-suite")?;
    let checks = suite::run(cli.seed);
    let mut failed = 0usize;
    for c in &checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {}: {}", c.name, c.detail);
        if !c.pass {
            failed += 1;
        }
    }
    let records: Vec<_> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
        .collect();
    let result = json!({
        "checks": records,
        "passed": checks.len() - failed,
        "failed": failed,
    });
    emit(&envelope("verify-suite", cli.seed, None, result), cli.out.as_deref())?;
    Ok(failed == 0)
}
