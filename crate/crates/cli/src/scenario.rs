//! Scenario file formats, one struct per subcommand. Unknown fields are
//! rejected so a typo fails loudly instead of silently falling back to a
//! default.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use lagsweep::{
    Branch, CountParams, LagrangianGraph, LagrangianModel, PlaneCurve, ProductCurveLagrangian,
    SearchBox, SweepRegion,
};

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

/// Random-frame pullback verification on a graph model.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepScenario {
    pub model: LagrangianModel,
    #[serde(default = "default_frames")]
    pub frames: usize,
    /// Half-width of the sampling cube for both q and t entries.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_frames() -> usize {
    50
}

fn default_radius() -> f64 {
    1.2
}

/// A test point against a graph model, with optional search-box and grid
/// overrides. Shared by the tangency counter and the correspondence step.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointScenario {
    pub model: LagrangianModel,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(rename = "box", default)]
    pub search_box: Option<BoxSpec>,
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl PointScenario {
    /// Counting knobs: library defaults, with the box and grid overridden
    /// where the scenario says so.
    pub fn params(&self) -> anyhow::Result<CountParams> {
        let n = self.model.n();
        let search_box = match &self.search_box {
            Some(spec) => {
                if spec.lo.len() != n || spec.hi.len() != n {
                    anyhow::bail!(
                        "search box must have {n} entries per bound, got {} and {}",
                        spec.lo.len(),
                        spec.hi.len()
                    );
                }
                SearchBox::new(
                    nalgebra::DVector::from_row_slice(&spec.lo),
                    nalgebra::DVector::from_row_slice(&spec.hi),
                )?
            }
            None => SearchBox::symmetric(n, 1.0)?,
        };
        let mut params = CountParams::with_box(search_box);
        if let Some(grid) = self.grid {
            params.grid = grid;
        }
        Ok(params)
    }
}

pub fn graph_of(model: &LagrangianModel) -> anyhow::Result<&LagrangianGraph> {
    match model {
        LagrangianModel::Graph(g) => Ok(g),
        LagrangianModel::Product(_) => anyhow::bail!("this command needs a graph model"),
    }
}

pub fn product_of(model: &LagrangianModel) -> anyhow::Result<&ProductCurveLagrangian> {
    match model {
        LagrangianModel::Product(p) => Ok(p),
        LagrangianModel::Graph(_) => anyhow::bail!("this command needs a product model"),
    }
}

/// Periodic-orbit search on a product model.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitScenario {
    pub model: LagrangianModel,
    pub k: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    200
}

/// One planar outer-billiard step.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarStepScenario {
    pub curve: PlaneCurve,
    pub point: [f64; 2],
    #[serde(default)]
    pub branch: BranchSpec,
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
pub enum BranchSpec {
    #[default]
    Forward,
    Backward,
}

impl From<BranchSpec> for Branch {
    fn from(b: BranchSpec) -> Branch {
        match b {
            BranchSpec::Forward => Branch::Forward,
            BranchSpec::Backward => Branch::Backward,
        }
    }
}

/// Planar periodic-orbit search.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarPeriodicScenario {
    pub curve: PlaneCurve,
    pub k: usize,
}

/// Monte Carlo comparison of a tangent sweep with its tangent cluster.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MamikonScenario {
    pub curve: PlaneCurve,
    pub region: SweepRegion,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1_000_000
}
