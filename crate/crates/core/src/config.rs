//! Run configuration read from one JSON file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::blockperc::BlockParams;
use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::lattice::{Site, MAX_DIM};
use crate::mc::McConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Shape,
    Rates,
    Tails,
    Blocks,
    Duality,
    Section5,
    ReportAll,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::Shape,
        Experiment::Rates,
        Experiment::Tails,
        Experiment::Blocks,
        Experiment::Duality,
        Experiment::Section5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Shape => "shape",
            Experiment::Rates => "rates",
            Experiment::Tails => "tails",
            Experiment::Blocks => "blocks",
            Experiment::Duality => "duality",
            Experiment::Section5 => "section5",
            Experiment::ReportAll => "report-all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub initial: Vec<Vec<i32>>,
    pub t_end: f64,
    /// Replica index of the system that is logged.
    pub replica: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams { initial: vec![vec![0]], t_end: 10.0, replica: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeParams {
    pub times: Vec<f64>,
    pub eps: f64,
    /// `n` of the pilot blocks that fix the time constant.
    pub pilot_n: u32,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams { times: vec![10.0, 20.0, 40.0], eps: 0.5, pilot_n: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesParams {
    pub x: Vec<i32>,
    /// Row of the Legendre comparison besides the limit column.
    pub legendre_n: Option<u32>,
    pub pilot_n: u32,
}

impl Default for RatesParams {
    fn default() -> Self {
        RatesParams { x: vec![1], legendre_n: None, pilot_n: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsParams {
    pub x: Vec<i32>,
    pub pilot_n: u32,
    pub progeny_x: Vec<i32>,
    pub progeny_times: Vec<f64>,
    /// Fixed threshold fraction; a pilot fits one when absent.
    pub theta_frac: Option<f64>,
    /// Pilot threshold is this fraction of the mean measure per unit time.
    pub theta_pilot_fraction: f64,
}

impl Default for TailsParams {
    fn default() -> Self {
        TailsParams {
            x: vec![1],
            pilot_n: 8,
            progeny_x: vec![1],
            progeny_times: vec![10.0, 20.0, 40.0],
            theta_frac: None,
            theta_pilot_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlocksExperimentParams {
    pub p_list: Vec<f64>,
    pub depth: usize,
    pub width: u32,
    pub fields: usize,
    /// Levels of the derived field built from the contact process, when
    /// block parameters are given.
    pub derived_depth: usize,
    pub derived_replicas: usize,
}

impl Default for BlocksExperimentParams {
    fn default() -> Self {
        BlocksExperimentParams { p_list: vec![0.5, 0.7, 0.9], depth: 20, width: 20, fields: 1000, derived_depth: 2, derived_replicas: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityParams {
    pub initial: Vec<Vec<i32>>,
    pub targets: Vec<Vec<i32>>,
    pub t: f64,
    pub radius: u32,
    pub replicas: usize,
}

impl Default for DualityParams {
    fn default() -> Self {
        DualityParams { initial: vec![vec![0]], targets: vec![vec![0], vec![1], vec![2]], t: 2.0, radius: 6, replicas: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Section5Params {
    pub s: f64,
    pub t: f64,
    pub norms: Vec<u32>,
    pub replicas: usize,
}

impl Default for Section5Params {
    fn default() -> Self {
        Section5Params { s: 1.0, t: 2.0, norms: vec![1, 2, 3], replicas: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiments: Vec<Experiment>,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub environment_seed: u64,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub block_params: Option<BlockParams>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub shape: ShapeParams,
    #[serde(default)]
    pub rates: RatesParams,
    #[serde(default)]
    pub tails: TailsParams,
    #[serde(default)]
    pub blocks: BlocksExperimentParams,
    #[serde(default)]
    pub duality: DualityParams,
    #[serde(default)]
    pub section5: Section5Params,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Site from config coordinates; missing trailing coordinates are zero.
pub fn site_of(coords: &[i32], dim: usize) -> Result<Site> {
    if coords.len() > dim || dim > MAX_DIM {
        return Err(Error::InvalidSpec(format!("site {coords:?} has more than {dim} coordinates")));
    }
    Ok(Site::new(coords))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Experiments to run, in a fixed order; `report-all` expands to all.
    pub fn planned(&self) -> Vec<Experiment> {
        let mut v: Vec<Experiment> = if self.experiments.contains(&Experiment::ReportAll) {
            Experiment::ALL.to_vec()
        } else {
            self.experiments.clone()
        };
        v.sort();
        v.dedup();
        v
    }

    /// Every invariant violation of the file; nothing is simulated.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self.environment.violations().into_iter().map(|m| format!("environment: {m}")).collect();
        out.extend(self.mc.violations().into_iter().map(|m| format!("mc: {m}")));
        if let Some(b) = &self.block_params {
            out.extend(b.violations().into_iter().map(|m| format!("block_params: {m}")));
        }
        let dim = self.environment.dim;
        let mut site = |what: &str, c: &[i32]| {
            if c.len() > dim {
                out.push(format!("{what}: site {c:?} has more than {dim} coordinates"));
            }
        };
        for c in &self.simulate.initial {
            site("simulate.initial", c);
        }
        site("rates.x", &self.rates.x);
        site("tails.x", &self.tails.x);
        site("tails.progeny_x", &self.tails.progeny_x);
        for c in self.duality.initial.iter().chain(&self.duality.targets) {
            site("duality", c);
        }
        let t_max = self.mc.t_max;
        let limit = t_max - self.mc.progeny_window;
        let planned = self.planned();
        let wants = |e: Experiment| planned.contains(&e);
        if wants(Experiment::Simulate) && !(self.simulate.t_end >= 0.0 && self.simulate.t_end <= t_max) {
            out.push(format!("simulate.t_end = {} outside [0, t_max]", self.simulate.t_end));
        }
        if wants(Experiment::Shape) {
            if !strictly_increasing(&self.shape.times) || self.shape.times.iter().any(|&t| !(t > 0.0 && t <= limit)) {
                out.push(format!("shape.times must be increasing in (0, {limit}]"));
            }
            if !(self.shape.eps > 0.0 && self.shape.eps < 1.0) {
                out.push(format!("shape.eps = {} outside (0, 1)", self.shape.eps));
            }
        }
        if wants(Experiment::Tails) {
            let h = self.mc.progeny_horizon;
            if !strictly_increasing(&self.tails.progeny_times) || self.tails.progeny_times.iter().any(|&t| !(t >= 0.0 && t < h)) {
                out.push(format!("tails.progeny_times must be increasing in [0, {h})"));
            }
            if self.mc.eps_list.iter().any(|&e| e >= 1.0) {
                out.push("eps_list entries must be below 1 for lower deviations".into());
            }
        }
        if wants(Experiment::Blocks) {
            let b = &self.blocks;
            if b.p_list.iter().any(|p| !(0.0..=1.0).contains(p)) {
                out.push("blocks.p_list entries must lie in [0, 1]".into());
            }
            if b.depth < 1 || b.width < 1 {
                out.push("blocks.depth and blocks.width must be positive".into());
            }
        }
        if wants(Experiment::Duality) {
            let d = &self.duality;
            if !(d.t >= 0.0 && d.t <= t_max) {
                out.push(format!("duality.t = {} outside [0, t_max]", d.t));
            }
            if d.replicas < 1 || d.radius < 1 {
                out.push("duality.replicas and duality.radius must be positive".into());
            }
        }
        if wants(Experiment::Section5) {
            let s = &self.section5;
            if !(0.0 < s.s && s.s < s.t) {
                out.push(format!("section5: need 0 < s < t, got s = {}, t = {}", s.s, s.t));
            }
            if s.replicas < 1 {
                out.push("section5.replicas must be positive".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v.join("; ")))
        }
    }
}
