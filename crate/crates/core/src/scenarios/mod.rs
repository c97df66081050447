//! Laboratory-scale experiments: configuration, drivers and their run records.
//!
//! Every scenario reads a parameter table whose defaults reproduce the
//! reference setup, runs in its own scaled units and reports positions,
//! times and densities back in SI.

mod asym;
mod c60;
mod epr;
mod stern_gerlach;
mod two_body;

pub use asym::{asym_pattern, run_asym_interference, AsymParams, Hypothesis};
pub use c60::{run_c60, C60Params};
pub use epr::{run_epr_b, EprParams};
pub use stern_gerlach::{run_stern_gerlach, SternGerlachParams};
pub use two_body::{run_two_body, TwoBodyParams};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fields::{Axis, Grid};
use crate::trajectories::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    TwoBody,
    C60DoubleSlit,
    SternGerlach,
    EprB,
    AsymInterference,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::TwoBody,
        ScenarioId::C60DoubleSlit,
        ScenarioId::SternGerlach,
        ScenarioId::EprB,
        ScenarioId::AsymInterference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::TwoBody => "two_body",
            ScenarioId::C60DoubleSlit => "c60_double_slit",
            ScenarioId::SternGerlach => "stern_gerlach",
            ScenarioId::EprB => "epr_b",
            ScenarioId::AsymInterference => "asym_interference",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ScenarioId::TwoBody => "two bodies in gravity with a harmonic bond; factorization check",
            ScenarioId::C60DoubleSlit => "C60 two-slit interference with pilot-wave trajectories",
            ScenarioId::SternGerlach => "silver atom in a Stern-Gerlach magnet with spin tracking",
            ScenarioId::EprB => "spin-singlet pair measured sequentially; correlations and CHSH",
            ScenarioId::AsymInterference => "standard vs. extension-veto hypothesis for asymmetric apertures",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScenarioParams {
    TwoBody(TwoBodyParams),
    C60DoubleSlit(C60Params),
    SternGerlach(SternGerlachParams),
    EprB(EprParams),
    AsymInterference(AsymParams),
}

impl ScenarioParams {
    pub fn defaults(id: ScenarioId) -> Self {
        match id {
            ScenarioId::TwoBody => ScenarioParams::TwoBody(Default::default()),
            ScenarioId::C60DoubleSlit => ScenarioParams::C60DoubleSlit(Default::default()),
            ScenarioId::SternGerlach => ScenarioParams::SternGerlach(Default::default()),
            ScenarioId::EprB => ScenarioParams::EprB(Default::default()),
            ScenarioId::AsymInterference => ScenarioParams::AsymInterference(Default::default()),
        }
    }

    pub fn id(&self) -> ScenarioId {
        match self {
            ScenarioParams::TwoBody(_) => ScenarioId::TwoBody,
            ScenarioParams::C60DoubleSlit(_) => ScenarioId::C60DoubleSlit,
            ScenarioParams::SternGerlach(_) => ScenarioId::SternGerlach,
            ScenarioParams::EprB(_) => ScenarioId::EprB,
            ScenarioParams::AsymInterference(_) => ScenarioId::AsymInterference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioParams::TwoBody(p) => p.validate(),
            ScenarioParams::C60DoubleSlit(p) => p.validate(),
            ScenarioParams::SternGerlach(p) => p.validate(),
            ScenarioParams::EprB(p) => p.validate(),
            ScenarioParams::AsymInterference(p) => p.validate(),
        }
    }
}

/// Which artifacts a run writes besides statistics and the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSelection {
    pub frames: bool,
    pub pgm: bool,
    pub trajectories: bool,
    pub endpoints: bool,
    pub tables: bool,
}

impl Default for OutputSelection {
    fn default() -> Self {
        Self { frames: true, pgm: true, trajectories: true, endpoints: true, tables: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output: OutputSelection,
    pub params: ScenarioParams,
}

impl ScenarioConfig {
    pub fn defaults(id: ScenarioId) -> Self {
        Self { seed: 0, output: OutputSelection::default(), params: ScenarioParams::defaults(id) }
    }

    pub fn id(&self) -> ScenarioId {
        self.params.id()
    }
}

/// One scalar result. `uncertainty` is a one-sigma statistical error where
/// the quantity is estimated from samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Stat {
    pub key: String,
    pub value: f64,
    pub uncertainty: Option<f64>,
}

/// Density snapshot in SI units, normalized to unit integral.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub name: String,
    pub t: f64,
    pub grid: Grid,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub stats: Vec<Stat>,
    pub frames: Vec<DensityFrame>,
    /// Recorded paths in SI units.
    pub trajectories: Vec<Trajectory>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub(crate) fn new(scenario: ScenarioId, seed: u64) -> Self {
        Self {
            scenario,
            seed,
            stats: Vec::new(),
            frames: Vec::new(),
            trajectories: Vec::new(),
            tables: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn stat(&self, key: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.key == key)
    }

    /// Value of a stat; panics if the key is missing.
    pub fn value(&self, key: &str) -> f64 {
        self.stat(key).unwrap_or_else(|| panic!("no stat `{key}`")).value
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub(crate) fn push(&mut self, key: &str, value: f64) {
        self.stats.push(Stat { key: key.into(), value, uncertainty: None });
    }

    pub(crate) fn push_err(&mut self, key: &str, value: f64, err: f64) {
        self.stats.push(Stat { key: key.into(), value, uncertainty: Some(err) });
    }

    pub(crate) fn table_from(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<f64>>) {
        self.tables.push(Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        });
    }
}

/// Run any scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<RunRecord> {
    cfg.params.validate()?;
    match &cfg.params {
        ScenarioParams::TwoBody(p) => run_two_body(p, cfg.seed),
        ScenarioParams::C60DoubleSlit(p) => run_c60(p, cfg.seed),
        ScenarioParams::SternGerlach(p) => run_stern_gerlach(p, cfg.seed),
        ScenarioParams::EprB(p) => run_epr_b(p, cfg.seed),
        ScenarioParams::AsymInterference(p) => run_asym_interference(p, cfg.seed),
    }
}

// validation helpers

pub(crate) fn invalid(key: &str, bound: impl Into<String>, value: impl std::fmt::Display) -> SimError {
    SimError::ConfigValidation { key: key.into(), bound: bound.into(), value: value.to_string() }
}

pub(crate) fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "> 0", v))
    }
}

pub(crate) fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, ">= 0", v))
    }
}

pub(crate) fn within(key: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(invalid(key, format!("in [{lo}, {hi}]"), v))
    }
}

pub(crate) fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(key, format!(">= {min}"), v))
    }
}

/// Grid in SI from a grid in reference lengths.
pub(crate) fn grid_to_si(grid: &Grid, length: f64) -> Grid {
    let axes = grid
        .axes()
        .iter()
        .map(|a| Axis { n: a.n, origin: a.origin * length, spacing: a.spacing * length })
        .collect();
    Grid::from_axes(axes).expect("scaled grid stays valid")
}

/// Density frame in SI with unit integral.
pub(crate) fn si_frame(name: String, t: f64, grid: &Grid, rho: &[f64], length: f64) -> DensityFrame {
    let g = grid_to_si(grid, length);
    let total: f64 = rho.iter().sum::<f64>() * g.cell_volume();
    DensityFrame { name, t, density: rho.iter().map(|r| r / total).collect(), grid: g }
}

pub(crate) fn trajectory_to_si(mut tr: Trajectory, length: f64, time: f64) -> Trajectory {
    tr.times.iter_mut().for_each(|t| *t *= time);
    tr.positions.iter_mut().flatten().for_each(|x| *x *= length);
    tr.aborted_at = tr.aborted_at.map(|t| t * time);
    tr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ScenarioId::ALL {
            assert_eq!(ScenarioId::from_name(id.name()), Some(id));
            assert_eq!(ScenarioParams::defaults(id).id(), id);
            ScenarioParams::defaults(id).validate().unwrap();
        }
        assert_eq!(ScenarioId::from_name("nope"), None);
    }

    #[test]
    fn validation_names_the_bound() {
        let e = positive("mass", -1.0).unwrap_err();
        assert_eq!(e.kind(), "config_validation");
        assert!(e.to_string().contains("mass") && e.to_string().contains("> 0"));
    }
}
