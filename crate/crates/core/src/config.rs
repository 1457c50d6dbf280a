//! Run configuration shared by the command-line driver and the acceptance
//! suite. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expand::ExpandConfig;
use crate::field::{random_divfree, taylor_green, GridSpec, SpectralVectorField};
use crate::freqkernel::TauQuadrature;
use crate::hierarchy::SimplexQuadrature;
use crate::refsolver::SolverConfig;

/// Largest grid accepted by any subcommand.
pub const MAX_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    TaylorGreen { amplitude: f64 },
    Random { seed: u64, decay: f64, norm: f64 },
}

impl InitialData {
    pub fn build(&self, grid: GridSpec) -> Result<SpectralVectorField> {
        match *self {
            InitialData::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
            InitialData::Random { seed, decay, norm } => random_divfree(grid, seed, decay, norm),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialData::TaylorGreen { amplitude } => format!("taylor_green(A={amplitude})"),
            InitialData::Random { seed, .. } => format!("random(seed={seed})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    /// Criteria to run, 1..=9.
    pub criteria: Vec<u8>,
    /// Random fields for the operator properties.
    pub operator_fields: usize,
    /// Random fields for the consistency property.
    pub consistency_fields: usize,
    /// Times of the remainder probe.
    pub probe_times: Vec<f64>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            criteria: (1..=9).collect(),
            operator_fields: 100,
            consistency_fields: 20,
            probe_times: vec![0.0125, 0.025, 0.05, 0.1, 0.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid_n: usize,
    pub dealias: bool,
    /// Seed for every random draw not fixed by `initial`.
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub initial: InitialData,
    /// Additional initial data for the solver and series fixtures.
    pub fixtures: Vec<InitialData>,
    pub times: Vec<f64>,
    pub series_max_order: usize,
    pub quadrature: SimplexQuadrature,
    pub tau: TauQuadrature,
    pub solver: SolverConfig,
    pub expand: ExpandConfig,
    pub verify: VerifySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_n: 16,
            dealias: true,
            seed: 1,
            jobs: 0,
            out_dir: PathBuf::from("out"),
            initial: InitialData::TaylorGreen { amplitude: 0.1 },
            fixtures: vec![
                InitialData::Random {
                    seed: 11,
                    decay: 3.0,
                    norm: 0.8,
                },
                InitialData::Random {
                    seed: 12,
                    decay: 4.0,
                    norm: 0.8,
                },
            ],
            times: vec![0.02, 0.05],
            series_max_order: 5,
            quadrature: SimplexQuadrature::default(),
            tau: TauQuadrature::default(),
            solver: SolverConfig::default(),
            expand: ExpandConfig::default(),
            verify: VerifySettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_dealias(self.grid_n, self.dealias)
    }

    /// All fixtures, the primary initial datum first.
    pub fn all_fixtures(&self) -> Vec<InitialData> {
        let mut v = vec![self.initial];
        v.extend(self.fixtures.iter().copied());
        v
    }

    /// Checks every cap before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.grid_n > MAX_GRID {
            return Err(Error::CapExceeded {
                what: "grid size",
                value: self.grid_n as u64,
                cap: MAX_GRID as u64,
            });
        }
        self.grid()?;
        if self.times.is_empty() {
            return Err(Error::Config("time list is empty".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!(
                "times must be positive and finite, got {t}"
            )));
        }
        if self.series_max_order > self.expand.max_tree_vertices {
            return Err(Error::CapExceeded {
                what: "series order",
                value: self.series_max_order as u64,
                cap: self.expand.max_tree_vertices as u64,
            });
        }
        if self.expand.max_tree_vertices > crate::treecomb::TreeCaps::default().max_tree_vertices {
            return Err(Error::CapExceeded {
                what: "tree vertices",
                value: self.expand.max_tree_vertices as u64,
                cap: crate::treecomb::TreeCaps::default().max_tree_vertices as u64,
            });
        }
        self.quadrature.validate()?;
        self.tau.validate()?;
        self.solver.steps_for(self.times[0])?;
        for f in self.all_fixtures() {
            match f {
                InitialData::TaylorGreen { amplitude } if !(amplitude > 0.0) => {
                    return Err(Error::Config(
                        "Taylor–Green amplitude must be positive".into(),
                    ))
                }
                InitialData::Random { decay, norm, .. } if !(decay > 2.5) || !(norm > 0.0) => {
                    return Err(Error::Config(
                        "random data needs decay > 2.5 and norm > 0".into(),
                    ))
                }
                _ => {}
            }
        }
        if let Some(c) = self.verify.criteria.iter().find(|c| !(1..=9).contains(*c)) {
            return Err(Error::Config(format!("unknown criterion {c}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("grid_n = 16\ntolerence = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[tau]\nnodes = 3\n").is_err());
        assert!(RunConfig::from_toml("times = []\n").is_err());
        assert!(RunConfig::from_toml("grid_n = 256\n").is_err());
        assert!(RunConfig::from_toml("series_max_order = 9\n").is_err());
        let ok = RunConfig::from_toml(
            "grid_n = 8\n[initial]\nkind = \"random\"\nseed = 3\ndecay = 3.0\nnorm = 1.0\n",
        )
        .unwrap();
        assert_eq!(ok.grid_n, 8);
    }
}
