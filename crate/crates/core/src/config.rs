//! Config files for `plan` and `bench`.
//!
//! Both use TOML. Unknown keys are rejected. Values given on the command line
//! replace values from a file, which replace the defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::ExperimentConfig;
use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, KernelSpec};
use crate::objective::ReduceConfig;
use crate::optimizer::OptimizerConfig;

/// Settings of a single `plan` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub lambda: f64,
    pub beta: f64,
    pub eps: f64,
    pub n_max: usize,
    pub limit_check_samples: usize,
    pub stall_tol: f64,
    /// Rows of the exported trajectory CSV.
    pub trajectory_samples: usize,
    pub reduce: ReduceConfig,
    pub kernel: KernelConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            lambda: o.lambda,
            beta: o.beta,
            eps: o.eps,
            n_max: o.n_max,
            limit_check_samples: o.limit_check_samples,
            stall_tol: o.stall_tol,
            trajectory_samples: 200,
            reduce: o.reduce,
            kernel: KernelConfig::default(),
        }
    }
}

impl PlanConfig {
    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            lambda: self.lambda,
            beta: self.beta,
            eps: self.eps,
            n_max: self.n_max,
            reduce: self.reduce.clone(),
            limit_check_samples: self.limit_check_samples,
            stall_tol: self.stall_tol,
        }
    }

    /// Validate everything and build the kernel for `dof` joints.
    pub fn validate(&self, dof: usize) -> Result<(OptimizerConfig, KernelSpec)> {
        let opt = self.optimizer();
        opt.validate()?;
        if self.trajectory_samples < 2 {
            return Err(Error::Config("trajectory_samples must be at least 2".into()));
        }
        Ok((opt, self.kernel.build(dof)?))
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

/// Read and parse a config file; `None` gives the defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => parse(&crate::io::read_to_string(p)?, &p.display().to_string()),
    }
}

pub fn load_plan(path: Option<&Path>) -> Result<PlanConfig> {
    load(path)
}

pub fn load_experiment(path: Option<&Path>) -> Result<ExperimentConfig> {
    load(path)
}
