//! Solved-model artifacts: JSON files holding the configuration, solver
//! settings, values and decisions. They contain no timings, so solving the
//! same configuration twice gives byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::SystemConfig;
use crate::solver::SolveReport;
use crate::solver::{PolicyTable, Solution, SolveOptions};
use crate::special_case::{ReducedModel, ReducedSolution, ReducedValueFunction};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub reference: usize,
    pub damping: f64,
}

impl From<&SolveOptions<f64>> for SolverSettings {
    fn from(o: &SolveOptions<f64>) -> Self {
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            reference: o.reference,
            damping: o.damping,
        }
    }
}

impl From<&SolverSettings> for SolveOptions<f64> {
    fn from(s: &SolverSettings) -> Self {
        SolveOptions::default()
            .with_tol(s.tol)
            .with_max_iter(s.max_iter)
            .with_reference(s.reference)
            .with_damping(s.damping)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullArtifact {
    pub version: u32,
    pub config: serde_json::Value,
    pub solver: SolverSettings,
    pub theta: f64,
    pub iterations: usize,
    pub final_span: f64,
    /// Relative values in state-index order.
    pub values: Vec<f64>,
    /// Action index per state.
    pub policy: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedArtifact {
    pub version: u32,
    pub config: serde_json::Value,
    pub solver: SolverSettings,
    pub theta: f64,
    pub iterations: usize,
    pub final_span: f64,
    /// Grouped total costs, ascending.
    pub cost_levels: Vec<f64>,
    /// Indexed by `(dest_aoi − 1) · n_cost_levels + level`.
    pub values: Vec<f64>,
    pub transmit: Vec<bool>,
    pub margin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Artifact {
    Full(FullArtifact),
    Reduced(ReducedArtifact),
}

fn config_value(cfg: &SystemConfig<f64>) -> Result<serde_json::Value> {
    Ok(serde_json::from_str(&cfg.to_json_string()?)?)
}

fn report_of(theta: f64, iterations: usize, final_span: f64) -> SolveReport {
    SolveReport {
        iterations,
        final_span,
        theta,
        wall_time: Default::default(),
        span_increases: 0,
    }
}

impl FullArtifact {
    pub fn new(
        cfg: &SystemConfig<f64>,
        opts: &SolveOptions<f64>,
        solution: &Solution<f64>,
    ) -> Result<Self> {
        Ok(Self {
            version: ARTIFACT_VERSION,
            config: config_value(cfg)?,
            solver: opts.into(),
            theta: solution.value.theta,
            iterations: solution.report.iterations,
            final_span: solution.report.final_span,
            values: solution.value.v.clone(),
            policy: solution.policy.as_slice().to_vec(),
        })
    }

    pub fn config(&self) -> Result<SystemConfig<f64>> {
        SystemConfig::from_json_str(&self.config.to_string())
    }

    pub fn policy_table(&self) -> PolicyTable {
        PolicyTable::new(self.policy.clone())
    }

    /// Rebuilds the kernel and checks the stored vectors against it.
    pub fn kernel(&self) -> Result<Kernel<f64>> {
        let kernel = Kernel::new(&self.config()?)?;
        let n = kernel.space().len();
        for len in [self.values.len(), self.policy.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(&a) = self
            .policy
            .iter()
            .find(|&&a| a as usize >= kernel.actions().len())
        {
            return Err(Error::validation(
                "policy",
                format!("action {a} out of range"),
            ));
        }
        Ok(kernel)
    }

    pub fn solution(&self) -> Solution<f64> {
        Solution {
            value: crate::solver::ValueFunction {
                v: self.values.clone(),
                theta: self.theta,
            },
            policy: self.policy_table(),
            report: report_of(self.theta, self.iterations, self.final_span),
        }
    }
}

impl ReducedArtifact {
    pub fn new(
        cfg: &SystemConfig<f64>,
        opts: &SolveOptions<f64>,
        model: &ReducedModel<f64>,
        solution: &ReducedSolution<f64>,
    ) -> Result<Self> {
        Ok(Self {
            version: ARTIFACT_VERSION,
            config: config_value(cfg)?,
            solver: opts.into(),
            theta: solution.value.theta,
            iterations: solution.report.iterations,
            final_span: solution.report.final_span,
            cost_levels: model.ch_values().to_vec(),
            values: solution.value.v.clone(),
            transmit: solution.transmit.clone(),
            margin: solution.margin.clone(),
        })
    }

    pub fn config(&self) -> Result<SystemConfig<f64>> {
        SystemConfig::from_json_str(&self.config.to_string())
    }

    /// Rebuilds the reduced model and checks the stored vectors against it.
    pub fn model(&self) -> Result<ReducedModel<f64>> {
        let model = crate::special_case::build_reduced_model(&self.config()?)?;
        let n = model.len();
        for len in [self.values.len(), self.transmit.len(), self.margin.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(model)
    }

    pub fn solution(&self) -> ReducedSolution<f64> {
        ReducedSolution {
            value: ReducedValueFunction {
                v: self.values.clone(),
                theta: self.theta,
            },
            transmit: self.transmit.clone(),
            margin: self.margin.clone(),
            report: report_of(self.theta, self.iterations, self.final_span),
        }
    }
}

impl Artifact {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let artifact: Self = crate::model::deserialize_with_path(s)?;
        let version = match &artifact {
            Artifact::Full(a) => a.version,
            Artifact::Reduced(a) => a.version,
        };
        if version != ARTIFACT_VERSION {
            return Err(Error::validation(
                "version",
                format!("unsupported artifact version {version}"),
            ));
        }
        Ok(artifact)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, DeviceSpec};
    use crate::solver::relative_value_iteration;
    use crate::special_case::solve_reduced;

    fn small() -> SystemConfig<f64> {
        let ch = ChannelModel::uniform(vec![1.0, 2.0]).unwrap();
        SystemConfig::new(
            vec![
                DeviceSpec::type_i(0.6, vec![1.0, 0.5], ch.clone(), 3, 0.7),
                DeviceSpec::type_ii(0.3, vec![0.8, 0.4], ch.clone(), 0.7),
                DeviceSpec::type_ii(0.2, vec![1.2, 0.6], ch, 0.7),
            ],
            2,
            4,
        )
        .unwrap()
    }

    #[test]
    fn full_round_trip_is_exact() {
        let cfg = small();
        let opts = SolveOptions::default();
        let sol = relative_value_iteration(&Kernel::new(&cfg).unwrap(), &opts).unwrap();
        let art = Artifact::Full(FullArtifact::new(&cfg, &opts, &sol).unwrap());
        let text = art.to_json_string().unwrap();
        let back = Artifact::from_json_str(&text).unwrap();
        assert_eq!(back, art);
        assert_eq!(back.to_json_string().unwrap(), text);
        let Artifact::Full(full) = back else { panic!() };
        assert_eq!(full.kernel().unwrap().space().len(), sol.policy.len());
        assert_eq!(
            full.config().unwrap().to_json_string().unwrap(),
            cfg.to_json_string().unwrap()
        );
    }

    #[test]
    fn reduced_round_trip() {
        let ch = ChannelModel::uniform(vec![1.0, 2.0]).unwrap();
        let cfg = SystemConfig::new(
            vec![
                DeviceSpec::type_ii(0.3, vec![0.8, 0.4], ch.clone(), 1.0),
                DeviceSpec::type_ii(0.2, vec![1.2, 0.6], ch, 1.0),
            ],
            2,
            5,
        )
        .unwrap();
        let model = crate::special_case::build_reduced_model(&cfg).unwrap();
        let opts = SolveOptions::default();
        let sol = solve_reduced(&model, &opts).unwrap();
        let art = Artifact::Reduced(ReducedArtifact::new(&cfg, &opts, &model, &sol).unwrap());
        let back = Artifact::from_json_str(&art.to_json_string().unwrap()).unwrap();
        assert_eq!(back, art);
        let Artifact::Reduced(r) = back else { panic!() };
        assert_eq!(r.model().unwrap().len(), sol.transmit.len());
    }

    #[test]
    fn rejects_bad_version_and_sizes() {
        let cfg = small();
        let opts = SolveOptions::default().with_max_iter(100_000);
        let sol = relative_value_iteration(&Kernel::new(&cfg).unwrap(), &opts).unwrap();
        let mut full = FullArtifact::new(&cfg, &opts, &sol).unwrap();
        full.version = 9;
        let text = Artifact::Full(full.clone()).to_json_string().unwrap();
        assert!(Artifact::from_json_str(&text)
            .unwrap_err()
            .to_string()
            .contains("version"));
        full.version = ARTIFACT_VERSION;
        full.policy.pop();
        assert!(matches!(
            full.kernel(),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
