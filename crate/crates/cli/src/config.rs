//! TOML configuration with `[model]`, `[plan]` and `[output]` blocks.
//! Command-line flags override file values field by field.

use std::path::{Path, PathBuf};

use evt_suprema::experiments::{ExperimentPlan, GridPolicy, PickandsBudget};
use evt_suprema::model::{DriftSequence, ModelSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub hurst: Option<f64>,
    pub hurst_common: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma0: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub elevated_factor: Option<f64>,
    pub pickands: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBlock {
    pub n: Option<u64>,
    pub k: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub n_points: Option<usize>,
    pub g_mult: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub pickands_horizon: Option<f64>,
    pub pickands_n_points: Option<usize>,
    pub pickands_reps: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub json: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub plan: PlanBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

fn pick<T: Copy>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

impl ModelBlock {
    /// Field-wise override: values set in `over` win.
    pub fn merged(&self, over: &ModelBlock) -> ModelBlock {
        ModelBlock {
            hurst: pick(over.hurst, self.hurst),
            hurst_common: pick(over.hurst_common, self.hurst_common),
            beta: pick(over.beta, self.beta),
            sigma: pick(over.sigma, self.sigma),
            sigma0: pick(over.sigma0, self.sigma0),
            c: pick(over.c, self.c),
            p: pick(over.p, self.p),
            elevated_factor: pick(over.elevated_factor, self.elevated_factor),
            pickands: pick(over.pickands, self.pickands),
        }
    }

    pub fn to_model(&self) -> Result<ModelSpec, CliError> {
        let need = |v: Option<f64>, field: &str| v.ok_or_else(|| CliError::Validation(format!("missing model.{field}")));
        let model = ModelSpec {
            hurst: need(self.hurst, "hurst")?,
            hurst_common: need(self.hurst_common, "hurst_common")?,
            beta: need(self.beta, "beta")?,
            sigma: self.sigma.unwrap_or(1.0),
            sigma0: self.sigma0.unwrap_or(1.0),
            drifts: DriftSequence::thinned(self.c.unwrap_or(1.0), self.p.unwrap_or(1.0), self.elevated_factor.unwrap_or(1.5)),
            pickands: self.pickands,
        };
        model.validate()?;
        Ok(model)
    }
}

impl PlanBlock {
    pub fn merged(&self, over: &PlanBlock) -> PlanBlock {
        PlanBlock {
            n: pick(over.n, self.n),
            k: pick(over.k, self.k),
            reps: pick(over.reps, self.reps),
            seed: pick(over.seed, self.seed),
            n_points: pick(over.n_points, self.n_points),
            g_mult: pick(over.g_mult, self.g_mult),
            levels: over.levels.clone().or_else(|| self.levels.clone()),
            lambdas: over.lambdas.clone().or_else(|| self.lambdas.clone()),
            pickands_horizon: pick(over.pickands_horizon, self.pickands_horizon),
            pickands_n_points: pick(over.pickands_n_points, self.pickands_n_points),
            pickands_reps: pick(over.pickands_reps, self.pickands_reps),
        }
    }

    pub fn to_plan(&self, model: ModelSpec) -> Result<ExperimentPlan, CliError> {
        let grid = GridPolicy::default();
        let budget = PickandsBudget::default();
        let plan = ExperimentPlan {
            model,
            n: self.n.unwrap_or(4096),
            k: self.k.unwrap_or(1),
            reps: self.reps.unwrap_or(1000),
            grid: GridPolicy {
                n_points: self.n_points.unwrap_or(grid.n_points),
                g_mult: self.g_mult.unwrap_or(grid.g_mult),
            },
            levels: self.levels.clone().unwrap_or_else(|| vec![0.0]),
            lambdas: self.lambdas.clone().unwrap_or_else(|| vec![1.0, 2.0]),
            seed: self.seed.unwrap_or(0),
            retain_q: false,
            pickands_budget: PickandsBudget {
                horizon: self.pickands_horizon.unwrap_or(budget.horizon),
                n_points: self.pickands_n_points.unwrap_or(budget.n_points),
                reps: self.pickands_reps.unwrap_or(budget.reps),
            },
            output_path: None,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_blocks() {
        let cfg: ConfigFile = toml::from_str(
            r#"
            [model]
            hurst = 0.75
            hurst_common = 0.5
            beta = 1.0
            sigma0 = 1.0
            c = 1.0

            [plan]
            n = 256
            reps = 100
            levels = [0.0, 1.0]

            [output]
            dir = "out"
            "#,
        )
        .unwrap();
        let model = cfg.model.to_model().unwrap();
        assert_eq!(model.hurst, 0.75);
        let plan = cfg.plan.to_plan(model).unwrap();
        assert_eq!(plan.levels, vec![0.0, 1.0]);
        assert_eq!(cfg.output.dir.unwrap(), PathBuf::from("out"));
    }

    #[test]
    fn flags_override_file() {
        let file = ModelBlock { hurst: Some(0.5), hurst_common: Some(0.5), beta: Some(1.0), ..Default::default() };
        let flags = ModelBlock { beta: Some(2.0), ..Default::default() };
        let m = file.merged(&flags).to_model().unwrap();
        assert_eq!(m.beta, 2.0);
        assert_eq!(m.hurst, 0.5);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let bad = ModelBlock { hurst: Some(0.5), hurst_common: Some(0.5), beta: Some(0.4), ..Default::default() };
        let msg = bad.to_model().unwrap_err().to_string();
        assert!(msg.contains("model.beta"), "{msg}");
        let missing = ModelBlock::default().to_model().unwrap_err().to_string();
        assert!(missing.contains("model.hurst"));
        assert!(toml::from_str::<ConfigFile>("[model]\nhurts = 1").is_err());
    }
}
