//! Run configuration: the model, grid, times, stages and output settings.

use std::path::PathBuf;

use levy_parametrix::exponent::{LevyMeasureSpec, PerturbationSpec};
use levy_parametrix::parametrix::{Freeze, ModelSpec, SeriesParams};
use levy_parametrix::presets::preset as model_preset;
use levy_parametrix::validate::{ExampleBound, Tolerances};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Exponent,
    Kernel,
    Parametrix,
    Validate,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Exponent, Stage::Kernel, Stage::Parametrix, Stage::Validate, Stage::Simulate];

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| CliError::config(format!("unknown stage {s:?}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Exponent => "exponent",
            Stage::Kernel => "kernel",
            Stage::Parametrix => "parametrix",
            Stage::Validate => "validate",
            Stage::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub base: LevyMeasureSpec,
    pub pert: PerturbationSpec,
    #[serde(default)]
    pub freeze: Freeze,
    /// Series settings; the model defaults apply when absent.
    pub series: Option<SeriesParams>,
}

/// Circle grid. Missing values are resolved from the model and the smallest time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub half_width: Option<f64>,
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportConfig {
    pub csv: bool,
    pub json: bool,
    /// Hexadecimal float encoding in kernel files.
    pub exact: bool,
    /// Largest number of nodes per axis in exported kernels.
    pub max_nodes: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { csv: true, json: true, exact: false, max_nodes: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_paths: usize,
    /// Simulated time; the first entry of the time list when absent.
    pub t: Option<f64>,
    pub x0: f64,
    /// Euler steps per unit of simulated time span (the step is `t / euler_steps`).
    pub euler_steps: usize,
    /// KS allowance for exact and thinning schemes.
    pub ks_tol: f64,
    /// KS allowance for the Euler chain.
    pub ks_tol_euler: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, t: None, x0: 0.0, euler_steps: 50, ks_tol: 0.02, ks_tol_euler: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_times")]
    pub t: Vec<f64>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Right-hand side for the example-bound check.
    #[serde(default)]
    pub example_bound: Option<ExampleBound>,
    /// Bound templates are not fitted for oscillating exponents.
    #[serde(default)]
    pub oscillatory: bool,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub artifact_choices: Vec<String>,
}

fn default_times() -> Vec<f64> {
    vec![0.05, 0.1, 0.25, 0.5]
}

fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

/// Run configuration of a shipped preset.
pub fn preset(name: &str) -> CliResult<RunConfig> {
    let p = model_preset(name).map_err(|e| CliError::config(e.to_string()))?;
    Ok(RunConfig {
        name: p.name.clone(),
        model: ModelConfig { base: p.base, pert: p.pert, freeze: Freeze::Source, series: None },
        grid: GridConfig::default(),
        t: default_times(),
        stages: default_stages(),
        out: PathBuf::from("runs").join(&p.name),
        export: ExportConfig::default(),
        seed: 0,
        tolerances: Tolerances::default(),
        simulation: SimulationConfig::default(),
        example_bound: p.example_bound,
        oscillatory: p.oscillatory,
        constraints: p.constraints,
        artifact_choices: p.artifact_choices,
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(format!("config: {e}")))
    }

    /// Checks the settings that do not need the model.
    pub fn validate(&self) -> CliResult<()> {
        if self.t.is_empty() || self.t.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(CliError::config(format!("times must lie in (0, 1], got {:?}", self.t)));
        }
        if self.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("times must be strictly increasing"));
        }
        if self.stages.is_empty() {
            return Err(CliError::config("no stages requested"));
        }
        // stages are a contiguous run of the dependency chain
        let first = Stage::ALL.iter().position(|s| *s == self.stages[0]).expect("known stage");
        if self.stages.iter().enumerate().any(|(i, s)| Stage::ALL.get(first + i) != Some(s)) {
            return Err(CliError::config(format!(
                "stages must be consecutive in the order exponent, kernel, parametrix, validate, simulate; got {:?}",
                self.stages.iter().map(|s| s.name()).collect::<Vec<_>>()
            )));
        }
        if let Some(h) = self.grid.half_width {
            if !(h > 0.0) {
                return Err(CliError::config("grid half_width must be positive"));
            }
        }
        if let Some(h) = self.grid.spacing {
            if !(h > 0.0) {
                return Err(CliError::config("grid spacing must be positive"));
            }
        }
        if self.export.max_nodes < 2 {
            return Err(CliError::config("export max_nodes must be at least 2"));
        }
        let sim = &self.simulation;
        if sim.n_paths == 0 || sim.euler_steps < 50 || !sim.x0.is_finite() {
            return Err(CliError::config("simulation needs n_paths > 0, euler_steps >= 50 and a finite x0"));
        }
        if let Some(t) = sim.t {
            if !self.t.iter().any(|s| (s - t).abs() <= 1e-12 * t) {
                return Err(CliError::config(format!("simulation time {t} is not in the time list")));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> CliResult<ModelSpec> {
        let m = &self.model;
        let mut model = ModelSpec::new(m.base.clone(), m.pert.clone())?.with_freeze(m.freeze);
        if let Some(s) = &m.series {
            model = model.with_series(s.clone())?;
        }
        Ok(model)
    }

    /// Replaces one tolerance given as `key=value`.
    pub fn override_tolerance(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("tolerance override {assignment:?} is not key=value")))?;
        let value: f64 =
            value.trim().parse().map_err(|_| CliError::config(format!("tolerance {key} needs a number, got {value:?}")))?;
        let mut map = serde_json::to_value(self.tolerances).expect("tolerances serialize");
        let slot = map
            .get_mut(key.trim())
            .ok_or_else(|| CliError::config(format!("unknown tolerance {key:?}")))?;
        *slot = serde_json::json!(value);
        self.tolerances = serde_json::from_value(map).map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }
}

pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| item(p.trim())).collect()
}

pub fn parse_time(s: &str) -> CliResult<f64> {
    s.parse().map_err(|_| CliError::config(format!("time {s:?} is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in levy_parametrix::presets::PRESET_NAMES {
            let c = preset(name).unwrap();
            let text = c.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), c, "{name}");
            c.validate().unwrap();
        }
    }

    #[test]
    fn exa2_carries_its_parameter_constraint() {
        let text = preset("exa2").unwrap().to_toml().unwrap();
        assert!(text.contains("0 < theta < 2 upsilon"));
        assert!(text.contains("theta = 1.2"));
    }

    #[test]
    fn stages_must_be_consecutive() {
        let mut c = preset("exa1").unwrap();
        c.stages = vec![Stage::Validate];
        c.validate().unwrap();
        c.stages = vec![Stage::Kernel, Stage::Validate];
        assert!(c.validate().is_err());
    }

    #[test]
    fn tolerance_override() {
        let mut c = preset("exa1").unwrap();
        c.override_tolerance("composed=0.05").unwrap();
        assert_eq!(c.tolerances.composed, 0.05);
        assert!(c.override_tolerance("bogus=1").is_err());
        assert!(c.override_tolerance("mass").is_err());
    }

    #[test]
    fn missing_sections_take_defaults() {
        let text = r#"
name = "mini"
[model.base]
kind = "stable"
alpha = 1.0
scale = 1.0
[model.pert]
envelope_c = 1.0
envelope_eps = 1.0
[model.pert.kernel]
kind = "zero"
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.t, default_times());
        assert_eq!(c.stages, default_stages());
        assert_eq!(c.simulation, SimulationConfig::default());
    }
}
