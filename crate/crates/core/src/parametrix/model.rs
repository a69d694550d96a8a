//! The perturbed model: base measure, perturbation kernel and series settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{
    check_a1, check_perturbation, default_probes, log_nodes, A1Report, LevyMeasureSpec, PerturbationReport,
    PerturbationSpec, SamplePlan, ScalingTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    /// Exponent of the endpoint weights in time quadratures.
    pub delta_hint: f64,
    pub tol: f64,
    pub k_max: usize,
}

/// Which point the coefficient `m(·, u)` is frozen at inside `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeze {
    /// `m(x, u)`, the running point.
    #[default]
    Source,
    /// `m(y, u)`, the target point.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub base: LevyMeasureSpec,
    pub pert: PerturbationSpec,
    pub scaling: ScalingTable,
    pub series_params: SeriesParams,
    #[serde(default)]
    pub freeze: Freeze,
    pub a1: A1Report,
    pub pert_report: PerturbationReport,
}

impl ModelSpec {
    /// Runs the structural checks and fills in default series settings
    /// (`δ = η/2`, `tol = 1e-6`, `k_max = 8`).
    pub fn new(base: LevyMeasureSpec, pert: PerturbationSpec) -> Result<Self> {
        let a1 = check_a1(&base, &default_probes())?;
        if !a1.pass {
            return Err(Error::ConditionA1(format!(
                "power ratio still moving by {:.1}% over the top decade",
                100.0 * a1.top_decade_variation
            )));
        }
        let pert_report = check_perturbation(&pert, &base, &SamplePlan::default())?;
        if !pert_report.pass {
            let what = if pert_report.symmetric { "exceeds its envelope" } else { "is not symmetric in u" };
            return Err(Error::InvalidSpec(format!("perturbation {what} at (x, u) = {:?}", pert_report.witness)));
        }
        let scaling = ScalingTable::build(&base, &log_nodes(1e-3, 1.0, 4))?;
        let mut model = Self {
            base,
            pert,
            scaling,
            series_params: SeriesParams { delta_hint: 0.25, tol: 1e-6, k_max: 8 },
            freeze: Freeze::Source,
            a1,
            pert_report,
        };
        model.series_params.delta_hint = model.default_delta();
        Ok(model)
    }

    pub fn with_series(mut self, params: SeriesParams) -> Result<Self> {
        if !(params.delta_hint > 0.0 && params.delta_hint < 1.0) || !(params.tol > 0.0) || params.k_max == 0 {
            return Err(Error::InvalidSpec(format!("bad series parameters {params:?}")));
        }
        self.series_params = params;
        Ok(self)
    }

    pub fn with_freeze(mut self, freeze: Freeze) -> Self {
        self.freeze = freeze;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.scaling.sigma_hat
    }

    /// `η = ε/σ̂`, capped at 1 (a perturbation of order `ε >= σ̂` is bounded).
    pub fn eta(&self) -> f64 {
        (self.pert.envelope_eps / self.sigma()).min(1.0)
    }

    pub fn default_delta(&self) -> f64 {
        (0.5 * self.eta()).clamp(1e-3, 0.5)
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        self.scaling.rho_at(&self.base, t)
    }
}
