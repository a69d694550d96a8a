use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{scaling_rho, LevyMeasureSpec};

/// Expected number of compound-Poisson jumps per path above which a cutoff is refused.
pub const MAX_JUMPS_PER_PATH: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// No time stepping; the perturbation must vanish.
    Exact,
    /// Base path plus accepted proposals from the envelope measure.
    Thinning,
    /// Steps of length `dt` with the jump kernel frozen at the step start.
    EulerChain { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub n_paths: usize,
    pub t_end: f64,
    pub x0: f64,
    pub scheme: Scheme,
    /// Jumps with `|u|` below this are replaced by a Gaussian of equal variance.
    pub small_jump_cutoff: f64,
    pub rng_seed: u64,
}

/// The `|u|` with `ρ_{t_end} |u| = 0.01`.
pub fn default_cutoff(measure: &LevyMeasureSpec, t_end: f64) -> Result<f64> {
    Ok(0.01 / scaling_rho(measure, t_end)?)
}

impl SimulationPlan {
    /// Plan with the default small-jump cutoff.
    pub fn new(measure: &LevyMeasureSpec, n_paths: usize, t_end: f64, x0: f64, scheme: Scheme, rng_seed: u64) -> Result<Self> {
        let plan = Self { n_paths, t_end, x0, scheme, small_jump_cutoff: default_cutoff(measure, t_end)?, rng_seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidSpec("need at least one path".into()));
        }
        if !(self.t_end > 0.0 && self.t_end <= 1.0) {
            return Err(Error::InvalidSpec(format!("t_end {} outside (0, 1]", self.t_end)));
        }
        if !(self.small_jump_cutoff > 0.0) || !self.x0.is_finite() {
            return Err(Error::InvalidSpec("cutoff must be positive and x0 finite".into()));
        }
        if let Scheme::EulerChain { dt } = self.scheme {
            if !(dt > 0.0 && dt <= self.t_end / 50.0 * (1.0 + 1e-12)) {
                return Err(Error::InvalidSpec(format!("Euler step {dt} must lie in (0, t_end/50]")));
            }
        }
        Ok(())
    }
}
