//! Numerical checks of kernel properties: conservation, positivity, the
//! semigroup identity, two-sided bounds, the generator identity and the
//! convolution inequalities behind the series estimates.

pub mod bounds;
pub mod convolution;
pub mod generator;
pub mod kernel;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::freekernel::KernelGrid;

pub use bounds::{check_example_bounds, check_lower_bound, check_on_diagonal, ExampleBound};
pub use convolution::{check_convolution_lemma, ConvolutionLemmaParams};
pub use generator::{check_generator_identity, jump_generator, GeneratorParams, TestFunction};
pub use kernel::{apply_semigroup, check_chapman_kolmogorov, check_conservation, check_nonnegativity};

/// Outcome of a check.  `Unstable` marks fitted constants that drift too much
/// across time scales; `Inconclusive` marks inputs that cannot decide the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Unstable,
    Inconclusive,
}

/// Where a check looked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub t: Vec<f64>,
    pub points: usize,
    pub x_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: String,
    pub coverage: Coverage,
    /// Fitted constants, by name.
    pub constants: BTreeMap<String, f64>,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub verdict: Outcome,
    pub pass: bool,
    pub witness: Option<Witness>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub(crate) fn new(check: &str, coverage: Coverage, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            coverage,
            constants: BTreeMap::new(),
            worst_residual: 0.0,
            tolerance,
            verdict: Outcome::Pass,
            pass: true,
            witness: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn set_verdict(&mut self, verdict: Outcome) {
        self.verdict = verdict;
        self.pass = verdict == Outcome::Pass;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Tolerances of the checks; every field can be overridden from a run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Row-sum deviation from 1.
    pub mass: f64,
    /// Tail mass outside the grid above which conservation is inconclusive.
    pub tail_mass: f64,
    /// Allowed negative depth relative to the maximum.
    pub negativity: f64,
    /// Relative error of composed identities (Chapman–Kolmogorov, generator).
    pub composed: f64,
    /// Allowed max/min ratio of a fitted constant across time nodes.
    pub drift: f64,
    /// Drift allowance for the explicit example bounds.
    pub example_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { mass: 1e-3, tail_mass: 1e-4, negativity: 1e-6, composed: 2e-2, drift: 2.0, example_drift: 3.0 }
    }
}

/// `max/min` of positive values, infinite if any is non-positive or not finite.
pub fn drift(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    if values.is_empty() || !(lo > 0.0) || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn coverage_of(family: &[KernelGrid]) -> Coverage {
    let lo = family.iter().flat_map(|g| g.x_nodes.first()).cloned().fold(f64::INFINITY, f64::min);
    let hi = family.iter().flat_map(|g| g.x_nodes.last()).cloned().fold(f64::NEG_INFINITY, f64::max);
    Coverage {
        t: family.iter().map(|g| g.t).collect(),
        points: family.iter().map(|g| g.values.len()).sum(),
        x_range: (lo, hi),
    }
}

/// Period of the circle a grid lives on, when its `y` nodes cover one full turn.
pub(crate) fn full_period(g: &KernelGrid) -> Option<f64> {
    let n = g.y_nodes.len();
    if n < 2 {
        return None;
    }
    let h = g.y_nodes[1] - g.y_nodes[0];
    if !(h > 0.0) {
        return None;
    }
    let period = 2.0 * g.meta.half_width;
    let step_ok = g.y_nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    (step_ok && ((n as f64) * h - period).abs() <= 1e-9 * period).then_some(period)
}

/// Distance on the circle of the given period (plain distance when `None`).
pub(crate) fn circle_distance(a: f64, b: f64, period: Option<f64>) -> f64 {
    let d = (a - b).abs();
    match period {
        Some(p) => {
            let r = d.rem_euclid(p);
            r.min(p - r)
        }
        None => d,
    }
}
