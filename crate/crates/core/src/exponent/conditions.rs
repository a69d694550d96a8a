//! Checks on the base measure (power-ratio index) and on the perturbation kernel.

use serde::{Deserialize, Serialize};

use super::measure::{EvenIntegrand, LevyMeasureSpec, DEFAULT_REL_TOL};
use super::perturbation::PerturbationSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub beta_hat: f64,
    pub alpha_hat: f64,
    pub pass: bool,
    /// Relative change of the running sup of `q^U/q^L` over the top decade.
    pub top_decade_variation: f64,
    pub ratios: Vec<(f64, f64)>,
}

/// Logarithmic probes over `[1, 1e6]`, ten per decade.
pub fn default_probes() -> Vec<f64> {
    (0..=60).map(|i| 10f64.powf(i as f64 / 10.0)).collect()
}

/// Estimates `β = sup q^U/q^L` over the probes.
///
/// Fails with a witness when `q^L` vanishes where `q^U` does not.
pub fn check_a1(measure: &LevyMeasureSpec, probes: &[f64]) -> Result<A1Report> {
    measure.validate()?;
    if probes.len() < 2 {
        return Err(Error::InsufficientData("need at least two probes".into()));
    }
    let mut ratios = Vec::with_capacity(probes.len());
    for &xi in probes {
        let qu = measure.q_upper(xi)?;
        let ql = measure.q_lower(xi)?;
        if ql <= 0.0 {
            if qu > 0.0 {
                return Err(Error::ConditionA1(format!("q^L vanishes at xi = {xi:e} while q^U = {qu:e}")));
            }
            continue;
        }
        ratios.push((xi, qu / ql));
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientData("no probe with positive q^L".into()));
    }
    let beta_hat = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let xi_max = ratios.last().unwrap().0;
    let mut running = 0.0f64;
    let mut at_decade_start = None;
    for &(xi, r) in &ratios {
        running = running.max(r);
        if xi >= xi_max / 10.0 * (1.0 - 1e-12) && at_decade_start.is_none() {
            at_decade_start = Some(running);
        }
    }
    let start = at_decade_start.unwrap_or(running);
    let variation = (running - start) / running;
    let pass = beta_hat > 1.0 && variation < 0.05;
    Ok(A1Report { beta_hat, alpha_hat: 2.0 / beta_hat, pass, top_decade_variation: variation, ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `∫(|u|^ε ∧ 1) μ(du) = ∞`: the perturbation is of genuinely lower order.
    Divergent,
    /// Finite intensity: the perturbation is a bounded operator.
    Bounded,
}

/// Sampling plan for pointwise checks of `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl Default for SamplePlan {
    fn default() -> Self {
        let x = (0..=64).map(|i| -8.0 + 0.25 * i as f64).collect();
        let u = (0..=48).map(|i| 10f64.powf(-6.0 + 0.25 * i as f64)).collect();
        Self { x, u }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub symmetric: bool,
    pub within_envelope: bool,
    pub pass: bool,
    pub witness: Option<(f64, f64)>,
    pub regime: Regime,
    /// Truncated intensities `∫_{|u|>r}(|u|^ε ∧ 1) μ(du)` at `r = 1e-2, 1e-4, ...`.
    pub intensity_profile: Vec<(f64, f64)>,
}

/// Verifies symmetry and the envelope of `m` on samples, and classifies the regime.
pub fn check_perturbation(
    pert: &PerturbationSpec,
    measure: &LevyMeasureSpec,
    plan: &SamplePlan,
) -> Result<PerturbationReport> {
    if !(pert.envelope_c > 0.0 && pert.envelope_eps > 0.0) {
        return Err(Error::InvalidSpec("envelope constants must be positive".into()));
    }
    let mut symmetric = true;
    let mut within = true;
    let mut witness = None;
    'outer: for &x in &plan.x {
        for &u in &plan.u {
            let a = pert.eval(x, u);
            let b = pert.eval(x, -u);
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                symmetric = false;
                witness = Some((x, u));
                break 'outer;
            }
            if a < 0.0 || a > pert.envelope(u) * (1.0 + 1e-12) {
                within = false;
                witness = Some((x, u));
                break 'outer;
            }
        }
    }
    let (regime, intensity_profile) = classify_regime(pert, measure)?;
    Ok(PerturbationReport {
        symmetric,
        within_envelope: within,
        pass: symmetric && within,
        witness,
        regime,
        intensity_profile,
    })
}

fn classify_regime(pert: &PerturbationSpec, measure: &LevyMeasureSpec) -> Result<(Regime, Vec<(f64, f64)>)> {
    if pert.is_zero() {
        return Ok((Regime::Bounded, Vec::new()));
    }
    if measure.is_finite_measure() {
        return Ok((Regime::Bounded, Vec::new()));
    }
    let eps = pert.envelope_eps;
    let g = |u: f64| u.powf(eps).min(1.0);
    let mut profile = Vec::new();
    for j in 1..=8 {
        let r = 10f64.powi(-2 * j);
        let f = EvenIntegrand::new(&g, 0.0, 1.0).with_breakpoints(&[1.0]).with_support(r, f64::INFINITY);
        profile.push((r, measure.integrate_even(&f, DEFAULT_REL_TOL)?.value));
    }
    // successive increments decay geometrically iff the integral converges at 0
    let incs: Vec<f64> = profile.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let n = incs.len();
    let ratio = incs[n - 1] / incs[n - 2].max(f64::MIN_POSITIVE);
    let regime = if ratio < 0.9 { Regime::Bounded } else { Regime::Divergent };
    Ok((regime, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::perturbation::{Amplitude, Profile};

    #[test]
    fn stable_ratio_is_two_over_alpha() {
        for alpha in [0.5, 1.0, 1.5] {
            let r = check_a1(&LevyMeasureSpec::Stable { alpha, scale: 1.0 }, &default_probes()).unwrap();
            assert!(r.pass);
            assert!((r.beta_hat - 2.0 / alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn atom_pair_fails() {
        let m = LevyMeasureSpec::Atoms { atoms: vec![(1.0, 1.0)] };
        assert!(matches!(check_a1(&m, &default_probes()), Err(Error::ConditionA1(_))));
    }

    #[test]
    fn regimes() {
        let cauchy = LevyMeasureSpec::cauchy();
        let main = PerturbationSpec::separable(
            Amplitude::Trig { c0: 0.5, c1: 0.5, freq: 1.0 },
            Profile::PowerCap { c: 0.5, eps: 0.5 },
            0.5,
            0.5,
        );
        let r = check_perturbation(&main, &cauchy, &SamplePlan::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.regime, Regime::Divergent);
        let bounded = PerturbationSpec::separable(
            Amplitude::Constant { value: 1.0 },
            Profile::PowerCap { c: 1.0, eps: 2.0 },
            1.0,
            2.0,
        );
        let r = check_perturbation(&bounded, &cauchy, &SamplePlan::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.regime, Regime::Bounded);
    }
}
