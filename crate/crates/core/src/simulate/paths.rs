use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jumps::{cutoff_for_rate, stable_standard, JumpLaw};
use super::plan::{Scheme, SimulationPlan};
use crate::error::{Error, Result};
use crate::exponent::{LevyMeasureSpec, PerturbationKernel, Regime};
use crate::parametrix::ModelSpec;

/// Positions at `t_end`, with thinning counts when the scheme proposes jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub proposed: u64,
    pub accepted: u64,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Increments of the base process over arbitrary durations.
enum BaseIncrement {
    Stable { alpha: f64, scale: f64 },
    Compound(JumpLaw),
}

impl BaseIncrement {
    fn new(measure: &LevyMeasureSpec, cutoff: f64, t_end: f64) -> Result<Self> {
        if let LevyMeasureSpec::Stable { alpha, scale } = *measure {
            return Ok(Self::Stable { alpha, scale });
        }
        let law = JumpLaw::new(measure, &|_| 1.0, 1.0, &[], cutoff)?;
        law.check_budget(t_end, |rate| cutoff_for_rate(measure, rate))?;
        Ok(Self::Compound(law))
    }

    fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match self {
            Self::Stable { alpha, scale } => (dt * scale).powf(1.0 / alpha) * stable_standard(*alpha, rng),
            Self::Compound(law) => {
                let n = poisson(law.rate * dt, rng);
                let jumps: f64 = (0..n).map(|_| law.sample(rng)).sum();
                let z: f64 = StandardNormal.sample(rng);
                jumps + (law.small_variance * dt).sqrt() * z
            }
        }
    }
}

/// Samples `X_{t_end}` of the base process started at `x0`.  Stable laws are
/// sampled exactly; other measures as compound Poisson above the cutoff plus
/// a Gaussian matching the variance below it.
pub fn sample_base(measure: &LevyMeasureSpec, plan: &SimulationPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    let inc = BaseIncrement::new(measure, plan.small_jump_cutoff, plan.t_end)?;
    Ok((0..plan.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(plan.rng_seed, i);
            plan.x0 + inc.sample(plan.t_end, &mut rng)
        })
        .collect())
}

/// Samples `X_{t_end}` of the perturbed process with jump kernel
/// `(1 + m(x,u)) μ(du)`.
///
/// Thinning proposes extra jumps from `envelope(u) μ(du)` on `|u|` above a
/// thousandth of the cutoff and accepts them with probability
/// `m(x,u)/envelope(u)`; it needs a finite envelope mass.  EulerChain freezes
/// `m(x_k, ·)` over each step (separable kernels only) and is biased to first
/// order in the step.
pub fn sample_perturbed(model: &ModelSpec, plan: &SimulationPlan) -> Result<SampleSet> {
    plan.validate()?;
    let pert = &model.pert;
    if pert.is_zero() {
        return Ok(SampleSet { values: sample_base(&model.base, plan)?, proposed: 0, accepted: 0 });
    }
    let base = BaseIncrement::new(&model.base, plan.small_jump_cutoff, plan.t_end)?;
    let suggest = |rate: f64| cutoff_for_rate(&model.base, rate);
    match plan.scheme {
        Scheme::Exact => Err(Error::Regime("exact sampling covers only the unperturbed process".into())),
        Scheme::Thinning => {
            if model.pert_report.regime != Regime::Bounded {
                return Err(Error::Regime("thinning needs a finite perturbation intensity".into()));
            }
            let env = |u: f64| pert.envelope(u);
            let law = JumpLaw::new(&model.base, &env, pert.envelope_c, &[1.0], 1e-3 * plan.small_jump_cutoff)?;
            law.check_budget(plan.t_end, suggest)?;
            let runs: Vec<(f64, u64, u64)> = (0..plan.n_paths)
                .into_par_iter()
                .map(|i| {
                    let mut rng = path_rng(plan.rng_seed, i);
                    let (mut t, mut x) = (0.0, plan.x0);
                    let (mut proposed, mut accepted) = (0u64, 0u64);
                    loop {
                        let wait: f64 = Exp1.sample(&mut rng);
                        let tau = wait / law.rate;
                        if t + tau >= plan.t_end {
                            x += base.sample(plan.t_end - t, &mut rng);
                            break;
                        }
                        x += base.sample(tau, &mut rng);
                        t += tau;
                        let u = law.sample(&mut rng);
                        proposed += 1;
                        if rng.random::<f64>() * env(u) < pert.eval(x, u) {
                            x += u;
                            accepted += 1;
                        }
                    }
                    (x, proposed, accepted)
                })
                .collect();
            Ok(SampleSet {
                values: runs.iter().map(|r| r.0).collect(),
                proposed: runs.iter().map(|r| r.1).sum(),
                accepted: runs.iter().map(|r| r.2).sum(),
            })
        }
        Scheme::EulerChain { dt } => {
            let PerturbationKernel::Separable { amplitude, profile } = &pert.kernel else {
                return Err(Error::InvalidSpec("the Euler chain needs a separable perturbation".into()));
            };
            if amplitude.inf() < 0.0 {
                return Err(Error::InvalidSpec("negative amplitude cannot be sampled".into()));
            }
            let w = |u: f64| profile.eval(u);
            let law = JumpLaw::new(&model.base, &w, profile.sup(), &profile.breakpoints(), plan.small_jump_cutoff)?;
            law.check_budget(plan.t_end * amplitude.sup(), |rate| suggest(rate / amplitude.sup()))?;
            let steps = (plan.t_end / dt - 1e-9).ceil().max(1.0) as usize;
            let h = plan.t_end / steps as f64;
            let values: Vec<f64> = (0..plan.n_paths)
                .into_par_iter()
                .map(|i| {
                    let mut rng = path_rng(plan.rng_seed, i);
                    let mut x = plan.x0;
                    for _ in 0..steps {
                        let a = amplitude.eval(x);
                        let mut dx = base.sample(h, &mut rng);
                        let n = poisson(a * law.rate * h, &mut rng);
                        dx += (0..n).map(|_| law.sample(&mut rng)).sum::<f64>();
                        let z: f64 = StandardNormal.sample(&mut rng);
                        dx += (a * law.small_variance * h).sqrt() * z;
                        x += dx;
                    }
                    x
                })
                .collect();
            Ok(SampleSet { values, proposed: 0, accepted: 0 })
        }
    }
}
