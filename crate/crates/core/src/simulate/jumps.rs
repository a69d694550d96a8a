//! Samplers for jump sizes and stable increments.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::plan::MAX_JUMPS_PER_PATH;
use crate::error::{Error, Result};
use crate::exponent::{EvenIntegrand, LevyMeasureSpec};

const REL_TOL: f64 = 1e-8;
/// Table resolution for continuous measures.
const PER_DECADE: usize = 16;
/// The table stops once the remaining mass is this fraction of the total.
const TABLE_DEPTH: f64 = 1e-12;

/// Standard symmetric stable variable with `E e^{iξS} = e^{-|ξ|^α}`
/// (Chambers–Mallows–Stuck).
pub fn stable_standard<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

#[derive(Debug, Clone)]
enum Sizes {
    /// Atom sizes with cumulative one-sided masses.
    Discrete { sizes: Vec<f64>, cum: Vec<f64> },
    /// `ln r` against `ln G(r)`, `G(r)` the one-sided mass beyond `r`, with the
    /// power decay used past the last node.
    Table { ln_r: Vec<f64>, ln_g: Vec<f64>, tail_slope: f64 },
}

/// Symmetric jump law `w(u) μ(du)` restricted to `|u| > lo`, with its total
/// rate and the variance of the part below `lo`.
#[derive(Debug, Clone)]
pub struct JumpLaw {
    pub lo: f64,
    /// Two-sided mass of `w μ` on `|u| > lo`.
    pub rate: f64,
    /// `∫_{|u| ≤ lo} u² w(u) μ(du)`.
    pub small_variance: f64,
    sizes: Sizes,
}

impl JumpLaw {
    pub fn new(measure: &LevyMeasureSpec, w: &dyn Fn(f64) -> f64, w_sup: f64, breaks: &[f64], lo: f64) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::InvalidSpec("jump cutoff must be positive".into()));
        }
        let sq = |u: f64| u * u * w(u);
        let small = EvenIntegrand::new(&sq, w_sup, lo * lo * w_sup).with_breakpoints(breaks).with_support(0.0, lo);
        let small_variance = measure.integrate_even(&small, REL_TOL)?.value;
        let beyond = |r: f64| -> Result<f64> {
            let f = EvenIntegrand::new(w, 0.0, w_sup).with_breakpoints(breaks).with_support(r, f64::INFINITY);
            Ok(0.5 * measure.integrate_even(&f, REL_TOL)?.value)
        };
        let sizes = match measure {
            LevyMeasureSpec::Atoms { .. } | LevyMeasureSpec::DyadicDiscrete { .. } => {
                let atoms = measure.atoms_in(lo, lo * 1e15).expect("discrete kind");
                let mut cum = Vec::with_capacity(atoms.len());
                let mut acc = 0.0;
                let mut sizes = Vec::with_capacity(atoms.len());
                for (u, m) in atoms {
                    let mass = m * w(u);
                    if mass > 0.0 {
                        acc += mass;
                        cum.push(acc);
                        sizes.push(u);
                    }
                }
                Sizes::Discrete { sizes, cum }
            }
            _ => {
                let g0 = beyond(lo)?;
                let mut ln_r = vec![lo.ln()];
                let mut ln_g = vec![g0.ln()];
                let step = std::f64::consts::LN_10 / PER_DECADE as f64;
                let mut r = lo;
                for _ in 0..40 * PER_DECADE {
                    r *= step.exp();
                    let g = beyond(r)?;
                    if !(g > TABLE_DEPTH * g0) {
                        break;
                    }
                    ln_r.push(r.ln());
                    ln_g.push(g.ln());
                }
                let n = ln_r.len();
                let tail_slope = if n >= 2 { -(ln_g[n - 1] - ln_g[n - 2]) / (ln_r[n - 1] - ln_r[n - 2]) } else { 1.0 };
                Sizes::Table { ln_r, ln_g, tail_slope: tail_slope.max(1e-3) }
            }
        };
        let rate = 2.0
            * match &sizes {
                Sizes::Discrete { cum, .. } => cum.last().copied().unwrap_or(0.0),
                Sizes::Table { ln_g, .. } => ln_g[0].exp(),
            };
        Ok(Self { lo, rate, small_variance, sizes })
    }

    /// Refuses cutoffs whose expected jump count over `t` exceeds the budget.
    pub fn check_budget(&self, t: f64, suggest: impl Fn(f64) -> Result<f64>) -> Result<()> {
        if self.rate * t <= MAX_JUMPS_PER_PATH {
            return Ok(());
        }
        Err(Error::CutoffTooSmall { rate: self.rate * t, suggested: suggest(MAX_JUMPS_PER_PATH / t)? })
    }

    /// One signed jump.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let size = match &self.sizes {
            Sizes::Discrete { sizes, cum } => {
                let v = rng.random::<f64>() * cum[cum.len() - 1];
                let i = cum.partition_point(|c| *c < v).min(sizes.len() - 1);
                sizes[i]
            }
            Sizes::Table { ln_r, ln_g, tail_slope } => {
                // G(r) = U G(lo), U uniform on (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let target = ln_g[0] + u.ln();
                let n = ln_g.len();
                if target <= ln_g[n - 1] {
                    (ln_r[n - 1] + (ln_g[n - 1] - target) / tail_slope).exp()
                } else {
                    // ln_g is decreasing
                    let i = ln_g.partition_point(|g| *g > target).max(1);
                    let s = (ln_g[i - 1] - target) / (ln_g[i - 1] - ln_g[i]);
                    (ln_r[i - 1] + s * (ln_r[i] - ln_r[i - 1])).exp()
                }
            }
        };
        if rng.random::<bool>() {
            size
        } else {
            -size
        }
    }
}

/// `r` with `μ{|u| > r} = rate`, by bisection in `ln r`.
pub(crate) fn cutoff_for_rate(measure: &LevyMeasureSpec, rate: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-12f64, 1e6f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if measure.mass_beyond(mid)? > rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cauchy_law_beyond_cutoff_has_pareto_tail() {
        let m = LevyMeasureSpec::cauchy();
        let law = JumpLaw::new(&m, &|_| 1.0, 1.0, &[], 0.1).unwrap();
        // μ{|u| > r} = 2/(π r), variance below r: 2r/π
        assert!((law.rate - 20.0 / std::f64::consts::PI).abs() < 1e-6);
        assert!((law.small_variance - 0.2 / std::f64::consts::PI).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let above = (0..n).filter(|_| law.sample(&mut rng).abs() > 0.4).count() as f64 / n as f64;
        // P(|U| > 0.4 | |U| > 0.1) = 0.25
        assert!((above - 0.25).abs() < 4e-3, "{above}");
    }

    #[test]
    fn stable_sampler_quartiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut v: Vec<f64> = (0..100_000).map(|_| stable_standard(1.0, &mut rng)).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        // standard Cauchy quartiles are ±1
        assert!((v[25_000] + 1.0).abs() < 0.03 && (v[75_000] - 1.0).abs() < 0.03);
    }
}
