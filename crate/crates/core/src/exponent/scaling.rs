//! The scaling function `ρ_t`, the inverse of `q^U` at level `1/t`.

use serde::{Deserialize, Serialize};

use super::conditions::{check_a1, default_probes};
use super::measure::{stable_density_constant, LevyMeasureSpec};
use crate::error::{Error, Result};

/// `ρ_t` at a set of times, with the indices that describe its growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub t_nodes: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha: f64,
    pub beta_hat: f64,
    pub sigma_hat: f64,
}

const ROOT_TOL: f64 = 1e-12;

/// Solves `q^U(ρ) t = 1`.
pub fn scaling_rho(measure: &LevyMeasureSpec, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidSpec(format!("time {t} must be positive")));
    }
    if let LevyMeasureSpec::Stable { alpha, scale } = measure {
        let k = 2.0 * scale * stable_density_constant(*alpha) * 2.0 / (alpha * (2.0 - alpha));
        return Ok((1.0 / (t * k)).powf(1.0 / alpha));
    }
    if let LevyMeasureSpec::Atoms { atoms } = measure {
        let sup: f64 = 2.0 * atoms.iter().map(|a| a.1).sum::<f64>();
        if sup * t <= 1.0 {
            return Err(Error::ScalingUndefined { t, sup_qu: sup });
        }
    }
    let target = 1.0 / t;
    let f = |xi: f64| -> Result<f64> { Ok(measure.q_upper(xi)? - target) };
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut f_hi = f(hi)?;
    let mut guard = 0;
    while f_hi < 0.0 {
        lo = hi;
        hi *= 4.0;
        let prev = f_hi;
        f_hi = f(hi)?;
        guard += 1;
        if guard > 60 || (f_hi - prev).abs() <= 1e-14 * target && guard > 8 {
            return Err(Error::ScalingUndefined { t, sup_qu: f_hi + target });
        }
    }
    if lo == hi {
        let mut f_lo = f(lo)?;
        while f_lo >= 0.0 {
            hi = lo;
            lo *= 0.25;
            f_lo = f(lo)?;
            if lo < 1e-300 {
                return Err(Error::ScalingUndefined { t, sup_qu: f64::NAN });
            }
        }
    }
    // bisection in log ξ; q^U is nondecreasing
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let fm = f(mid)?;
        if fm.abs() <= ROOT_TOL * target {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `ρ_t ~ t^(-1/σ)` over the smallest decade of `t_nodes`; the result is
/// clamped to `[alpha_hat, 2]`.
pub fn estimate_sigma(measure: &LevyMeasureSpec, t_nodes: &[f64], alpha_hat: f64) -> Result<f64> {
    let t_min = t_nodes.iter().copied().fold(f64::INFINITY, f64::min);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &t in t_nodes.iter().filter(|&&t| t <= 10.0 * t_min * (1.0 + 1e-12)) {
        if let Ok(rho) = scaling_rho(measure, t) {
            xs.push(t.ln());
            ys.push(-rho.ln());
        }
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable nodes in the smallest decade (need 4)",
            xs.len()
        )));
    }
    let (slope, _) = ls_slope(&xs, &ys);
    // -ln ρ = (1/σ) ln t + c
    let sigma = 1.0 / slope;
    Ok(sigma.clamp(alpha_hat, 2.0))
}

/// Log-spaced times covering `[t_min, t_max]` with `per_decade` nodes per decade.
pub fn log_nodes(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|i| t_min * 10f64.powf(decades * i as f64 / n as f64)).collect()
}

impl ScalingTable {
    /// Builds the table; indices come from the power-ratio check and the
    /// small-time fit (on an internal fine grid reaching down to `1e-6`).
    pub fn build(measure: &LevyMeasureSpec, t_nodes: &[f64]) -> Result<Self> {
        let mut t_nodes = t_nodes.to_vec();
        t_nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let a1 = check_a1(measure, &default_probes())?;
        let rho = t_nodes.iter().map(|&t| scaling_rho(measure, t)).collect::<Result<Vec<_>>>()?;
        let fit_nodes = log_nodes(1e-6, 1e-5, 8);
        let sigma_hat = estimate_sigma(measure, &fit_nodes, a1.alpha_hat)?;
        Ok(Self { t_nodes, rho, alpha: a1.alpha_hat, beta_hat: a1.beta_hat, sigma_hat })
    }

    pub fn rho_at(&self, measure: &LevyMeasureSpec, t: f64) -> Result<f64> {
        if let Some(i) = self.t_nodes.iter().position(|&s| (s - t).abs() <= 1e-15 * t) {
            return Ok(self.rho[i]);
        }
        scaling_rho(measure, t)
    }
}
