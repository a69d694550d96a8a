//! The assembled kernel `p = p⁰ + p⁰⋆Ψ`, its smoothing `p_{t,ε}` and the
//! residual of the smoothed kernel.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::series::require_convergence;
use super::solver::{Grids, SeriesDiagnostics, Solver};
use crate::error::{Error, Result};
use crate::freekernel::{GridMeta, KernelGrid, Provenance};

/// Negative entries below `-threshold` are flagged; those in `[-threshold, 0)` are clamped.
pub const NEGATIVE_REL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeReport {
    /// Smallest raw entry before clamping.
    pub min: f64,
    pub max: f64,
    pub threshold: f64,
    pub flagged: usize,
    pub clamped: usize,
}

impl NegativeReport {
    pub fn pass(&self) -> bool {
        self.flagged == 0
    }
}

/// Clamps small negative values in place.
pub fn clamp_negatives(values: &mut Array2<f64>) -> NegativeReport {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = NEGATIVE_REL_THRESHOLD * max.abs();
    let mut flagged = 0;
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v < -threshold {
            flagged += 1;
        } else if *v < 0.0 {
            *v = 0.0;
            clamped += 1;
        }
    }
    NegativeReport { min, max, threshold, flagged, clamped }
}

fn meta(solver: &Solver, provenance: Provenance, err_est: f64, flags: Vec<String>) -> GridMeta {
    GridMeta { provenance, err_est, spacing: solver.grid.dx(), half_width: 0.5 * solver.grid.length, flags }
}

/// `p_t` on the grid for each requested time, with the series diagnostics and
/// one negative-value report per time.
pub fn assemble_p_multi(
    solver: &Solver,
    times: &[f64],
    grids: &Grids,
) -> Result<(Vec<KernelGrid>, SeriesDiagnostics, Vec<NegativeReport>)> {
    let cs = solver.columns(times, grids, false, false)?;
    require_convergence(&cs.diag)?;
    let mut out = Vec::with_capacity(times.len());
    let mut reports = Vec::with_capacity(times.len());
    for (i, mut v) in cs.p.into_iter().enumerate() {
        let rep = clamp_negatives(&mut v);
        let mut flags = vec![format!("terms={}", cs.diag.truncation_index)];
        if rep.flagged > 0 {
            flags.push(format!("negative_flagged={} min={:e}", rep.flagged, rep.min));
        }
        if rep.clamped > 0 {
            flags.push(format!("negative_clamped={}", rep.clamped));
        }
        let g = KernelGrid::new(
            times[i],
            grids.x_nodes(),
            grids.y_nodes(),
            v,
            meta(solver, Provenance::P, cs.diag.truncation_bound[i], flags),
        )?;
        out.push(g);
        reports.push(rep);
    }
    Ok((out, cs.diag, reports))
}

/// `p_t = p⁰_t + (p⁰⋆Ψ)_t` on the grid.
pub fn assemble_p(solver: &Solver, t: f64, grids: &Grids) -> Result<(KernelGrid, SeriesDiagnostics, NegativeReport)> {
    let (mut g, d, mut r) = assemble_p_multi(solver, &[t], grids)?;
    Ok((g.remove(0), d, r.remove(0)))
}

/// `p_{t,ε}(x,y) = p⁰_{t+ε}(x,y) + ∫₀^t∫p⁰_{t-s+ε}(x,z)Ψ_s(z,y)dz ds`, which
/// equals `∫p⁰_ε(x,z)p_t(z,y)dz`; computed in the second form.
pub fn approx_kernel_p_eps(solver: &Solver, t: f64, eps_reg: f64, grids: &Grids) -> Result<KernelGrid> {
    let many = approx_kernel_p_eps_multi(solver, t, &[eps_reg], grids)?;
    Ok(many.into_iter().next().expect("one entry"))
}

/// `p_{t,ε}` for each `ε`, sharing one series run.
pub fn approx_kernel_p_eps_multi(solver: &Solver, t: f64, eps: &[f64], grids: &Grids) -> Result<Vec<KernelGrid>> {
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidSpec("regularization must be positive".into()));
    }
    let full = Grids::new(solver.grid, 1, grids.y_idx.clone())?;
    let cs = solver.columns(&[t], &full, false, false)?;
    require_convergence(&cs.diag)?;
    let p = &cs.p[0];
    let n = solver.grid.n;
    let nx = n / grids.x_stride;
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut v = Array2::zeros((nx, grids.y_idx.len()));
        for c in 0..grids.y_idx.len() {
            let col: Vec<f64> = p.column(c).to_vec();
            let smoothed = solver.free_semigroup(e, &col);
            for r in 0..nx {
                v[(r, c)] = smoothed[r * grids.x_stride];
            }
        }
        out.push(KernelGrid::new(
            t,
            grids.x_nodes(),
            grids.y_nodes(),
            v,
            meta(solver, Provenance::PEps, cs.diag.truncation_bound[0], vec![format!("eps={e}")]),
        )?);
    }
    Ok(out)
}

/// `sup_x |∫q_{t,ε}(x,y) f(y) dy|` with `q_{t,ε} = (L - ∂_t) p_{t,ε}`.
///
/// `∫p_{t,ε}(x,y)f(y)dy = P_ε T_t f`; the generator is applied on the grid and
/// `∂_t` by a centered difference of step `h = t/50`.
pub fn residual_q_eps(solver: &Solver, t: f64, eps_reg: f64, f: &[f64]) -> Result<f64> {
    Ok(residual_q_eps_multi(solver, t, &[eps_reg], f)?[0])
}

pub fn residual_q_eps_multi(solver: &Solver, t: f64, eps: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if eps.iter().any(|e| !(*e > 0.0)) || !(t > 0.0) {
        return Err(Error::InvalidSpec("time and regularization must be positive".into()));
    }
    let h = t / 50.0;
    let (u, diag) = solver.semigroup_diag(f, &[t - h, t, t + h])?;
    require_convergence(&diag)?;
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let smoothed = solver.free_semigroup(e, &u[1]);
        let l_part = solver.generator(&smoothed);
        let before = solver.free_semigroup(e, &u[0]);
        let after = solver.free_semigroup(e, &u[2]);
        let r = l_part
            .iter()
            .zip(before.iter().zip(&after))
            .map(|(l, (b, a))| (l - (a - b) / (2.0 * h)).abs())
            .fold(0.0f64, f64::max);
        out.push(r);
    }
    Ok(out)
}

/// The same residual through the identity `(L - ∂_t)P_ε T_t f = [L, P_ε] T_t f`.
pub fn residual_commutator(solver: &Solver, t: f64, eps_reg: f64, f: &[f64]) -> Result<f64> {
    let u = solver.semigroup(f, &[t])?.remove(0);
    let a = solver.generator(&solver.free_semigroup(eps_reg, &u));
    let b = solver.free_semigroup(eps_reg, &solver.generator(&u));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max))
}
