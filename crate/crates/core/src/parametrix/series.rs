//! `Ψ = Σ_{k≥1} Φ^{⋆k}` with per-order diagnostics.

use super::solver::{Grids, SeriesDiagnostics, Solver};
use crate::error::{Error, Result};
use crate::freekernel::{GridMeta, KernelGrid, Provenance};

/// Fails with the diagnostics attached when the last observed ratio is not below 1.
pub fn require_convergence(diag: &SeriesDiagnostics) -> Result<()> {
    if diag.converged {
        return Ok(());
    }
    let ratio = diag
        .ratios
        .last()
        .map(|r| r.iter().cloned().fold(0.0f64, f64::max))
        .unwrap_or(f64::INFINITY);
    Err(Error::NonConvergence { k: diag.truncation_index, ratio, diagnostics: diag.to_json() })
}

/// `Ψ_t` on the grid. The recursion stops when the newest term falls below
/// `tol · sup|Φ_t|` or at `k_max`.
pub fn psi_series(solver: &Solver, t: f64, grids: &Grids) -> Result<(KernelGrid, SeriesDiagnostics)> {
    let cs = solver.columns(&[t], grids, true, false)?;
    require_convergence(&cs.diag)?;
    let psi = cs.psi.expect("requested").remove(0);
    let err_est = cs.diag.truncation_bound[0];
    let g = KernelGrid::new(
        t,
        grids.x_nodes(),
        grids.y_nodes(),
        psi,
        GridMeta {
            provenance: Provenance::Psi,
            err_est,
            spacing: solver.grid.dx(),
            half_width: 0.5 * solver.grid.length,
            flags: vec![format!("terms={}", cs.diag.truncation_index)],
        },
    )?;
    Ok((g, cs.diag))
}

/// Individual terms `Φ^{⋆k}_t`, `k = 1..`, as kernel grids.
pub fn series_terms(solver: &Solver, t: f64, grids: &Grids) -> Result<(Vec<KernelGrid>, SeriesDiagnostics)> {
    let cs = solver.columns(&[t], grids, false, true)?;
    let out = cs
        .terms
        .into_iter()
        .map(|mut per_t| {
            KernelGrid::new(
                t,
                grids.x_nodes(),
                grids.y_nodes(),
                per_t.remove(0),
                GridMeta {
                    provenance: Provenance::PhiK,
                    err_est: 0.0,
                    spacing: solver.grid.dx(),
                    half_width: 0.5 * solver.grid.length,
                    flags: Vec::new(),
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, cs.diag))
}
