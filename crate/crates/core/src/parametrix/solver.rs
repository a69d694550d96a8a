//! Kernel columns, full kernel matrices and semigroup actions on a circle grid.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{run, Operators, RunOptions, RunOutput, StepWeights, TimeGrid};
use super::model::ModelSpec;
use crate::error::{Error, Result};
use crate::freekernel::{GridMeta, KernelGrid, Provenance};
use crate::spectral::{delta_hat, forward, inverse, CircleGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Time nodes per octave of the geometric grid.
    pub per_octave: usize,
    /// Octaves below the largest output time.
    pub octaves: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { per_octave: 8, octaves: 18 }
    }
}

/// Grid selection for kernel output: every `x_stride`-th node for `x`, and the
/// listed node indices for `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub circle: CircleGrid,
    pub x_stride: usize,
    pub y_idx: Vec<usize>,
}

/// Default circle length: eight periods of the amplitude (or `8π`).
pub fn default_length(model: &ModelSpec) -> f64 {
    match model.pert.period() {
        Some(p) => {
            let mut l = p;
            while l < 8.0 * std::f64::consts::PI * (1.0 - 1e-12) {
                l += p;
            }
            l
        }
        None => 8.0 * std::f64::consts::PI,
    }
}

impl Grids {
    pub fn new(circle: CircleGrid, x_stride: usize, y_idx: Vec<usize>) -> Result<Self> {
        if x_stride == 0 || !circle.n.is_multiple_of(x_stride) || y_idx.iter().any(|&j| j >= circle.n) || y_idx.is_empty() {
            return Err(Error::GridMismatch("bad stride or column index".into()));
        }
        Ok(Self { circle, x_stride, y_idx })
    }

    /// Full square grid at the given stride.
    pub fn square(circle: CircleGrid, stride: usize) -> Result<Self> {
        Self::new(circle, stride, (0..circle.n).step_by(stride.max(1)).collect())
    }

    /// Chooses `n` (a power of two, at least 1024) so that `t_min q(ξ_max) >= 25`.
    pub fn auto(model: &ModelSpec, t_min: f64) -> Result<CircleGrid> {
        let length = default_length(model);
        let symbol = crate::exponent::Symbol::of_measure(&model.base)?;
        let mut n = 1024;
        while n < 16384 {
            let g = CircleGrid::new(n, length)?;
            if t_min * symbol.eval(g.max_freq()) >= 25.0 {
                break;
            }
            n *= 2;
        }
        CircleGrid::new(n, length)
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.circle.n).step_by(self.x_stride).map(|j| self.circle.node(j)).collect()
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        self.y_idx.iter().map(|&j| self.circle.node(j)).collect()
    }
}

/// Per-order norms of the series terms, aggregated over the computed columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub t: Vec<f64>,
    /// `sup[k-1][i]` = max over grid of `|Φ^{⋆k}_{t_i}|`.
    pub sup: Vec<Vec<f64>>,
    /// Largest column `L¹` norm of `Φ^{⋆k}_{t_i}`.
    pub l1: Vec<Vec<f64>>,
    /// `sup[k] / sup[k-1]`.
    pub ratios: Vec<Vec<f64>>,
    pub truncation_index: usize,
    /// `last term / (1 - last ratio)` per time; infinite when the last ratio is `>= 1`.
    pub truncation_bound: Vec<f64>,
    pub converged: bool,
}

impl SeriesDiagnostics {
    fn from_levels(t: &[f64], outs: &[RunOutput]) -> Self {
        let depth = outs.iter().map(|o| o.levels.len()).max().unwrap_or(0);
        let nt = t.len();
        let mut sup = vec![vec![0.0; nt]; depth];
        let mut l1 = vec![vec![0.0; nt]; depth];
        for o in outs {
            for (k, lv) in o.levels.iter().enumerate() {
                for i in 0..nt {
                    sup[k][i] = f64::max(sup[k][i], lv.sup[i]);
                    l1[k][i] = f64::max(l1[k][i], lv.l1[i]);
                }
            }
        }
        let ratios: Vec<Vec<f64>> = (1..depth)
            .map(|k| (0..nt).map(|i| if sup[k - 1][i] > 0.0 { sup[k][i] / sup[k - 1][i] } else { 0.0 }).collect())
            .collect();
        let truncation_bound = (0..nt)
            .map(|i| {
                let last = sup.last().map(|s| s[i]).unwrap_or(0.0);
                if last == 0.0 {
                    return 0.0;
                }
                match ratios.last() {
                    Some(r) if r[i] < 1.0 => last / (1.0 - r[i]),
                    _ => f64::INFINITY,
                }
            })
            .collect::<Vec<f64>>();
        let converged = truncation_bound.iter().all(|b| b.is_finite());
        Self { t: t.to_vec(), sup, l1, ratios, truncation_index: depth, truncation_bound, converged }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Computed columns at several times.
#[derive(Debug, Clone)]
pub struct ColumnSet {
    pub t: Vec<f64>,
    pub grids: Grids,
    /// `p[i]` has shape `(n_x, n_y)`.
    pub p: Vec<Array2<f64>>,
    pub psi: Option<Vec<Array2<f64>>>,
    /// `terms[k-1][i]` is `Φ^{⋆k}_{t_i}` on the grid.
    pub terms: Vec<Vec<Array2<f64>>>,
    pub diag: SeriesDiagnostics,
}

pub struct Solver {
    pub model: ModelSpec,
    pub grid: CircleGrid,
    pub options: SolverOptions,
    pub(crate) ops: Operators,
}

impl Solver {
    pub fn new(model: &ModelSpec, grid: CircleGrid) -> Result<Self> {
        let ops = Operators::new(model, grid)?;
        Ok(Self { model: model.clone(), grid, options: SolverOptions::default(), ops })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Columns `y` that must be computed; others follow by a period shift.
    pub fn cell(&self) -> usize {
        self.ops.cell
    }

    pub fn perturbation_is_zero(&self) -> bool {
        self.ops.is_zero()
    }

    fn run_opts(&self, want_psi: bool, want_terms: bool) -> RunOptions {
        RunOptions {
            k_max: self.model.series_params.k_max,
            tol: self.model.series_params.tol,
            want_psi,
            want_terms,
        }
    }

    fn time_grid(&self, times: &[f64]) -> Result<TimeGrid> {
        TimeGrid::new(times, self.options.per_octave, self.options.octaves)
    }

    /// Runs the recursion from arbitrary Fourier-side seeds.
    pub(crate) fn run_seeds(&self, seeds: &[Vec<Complex64>], times: &[f64], want_psi: bool, want_terms: bool) -> Result<Vec<RunOutput>> {
        let tg = self.time_grid(times)?;
        let w = StepWeights::new(&self.ops, &tg);
        let opts = self.run_opts(want_psi, want_terms);
        Ok(seeds.iter().map(|s| run(&self.ops, &tg, &w, s, &opts)).collect())
    }

    /// Kernel columns `p_t(·, y_j)`, plus `Ψ` and the individual series terms when asked.
    pub fn columns(&self, times: &[f64], grids: &Grids, want_psi: bool, want_terms: bool) -> Result<ColumnSet> {
        if grids.circle != self.grid {
            return Err(Error::GridMismatch("output grid differs from the solver grid".into()));
        }
        let n = self.grid.n;
        let cell = self.cell();
        let mut bases: Vec<usize> = grids.y_idx.iter().map(|j| j % cell).collect();
        bases.sort_unstable();
        bases.dedup();
        let seeds: Vec<Vec<Complex64>> = bases.iter().map(|&b| delta_hat(&self.grid, b)).collect();
        let outs = self.run_seeds(&seeds, times, want_psi, want_terms)?;
        let diag = SeriesDiagnostics::from_levels(times, &outs);
        let nx = n / grids.x_stride;
        let ny = grids.y_idx.len();
        let to_values = |hat: &[Complex64]| inverse(hat);
        let mut base_cols: Vec<Vec<Vec<f64>>> = Vec::new(); // [base][time]
        let mut base_psi: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut base_terms: Vec<Vec<Vec<Vec<f64>>>> = Vec::new(); // [base][k][time]
        for o in &outs {
            base_cols.push(o.p_hat.iter().map(|h| to_values(h)).collect());
            if let Some(ps) = &o.psi_hat {
                base_psi.push(ps.iter().map(|h| to_values(h)).collect());
            }
            base_terms.push(o.terms.iter().map(|lv| lv.iter().map(|h| to_values(h)).collect()).collect());
        }
        let gather = |src: &dyn Fn(usize, usize) -> Option<Vec<f64>>, ti: usize| -> Array2<f64> {
            let mut a = Array2::zeros((nx, ny));
            for (c, &j) in grids.y_idx.iter().enumerate() {
                let b = bases.binary_search(&(j % cell)).unwrap();
                let shift = j - j % cell;
                if let Some(col) = src(b, ti) {
                    for r in 0..nx {
                        let i = r * grids.x_stride;
                        a[(r, c)] = col[(i + n - shift) % n];
                    }
                }
            }
            a
        };
        let p = (0..times.len()).map(|ti| gather(&|b, t| Some(base_cols[b][t].clone()), ti)).collect();
        let psi = want_psi.then(|| (0..times.len()).map(|ti| gather(&|b, t| Some(base_psi[b][t].clone()), ti)).collect());
        let depth = base_terms.iter().map(|t| t.len()).max().unwrap_or(0);
        let terms = if want_terms {
            (0..depth)
                .map(|k| {
                    (0..times.len())
                        .map(|ti| gather(&|b, t| base_terms[b].get(k).map(|lv| lv[t].clone()), ti))
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(ColumnSet { t: times.to_vec(), grids: grids.clone(), p, psi, terms, diag })
    }

    /// `p_t` on the grid as kernel grids, one per time.
    pub fn kernel_grids(&self, times: &[f64], grids: &Grids) -> Result<(Vec<KernelGrid>, SeriesDiagnostics)> {
        let cs = self.columns(times, grids, false, false)?;
        let meta = |diag: &SeriesDiagnostics, i: usize| GridMeta {
            provenance: Provenance::P,
            err_est: diag.truncation_bound.get(i).copied().unwrap_or(0.0),
            spacing: self.grid.dx(),
            half_width: 0.5 * self.grid.length,
            flags: Vec::new(),
        };
        let grids_out = cs
            .p
            .into_iter()
            .enumerate()
            .map(|(i, v)| KernelGrid::new(times[i], grids.x_nodes(), grids.y_nodes(), v, meta(&cs.diag, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok((grids_out, cs.diag))
    }

    /// `T_t f` on every node for each requested time, with `f` given on the nodes.
    pub fn semigroup(&self, f: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.semigroup_diag(f, times)?.0)
    }

    /// `T_t f` together with the norms of the series terms applied to `f`.
    pub fn semigroup_diag(&self, f: &[f64], times: &[f64]) -> Result<(Vec<Vec<f64>>, SeriesDiagnostics)> {
        if f.len() != self.grid.n {
            return Err(Error::GridMismatch("function length differs from the grid".into()));
        }
        let out = self.run_seeds(&[forward(f)], times, false, false)?;
        let diag = SeriesDiagnostics::from_levels(times, &out);
        Ok((out[0].p_hat.iter().map(|h| inverse(h)).collect(), diag))
    }

    /// Free kernel column `p⁰_t(·, y_j)` on the circle.
    pub fn free_column(&self, t: f64, j: usize) -> Vec<f64> {
        inverse(&self.ops.propagate(t, &delta_hat(&self.grid, j)))
    }

    /// `Φ_t(·, y_j)` on the circle, without time stepping.
    pub fn phi_column(&self, t: f64, j: usize) -> Vec<f64> {
        let free = self.ops.propagate(t, &delta_hat(&self.grid, j));
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n];
        self.ops.apply_g(&free, &mut out);
        inverse(&out)
    }

    /// Applies the discrete generator `-q + G` to nodal values.
    pub fn generator(&self, f: &[f64]) -> Vec<f64> {
        let hat = forward(f);
        let mut g = vec![Complex64::new(0.0, 0.0); self.grid.n];
        self.ops.apply_g(&hat, &mut g);
        let l: Vec<Complex64> = hat.iter().zip(&self.ops.q).zip(&g).map(|((h, q), gv)| -q * h + gv).collect();
        inverse(&l)
    }

    /// Applies `P_s` to nodal values.
    pub fn free_semigroup(&self, s: f64, f: &[f64]) -> Vec<f64> {
        inverse(&self.ops.propagate(s, &forward(f)))
    }
}
