//! The parametrix series: `Φ`, its time-space convolution powers, `Ψ`, the
//! assembled kernel and the approximative solution.

pub mod assemble;
pub mod convolution;
pub mod engine;
pub mod model;
pub mod phi;
pub mod series;
pub mod solver;

pub use assemble::{
    approx_kernel_p_eps, approx_kernel_p_eps_multi, assemble_p, assemble_p_multi, clamp_negatives, residual_commutator,
    residual_q_eps, residual_q_eps_multi, NegativeReport,
};
pub use convolution::{convolve_timespace, QuadratureSpec};
pub use model::{Freeze, ModelSpec, SeriesParams};
pub use phi::{compensated_jump_integral, JumpTarget, eval_phi, phi_grid, phi_growth, LineKernel, PhiGrowth, PhiLine};
pub use series::{psi_series, require_convergence, series_terms};
pub use solver::{default_length, ColumnSet, Grids, SeriesDiagnostics, Solver, SolverOptions};
