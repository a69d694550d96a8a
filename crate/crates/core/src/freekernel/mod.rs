//! The unperturbed kernel: Fourier inversion, derivatives, bound templates and
//! the compound measures used to express its bounds.

pub mod bounds;
pub mod compound;
pub mod grid;
pub mod inversion;

pub use grid::{GridMeta, KernelGrid, Provenance};
pub use inversion::{fourier_invert_p0, p0_derivative, p0_time_derivative, FreeKernel};
pub use compound::{build_compound_measures, CompoundFamily, CompoundMeasure, Tabulated};
pub use bounds::{f_up_shape, g_t, h_t_eps, verify_p0_bounds, BoundTemplate, LowerFit, P0BoundsReport, UpperFit};
