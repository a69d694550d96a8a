//! Lévy measures, characteristic exponents, the scaling function and the
//! structural conditions placed on the base measure and the perturbation.

pub mod conditions;
pub mod measure;
pub mod perturbation;
pub mod scaling;
pub mod symbol;
pub mod tail;

pub use conditions::{check_a1, check_perturbation, default_probes, A1Report, PerturbationReport, Regime, SamplePlan};
pub use measure::{stable_density_constant, DensityShape, Envelope, EvenIntegrand, LevyMeasureSpec};
pub use perturbation::{Amplitude, PerturbationKernel, PerturbationSpec, Profile};
pub use scaling::{estimate_sigma, log_nodes, ls_slope, scaling_rho, ScalingTable};
pub use tail::{check_subexponential, check_tail_hypotheses, TailForm, TailFunctionSpec, TailShape, Verdict};
pub use symbol::{Symbol, SymbolTable};
