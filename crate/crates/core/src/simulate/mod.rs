//! Monte Carlo sampling of the base Lévy process and of the perturbed
//! process, and comparison of samples with computed kernels.
//!
//! Path `i` draws from a ChaCha8 generator seeded with the plan seed and set
//! to stream `i`, so results do not depend on the thread count.

mod compare;
mod jumps;
mod paths;
mod plan;

pub use compare::{compare_density, compare_to_row, DensityComparison};
pub use jumps::{stable_standard, JumpLaw};
pub use paths::{sample_base, sample_perturbed, SampleSet};
pub use plan::{default_cutoff, Scheme, SimulationPlan, MAX_JUMPS_PER_PATH};
