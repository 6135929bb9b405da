//! Truncations, truncation energies, barrier problems and the iteration constants.

mod barrier;
mod constants;
mod gate;
mod truncation;

pub use barrier::{
    barrier_comparison, build_barrier_sources, refinement_difference, solve_barrier, BarrierComparison,
    BarrierSources, BarrierVariant, SourceNorms,
};
pub use constants::{
    exponent_sum, geometric_iteration, kappa_exponent_exact, recursion_audit, recursion_margins, AAssembly,
    AChoice, ConstantInputs, GeometricIteration, IterationConstants, RecursionAudit, RecursionRow,
};
pub use gate::{kappa_empirical, linfty_gate, GateVerdict, KappaEmpirical};
pub use truncation::{
    chebyshev_audit, gradient_excess, is_monotone, nesting_violations, previous_cylinder, truncate,
    truncation_energy, truncation_sequence, ChebyshevAudit, TruncationReport,
};
