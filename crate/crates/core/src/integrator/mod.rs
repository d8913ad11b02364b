//! Implicit Runge-Kutta time stepping of the projected system
//! `u' = A u + P_m B(u)` and the oracles used to check it.
//!
//! The stepper never forms `A W`: every stage iteration and every update goes
//! through the per-mode resolvent factorizations in [`ResolventCache`].

mod dense;
mod derivative;
mod picard;
mod reference;
mod resolvent;
mod step;

pub use dense::dense_stage_step;
pub use derivative::{flow_derivative, DERIVATIVE_GAP_LIMIT};
pub use picard::{picard_oracle, PicardOptions, PicardOutcome};
pub use reference::{
    compute_reference, reference_solution, reference_solution_with, ReferenceCache, ReferenceOptions,
};
pub use resolvent::{build_resolvent_cache, ResolventCache};
pub use step::{
    empirical_step_limit, integrate, integrate_with_cache, rk_step, tangent_step,
    IntegrateOptions, Run, StageOptions, StageVector, StepRecord,
};
