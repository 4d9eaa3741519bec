//! Exactly enumerable finite worlds for checking the risk bound, and
//! synthetic image worlds with known ground truth.

mod finite;
mod synth;

pub use finite::{
    decompose_posterior, exact_risks, identity_max_error, input_satisfies, product_form, random_complete_world,
    random_reliable_complete_world, random_world, sum_form, sweep, verify_bound, BoundReport, ExactRisks,
    FiniteWorld, PosteriorDecomposition, SweepConfig, SweepReport, BOUND_SLACK, MAX_HYPOTHESES,
};
pub use synth::{coded_transform, gen_synthetic, SynthSpec, SynthTruth, SynthWorld};
