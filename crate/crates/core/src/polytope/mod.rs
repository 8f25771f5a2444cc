//! Tripartite boxes `P(x, y, zo | a, b, ch)`, the nonsignaling conditions,
//! and the bound on how well any third party can predict Alice's outcome.

mod lp;
mod nsbox;
mod sampler;
mod theorem;

pub use lp::{
    lp_curve, lp_delta_for_pattern, lp_max_delta, reduced_patterns, CurvePoint, LpProblem, LpReport,
    PatternOptimum, SignPattern, LP_PATTERN_GUARD, LP_VARIABLE_GUARD,
};
pub use nsbox::{certify, check_nonsignaling, BoxShape, Condition, NsBox, Violation, CERTIFY_TOL};
pub use sampler::{sample_nonsignaling, sample_nonsignaling_weighted, SamplerWeights, SAMPLER_GUARD};
pub use theorem::{
    appendix_a_check, statistical_distance, theorem1_check, theorem1_check_with, AppendixReport,
    DistanceResult, Inequality, InequalityFailure, SLACK_TOL,
};
