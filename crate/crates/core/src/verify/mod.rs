//! Checks of the decay inequalities against semigroup data, over seeded
//! families of test functions.

pub mod best;
pub mod checks;
pub mod family;
pub mod gronwall;
pub mod report;
pub mod suite;

pub use best::{
    estimate_best_constant, transported_median_ratio, BestConstant, BestConstantTarget, Transport,
};
pub use checks::{
    check_envelope, check_envelopes, check_log_convexity, check_pointwise_inequality, check_wang,
    lp_constant_ratio, Inequality, GRID_SLACK, SPECTRAL_SLACK,
};
pub use family::{nonnegative_family, FamilyKind, Member, TestFunctionFamily, DEFAULT_MAX_MODE};
pub use gronwall::{
    auxiliary_power_ratio, check_gronwall_level, check_gronwall_recursion,
    replay_entropy_functional, GronwallLevel,
};
pub use report::{CheckResult, CheckStatus, VerificationReport};
pub use suite::{run_suite, SuiteConfig};
