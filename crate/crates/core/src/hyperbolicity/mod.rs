//! Hyperbolicity checks: conditions on return blocks, the axial period-2
//! orbit, Lyapunov exponents, the search for `R★` and parameter scans.

pub mod conditions;
pub mod lyapunov;
pub mod period2;
pub mod rstar;
pub mod scan;

pub use conditions::{
    check_a0, check_assumptions, check_conditions, check_flat_lemma, verify_cone,
    ConditionReport, ConeCheck, Flag, Region,
};
pub use lyapunov::{lyapunov, LyapunovEstimate, LyapunovMode};
pub use period2::{period2_classify, Period2Class, Period2Report};
pub use rstar::{find_r_star, RStarError, RStarEvidence, RStarReport};
pub use scan::{scan, ScanCell, ScanConfig, Verdict};
