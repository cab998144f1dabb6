//! Sufficient conditions for cone invariance of a single return block.
//!
//! Every inequality is recorded as a [`Flag`] carrying its signed margin;
//! margins below [`NEAR_TIE`] (relative) are undecidable and marked.

use serde::Serialize;

use crate::cfrac::ProjValue;
use crate::induced_maps::{curvature_return, ReturnBlock};

/// Relative margin under which a strict inequality counts as a tie.
pub const NEAR_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flag {
    pub holds: bool,
    /// Signed margin, positive when satisfied.
    pub slack: f64,
    pub near_tie: bool,
}

impl Flag {
    pub const FALSE: Flag = Flag {
        holds: false,
        slack: f64::NEG_INFINITY,
        near_tie: false,
    };

    /// `lhs < rhs`.
    pub fn lt(lhs: f64, rhs: f64) -> Flag {
        let slack = rhs - lhs;
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        let near_tie = if lhs.is_finite() && rhs.is_finite() {
            slack.abs() < NEAR_TIE * scale
        } else {
            lhs.is_nan() || rhs.is_nan() || lhs == rhs
        };
        Flag {
            holds: lhs < rhs,
            slack,
            near_tie,
        }
    }

    /// `lhs > rhs`.
    pub fn gt(lhs: f64, rhs: f64) -> Flag {
        Flag::lt(rhs, lhs)
    }

    /// `lhs ≤ rhs`; a tie is reported the same way as for strict comparisons.
    pub fn le(lhs: f64, rhs: f64) -> Flag {
        Flag {
            holds: lhs <= rhs,
            ..Flag::lt(lhs, rhs)
        }
    }

    pub fn and(self, other: Flag) -> Flag {
        Flag {
            holds: self.holds && other.holds,
            slack: self.slack.min(other.slack),
            near_tie: self.near_tie || other.near_tie,
        }
    }

    pub fn or(self, other: Flag) -> Flag {
        Flag {
            holds: self.holds || other.holds,
            slack: self.slack.max(other.slack),
            near_tie: self.near_tie || other.near_tie,
        }
    }

    /// Folds an integer precondition into the flag without touching the slack.
    fn require(self, ok: bool) -> Flag {
        Flag {
            holds: self.holds && ok,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// `i₁ ≥ 1`.
    X0,
    /// `i₁ = 0`, `i₂ ≥ 1`.
    X1,
    /// `i₁ = i₂ = 0`.
    X2,
}

impl Region {
    pub fn of(block: &ReturnBlock) -> Region {
        if block.i1 >= 1 {
            Region::X0
        } else if block.i2 >= 1 {
            Region::X1
        } else {
            Region::X2
        }
    }
}

/// `max{R − 1, 1} < b < R`.
pub fn check_a0(b: f64, r: f64) -> Flag {
    Flag::gt(b, (r - 1.0).max(1.0)).and(Flag::lt(b, r))
}

/// The assumption of the block's region; the other two are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub region: Region,
    pub a1: Option<Flag>,
    pub a2: Option<Flag>,
    pub a3: Option<Flag>,
}

impl AssumptionReport {
    /// The flag that applies to the block's region.
    pub fn applicable(&self) -> Flag {
        self.a1.or(self.a2).or(self.a3).unwrap_or(Flag::FALSE)
    }
}

fn p_factor(i0: u64) -> f64 {
    1.0 - 1.0 / (2.0 * (1 + i0) as f64)
}

fn q_factor(i2: u64) -> f64 {
    1.0 - 1.0 / (2.0 * i2 as f64)
}

pub fn check_assumptions(block: &ReturnBlock) -> AssumptionReport {
    let region = Region::of(block);
    let p = p_factor(block.i0);
    let w1 = block.i1 as f64 / (1 + block.i1) as f64 * block.d1;
    let mut report = AssumptionReport {
        region,
        a1: None,
        a2: None,
        a3: None,
    };
    match region {
        Region::X0 => {
            let first = Flag::lt(block.tau0, p * block.d0 + w1);
            let second = if block.i2 >= 1 {
                Flag::lt(block.tau1, q_factor(block.i2) * block.d2 + w1)
            } else {
                Flag::FALSE
            };
            report.a1 = Some(first.and(second).require(block.i0 >= 1 && block.i2 >= 1));
        }
        Region::X1 => {
            let q = q_factor(block.i2);
            let first = Flag::lt(block.d0 / (1 + block.i0) as f64, block.d1);
            let second = Flag::lt(block.tau0 + block.tau1, p * block.d0 + block.d1 + q * block.d2);
            report.a2 = Some(first.and(second));
        }
        Region::X2 => report.a3 = Some(Flag::le(block.tau0, block.d1 / 2.0)),
    }
    report
}

/// Flags of the compact formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaseFlags {
    pub d1: Flag,
    pub f1: Flag,
    pub d2: Flag,
    pub f2: Flag,
    /// The ordering comparison `X_p < X_d` behind `P1`.
    pub order: Flag,
    /// A paired condition together with `order`.
    pub p1: Flag,
    /// `D1` and `F2`.
    pub p2: Flag,
}

/// Flags of the expanded formulation in terms of `G₀`, `G₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetailedFlags {
    pub d1a: Flag,
    pub d1b: Flag,
    pub d1c: Flag,
    pub f1a: Flag,
    pub f1b: Flag,
    pub f1c: Flag,
    pub d2a: Flag,
    pub d2b: Flag,
    pub d2c: Flag,
    pub f2a: Flag,
    pub f2b: Flag,
    pub f2c: Flag,
    pub p1a: Flag,
    pub p1b: Flag,
}

impl DetailedFlags {
    pub fn d1(&self) -> bool {
        self.d1a.holds || self.d1b.holds || self.d1c.holds
    }
    pub fn f1(&self) -> bool {
        self.f1a.holds || self.f1b.holds || self.f1c.holds
    }
    pub fn d2(&self) -> bool {
        self.d2a.holds || self.d2b.holds || self.d2c.holds
    }
    pub fn f2(&self) -> bool {
        self.f2a.holds || self.f2b.holds || self.f2c.holds
    }
    pub fn paired(&self) -> bool {
        (self.d1() && self.d2()) || (self.f1() && self.f2())
    }
    pub fn p1(&self) -> bool {
        self.paired() && (self.p1a.holds || self.p1b.holds)
    }
    pub fn cone_ok(&self) -> bool {
        self.p1() || (self.d1() && self.f2())
    }
    fn any_tie(&self) -> bool {
        [
            self.d1a, self.d1b, self.d1c, self.f1a, self.f1b, self.f1c, self.d2a, self.d2b,
            self.d2c, self.f2a, self.f2b, self.f2c, self.p1a, self.p1b,
        ]
        .iter()
        .any(|f| f.near_tie)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub assumptions: AssumptionReport,
    pub base: BaseFlags,
    pub detailed: DetailedFlags,
    pub g0: f64,
    pub g1: f64,
    /// `(D1∧D2∧P1) ∨ (F1∧F2∧P1) ∨ (D1∧F2)` from the base flags.
    pub cone_ok: bool,
    /// Some inequality was within the tie margin.
    pub near_tie: bool,
}

/// Agreement between the two formulations, per condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Equivalence {
    pub d1: bool,
    pub f1: bool,
    pub d2: bool,
    pub f2: bool,
    pub p1: bool,
    pub cone: bool,
}

impl Equivalence {
    pub fn all(&self) -> bool {
        self.d1 && self.f1 && self.d2 && self.f2 && self.p1 && self.cone
    }
}

impl ConditionReport {
    pub fn equivalence(&self) -> Equivalence {
        let b = &self.base;
        let d = &self.detailed;
        Equivalence {
            d1: b.d1.holds == d.d1(),
            f1: b.f1.holds == d.f1(),
            d2: b.d2.holds == d.d2(),
            f2: b.f2.holds == d.f2(),
            p1: b.p1.holds == d.p1(),
            cone: self.cone_ok == d.cone_ok(),
        }
    }
}

/// `[−K, t] = 1/(−K + 1/t)` evaluated projectively.
fn inner(k: f64, t: f64) -> f64 {
    ProjValue::new(t).recip().add_real(-k).recip().value()
}

pub fn check_conditions(block: &ReturnBlock) -> ConditionReport {
    let i1 = block.i1 as f64;
    let k = 2.0 * (1.0 + i1) / block.d1;
    let w1 = i1 / (1.0 + i1) * block.d1;
    let g0 = block.tau0 - block.d0 - w1;
    let g1 = block.tau1 - w1 - block.d2;
    let t_d = g0;
    let t_p = g0 + block.d0 / (2.0 * (1 + block.i0) as f64);
    let y_d = g1 + inner(k, t_d);
    let y_p = g1 + inner(k, t_p);
    let has_f = block.i2 >= 1;
    let f_bound = if has_f {
        -block.d2 / (2.0 * block.i2 as f64)
    } else {
        f64::NEG_INFINITY
    };

    let d1 = Flag::gt(y_d, 0.0);
    let d2 = Flag::gt(y_p, 0.0);
    let (f1, f2) = if has_f {
        (Flag::lt(y_d, f_bound), Flag::lt(y_p, f_bound))
    } else {
        (Flag::FALSE, Flag::FALSE)
    };
    let x_d = ProjValue::new(y_d).recip().value();
    let x_p = ProjValue::new(y_p).recip().value();
    let order = Flag::lt(x_p, x_d);
    let paired = d1.and(d2).or(f1.and(f2));
    let p1 = paired.and(order);
    let p2 = d1.and(f2);
    let cone_ok = p1.holds || p2.holds;
    let base = BaseFlags {
        d1,
        f1,
        d2,
        f2,
        order,
        p1,
        p2,
    };

    let recip = |v: f64| ProjValue::new(v).recip().value();
    let (a_d, a_p) = (recip(t_d), recip(t_p));
    let r1 = recip(g1);
    let d_family = |a: f64| {
        (
            Flag::gt(g1, 0.0).and(Flag::gt(a, k)),
            Flag::gt(g1, 0.0).and(Flag::lt(a + r1, k)),
            Flag::lt(g1, 0.0)
                .and(Flag::lt(a + r1, k))
                .and(Flag::lt(k, a)),
        )
    };
    let f_family = |a: f64| {
        if !has_f {
            return (Flag::FALSE, Flag::FALSE, Flag::FALSE);
        }
        let shifted = g1 - f_bound;
        let rs = recip(shifted);
        (
            Flag::lt(shifted, 0.0).and(Flag::lt(a, k)),
            Flag::lt(shifted, 0.0).and(Flag::gt(a + rs, k)),
            Flag::gt(shifted, 0.0)
                .and(Flag::gt(a + rs, k))
                .and(Flag::gt(k, a)),
        )
    };
    let (d1a, d1b, d1c) = d_family(a_d);
    let (d2a, d2b, d2c) = d_family(a_p);
    let (f1a, f1b, f1c) = f_family(a_d);
    let (f2a, f2b, f2c) = f_family(a_p);
    let half1 = (1.0 - 1.0 / (2.0 * (1.0 + i1))) * block.d1;
    let detailed = DetailedFlags {
        d1a,
        d1b,
        d1c,
        f1a,
        f1b,
        f1c,
        d2a,
        d2b,
        d2c,
        f2a,
        f2b,
        f2c,
        p1a: Flag::lt(block.tau0, p_factor(block.i0) * block.d0 + half1),
        p1b: Flag::gt(block.tau0, block.d0 + half1),
    };
    let near_tie = detailed.any_tie()
        || [d1, f1, d2, f2, order].iter().any(|f| f.near_tie);
    ConditionReport {
        assumptions: check_assumptions(block),
        base,
        detailed,
        g0,
        g1,
        cone_ok,
        near_tie,
    }
}

/// Direct test of `0 < B(DF V^p) < B(DF V^d) < 1/d₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCheck {
    pub holds: bool,
    pub near_tie: bool,
    pub b_p: f64,
    pub b_d: f64,
    pub upper: f64,
}

pub fn verify_cone(block: &ReturnBlock) -> ConeCheck {
    let b_p = curvature_return(ProjValue::ZERO, block).value();
    let b_d = curvature_return(ProjValue::new(1.0 / block.d0), block).value();
    let upper = 1.0 / block.d2;
    let chain = Flag::lt(0.0, b_p)
        .and(Flag::lt(b_p, b_d))
        .and(Flag::lt(b_d, upper));
    ConeCheck {
        holds: chain.holds,
        near_tie: chain.near_tie,
        b_p,
        b_d,
        upper,
    }
}

/// `τ₀ + τ₁ > d₀ + d₂` for a block with `i₁ = 0`.
pub fn check_flat_lemma(block: &ReturnBlock) -> Option<Flag> {
    (block.i1 == 0).then(|| Flag::gt(block.tau0 + block.tau1, block.d0 + block.d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(i: (u64, u64, u64), tau: (f64, f64), d: (f64, f64, f64)) -> ReturnBlock {
        ReturnBlock {
            i0: i.0,
            i1: i.1,
            i2: i.2,
            tau0: tau.0,
            tau1: tau.1,
            d0: d.0,
            d1: d.1,
            d2: d.2,
            eta2: 2 * i.2,
        }
    }

    #[test]
    fn a0_examples() {
        assert!(check_a0(1.5, 2.0).holds);
        assert!((check_a0(1.5, 2.0).slack - 0.5).abs() < 1e-15);
        assert!(!check_a0(2.1, 2.0).holds);
        assert!(!check_a0(0.9, 1.5).holds);
    }

    #[test]
    fn regions_and_assumptions() {
        let x2 = block((2, 0, 0), (1.0, 1.0), (0.5, 4.0, 0.5));
        let r = check_assumptions(&x2);
        assert_eq!(r.region, Region::X2);
        assert!(r.a3.unwrap().holds && r.a1.is_none() && r.a2.is_none());

        let x0 = block((1, 2, 1), (3.0, 0.1), (0.5, 1.0, 0.5));
        let r = check_assumptions(&x0);
        assert_eq!(r.region, Region::X0);
        assert!(!r.a1.unwrap().holds);

        let x1 = block((1, 0, 3), (0.3, 0.2), (0.5, 2.0, 0.5));
        let r = check_assumptions(&x1);
        assert_eq!(r.region, Region::X1);
        assert!(r.applicable().holds);
        // A1's integer preconditions.
        assert!(!check_assumptions(&block((0, 1, 1), (0.01, 0.01), (1.0, 1.0, 1.0))).applicable().holds);
    }

    fn cone_matches(b: &ReturnBlock) {
        let rep = check_conditions(b);
        let cone = verify_cone(b);
        if !rep.near_tie && !cone.near_tie {
            assert!(rep.equivalence().all(), "{b:?}: {:?}", rep.equivalence());
            assert_eq!(rep.cone_ok, cone.holds, "{b:?} {cone:?}");
        }
    }

    #[test]
    fn assumption_one_implies_f_route() {
        // τ₀, τ₁ far below their bounds.
        let b = block((2, 1, 2), (0.3, 0.3), (0.8, 1.5, 0.8));
        assert!(check_assumptions(&b).applicable().holds);
        let rep = check_conditions(&b);
        assert!(rep.base.f1.holds && rep.base.f2.holds && rep.base.p1.holds);
        assert!(verify_cone(&b).holds);
        cone_matches(&b);
    }

    #[test]
    fn subcase_a_gives_d_route() {
        let b = block((1, 0, 1), (0.3, 1.2), (1.0, 3.0, 0.2));
        assert!(b.tau0 < p_factor(b.i0) * b.d0);
        assert!(check_assumptions(&b).applicable().holds);
        let rep = check_conditions(&b);
        assert!(rep.base.d1.holds && rep.base.d2.holds && rep.base.p1.holds);
        cone_matches(&b);
    }

    #[test]
    fn f_conditions_empty_without_i2() {
        let b = block((0, 0, 0), (0.5, 0.5), (0.7, 2.0, 0.7));
        let rep = check_conditions(&b);
        assert!(!rep.base.f1.holds && !rep.base.f2.holds && !rep.detailed.f1() && !rep.detailed.f2());
        cone_matches(&b);
    }

    #[test]
    fn failing_blocks_fail_both_ways() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut failing = 0;
        for _ in 0..10_000 {
            let b = block(
                (rng.random_range(0..4), rng.random_range(0..4), rng.random_range(0..4)),
                (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)),
                (rng.random_range(0.05..1.0), rng.random_range(0.05..3.0), rng.random_range(0.05..1.0)),
            );
            let rep = check_conditions(&b);
            if !rep.cone_ok && !rep.near_tie {
                failing += 1;
                assert!(!verify_cone(&b).holds, "{b:?}");
            }
            cone_matches(&b);
        }
        assert!(failing > 100);
    }

    #[test]
    fn flat_lemma_only_for_i1_zero() {
        assert!(check_flat_lemma(&block((0, 1, 0), (1.0, 1.0), (1.0, 1.0, 1.0))).is_none());
        assert!(check_flat_lemma(&block((0, 0, 0), (1.0, 1.2), (1.0, 1.0, 1.0))).unwrap().holds);
    }

    proptest! {
        #[test]
        fn formulations_agree_on_synthetic_blocks(
            i0 in 0u64..6, i1 in 0u64..6, i2 in 0u64..6,
            tau0 in 0.01f64..4.0, tau1 in 0.01f64..4.0,
            d0 in 0.01f64..1.0, d1 in 0.01f64..5.0, d2 in 0.01f64..1.0,
        ) {
            cone_matches(&block((i0, i1, i2), (tau0, tau1), (d0, d1, d2)));
        }
    }
}
