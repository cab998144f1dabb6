//! Continued fractions over the projective line `ℝ ∪ {∞}`.
//!
//! `[a₁, …, aₙ] = 1/(a₁ + [a₂, …, aₙ])` with `[a] = 1/a`. Arithmetic uses a
//! single unsigned infinity, so evaluation is total: a vanishing denominator
//! produces `∞` and `1/∞ = 0`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Below this magnitude `a + c + abc` is treated as zero by [`abc_reduce`].
pub const NEAR_SINGULAR_B: f64 = 1e-12;

/// Magnitude above which comparisons switch to the circle chart.
pub const CIRCLE_CHART_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CfError {
    #[error("a + c + abc = {0:e} is too close to zero for the ABC reduction")]
    NearSingularB(f64),
    #[error("cyclic order needs three distinct points")]
    DegenerateTriple,
}

/// A point of `ℝ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProjValue(f64);

impl ProjValue {
    pub const INFINITY: ProjValue = ProjValue(f64::INFINITY);
    pub const ZERO: ProjValue = ProjValue(0.0);

    /// Wraps a real; either signed infinity maps to the single `∞`.
    pub fn new(v: f64) -> Self {
        if v.is_infinite() {
            Self::INFINITY
        } else {
            ProjValue(v)
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// The underlying real, `f64::INFINITY` for `∞`.
    pub fn value(self) -> f64 {
        self.0
    }

    /// Projective reciprocal: `1/0 = ∞`, `1/∞ = 0`.
    pub fn recip(self) -> Self {
        if self.0 == 0.0 {
            Self::INFINITY
        } else if self.0.is_infinite() {
            Self::ZERO
        } else {
            ProjValue(1.0 / self.0)
        }
    }

    /// `self + a` with `∞ + a = ∞` (including `∞ + ∞`).
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, a: ProjValue) -> Self {
        if self.is_infinite() || a.is_infinite() {
            Self::INFINITY
        } else {
            ProjValue::new(self.0 + a.0)
        }
    }

    pub fn add_real(self, a: f64) -> Self {
        self.add(ProjValue::new(a))
    }

    /// Position on the circle `ℝ ∪ {∞} ≅ S¹`, as an angle in `(−π, π]`
    /// (`v ↦ 2·atan v`, with `∞ ↦ π`).
    pub fn angle(self) -> f64 {
        if self.is_infinite() {
            PI
        } else {
            2.0 * self.0.atan()
        }
    }
}

impl From<f64> for ProjValue {
    fn from(v: f64) -> Self {
        ProjValue::new(v)
    }
}

impl fmt::Display for ProjValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Geodesic distance on the circle chart, in `[0, π]`.
pub fn circle_distance(a: ProjValue, b: ProjValue) -> f64 {
    let d = (a.angle() - b.angle()).abs().rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Closeness with `max(1, |·|)` relative scaling, switching to the circle
/// chart when either side is infinite or beyond [`CIRCLE_CHART_THRESHOLD`].
pub fn proj_close(a: ProjValue, b: ProjValue, tol: f64) -> bool {
    proj_error(a, b) <= tol
}

/// The error measure behind [`proj_close`].
pub fn proj_error(a: ProjValue, b: ProjValue) -> f64 {
    let (x, y) = (a.value(), b.value());
    if !a.is_finite()
        || !b.is_finite()
        || x.abs() > CIRCLE_CHART_THRESHOLD
        || y.abs() > CIRCLE_CHART_THRESHOLD
    {
        circle_distance(a, b)
    } else {
        (x - y).abs() / 1f64.max(x.abs()).max(y.abs())
    }
}

/// A finite continued fraction `[a₀; a₁, …, aₙ]` with optional head `a₀`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CFrac {
    pub head: Option<f64>,
    pub entries: Vec<ProjValue>,
}

impl CFrac {
    pub fn new<I, T>(entries: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<ProjValue>,
    {
        Self {
            head: None,
            entries: entries.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_head(mut self, head: f64) -> Self {
        self.head = Some(head);
        self
    }

    pub fn eval(&self) -> ProjValue {
        eval_cf(self)
    }
}

/// Backward-recursion evaluation in projective arithmetic.
pub fn eval_cf(cf: &CFrac) -> ProjValue {
    let tail = eval_entries(&cf.entries);
    match cf.head {
        Some(h) => tail.add_real(h),
        None => tail,
    }
}

/// `[a₁, …, aₙ]`; the empty fraction evaluates to `0`.
pub fn eval_entries(entries: &[ProjValue]) -> ProjValue {
    entries
        .iter()
        .rev()
        .fold(ProjValue::ZERO, |acc, &a| a.add(acc).recip())
}

/// Collapses a segment `(a, b, c)` inside any continued fraction:
/// `[…, x, a, b, c, y, …] = […, x + A, B, C + y, …]` with `B = a + c + abc`,
/// `A = bc/B`, `C = ab/B`.
pub fn abc_reduce(a: f64, b: f64, c: f64) -> Result<(f64, f64, f64), CfError> {
    let big_b = a + c + a * b * c;
    if !(big_b.abs() >= NEAR_SINGULAR_B) {
        return Err(CfError::NearSingularB(big_b));
    }
    Ok((b * c / big_b, big_b, a * b / big_b))
}

/// One collision of curvature transport: `B' = 1/(τ + 1/(R + B))`.
pub fn curvature_step(b: ProjValue, tau: f64, refl: f64) -> ProjValue {
    b.add_real(refl).recip().add_real(tau).recip()
}

/// Transport through `m + 1` reflections on one circle of half-chord `d`
/// (flights `2d` in between) followed by the exit flight `tau_exit`,
/// via the collapsed form `[τ_exit, R/2, −2m·d, R/2 + B]`.
pub fn block_reduce_same_arc(m: u64, d: f64, tau_exit: f64, b: ProjValue) -> ProjValue {
    let half_refl = -1.0 / d;
    eval_entries(&[
        tau_exit.into(),
        half_refl.into(),
        (-2.0 * m as f64 * d).into(),
        b.add_real(half_refl),
    ])
}

/// `true` iff `b` lies in the counterclockwise interval `(a, c)` of the circle.
pub fn cyclic_order(a: ProjValue, b: ProjValue, c: ProjValue) -> Result<bool, CfError> {
    if a == b || b == c || a == c {
        return Err(CfError::DegenerateTriple);
    }
    let base = a.angle();
    let offset = |v: ProjValue| (v.angle() - base).rem_euclid(2.0 * PI);
    Ok(offset(b) < offset(c))
}

/// A Möbius map `t ↦ (p·t + q)/(r·t + s)` acting on the projective line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius {
        p: 1.0,
        q: 0.0,
        r: 0.0,
        s: 1.0,
    };

    /// The map `t ↦ 1/(a + t)` contributed by a single entry.
    pub fn entry(a: f64) -> Self {
        Mobius {
            p: 0.0,
            q: 1.0,
            r: 1.0,
            s: a,
        }
    }

    /// One collision, `B ↦ 1/(τ + 1/(R + B))`.
    pub fn collision(tau: f64, refl: f64) -> Self {
        Mobius {
            p: 1.0,
            q: refl,
            r: tau,
            s: 1.0 + tau * refl,
        }
    }

    /// The map of `[a₁, …, aₙ, ·]` where the argument is the final entry.
    pub fn chain(entries: &[f64]) -> Self {
        entries
            .iter()
            .fold(Mobius::IDENTITY, |m, &a| m.then_inner(Mobius::entry(a)))
            .then_inner(Mobius::entry(0.0))
    }

    /// `self ∘ inner`.
    pub fn then_inner(self, inner: Mobius) -> Mobius {
        Mobius {
            p: self.p * inner.p + self.q * inner.r,
            q: self.p * inner.q + self.q * inner.s,
            r: self.r * inner.p + self.s * inner.r,
            s: self.r * inner.q + self.s * inner.s,
        }
    }

    pub fn det(self) -> f64 {
        self.p * self.s - self.q * self.r
    }

    /// Rescales so the largest entry has magnitude 1; the map is unchanged.
    pub fn normalized(self) -> Mobius {
        let m = self.p.abs().max(self.q.abs()).max(self.r.abs()).max(self.s.abs());
        if m > 0.0 && m.is_finite() {
            Mobius {
                p: self.p / m,
                q: self.q / m,
                r: self.r / m,
                s: self.s / m,
            }
        } else {
            self
        }
    }

    pub fn apply(self, t: ProjValue) -> ProjValue {
        if t.is_infinite() {
            return ProjValue::new(self.p).div(ProjValue::new(self.r));
        }
        let x = t.value();
        ProjValue::new(self.p * x + self.q).div(ProjValue::new(self.r * x + self.s))
    }

    /// The denominator `r·t + s`; for a unit-determinant collision product
    /// this is the wavefront width expansion along the block.
    pub fn denominator(self, t: ProjValue) -> f64 {
        if t.is_infinite() {
            f64::INFINITY
        } else {
            self.r * t.value() + self.s
        }
    }
}

impl ProjValue {
    fn div(self, den: ProjValue) -> ProjValue {
        if den.value() == 0.0 {
            ProjValue::INFINITY
        } else {
            ProjValue::new(self.value() / den.value())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64) -> ProjValue {
        ProjValue::new(x)
    }

    #[test]
    fn projective_conventions() {
        assert_eq!(v(0.0).recip(), ProjValue::INFINITY);
        assert_eq!(ProjValue::INFINITY.recip(), ProjValue::ZERO);
        assert_eq!(v(3.0).add(ProjValue::INFINITY), ProjValue::INFINITY);
        assert_eq!(v(f64::NEG_INFINITY), ProjValue::INFINITY);
    }

    #[test]
    fn eval_small_fractions() {
        assert_eq!(CFrac::new([2.0]).eval(), v(0.5));
        assert!((CFrac::new([1.0, 2.0]).eval().value() - 2.0 / 3.0).abs() < 1e-15);
        assert!((CFrac::new([1.0, 2.0]).with_head(1.0).eval().value() - 5.0 / 3.0).abs() < 1e-15);
        // 1/(1 + 1/(−1)) = 1/0.
        assert_eq!(CFrac::new([1.0, -1.0]).eval(), ProjValue::INFINITY);
        assert_eq!(CFrac::new([1.0, -1.0, 5.0]).eval(), v(1.0 / (1.0 + 1.0 / (-1.0 + 0.2))));
        assert_eq!(CFrac::new([0.0]).eval(), ProjValue::INFINITY);
    }

    #[test]
    fn trailing_zero_is_absorbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (x, a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.1..3.0));
            let long = CFrac::new([x, a, b, 0.0]).eval();
            let short = CFrac::new([x, a]).eval();
            assert!(proj_close(long, short, 1e-12));
        }
    }

    #[test]
    fn abc_examples() {
        let (a, b, c) = abc_reduce(1.0, 1.0, 1.0).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15 && (b - 3.0).abs() < 1e-15 && (c - 1.0 / 3.0).abs() < 1e-15);

        let (a, b, c) = abc_reduce(1.0, -1.0, -1.0).unwrap();
        assert_eq!((a, b, c), (1.0, 1.0, -1.0));
        let lhs = CFrac::new([5.0, 1.0, -1.0, -1.0, 7.0]).eval();
        let rhs = CFrac::new([5.0 + a, b, c + 7.0]).eval();
        // [5,1,−1,−1,7] = 1/(5 + 1/(1 + 1/(−1 + 1/(−1 + 1/7)))) = 7/48.
        assert!((lhs.value() - 7.0 / 48.0).abs() < 1e-15);
        assert!(proj_close(lhs, rhs, 1e-14));

        assert!(matches!(abc_reduce(1.0, -2.0, 1.0), Err(CfError::NearSingularB(_))));
    }

    #[test]
    fn abc_on_same_arc_segment() {
        for &(j, d) in &[(1u32, 0.7), (4, 0.2), (10, 3.0)] {
            let refl = -2.0 / d;
            let jf = j as f64;
            let (a, b, c) = abc_reduce(refl / 2.0, -2.0 * jf * d, refl / 2.0).unwrap();
            let hat_d = d / (jf + 1.0);
            assert!((a + jf * hat_d).abs() < 1e-12);
            assert!((b + 2.0 * (jf + 1.0) / d).abs() < 1e-12);
            assert!((c + jf * hat_d).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_step_examples() {
        assert!((curvature_step(ProjValue::INFINITY, 0.8, -3.0).value() - 1.25).abs() < 1e-15);
        assert_eq!(curvature_step(v(0.0), 1.0, -2.0), v(2.0));
    }

    #[test]
    fn curvature_composition_matches_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let n = rng.random_range(1..12);
            let taus: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
            let refls: Vec<f64> = (0..n).map(|_| -2.0 / rng.random_range(0.05..1.0)).collect();
            let b0 = v(rng.random_range(-2.0..2.0));
            let mut b = b0;
            for k in 0..n {
                b = curvature_step(b, taus[k], refls[k]);
            }
            let mut entries = Vec::new();
            for k in (0..n).rev() {
                entries.push(v(taus[k]));
                entries.push(if k == 0 { b0.add_real(refls[0]) } else { v(refls[k]) });
            }
            assert!(proj_close(b, eval_entries(&entries), 1e-10));
        }
    }

    /// Unreduced transport through `m + 1` same-arc reflections.
    fn same_arc_direct(m: u64, d: f64, tau_exit: f64, b: ProjValue) -> ProjValue {
        let refl = -2.0 / d;
        let mut cur = b;
        for _ in 0..m {
            cur = curvature_step(cur, 2.0 * d, refl);
        }
        curvature_step(cur, tau_exit, refl)
    }

    #[test]
    fn same_arc_block_reduction() {
        assert_eq!(
            block_reduce_same_arc(0, 0.6, 1.3, v(0.4)),
            curvature_step(v(0.4), 1.3, -2.0 / 0.6)
        );
        let direct = same_arc_direct(3, 0.8, 1.1, v(0.0));
        assert!(proj_close(block_reduce_same_arc(3, 0.8, 1.1, v(0.0)), direct, 1e-12));
        for &d in &[0.05, 0.5, 2.0, 40.0] {
            let b = v(1.0 / d);
            let direct = same_arc_direct(10, d, 0.7 * d, b);
            assert!(proj_close(block_reduce_same_arc(10, d, 0.7 * d, b), direct, 1e-10));
        }
    }

    #[test]
    fn cyclic_order_examples() {
        assert!(cyclic_order(v(0.0), v(1.0), ProjValue::INFINITY).unwrap());
        assert!(cyclic_order(v(1.0), ProjValue::INFINITY, v(-1.0)).unwrap());
        assert!(!cyclic_order(v(0.0), v(-1.0), v(1.0)).unwrap());
        assert_eq!(cyclic_order(v(1.0), v(1.0), v(2.0)), Err(CfError::DegenerateTriple));
    }

    #[test]
    fn mobius_chain_matches_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..9);
            let entries: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let last = v(rng.random_range(-3.0..3.0));
            let mut all: Vec<ProjValue> = entries.iter().map(|&x| v(x)).collect();
            all.push(last);
            let m = Mobius::chain(&entries);
            assert!(proj_close(m.apply(last), eval_entries(&all), 1e-9));
        }
    }

    fn chain_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![-5.0f64..-0.2, 0.2f64..5.0], 1..6)
    }

    fn safe(x: ProjValue) -> bool {
        x.is_finite() && x.value().abs() < 1e6
    }

    proptest! {
        #[test]
        fn combine_identity(b in chain_strategy(), a in chain_strategy()) {
            // [b₁, …, bₙ + x] = [b₁, …, bₙ, a₁, …, aₘ] for x = [a₁, …, aₘ].
            let x = CFrac::new(a.clone()).eval();
            prop_assume!(safe(x));
            let mut lhs = b.clone();
            *lhs.last_mut().unwrap() += x.value();
            let rhs: Vec<f64> = b.iter().chain(a.iter()).copied().collect();
            let (l, r) = (CFrac::new(lhs).eval(), CFrac::new(rhs).eval());
            prop_assume!(safe(l) && safe(r));
            prop_assert!(proj_close(l, r, 1e-9));
        }

        #[test]
        fn combine2_identity(b in chain_strategy(), a in chain_strategy()) {
            // [b₁, …, bₙ, x] = [b₁, …, bₙ + a₁, a₂, …].
            let x = CFrac::new(a.clone()).eval();
            prop_assume!(safe(x));
            let mut lhs: Vec<ProjValue> = b.iter().map(|&t| v(t)).collect();
            lhs.push(x);
            let mut rhs = b.clone();
            *rhs.last_mut().unwrap() += a[0];
            rhs.extend_from_slice(&a[1..]);
            let (l, r) = (eval_entries(&lhs), CFrac::new(rhs).eval());
            prop_assume!(safe(l) && safe(r));
            prop_assert!(proj_close(l, r, 1e-9));
        }

        #[test]
        fn add_zero_identity(b in chain_strategy(), a in chain_strategy()) {
            let lhs: Vec<f64> = b.iter().copied().chain([0.0]).chain(a.iter().copied()).collect();
            let mut rhs = b.clone();
            *rhs.last_mut().unwrap() += a[0];
            rhs.extend_from_slice(&a[1..]);
            let (l, r) = (CFrac::new(lhs).eval(), CFrac::new(rhs).eval());
            prop_assume!(safe(l) && safe(r));
            prop_assert!(proj_close(l, r, 1e-9));
        }

        #[test]
        fn abc_in_context(
            pre in prop::collection::vec(0.2f64..4.0, 0..4),
            x in -3.0f64..3.0, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
            y in -3.0f64..3.0,
            post in prop::collection::vec(0.2f64..4.0, 0..4),
        ) {
            let Ok((big_a, big_b, big_c)) = abc_reduce(a, b, c) else { return Ok(()); };
            prop_assume!(big_b.abs() > 1e-3);
            let long: Vec<f64> = pre.iter().copied().chain([x, a, b, c, y]).chain(post.iter().copied()).collect();
            let short: Vec<f64> = pre.iter().copied().chain([x + big_a, big_b, big_c + y]).chain(post.iter().copied()).collect();
            let (l, s) = (CFrac::new(long).eval(), CFrac::new(short).eval());
            prop_assume!(safe(l) && safe(s));
            prop_assert!(proj_close(l, s, 1e-8));
        }

        #[test]
        fn single_entry_map_reverses_cyclic_order(
            a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0, k in -5.0f64..5.0
        ) {
            prop_assume!((a - b).abs() > 1e-3 && (b - c).abs() > 1e-3 && (a - c).abs() > 1e-3);
            let f = |t: f64| v(k).add_real(t).recip();
            let (fa, fb, fc) = (f(a), f(b), f(c));
            prop_assume!(fa != fb && fb != fc && fa != fc);
            let before = cyclic_order(v(a), v(b), v(c)).unwrap();
            prop_assert_eq!(cyclic_order(fc, fb, fa).unwrap(), before);
        }

        #[test]
        fn collision_map_preserves_cyclic_order(
            a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0,
            tau in 0.01f64..3.0, d in 0.01f64..2.0,
        ) {
            prop_assume!((a - b).abs() > 1e-3 && (b - c).abs() > 1e-3 && (a - c).abs() > 1e-3);
            let f = |t: f64| curvature_step(v(t), tau, -2.0 / d);
            let (fa, fb, fc) = (f(a), f(b), f(c));
            prop_assume!(fa != fb && fb != fc && fa != fc);
            prop_assert_eq!(
                cyclic_order(fa, fb, fc).unwrap(),
                cyclic_order(v(a), v(b), v(c)).unwrap()
            );
        }
    }
}
