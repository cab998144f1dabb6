//! Cell decomposition of the first-entry set and the two induced maps.
//!
//! `M̂₁` holds the points of `Γ₁` whose predecessor lies on `Γ_R`; `M_n` the
//! ones among them with exactly `n` further reflections on `Γ₁`. The set `M`
//! collects the middle reflections `F^{⌈n/2⌉} M_n` of each run.

use serde::Serialize;
use thiserror::Error;

use crate::billiard_map::{
    billiard_step, billiard_step_back, half_chord, CollisionEvent, PhasePoint, StepError,
    TANGENTIAL_TOL,
};
use crate::cfrac::{circle_distance, curvature_step, eval_entries, Mobius, ProjValue};
use crate::geometry::{ArcId, LemonTable};

/// Cap on same-arc reflections before a point is treated as part of `N`.
pub const ETA_CAP: u64 = 1_000_000;
/// Successive truncations closer than this (circle metric) count as converged.
pub const BACKWARD_CF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize)]
pub enum InducedError {
    #[error("point is not on the unit arc")]
    NotOnUnitArc,
    #[error("run not resolved within {0} reflections (point of N)")]
    UnresolvedCap(u64),
    #[error("{source} after {collisions} collisions")]
    Step {
        source: StepError,
        collisions: u64,
    },
}

fn ceil_half(n: u64) -> u64 {
    n.div_ceil(2)
}

/// Position of a point of `Γ₁` inside the decomposition of `M₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellIndex {
    /// The cell `M_n` of the run's entry point.
    pub n: u64,
    /// Offset `k` with `x ∈ F^k M_n`.
    pub phase: u64,
}

impl CellIndex {
    pub fn in_m(&self) -> bool {
        self.phase == ceil_half(self.n)
    }
}

pub fn classify_cell(table: &LemonTable, x: &PhasePoint) -> Result<CellIndex, InducedError> {
    if x.arc != ArcId::Unit {
        return Err(InducedError::NotOnUnitArc);
    }
    if std::f64::consts::FRAC_PI_2 - x.phi.abs() <= TANGENTIAL_TOL {
        return Err(InducedError::UnresolvedCap(0));
    }
    let mut phase = 0;
    let mut cur = *x;
    loop {
        let (prev, _) = billiard_step_back(table, &cur).map_err(|e| InducedError::Step {
            source: e,
            collisions: phase,
        })?;
        if prev.arc != ArcId::Unit {
            break;
        }
        phase += 1;
        if phase >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
        cur = prev;
    }
    let ahead = run_length(table, x, 0)?;
    Ok(CellIndex {
        n: phase + ahead,
        phase,
    })
}

/// `η(x)` with the cap turned into an error.
fn run_length(table: &LemonTable, x: &PhasePoint, done: u64) -> Result<u64, InducedError> {
    let mut cur = *x;
    let mut k = 0;
    loop {
        let (next, _) = billiard_step(table, &cur).map_err(|e| InducedError::Step {
            source: e,
            collisions: done + k,
        })?;
        if next.arc != x.arc {
            return Ok(k);
        }
        k += 1;
        if k >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
        cur = next;
    }
}

pub fn is_in_m(table: &LemonTable, x: &PhasePoint) -> Result<bool, InducedError> {
    if x.arc != ArcId::Unit {
        return Ok(false);
    }
    Ok(classify_cell(table, x)?.in_m())
}

/// Data of one return of `F̂` to `M̂₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnBlockHat {
    pub j0: u64,
    pub j1: u64,
    pub tau0: f64,
    pub tau1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl ReturnBlockHat {
    pub fn hat_d0(&self) -> f64 {
        self.d0 / (self.j0 + 1) as f64
    }
    pub fn hat_d1(&self) -> f64 {
        self.d1 / (self.j1 + 1) as f64
    }
    pub fn hat_tau0(&self) -> f64 {
        self.tau0 - self.j0 as f64 * self.hat_d0() - self.j1 as f64 * self.hat_d1()
    }
    pub fn collisions(&self) -> u64 {
        self.j0 + self.j1 + 2
    }

    /// `[τ₁ − j₁ĥd₁, ĥR₁, ĥτ₀, ĥR₀, −j₀ĥd₀]`; the input curvature is the final entry.
    pub fn entries(&self) -> [f64; 5] {
        [
            self.tau1 - self.j1 as f64 * self.hat_d1(),
            -2.0 / self.hat_d1(),
            self.hat_tau0(),
            -2.0 / self.hat_d0(),
            -(self.j0 as f64) * self.hat_d0(),
        ]
    }
}

/// Data of one return of `F` to `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnBlock {
    pub i0: u64,
    pub i1: u64,
    pub i2: u64,
    pub tau0: f64,
    pub tau1: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    /// Full run length `η(x₂)` of the arrival run; `i₂ = ⌈η(x₂)/2⌉`.
    pub eta2: u64,
}

impl ReturnBlock {
    pub fn hat_d0(&self) -> f64 {
        self.d0 / (self.i0 + 1) as f64
    }
    pub fn hat_d1(&self) -> f64 {
        self.d1 / (self.i1 + 1) as f64
    }
    pub fn hat_tau0(&self) -> f64 {
        self.tau0 - self.i0 as f64 * self.hat_d0() - self.i1 as f64 * self.hat_d1()
    }
    pub fn bar_tau1(&self) -> f64 {
        self.tau1 - self.i1 as f64 * self.hat_d1() - self.d2
    }
    /// Return time `ξ_M = i₀ + i₁ + i₂ + 2`.
    pub fn collisions(&self) -> u64 {
        self.i0 + self.i1 + self.i2 + 2
    }

    /// `[d₂, 2i₂/d₂, τ̄₁, ĥR₁, ĥτ₀, ĥR₀, −i₀ĥd₀]`; the input curvature is the final entry.
    pub fn entries(&self) -> [f64; 7] {
        [
            self.d2,
            2.0 * self.i2 as f64 / self.d2,
            self.bar_tau1(),
            -2.0 / self.hat_d1(),
            self.hat_tau0(),
            -2.0 / self.hat_d0(),
            -(self.i0 as f64) * self.hat_d0(),
        ]
    }

    /// The curvature map of the block as a unit-determinant Möbius matrix.
    pub fn mobius(&self) -> Mobius {
        Mobius::chain(&self.entries())
    }
}

/// A return together with the reflections where the beam leaves and
/// re-enters `Γ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnStep {
    pub image: PhasePoint,
    pub block: ReturnBlock,
    /// `F^{i₀}x`, the last reflection on `Γ₁` before the excursion.
    pub exit: PhasePoint,
    /// `x₂`, the first reflection back on `Γ₁`.
    pub entry: PhasePoint,
}

/// Walks one same-arc run starting at `x`; returns the count of further
/// reflections, the first point off the arc and the flight leading to it.
fn walk_run(
    table: &LemonTable,
    x: &PhasePoint,
    done: &mut u64,
    mut record: impl FnMut(&CollisionEvent),
) -> Result<(u64, PhasePoint, PhasePoint, f64), InducedError> {
    let mut cur = *x;
    let mut k = 0;
    loop {
        let (next, ev) = billiard_step(table, &cur).map_err(|e| InducedError::Step {
            source: e,
            collisions: *done,
        })?;
        *done += 1;
        record(&ev);
        if next.arc != x.arc {
            return Ok((k, cur, next, ev.tau));
        }
        k += 1;
        if k >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
        cur = next;
    }
}

/// First return of `x ∈ M̂₁` to `M̂₁`.
pub fn hat_return(
    table: &LemonTable,
    x: &PhasePoint,
) -> Result<(PhasePoint, ReturnBlockHat), InducedError> {
    hat_return_traced(table, x, |_| {})
}

pub fn hat_return_traced(
    table: &LemonTable,
    x: &PhasePoint,
    mut record: impl FnMut(&CollisionEvent),
) -> Result<(PhasePoint, ReturnBlockHat), InducedError> {
    if x.arc != ArcId::Unit {
        return Err(InducedError::NotOnUnitArc);
    }
    let mut done = 0;
    let (j0, _, x1, tau0) = walk_run(table, x, &mut done, &mut record)?;
    let (j1, _, x2, tau1) = walk_run(table, &x1, &mut done, &mut record)?;
    let block = ReturnBlockHat {
        j0,
        j1,
        tau0,
        tau1,
        d0: half_chord(table, x),
        d1: half_chord(table, &x1),
    };
    Ok((x2, block))
}

/// First return of `x ∈ M` to `M`.
pub fn return_map(
    table: &LemonTable,
    x: &PhasePoint,
) -> Result<(PhasePoint, ReturnBlock), InducedError> {
    return_step(table, x, |_| {}).map(|r| (r.image, r.block))
}

/// [`return_map`] reporting every collision of the block, from `x` up to the
/// one preceding `Fx`.
pub fn return_step(
    table: &LemonTable,
    x: &PhasePoint,
    mut record: impl FnMut(&CollisionEvent),
) -> Result<ReturnStep, InducedError> {
    if x.arc != ArcId::Unit {
        return Err(InducedError::NotOnUnitArc);
    }
    let mut done = 0;
    let (i0, exit, x1, tau0) = walk_run(table, x, &mut done, &mut record)?;
    let (i1, _, x2, tau1) = walk_run(table, &x1, &mut done, &mut record)?;

    // The arrival run is walked to its end since i₂ needs its full length.
    let mut run: Vec<(CollisionEvent, PhasePoint)> = Vec::new();
    let mut cur = x2;
    loop {
        let (next, ev) = billiard_step(table, &cur).map_err(|e| InducedError::Step {
            source: e,
            collisions: done + run.len() as u64,
        })?;
        if next.arc != ArcId::Unit {
            break;
        }
        if run.len() as u64 >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
        run.push((ev, next));
        cur = next;
    }
    let eta2 = run.len() as u64;
    let i2 = ceil_half(eta2);
    for (ev, _) in &run[..i2 as usize] {
        record(ev);
    }
    let image = if i2 == 0 { x2 } else { run[i2 as usize - 1].1 };
    let block = ReturnBlock {
        i0,
        i1,
        i2,
        tau0,
        tau1,
        d0: half_chord(table, x),
        d1: half_chord(table, &x1),
        d2: half_chord(table, &x2),
        eta2,
    };
    Ok(ReturnStep {
        image,
        block,
        exit,
        entry: x2,
    })
}

/// Reduced transport of a pre-reflection curvature through a `F̂` block.
pub fn curvature_hat_return(b: ProjValue, block: &ReturnBlockHat) -> ProjValue {
    let mut e: Vec<ProjValue> = block.entries().iter().map(|&a| a.into()).collect();
    e.push(b);
    eval_entries(&e)
}

/// Reduced transport of a pre-reflection curvature through a `F` block.
pub fn curvature_return(b: ProjValue, block: &ReturnBlock) -> ProjValue {
    let mut e: Vec<ProjValue> = block.entries().iter().map(|&a| a.into()).collect();
    e.push(b);
    eval_entries(&e)
}

/// Collision-by-collision transport along recorded flights.
pub fn raw_transport(b: ProjValue, events: &[CollisionEvent]) -> ProjValue {
    events
        .iter()
        .fold(b, |acc, ev| curvature_step(acc, ev.tau, ev.refl))
}

/// Iterates forward from an arbitrary point to the next point of `M`.
///
/// The first `Γ_R → Γ₁` transition after `x` gives an entry point `y ∈ M_n`;
/// the result is `F^{⌈n/2⌉}y`.
pub fn advance_to_m(
    table: &LemonTable,
    x: &PhasePoint,
    max_steps: u64,
) -> Result<PhasePoint, InducedError> {
    let mut cur = *x;
    let mut steps = 0;
    let entry = loop {
        let (next, _) = billiard_step(table, &cur).map_err(|e| InducedError::Step {
            source: e,
            collisions: steps,
        })?;
        steps += 1;
        if cur.arc == ArcId::Big && next.arc == ArcId::Unit {
            break next;
        }
        if steps >= max_steps {
            return Err(InducedError::UnresolvedCap(max_steps));
        }
        cur = next;
    };
    let n = run_length(table, &entry, steps)?;
    let mut m = entry;
    for _ in 0..ceil_half(n) {
        m = billiard_step(table, &m)
            .map_err(|e| InducedError::Step {
                source: e,
                collisions: steps,
            })?
            .0;
    }
    Ok(m)
}

/// The point of `M` preceding `x ∈ M` under `F`.
pub fn previous_m_point(table: &LemonTable, x: &PhasePoint) -> Result<PhasePoint, InducedError> {
    if x.arc != ArcId::Unit {
        return Err(InducedError::NotOnUnitArc);
    }
    let mut back = 0u64;
    let step = |p: &PhasePoint, back: &mut u64| {
        *back += 1;
        billiard_step_back(table, p)
            .map(|r| r.0)
            .map_err(|e| InducedError::Step {
                source: e,
                collisions: *back,
            })
    };
    // Leave the current Γ₁ run and the Γ_R run before it.
    let mut cur = *x;
    let mut p = step(&cur, &mut back)?;
    while p.arc == ArcId::Unit {
        cur = p;
        p = step(&cur, &mut back)?;
        if back >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
    }
    while p.arc == ArcId::Big {
        p = step(&p, &mut back)?;
        if back >= 2 * ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
    }
    // `p` is the last point of the previous Γ₁ run; collect that run backwards.
    let mut run = vec![p];
    loop {
        let q = step(run.last().unwrap(), &mut back)?;
        if q.arc != ArcId::Unit {
            break;
        }
        run.push(q);
        if run.len() as u64 >= ETA_CAP {
            return Err(InducedError::UnresolvedCap(ETA_CAP));
        }
    }
    let n = run.len() as u64 - 1;
    Ok(run[(n - ceil_half(n)) as usize])
}

/// Truncations of the backward continued fraction at `x ∈ M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardCf {
    /// Last truncation of `B(V^d_n(x))`, the unstable curvature estimate.
    pub curvature: f64,
    /// Last truncation of `B(V^p_n(x))`.
    pub lower: f64,
    pub converged: bool,
    /// Number of backward returns used.
    pub depth: u64,
}

/// Pushes the cone edges `B = 0` and `B = 1/d` from `F^{-n}x` to `x` for
/// `n = 1, 2, …`, calling `visit(n, B(V^p_n), B(V^d_n))` until it returns `false`.
pub fn backward_cone_walk(
    table: &LemonTable,
    x: &PhasePoint,
    depth: u64,
    mut visit: impl FnMut(u64, ProjValue, ProjValue) -> bool,
) -> Result<(), InducedError> {
    let mut total = Mobius::IDENTITY;
    let mut cur = *x;
    for n in 1..=depth {
        let prev = previous_m_point(table, &cur)?;
        let (_, block) = return_map(table, &prev)?;
        total = total.then_inner(block.mobius()).normalized();
        let bp = total.apply(ProjValue::ZERO);
        let bd = total.apply(ProjValue::new(1.0 / block.d0));
        if !visit(n, bp, bd) {
            break;
        }
        cur = prev;
    }
    Ok(())
}

/// Evaluates the infinite continued fraction for `B^u(x)` along the backward
/// orbit of `x ∈ M`, stopping once successive truncations agree.
pub fn backward_cf(table: &LemonTable, x: &PhasePoint, depth: u64) -> Result<BackwardCf, InducedError> {
    let mut out = BackwardCf {
        curvature: f64::NAN,
        lower: f64::NAN,
        converged: false,
        depth: 0,
    };
    let mut last: Option<ProjValue> = None;
    backward_cone_walk(table, x, depth, |n, bp, bd| {
        out.curvature = bd.value();
        out.lower = bp.value();
        out.depth = n;
        if let Some(l) = last {
            if circle_distance(l, bd) < BACKWARD_CF_TOL {
                out.converged = true;
                return false;
            }
        }
        last = Some(bd);
        true
    })?;
    Ok(out)
}

/// Post-reflection curvature of the stable direction at `x`, obtained from
/// the unstable curvature at `Φx ∈ M` as `−B^u(Φx)`.
pub fn stable_curvature(table: &LemonTable, x: &PhasePoint, depth: u64) -> Result<BackwardCf, InducedError> {
    let y = crate::billiard_map::time_reverse(*x);
    let mut cf = backward_cf(table, &y, depth)?;
    cf.curvature = -cf.curvature;
    cf.lower = -cf.lower;
    Ok(cf)
}
