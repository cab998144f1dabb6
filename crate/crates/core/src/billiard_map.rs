//! The billiard map on the phase cylinder `Γ × [−π/2, π/2]`.
//!
//! A phase point `(s, φ)` is a post-reflection unit vector based at arclength
//! `s`; `φ` is measured from the inward normal `n`, positive towards the
//! counterclockwise tangent `t`, so the direction is `cos φ·n + sin φ·t`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{ArcId, LemonTable, Vec2};

/// Arclength distance to a corner that counts as hitting it.
pub const CORNER_TOL: f64 = 1e-9;
/// Distance from `|φ| = π/2` that counts as tangential.
pub const TANGENTIAL_TOL: f64 = 1e-9;
/// Corner proximity that is reported as near-singular without failing.
pub const NEAR_CORNER_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub arc: ArcId,
    pub s: f64,
    pub phi: f64,
}

impl PhasePoint {
    pub fn new(arc: ArcId, s: f64, phi: f64) -> Self {
        Self { arc, s, phi }
    }

    /// Locates `s` on the table and attaches the owning arc.
    pub fn on_table(table: &LemonTable, s: f64, phi: f64) -> Self {
        let s = table.wrap(s);
        Self::new(table.arc_of(s), s, phi)
    }
}

/// Data of one free flight leaving `point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionEvent {
    pub point: PhasePoint,
    /// Free path to the next collision.
    pub tau: f64,
    /// Half-chord `ρ·cos φ` in the completed disk.
    pub d: f64,
    /// Reflection parameter `−2/d`.
    pub refl: f64,
    /// The flight ends within [`NEAR_CORNER_WARN`] of a corner.
    pub near_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize)]
pub enum StepError {
    #[error("trajectory hits a corner (distance {distance:e})")]
    CornerHit { distance: f64 },
    #[error("tangential phase point (|phi| within {distance:e} of pi/2)")]
    Tangential { distance: f64 },
}

/// Half-chord of a phase point.
pub fn half_chord(table: &LemonTable, x: &PhasePoint) -> f64 {
    table.radius_of(x.arc) * x.phi.cos()
}

/// Time reversal `(s, φ) ↦ (s, −φ)`.
pub fn time_reverse(x: PhasePoint) -> PhasePoint {
    PhasePoint { phi: -x.phi, ..x }
}

/// Position and outgoing direction of a phase point.
pub fn ray(table: &LemonTable, x: &PhasePoint) -> (Vec2, Vec2) {
    let bp = table.arc_point_on(x.arc, x.s);
    let (sin_p, cos_p) = x.phi.sin_cos();
    (bp.position, bp.inward_normal * cos_p + bp.tangent * sin_p)
}

/// Positive root of `t² + 2βt + γ = 0` for a start point inside the circle
/// (`γ ≤ 0`), evaluated without cancellation.
fn exit_root(beta: f64, gamma: f64) -> f64 {
    let disc = (beta * beta - gamma).max(0.0).sqrt();
    if beta > 0.0 {
        // Small root: −γ/(β + √(β² − γ)).
        let den = beta + disc;
        if den == 0.0 {
            0.0
        } else {
            -gamma / den
        }
    } else {
        disc - beta
    }
}

/// One application of the billiard map.
pub fn billiard_step(
    table: &LemonTable,
    x: &PhasePoint,
) -> Result<(PhasePoint, CollisionEvent), StepError> {
    let tangential = FRAC_PI_2 - x.phi.abs();
    if !(tangential > TANGENTIAL_TOL) {
        return Err(StepError::Tangential {
            distance: tangential.max(0.0),
        });
    }
    let own_radius = table.radius_of(x.arc);
    let d = own_radius * x.phi.cos();
    let (p, v) = ray(table, x);

    // The chord of the own circle has length 2d; the other circle is exited at
    // the positive root of its quadratic. Both disks contain p.
    let other = match x.arc {
        ArcId::Unit => ArcId::Big,
        ArcId::Big => ArcId::Unit,
    };
    let oc = table.center_of(other);
    let w = p - oc;
    let beta = w.dot(v);
    // |p − c|² − ρ² for p on the own circle, written as ±2b·(x_c − p.x).
    let gamma = match x.arc {
        ArcId::Unit => 2.0 * table.b() * (table.chord_x() - p.x),
        ArcId::Big => 2.0 * table.b() * (p.x - table.chord_x()),
    }
    .min(0.0);
    let t_other = exit_root(beta, gamma);
    let t_own = 2.0 * d;

    let (tau, hit_arc) = if t_own <= t_other {
        (t_own, x.arc)
    } else {
        (t_other, other)
    };
    let q = p + v * tau;
    let corner = table.corner_distance(q);
    if corner < CORNER_TOL {
        return Err(StepError::CornerHit { distance: corner });
    }

    let c = table.center_of(hit_arc);
    let rho = table.radius_of(hit_arc);
    let n = (c - q) * (1.0 / rho);
    let t = Vec2::new(n.y, -n.x);
    let v_out = v - n * (2.0 * v.dot(n));
    let phi = v_out.dot(t).atan2(v_out.dot(n));
    let s = table.arclength_of(hit_arc, q);
    let next = PhasePoint::new(hit_arc, s, phi);
    let event = CollisionEvent {
        point: *x,
        tau,
        d,
        refl: -2.0 / d,
        near_singular: corner < NEAR_CORNER_WARN,
    };
    Ok((next, event))
}

/// `F⁻¹ = Φ ∘ F ∘ Φ`. Returns the previous point and its flight data.
pub fn billiard_step_back(
    table: &LemonTable,
    x: &PhasePoint,
) -> Result<(PhasePoint, CollisionEvent), StepError> {
    let (y, ev) = billiard_step(table, &time_reverse(*x))?;
    let prev = time_reverse(y);
    let d = half_chord(table, &prev);
    Ok((
        prev,
        CollisionEvent {
            point: prev,
            tau: ev.tau,
            d,
            refl: -2.0 / d,
            near_singular: ev.near_singular,
        },
    ))
}

/// Row-major 2×2 matrix acting on `(δs, δφ)`.
pub type Mat2 = [[f64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn mat_vec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Step plus the derivative `D_xF` in `(s, φ)` coordinates.
///
/// With curvatures `κ, κ'` of the departure and arrival arcs and the flight
/// `τ`, `δs' = −[(cos φ − τκ)δs + τ δφ]/cos φ'` and
/// `δφ' = (κ δs − δφ) − κ' δs'`.
pub fn step_with_jacobian(
    table: &LemonTable,
    x: &PhasePoint,
) -> Result<(PhasePoint, CollisionEvent, Mat2), StepError> {
    let (next, ev) = billiard_step(table, x)?;
    let k0 = 1.0 / table.radius_of(x.arc);
    let k1 = 1.0 / table.radius_of(next.arc);
    let c0 = x.phi.cos();
    let c1 = next.phi.cos();
    let tau = ev.tau;
    let a = (c0 - tau * k0) / c1;
    let jac = [
        [-a, -tau / c1],
        [k0 + k1 * a, -1.0 + k1 * tau / c1],
    ];
    Ok((next, ev, jac))
}

/// `D_xF · v`.
pub fn tangent_step(table: &LemonTable, x: &PhasePoint, v: [f64; 2]) -> Result<[f64; 2], StepError> {
    let (_, _, jac) = step_with_jacobian(table, x)?;
    Ok(mat_vec(&jac, v))
}

/// Pre-reflection wavefront curvature of a tangent vector `(δs, δφ)` at `x`:
/// `(δφ/δs + κ)/cos φ`, infinite for `δs = 0`.
pub fn curvature_of_vector(table: &LemonTable, x: &PhasePoint, v: [f64; 2]) -> f64 {
    let k = 1.0 / table.radius_of(x.arc);
    if v[0] == 0.0 {
        f64::INFINITY
    } else {
        (v[1] / v[0] + k) / x.phi.cos()
    }
}

/// A tangent vector at `x` whose pre-reflection curvature is `b`.
pub fn vector_with_curvature(table: &LemonTable, x: &PhasePoint, b: f64) -> [f64; 2] {
    if b.is_infinite() {
        return [0.0, 1.0];
    }
    let k = 1.0 / table.radius_of(x.arc);
    [1.0, b * x.phi.cos() - k]
}

/// Result of counting a same-arc run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EtaCount {
    pub count: u64,
    /// The cap was reached before leaving the arc.
    pub exceeded: bool,
}

/// Number of further successive reflections on the arc of `x`.
pub fn eta(table: &LemonTable, x: &PhasePoint, cap: u64) -> Result<EtaCount, StepError> {
    let mut cur = *x;
    for k in 0..cap {
        let (next, _) = billiard_step(table, &cur)?;
        if next.arc != x.arc {
            return Ok(EtaCount {
                count: k,
                exceeded: false,
            });
        }
        cur = next;
    }
    Ok(EtaCount {
        count: cap,
        exceeded: true,
    })
}

/// Forward orbit iterator; stops after yielding the first error.
pub struct Orbit<'a> {
    table: &'a LemonTable,
    current: Option<PhasePoint>,
}

impl<'a> Orbit<'a> {
    pub fn new(table: &'a LemonTable, start: PhasePoint) -> Self {
        Self {
            table,
            current: Some(start),
        }
    }
}

impl Iterator for Orbit<'_> {
    type Item = Result<CollisionEvent, StepError>;

    fn next(&mut self) -> Option<Self::Item> {
        let x = self.current.take()?;
        match billiard_step(self.table, &x) {
            Ok((next, ev)) => {
                self.current = Some(next);
                Some(Ok(ev))
            }
            Err(e) => Some(Err(e)),
        }
    }
}
