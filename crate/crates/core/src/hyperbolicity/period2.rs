//! Linear stability of the axial period-2 orbit between the two apexes.

use serde::Serialize;

use crate::billiard_map::{mat_mul, step_with_jacobian, PhasePoint};
use crate::geometry::{ArcId, GeometryError, LemonTable};

/// Band around `|trace| = 2` classified as parabolic.
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Period2Class {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Period2Report {
    pub class: Period2Class,
    /// Trace of the monodromy `DF(y)·DF(x)`.
    pub trace: f64,
    pub b: f64,
    pub r: f64,
}

pub fn classify_trace(trace: f64) -> Period2Class {
    let m = trace.abs() - 2.0;
    if m > TRACE_TOL {
        Period2Class::Hyperbolic
    } else if m < -TRACE_TOL {
        Period2Class::Elliptic
    } else {
        Period2Class::Parabolic
    }
}

/// The orbit point at the apex `(1, 0)` of `Γ₁`.
pub fn period2_seed(table: &LemonTable) -> PhasePoint {
    PhasePoint::new(ArcId::Unit, table.len_gamma1() / 2.0, 0.0)
}

pub fn period2_classify(b: f64, r: f64) -> Result<Period2Report, GeometryError> {
    let table = LemonTable::new(b, r)?;
    let x = period2_seed(&table);
    // The axial orbit never meets a corner, so both steps are regular.
    let (y, _, j1) = step_with_jacobian(&table, &x).expect("axial orbit is regular");
    let (_, _, j2) = step_with_jacobian(&table, &y).expect("axial orbit is regular");
    let m = mat_mul(&j2, &j1);
    let trace = m[0][0] + m[1][1];
    Ok(Period2Report {
        class: classify_trace(trace),
        trace,
        b,
        r,
    })
}
