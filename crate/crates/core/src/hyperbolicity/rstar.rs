//! Numerical search for the radius beyond which every sampled block of the
//! fixed-chord family passes the assumptions and the cone test.

use serde::Serialize;
use thiserror::Error;

use super::conditions::{check_a0, check_assumptions, check_conditions, verify_cone};
use crate::exec::Execution;
use crate::geometry::{GeometryError, LemonTable};
use crate::sampling::{sample_blocks, BlockSample};

/// Default corner/length slack for the large-radius diagnostics.
pub const LARGE_R_EPS: f64 = 0.05;
/// Blocks with `d₁` up to this value are covered by the large-radius diagnostics.
pub const LARGE_R_D1: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum RStarError {
    #[error("chord length {0} must be below 1")]
    ChordTooLong(f64),
    #[error("grid radius {0} must exceed 2")]
    RadiusTooSmall(f64),
    #[error("grid must be non-empty and ascending")]
    BadGrid,
    #[error("{0}")]
    Geometry(String),
    #[error("no grid radius passed all checks")]
    NoPassingR(RStarReport),
}

impl From<GeometryError> for RStarError {
    fn from(e: GeometryError) -> Self {
        RStarError::Geometry(e.to_string())
    }
}

/// Statistics for one grid radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RStarEvidence {
    pub r: f64,
    pub b: f64,
    pub a0: bool,
    pub n_blocks: u64,
    pub n_singular: u64,
    pub n_near_tie: u64,
    pub fail_assumptions: u64,
    pub fail_cone: u64,
    /// `verify_cone` and the condition formula disagree.
    pub cone_mismatch: u64,
    /// Blocks with `d₁ ≤ 4`.
    pub small_d1: u64,
    /// Of those, exit or entry reflection farther than `ε` from both corners.
    pub corner_outliers: u64,
    /// Of those, excursion length above `|AB| + ε`.
    pub length_outliers: u64,
    /// Smallest `η(x₂)` among the small-`d₁` blocks.
    pub min_entry_cell: Option<u64>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RStarReport {
    pub chord: f64,
    /// `⌊2π/∠AOB⌋`.
    pub n_star: u64,
    pub r_star: Option<f64>,
    pub evidence: Vec<RStarEvidence>,
}

/// `⌊2π/∠AOB⌋` with `∠AOB = 2·asin(|AB|/2)`.
pub fn n_star(chord: f64) -> u64 {
    (std::f64::consts::PI / (chord / 2.0).asin()).floor() as u64
}

/// Evaluates one radius of the family on the given blocks.
pub fn evaluate_radius(
    table: &LemonTable,
    blocks: &[BlockSample],
    singular: u64,
    eps: f64,
) -> RStarEvidence {
    let mut ev = RStarEvidence {
        r: table.big_radius(),
        b: table.b(),
        a0: check_a0(table.b(), table.big_radius()).holds,
        n_blocks: blocks.len() as u64,
        n_singular: singular,
        n_near_tie: 0,
        fail_assumptions: 0,
        fail_cone: 0,
        cone_mismatch: 0,
        small_d1: 0,
        corner_outliers: 0,
        length_outliers: 0,
        min_entry_cell: None,
        passes: false,
    };
    let near_corner = |p: &crate::billiard_map::PhasePoint| {
        table.corner_distance(table.arc_point_on(p.arc, p.s).position) <= eps
    };
    for s in blocks {
        let b = &s.step.block;
        let rep = check_conditions(b);
        let cone = verify_cone(b);
        let assume = check_assumptions(b).applicable();
        if rep.near_tie || cone.near_tie || assume.near_tie {
            ev.n_near_tie += 1;
        } else {
            ev.fail_assumptions += !assume.holds as u64;
            ev.fail_cone += !cone.holds as u64;
            ev.cone_mismatch += (cone.holds != rep.cone_ok) as u64;
        }
        if b.d1 <= LARGE_R_D1 {
            ev.small_d1 += 1;
            if !near_corner(&s.step.exit) || !near_corner(&s.step.entry) {
                ev.corner_outliers += 1;
            }
            let length = b.tau0 + 2.0 * b.i1 as f64 * b.d1 + b.tau1;
            if length > table.chord_length() + eps {
                ev.length_outliers += 1;
            }
            ev.min_entry_cell = Some(ev.min_entry_cell.map_or(b.eta2, |m| m.min(b.eta2)));
        }
    }
    ev.passes = ev.a0 && ev.n_blocks > 0 && ev.fail_assumptions == 0 && ev.fail_cone == 0;
    ev
}

/// Smallest grid radius whose `samples` blocks all pass (A0)–(A3) and the
/// cone test. Radii are visited in order and the search stops at the first pass.
pub fn find_r_star(
    chord: f64,
    grid: &[f64],
    samples: usize,
    seed: u64,
    exec: &Execution,
) -> Result<RStarReport, RStarError> {
    if !(chord < 1.0) {
        return Err(RStarError::ChordTooLong(chord));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RStarError::BadGrid);
    }
    if let Some(&r) = grid.iter().find(|&&r| !(r > 2.0)) {
        return Err(RStarError::RadiusTooSmall(r));
    }
    let mut report = RStarReport {
        chord,
        n_star: n_star(chord),
        r_star: None,
        evidence: Vec::new(),
    };
    for &r in grid {
        let table = LemonTable::from_chord(chord, r)?;
        let batch = sample_blocks(&table, samples, seed, exec);
        let ev = evaluate_radius(&table, &batch.blocks, batch.singular, LARGE_R_EPS);
        let passed = ev.passes;
        report.evidence.push(ev);
        if passed {
            report.r_star = Some(r);
            return Ok(report);
        }
    }
    Err(RStarError::NoPassingR(report))
}
