//! Empirical hyperbolicity map over a grid of `(b, R)`.

use serde::Serialize;

use super::conditions::{check_a0, check_assumptions, check_conditions, verify_cone, Region};
use super::lyapunov::{lyapunov, LyapunovMode};
use super::period2::{period2_classify, period2_seed, Period2Class};
use crate::billiard_map::PhasePoint;
use crate::exec::Execution;
use crate::geometry::LemonTable;
use crate::sampling::{domain, mu_sample, sample_blocks_seq, stream_rng};

/// Offset in `φ` of the seed placed next to the period-2 orbit.
pub const ISLAND_SEED_OFFSET: f64 = 1e-3;
/// `|χ|` below this counts as a regular (island) orbit.
pub const ISLAND_CHI: f64 = 1e-2;

/// Inclusive range with `steps` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridRange {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    pub b: GridRange,
    pub r: GridRange,
    /// Return blocks sampled per cell.
    pub blocks: usize,
    /// Collisions per Lyapunov estimate.
    pub collisions: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    HyperbolicEvidence,
    ConditionFail,
    EllipticEvidence,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::HyperbolicEvidence => "HyperbolicEvidence",
            Verdict::ConditionFail => "ConditionFail",
            Verdict::EllipticEvidence => "EllipticEvidence",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanCell {
    pub b: f64,
    pub r: f64,
    pub verdict: Verdict,
    /// Share of `X₀` blocks satisfying (A1); NaN without such blocks.
    pub frac_a1: f64,
    pub frac_a2: f64,
    pub frac_a3: f64,
    /// Share of decided blocks passing the cone test.
    pub frac_cone: f64,
    /// Full-map exponent per collision.
    pub chi: f64,
    pub chi_ci: f64,
    pub mean_return_time: f64,
    pub n_blocks: u64,
    pub n_near_tie: u64,
    pub n_singular: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Evaluates one cell with its own random stream.
pub fn scan_cell(b: f64, r: f64, config: &ScanConfig, index: u64) -> ScanCell {
    let mut cell = ScanCell {
        b,
        r,
        verdict: Verdict::Inconclusive,
        frac_a1: f64::NAN,
        frac_a2: f64::NAN,
        frac_a3: f64::NAN,
        frac_cone: f64::NAN,
        chi: f64::NAN,
        chi_ci: f64::NAN,
        mean_return_time: f64::NAN,
        n_blocks: 0,
        n_near_tie: 0,
        n_singular: 0,
    };
    let Ok(table) = LemonTable::new(b, r) else {
        return cell;
    };
    let mut rng = stream_rng(config.seed, domain::SCAN, index);
    let batch = sample_blocks_seq(&table, config.blocks, &mut rng);
    cell.n_blocks = batch.blocks.len() as u64;
    cell.n_singular = batch.singular;

    let mut pass = [0u64; 3];
    let mut seen = [0u64; 3];
    let (mut cone_pass, mut decided) = (0u64, 0u64);
    for s in &batch.blocks {
        let blk = &s.step.block;
        let a = check_assumptions(blk);
        let cone = verify_cone(blk);
        let rep = check_conditions(blk);
        let flag = a.applicable();
        if flag.near_tie || cone.near_tie || rep.near_tie {
            cell.n_near_tie += 1;
            continue;
        }
        let k = match a.region {
            Region::X0 => 0,
            Region::X1 => 1,
            Region::X2 => 2,
        };
        seen[k] += 1;
        pass[k] += flag.holds as u64;
        decided += 1;
        cone_pass += cone.holds as u64;
    }
    cell.frac_a1 = ratio(pass[0], seen[0]);
    cell.frac_a2 = ratio(pass[1], seen[1]);
    cell.frac_a3 = ratio(pass[2], seen[2]);
    cell.frac_cone = ratio(cone_pass, decided);

    let x0 = mu_sample(&table, &mut rng);
    let est = lyapunov(&table, &x0, config.collisions, LyapunovMode::ReturnMap);
    cell.chi = est.chi_full.unwrap_or(f64::NAN);
    cell.chi_ci = est.chi_full_ci95.unwrap_or(f64::NAN);
    cell.mean_return_time = est.mean_return_time.unwrap_or(f64::NAN);

    let all_pass = check_a0(b, r).holds
        && decided > 0
        && pass.iter().sum::<u64>() == decided
        && cone_pass == decided;
    let some_fail = !check_a0(b, r).holds || pass.iter().sum::<u64>() < decided || cone_pass < decided;
    let elliptic = matches!(period2_classify(b, r), Ok(p) if p.class == Period2Class::Elliptic);
    cell.verdict = if elliptic && island_near_period2(&table, config.collisions) {
        Verdict::EllipticEvidence
    } else if all_pass && est.terminated.is_none() && cell.chi - cell.chi_ci > 0.0 {
        Verdict::HyperbolicEvidence
    } else if some_fail {
        Verdict::ConditionFail
    } else {
        Verdict::Inconclusive
    };
    cell
}

/// A seed next to the period-2 orbit stays regular for `collisions` steps.
pub fn island_near_period2(table: &LemonTable, collisions: u64) -> bool {
    let o = period2_seed(table);
    let x = PhasePoint::new(o.arc, o.s, ISLAND_SEED_OFFSET);
    let est = lyapunov(table, &x, collisions, LyapunovMode::FullMap);
    est.terminated.is_none() && est.chi.abs() < ISLAND_CHI
}

/// All cells in row-major order (`R` outer, `b` inner).
pub fn scan(config: &ScanConfig, exec: &Execution) -> Vec<ScanCell> {
    let bs = config.b.values();
    let rs = config.r.values();
    let nb = bs.len();
    exec.map(nb * rs.len(), |i| scan_cell(bs[i % nb], rs[i / nb], config, i as u64))
}
