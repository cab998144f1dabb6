//! Lyapunov exponents of the billiard map and of the return map on `M`.
//!
//! The full-map exponent multiplies analytic tangent matrices, renormalizing
//! every [`RENORM_PERIOD`] collisions. The return-map exponent instead
//! transports the Jacobi field `(B·w, w)` through the block Möbius matrices
//! of the reduced continued fractions, so the two routes share no code
//! beyond the orbit itself.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::billiard_map::{mat_vec, step_with_jacobian, PhasePoint};
use crate::exec::Execution;
use crate::geometry::LemonTable;
use crate::induced_maps::{advance_to_m, return_map};
use crate::sampling::{domain, mu_sample, stream_rng, ADVANCE_CAP};

pub const RENORM_PERIOD: u64 = 32;
/// Batches used for the batch-means confidence interval.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LyapunovMode {
    FullMap,
    ReturnMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub mode: LyapunovMode,
    /// Per collision for `FullMap`, per return for `ReturnMap`.
    pub chi: f64,
    /// Half-width of the 95% batch-means interval for `chi`.
    pub ci95: f64,
    pub collisions: u64,
    pub returns: Option<u64>,
    /// `ξ̄`, collisions per return.
    pub mean_return_time: Option<f64>,
    /// Full-map exponent over the same collisions (`ReturnMap` mode).
    pub chi_full: Option<f64>,
    pub chi_full_ci95: Option<f64>,
    /// Set when the orbit hit a singularity; the estimate is partial.
    pub terminated: Option<String>,
}

impl LyapunovEstimate {
    /// `|χ_full·ξ̄ − χ_return| / |χ_return|`.
    pub fn suspension_error(&self) -> Option<f64> {
        Some((self.chi_full? * self.mean_return_time? - self.chi).abs() / self.chi.abs())
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Batch accumulators with the interval computed from batch means.
struct Batches {
    sums: Vec<CompensatedSum>,
    counts: Vec<u64>,
}

impl Batches {
    fn new() -> Self {
        Self {
            sums: vec![CompensatedSum::default(); BATCHES],
            counts: vec![0; BATCHES],
        }
    }

    fn add(&mut self, batch: usize, value: f64, count: u64) {
        let k = batch.min(BATCHES - 1);
        self.sums[k].add(value);
        self.counts[k] += count;
    }

    fn total(&self) -> (f64, u64) {
        let mut s = CompensatedSum::default();
        for b in &self.sums {
            s.add(b.value());
        }
        (s.value(), self.counts.iter().sum())
    }

    fn ci95(&self) -> f64 {
        let means: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s.value() / c as f64)
            .collect();
        mean_ci95(&means).1
    }
}

/// Sample mean and the half-width of its 95% Student-t interval.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.96);
    (mean, t * (var / n as f64).sqrt())
}

fn full_map(table: &LemonTable, x0: &PhasePoint, n: u64) -> LyapunovEstimate {
    let mut batches = Batches::new();
    let mut x = *x0;
    let mut v = [1.0, 0.5];
    let mut pending = 0u64;
    let mut done = 0u64;
    let mut terminated = None;
    let batch_of = |i: u64| ((i as u128 * BATCHES as u128) / n.max(1) as u128) as usize;
    let mut flush = |v: &mut [f64; 2], done: u64, pending: &mut u64| {
        if *pending == 0 {
            return;
        }
        let norm = v[0].hypot(v[1]);
        batches.add(batch_of(done - 1), norm.ln(), *pending);
        v[0] /= norm;
        v[1] /= norm;
        *pending = 0;
    };
    while done < n {
        match step_with_jacobian(table, &x) {
            Ok((next, _, jac)) => {
                v = mat_vec(&jac, v);
                x = next;
                done += 1;
                pending += 1;
                if pending == RENORM_PERIOD || batch_of(done) != batch_of(done - 1) || done == n {
                    flush(&mut v, done, &mut pending);
                }
            }
            Err(e) => {
                flush(&mut v, done, &mut pending);
                terminated = Some(e.to_string());
                break;
            }
        }
    }
    let (total, count) = batches.total();
    LyapunovEstimate {
        mode: LyapunovMode::FullMap,
        chi: total / count.max(1) as f64,
        ci95: batches.ci95(),
        collisions: count,
        returns: None,
        mean_return_time: None,
        chi_full: None,
        chi_full_ci95: None,
        terminated,
    }
}

fn return_mode(table: &LemonTable, x0: &PhasePoint, n: u64) -> LyapunovEstimate {
    let start = match advance_to_m(table, x0, ADVANCE_CAP) {
        Ok(m) => m,
        Err(e) => {
            return LyapunovEstimate {
                mode: LyapunovMode::ReturnMap,
                chi: f64::NAN,
                ci95: f64::NAN,
                collisions: 0,
                returns: Some(0),
                mean_return_time: None,
                chi_full: None,
                chi_full_ci95: None,
                terminated: Some(e.to_string()),
            }
        }
    };
    let mut batches = Batches::new();
    let mut x = start;
    let mut collisions = 0u64;
    let mut terminated = None;
    // Jacobi field (B·w, w), started inside the cone (0, 1/d).
    let mut h: Option<[f64; 2]> = None;
    while collisions < n {
        match return_map(table, &x) {
            Ok((fx, block)) => {
                let hv = h.unwrap_or([0.5 / block.d0, 1.0]);
                let m = block.mobius();
                let next = [m.p * hv[0] + m.q * hv[1], m.r * hv[0] + m.s * hv[1]];
                let norm = next[0].hypot(next[1]);
                let prev = hv[0].hypot(hv[1]);
                let batch = ((collisions as u128 * BATCHES as u128) / n as u128) as usize;
                batches.add(batch, (norm / prev).ln(), 1);
                h = Some([next[0] / norm, next[1] / norm]);
                collisions += block.collisions();
                x = fx;
            }
            Err(e) => {
                terminated = Some(e.to_string());
                break;
            }
        }
    }
    let (total, returns) = batches.total();
    let full = full_map(table, &start, collisions);
    LyapunovEstimate {
        mode: LyapunovMode::ReturnMap,
        chi: total / returns.max(1) as f64,
        ci95: batches.ci95(),
        collisions,
        returns: Some(returns),
        mean_return_time: Some(collisions as f64 / returns.max(1) as f64),
        chi_full: Some(full.chi),
        chi_full_ci95: Some(full.ci95),
        terminated: terminated.or(full.terminated),
    }
}

/// Estimates `χ⁺` along the orbit of `x0` over `n` collisions.
///
/// In `ReturnMap` mode `x0` is first advanced to `M`; returns are taken until
/// at least `n` collisions have elapsed.
pub fn lyapunov(table: &LemonTable, x0: &PhasePoint, n: u64, mode: LyapunovMode) -> LyapunovEstimate {
    match mode {
        LyapunovMode::FullMap => full_map(table, x0, n),
        LyapunovMode::ReturnMap => return_mode(table, x0, n),
    }
}

/// Estimates from `seeds` independent `μ`-random starting points.
pub fn lyapunov_seeds(
    table: &LemonTable,
    n: u64,
    seeds: usize,
    master: u64,
    mode: LyapunovMode,
    exec: &Execution,
) -> Vec<LyapunovEstimate> {
    exec.map(seeds, |i| {
        let mut rng = stream_rng(master, domain::LYAPUNOV, i as u64);
        let x0 = mu_sample(table, &mut rng);
        lyapunov(table, &x0, n, mode)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArcId;
    use std::f64::consts::PI;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn interval_examples() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t(0.975, 2) ≈ 4.3027, sd = 1.
        assert!((h - 4.302_652_7 / 3f64.sqrt()).abs() < 1e-6);
        assert!(mean_ci95(&[1.0]).1.is_infinite());
    }

    #[test]
    fn periodic_orbit_on_the_circle_has_zero_exponent() {
        let t = LemonTable::from_chord(0.9, 200.0).unwrap();
        // Regular pentagon with a vertex at the apex (1, 0).
        let x0 = PhasePoint::new(ArcId::Unit, t.len_gamma1() / 2.0, PI / 2.0 - PI / 5.0);
        let est = lyapunov(&t, &x0, 100_000, LyapunovMode::FullMap);
        assert!(est.terminated.is_none());
        assert!(est.chi.abs() < 1e-3, "{est:?}");
    }

    #[test]
    fn hyperbolic_period_two_region_gives_positive_exponent() {
        let t = LemonTable::new(1.5, 2.0).unwrap();
        let mut rng = stream_rng(3, 0, 0);
        let x0 = mu_sample(&t, &mut rng);
        let est = lyapunov(&t, &x0, 200_000, LyapunovMode::ReturnMap);
        assert!(est.terminated.is_none(), "{est:?}");
        assert!(est.chi > 0.0 && est.chi_full.unwrap() > 0.0, "{est:?}");
        assert!(est.suspension_error().unwrap() < 0.05, "{est:?}");
    }
}
