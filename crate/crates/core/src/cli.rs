//! `lemon` command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::billiard_map::{Orbit, PhasePoint};
use crate::exec::Execution;
use crate::geometry::{GeometryError, LemonTable};
use crate::hyperbolicity::{
    check_a0, check_conditions, check_flat_lemma, find_r_star, verify_cone, Flag,
    LyapunovMode, RStarError, RStarReport, ScanConfig,
};
use crate::hyperbolicity::lyapunov::{lyapunov_seeds, mean_ci95};
use crate::hyperbolicity::scan::GridRange;
use crate::induced_maps::{advance_to_m, return_step, ReturnBlock};
use crate::output::{write_atomic, Field, Format, Sheet};
use crate::sampling::{domain, mu_sample, sample_blocks, stream_rng, ADVANCE_CAP};

/// Environment variable read for the default `--workers`.
pub const WORKERS_ENV: &str = "LEMON_WORKERS";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "lemon", version, about = "Asymmetric lemon billiard experiments")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Print table geometry.
    Table(TableArgs),
    /// Dump a billiard orbit.
    Orbit {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        /// Starting arclength; μ-random start when omitted.
        #[arg(long, requires = "phi")]
        s: Option<f64>,
        #[arg(long, requires = "s", allow_hyphen_values = true)]
        phi: Option<f64>,
    },
    /// Dump consecutive return blocks.
    Blocks {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 1000)]
        n: u64,
    },
    /// Evaluate the hyperbolicity conditions on sampled blocks.
    Check {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Emit one JSON record per block instead of summary statistics.
        #[arg(long)]
        verbose: bool,
    },
    /// Estimate the Lyapunov exponent from μ-random seeds.
    Lyapunov {
        #[command(flatten)]
        table: TableArgs,
        /// Collisions per seed.
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
    },
    /// Search the smallest admissible big radius for a chord length.
    Rstar {
        #[arg(long)]
        chord: f64,
        /// Comma list or `min:max:count`.
        #[arg(long, default_value = "10,50,100,200,500")]
        grid: String,
        #[arg(long, alias = "n", default_value_t = 100_000)]
        samples: usize,
    },
    /// Evaluate a `(b, R)` grid.
    Scan {
        /// `min:max:steps`.
        #[arg(long)]
        b: String,
        /// `min:max:steps`.
        #[arg(long = "R")]
        r: String,
        #[arg(long, default_value_t = 200)]
        blocks: usize,
        /// Collisions per Lyapunov estimate.
        #[arg(long, default_value_t = 100_000)]
        collisions: u64,
    },
}

/// Either `--b` with `--R`, or `--chord` with `--R`.
#[derive(Debug, Clone, Copy, Args, Serialize)]
#[group(required = true, multiple = false, id = "shape")]
pub struct TableShape {
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub chord: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct TableArgs {
    #[command(flatten)]
    pub shape: TableShape,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: f64,
}

impl TableArgs {
    pub fn build(&self) -> Result<LemonTable, GeometryError> {
        match (self.shape.b, self.shape.chord) {
            (Some(b), _) => LemonTable::new(b, self.r),
            (None, Some(c)) => LemonTable::from_chord(c, self.r),
            (None, None) => unreachable!("clap enforces the shape group"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Full,
    Return,
}

impl From<ModeArg> for LyapunovMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => LyapunovMode::FullMap,
            ModeArg::Return => LyapunovMode::ReturnMap,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("degenerate table: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Singular(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Degenerate(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Singular(_) => 4,
            CliError::Failed(_) | CliError::Io(_) => 1,
        }
    }
}

/// Parses `min:max:steps`.
pub fn parse_range(text: &str) -> Result<GridRange, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Usage(format!("expected min:max:steps, got {text:?}"));
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let range = GridRange {
        min: lo.trim().parse().map_err(|_| bad())?,
        max: hi.trim().parse().map_err(|_| bad())?,
        steps: n.trim().parse().map_err(|_| bad())?,
    };
    if range.steps == 0 || !(range.min <= range.max) {
        return Err(bad());
    }
    Ok(range)
}

/// Parses a comma list or `min:max:count`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    if text.contains(':') {
        return Ok(parse_range(text)?.values());
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad grid value {v:?}")))
        })
        .collect()
}

fn execution(config: &RunConfig) -> Result<Execution, CliError> {
    match config.workers {
        Some(0) => Err(CliError::Usage("--workers must be positive".into())),
        Some(w) => Ok(Execution::with_workers(w)),
        None => Ok(Execution::with_workers(
            std::thread::available_parallelism().map_or(1, |n| n.get()),
        )),
    }
}

/// The metadata object written as the first output line.
fn meta(config: &RunConfig, extra: Value) -> Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    json!({
        "tool": "lemon",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seed": config.seed,
        "timestamp": timestamp,
        "result": extra,
    })
}

/// Rendered output plus a deferred error to report after writing.
struct Artifact {
    text: String,
    deferred: Option<CliError>,
}

impl Artifact {
    fn sheet(config: &RunConfig, sheet: &Sheet, extra: Value) -> Self {
        Self {
            text: sheet.render(&meta(config, extra), config.format),
            deferred: None,
        }
    }
}

/// Runs one command and writes its artifact.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let artifact = match &config.command {
        Command::Table(t) => run_table(config, t)?,
        Command::Orbit { table, n, s, phi } => run_orbit(config, table, *n, s.zip(*phi))?,
        Command::Blocks { table, n } => run_blocks(config, table, *n)?,
        Command::Check { table, n, verbose } => run_check(config, table, *n, *verbose)?,
        Command::Lyapunov {
            table,
            n,
            seeds,
            mode,
        } => run_lyapunov(config, table, *n, *seeds, (*mode).into())?,
        Command::Rstar {
            chord,
            grid,
            samples,
        } => run_rstar(config, *chord, grid, *samples)?,
        Command::Scan {
            b,
            r,
            blocks,
            collisions,
        } => run_scan(config, b, r, *blocks, *collisions)?,
    };
    match &config.output {
        Some(path) => write_atomic(path, &artifact.text)?,
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(artifact.text.as_bytes())?;
        }
    }
    artifact.deferred.map_or(Ok(()), Err)
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lemon: {e}");
            e.exit_code()
        }
    }
}

fn run_table(config: &RunConfig, args: &TableArgs) -> Result<Artifact, CliError> {
    let t = args.build()?;
    let mut sheet = Sheet::new(&[
        "b", "R", "chordAB", "lenGamma1", "lenGammaR", "cornerAx", "cornerAy", "cornerBx",
        "cornerBy", "majorArc", "A0",
    ]);
    let (a, bb) = (t.corner_a(), t.corner_b());
    sheet.push(vec![
        t.b().into(),
        t.big_radius().into(),
        t.chord_length().into(),
        t.len_gamma1().into(),
        t.len_gamma_r().into(),
        a.x.into(),
        a.y.into(),
        bb.x.into(),
        bb.y.into(),
        t.is_major_arc().into(),
        check_a0(t.b(), t.big_radius()).holds.into(),
    ]);
    Ok(Artifact::sheet(config, &sheet, Value::Null))
}

fn run_orbit(
    config: &RunConfig,
    args: &TableArgs,
    n: u64,
    start: Option<(f64, f64)>,
) -> Result<Artifact, CliError> {
    let table = args.build()?;
    let x0 = match start {
        Some((s, phi)) => {
            if !(phi.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(CliError::Usage(format!("--phi must lie in (-π/2, π/2), got {phi}")));
            }
            PhasePoint::on_table(&table, table.wrap(s), phi)
        }
        None => mu_sample(&table, &mut stream_rng(config.seed, domain::ORBIT, 0)),
    };
    let mut sheet = Sheet::new(&["step", "arcId", "s", "phi", "tau", "d"]);
    let mut deferred = None;
    for (step, ev) in Orbit::new(&table, x0).take(n as usize).enumerate() {
        match ev {
            Ok(ev) => sheet.push(vec![
                step.into(),
                ev.point.arc.to_string().into(),
                ev.point.s.into(),
                ev.point.phi.into(),
                ev.tau.into(),
                ev.d.into(),
            ]),
            Err(e) => {
                deferred = Some(CliError::Singular(format!("orbit stopped at step {step}: {e}")));
                break;
            }
        }
    }
    let mut art = Artifact::sheet(config, &sheet, Value::Null);
    art.deferred = deferred;
    Ok(art)
}

const BLOCK_COLUMNS: [&str; 15] = [
    "index", "i0", "i1", "i2", "tau0", "tau1", "d0", "d1", "d2", "hat_d0", "hat_d1", "hat_R0",
    "hat_R1", "hat_tau0", "bar_tau1",
];

fn block_row(index: u64, b: &ReturnBlock) -> Vec<Field> {
    vec![
        index.into(),
        b.i0.into(),
        b.i1.into(),
        b.i2.into(),
        b.tau0.into(),
        b.tau1.into(),
        b.d0.into(),
        b.d1.into(),
        b.d2.into(),
        b.hat_d0().into(),
        b.hat_d1().into(),
        (-2.0 / b.hat_d0()).into(),
        (-2.0 / b.hat_d1()).into(),
        b.hat_tau0().into(),
        b.bar_tau1().into(),
    ]
}

/// Restarts from a fresh `μ` point after a singular return, at most this many times.
const BLOCK_RESTARTS: u64 = 1000;

fn run_blocks(config: &RunConfig, args: &TableArgs, n: u64) -> Result<Artifact, CliError> {
    let table = args.build()?;
    let mut rng = stream_rng(config.seed, domain::BLOCKS, 0);
    let mut sheet = Sheet::new(&BLOCK_COLUMNS);
    let mut restarts = 0u64;
    let mut current = None;
    while (sheet.rows.len() as u64) < n {
        let x = match current.take() {
            Some(x) => x,
            None => {
                let fresh = mu_sample(&table, &mut rng);
                match advance_to_m(&table, &fresh, ADVANCE_CAP) {
                    Ok(x) => x,
                    Err(_) => {
                        restarts += 1;
                        if restarts > BLOCK_RESTARTS {
                            break;
                        }
                        continue;
                    }
                }
            }
        };
        match return_step(&table, &x, |_| {}) {
            Ok(step) => {
                sheet.push(block_row(sheet.rows.len() as u64, &step.block));
                current = Some(step.image);
            }
            Err(_) => {
                restarts += 1;
                if restarts > BLOCK_RESTARTS {
                    break;
                }
            }
        }
    }
    let mut art = Artifact::sheet(config, &sheet, json!({ "restarts": restarts }));
    if (sheet.rows.len() as u64) < n {
        art.deferred = Some(CliError::Singular(format!(
            "gave up after {restarts} singular returns with {} of {n} blocks",
            sheet.rows.len()
        )));
    }
    Ok(art)
}

#[derive(Default)]
struct Tally {
    holds: u64,
    fails: u64,
    near_tie: u64,
}

impl Tally {
    fn add(&mut self, f: Flag) {
        if f.near_tie {
            self.near_tie += 1;
        } else if f.holds {
            self.holds += 1;
        } else {
            self.fails += 1;
        }
    }
    fn add_bool(&mut self, holds: bool) {
        if holds {
            self.holds += 1;
        } else {
            self.fails += 1;
        }
    }
}

fn run_check(config: &RunConfig, args: &TableArgs, n: usize, verbose: bool) -> Result<Artifact, CliError> {
    let table = args.build()?;
    let exec = execution(config)?;
    let batch = sample_blocks(&table, n, config.seed, &exec);
    if batch.blocks.is_empty() && n > 0 {
        return Err(CliError::Singular(format!(
            "no regular blocks after {} singular draws",
            batch.singular
        )));
    }
    let a0 = check_a0(table.b(), table.big_radius());
    let extra = json!({
        "A0": a0.holds,
        "nBlocks": batch.blocks.len(),
        "nSingular": batch.singular,
    });

    if verbose {
        let mut text = String::new();
        let mut head = serde_json::Map::new();
        head.insert("meta".into(), meta(config, extra));
        text.push_str(&Value::Object(head).to_string());
        text.push('\n');
        for (i, s) in batch.blocks.iter().enumerate() {
            let blk = &s.step.block;
            let rec = json!({
                "index": i,
                "block": blk,
                "report": check_conditions(blk),
                "cone": verify_cone(blk),
            });
            text.push_str(&rec.to_string());
            text.push('\n');
        }
        return Ok(Artifact { text, deferred: None });
    }

    let names = [
        "A0", "assumptions", "D1", "F1", "D2", "F2", "P1", "P2", "coneOk", "verifyCone",
        "equivalence", "flatLemma",
    ];
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    for s in &batch.blocks {
        let blk = &s.step.block;
        let rep = check_conditions(blk);
        let cone = verify_cone(blk);
        tallies[0].add(a0);
        tallies[1].add(rep.assumptions.applicable());
        let near = rep.near_tie;
        let base = [rep.base.d1, rep.base.f1, rep.base.d2, rep.base.f2, rep.base.p1, rep.base.p2];
        for (t, f) in tallies[2..8].iter_mut().zip(base) {
            t.add(Flag { near_tie: f.near_tie || near, ..f });
        }
        tallies[8].add(Flag {
            holds: rep.cone_ok,
            slack: 0.0,
            near_tie: rep.near_tie,
        });
        tallies[9].add(Flag {
            holds: cone.holds,
            slack: 0.0,
            near_tie: cone.near_tie,
        });
        if rep.near_tie || cone.near_tie {
            tallies[10].near_tie += 1;
        } else {
            tallies[10].add_bool(rep.equivalence().all() && cone.holds == rep.cone_ok);
        }
        if let Some(f) = check_flat_lemma(blk) {
            tallies[11].add(f);
        }
    }
    let mut sheet = Sheet::new(&["condition", "holds", "fails", "nearTie", "fraction"]);
    for (name, t) in names.iter().zip(&tallies) {
        let decided = t.holds + t.fails;
        let frac = if decided == 0 { f64::NAN } else { t.holds as f64 / decided as f64 };
        sheet.push(vec![
            (*name).into(),
            t.holds.into(),
            t.fails.into(),
            t.near_tie.into(),
            frac.into(),
        ]);
    }
    Ok(Artifact::sheet(config, &sheet, extra))
}

fn run_lyapunov(
    config: &RunConfig,
    args: &TableArgs,
    n: u64,
    seeds: usize,
    mode: LyapunovMode,
) -> Result<Artifact, CliError> {
    let table = args.build()?;
    let exec = execution(config)?;
    let ests = lyapunov_seeds(&table, n, seeds, config.seed, mode, &exec);
    let mut sheet = Sheet::new(&[
        "seed", "chi", "ci95", "collisions", "returns", "meanReturnTime", "chiFull", "chiFullCi95",
        "suspensionError", "terminated",
    ]);
    for (i, e) in ests.iter().enumerate() {
        sheet.push(vec![
            i.to_string().into(),
            e.chi.into(),
            e.ci95.into(),
            e.collisions.into(),
            e.returns.into(),
            e.mean_return_time.into(),
            e.chi_full.into(),
            e.chi_full_ci95.into(),
            e.suspension_error().into(),
            e.terminated.clone().into(),
        ]);
    }
    let chis: Vec<f64> = ests.iter().filter(|e| e.terminated.is_none()).map(|e| e.chi).collect();
    let (mean, half) = mean_ci95(&chis);
    sheet.push(vec![
        "pooled".into(),
        mean.into(),
        half.into(),
        ests.iter().map(|e| e.collisions).sum::<u64>().into(),
        Field::Text(String::new()),
        Field::Text(String::new()),
        Field::Text(String::new()),
        Field::Text(String::new()),
        Field::Text(String::new()),
        Field::Text(String::new()),
    ]);
    let mut art = Artifact::sheet(config, &sheet, Value::Null);
    if seeds > 0 && chis.is_empty() {
        art.deferred = Some(CliError::Singular("every seed hit a singularity".into()));
    }
    Ok(art)
}

fn rstar_sheet(report: &RStarReport) -> Sheet {
    let mut sheet = Sheet::new(&[
        "R", "b", "A0", "nBlocks", "nSingular", "nNearTie", "failAssumptions", "failCone",
        "coneMismatch", "smallD1", "cornerOutliers", "lengthOutliers", "minEntryCell", "passes",
    ]);
    for e in &report.evidence {
        sheet.push(vec![
            e.r.into(),
            e.b.into(),
            e.a0.into(),
            e.n_blocks.into(),
            e.n_singular.into(),
            e.n_near_tie.into(),
            e.fail_assumptions.into(),
            e.fail_cone.into(),
            e.cone_mismatch.into(),
            e.small_d1.into(),
            e.corner_outliers.into(),
            e.length_outliers.into(),
            e.min_entry_cell.into(),
            e.passes.into(),
        ]);
    }
    sheet
}

fn run_rstar(config: &RunConfig, chord: f64, grid: &str, samples: usize) -> Result<Artifact, CliError> {
    let grid = parse_grid(grid)?;
    let exec = execution(config)?;
    let (report, deferred) = match find_r_star(chord, &grid, samples, config.seed, &exec) {
        Ok(r) => (r, None),
        Err(RStarError::NoPassingR(r)) => (r, Some(CliError::Failed("no grid radius passed".into()))),
        Err(RStarError::Geometry(m)) => return Err(CliError::Degenerate(m)),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let extra = json!({ "chord": report.chord, "nStar": report.n_star, "rStar": report.r_star });
    let mut art = Artifact::sheet(config, &rstar_sheet(&report), extra);
    art.deferred = deferred;
    Ok(art)
}

fn run_scan(config: &RunConfig, b: &str, r: &str, blocks: usize, collisions: u64) -> Result<Artifact, CliError> {
    let scan_config = ScanConfig {
        b: parse_range(b)?,
        r: parse_range(r)?,
        blocks,
        collisions,
        seed: config.seed,
    };
    let exec = execution(config)?;
    let cells = crate::hyperbolicity::scan(&scan_config, &exec);
    let mut sheet = Sheet::new(&[
        "b", "R", "verdict", "fracA1", "fracA2", "fracA3", "fracCone", "chi", "chiCI",
        "meanReturnTime", "nBlocks", "nNearTie", "nSingular",
    ]);
    for c in &cells {
        sheet.push(vec![
            c.b.into(),
            c.r.into(),
            c.verdict.to_string().into(),
            c.frac_a1.into(),
            c.frac_a2.into(),
            c.frac_a3.into(),
            c.frac_cone.into(),
            c.chi.into(),
            c.chi_ci.into(),
            c.mean_return_time.into(),
            c.n_blocks.into(),
            c.n_near_tie.into(),
            c.n_singular.into(),
        ]);
    }
    Ok(Artifact::sheet(config, &sheet, Value::Null))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_grids() {
        let g = parse_range("1:2:3").unwrap();
        assert_eq!(g.values(), vec![1.0, 1.5, 2.0]);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("2:1:3").is_err());
        assert_eq!(parse_grid("10, 50,100").unwrap(), vec![10.0, 50.0, 100.0]);
        assert_eq!(parse_grid("10:500:10").unwrap().len(), 10);
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn table_shape_is_exclusive() {
        assert!(RunConfig::try_parse_from(["lemon", "table", "--b", "1.5", "--R", "2"]).is_ok());
        assert!(RunConfig::try_parse_from(["lemon", "table", "--chord", "0.9", "--R", "2"]).is_ok());
        assert!(RunConfig::try_parse_from(["lemon", "table", "--b", "1", "--chord", "0.9", "--R", "2"]).is_err());
        assert!(RunConfig::try_parse_from(["lemon", "table", "--R", "2"]).is_err());
    }

    #[test]
    fn exit_codes() {
        let usage = RunConfig::try_parse_from(["lemon", "table", "--b", "1.5"]).unwrap_err();
        assert_eq!(usage.exit_code(), 2);
        assert_eq!(main_with_args(["lemon", "table", "--b", "5", "--R", "2"]), 3);
    }
}
