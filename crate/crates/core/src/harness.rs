//! Experiment orchestration: algorithm dispatch, grids of generated
//! instances, result rows and their CSV form, and key=value config files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{beck_fiala, gram_schmidt_walk, random_coloring};
use crate::error::{Error, Result};
use crate::instance::{canonicalize, discrepancy, gen_random_regular, Coloring, SetSystem};
use crate::rounding::round_full;
use crate::walk::{run_walk, write_telemetry, PotentialMode, WalkConfig, WalkOutcome};

pub const RESULTS_HEADER: &str = "alg,n,k,seed,disc,b_final,runtime_ms,status,guard_tripped,violations";

/// Offsets separating the random streams an algorithm uses from the instance
/// generator, which consumes the bare seed.
const ALG_STREAM: u64 = 0x5eed_0001;
const ROUND_STREAM: u64 = 0x5eed_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Walk,
    WalkSimple,
    BeckFiala,
    Gsw,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Walk, Algorithm::WalkSimple, Algorithm::BeckFiala, Algorithm::Gsw, Algorithm::Random];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Walk => "walk",
            Algorithm::WalkSimple => "walk-simple",
            Algorithm::BeckFiala => "beckfiala",
            Algorithm::Gsw => "gsw",
            Algorithm::Random => "random",
        }
    }

    pub fn is_walk(self) -> bool {
        matches!(self, Algorithm::Walk | Algorithm::WalkSimple)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Where the instances of an experiment come from.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Square random instances `n x n` with column degree `k`, one per
    /// (cell, seed), generated from the seed.
    Generated(Vec<(usize, usize)>),
    /// A fixed instance shared by all seeds.
    Fixed(SetSystem),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub source: InstanceSource,
    pub seeds: Vec<u64>,
    /// Base walk settings; the seed and potential mode are set per run.
    pub walk: WalkConfig,
    /// Directory receiving one telemetry CSV per walk run.
    pub telemetry_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithms selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds selected".into()));
        }
        if let InstanceSource::Generated(grid) = &self.source {
            if grid.is_empty() {
                return Err(Error::InvalidParameter("empty grid".into()));
            }
            if let Some(&(n, k)) = grid.iter().find(|&&(n, k)| k == 0 || k > n) {
                return Err(Error::InvalidParameter(format!("grid cell {n}x{k} needs 1 <= k <= n")));
            }
        }
        self.walk.validate()
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub alg: Algorithm,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Discrepancy on the original instance; `None` when the run failed.
    pub disc: Option<f64>,
    pub b_final: Option<f64>,
    pub runtime_ms: u128,
    pub status: String,
    pub guard_tripped: bool,
    pub violations: usize,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.alg,
            self.n,
            self.k,
            self.seed,
            opt(self.disc),
            opt(self.b_final),
            self.runtime_ms,
            self.status,
            u8::from(self.guard_tripped),
            self.violations
        )
    }

    pub fn is_ok(&self) -> bool {
        self.disc.is_some() && (self.status == "ok" || self.status == "healthy" || self.status == "guard-tripped")
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// A finished run: its result row and, for walks, the full outcome.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub row: ResultRow,
    /// Full coloring of the original columns, when the run produced one.
    pub coloring: Option<Coloring>,
    pub walk: Option<WalkOutcome>,
}

/// Walk settings for one algorithm and seed.
pub fn walk_config_for(base: &WalkConfig, alg: Algorithm, seed: u64) -> WalkConfig {
    let mut cfg = base.clone();
    cfg.seed = seed ^ ALG_STREAM;
    cfg.potential = if alg == Algorithm::WalkSimple { PotentialMode::Simple } else { PotentialMode::Full };
    cfg
}

/// Runs one algorithm on one instance.
pub fn run_single(alg: Algorithm, sys: &SetSystem, seed: u64, base: &WalkConfig) -> RunRecord {
    let started = Instant::now();
    let mut row = ResultRow {
        alg,
        n: sys.n_cols(),
        k: sys.k(),
        seed,
        disc: None,
        b_final: None,
        runtime_ms: 0,
        status: "ok".into(),
        guard_tripped: false,
        violations: 0,
    };
    let mut walk = None;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ALG_STREAM);
    let result = match alg {
        Algorithm::BeckFiala => beck_fiala(sys),
        Algorithm::Gsw => gram_schmidt_walk(sys, &mut rng),
        Algorithm::Random => Ok(random_coloring(sys.n_cols(), &mut rng)),
        Algorithm::Walk | Algorithm::WalkSimple => {
            let inst = canonicalize(sys);
            let cfg = walk_config_for(base, alg, seed);
            match run_walk(&inst, &cfg) {
                Ok(outcome) => {
                    row.b_final = Some(outcome.summary.b_final);
                    row.status = outcome.status.label().to_string();
                    row.guard_tripped = outcome.summary.guard_tripped;
                    row.violations = outcome.summary.violations.total();
                    let finished = if outcome.status.is_healthy() || !cfg.strict {
                        let mut rrng = ChaCha8Rng::seed_from_u64(seed ^ ROUND_STREAM);
                        round_full(&outcome.coloring, &inst, &mut rrng).map(|r| inst.restrict(&r.coloring))
                    } else {
                        Err(Error::InvariantViolation(outcome.status.to_string()))
                    };
                    walk = Some(outcome);
                    finished
                }
                Err(e) => Err(e),
            }
        }
    };
    let coloring = match result.and_then(|x| discrepancy(sys, &x).map(|d| (x, d))) {
        Ok((x, d)) => {
            row.disc = Some(d);
            Some(x)
        }
        Err(e) => {
            row.status = format!("failed: {}", e.to_string().replace([',', '\n'], ";"));
            None
        }
    };
    if let Some(w) = &walk {
        if !w.status.is_healthy() && row.disc.is_some() {
            row.status = w.status.label().to_string();
        }
    }
    row.runtime_ms = started.elapsed().as_millis();
    RunRecord { row, coloring, walk }
}

/// File name used for a walk run's telemetry.
pub fn telemetry_file_name(alg: Algorithm, n: usize, k: usize, seed: u64) -> String {
    format!("{alg}_n{n}_k{k}_s{seed}.csv")
}

fn instance_for(source: &InstanceSource, cell: usize, seed: u64) -> Result<SetSystem> {
    match source {
        InstanceSource::Generated(grid) => {
            let (n, k) = grid[cell];
            gen_random_regular(n, n, k, seed)
        }
        InstanceSource::Fixed(sys) => Ok(sys.clone()),
    }
}

/// Runs every (algorithm, cell, seed) combination on a worker pool. Rows come
/// back ordered by cell, then seed, then algorithm, whatever the completion
/// order; only `runtime_ms` varies between identical invocations.
pub fn run_experiment_records(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    if let Some(dir) = &cfg.telemetry_dir {
        std::fs::create_dir_all(dir)?;
    }
    let cells = match &cfg.source {
        InstanceSource::Generated(grid) => grid.len(),
        InstanceSource::Fixed(_) => 1,
    };
    let tasks: Vec<(usize, u64, Algorithm)> = (0..cells)
        .flat_map(|c| cfg.seeds.iter().flat_map(move |&s| cfg.algorithms.iter().map(move |&a| (c, s, a))))
        .collect();
    let records: Vec<Result<RunRecord>> = tasks
        .par_iter()
        .map(|&(cell, seed, alg)| {
            let sys = instance_for(&cfg.source, cell, seed)?;
            let record = run_single(alg, &sys, seed, &cfg.walk);
            if let (Some(dir), Some(w)) = (&cfg.telemetry_dir, &record.walk) {
                let path = dir.join(telemetry_file_name(alg, sys.n_cols(), sys.k(), seed));
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                write_telemetry(&mut f, &w.telemetry)?;
            }
            Ok(record)
        })
        .collect();
    records.into_iter().collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_records(cfg)?.into_iter().map(|r| r.row).collect())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, results_csv(rows))?;
    Ok(())
}

/// Seeds given as `N` (meaning `0..N`), `a..b`, or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("bad seed list `{s}`"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    if s.contains(',') {
        return s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect();
    }
    let count: u64 = s.parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(bad());
    }
    Ok((0..count).collect())
}

/// Grid given as `NxK` cells separated by commas, e.g. `256x16,512x32`.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|cell| {
            let bad = || Error::InvalidParameter(format!("bad grid cell `{cell}`, expected NxK"));
            let (n, k) = cell.trim().split_once('x').ok_or_else(bad)?;
            Ok((n.trim().parse().map_err(|_| bad())?, k.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// `key=value` lines; `#` starts a comment. Later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: ln + 1, msg: "expected key=value".into() })?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(Error::Parse { line: ln + 1, msg: "empty key".into() });
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// One named pass/fail finding about a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Checks a finished walk against the invariants its analysis relies on.
pub fn certify_walk(outcome: &WalkOutcome) -> Vec<Check> {
    let s = &outcome.summary;
    let v = &s.violations;
    let p = &s.params;
    let check = |name, passed, detail: String| Check { name, passed, detail };
    vec![
        check("status", outcome.status.is_healthy(), outcome.status.to_string()),
        check(
            "step norm",
            v.step_norm == 0,
            format!("max |Δ‖x‖² − dt'| = {:.3e}", s.max_step_norm_error),
        ),
        check(
            "cumulative norm",
            v.cumulative_norm == 0,
            format!("max |‖x‖² − t| / (1 + t) = {:.3e}", s.max_cumulative_norm_error),
        ),
        check(
            "slack and barrier",
            s.min_slack_final > 0.0 && s.max_row_value < s.b_final && s.b_final <= p.barrier_bound() + 1e-6,
            format!(
                "min slack {:.4}, max row {:.4}, b_final {:.4}, bound {:.4}",
                s.min_slack_final,
                s.max_row_value,
                s.b_final,
                p.barrier_bound()
            ),
        ),
        check("singular values", v.sigma == 0, format!("{} rebuilds over {:.4}", v.sigma, p.sigma_bound())),
        check(
            "column weights",
            s.envelope_violations == 0,
            format!("max W {:.4e}, envelope {:.4e}", s.max_column_weight, p.column_weight_envelope()),
        ),
        check("potential guard", !s.guard_tripped, format!("guard tripped: {}", s.guard_tripped)),
        check("other monitors", v.total() == v.sigma, format!("{v:?}")),
    ]
}

/// Median of the successful discrepancies of `alg` in `rows`.
pub fn median_disc(rows: &[ResultRow], alg: Algorithm) -> Option<f64> {
    let mut v: Vec<f64> = rows.iter().filter(|r| r.alg == alg).filter_map(|r| r.disc).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
}
