//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs are shared between criteria: the twenty (512, 32) walks serve the
//! norm, guard, slack, singular value and column weight checks, and the
//! (1024, 64) walks serve both the quality and the mode comparison. Result
//! tables and telemetry are archived under the cargo target tmp directory.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use discwalk::baselines::beck_fiala;
use discwalk::harness::{
    median_disc, results_csv, run_single, telemetry_file_name, Algorithm, ResultRow, RunRecord,
};
use discwalk::instance::{
    brute_force_min_disc, canonicalize, discrepancy, gen_random_regular, gen_random_regular_with, SetSystem, SignModel,
};
use discwalk::linalg::OrthoBasis;
use discwalk::sampler::{draw_direction, solve_subisotropic, verify_plan, SubspaceBasis, DEFAULT_ETA, DEFAULT_KAPPA};
use discwalk::walk::{telemetry_csv, PotentialMode, WalkConfig, WalkOutcome};

struct Verdict {
    id: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn archive_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(dir.join("telemetry")).expect("archive directory");
    dir
}

fn archive_runs(name: &str, records: &[&RunRecord]) {
    let dir = archive_dir();
    let rows: Vec<ResultRow> = records.iter().map(|r| r.row.clone()).collect();
    std::fs::write(dir.join(format!("{name}.csv")), results_csv(&rows)).expect("results archive");
    for r in records {
        if let Some(w) = &r.walk {
            let file = telemetry_file_name(r.row.alg, r.row.n, r.row.k, r.row.seed);
            std::fs::write(dir.join("telemetry").join(file), telemetry_csv(&w.telemetry)).expect("telemetry archive");
        }
    }
}

fn walk_run(n: usize, k: usize, seed: u64, alg: Algorithm) -> (SetSystem, RunRecord) {
    let sys = gen_random_regular(n, n, k, seed).expect("generator");
    let record = run_single(alg, &sys, seed, &WalkConfig::default());
    (sys, record)
}

fn outcome(r: &RunRecord) -> &WalkOutcome {
    r.walk.as_ref().expect("walk outcome")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// A1: random half-dimensional subspaces, verified plans, and the empirical
/// diagonal of the direction covariance.
fn a1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa1);
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;
    let draws = 100_000;
    for config in 0..50 {
        let h = if config % 2 == 0 { 64 } else { 256 };
        // Alternate dense Gaussian subspaces with spans of sparse sign rows,
        // which concentrate on few coordinates like blocked rows do.
        let mut basis = OrthoBasis::new(h);
        while basis.len() < h / 2 {
            let v: Vec<f64> = if config % 4 < 2 {
                (0..h).map(|_| rng.sample(StandardNormal)).collect()
            } else {
                let mut v = vec![0.0; h];
                for _ in 0..rng.random_range(2..12) {
                    v[rng.random_range(0..h)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                v
            };
            basis.push(&v, 1e-8);
        }
        let w = SubspaceBasis { h, basis, declared_count: h / 2 };
        let plan = match solve_subisotropic(&w, DEFAULT_KAPPA, DEFAULT_ETA) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("config {config}: {e}"));
                continue;
            }
        };
        let check = verify_plan(&plan.u, &w, DEFAULT_KAPPA, DEFAULT_ETA);
        if !check.passes() {
            failures.push(format!("config {config}: {check:?}"));
        }
        let mut sum = vec![0.0; h];
        let mut sum_sq = vec![0.0; h];
        for _ in 0..draws {
            let v = draw_direction(&plan, &mut rng).expect("draw");
            for ((s, q), x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&v) {
                let x2 = x * x;
                *s += x2;
                *q += x2 * x2;
            }
        }
        let nd = draws as f64;
        for j in 0..h {
            let mean = sum[j] / nd;
            let std = ((sum_sq[j] / nd - mean * mean).max(0.0) / nd).sqrt();
            let limit = 16.0 / h as f64 + 3.0 * std;
            worst_ratio = worst_ratio.max(mean / limit);
            if mean > limit {
                failures.push(format!("config {config}: diag[{j}] = {mean:.4e} > {limit:.4e}"));
                break;
            }
        }
    }
    let detail = format!(
        "50 plans, {} failing; max diag / limit = {worst_ratio:.3}{}",
        failures.len(),
        failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
    );
    (failures.is_empty(), detail)
}

/// A2 on the first (512, 32) run.
fn a2(sys_run: &(SetSystem, RunRecord), elapsed: Duration) -> (bool, String) {
    let o = outcome(&sys_run.1);
    let s = &o.summary;
    // Recompute the final norm from the coloring itself.
    let norm_sq: f64 = o.coloring.values().iter().map(|v| v * v).sum();
    let final_err = (norm_sq - s.t_final).abs() / (1.0 + s.t_final);
    let passed = s.max_step_norm_error <= 1e-10
        && s.max_cumulative_norm_error <= 1e-6
        && final_err <= 1e-6
        && s.violations.step_norm == 0
        && s.violations.cumulative_norm == 0
        && elapsed <= Duration::from_secs(600);
    let detail = format!(
        "{} micro-steps ({} landed on ±1), max step error {:.2e}, max cumulative error {:.2e}, final {:.2e}, {:.1}s",
        s.micro_steps,
        s.truncated_steps,
        s.max_step_norm_error,
        s.max_cumulative_norm_error,
        final_err,
        elapsed.as_secs_f64()
    );
    (passed, detail)
}

/// A3: guard never tripped in at least 18 of 20 runs.
fn a3(runs: &[(SetSystem, RunRecord)]) -> (bool, String) {
    let clean = runs
        .iter()
        .filter(|(_, r)| {
            let o = outcome(r);
            o.status.is_healthy() && !o.summary.guard_tripped && o.telemetry.iter().all(|t| !t.guard_tripped)
        })
        .count();
    let worst = runs
        .iter()
        .flat_map(|(_, r)| {
            let o = outcome(r);
            o.telemetry.iter().map(move |t| t.phi_total / o.summary.params.phi_reference)
        })
        .fold(0.0f64, f64::max);
    (clean >= 18, format!("{clean}/20 runs completed with the guard untouched; max Φ/Φ(0) = {worst:.4}"))
}

/// A4: recomputed final slacks, row values and barrier bound of every
/// healthy full-mode run.
fn a4(runs: &[&(SetSystem, RunRecord)]) -> (bool, String) {
    let mut bad = Vec::new();
    let mut healthy = 0;
    let mut worst_gap = f64::INFINITY;
    for (sys, r) in runs {
        let o = outcome(r);
        if !o.status.is_healthy() || o.summary.params.mode != PotentialMode::Full {
            continue;
        }
        healthy += 1;
        let inst = canonicalize(sys);
        let p = &o.summary.params;
        let x = o.coloring.values();
        let b = o.summary.b_final;
        let csys = &inst.system;
        let mut min_slack = f64::INFINITY;
        let mut max_row = f64::NEG_INFINITY;
        let cutoff = 1.0 - 1.0 / (2.0 * p.n as f64);
        for i in 0..csys.n_rows() {
            let dot = csys.row_dot(i, x);
            let alive = csys.row(i).iter().filter(|&&(j, _)| x[j].abs() <= cutoff).count();
            let energy: f64 = csys.row(i).iter().map(|&(j, _)| 1.0 - x[j] * x[j]).sum();
            let slack = if alive > 10 * p.k { p.b0 / 2.0 } else { b - dot - p.beta * energy };
            min_slack = min_slack.min(slack);
            max_row = max_row.max(dot);
        }
        let bound = p.barrier_bound() + 1e-6;
        worst_gap = worst_gap.min(bound - b);
        if !(min_slack > 0.0 && max_row < b && b <= bound) {
            bad.push(format!(
                "n={} seed {}: min slack {min_slack:.4}, max row {max_row:.4}, b {b:.4}, bound {bound:.4}",
                r.row.n, r.row.seed
            ));
        }
    }
    let detail = format!(
        "{healthy} healthy runs, {} failing; smallest bound − b_final = {worst_gap:.3}{}",
        bad.len(),
        bad.first().map(|f| format!("; first: {f}")).unwrap_or_default()
    );
    (bad.is_empty() && healthy > 0, detail)
}

/// A5: recorded checkpoint singular values of every rebuild of every
/// healthy full-mode run.
fn a5(runs: &[&(SetSystem, RunRecord)]) -> (bool, String) {
    let mut rebuilds = 0;
    let mut over = 0;
    let mut worst = 0.0f64;
    for (_, r) in runs {
        let o = outcome(r);
        if !o.status.is_healthy() || o.summary.params.mode != PotentialMode::Full {
            continue;
        }
        let bound = o.summary.params.sigma_bound();
        for t in &o.telemetry {
            rebuilds += 1;
            let m = t.sigma_dang.max(t.sigma_safe);
            worst = worst.max(m / bound);
            over += usize::from(m > bound);
        }
        over += o.summary.violations.sigma;
    }
    (
        over == 0 && rebuilds > 0,
        format!("{rebuilds} rebuilds, {over} over the bound (estimates or Frobenius certificates); max σ / bound = {worst:.3}"),
    )
}

/// A6: column weights against their envelope over the A3 runs.
fn a6(runs: &[(SetSystem, RunRecord)]) -> (bool, String) {
    let mut clean = 0;
    let mut worst = 0.0f64;
    for (_, r) in runs {
        let o = outcome(r);
        let env = o.summary.params.column_weight_envelope();
        let recorded = o.telemetry.iter().filter(|t| t.w_max > env).count();
        worst = worst.max(o.summary.max_column_weight / env);
        if recorded == 0 && o.summary.envelope_violations == 0 {
            clean += 1;
        }
    }
    (clean >= 18, format!("{clean}/20 runs with zero envelope violations; max W / envelope = {worst:.4}"))
}

/// A7: Beck–Fiala on 100 random instances.
fn a7() -> (bool, String) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa7);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for idx in 0..100u64 {
        let k = [2, 4, 8, 16][(idx % 4) as usize];
        let rows = rng.random_range(k.max(16)..=160);
        let cols = rng.random_range(16..=160);
        let model = if idx % 2 == 0 { SignModel::Positive } else { SignModel::Random };
        let sys = gen_random_regular_with(rows, cols, k, 1000 + idx, model).expect("generator");
        match beck_fiala(&sys) {
            Ok(x) => {
                let d = discrepancy(&sys, &x).expect("lengths match");
                worst = worst.max(d / (2 * k - 1) as f64);
                violations += usize::from(d > (2 * k - 1) as f64 || !x.is_full());
            }
            Err(_) => violations += 1,
        }
    }
    let elapsed = started.elapsed();
    (
        violations == 0 && elapsed <= Duration::from_secs(120),
        format!("100 instances, {violations} violations; max disc / (2k−1) = {worst:.3}; {:.1}s", elapsed.as_secs_f64()),
    )
}

/// A8: every algorithm against the exhaustive optimum on small instances.
fn a8() -> (bool, String) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa8);
    let mut bad = Vec::new();
    let mut gaps = String::new();
    for idx in 0..25u64 {
        let cols = rng.random_range(2..=16);
        let rows = rng.random_range(2..=16);
        let k = rng.random_range(1..=rows.min(4));
        let model = if idx % 2 == 0 { SignModel::Positive } else { SignModel::Random };
        let sys = gen_random_regular_with(rows, cols, k, 2000 + idx, model).expect("generator");
        let opt = brute_force_min_disc(&sys).expect("small instance") as f64;
        for alg in Algorithm::ALL {
            let r = run_single(alg, &sys, idx, &WalkConfig::default());
            match r.row.disc {
                Some(d) if d >= opt => {
                    if alg == Algorithm::BeckFiala && d > (2 * k - 1) as f64 {
                        bad.push(format!("instance {idx}: beckfiala {d} > 2k−1"));
                    }
                }
                Some(d) => bad.push(format!("instance {idx}: {alg} {d} below optimum {opt}")),
                None => bad.push(format!("instance {idx}: {alg} {}", r.row.status)),
            }
            if idx == 0 {
                let _ = write!(gaps, "{alg}={} ", r.row.disc.unwrap_or(f64::NAN));
            }
        }
    }
    let elapsed = started.elapsed();
    (
        bad.is_empty() && elapsed <= Duration::from_secs(120),
        format!(
            "25 instances × 5 algorithms, {} problems; {:.1}s{}",
            bad.len(),
            elapsed.as_secs_f64(),
            bad.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let mut verdicts: Vec<Verdict> = Vec::new();
    let mut record = |id: &'static str, elapsed: Duration, (passed, detail): (bool, String)| {
        let v = Verdict { id, passed, detail, elapsed };
        println!("{} {} ({:.1}s) {}", v.id, if v.passed { "PASS" } else { "FAIL" }, v.elapsed.as_secs_f64(), v.detail);
        verdicts.push(v);
    };

    let t = Instant::now();
    let v = a1();
    record("A1", t.elapsed(), v);

    let t = Instant::now();
    let mut mid_runs = Vec::new();
    let mut first_elapsed = Duration::ZERO;
    for seed in 0..20 {
        let started = Instant::now();
        mid_runs.push(walk_run(512, 32, seed, Algorithm::Walk));
        if seed == 0 {
            first_elapsed = started.elapsed();
        }
    }
    archive_runs("mid_512_32", &mid_runs.iter().map(|(_, r)| r).collect::<Vec<_>>());
    let mid_elapsed = t.elapsed();
    record("A2", first_elapsed, a2(&mid_runs[0], first_elapsed));
    record("A3", mid_elapsed, a3(&mid_runs));

    // The quality runs also feed the slack and singular value checks.
    let t = Instant::now();
    let mut quality = Vec::new();
    let mut random_rows = Vec::new();
    for seed in 0..10 {
        quality.push(walk_run(1024, 64, seed, Algorithm::Walk));
        let sys = &quality.last().unwrap().0;
        random_rows.push(run_single(Algorithm::Random, sys, seed, &WalkConfig::default()));
    }
    let quality_elapsed = t.elapsed();

    let t = Instant::now();
    let mut modes = Vec::new();
    for k in [16, 64, 256] {
        for seed in 0..3 {
            if k != 64 {
                modes.push(walk_run(1024, k, seed, Algorithm::Walk));
            }
            modes.push(walk_run(1024, k, seed, Algorithm::WalkSimple));
        }
    }
    let modes_elapsed = t.elapsed();

    let full_runs: Vec<&(SetSystem, RunRecord)> = mid_runs.iter().chain(&quality).chain(&modes).collect();
    record("A4", Duration::ZERO, a4(&full_runs));
    record("A5", Duration::ZERO, a5(&full_runs));
    record("A6", Duration::ZERO, a6(&mid_runs));

    let t = Instant::now();
    let v = a7();
    record("A7", t.elapsed(), v);
    let t = Instant::now();
    let v = a8();
    record("A8", t.elapsed(), v);

    // A9
    {
        let mut rows: Vec<&RunRecord> = quality.iter().map(|(_, r)| r).collect();
        rows.extend(random_rows.iter());
        archive_runs("quality_1024_64", &rows);
        let table: Vec<ResultRow> = rows.iter().map(|r| r.row.clone()).collect();
        let walk = median_disc(&table, Algorithm::Walk);
        let random = median_disc(&table, Algorithm::Random);
        let target = 8.0 * 64f64.sqrt();
        let complete = table.iter().filter(|r| r.alg == Algorithm::Walk && r.disc.is_some()).count();
        let passed = matches!((walk, random), (Some(w), Some(r)) if w <= r && w <= target)
            && complete == 10
            && quality_elapsed <= Duration::from_secs(3600);
        record(
            "A9",
            quality_elapsed,
            (
                passed,
                format!(
                    "median walk {} vs random {} (target ≤ {target}); {complete}/10 walks complete; {:.1}s",
                    walk.map_or("-".into(), |v| v.to_string()),
                    random.map_or("-".into(), |v| v.to_string()),
                    quality_elapsed.as_secs_f64()
                ),
            ),
        );
    }

    // A10
    {
        let mut all: Vec<&RunRecord> = modes.iter().map(|(_, r)| r).collect();
        all.extend(quality.iter().take(3).map(|(_, r)| r));
        archive_runs("modes_1024", &all);
        let mut wins = 0;
        let mut cells = String::new();
        for k in [16, 64, 256] {
            let med = |alg: Algorithm| {
                let v: Vec<f64> =
                    all.iter().filter(|r| r.row.alg == alg && r.row.k == k).filter_map(|r| r.row.disc).collect();
                (v.len() == 3).then(|| median(v))
            };
            let (full, simple) = (med(Algorithm::Walk), med(Algorithm::WalkSimple));
            let win = matches!((full, simple), (Some(f), Some(s)) if f <= s);
            wins += usize::from(win);
            let _ = write!(
                cells,
                "k={k}: full {} simple {}{}; ",
                full.map_or("-".into(), |v| v.to_string()),
                simple.map_or("-".into(), |v| v.to_string()),
                if win { " ✓" } else { "" }
            );
        }
        record(
            "A10",
            modes_elapsed,
            (wins >= 2, format!("{cells}full mode no worse in {wins}/3 cells; {:.1}s", modes_elapsed.as_secs_f64())),
        );
    }

    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!(
        "acceptance: {}/{} criteria passed{}; archive in {}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() { String::new() } else { format!(", failed: {}", failed.join(" ")) },
        archive_dir().display()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
