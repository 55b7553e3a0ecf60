//! The barrier walk: fractional coloring, moving barrier, slacks and
//! potentials, blocking, and the run loop with its invariant monitors.

mod blocking;
mod config;
mod telemetry;

use std::fmt;
use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use blocking::{BlockingPlan, SvdCache};
pub use config::{PotentialMode, SamplerMode, WalkConfig, WalkParams, EXPONENT_CAP};
pub use telemetry::{telemetry_csv, write_telemetry, SamplerDiagnostics, StepRecord, TELEMETRY_HEADER};

use crate::error::{Error, Result};
use crate::instance::{CanonicalInstance, Coloring};
use crate::sampler::{self, SubspaceBasis, TOL_ORTHOGONAL};

/// Allowed error of `‖x'‖² − ‖x‖² − dt` on one step.
pub const TOL_STEP_NORM: f64 = 1e-10;
/// Allowed relative error of `‖x‖² − t`.
pub const TOL_CUMULATIVE_NORM: f64 = 1e-6;

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Healthy,
    /// The total potential exceeded the guard at some point.
    GuardTripped { aborted: bool },
    Failed(String),
}

impl RunStatus {
    pub fn is_healthy(&self) -> bool {
        matches!(self, RunStatus::Healthy)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Healthy => "healthy",
            RunStatus::GuardTripped { .. } => "guard_tripped",
            RunStatus::Failed(_) => "failed",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Failed(why) => write!(f, "failed: {why}"),
            RunStatus::GuardTripped { aborted: true } => write!(f, "guard tripped (aborted)"),
            other => write!(f, "{}", other.label()),
        }
    }
}

/// Counts of monitored invariant violations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    pub step_norm: usize,
    pub cumulative_norm: usize,
    pub alive_floor: usize,
    pub classification: usize,
    pub sigma: usize,
    pub entry_bound: usize,
    pub unblocked_slack: usize,
    pub dangerous_support: usize,
    pub large_row_drift: usize,
    pub slack_transition: usize,
    pub orthogonality: usize,
    pub potential_overflow: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.step_norm
            + self.cumulative_norm
            + self.alive_floor
            + self.classification
            + self.sigma
            + self.entry_bound
            + self.unblocked_slack
            + self.dangerous_support
            + self.large_row_drift
            + self.slack_transition
            + self.orthogonality
            + self.potential_overflow
    }
}

/// Scalar facts about a finished run.
#[derive(Debug, Clone)]
pub struct WalkSummary {
    pub params: WalkParams,
    pub t_final: f64,
    pub b_final: f64,
    pub n_alive_final: usize,
    pub micro_steps: usize,
    pub truncated_steps: usize,
    pub rebuilds: usize,
    pub max_step_norm_error: f64,
    pub max_cumulative_norm_error: f64,
    pub min_slack_final: f64,
    /// `max_i ⟨a_i, x⟩` over all canonical rows.
    pub max_row_value: f64,
    /// Largest `W_j` over all rebuilds.
    pub max_column_weight: f64,
    pub envelope_violations: usize,
    pub guard_tripped: bool,
    pub violations: Violations,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct WalkOutcome {
    pub coloring: Coloring,
    pub telemetry: Vec<StepRecord>,
    pub status: RunStatus,
    pub summary: WalkSummary,
}

/// Outcome of one micro-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Time actually advanced; shorter than `dt` when a coordinate reached ±1.
    pub dt: f64,
    /// `‖x'‖² − ‖x‖²`.
    pub norm_increment: f64,
    pub truncated: bool,
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct WalkState<'a> {
    inst: &'a CanonicalInstance,
    cfg: WalkConfig,
    pub params: WalkParams,
    pub x: Vec<f64>,
    pub t: f64,
    pub b: f64,
    /// Alive columns as of the last rebuild, ascending.
    pub alive: Vec<usize>,
    /// Column to alive position, `usize::MAX` when not alive.
    pos: Vec<usize>,
    /// Alive support of each row as of the last rebuild.
    pub support: Vec<usize>,
    pub large: Vec<bool>,
    dots: Vec<f64>,
    /// `Σ_j a_i(j)² (1 − x_j²)` over all columns.
    energy: Vec<f64>,
    pub slack: Vec<f64>,
    /// Uncapped potential exponents.
    pub exponent: Vec<f64>,
    pub phi_total: f64,
    pub c_t: f64,
}

/// Initializes the walk at `x = 0`, `b = b0`.
pub fn init_walk<'a>(inst: &'a CanonicalInstance, cfg: &WalkConfig) -> Result<WalkState<'a>> {
    cfg.validate()?;
    let sys = &inst.system;
    if sys.n_rows() != sys.n_cols() || (0..sys.n_cols()).any(|j| sys.col_degree(j) != sys.k()) {
        return Err(Error::InvalidInstance("walk needs a square instance of exact column degree".into()));
    }
    let n = sys.n_cols();
    let params = WalkParams::new(n, sys.k(), cfg);
    let mut state = WalkState {
        inst,
        cfg: cfg.clone(),
        params,
        x: vec![0.0; n],
        t: 0.0,
        b: params.b0,
        alive: Vec::new(),
        pos: vec![usize::MAX; n],
        support: vec![0; n],
        large: vec![false; n],
        dots: vec![0.0; n],
        energy: vec![0.0; n],
        slack: vec![0.0; n],
        exponent: vec![0.0; n],
        phi_total: 0.0,
        c_t: 0.0,
    };
    let mut scratch = Violations::default();
    state.rebuild_rows(&mut scratch);
    state.refresh_potentials().map_err(|i| Error::InvariantViolation(format!("row {i} starts with no slack")))?;
    Ok(state)
}

/// `exp(λ b0 / s)` (or `exp(b0 / s)` in simple mode) with the exponent capped.
pub fn compute_potential(s: f64, params: &WalkParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvariantViolation(format!("dead row: slack {s}")));
    }
    Ok(params.exponent(s).min(EXPONENT_CAP).exp())
}

impl<'a> WalkState<'a> {
    pub fn instance(&self) -> &'a CanonicalInstance {
        self.inst
    }

    pub fn n_t(&self) -> usize {
        self.alive.len()
    }

    /// `Φ_i` with the capped exponent.
    pub fn potential(&self, i: usize) -> f64 {
        self.exponent[i].min(EXPONENT_CAP).exp()
    }

    pub fn row_value(&self, i: usize) -> f64 {
        self.dots[i]
    }

    /// Slack of row `i` from the current coloring and barrier.
    pub fn compute_slack(&self, i: usize) -> f64 {
        if self.large[i] {
            return self.params.b0 / 2.0;
        }
        match self.params.mode {
            PotentialMode::Full => self.b - self.dots[i] - self.params.beta * self.energy[i],
            PotentialMode::Simple => self.b - self.dots[i],
        }
    }

    /// Barrier speed at the current alive count.
    pub fn barrier_rate(&self) -> f64 {
        self.params.rate(self.n_t())
    }

    /// `W_j = Σ_{i ∈ C_j} min(Φ_i, e^{3λ})` for each alive column, in alive order.
    pub fn column_weights(&self) -> Vec<f64> {
        let cap = self.params.danger_potential();
        let truncated: Vec<f64> = (0..self.slack.len()).map(|i| self.potential(i).min(cap)).collect();
        self.alive.iter().map(|&j| self.inst.system.column(j).iter().map(|e| truncated[e.row]).sum()).collect()
    }

    /// Replaces the coloring and barrier and recomputes everything derived
    /// from them, as a rebuild would.
    pub fn reset(&mut self, x: Vec<f64>, t: f64, b: f64) -> Result<()> {
        if x.len() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: x.len() });
        }
        self.x = Coloring::new(x)?.into_values();
        self.t = t;
        self.b = b;
        self.rebuild_rows(&mut Violations::default());
        self.refresh_potentials().map_err(|i| Error::InvariantViolation(format!("row {i} has no slack")))
    }

    /// Alive coordinates of `x`.
    pub fn x_alive(&self) -> Vec<f64> {
        self.alive.iter().map(|&j| self.x[j]).collect()
    }

    /// Recomputes the alive set, row supports, large flags and the exact
    /// row sums and energies. Rows that stop being large are checked to gain
    /// slack.
    fn rebuild_rows(&mut self, violations: &mut Violations) {
        let sys = &self.inst.system;
        let cutoff = self.params.alive_cutoff();
        self.alive = (0..sys.n_cols()).filter(|&j| self.x[j].abs() <= cutoff).collect();
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for (p, &j) in self.alive.iter().enumerate() {
            self.pos[j] = p;
        }
        let threshold = self.params.large_threshold();
        let b0 = self.params.b0;
        for i in 0..sys.n_rows() {
            let row = sys.row(i);
            let support = row.iter().filter(|&&(j, _)| self.pos[j] != usize::MAX).count();
            self.support[i] = support;
            self.dots[i] = row.iter().map(|&(j, s)| f64::from(s) * self.x[j]).sum();
            self.energy[i] = row.iter().map(|&(j, _)| 1.0 - self.x[j] * self.x[j]).sum();
            let was_large = self.large[i];
            self.large[i] = support > threshold;
            if was_large && self.large[i] && self.dots[i].abs() > 1e-8 * (1.0 + (row.len() as f64).sqrt()) {
                violations.large_row_drift += 1;
            }
            if was_large && !self.large[i] && self.params.mode == PotentialMode::Full {
                let dead_energy: f64 = row
                    .iter()
                    .filter(|&&(j, _)| self.pos[j] == usize::MAX)
                    .map(|&(j, _)| 1.0 - self.x[j] * self.x[j])
                    .sum();
                let s = self.compute_slack(i);
                if s + self.params.beta * dead_energy < b0 / 2.0 - 1e-9 * b0 {
                    violations.slack_transition += 1;
                }
            }
        }
        self.c_t = self.barrier_rate();
    }

    /// Recomputes slacks, exponents and `Φ_total`; returns the first row
    /// with nonpositive slack.
    fn refresh_potentials(&mut self) -> std::result::Result<(), usize> {
        let mut total = 0.0;
        let mut dead = None;
        for i in 0..self.slack.len() {
            let s = self.compute_slack(i);
            self.slack[i] = s;
            if !(s > 0.0) {
                dead.get_or_insert(i);
                self.exponent[i] = f64::INFINITY;
            } else {
                self.exponent[i] = self.params.exponent(s);
            }
            total += self.potential(i);
        }
        self.phi_total = total;
        dead.map_or(Ok(()), Err)
    }

    /// Moves `x` by `v √dt` on the alive columns (`v` in alive order). The
    /// step is shortened so that no coordinate passes ±1; a coordinate that
    /// would is placed exactly on ±1.
    pub fn step(&mut self, v: &[f64], dt: f64) -> StepOutcome {
        assert_eq!(v.len(), self.alive.len(), "direction must live on the alive columns");
        let mut scale = dt.sqrt();
        let mut landing = None;
        for (p, &j) in self.alive.iter().enumerate() {
            let vj = v[p];
            if vj == 0.0 {
                continue;
            }
            let room = if vj > 0.0 { (1.0 - self.x[j]) / vj } else { (-1.0 - self.x[j]) / vj };
            if room < scale {
                scale = room.max(0.0);
                landing = Some(p);
            }
        }
        let sys = &self.inst.system;
        let mut increment = 0.0;
        for (p, &j) in self.alive.iter().enumerate() {
            let vj = v[p];
            if vj == 0.0 {
                continue;
            }
            let old = self.x[j];
            let new = if landing == Some(p) { vj.signum() } else { (old + scale * vj).clamp(-1.0, 1.0) };
            self.x[j] = new;
            let delta = new - old;
            let delta_sq = (new - old) * (new + old);
            increment += delta_sq;
            for e in sys.column(j) {
                self.dots[e.row] += f64::from(e.sign) * delta;
                self.energy[e.row] -= delta_sq;
            }
        }
        let taken = scale * scale;
        self.t += taken;
        self.b += self.c_t * taken;
        StepOutcome { dt: taken, norm_increment: increment, truncated: landing.is_some() }
    }

    fn record(&self, plan: &BlockingPlan, diagnostics: SamplerDiagnostics, w_max: f64, guard: bool) -> StepRecord {
        let phi_max = (0..self.slack.len()).map(|i| self.potential(i)).fold(0.0, f64::max);
        let s_min = self.slack.iter().copied().fold(f64::INFINITY, f64::min);
        StepRecord {
            t: self.t,
            n_t: self.n_t(),
            b_t: self.b,
            c_t: self.c_t,
            phi_total: self.phi_total,
            phi_max,
            s_min,
            w_max,
            sigma_dang: plan.sigma_dang,
            sigma_safe: plan.sigma_safe,
            n_dang: plan.dang_rows.len(),
            dang_support_max: self.unblocked_dangerous_support(plan),
            guard_tripped: guard,
            diagnostics,
        }
    }
}

/// Direction sampler for one batch.
enum Sampler {
    Projection,
    Sdp(Box<sampler::SubIsotropicPlan>),
}

/// Orthonormal vectors added within a batch, each orthogonal to `W`.
struct Extras {
    vectors: Vec<DVector<f64>>,
    frozen: Vec<bool>,
}

impl Extras {
    fn project_out(&self, v: &mut DVector<f64>) {
        for _ in 0..2 {
            for e in &self.vectors {
                let d = e.dot(v);
                v.axpy(-d, e, 1.0);
            }
        }
    }

    /// Freezes alive position `p` by blocking its coordinate vector.
    fn freeze(&mut self, w: &SubspaceBasis, p: usize) {
        if self.frozen[p] {
            return;
        }
        self.frozen[p] = true;
        let mut e = vec![0.0; w.h];
        e[p] = 1.0;
        w.basis.project_out(&mut e);
        let mut e = DVector::from_vec(e);
        self.project_out(&mut e);
        let norm = e.norm();
        if norm > 1e-10 {
            self.vectors.push(e / norm);
        }
    }
}

fn unit(v: &mut DVector<f64>) -> bool {
    let norm = v.norm();
    if norm > 1e-12 && norm.is_finite() {
        *v /= norm;
        true
    } else {
        false
    }
}


/// Runs the walk until at most `n_freeze` columns are alive.
///
/// Telemetry is recorded at every rebuild. Dead slacks and solver failures
/// end the run with a failed status; guard trips are recorded and abort only
/// in strict mode.
pub fn run_walk(inst: &CanonicalInstance, cfg: &WalkConfig) -> Result<WalkOutcome> {
    let mut state = init_walk(inst, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = state.params;
    let n = params.n;
    let guard_level = cfg.guard * params.phi_reference;
    let step_cap = 64 * n.max(1) * cfg.batch.max(1) + 1024;

    let mut violations = Violations::default();
    let mut telemetry = Vec::new();
    let mut cache = SvdCache::default();
    let mut status = RunStatus::Healthy;
    let mut guard_tripped = false;
    let mut guard_since_record = false;
    let mut micro_steps = 0usize;
    let mut truncated_steps = 0usize;
    let mut rebuilds = 0usize;
    let mut max_step_err = 0.0f64;
    let mut max_cum_err = 0.0f64;
    let mut max_column_weight = 0.0f64;
    let mut envelope_violations = 0usize;

    'outer: loop {
        state.rebuild_rows(&mut violations);
        if let Err(i) = state.refresh_potentials() {
            status = RunStatus::Failed(format!("row {i} lost its slack at t = {}", state.t));
            break;
        }
        let h = state.n_t();
        if h <= params.n_freeze || h == 0 {
            break;
        }
        if micro_steps >= step_cap {
            status = RunStatus::Failed(format!("no freeze after {micro_steps} steps"));
            break;
        }
        rebuilds += 1;
        if (h as f64) < n as f64 - state.t - 1.0 - 1e-9 {
            violations.alive_floor += 1;
        }

        let plan = state.select_blocking(&mut cache, &mut rng);
        let x_alive = state.x_alive();
        let w = match sampler::build_subspace(h, &plan.vectors, &plan.dang_singular, &plan.safe_singular, &x_alive) {
            Ok(w) => w,
            Err(e) => {
                status = RunStatus::Failed(e.to_string());
                break;
            }
        };
        let mut diagnostics = SamplerDiagnostics {
            declared: w.declared_count,
            dim_w: w.dim(),
            plan_trace: 0.0,
            plan_passes: 0,
            svd_iterations: plan.svd_iterations,
        };
        let sampler = match cfg.sampler {
            SamplerMode::Projection => Sampler::Projection,
            SamplerMode::Sdp => match sampler::solve_subisotropic(&w, cfg.kappa, cfg.eta) {
                Ok(p) => {
                    diagnostics.plan_trace = p.trace;
                    diagnostics.plan_passes = p.passes;
                    Sampler::Sdp(Box::new(p))
                }
                Err(e) => {
                    status = RunStatus::Failed(e.to_string());
                    break;
                }
            },
        };

        // Rebuild-time monitors.
        let danger = params.danger_potential();
        for i in 0..state.slack.len() {
            let by_potential = state.potential(i) <= danger;
            let by_slack = state.slack[i] >= params.b0 / 3.0;
            if by_potential != by_slack {
                violations.classification += 1;
            }
        }
        let weights = state.column_weights();
        let w_max = weights.iter().copied().fold(0.0, f64::max);
        max_column_weight = max_column_weight.max(w_max);
        if params.mode == PotentialMode::Full {
            let sigma_bound = params.sigma_bound();
            violations.sigma += usize::from(plan.sigma_dang > sigma_bound) + usize::from(plan.sigma_safe > sigma_bound);
            violations.sigma += usize::from(plan.sigma_certificate.0 > sigma_bound)
                + usize::from(plan.sigma_certificate.1 > sigma_bound);
            if plan.max_entry > 1.0 + 2.0 * params.beta + 1e-12 {
                violations.entry_bound += 1;
            }
            if w_max > params.column_weight_envelope() {
                envelope_violations += 1;
            }
            if state.phi_total <= 10.0 * params.phi_reference {
                let floor = params.unblocked_slack_floor(h);
                let mut blocked = vec![false; state.slack.len()];
                for &i in &plan.blocked {
                    blocked[i] = true;
                }
                if (0..state.slack.len()).any(|i| !blocked[i] && state.slack[i] < floor * (1.0 - 1e-12)) {
                    violations.unblocked_slack += 1;
                }
            }
            let unblocked = state.unblocked_dangerous_support(&plan);
            if unblocked as f64 > 10.0 * w_max / danger * (1.0 + 1e-12) {
                violations.dangerous_support += 1;
            }
        }
        if state.phi_total > guard_level {
            guard_since_record = true;
        }
        telemetry.push(state.record(&plan, diagnostics, w_max, guard_since_record));
        guard_tripped |= guard_since_record;
        guard_since_record = false;
        if guard_tripped && cfg.strict {
            status = RunStatus::GuardTripped { aborted: true };
            break;
        }

        let x_rebuild = DVector::from_vec(x_alive);
        let mut extras = Extras { vectors: Vec::new(), frozen: vec![false; h] };

        let cutoff = params.alive_cutoff();
        for _ in 0..cfg.batch {
            let mut v = None;
            for _attempt in 0..8 {
                let mut cand = DVector::from_vec(match &sampler {
                    Sampler::Projection => sampler::projection_fallback_direction(&w, &mut rng)?,
                    Sampler::Sdp(p) => {
                        let mut d = sampler::draw_direction(p, &mut rng)?;
                        w.basis.project_out(&mut d);
                        d
                    }
                });
                extras.project_out(&mut cand);
                let mut drift = DVector::from_iterator(h, state.alive.iter().map(|&j| state.x[j])) - &x_rebuild;
                extras.project_out(&mut drift);
                if unit(&mut drift) {
                    for _ in 0..2 {
                        let d = drift.dot(&cand);
                        cand.axpy(-d, &drift, 1.0);
                    }
                }
                for (p, &f) in extras.frozen.iter().enumerate() {
                    if f {
                        cand[p] = 0.0;
                    }
                }
                if unit(&mut cand) {
                    v = Some(cand);
                    break;
                }
            }
            let Some(v) = v else {
                status = RunStatus::Failed(format!("no admissible direction at t = {}", state.t));
                break 'outer;
            };

            let q = w.matrix();
            if q.ncols() > 0 {
                let leak = q.tr_mul(&v).amax();
                if leak > TOL_ORTHOGONAL {
                    violations.orthogonality += 1;
                }
            }
            let x_now = DVector::from_iterator(h, state.alive.iter().map(|&j| state.x[j]));
            if v.dot(&x_now).abs() > TOL_ORTHOGONAL * x_now.norm().max(1.0) {
                violations.orthogonality += 1;
            }

            let outcome = state.step(v.as_slice(), cfg.dt);
            micro_steps += 1;
            truncated_steps += usize::from(outcome.truncated);
            let step_err = (outcome.norm_increment - outcome.dt).abs();
            max_step_err = max_step_err.max(step_err);
            if step_err > TOL_STEP_NORM {
                violations.step_norm += 1;
            }
            let norm_sq: f64 = state.x.iter().map(|x| x * x).sum();
            let cum_err = (norm_sq - state.t).abs();
            max_cum_err = max_cum_err.max(cum_err / (1.0 + state.t));
            if cum_err > TOL_CUMULATIVE_NORM * (1.0 + state.t) {
                violations.cumulative_norm += 1;
            }

            if let Err(i) = state.refresh_potentials() {
                status = RunStatus::Failed(format!("row {i} lost its slack at t = {}", state.t));
                break 'outer;
            }
            if state.phi_total > guard_level {
                guard_since_record = true;
                if cfg.strict {
                    guard_tripped = true;
                    status = RunStatus::GuardTripped { aborted: true };
                    break 'outer;
                }
            }
            for p in 0..h {
                if !extras.frozen[p] && state.x[state.alive[p]].abs() > cutoff {
                    extras.freeze(&w, p);
                }
            }
        }
    }
    guard_tripped |= guard_since_record;
    if guard_tripped && status.is_healthy() {
        status = RunStatus::GuardTripped { aborted: false };
    }
    violations.potential_overflow = state.exponent.iter().filter(|&&e| e > EXPONENT_CAP && e.is_finite()).count();

    let max_row_value = state.dots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_slack_final = state.slack.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = WalkSummary {
        params,
        t_final: state.t,
        b_final: state.b,
        n_alive_final: state.n_t(),
        micro_steps,
        truncated_steps,
        rebuilds,
        max_step_norm_error: max_step_err,
        max_cumulative_norm_error: max_cum_err,
        min_slack_final,
        max_row_value,
        max_column_weight,
        envelope_violations,
        guard_tripped,
        violations,
    };
    Ok(WalkOutcome { coloring: Coloring::new(state.x)?, telemetry, status, summary })
}

/// Writes a coloring as `<index> <value>` lines with round-trip precision.
pub fn write_coloring<W: Write>(out: &mut W, x: &Coloring) -> std::io::Result<()> {
    for (j, v) in x.values().iter().enumerate() {
        writeln!(out, "{j} {v:?}")?;
    }
    Ok(())
}

/// Reads the `<index> <value>` format back.
pub fn parse_coloring(text: &str) -> Result<Coloring> {
    let mut values: Vec<Option<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad("expected `<index> <value>`"));
        };
        let j: usize = a.parse().map_err(|_| bad("bad index"))?;
        let v: f64 = b.parse().map_err(|_| bad("bad value"))?;
        if values.len() <= j {
            values.resize(j + 1, None);
        }
        if values[j].replace(v).is_some() {
            return Err(bad("duplicate index"));
        }
    }
    let values: Option<Vec<f64>> = values.into_iter().collect();
    Coloring::new(values.ok_or_else(|| Error::Parse { line: 0, msg: "missing indices".into() })?)
}
