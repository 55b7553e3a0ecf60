use crate::error::{Error, Result};
use crate::linalg::SubspaceIterOptions;
use crate::sampler::{DEFAULT_ETA, DEFAULT_KAPPA};

/// How update directions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMode {
    /// Gaussian projected onto the complement of the blocked subspace.
    #[default]
    Projection,
    /// Sub-isotropic covariance from [`crate::sampler::solve_subisotropic`].
    Sdp,
}

/// Which slack and potential the walk uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotentialMode {
    /// Energy-corrected slack, potential `exp(λ b0 / s)`, spectral blocking.
    #[default]
    Full,
    /// Plain slack `b − ⟨a, x⟩`, potential `exp(b0 / s)`, only large rows
    /// and `x` blocked.
    Simple,
}

/// Tunables of a walk run.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    /// `λ = lambda_const · ln ln n`.
    pub lambda_const: f64,
    /// `b0 = b0_const · sqrt(λ k)` (full mode).
    pub b0_const: f64,
    /// Multiplier of the barrier rate.
    pub ct_const: f64,
    pub dt: f64,
    /// Stop once at most this many columns are alive; `None` picks
    /// `max(16, ⌈(ln n)²⌉)`.
    pub freeze: Option<usize>,
    /// Micro-steps between rebuilds of the blocking plan.
    pub batch: usize,
    pub sampler: SamplerMode,
    pub potential: PotentialMode,
    /// Trip when `Φ_total > guard · Φ(0)`.
    pub guard: f64,
    /// Abort on a guard trip instead of recording it.
    pub strict: bool,
    pub seed: u64,
    pub kappa: f64,
    pub eta: f64,
    /// Subspace iteration settings for the singular families.
    pub svd: SubspaceIterOptions,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            lambda_const: 3.0,
            b0_const: 2.0,
            ct_const: 1.0,
            dt: 0.25,
            freeze: None,
            batch: 8,
            sampler: SamplerMode::Projection,
            potential: PotentialMode::Full,
            guard: 10.0,
            strict: false,
            seed: 0,
            kappa: DEFAULT_KAPPA,
            eta: DEFAULT_ETA,
            svd: SubspaceIterOptions { oversample: 8, tol: 1e-3, max_iter: 2, exact_rows: 400 },
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda-const", self.lambda_const),
            ("b0-const", self.b0_const),
            ("ct-const", self.ct_const),
            ("dt", self.dt),
            ("guard", self.guard),
            ("kappa", self.kappa),
            ("eta", self.eta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt > 1.0 {
            return Err(Error::InvalidParameter(format!("dt must be at most 1, got {}", self.dt)));
        }
        if self.batch == 0 {
            return Err(Error::InvalidParameter("batch must be positive".into()));
        }
        if let Some(f) = self.freeze {
            if f < 2 {
                return Err(Error::InvalidParameter(format!("freeze threshold must be at least 2, got {f}")));
            }
        }
        if self.kappa + self.eta + 0.5 > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter("kappa + eta must leave room for a half-dimensional W".into()));
        }
        Ok(())
    }
}

/// Constants derived from a config and an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub b0: f64,
    pub beta: f64,
    pub n_freeze: usize,
    pub ln_n: f64,
    /// Exponent scale of the potential: `λ` in full mode, `1` in simple mode.
    pub scale: f64,
    pub mode: PotentialMode,
    pub ct_const: f64,
    /// Reference total potential `Φ(0)` used by the guard.
    pub phi_reference: f64,
}

/// Largest potential exponent before capping.
pub const EXPONENT_CAP: f64 = 700.0;

impl WalkParams {
    pub fn new(n: usize, k: usize, cfg: &WalkConfig) -> Self {
        let ln_n = (n.max(3) as f64).ln();
        let lambda = cfg.lambda_const * ln_n.ln().max(1.0);
        let kk = k.max(1) as f64;
        let (b0, scale) = match cfg.potential {
            PotentialMode::Full => (cfg.b0_const * (lambda * kk).sqrt(), lambda),
            PotentialMode::Simple => (cfg.b0_const * kk.sqrt() * ln_n.powf(1.5), 1.0),
        };
        let n_freeze = cfg.freeze.unwrap_or_else(|| 16usize.max((ln_n * ln_n).ceil() as usize));
        Self {
            n,
            k,
            lambda,
            b0,
            beta: b0 / (20.0 * kk),
            n_freeze,
            ln_n,
            scale,
            mode: cfg.potential,
            ct_const: cfg.ct_const,
            phi_reference: n as f64 * (2.0 * scale).exp(),
        }
    }

    /// Rows with more alive entries than this are large.
    pub fn large_threshold(&self) -> usize {
        10 * self.k
    }

    /// Columns with `|x_j|` above this are no longer alive.
    pub fn alive_cutoff(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.n as f64)
    }

    /// `Φ` value separating safe from dangerous rows.
    pub fn danger_potential(&self) -> f64 {
        (3.0 * self.scale).exp()
    }

    pub fn exponent(&self, s: f64) -> f64 {
        self.scale * self.b0 / s
    }

    /// Barrier speed with `n_t` alive columns.
    pub fn rate(&self, n_t: usize) -> f64 {
        if n_t < self.n_freeze || n_t == 0 {
            return 0.0;
        }
        let kk = self.k.max(1) as f64;
        match self.mode {
            PotentialMode::Full => self.ct_const * self.lambda * kk / (self.b0 * n_t as f64 * self.ln_n),
            PotentialMode::Simple => self.ct_const * kk * self.ln_n * self.ln_n / (self.b0 * n_t as f64),
        }
    }

    /// Upper bound on the final barrier for a full-mode run.
    pub fn barrier_bound(&self) -> f64 {
        let kk = self.k.max(1) as f64;
        let ratio = (self.n as f64 / self.n_freeze as f64).max(1.0);
        self.b0 + self.ct_const * self.lambda * kk / self.b0 * (1.0 + ratio.ln())
    }

    /// Bound on `σ_{⌈n_t/11⌉}` of either singular family.
    pub fn sigma_bound(&self) -> f64 {
        (20.0 * self.k as f64).sqrt() * (1.0 + 2.0 * self.beta)
    }

    /// Envelope on the largest column weight.
    pub fn column_weight_envelope(&self) -> f64 {
        self.k as f64 * (2.0 * self.scale).exp() + 10.0 * self.danger_potential() * self.ln_n * self.ln_n
    }

    /// Slack floor for unblocked rows while `Φ_total ≤ 10 Φ(0)`.
    pub fn unblocked_slack_floor(&self, n_t: usize) -> f64 {
        let ratio = 100.0 * self.n as f64 / n_t.max(1) as f64;
        self.scale * self.b0 / (2.0 * self.scale + ratio.ln())
    }
}
