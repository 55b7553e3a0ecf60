use rand::Rng;

use super::config::PotentialMode;
use super::WalkState;
use crate::linalg::{truncated_svd, CsrMatrix, DenseMatrix};
use crate::sampler::{BlockRule, BlockedVector};

/// Vectors spanning the forbidden subspace at one rebuild, with the rows
/// they came from. Coordinates are positions in the alive list.
#[derive(Debug, Clone)]
pub struct BlockingPlan {
    pub large_rows: Vec<usize>,
    pub top_potential: Vec<usize>,
    pub dangerous_support: Vec<usize>,
    /// Union of the three rules, each row once.
    pub blocked: Vec<usize>,
    pub vectors: Vec<BlockedVector>,
    pub dang_rows: Vec<usize>,
    pub safe_rows: Vec<usize>,
    pub dang_singular: DenseMatrix,
    pub safe_singular: DenseMatrix,
    /// `σ_{⌈n_t/11⌉}` of each family, zero when the rank is smaller.
    pub sigma_dang: f64,
    pub sigma_safe: f64,
    /// `‖E‖_F / sqrt(⌈n_t/11⌉)` for both families: upper bounds on the exact
    /// checkpoint values, which the iterative estimates approach from below.
    pub sigma_certificate: (f64, f64),
    /// Largest absolute entry of either singular-family matrix.
    pub max_entry: f64,
    pub svd_iterations: usize,
}

/// Singular vectors kept from the previous rebuild to warm-start the next.
#[derive(Debug, Clone, Default)]
pub struct SvdCache {
    safe: Option<(Vec<usize>, DenseMatrix)>,
    dang: Option<(Vec<usize>, DenseMatrix)>,
}

/// Restricts cached vectors to the current alive columns.
fn remap(cache: &Option<(Vec<usize>, DenseMatrix)>, pos: &[usize], h: usize) -> Option<DenseMatrix> {
    let (cols, m) = cache.as_ref()?;
    let mut out = DenseMatrix::zeros(h, m.ncols());
    for (r, &j) in cols.iter().enumerate() {
        if pos[j] != usize::MAX {
            out.row_mut(pos[j]).copy_from(&m.row(r));
        }
    }
    Some(out)
}

impl WalkState<'_> {
    /// Row `i` of `2β e_{t,i} − a_i` on the alive columns.
    fn energy_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let two_beta = 2.0 * self.params.beta;
        self.inst.system.row(i).iter().filter_map(move |&(j, s)| {
            let p = self.pos[j];
            (p != usize::MAX).then(|| (p, two_beta * self.x[j] - f64::from(s)))
        })
    }

    fn dense_energy_row(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.alive.len()];
        for (p, val) in self.energy_row(i) {
            v[p] = val;
        }
        v
    }

    fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.alive.len()];
        for &(j, s) in self.inst.system.row(i) {
            if self.pos[j] != usize::MAX {
                v[self.pos[j]] = f64::from(s);
            }
        }
        v
    }

    /// Whether row `i` counts as dangerous (`Φ_i > e^{3λ}`).
    pub fn is_dangerous(&self, i: usize) -> bool {
        self.potential(i) > self.params.danger_potential()
    }

    /// Applies the blocking rules to the current state.
    pub fn select_blocking<R: Rng + ?Sized>(&self, cache: &mut SvdCache, rng: &mut R) -> BlockingPlan {
        let h = self.alive.len();
        let cap = h / 10;
        let n_rows = self.inst.system.n_rows();

        let large_rows: Vec<usize> = (0..n_rows).filter(|&i| self.large[i]).collect();
        let mut vectors: Vec<BlockedVector> = large_rows
            .iter()
            .map(|&i| BlockedVector { rule: BlockRule::Large, values: self.dense_row(i) })
            .collect();
        let mut blocked_mask = vec![false; n_rows];
        for &i in &large_rows {
            blocked_mask[i] = true;
        }

        let (dang_rows, safe_rows): (Vec<usize>, Vec<usize>) = (0..n_rows).partition(|&i| self.is_dangerous(i));

        let mut plan = BlockingPlan {
            large_rows,
            top_potential: Vec::new(),
            dangerous_support: Vec::new(),
            blocked: Vec::new(),
            vectors: Vec::new(),
            dang_rows,
            safe_rows,
            dang_singular: DenseMatrix::zeros(h, 0),
            safe_singular: DenseMatrix::zeros(h, 0),
            sigma_dang: 0.0,
            sigma_safe: 0.0,
            sigma_certificate: (0.0, 0.0),
            max_entry: 0.0,
            svd_iterations: 0,
        };

        if self.params.mode == PotentialMode::Full {
            // Highest potentials first; lower index on ties.
            let mut small: Vec<usize> = (0..n_rows).filter(|&i| !self.large[i]).collect();
            small.sort_by(|&a, &b| self.exponent[b].total_cmp(&self.exponent[a]).then(a.cmp(&b)));
            small.truncate(cap);
            for &i in &small {
                blocked_mask[i] = true;
                vectors.push(BlockedVector { rule: BlockRule::TopPotential, values: self.dense_energy_row(i) });
            }
            plan.top_potential = small;

            let mut dang = plan.dang_rows.clone();
            dang.sort_by(|&a, &b| self.support[b].cmp(&self.support[a]).then(a.cmp(&b)));
            dang.truncate(cap);
            for &i in &dang {
                if !blocked_mask[i] {
                    blocked_mask[i] = true;
                    vectors.push(BlockedVector { rule: BlockRule::DangerousSupport, values: self.dense_energy_row(i) });
                }
            }
            plan.dangerous_support = dang;

            let checkpoint = h.div_ceil(11);
            let keep = h / 11;
            for (rows, dangerous) in [(&plan.dang_rows, true), (&plan.safe_rows, false)] {
                let mut e = CsrMatrix::new(h);
                for &i in rows.iter() {
                    if self.support[i] > 0 {
                        e.push_row(self.energy_row(i));
                    }
                }
                plan.max_entry = plan.max_entry.max(e.max_abs());
                let slot = if dangerous { &mut cache.dang } else { &mut cache.safe };
                let warm = remap(slot, &self.pos, h);
                let svd = truncated_svd(&e, checkpoint, &self.cfg.svd, warm.as_ref(), rng);
                // σ_r ≤ ‖E‖_F / sqrt(r) holds for the exact values.
                let certificate = if checkpoint > 0 { (e.frobenius_sq() / checkpoint as f64).sqrt() } else { 0.0 };
                plan.svd_iterations += svd.iterations;
                let sigma = if svd.values.len() >= checkpoint && checkpoint > 0 { svd.values[checkpoint - 1] } else { 0.0 };
                let take = keep.min(svd.vectors.ncols());
                let family = svd.vectors.columns(0, take).into_owned();
                *slot = Some((self.alive.clone(), svd.vectors));
                if dangerous {
                    plan.sigma_certificate.0 = certificate;
                    plan.sigma_dang = sigma;
                    plan.dang_singular = family;
                } else {
                    plan.sigma_certificate.1 = certificate;
                    plan.sigma_safe = sigma;
                    plan.safe_singular = family;
                }
            }
        }

        plan.blocked = (0..n_rows).filter(|&i| blocked_mask[i]).collect();
        plan.vectors = vectors;
        plan
    }

    /// Largest alive support among dangerous rows not blocked by any rule.
    pub fn unblocked_dangerous_support(&self, plan: &BlockingPlan) -> usize {
        let mut blocked = vec![false; self.inst.system.n_rows()];
        for &i in &plan.blocked {
            blocked[i] = true;
        }
        plan.dang_rows.iter().filter(|&&i| !blocked[i]).map(|&i| self.support[i]).max().unwrap_or(0)
    }
}
