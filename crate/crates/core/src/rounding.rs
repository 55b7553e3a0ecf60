//! Turning the frozen fractional coloring into a full one: snap the
//! near-integral coordinates, then finish the few free ones with a
//! Gram–Schmidt walk started at their fractional values.

use rand::Rng;

use crate::baselines::gsw_columns;
use crate::error::{Error, Result};
use crate::instance::{discrepancy, CanonicalInstance, Coloring};

/// Default bound on the number of free columns handed to the finisher.
pub const DEFAULT_FREE_CAP: usize = 4096;

/// Columns fixed to a sign plus the fractional values of the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialColoring {
    /// `Some(±1)` for fixed columns, `None` for free ones.
    pub fixed: Vec<Option<i8>>,
    /// The fractional coloring the partial one was derived from.
    pub values: Vec<f64>,
}

impl PartialColoring {
    pub fn free(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&j| self.fixed[j].is_none()).collect()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_some()).count()
    }
}

/// Fixes every column with `|x_j| > 1 − 1/(2n)` to its sign.
pub fn snap_frozen(x: &Coloring, n: usize) -> PartialColoring {
    let cutoff = 1.0 - 1.0 / (2.0 * n.max(1) as f64);
    let fixed = x
        .values()
        .iter()
        .map(|&v| (v.abs() > cutoff).then_some(if v > 0.0 { 1 } else { -1 }))
        .collect();
    PartialColoring { fixed, values: x.values().to_vec() }
}

/// A full coloring with the per-row changes introduced by each stage.
#[derive(Debug, Clone)]
pub struct Rounded {
    pub coloring: Coloring,
    /// `Σ_{j fixed} a_ij (sign_j − x_j)` for each row.
    pub snap_error: Vec<f64>,
    /// `Σ_{j free} a_ij (x̃_j − x_j)` for each row.
    pub added_error: Vec<f64>,
    pub n_free: usize,
    /// `max_i |⟨a_i, x̃⟩|` on the canonical system.
    pub disc: f64,
}

/// Colors the free columns, leaving fixed ones untouched. Returns the full
/// coloring and the per-row error added by the free columns.
pub fn finish_remainder<R: Rng + ?Sized>(
    inst: &CanonicalInstance,
    partial: &PartialColoring,
    cap: usize,
    rng: &mut R,
) -> Result<(Coloring, Vec<f64>)> {
    let sys = &inst.system;
    if partial.fixed.len() != sys.n_cols() {
        return Err(Error::DimensionMismatch { expected: sys.n_cols(), got: partial.fixed.len() });
    }
    let free = partial.free();
    if free.len() > cap {
        return Err(Error::InvalidParameter(format!("{} free columns exceed the finisher cap {cap}", free.len())));
    }
    let cols = free
        .iter()
        .map(|&j| sys.column(j).iter().map(|e| (e.row, f64::from(e.sign))).collect())
        .collect();
    let start: Vec<f64> = free.iter().map(|&j| partial.values[j]).collect();
    let colored = gsw_columns(&cols, sys.n_rows(), &start, rng);

    let mut out: Vec<f64> = partial.fixed.iter().map(|f| f.map_or(0.0, f64::from)).collect();
    let mut added = vec![0.0; sys.n_rows()];
    for (&j, &v) in free.iter().zip(&colored) {
        out[j] = v;
        for e in sys.column(j) {
            added[e.row] += f64::from(e.sign) * (v - partial.values[j]);
        }
    }
    Ok((Coloring::new(out)?, added))
}

/// Snaps and finishes a fractional walk output.
pub fn round_full<R: Rng + ?Sized>(x: &Coloring, inst: &CanonicalInstance, rng: &mut R) -> Result<Rounded> {
    let sys = &inst.system;
    let n = sys.n_cols();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let partial = snap_frozen(x, n);
    let mut snap_error = vec![0.0; sys.n_rows()];
    for (j, f) in partial.fixed.iter().enumerate() {
        if let Some(s) = f {
            for e in sys.column(j) {
                snap_error[e.row] += f64::from(e.sign) * (f64::from(*s) - x.values()[j]);
            }
        }
    }
    let limit = 1.0 / (2.0 * n as f64);
    for (i, &err) in snap_error.iter().enumerate() {
        let support = sys.row(i).len() as f64;
        if err.abs() > support * limit + 1e-12 {
            return Err(Error::InvariantViolation(format!("snapping moved row {i} by {err}")));
        }
    }
    let n_free = n - partial.n_fixed();
    let (coloring, added_error) = finish_remainder(inst, &partial, DEFAULT_FREE_CAP, rng)?;
    let disc = discrepancy(sys, &coloring)?;
    Ok(Rounded { coloring, snap_error, added_error, n_free, disc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_min_disc, canonicalize, gen_random_regular, ColOrigin, RowOrigin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snap_threshold() {
        let n = 10;
        let x = Coloring::new(vec![1.0, 0.0, 1.0 - 1.0 / (4.0 * n as f64), -0.9, -1.0]).unwrap();
        let p = snap_frozen(&x, n);
        assert_eq!(p.fixed, vec![Some(1), None, Some(1), None, Some(-1)]);
        assert_eq!(p.free(), vec![1, 3]);
    }

    #[test]
    fn integral_input_unchanged() {
        let inst = canonicalize(&gen_random_regular(8, 8, 2, 1).unwrap());
        let signs: Vec<i8> = (0..inst.system.n_cols()).map(|j| if j % 3 == 0 { 1 } else { -1 }).collect();
        let x = Coloring::from_signs(&signs);
        let r = round_full(&x, &inst, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.coloring, x);
        assert_eq!(r.n_free, 0);
        assert!(r.added_error.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn one_free_column() {
        let inst = canonicalize(&gen_random_regular(6, 6, 2, 3).unwrap());
        let n = inst.system.n_cols();
        let mut v = vec![1.0; n];
        v[2] = 0.1;
        let x = Coloring::new(v).unwrap();
        let r = round_full(&x, &inst, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(r.coloring.is_full());
        assert_eq!(r.n_free, 1);
        assert!(r.added_error.iter().all(|e| e.abs() <= 2.0));
        for j in (0..n).filter(|&j| j != 2) {
            assert_eq!(r.coloring.values()[j], 1.0);
        }
    }

    #[test]
    fn fixed_columns_never_move() {
        let inst = canonicalize(&gen_random_regular(40, 40, 3, 5).unwrap());
        let n = inst.system.n_cols();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { -1.0 } else { rng.random_range(-0.9..0.9) }).collect();
        let x = Coloring::new(v).unwrap();
        let p = snap_frozen(&x, n);
        let (c, _) = finish_remainder(&inst, &p, DEFAULT_FREE_CAP, &mut rng).unwrap();
        for j in (0..n).step_by(2) {
            assert_eq!(c.values()[j], -1.0);
        }
        assert!(c.is_full());
    }

    #[test]
    fn cap_is_enforced() {
        let inst = canonicalize(&gen_random_regular(10, 10, 2, 1).unwrap());
        let p = snap_frozen(&Coloring::zeros(inst.system.n_cols()), inst.system.n_cols());
        assert!(finish_remainder(&inst, &p, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = canonicalize(&gen_random_regular(30, 30, 3, 2).unwrap());
        let x = Coloring::new(vec![0.2; inst.system.n_cols()]).unwrap();
        let a = round_full(&x, &inst, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = round_full(&x, &inst, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.coloring, b.coloring);
    }

    #[test]
    fn small_remainder_close_to_optimum() {
        // A 20-column residual, within reach of exhaustive search.
        let k = 8;
        for seed in 0..4 {
            let sys = gen_random_regular(20, 20, k, seed).unwrap();
            let opt = brute_force_min_disc(&sys).unwrap() as f64;
            let inst = CanonicalInstance {
                origin_rows: sys.n_rows(),
                origin_cols: sys.n_cols(),
                row_provenance: (0..sys.n_rows()).map(RowOrigin::Original).collect(),
                col_provenance: (0..sys.n_cols()).map(ColOrigin::Original).collect(),
                system: sys,
            };
            let partial = snap_frozen(&Coloring::zeros(20), 20);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, added) = finish_remainder(&inst, &partial, DEFAULT_FREE_CAP, &mut rng).unwrap();
            let worst = added.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let slack = 2.0 * (k as f64 * (20f64).ln()).sqrt();
            assert!(worst <= opt + slack, "seed {seed}: added {worst}, optimum {opt}");
        }
    }
}
