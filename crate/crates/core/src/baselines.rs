//! Reference colorings: classical iterative rounding, the Gram–Schmidt walk
//! and uniform random signs.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::instance::{discrepancy, Coloring, SetSystem};
use crate::linalg::OrthoBasis;

/// Coordinates this close to ±1 are snapped.
const SNAP: f64 = 1e-9;

/// Alive sets up to this size use an exact dense least-squares solve in the
/// Gram–Schmidt walk; larger ones use warm-started CGLS.
pub const GSW_DENSE_LIMIT: usize = 256;
const CGLS_MAX_ITER: usize = 400;
const CGLS_TOL: f64 = 1e-10;

fn snap(x: &mut [f64], floating: &mut [bool]) {
    for (xj, f) in x.iter_mut().zip(floating.iter_mut()) {
        if *f && xj.abs() >= 1.0 - SNAP {
            *xj = xj.signum();
            *f = false;
        }
    }
}

/// Largest `α ≥ 0` keeping `x + α y` inside the cube, with the coordinate
/// that hits the boundary first.
fn max_step(x: &[f64], y: &[f64], idx: &[usize]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (p, &j) in idx.iter().enumerate() {
        let yj = y[p];
        if yj.abs() < 1e-14 {
            continue;
        }
        let a = if yj > 0.0 { (1.0 - x[j]) / yj } else { (-1.0 - x[j]) / yj };
        if best.is_none_or(|(b, _)| a < b) {
            best = Some((a.max(0.0), p));
        }
    }
    best
}

/// Orthonormal basis of the kernel of `rows` (each of length `dim`).
fn kernel_basis(rows: &[Vec<f64>], dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis = OrthoBasis::new(dim);
    if !rows.is_empty() {
        let mut m = DMatrix::zeros(dim, rows.len());
        for (c, r) in rows.iter().enumerate() {
            m.column_mut(c).copy_from_slice(r);
        }
        basis.extend(&m, 1e-9 * (dim as f64).sqrt());
    }
    let rank = basis.len();
    for _ in 0..4 {
        let missing = dim - basis.len();
        if missing == 0 {
            break;
        }
        let g = DMatrix::from_fn(dim, missing + 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        basis.extend(&g, 1e-6);
        if basis.len() > dim {
            break;
        }
    }
    (rank..basis.len().min(dim)).map(|c| basis.column(c).to_vec()).collect()
}

/// Classical Beck–Fiala rounding. Keeps every row with more than `k`
/// floating entries at its starting sum (zero) while moving inside the
/// kernel of those rows, so the final discrepancy is below `2k`.
///
/// A kernel basis is reused across freezes: after a coordinate hits ±1 the
/// remaining basis vectors are corrected to vanish on it, and the kernel is
/// recomputed only when the basis runs out. Rows only ever leave the active
/// set, so the stale kernel stays valid.
pub fn beck_fiala(sys: &SetSystem) -> Result<Coloring> {
    let n = sys.n_cols();
    let k = sys.k();
    let mut x = vec![0.0; n];
    let mut floating = vec![true; n];
    let mut rng = ChaCha8Rng::seed_from_u64(0x6265_636b);
    let mut stalls = 0;

    loop {
        let idx: Vec<usize> = (0..n).filter(|&j| floating[j]).collect();
        if idx.is_empty() {
            break;
        }
        let mut pos = vec![usize::MAX; n];
        for (p, &j) in idx.iter().enumerate() {
            pos[j] = p;
        }
        let active: Vec<Vec<f64>> = (0..sys.n_rows())
            .filter(|&i| sys.row(i).iter().filter(|&&(j, _)| floating[j]).count() > k)
            .map(|i| {
                let mut r = vec![0.0; idx.len()];
                for &(j, s) in sys.row(i) {
                    if floating[j] {
                        r[pos[j]] = f64::from(s);
                    }
                }
                r
            })
            .collect();
        let mut kernel = kernel_basis(&active, idx.len(), &mut rng);
        if kernel.is_empty() {
            stalls += 1;
            if stalls > 3 {
                return Err(Error::Numerical(format!(
                    "empty kernel with {} active rows and {} floating columns",
                    active.len(),
                    idx.len()
                )));
            }
            continue;
        }
        stalls = 0;

        while let Some(y) = kernel.pop() {
            let Some((alpha, hit)) = max_step(&x, &y, &idx) else {
                continue;
            };
            for (p, &j) in idx.iter().enumerate() {
                if floating[j] {
                    x[j] = (x[j] + alpha * y[p]).clamp(-1.0, 1.0);
                }
            }
            let jh = idx[hit];
            x[jh] = x[jh].signum();
            floating[jh] = false;
            snap(&mut x, &mut floating);
            // Keep the rest of the basis inside the frozen face.
            for q in kernel.iter_mut() {
                let c = q[hit] / y[hit];
                for (qi, yi) in q.iter_mut().zip(&y) {
                    *qi -= c * yi;
                }
                for (p, &j) in idx.iter().enumerate() {
                    if !floating[j] {
                        q[p] = 0.0;
                    }
                }
                let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    q.iter_mut().for_each(|v| *v /= norm);
                }
            }
            kernel.retain(|q| q.iter().any(|v| v.abs() > 1e-12));
        }
    }

    let coloring = Coloring::from_signs(&x.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect::<Vec<i8>>());
    let disc = discrepancy(sys, &coloring)?;
    let bound = (2 * k).saturating_sub(1) as f64;
    if disc > bound {
        return Err(Error::InvariantViolation(format!("Beck–Fiala discrepancy {disc} exceeds 2k-1 = {bound}")));
    }
    Ok(coloring)
}

/// Sparse columns of a set system, the vectors the Gram–Schmidt walk balances.
pub(crate) type SparseColumns = Vec<Vec<(usize, f64)>>;

pub(crate) fn sparse_columns(sys: &SetSystem) -> SparseColumns {
    (0..sys.n_cols())
        .map(|j| sys.column(j).iter().map(|e| (e.row, f64::from(e.sign))).collect())
        .collect()
}

/// Least-squares coefficients `u` minimizing `‖v_p + Σ_{j ∈ rest} u_j v_j‖`.
fn gsw_coefficients(cols: &SparseColumns, m: usize, pivot: usize, rest: &[usize], warm: &mut [f64]) -> Vec<f64> {
    if rest.is_empty() {
        return Vec::new();
    }
    if rest.len() <= GSW_DENSE_LIMIT {
        // Restrict to rows touched by the columns involved.
        let mut row_pos = vec![usize::MAX; m];
        let mut rows = 0;
        for &j in rest.iter().chain(std::iter::once(&pivot)) {
            for &(i, _) in &cols[j] {
                if row_pos[i] == usize::MAX {
                    row_pos[i] = rows;
                    rows += 1;
                }
            }
        }
        let mut b = DMatrix::zeros(rows, rest.len());
        for (c, &j) in rest.iter().enumerate() {
            for &(i, v) in &cols[j] {
                b[(row_pos[i], c)] = v;
            }
        }
        let mut rhs = DVector::zeros(rows);
        for &(i, v) in &cols[pivot] {
            rhs[row_pos[i]] = -v;
        }
        let svd = b.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max().max(1.0);
        if let Ok(u) = svd.solve(&rhs, eps) {
            return u.iter().copied().collect();
        }
    }
    cgls(cols, m, pivot, rest, warm)
}

/// CGLS on `min ‖B u + v_p‖` with `B` the columns in `rest`, from `warm`.
fn cgls(cols: &SparseColumns, m: usize, pivot: usize, rest: &[usize], warm: &mut [f64]) -> Vec<f64> {
    let apply = |u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.resize(m, 0.0);
        for (c, &j) in rest.iter().enumerate() {
            if u[c] != 0.0 {
                for &(i, v) in &cols[j] {
                    out[i] += v * u[c];
                }
            }
        }
    };
    let apply_t = |r: &[f64]| -> Vec<f64> {
        rest.iter().map(|&j| cols[j].iter().map(|&(i, v)| v * r[i]).sum()).collect()
    };
    let mut u = warm.to_vec();
    let mut r = Vec::new();
    apply(&u, &mut r);
    for ri in r.iter_mut() {
        *ri = -*ri;
    }
    for &(i, v) in &cols[pivot] {
        r[i] -= v;
    }
    let mut s = apply_t(&r);
    let scale = {
        let mut c = vec![0.0; m];
        for &(i, v) in &cols[pivot] {
            c[i] = v;
        }
        apply_t(&c).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300)
    };
    let mut p = s.clone();
    let mut gamma: f64 = s.iter().map(|v| v * v).sum();
    let mut q = Vec::new();
    for _ in 0..CGLS_MAX_ITER {
        if gamma.sqrt() <= CGLS_TOL * scale {
            break;
        }
        apply(&p, &mut q);
        let qq: f64 = q.iter().map(|v| v * v).sum();
        if qq <= 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (ui, pi) in u.iter_mut().zip(&p) {
            *ui += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = apply_t(&r);
        let next: f64 = s.iter().map(|v| v * v).sum();
        let beta = next / gamma;
        gamma = next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    u
}

/// Gram–Schmidt walk over the given columns, starting from `x0`. Elements are
/// processed in a random order; the pivot is the last alive element in it.
pub(crate) fn gsw_columns<R: Rng + ?Sized>(cols: &SparseColumns, m: usize, x0: &[f64], rng: &mut R) -> Vec<f64> {
    let n = cols.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let mut alive: Vec<bool> = x.iter().map(|v| v.abs() < 1.0 - SNAP).collect();
    for (xj, &a) in x.iter_mut().zip(&alive) {
        if !a {
            *xj = if *xj >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut rank = vec![0; n];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    // Warm start for CGLS, indexed by element.
    let mut coeff = vec![0.0; n];

    while let Some(&pivot) = order.iter().rev().find(|&&j| alive[j]) {
        let rest: Vec<usize> = order.iter().copied().filter(|&j| alive[j] && j != pivot).collect();
        let mut warm: Vec<f64> = rest.iter().map(|&j| coeff[j]).collect();
        let u_rest = gsw_coefficients(cols, m, pivot, &rest, &mut warm);
        let mut idx = rest.clone();
        idx.push(pivot);
        let mut u = u_rest.clone();
        u.push(1.0);
        for (&j, &v) in rest.iter().zip(&u_rest) {
            coeff[j] = v;
        }

        let plus = max_step(&x, &u, &idx).map_or(0.0, |(a, _)| a);
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let minus = max_step(&x, &neg, &idx).map_or(0.0, |(a, _)| a);
        let delta = if plus + minus <= 0.0 {
            0.0
        } else if rng.random::<f64>() * (plus + minus) < minus {
            plus
        } else {
            -minus
        };
        for (p, &j) in idx.iter().enumerate() {
            x[j] = (x[j] + delta * u[p]).clamp(-1.0, 1.0);
        }
        let before = alive.iter().filter(|&&a| a).count();
        snap(&mut x, &mut alive);
        if alive.iter().filter(|&&a| a).count() == before {
            // The step should freeze something; force the closest coordinate.
            let j = idx
                .iter()
                .copied()
                .filter(|&j| alive[j])
                .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()).then(rank[b].cmp(&rank[a])))
                .expect("pivot is alive");
            x[j] = if x[j] >= 0.0 { 1.0 } else { -1.0 };
            alive[j] = false;
        }
    }
    x
}

/// Gram–Schmidt walk from the all-zero coloring.
pub fn gram_schmidt_walk<R: Rng + ?Sized>(sys: &SetSystem, rng: &mut R) -> Result<Coloring> {
    gram_schmidt_walk_from(sys, &vec![0.0; sys.n_cols()], rng)
}

/// Gram–Schmidt walk from a fractional starting point.
pub fn gram_schmidt_walk_from<R: Rng + ?Sized>(sys: &SetSystem, x0: &[f64], rng: &mut R) -> Result<Coloring> {
    if x0.len() != sys.n_cols() {
        return Err(Error::DimensionMismatch { expected: sys.n_cols(), got: x0.len() });
    }
    let x = gsw_columns(&sparse_columns(sys), sys.n_rows(), x0, rng);
    Coloring::new(x)
}

/// Independent uniform signs.
pub fn random_coloring<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Coloring {
    Coloring::from_signs(&(0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect::<Vec<i8>>())
}
