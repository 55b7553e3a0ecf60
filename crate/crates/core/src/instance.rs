//! Bounded-degree set systems: representation, generation, canonical form,
//! the text exchange format and discrepancy evaluation.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest column count accepted by [`brute_force_min_disc`].
pub const BRUTE_FORCE_MAX_COLS: usize = 24;

/// One nonzero of the incidence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub sign: i8,
}

/// Sparse `{0, ±1}` incidence matrix whose columns have at most `k` nonzeros.
///
/// Entries are kept sorted by `(col, row)`; a row-major index is built on
/// construction so both access patterns are cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    n_rows: usize,
    n_cols: usize,
    k: usize,
    entries: Vec<Entry>,
    col_ptr: Vec<usize>,
    rows: Vec<Vec<(usize, i8)>>,
}

impl SetSystem {
    pub fn new(n_rows: usize, n_cols: usize, k: usize, mut entries: Vec<Entry>) -> Result<Self> {
        for e in &entries {
            if e.row >= n_rows || e.col >= n_cols {
                return Err(Error::InvalidInstance(format!(
                    "entry ({}, {}) outside {}x{}",
                    e.row, e.col, n_rows, n_cols
                )));
            }
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::InvalidInstance(format!(
                    "entry ({}, {}) has sign {}",
                    e.row, e.col, e.sign
                )));
            }
        }
        entries.sort_by_key(|e| (e.col, e.row));
        if let Some(w) = entries.windows(2).find(|w| w[0].col == w[1].col && w[0].row == w[1].row) {
            return Err(Error::InvalidInstance(format!(
                "duplicate entry ({}, {})",
                w[0].row, w[0].col
            )));
        }

        let mut col_ptr = vec![0usize; n_cols + 1];
        for e in &entries {
            col_ptr[e.col + 1] += 1;
        }
        for j in 0..n_cols {
            let deg = col_ptr[j + 1];
            if deg > k {
                return Err(Error::InvalidInstance(format!(
                    "column {j} has {deg} entries, more than k = {k}"
                )));
            }
            col_ptr[j + 1] += col_ptr[j];
        }

        let mut rows = vec![Vec::new(); n_rows];
        for e in &entries {
            rows[e.row].push((e.col, e.sign));
        }

        Ok(Self { n_rows, n_cols, k, entries, col_ptr, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Declared column-degree bound.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// All entries, sorted by `(col, row)`.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> &[Entry] {
        &self.entries[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn col_degree(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Row `i` as `(col, sign)` pairs sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, i8)] {
        &self.rows[i]
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, s)| f64::from(s) * x[j]).sum()
    }

    /// `A x` for a coloring of length `n_cols`.
    pub fn row_sums(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for e in &self.entries {
            out[e.row] += f64::from(e.sign) * x[e.col];
        }
        out
    }
}

/// Where a row of a canonical instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Original(usize),
    Negated(usize),
    Dummy,
}

/// Where a column of a canonical instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColOrigin {
    Original(usize),
    Padding,
}

/// A square system with every column of degree exactly `k`, closed under row
/// negation, together with the bookkeeping needed to map results back.
#[derive(Debug, Clone)]
pub struct CanonicalInstance {
    pub system: SetSystem,
    pub origin_rows: usize,
    pub origin_cols: usize,
    pub row_provenance: Vec<RowOrigin>,
    pub col_provenance: Vec<ColOrigin>,
}

impl CanonicalInstance {
    /// Restricts a coloring of the canonical columns to the original ones.
    pub fn restrict(&self, x: &Coloring) -> Coloring {
        let values = self
            .col_provenance
            .iter()
            .zip(x.values())
            .filter_map(|(origin, &v)| matches!(origin, ColOrigin::Original(_)).then_some(v))
            .collect();
        Coloring(values)
    }

    /// Indices of rows that are neither negations nor dummies.
    pub fn original_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.row_provenance
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, RowOrigin::Original(_)))
            .map(|(i, _)| i)
    }
}

/// A fractional (`[-1, 1]`) or full (`±1`) coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring(Vec<f64>);

impl Coloring {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(Error::InvalidParameter(format!("coloring entry {j} = {v} outside [-1, 1]")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        Self(signs.iter().map(|&s| f64::from(s)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().all(|&v| v == 1.0 || v == -1.0)
    }
}

/// Sign pattern used by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignModel {
    #[default]
    Positive,
    Random,
}

/// Random instance in which every column has exactly `k` nonzeros in distinct,
/// uniformly chosen rows, all `+1`.
pub fn gen_random_regular(n_rows: usize, n_cols: usize, k: usize, seed: u64) -> Result<SetSystem> {
    gen_random_regular_with(n_rows, n_cols, k, seed, SignModel::Positive)
}

pub fn gen_random_regular_with(
    n_rows: usize,
    n_cols: usize,
    k: usize,
    seed: u64,
    signs: SignModel,
) -> Result<SetSystem> {
    if k > n_rows {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n_rows = {n_rows}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_cols * k);
    for col in 0..n_cols {
        for row in index::sample(&mut rng, n_rows, k) {
            let sign = match signs {
                SignModel::Positive => 1,
                SignModel::Random => {
                    if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
            };
            entries.push(Entry { row, col, sign });
        }
    }
    SetSystem::new(n_rows, n_cols, k, entries)
}

fn is_canonical(sys: &SetSystem) -> bool {
    if sys.n_rows != sys.n_cols || (0..sys.n_cols).any(|j| sys.col_degree(j) != sys.k) {
        return false;
    }
    // Looks for the layout produced below: rows 0..m, their negations at
    // m..2m, then rows with only positive entries.
    let negated = |i: usize, l: usize| {
        sys.rows[i].len() == sys.rows[l].len()
            && sys.rows[i].iter().zip(&sys.rows[l]).all(|(&(a, s), &(b, t))| a == b && s == -t)
    };
    let n = sys.n_rows;
    (1..=n / 2).any(|m| {
        negated(0, m)
            && (1..m).all(|i| negated(i, i + m))
            && sys.rows[2 * m..].iter().all(|r| r.iter().all(|&(_, s)| s > 0))
    })
}

/// Brings a system into the square, exactly-`k`, negation-closed form the walk
/// operates on.
///
/// Layout: original rows, then their negations, then dummy rows. The canonical
/// degree is twice the declared one. Columns short of it receive `+1` entries
/// in the leading dummy rows; if rows outnumber columns, padding columns with
/// entries only in dummy rows are appended, and if columns outnumber rows,
/// empty dummy rows are appended. Inputs already in canonical form are
/// returned unchanged.
pub fn canonicalize(sys: &SetSystem) -> CanonicalInstance {
    if is_canonical(sys) {
        return CanonicalInstance {
            system: sys.clone(),
            origin_rows: sys.n_rows,
            origin_cols: sys.n_cols,
            row_provenance: (0..sys.n_rows).map(RowOrigin::Original).collect(),
            col_provenance: (0..sys.n_cols).map(ColOrigin::Original).collect(),
        };
    }

    let m = sys.n_rows;
    let n = sys.n_cols;
    let k = 2 * sys.k;
    let signed_rows = 2 * m;

    let max_deficit = (0..n).map(|j| k - 2 * sys.col_degree(j)).max().unwrap_or(0);
    let mut dummies = max_deficit;
    let mut padding = 0;
    if signed_rows + dummies > n {
        dummies = dummies.max(k);
        padding = signed_rows + dummies - n;
    } else {
        dummies = n - signed_rows;
    }
    let size = signed_rows + dummies;
    debug_assert_eq!(size, n + padding);

    let mut entries = Vec::with_capacity(size * k);
    for e in sys.entries() {
        entries.push(*e);
        entries.push(Entry { row: e.row + m, col: e.col, sign: -e.sign });
    }
    for j in 0..n {
        for d in 0..(k - 2 * sys.col_degree(j)) {
            entries.push(Entry { row: signed_rows + d, col: j, sign: 1 });
        }
    }
    for p in 0..padding {
        for d in 0..k {
            entries.push(Entry { row: signed_rows + d, col: n + p, sign: 1 });
        }
    }

    let system = SetSystem::new(size, size, k, entries).expect("canonical construction is valid");
    let row_provenance = (0..m)
        .map(RowOrigin::Original)
        .chain((0..m).map(RowOrigin::Negated))
        .chain(std::iter::repeat_n(RowOrigin::Dummy, dummies))
        .collect();
    let col_provenance = (0..n)
        .map(ColOrigin::Original)
        .chain(std::iter::repeat_n(ColOrigin::Padding, padding))
        .collect();

    CanonicalInstance { system, origin_rows: m, origin_cols: n, row_provenance, col_provenance }
}

/// `max_i |<a_i, x>|`. Integral whenever `x` is a full coloring.
pub fn discrepancy(sys: &SetSystem, x: &Coloring) -> Result<f64> {
    if x.len() != sys.n_cols {
        return Err(Error::DimensionMismatch { expected: sys.n_cols, got: x.len() });
    }
    Ok(sys.row_sums(x.values()).into_iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// Exact discrepancy by enumerating every coloring (up to global sign flip).
pub fn brute_force_min_disc(sys: &SetSystem) -> Result<u64> {
    let n = sys.n_cols;
    if n > BRUTE_FORCE_MAX_COLS {
        return Err(Error::TooLarge { cols: n, limit: BRUTE_FORCE_MAX_COLS });
    }
    if n == 0 {
        return Ok(0);
    }
    // x and -x have the same discrepancy, so the last column stays at +1 and
    // the first n - 1 columns walk a Gray code starting from all +1.
    let mut sums: Vec<i64> =
        (0..sys.n_rows).map(|i| sys.row(i).iter().map(|&(_, s)| i64::from(s)).sum()).collect();
    let mut signs = vec![1i64; n];
    let disc = |sums: &[i64]| sums.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    let mut best = disc(&sums);
    let free = n - 1;
    for step in 1u64..(1u64 << free) {
        let j = step.trailing_zeros() as usize;
        let delta = -2 * signs[j];
        signs[j] = -signs[j];
        for e in sys.column(j) {
            sums[e.row] += delta * i64::from(e.sign);
        }
        best = best.min(disc(&sums));
        if best == 0 {
            break;
        }
    }
    Ok(best)
}

/// Serializes in the `discinstance 1` text format, entries sorted by
/// `(column, row)`.
pub fn write_instance(sys: &SetSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "discinstance 1");
    let _ = writeln!(out, "rows {}", sys.n_rows);
    let _ = writeln!(out, "cols {}", sys.n_cols);
    let _ = writeln!(out, "k {}", sys.k);
    let _ = writeln!(out, "nnz {}", sys.nnz());
    for e in sys.entries() {
        let _ = writeln!(out, "{} {} {}", e.row, e.col, e.sign);
    }
    out
}

/// Parses the `discinstance 1` text format. Entries may appear in any order.
pub fn parse_instance(text: &str) -> Result<SetSystem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(idx, raw)| (idx + 1, raw.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of input, expected {what}") })
    };

    let (line, magic) = next("header")?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["discinstance", "1"] {
        return Err(Error::Parse { line, msg: format!("expected 'discinstance 1', found '{magic}'") });
    }
    let mut header = |key: &str| -> Result<usize> {
        let (line, text) = next(key)?;
        let mut parts = text.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(found), Some(value), None) if found == key => value
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("'{key}' needs a non-negative integer, found '{value}'") }),
            _ => Err(Error::Parse { line, msg: format!("expected '{key} <count>', found '{text}'") }),
        }
    };
    let rows = header("rows")?;
    let cols = header("cols")?;
    let k = header("k")?;
    let nnz = header("nnz")?;

    let mut entries = Vec::with_capacity(nnz);
    let mut seen = HashMap::with_capacity(nnz);
    for (line, text) in lines.by_ref() {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [i, j, v] = fields[..] else {
            return Err(Error::Parse { line, msg: format!("expected '<row> <col> <sign>', found '{text}'") });
        };
        let parse_index = |s: &str, what: &str, bound: usize| -> Result<usize> {
            let idx: usize =
                s.parse().map_err(|_| Error::Parse { line, msg: format!("bad {what} index '{s}'") })?;
            if idx >= bound {
                return Err(Error::Parse { line, msg: format!("{what} index {idx} out of range (< {bound})") });
            }
            Ok(idx)
        };
        let row = parse_index(i, "row", rows)?;
        let col = parse_index(j, "column", cols)?;
        let sign: i8 = match v {
            "1" | "+1" => 1,
            "-1" => -1,
            _ => return Err(Error::Parse { line, msg: format!("sign must be 1 or -1, found '{v}'") }),
        };
        if let Some(first) = seen.insert((row, col), line) {
            return Err(Error::Parse { line, msg: format!("duplicate entry ({row}, {col}), first seen on line {first}") });
        }
        entries.push(Entry { row, col, sign });
    }
    if entries.len() != nnz {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("header declares {nnz} entries, found {}", entries.len()),
        });
    }
    SetSystem::new(rows, cols, k, entries).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}
