//! Linear operators `A: X → Y` with forward and adjoint application.

use std::path::Path;

use crate::error::{Result, SesopError};
use crate::lp::pairing;

pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`. Slices must already have the right lengths.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Aᵀ w`.
    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols(), x.len(), "operator apply")?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn apply_adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows(), w.len(), "operator adjoint apply")?;
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint_into(w, &mut out);
        Ok(out)
    }
}

fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected != actual {
        return Err(SesopError::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, entries.len(), "dense entries")?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(SesopError::Domain(
                "dense matrix has non-finite entries".into(),
            ));
        }
        Ok(DenseOperator {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        DenseOperator {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseOperator {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Parses `rows cols` followed by `rows*cols` whitespace-separated
    /// row-major entries.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let rows = parse_usize(tokens.next(), "rows")?;
        let cols = parse_usize(tokens.next(), "cols")?;
        let entries = tokens
            .map(|t| parse_f64(t, "entry"))
            .collect::<Result<Vec<_>>>()?;
        if entries.len() != rows * cols {
            return Err(SesopError::Parse(format!(
                "expected {} dense entries, found {}",
                rows * cols,
                entries.len()
            )));
        }
        DenseOperator::new(rows, cols, entries)
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.cols)) {
            *o = pairing(row, x);
        }
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&wi, row) in w.iter().zip(self.entries.chunks_exact(self.cols)) {
            if wi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += wi * a;
            }
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from raw CSR arrays, validating structure.
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len(rows + 1, offsets.len(), "row offsets")?;
        check_len(indices.len(), values.len(), "csr values")?;
        if offsets[0] != 0 || offsets[rows] != indices.len() {
            return Err(SesopError::Domain(
                "row offsets do not span the entries".into(),
            ));
        }
        for r in 0..rows {
            let (a, b) = (offsets[r], offsets[r + 1]);
            if b < a {
                return Err(SesopError::Domain("row offsets decrease".into()));
            }
            let row = &indices[a..b];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SesopError::Domain(format!(
                    "column indices of row {r} are not strictly increasing"
                )));
            }
            if row.last().is_some_and(|&c| c >= cols) {
                return Err(SesopError::Domain(format!(
                    "column index out of range in row {r}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SesopError::Domain(
                "sparse matrix has non-finite entries".into(),
            ));
        }
        Ok(SparseOperator {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Builds from per-row `(column, value)` lists. Each row is sorted and
    /// duplicate columns are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        let nrows = rows.len();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if indices.len() > *offsets.last().unwrap() && indices.last() == Some(&c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        SparseOperator::new(nrows, cols, offsets, indices, values)
    }

    /// Parses coordinate format: `rows cols nnz` then `nnz` lines of
    /// 0-based `row col value`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let rows = parse_usize(tokens.next(), "rows")?;
        let cols = parse_usize(tokens.next(), "cols")?;
        let nnz = parse_usize(tokens.next(), "nnz")?;
        let mut per_row = vec![Vec::new(); rows];
        for k in 0..nnz {
            let r = parse_usize(tokens.next(), "row index")?;
            let c = parse_usize(tokens.next(), "column index")?;
            let v = parse_f64(tokens.next().unwrap_or(""), "value")?;
            if r >= rows || c >= cols {
                return Err(SesopError::Parse(format!(
                    "triple {k} ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            per_row[r].push((c, v));
        }
        if tokens.next().is_some() {
            return Err(SesopError::Parse(
                "trailing tokens after sparse triples".into(),
            ));
        }
        SparseOperator::from_rows(cols, per_row)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn to_dense(&self) -> DenseOperator {
        let mut d = DenseOperator::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                d.entries[r * self.cols + c] = v;
            }
        }
        d
    }
}

impl LinearOperator for SparseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (idx, val) = self.row(r);
            *o = idx.iter().zip(val).map(|(&c, v)| v * x[c]).sum();
        }
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &wr) in w.iter().enumerate() {
            if wr == 0.0 {
                continue;
            }
            let (idx, val) = self.row(r);
            for (&c, v) in idx.iter().zip(val) {
                out[c] += v * wr;
            }
        }
    }
}

/// Either a dense or a sparse matrix, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixOperator {
    Dense(DenseOperator),
    Sparse(SparseOperator),
}

impl MatrixOperator {
    /// Dense files start with two header integers, coordinate files with three.
    pub fn parse(text: &str) -> Result<Self> {
        let header = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| SesopError::Parse("empty matrix file".into()))?;
        match header.split_whitespace().count() {
            2 => DenseOperator::parse(text).map(MatrixOperator::Dense),
            3 => SparseOperator::parse(text).map(MatrixOperator::Sparse),
            n => Err(SesopError::Parse(format!(
                "matrix header must have 2 (dense) or 3 (coordinate) fields, found {n}"
            ))),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SesopError::Parse(format!("{}: {e}", path.display())))?;
        MatrixOperator::parse(&text)
    }
}

impl LinearOperator for MatrixOperator {
    fn rows(&self) -> usize {
        match self {
            MatrixOperator::Dense(d) => d.rows(),
            MatrixOperator::Sparse(s) => s.rows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            MatrixOperator::Dense(d) => d.cols(),
            MatrixOperator::Sparse(s) => s.cols(),
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            MatrixOperator::Dense(d) => d.apply_into(x, out),
            MatrixOperator::Sparse(s) => s.apply_into(x, out),
        }
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        match self {
            MatrixOperator::Dense(d) => d.apply_adjoint_into(w, out),
            MatrixOperator::Sparse(s) => s.apply_adjoint_into(w, out),
        }
    }
}

/// Parses whitespace-separated reals (right-hand side files).
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| parse_f64(t, "vector entry"))
        .collect()
}

fn parse_usize(token: Option<&str>, what: &str) -> Result<usize> {
    let t = token.ok_or_else(|| SesopError::Parse(format!("missing {what}")))?;
    t.parse()
        .map_err(|_| SesopError::Parse(format!("invalid {what}: {t:?}")))
}

fn parse_f64(t: &str, what: &str) -> Result<f64> {
    let v: f64 = t
        .parse()
        .map_err(|_| SesopError::Parse(format!("invalid {what}: {t:?}")))?;
    if !v.is_finite() {
        return Err(SesopError::Parse(format!("non-finite {what}: {t:?}")));
    }
    Ok(v)
}

/// Spectral norm estimate produced by [`norm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub tolerance: f64,
}

/// Largest singular value of `A` by power iteration on `AᵀA`, started from
/// the all-ones vector.
pub fn norm_estimate<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    max_iter: usize,
) -> Result<OperatorNormEstimate> {
    if !(tol > 0.0) {
        return Err(SesopError::InvalidConfig(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let n = a.cols();
    let mut v = vec![1.0 / (n.max(1) as f64).sqrt(); n];
    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        a.apply_into(&v, &mut av);
        a.apply_adjoint_into(&av, &mut w);
        let nw = pairing(&w, &w).sqrt();
        if nw == 0.0 {
            return Ok(OperatorNormEstimate {
                value: 0.0,
                iterations: it,
                tolerance: tol,
            });
        }
        let next = nw.sqrt();
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
        if (next - sigma).abs() <= tol * next {
            return Ok(OperatorNormEstimate {
                value: next,
                iterations: it,
                tolerance: tol,
            });
        }
        sigma = next;
    }
    Ok(OperatorNormEstimate {
        value: sigma,
        iterations: max_iter,
        tolerance: tol,
    })
}
