use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A sparse operator stored by diagonals.
///
/// `bands[off][i]` holds the entry at row `i`, column `i + off`. Slots whose
/// column falls outside `0..n_cols` are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOp {
    n_rows: usize,
    n_cols: usize,
    bands: BTreeMap<isize, Vec<f64>>,
}

impl BandedOp {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            bands: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(vec![1.0; n])
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        let n = d.len();
        let mut op = Self::zeros(n, n);
        op.bands.insert(0, d);
        op
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Diagonal offsets that carry storage, ascending.
    pub fn offsets(&self) -> Vec<isize> {
        self.bands.keys().copied().collect()
    }

    pub fn band(&self, offset: isize) -> Option<&[f64]> {
        self.bands.get(&offset).map(Vec::as_slice)
    }

    /// `(lower, upper)` bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let lower = self
            .bands
            .keys()
            .next()
            .map_or(0, |&o| if o < 0 { (-o) as usize } else { 0 });
        let upper = self
            .bands
            .keys()
            .next_back()
            .map_or(0, |&o| if o > 0 { o as usize } else { 0 });
        (lower, upper)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize;
        match self.bands.get(&off) {
            Some(b) if i < self.n_rows && j < self.n_cols => b[i],
            _ => 0.0,
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n_rows && j < self.n_cols, "entry ({i}, {j}) out of range");
        let off = j as isize - i as isize;
        let n_rows = self.n_rows;
        self.bands.entry(off).or_insert_with(|| vec![0.0; n_rows])[i] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n_rows && j < self.n_cols, "entry ({i}, {j}) out of range");
        let off = j as isize - i as isize;
        let n_rows = self.n_rows;
        self.bands.entry(off).or_insert_with(|| vec![0.0; n_rows])[i] = v;
    }

    /// Iterates over stored `(row, col, value)` triples, including explicit zeros.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.bands.iter().flat_map(move |(&off, b)| {
            b.iter().enumerate().filter_map(move |(i, &v)| {
                let j = i as isize + off;
                (j >= 0 && (j as usize) < self.n_cols).then_some((i, j as usize, v))
            })
        })
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries().filter(|&(_, _, v)| v != 0.0).count()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.n_rows];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = self · v`, with `v` shorter than `n_cols` treated as zero padded.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert!(v.len() <= self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        let len = v.len() as isize;
        for (&off, b) in &self.bands {
            let lo = (-off).max(0) as usize;
            let hi = (len - off).clamp(0, self.n_rows as isize) as usize;
            for i in lo..hi {
                out[i] += b[i] * v[(i as isize + off) as usize];
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut op = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    op.set(i, j, m[(i, j)]);
                }
            }
        }
        op
    }

    /// Operator product `self · rhs`.
    pub fn matmul(&self, rhs: &BandedOp) -> Result<BandedOp> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: rhs.n_rows,
            });
        }
        let mut out = BandedOp::zeros(self.n_rows, rhs.n_cols);
        for (&oa, a) in &self.bands {
            for (&ob, b) in &rhs.bands {
                let off = oa + ob;
                let acc = out.bands.entry(off).or_insert_with(|| vec![0.0; self.n_rows]);
                for (i, &ai) in a.iter().enumerate() {
                    if ai == 0.0 {
                        continue;
                    }
                    let j = i as isize + oa;
                    let k = j + ob;
                    if j < 0 || j as usize >= self.n_cols || k < 0 || k as usize >= rhs.n_cols {
                        continue;
                    }
                    acc[i] += ai * b[j as usize];
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &BandedOp) -> Result<()> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Assembly(format!(
                "cannot add {}x{} operator to {}x{}",
                other.n_rows, other.n_cols, self.n_rows, self.n_cols
            )));
        }
        let n_rows = self.n_rows;
        for (&off, b) in &other.bands {
            let acc = self.bands.entry(off).or_insert_with(|| vec![0.0; n_rows]);
            for (x, y) in acc.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in self.bands.values_mut() {
            b.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// Top-left `rows × cols` section.
    pub fn truncated(&self, rows: usize, cols: usize) -> BandedOp {
        assert!(rows <= self.n_rows && cols <= self.n_cols);
        let mut out = BandedOp::zeros(rows, cols);
        for (&off, b) in &self.bands {
            let mut v = b[..rows].to_vec();
            for (i, x) in v.iter_mut().enumerate() {
                let j = i as isize + off;
                if j < 0 || j as usize >= cols {
                    *x = 0.0;
                }
            }
            if v.iter().any(|&x| x != 0.0) {
                out.bands.insert(off, v);
            }
        }
        out
    }

    /// Rows `start..start+count`, re-indexed from zero.
    pub fn row_block(&self, start: usize, count: usize) -> BandedOp {
        assert!(start + count <= self.n_rows);
        let mut out = BandedOp::zeros(count, self.n_cols);
        for (&off, b) in &self.bands {
            let new_off = off + start as isize;
            let v = b[start..start + count].to_vec();
            if v.iter().any(|&x| x != 0.0) {
                out.bands.insert(new_off, v);
            }
        }
        out
    }

    /// Drops diagonals that are identically zero and zeroes out-of-range slots.
    pub fn prune(&mut self) {
        let n_rows = self.n_rows;
        let n_cols = self.n_cols as isize;
        self.bands.retain(|&off, b| {
            for (i, x) in b.iter_mut().enumerate().take(n_rows) {
                let j = i as isize + off;
                if j < 0 || j >= n_cols {
                    *x = 0.0;
                }
            }
            b.iter().any(|&x| x != 0.0)
        });
    }
}
