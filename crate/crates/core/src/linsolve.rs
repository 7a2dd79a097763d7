//! Factor-once, solve-many LU for almost-banded systems.
//!
//! Rows are equilibrated by their max-norm before elimination, so partial
//! pivoting on the scaled matrix is scaled pivoting on the original. The
//! bordered path permutes the `K` dense rows and the first `K` columns to the
//! end, factors the square banded block with pivoting confined to the band, and
//! finishes with a dense `K × K` Schur complement.

use std::cell::Cell;

use nalgebra::DMatrix;

use crate::assembly::AlmostBandedMatrix;
use crate::error::{Error, Result};

/// Scaled pivots below this magnitude are treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Systems up to this size are factored densely by default.
pub const DENSE_FALLBACK_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Dense for `n ≤ DENSE_FALLBACK_MAX`, bordered banded otherwise.
    Auto,
    Dense,
    Bordered,
}

/// Dense LU with scaled partial pivoting: `P R A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DMatrix<f64>,
    /// `perm[i]` is the original row placed at position `i`.
    perm: Vec<usize>,
    row_scale: Vec<f64>,
}

impl DenseLu {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let row_scale = equilibrate_rows(a.row_iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))))?;
        let mut lu = a.clone();
        for (i, s) in row_scale.iter().enumerate() {
            lu.row_mut(i).scale_mut(*s);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)]))
                .fold((k, 0.0f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, v) } else { best });
            if pivot.abs() < SINGULAR_PIVOT || !pivot.is_finite() {
                return Err(Error::Singular {
                    index: k,
                    pivot: pivot.abs(),
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let inv = 1.0 / pivot;
            for i in k + 1..n {
                let l = lu[(i, k)] * inv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= l * ukj;
                    }
                }
            }
        }
        Ok(Self { lu, perm, row_scale })
    }

    pub fn n(&self) -> usize {
        self.lu.nrows()
    }

    /// Row equilibration factors `R`.
    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// Solves the scaled, permuted system given an already row-scaled rhs.
    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), rhs.len())?;
        let b: Vec<f64> = rhs.iter().zip(&self.row_scale).map(|(b, s)| b * s).collect();
        Ok(self.solve_scaled(&b))
    }

    /// `R A x` recomputed from the factors.
    fn reconstruct_scaled(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = (i..n).map(|j| self.lu[(i, j)] * x[j]).sum();
        }
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = y[i] + (0..i).map(|j| self.lu[(i, j)] * y[j]).sum::<f64>();
        }
        let mut out = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = z[i];
        }
        out
    }

    fn nnz(&self) -> (usize, usize) {
        let n = self.n();
        let mut l = n;
        let mut u = 0;
        for i in 0..n {
            for j in 0..n {
                if self.lu[(i, j)] != 0.0 {
                    if j < i {
                        l += 1;
                    } else {
                        u += 1;
                    }
                }
            }
        }
        (l, u)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn equilibrate_rows(norms: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    norms
        .enumerate()
        .map(|(i, m)| {
            if m == 0.0 || !m.is_finite() {
                Err(Error::Singular { index: i, pivot: 0.0 })
            } else {
                Ok(1.0 / m)
            }
        })
        .collect()
}

/// Banded LU with partial pivoting, LAPACK `gbtrf` layout: multipliers stay
/// where they were computed and row interchanges are replayed during solves.
#[derive(Debug, Clone)]
struct BandLu {
    m: usize,
    kl: usize,
    ku: usize,
    /// Row `i` stores columns `i − kl ..= i + kl + ku`.
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn new(m: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self {
            m,
            kl,
            ku,
            data: vec![0.0; m * w],
            piv: Vec::new(),
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.m {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn factor(&mut self, col_offset: usize) -> Result<()> {
        let (m, kl, ku) = (self.m, self.kl, self.ku);
        let w = self.width();
        self.piv = Vec::with_capacity(m);
        let mut tmp = vec![0.0; kl + ku + 1];
        for k in 0..m {
            let last = (k + kl).min(m - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < SINGULAR_PIVOT || !best.is_finite() {
                return Err(Error::Singular {
                    index: k + col_offset,
                    pivot: best,
                });
            }
            self.piv.push(p);
            let hi = (k + kl + ku).min(m - 1);
            if p != k {
                // interchange columns k..=hi only; earlier multipliers stay put
                for (t, j) in (k..=hi).enumerate() {
                    tmp[t] = self.data[self.idx(p, j)];
                }
                for j in k..=hi {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data[b] = self.data[a];
                }
                for (t, j) in (k..=hi).enumerate() {
                    let a = self.idx(k, j);
                    self.data[a] = tmp[t];
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let inv = 1.0 / pivot;
            let kbase = self.idx(k, k);
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] * inv;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let ibase = ik;
                for t in 1..=hi - k {
                    self.data[ibase + t] -= l * self.data[kbase + t];
                }
            }
            debug_assert!(kbase + (hi - k) < (k + 1) * w);
        }
        Ok(())
    }

    /// `b ← L⁻¹ P b`.
    fn forward(&self, b: &mut [f64]) {
        for k in 0..self.m {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            let last = (k + self.kl).min(self.m - 1);
            for i in k + 1..=last {
                b[i] -= self.data[self.idx(i, k)] * bk;
            }
        }
    }

    /// `b ← Pᵀ L b`, the inverse of [`forward`](Self::forward).
    fn forward_inverse(&self, b: &mut [f64]) {
        for k in (0..self.m).rev() {
            let bk = b[k];
            let last = (k + self.kl).min(self.m - 1);
            for i in k + 1..=last {
                b[i] += self.data[self.idx(i, k)] * bk;
            }
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    /// `b ← U⁻¹ b`.
    fn backward(&self, b: &mut [f64]) {
        let reach = self.kl + self.ku;
        for i in (0..self.m).rev() {
            let hi = (i + reach).min(self.m - 1);
            let base = self.idx(i, i);
            let mut s = b[i];
            for t in 1..=hi - i {
                s -= self.data[base + t] * b[i + t];
            }
            b[i] = s / self.data[base];
        }
    }

    /// `b ← U b`.
    fn apply_u(&self, b: &mut [f64]) {
        let reach = self.kl + self.ku;
        for i in 0..self.m {
            let hi = (i + reach).min(self.m - 1);
            let base = self.idx(i, i);
            let mut s = 0.0;
            for t in 0..=hi - i {
                s += self.data[base + t] * b[i + t];
            }
            b[i] = s;
        }
    }

    /// Solves `w U = r` for the row vector `w`, in place.
    fn backward_transposed(&self, r: &mut [f64]) {
        let reach = self.kl + self.ku;
        for j in 0..self.m {
            let wj = r[j] / self.data[self.idx(j, j)];
            r[j] = wj;
            if wj == 0.0 {
                continue;
            }
            let hi = (j + reach).min(self.m - 1);
            let base = self.idx(j, j);
            for t in 1..=hi - j {
                r[j + t] -= wj * self.data[base + t];
            }
        }
    }

    fn nnz(&self) -> (usize, usize) {
        let mut l = self.m;
        let mut u = 0;
        for i in 0..self.m {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.kl + self.ku).min(self.m - 1);
            for j in lo..=hi {
                if self.get(i, j) != 0.0 {
                    if j < i {
                        l += 1;
                    } else {
                        u += 1;
                    }
                }
            }
        }
        (l, u)
    }
}

#[derive(Debug, Clone)]
struct BorderedLu {
    n: usize,
    k: usize,
    band: BandLu,
    /// `L⁻¹ P C₁`, one column per border column.
    y: Vec<Vec<f64>>,
    /// `B₂ U⁻¹`, one row per boundary row.
    w: Vec<Vec<f64>>,
    schur: Option<DenseLu>,
}

impl BorderedLu {
    fn factor(a: &AlmostBandedMatrix, row_scale: &[f64]) -> Result<Self> {
        let n = a.n();
        let k = a.k();
        let m = n - k;
        let core = a.core();
        let offsets = core.offsets();
        let min_off = offsets.first().copied().unwrap_or(k as isize);
        let max_off = offsets.last().copied().unwrap_or(k as isize);
        let kl = (k as isize - min_off).max(0) as usize;
        let ku = (max_off - k as isize).max(0) as usize;

        let mut band = BandLu::new(m, kl, ku);
        let mut c1 = vec![vec![0.0; m]; k];
        for (r, c, v) in core.entries() {
            if v == 0.0 {
                continue;
            }
            let v = v * row_scale[k + r];
            if c < k {
                c1[c][r] = v;
            } else {
                band.set(r, c - k, v);
            }
        }
        if m > 0 {
            band.factor(k)?;
        }

        let mut y = c1;
        for col in y.iter_mut() {
            if m > 0 {
                band.forward(col);
            }
        }
        let mut w: Vec<Vec<f64>> = a
            .dense_rows()
            .iter()
            .enumerate()
            .map(|(i, r)| r[k..].iter().map(|v| v * row_scale[i]).collect())
            .collect();
        for row in w.iter_mut() {
            if m > 0 {
                band.backward_transposed(row);
            }
        }
        let schur = if k > 0 {
            let mut s = DMatrix::zeros(k, k);
            // size of the terms each Schur entry was formed from
            let mut formed = vec![0.0f64; k];
            for i in 0..k {
                for j in 0..k {
                    let (wy, mag) = w[i]
                        .iter()
                        .zip(&y[j])
                        .fold((0.0, 0.0), |(s, m), (a, b)| (s + a * b, m + (a * b).abs()));
                    let direct = a.dense_rows()[i][j] * row_scale[i];
                    s[(i, j)] = direct - wy;
                    formed[i] = formed[i].max(direct.abs() + mag);
                }
            }
            // a Schur row that cancels to roundoff means the border is
            // dependent on the band
            for i in 0..k {
                let norm = s.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if !(norm > SINGULAR_PIVOT * formed[i]) {
                    return Err(Error::Singular {
                        index: i,
                        pivot: norm / formed[i],
                    });
                }
            }
            Some(DenseLu::factor(&s)?)
        } else {
            None
        };
        Ok(Self {
            n,
            k,
            band,
            y,
            w,
            schur,
        })
    }

    /// Solves with an already row-scaled rhs; the result is in original column order.
    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut z = b[k..].to_vec();
        if !z.is_empty() {
            self.band.forward(&mut z);
        }
        let mut v1 = vec![0.0; k];
        if let Some(schur) = &self.schur {
            let t: Vec<f64> = (0..k)
                .map(|i| b[i] - self.w[i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            // schur rows are already scaled; bypass its own row scaling
            let t: Vec<f64> = t.iter().zip(&schur.row_scale).map(|(a, s)| a * s).collect();
            v1 = schur.solve_scaled(&t);
        }
        for (j, col) in self.y.iter().enumerate() {
            let c = v1[j];
            if c != 0.0 {
                for (zi, yi) in z.iter_mut().zip(col) {
                    *zi -= yi * c;
                }
            }
        }
        if !z.is_empty() {
            self.band.backward(&mut z);
        }
        let mut x = Vec::with_capacity(n);
        x.extend_from_slice(&v1);
        x.extend_from_slice(&z);
        x
    }

    fn reconstruct_scaled(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k;
        let v1 = &x[..k];
        let mut t = x[k..].to_vec();
        if !t.is_empty() {
            self.band.apply_u(&mut t);
        }
        for (j, col) in self.y.iter().enumerate() {
            for (ti, yi) in t.iter_mut().zip(col) {
                *ti += yi * v1[j];
            }
        }
        let mut bottom = t.clone();
        if !bottom.is_empty() {
            self.band.forward_inverse(&mut bottom);
        }
        let mut top: Vec<f64> = self
            .w
            .iter()
            .map(|wr| wr.iter().zip(&t).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(schur) = &self.schur {
            let s = schur.reconstruct_scaled(v1);
            for (i, v) in top.iter_mut().enumerate() {
                *v += s[i] / schur.row_scale[i];
            }
        }
        top.extend(bottom);
        top
    }

    fn nnz(&self) -> (usize, usize) {
        let (bl, bu) = self.band.nnz();
        let dense = |rows: &[Vec<f64>]| -> usize {
            rows.iter().map(|r| r.iter().filter(|v| **v != 0.0).count()).sum()
        };
        let (sl, su) = self.schur.as_ref().map_or((0, 0), DenseLu::nnz);
        (bl + dense(&self.w) + sl, bu + dense(&self.y) + su)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Dense(DenseLu),
    Bordered(BorderedLu),
}

/// A completed factorization. Immutable; `solve` may be called concurrently.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    row_scale: Vec<f64>,
    kind: Kind,
    nnz_l: usize,
    nnz_u: usize,
}

pub fn factorize(a: &AlmostBandedMatrix) -> Result<Factorization> {
    factorize_with(a, Strategy::Auto)
}

thread_local! {
    static FACTORIZE_CALLS: Cell<usize> = const { Cell::new(0) };
}

/// Number of factorizations started on the calling thread.
pub fn factorize_calls() -> usize {
    FACTORIZE_CALLS.with(Cell::get)
}

pub fn factorize_with(a: &AlmostBandedMatrix, strategy: Strategy) -> Result<Factorization> {
    FACTORIZE_CALLS.with(|c| c.set(c.get() + 1));
    let n = a.n();
    let dense = match strategy {
        Strategy::Auto => n <= DENSE_FALLBACK_MAX,
        Strategy::Dense => true,
        Strategy::Bordered => false,
    };
    if dense {
        let lu = DenseLu::factor(&a.to_dense())?;
        let (nnz_l, nnz_u) = lu.nnz();
        return Ok(Factorization {
            n,
            row_scale: lu.row_scale.clone(),
            kind: Kind::Dense(lu),
            nnz_l,
            nnz_u,
        });
    }
    let k = a.k();
    let mut norms = vec![0.0f64; n];
    for (i, r) in a.dense_rows().iter().enumerate() {
        norms[i] = r.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    for (r, _, v) in a.core().entries() {
        norms[k + r] = norms[k + r].max(v.abs());
    }
    let row_scale = equilibrate_rows(norms.into_iter())?;
    let lu = BorderedLu::factor(a, &row_scale)?;
    let (nnz_l, nnz_u) = lu.nnz();
    Ok(Factorization {
        n,
        row_scale,
        kind: Kind::Bordered(lu),
        nnz_l,
        nnz_u,
    })
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, Kind::Dense(_))
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    pub fn nnz_l(&self) -> usize {
        self.nnz_l
    }

    pub fn nnz_u(&self) -> usize {
        self.nnz_u
    }

    /// `(nnz(L) + nnz(U)) / n²`.
    pub fn fill_ratio(&self) -> f64 {
        (self.nnz_l + self.nnz_u) as f64 / (self.n as f64 * self.n as f64)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let b: Vec<f64> = rhs.iter().zip(&self.row_scale).map(|(b, s)| b * s).collect();
        Ok(match &self.kind {
            Kind::Dense(lu) => lu.solve_scaled(&b),
            Kind::Bordered(lu) => lu.solve_scaled(&b),
        })
    }

    /// `R A x` evaluated through the stored factors, for checking `P R A Q = L U`.
    pub fn reconstruct_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(match &self.kind {
            Kind::Dense(lu) => lu.reconstruct_scaled(x),
            Kind::Bordered(lu) => lu.reconstruct_scaled(x),
        })
    }
}
