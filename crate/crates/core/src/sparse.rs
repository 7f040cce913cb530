//! Compressed-row storage for signed incidence matrices.
//!
//! Entries are small integers (in practice -1, 0, +1), so the matrices can be
//! applied both to floating-point cochains and, exactly, to integer cochains.

use rayon::prelude::*;

/// Rows per rayon task when applying a matrix in parallel.
const PAR_MIN_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<i8>,
}

impl Incidence {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries are
    /// summed and entries that cancel to zero are dropped, so the result is
    /// canonical for a given set of triplets regardless of their order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, i8)]) -> Self {
        let mut per_row: Vec<Vec<(u32, i32)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            per_row[r].push((c as u32, v as i32));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for mut row in per_row {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut sum = 0i32;
                while i < row.len() && row[i].0 == c {
                    sum += row[i].1;
                    i += 1;
                }
                if sum != 0 {
                    cols.push(c);
                    vals.push(i8::try_from(sum).expect("incidence entry overflow"));
                }
            }
            row_ptr.push(cols.len());
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[u32], &[i8]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0i8; self.nnz()];
        for r in 0..self.nrows {
            let (rc, rv) = self.row(r);
            for (&c, &v) in rc.iter().zip(rv) {
                let slot = next[c as usize];
                cols[slot] = r as u32;
                vals[slot] = v;
                next[c as usize] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr, cols, vals }
    }

    /// `out = scale * A x`, evaluated row-parallel. Each output entry is
    /// summed in column order, so the result does not depend on thread count.
    pub fn apply_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        out.par_iter_mut().with_min_len(PAR_MIN_ROWS).enumerate().for_each(|(r, o)| {
            let (c, v) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in c.iter().zip(v) {
                acc += f64::from(v) * x[c as usize];
            }
            *o = scale * acc;
        });
    }

    /// `out += scale * A x`.
    pub fn apply_add(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        out.par_iter_mut().with_min_len(PAR_MIN_ROWS).enumerate().for_each(|(r, o)| {
            let (c, v) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in c.iter().zip(v) {
                acc += f64::from(v) * x[c as usize];
            }
            *o += scale * acc;
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.apply_into(x, 1.0, &mut out);
        out
    }

    /// Exact integer product `A x`.
    pub fn apply_i64(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&c, &v)| i64::from(v) * x[c as usize]).sum()
            })
            .collect()
    }

    /// Exact integer product `self * rhs` as `(row, col, value)` triplets with
    /// zero entries removed.
    pub fn compose(&self, rhs: &Incidence) -> Vec<(usize, usize, i64)> {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions differ");
        let mut acc = vec![0i64; rhs.ncols];
        let mut touched = Vec::new();
        let mut out = Vec::new();
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            for (&k, &a) in c.iter().zip(v) {
                let (c2, v2) = rhs.row(k as usize);
                for (&j, &b) in c2.iter().zip(v2) {
                    if acc[j as usize] == 0 {
                        touched.push(j as usize);
                    }
                    acc[j as usize] += i64::from(a) * i64::from(b);
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &j in &touched {
                if acc[j] != 0 {
                    out.push((r, j, acc[j]));
                }
                acc[j] = 0;
            }
            touched.clear();
        }
        out
    }

    /// Plain-text dump, one `row col value` triplet per line.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v}")?;
        }
        Ok(())
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries; exact zeros are kept out.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            per_row[r].push((c as u32, v));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut sum = 0.0;
                while i < row.len() && row[i].0 == c {
                    sum += row[i].1;
                    i += 1;
                }
                if sum != 0.0 {
                    cols.push(c);
                    vals.push(sum);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        out.par_iter_mut().with_min_len(PAR_MIN_ROWS).enumerate().for_each(|(r, o)| {
            let (c, v) = self.row(r);
            *o = c.iter().zip(v).map(|(&c, &v)| v * x[c as usize]).sum();
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.apply_into(x, &mut out);
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        self.triplets().all(|(r, c, v)| {
            let (cc, vv) = self.row(c);
            let back = cc.binary_search(&(r as u32)).map_or(0.0, |k| vv[k]);
            (v - back).abs() <= tol * v.abs().max(back.abs())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_merged_and_cancelled() {
        let m = Incidence::from_triplets(2, 3, &[(0, 1, 1), (0, 1, -1), (1, 2, 1), (1, 0, -1), (1, 2, 1)]);
        assert_eq!(m.row(0).0.len(), 0);
        assert_eq!(m.row(1), (&[0u32, 2][..], &[-1i8, 2][..]));
    }

    #[test]
    fn transpose_round_trip() {
        let m = Incidence::from_triplets(3, 2, &[(0, 0, -1), (0, 1, 1), (2, 1, -1)]);
        let t = m.transpose();
        assert_eq!(t.nrows(), 2);
        assert_eq!(t.row(1), (&[0u32, 2][..], &[1i8, -1][..]));
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn compose_detects_nonzero() {
        let a = Incidence::from_triplets(1, 2, &[(0, 0, 1), (0, 1, 1)]);
        let b = Incidence::from_triplets(2, 1, &[(0, 0, 1), (1, 0, -1)]);
        assert!(a.compose(&b).is_empty());
        let c = Incidence::from_triplets(2, 1, &[(0, 0, 1), (1, 0, 1)]);
        assert_eq!(a.compose(&c), vec![(0, 0, 2)]);
    }

    #[test]
    fn real_matrix_sums_duplicates() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 0.5), (1, 0, 0.5), (0, 1, 0.25), (1, 1, 2.0)]);
        assert_eq!(m.apply(&[1.0, 2.0]), vec![1.5, 4.5]);
        assert!(!m.is_symmetric(1e-12));
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, 0.5), (1, 0, 0.5)]);
        assert!(s.is_symmetric(0.0));
    }
}
