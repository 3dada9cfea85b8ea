//! Compressed sparse row matrices over [`Scalar`].

use rayon::prelude::*;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Zero matrix with the given sorted row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        Self {
            n,
            row_ptr,
            cols,
            vals: vec![S::zero(); nnz],
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Position of `(row, col)` in `vals`.
    #[inline]
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.cols[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.position(row, col).map_or(S::zero(), |k| self.vals[k])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[S], y: &mut [S]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = S::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// Row-parallel product; each row sum is still taken in column order.
    pub fn par_matvec(&self, x: &[S], y: &mut [S]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = S::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        });
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `max |a_rc − conj(a_cr)|` over the pattern.
    pub fn hermitian_defect(&self) -> f64 {
        self.defect(true)
    }

    /// `max |a_rc − a_cr|` over the pattern.
    pub fn symmetric_defect(&self) -> f64 {
        self.defect(false)
    }

    fn defect(&self, conjugate: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let t = self.get(c, r);
                let t = if conjugate { t.conj() } else { t };
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_small() {
        let mut a = CsrMatrix::<f64>::from_pattern(vec![vec![0, 1], vec![0, 1]]);
        a.vals.copy_from_slice(&[2.0, -1.0, -1.0, 2.0]);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 1.0]);
        assert_eq!(a.symmetric_defect(), 0.0);
        assert_eq!(a.get(1, 0), -1.0);
    }
}
