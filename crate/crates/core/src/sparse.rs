//! Compressed-row operators for repeated matrix-vector products.
//!
//! Compiling a [`PauliSum`] once into CSR form makes the inner loops of the
//! optimizers touch only the structurally nonzero entries.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pauli::{i_pow, PauliSum};
use crate::{CMatrix, C64};

const ENTRY_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn zero(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = Self { dim, row_ptr, cols, vals };
        op.drop_small(ENTRY_TOL);
        op
    }

    fn drop_small(&mut self, tol: f64) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k].norm() > tol {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Compiles a Pauli sum. Rows are independent and built in parallel;
    /// strings sharing an X-mask land on the same off-diagonal and are merged.
    pub fn from_pauli_sum(sum: &PauliSum) -> Self {
        let width = sum.width();
        let dim = 1usize << width;
        let mut groups: Vec<(u64, Vec<(u64, C64)>)> = Vec::new();
        for (p, c) in sum.iter() {
            let ny = (p.x_mask() & p.z_mask()).count_ones();
            let coeff = c * i_pow(ny);
            match groups.iter_mut().find(|(x, _)| *x == p.x_mask()) {
                Some((_, list)) => list.push((p.z_mask(), coeff)),
                None => groups.push((p.x_mask(), vec![(p.z_mask(), coeff)])),
            }
        }
        groups.sort_by_key(|(x, _)| *x);
        let rows: Vec<Vec<(usize, C64)>> = (0..dim)
            .into_par_iter()
            .map(|r| {
                let mut row: Vec<(usize, C64)> = Vec::with_capacity(groups.len());
                for (x, list) in &groups {
                    let col = r ^ *x as usize;
                    // ⟨r|P|col⟩ = i^ny (−1)^{popcount(col & z)}
                    let mut v = C64::default();
                    for (z, coeff) in list {
                        if ((col as u64) & z).count_ones() % 2 == 0 {
                            v += coeff;
                        } else {
                            v -= coeff;
                        }
                    }
                    if v.norm() > ENTRY_TOL {
                        row.push((col, v));
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    fn check(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check(v)?;
        let mut out = vec![C64::default(); self.dim];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = A v`; lengths are the caller's responsibility.
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = C64::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *slot = acc;
        }
    }

    /// `⟨v|A|v⟩` (no normalization check).
    pub fn expectation(&self, v: &[C64]) -> Result<C64> {
        self.check(v)?;
        let mut total = C64::default();
        for r in 0..self.dim {
            let mut acc = C64::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            total += v[r].conj() * acc;
        }
        Ok(total)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= factor;
        }
        out.drop_small(ENTRY_TOL);
        out
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for op in [self, other] {
            for r in 0..op.dim {
                triplets.extend(op.row(r).map(|(c, v)| (r, c, v)));
            }
        }
        Ok(Self::from_triplets(self.dim, triplets))
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > ENTRY_TOL {
                    triplets.push((r, c, m[(r, c)]));
                }
            }
        }
        Ok(Self::from_triplets(m.nrows(), triplets))
    }

    /// Largest entry magnitude of `A B − B A`.
    pub fn commutator_norm(&self, other: &SparseOperator) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let mut worst = 0.0f64;
        let mut e = vec![C64::default(); self.dim];
        for c in 0..self.dim {
            e.iter_mut().for_each(|x| *x = C64::default());
            e[c] = C64::new(1.0, 0.0);
            let ab = self.apply(&other.apply(&e)?)?;
            let ba = other.apply(&self.apply(&e)?)?;
            for (x, y) in ab.iter().zip(&ba) {
                worst = worst.max((x - y).norm());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliSum;

    #[test]
    fn matches_dense_pauli_matrix() {
        let s = PauliSum::from_labels(
            3,
            &[
                (C64::new(0.5, 0.0), "XYZ"),
                (C64::new(-0.25, 0.0), "ZZI"),
                (C64::new(0.0, 0.75), "IXY"),
                (C64::new(1.5, 0.0), "YII"),
            ],
        )
        .unwrap();
        let dense = s.to_matrix().unwrap();
        let sp = SparseOperator::from_pauli_sum(&s).to_dense();
        let diff = (dense - sp).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn triplets_merge_duplicates() {
        let op = SparseOperator::from_triplets(
            2,
            vec![(0, 1, C64::new(1.0, 0.0)), (0, 1, C64::new(2.0, 0.0)), (1, 1, C64::new(1.0, 0.0))],
        );
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.to_dense()[(0, 1)], C64::new(3.0, 0.0));
    }
}
