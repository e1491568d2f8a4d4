use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{KornError, Result};

/// Symmetric sparse matrix in CSR layout with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SymCsr {
    /// Builds from `(row, col, value)` triplets, summing duplicates. Both
    /// `(i, j)` and `(j, i)` must be supplied for off-diagonal entries.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last = None;
        for (i, j, v) in trip {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymCsr { n, row_ptr, col, val }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SymCsr {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col: (0..d.len()).collect(),
            val: d.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|(c, _)| *c == j).map(|(_, v)| v).sum()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x^T A x`
    pub fn quad(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    /// `sum_k c_k A_k` over matrices of equal size.
    pub fn combine(terms: &[(f64, &SymCsr)]) -> Result<SymCsr> {
        let n = terms.first().map(|t| t.1.n).unwrap_or(0);
        let mut trip = Vec::with_capacity(terms.iter().map(|t| t.1.nnz()).sum());
        for (c, a) in terms {
            if a.n != n {
                return Err(KornError::ShapeMismatch { expected: n, got: a.n });
            }
            for i in 0..n {
                trip.extend(a.row(i).map(|(j, v)| (i, j, c * v)));
            }
        }
        Ok(SymCsr::from_triplets(n, trip))
    }

    /// Principal submatrix on the unknowns with `keep[i]`, together with the
    /// kept original indices.
    pub fn restrict(&self, keep: &[bool]) -> (SymCsr, Vec<usize>) {
        let kept: Vec<usize> = (0..self.n).filter(|&i| keep[i]).collect();
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in kept.iter().enumerate() {
            map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &i) in kept.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    trip.push((new_i, map[j], v));
                }
            }
        }
        (SymCsr::from_triplets(kept.len(), trip), kept)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Lower triangle as a compressed-column matrix (row-major upper
    /// triangle of a symmetric matrix read column-wise).
    pub fn to_faer_lower(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j <= i {
                    trip.push(Triplet::new(i, j, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| KornError::Factorization(format!("{e:?}")))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}
