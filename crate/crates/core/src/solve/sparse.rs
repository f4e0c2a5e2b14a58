//! Compressed sparse rows, reverse Cuthill-McKee ordering and an envelope
//! (skyline) Cholesky factorization.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in their input order, so equal inputs give
    /// bitwise equal matrices.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (r, c, v) = triplets[t];
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_cols);
        DVector::from_iterator(self.n_rows, (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()))
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_rows, x.ncols());
        for j in 0..x.ncols() {
            out.set_column(j, &self.mul_vec(&x.column(j).clone_owned()));
        }
        out
    }

    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_rows, (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()))
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_rows, (0..self.n_rows).map(|r| self.get(r, r)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Submatrix with the given rows and columns, in the given orders.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut triplets = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    triplets.push((k, col_map[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &triplets)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`;
/// entry `k` is the original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let adj: Vec<Vec<usize>> = (0..n).map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c != r).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, placed: &[bool]| -> Vec<usize> {
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = vec![start];
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !placed[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
            if dist[v] > dist[last[0]] {
                last = vec![v];
            } else if dist[v] == dist[last[0]] && v != last[0] {
                last.push(v);
            }
        }
        last
    };
    while order.len() < n {
        let seed = (0..n).filter(|&v| !placed[v]).min_by_key(|&v| (degree[v], v)).unwrap();
        // pseudo-peripheral start: a few sweeps to the far level
        let mut start = seed;
        for _ in 0..3 {
            let far = bfs_levels(start, &placed);
            let cand = *far.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            if cand == start {
                break;
            }
            start = cand;
        }
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A Pᵀ = L Lᵀ` with row-wise skyline storage.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    /// `perm[k]` is the original index at position `k`.
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let perm = reverse_cuthill_mckee(a);
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for r in 0..n {
            let i = iperm[r];
            for (c, _) in a.row(r) {
                let j = iperm[c];
                if j < i {
                    first[i] = first[i].min(j);
                } else {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for r in 0..n {
            let i = iperm[r];
            for (c, v) in a.row(r) {
                let j = iperm[c];
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        let at = |i: usize, j: usize| start[i] + j - first[i];
        for i in 0..n {
            for j in first[i]..i {
                let lo = first[i].max(first[j]);
                let mut s = values[at(i, j)];
                for k in lo..j {
                    s -= values[at(i, k)] * values[at(j, k)];
                }
                values[at(i, j)] = s / values[at(j, j)];
            }
            let mut d = values[at(i, i)];
            for k in first[i]..i {
                d -= values[at(i, k)] * values[at(i, k)];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: perm[i], value: d });
            }
            values[at(i, i)] = d.sqrt();
        }
        Ok(Self { n, perm, first, start, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let at = |i: usize, j: usize| self.start[i] + j - self.first[i];
        let mut y: Vec<f64> = self.perm.iter().map(|&v| b[v]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.values[at(i, k)] * y[k];
            }
            y[i] = s / self.values[at(i, i)];
        }
        for i in (0..n).rev() {
            y[i] /= self.values[at(i, i)];
            let xi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.values[at(i, k)] * xi;
            }
        }
        let mut x = DVector::zeros(n);
        for (k, &v) in self.perm.iter().enumerate() {
            x[v] = y[k];
        }
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve(&b.column(j).clone_owned()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(n: usize) -> CsrMatrix {
        let id = |i: usize, j: usize| j * n + i;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                    t.push((id(i - 1, j), id(i, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                    t.push((id(i, j - 1), id(i, j), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n * n, n * n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.row_sums().as_slice(), &[1.0, 1.5]);
    }

    #[test]
    fn rcm_is_a_permutation_and_narrows_the_band() {
        let a = laplacian_2d(12);
        let p = reverse_cuthill_mckee(&a);
        let mut sorted = p.clone();
        sorted.sort();
        assert_eq!(sorted, (0..144).collect::<Vec<_>>());
        let f = SkylineCholesky::factor(&a).unwrap();
        assert!(f.envelope_size() < 144 * 20);
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let a = laplacian_2d(9);
        let b = DVector::from_fn(81, |i, _| (i as f64 * 0.37).sin());
        let x = SkylineCholesky::factor(&a).unwrap().solve(&b);
        let dense = a.to_dense().cholesky().unwrap().solve(&b);
        assert!((x - dense).amax() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SkylineCholesky::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn select_extracts_blocks() {
        let a = laplacian_2d(3);
        let s = a.select(&[4, 0], &[1, 4]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, -1.0, 0.0]));
    }
}
