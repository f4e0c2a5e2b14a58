//! Equality-constrained linear least squares
//!
//! ```text
//! minimize ||F c - f||  subject to  G c = g
//! ```
//!
//! solved by a rank-revealing Householder factorization `G^T Π = Q R` and an
//! unconstrained least-squares problem over the nullspace of `G`. Among all
//! minimizers the one closest to a reference vector is returned, which makes
//! the solution a linear function of `(g, f, reference)`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeSet, HashSet};

/// Relative cutoff on the pivots of the factorization of `G^T`.
pub const RANK_TOL: f64 = 1e-10;
/// Relative tolerance on `G c = g`.
pub const EQUALITY_TOL: f64 = 1e-9;

/// A complete problem instance, for single solves.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub g: DMatrix<f64>,
    pub g_rhs: DVector<f64>,
    pub f: DMatrix<f64>,
    pub f_rhs: DVector<f64>,
    /// Tie-break target; zero when absent.
    pub reference: Option<DVector<f64>>,
    /// Edge id attached to each equality row, reported on infeasibility.
    pub row_tags: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub c: DVector<f64>,
    pub rank: usize,
    /// `max |G c - g|`.
    pub equality_residual: f64,
    /// `||F c - f||_2`.
    pub ls_residual: f64,
    /// `max |N^T F^T (F c - f)|` with `N` an orthonormal nullspace basis of `G`.
    pub kkt_residual: f64,
}

/// Factorization of `(G, F)` reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct ConstrainedLs {
    g: DMatrix<f64>,
    f: DMatrix<f64>,
    row_tags: Vec<Option<usize>>,
    /// Rows of `G` (after removing exact duplicates) in pivot order, first `rank` used.
    pivot_rows: Vec<usize>,
    rank: usize,
    /// Lower-triangular `R11^T`.
    r11t: DMatrix<f64>,
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    /// Pseudo-inverse of `F Q2`.
    fq2_pinv: DMatrix<f64>,
}

fn exact_unique_rows(g: &DMatrix<f64>) -> Vec<usize> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    (0..g.nrows())
        .filter(|&r| {
            // +0.0 and -0.0 compare equal
            let key: Vec<u64> = g.row(r).iter().map(|x| (x + 0.0).to_bits()).collect();
            seen.insert(key)
        })
        .collect()
}

struct PivotedQr {
    /// Column indices of the input in pivot order.
    perm: Vec<usize>,
    rank: usize,
    r: DMatrix<f64>,
    q: DMatrix<f64>,
}

/// Householder QR with column pivoting of `a` (n x m), stopped once the
/// largest remaining column norm drops below `tol` times the first pivot.
fn pivoted_qr(a: &DMatrix<f64>, tol: f64) -> PivotedQr {
    let (n, m) = a.shape();
    let mut a = a.clone();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut reflectors: Vec<DVector<f64>> = Vec::new();
    let mut first = 0.0;
    for step in 0..n.min(m) {
        let mut best = step;
        let mut best_norm = -1.0;
        for j in step..m {
            let norm = a.view((step, j), (n - step, 1)).norm();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if step == 0 {
            first = best_norm;
        }
        if best_norm <= 0.0 || best_norm <= tol * first {
            break;
        }
        a.swap_columns(step, best);
        perm.swap(step, best);
        let x: DVector<f64> = a.column(step).rows(step, n - step).clone_owned();
        let alpha = if x[0] >= 0.0 { -best_norm } else { best_norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            let mut block = a.view_mut((step, step), (n - step, m - step));
            let proj = v.transpose() * &block;
            block -= &v * proj * 2.0;
        }
        reflectors.push(v);
    }
    let rank = reflectors.len();
    let mut q = DMatrix::identity(n, n);
    for (step, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.view_mut((step, 0), (n - step, n));
        let proj = v.transpose() * &block;
        block -= v * proj * 2.0;
    }
    PivotedQr { perm, rank, r: a, q }
}

impl ConstrainedLs {
    pub fn factor(g: &DMatrix<f64>, f: &DMatrix<f64>, row_tags: Vec<Option<usize>>) -> Self {
        let n = g.ncols().max(f.ncols());
        assert!(g.nrows() == 0 || g.ncols() == n, "G has the wrong column count");
        assert_eq!(f.ncols(), n, "F has the wrong column count");
        let g = if g.nrows() == 0 { DMatrix::zeros(0, n) } else { g.clone() };
        let unique = exact_unique_rows(&g);
        let gt = DMatrix::from_fn(n, unique.len(), |i, j| g[(unique[j], i)]);
        let qr = pivoted_qr(&gt, RANK_TOL);
        let rank = qr.rank;
        let pivot_rows: Vec<usize> = qr.perm.iter().map(|&j| unique[j]).collect();
        let r11t = DMatrix::from_fn(rank, rank, |i, j| if j <= i { qr.r[(j, i)] } else { 0.0 });
        let q1 = qr.q.columns(0, rank).clone_owned();
        let q2 = qr.q.columns(rank, n - rank).clone_owned();
        let fq2 = f * &q2;
        let fq2_pinv = if fq2.ncols() == 0 || fq2.nrows() == 0 {
            DMatrix::zeros(fq2.ncols(), fq2.nrows())
        } else {
            let svd = fq2.clone().svd(true, true);
            let smax = svd.singular_values.max();
            svd.pseudo_inverse(RANK_TOL * smax.max(f64::MIN_POSITIVE))
                .expect("SVD computed with both factors")
        };
        Self { g, f: f.clone(), row_tags, pivot_rows, rank, r11t, q1, q2, fq2_pinv }
    }

    pub fn n_unknowns(&self) -> usize {
        self.q1.nrows()
    }

    pub fn n_equalities(&self) -> usize {
        self.g.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn solve(&self, g_rhs: &DVector<f64>, f_rhs: &DVector<f64>, reference: Option<&DVector<f64>>) -> Result<LsSolution> {
        let n = self.n_unknowns();
        // R11^T y1 = g restricted to pivot rows
        let mut y1 = DVector::zeros(self.rank);
        for i in 0..self.rank {
            let mut s = g_rhs[self.pivot_rows[i]];
            for j in 0..i {
                s -= self.r11t[(i, j)] * y1[j];
            }
            y1[i] = s / self.r11t[(i, i)];
        }
        let cp = &self.q1 * y1;
        let mut c = cp.clone();
        if self.q2.ncols() > 0 {
            let zero = DVector::zeros(n);
            let cref = reference.unwrap_or(&zero);
            let y2ref = self.q2.transpose() * (cref - &cp);
            let fq2_y2ref = &self.f * (&self.q2 * &y2ref);
            let r = f_rhs - &self.f * &cp - fq2_y2ref;
            let y2 = y2ref + &self.fq2_pinv * r;
            c += &self.q2 * y2;
        }
        let eq = if self.g.nrows() > 0 { &self.g * &c - g_rhs } else { DVector::zeros(0) };
        let equality_residual = eq.amax();
        let scale = g_rhs.amax().max(1.0);
        if equality_residual > EQUALITY_TOL * scale {
            let edges: BTreeSet<usize> = eq
                .iter()
                .enumerate()
                .filter(|(_, r)| r.abs() > EQUALITY_TOL * scale)
                .filter_map(|(i, _)| self.row_tags.get(i).copied().flatten())
                .collect();
            return Err(Error::InfeasibleConstraint {
                edges: edges.into_iter().collect(),
                residual: equality_residual,
            });
        }
        let fr = &self.f * &c - f_rhs;
        let kkt = if self.q2.ncols() > 0 {
            (self.q2.transpose() * (self.f.transpose() * &fr)).amax()
        } else {
            0.0
        };
        Ok(LsSolution {
            c,
            rank: self.rank,
            equality_residual,
            ls_residual: fr.norm(),
            kkt_residual: kkt,
        })
    }
}

pub fn solve_constrained_ls(sys: &ConstraintSystem) -> Result<LsSolution> {
    let mut tags = sys.row_tags.clone();
    tags.resize(sys.g.nrows(), None);
    ConstrainedLs::factor(&sys.g, &sys.f, tags).solve(&sys.g_rhs, &sys.f_rhs, sys.reference.as_ref())
}
