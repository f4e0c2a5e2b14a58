//! Bernstein polynomials, degree elevation, and the per-element spline
//! extraction operator `N^e = C^e b`.
//!
//! Bivariate Bernstein polynomials of degree `p` are numbered
//! `k = (p + 1) * j + i` where `i` runs along ξ and `j` along η (0-based).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const DOMAIN_SLACK: f64 = 1e-12;

/// Values and partial derivatives of a family of bivariate functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub value: DVector<f64>,
    pub d_xi: DVector<f64>,
    pub d_eta: DVector<f64>,
    pub d_xi_xi: DVector<f64>,
    pub d_xi_eta: DVector<f64>,
    pub d_eta_eta: DVector<f64>,
}

impl BasisValues {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        Self {
            value: f(&self.value),
            d_xi: f(&self.d_xi),
            d_eta: f(&self.d_eta),
            d_xi_xi: f(&self.d_xi_xi),
            d_xi_eta: f(&self.d_xi_eta),
            d_eta_eta: f(&self.d_eta_eta),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Univariate Bernstein polynomials of degree `p` at `t` (no domain check).
pub fn bernstein_1d(p: usize, t: f64) -> Vec<f64> {
    (0..=p)
        .map(|i| binomial(p, i) * t.powi(i as i32) * (1.0 - t).powi((p - i) as i32))
        .collect()
}

/// Values, first and second derivatives of the degree-`p` univariate basis.
pub fn bernstein_1d_derivs(p: usize, t: f64) -> [Vec<f64>; 3] {
    let value = bernstein_1d(p, t);
    let lower = |q: usize| if q == 0 { vec![1.0] } else { bernstein_1d(q, t) };
    let pick = |v: &[f64], i: isize| if i < 0 || i as usize >= v.len() { 0.0 } else { v[i as usize] };
    let mut d1 = vec![0.0; p + 1];
    let mut d2 = vec![0.0; p + 1];
    if p >= 1 {
        let b1 = lower(p - 1);
        for (i, d) in d1.iter_mut().enumerate() {
            let i = i as isize;
            *d = p as f64 * (pick(&b1, i - 1) - pick(&b1, i));
        }
    }
    if p >= 2 {
        let b2 = lower(p - 2);
        let c = (p * (p - 1)) as f64;
        for (i, d) in d2.iter_mut().enumerate() {
            let i = i as isize;
            *d = c * (pick(&b2, i - 2) - 2.0 * pick(&b2, i - 1) + pick(&b2, i));
        }
    }
    [value, d1, d2]
}

fn check_domain(xi: f64, eta: f64) -> Result<()> {
    let inside = |t: f64| (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&t);
    if inside(xi) && inside(eta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("parameter ({xi}, {eta}) outside [0,1]^2")))
    }
}

/// All `(p+1)^2` tensor-product Bernstein polynomials and their partials.
pub fn bernstein_eval(p: usize, xi: f64, eta: f64) -> Result<BasisValues> {
    check_domain(xi, eta)?;
    let [u, du, ddu] = bernstein_1d_derivs(p, xi.clamp(0.0, 1.0));
    let [v, dv, ddv] = bernstein_1d_derivs(p, eta.clamp(0.0, 1.0));
    let n = (p + 1) * (p + 1);
    let tensor = |a: &[f64], b: &[f64]| {
        DVector::from_fn(n, |k, _| a[k % (p + 1)] * b[k / (p + 1)])
    };
    Ok(BasisValues {
        value: tensor(&u, &v),
        d_xi: tensor(&du, &v),
        d_eta: tensor(&u, &dv),
        d_xi_xi: tensor(&ddu, &v),
        d_xi_eta: tensor(&du, &dv),
        d_eta_eta: tensor(&u, &ddv),
    })
}

/// Matrix `E` of shape `(p+2) x (p+1)` raising a univariate Bernstein form by one degree.
pub fn elevation_matrix_1d(p: usize) -> DMatrix<f64> {
    let q = p + 1;
    DMatrix::from_fn(q + 1, p + 1, |i, j| {
        let a = i as f64 / q as f64;
        if j + 1 == i {
            a
        } else if j == i {
            1.0 - a
        } else {
            0.0
        }
    })
}

/// Linear map from bi-cubic to bi-quintic Bernstein coefficients (36 x 16).
pub fn bicubic_to_biquintic() -> DMatrix<f64> {
    let e = &elevation_matrix_1d(4) * &elevation_matrix_1d(3); // 6 x 4
    DMatrix::from_fn(36, 16, |row, col| {
        let (i, j) = (row % 6, row / 6);
        let (a, b) = (col % 4, col / 4);
        e[(i, a)] * e[(j, b)]
    })
}

/// Raises bi-cubic coefficients (16) to the bi-quintic representation (36) of
/// the same polynomial.
pub fn degree_elevate_2(coeffs: &[f64]) -> Vec<f64> {
    assert_eq!(coeffs.len(), 16, "expected 16 bi-cubic coefficients");
    let e = &elevation_matrix_1d(4) * &elevation_matrix_1d(3);
    let c = DMatrix::from_fn(4, 4, |i, j| coeffs[4 * j + i]);
    let r = &e * c * e.transpose();
    (0..36).map(|k| r[(k % 6, k / 6)]).collect()
}

/// Spline extraction operator of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementExtraction {
    pub element: usize,
    pub degree: usize,
    /// Global ids of the basis functions supported on the element (rows of `coeffs`).
    pub basis: Vec<usize>,
    /// `basis.len() x (degree+1)^2` extraction coefficients.
    pub coeffs: DMatrix<f64>,
    /// Basis functions are normalized by their sum on this element.
    pub rational: bool,
}

impl ElementExtraction {
    pub fn n_bernstein(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn column_sums(&self) -> DVector<f64> {
        DVector::from_fn(self.coeffs.ncols(), |k, _| self.coeffs.column(k).sum())
    }

    pub fn row_of(&self, basis_id: usize) -> Option<usize> {
        self.basis.iter().position(|&b| b == basis_id)
    }

    /// Basis functions (polynomial or rational as flagged) and partials at a point.
    pub fn evaluate_basis(&self, xi: f64, eta: f64) -> Result<BasisValues> {
        let b = bernstein_eval(self.degree, xi, eta)?;
        let n = b.map(|v| &self.coeffs * v);
        if self.rational {
            rationalize(&n).map_err(|e| match e {
                Error::DegenerateBasis { denominator, .. } => Error::DegenerateBasis {
                    element: self.element,
                    denominator,
                },
                other => other,
            })
        } else {
            Ok(n)
        }
    }

    /// Polynomial (unnormalized) basis values, ignoring the rational flag.
    pub fn evaluate_polynomial(&self, xi: f64, eta: f64) -> Result<BasisValues> {
        let b = bernstein_eval(self.degree, xi, eta)?;
        Ok(b.map(|v| &self.coeffs * v))
    }
}

/// `R_a = N_a / W` with `W = sum_b N_b`, derivatives by the quotient rule.
pub fn rationalize(n: &BasisValues) -> Result<BasisValues> {
    let w = n.value.sum();
    if !(w > 0.0) {
        return Err(Error::DegenerateBasis {
            element: usize::MAX,
            denominator: w,
        });
    }
    let (w1, w2) = (n.d_xi.sum(), n.d_eta.sum());
    let (w11, w12, w22) = (n.d_xi_xi.sum(), n.d_xi_eta.sum(), n.d_eta_eta.sum());
    let r = &n.value / w;
    let r1 = (&n.d_xi - &r * w1) / w;
    let r2 = (&n.d_eta - &r * w2) / w;
    let r11 = (&n.d_xi_xi - &r1 * (2.0 * w1) - &r * w11) / w;
    let r12 = (&n.d_xi_eta - &r1 * w2 - &r2 * w1 - &r * w12) / w;
    let r22 = (&n.d_eta_eta - &r2 * (2.0 * w2) - &r * w22) / w;
    Ok(BasisValues {
        value: r,
        d_xi: r1,
        d_eta: r2,
        d_xi_xi: r11,
        d_xi_eta: r12,
        d_eta_eta: r22,
    })
}
