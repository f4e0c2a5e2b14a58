//! Gauss-Legendre and Gauss-Lobatto rules.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureKind {
    GaussLegendre,
    GaussLobatto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl QuadratureRule {
    /// `n`-point Gauss-Legendre rule on `[-1, 1]`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            points[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { kind: QuadratureKind::GaussLegendre, points, weights }
    }

    /// `n`-point Gauss-Lobatto rule on `[-1, 1]` (endpoints included).
    pub fn gauss_lobatto(n: usize) -> Self {
        assert!(n >= 2);
        let m = n - 1;
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = -(PI * i as f64 / m as f64).cos();
            if i > 0 && i < m {
                // interior nodes are the roots of P'_m
                for _ in 0..100 {
                    let (p, dp) = legendre(m, x);
                    // P''_m from the Legendre equation
                    let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
                    let dx = dp / ddp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
            }
            let p = if i == 0 {
                if m % 2 == 0 { 1.0 } else { -1.0 }
            } else if i == m {
                1.0
            } else {
                legendre(m, x).0
            };
            points[i] = x;
            weights[i] = 2.0 / ((m * n) as f64 * p * p);
        }
        Self { kind: QuadratureKind::GaussLobatto, points, weights }
    }

    /// The same rule mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> Self {
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        Self {
            kind: self.kind,
            points: self.points.iter().map(|x| c + h * x).collect(),
            weights: self.weights.iter().map(|w| h * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tensor-product points `(ξ, η, weight)`, ξ running fastest.
    pub fn tensor(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len() * self.len());
        for (y, wy) in self.points.iter().zip(&self.weights) {
            for (x, wx) in self.points.iter().zip(&self.weights) {
                out.push((*x, *y, wx * wy));
            }
        }
        out
    }
}

/// Tensor Gauss-Legendre points on the unit square.
pub fn unit_square_gauss(n: usize) -> Vec<(f64, f64, f64)> {
    QuadratureRule::gauss_legendre(n).on_interval(0.0, 1.0).tensor()
}
