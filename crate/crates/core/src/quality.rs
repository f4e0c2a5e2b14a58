//! Shell-validity analysis of a surface used as a shell midsurface.
//!
//! With the linearized through-thickness metric `g = a - 2 ζ b`, the area
//! element at a surface point is the quadratic `det g(ζ) = A0 + A1 ζ + A2 ζ²`.
//! A thickness `t` is valid when `det g > 0` at every surface quadrature
//! point and every Gauss-Lobatto node of `[-t/2, t/2]`.

use crate::error::{Error, Result};
use crate::evaluate::{GSplineSurface, SurfaceFrame, Variant};
use crate::quadrature::{unit_square_gauss, QuadratureRule};
use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_T_LO: f64 = 0.01;
pub const DEFAULT_T_HI: f64 = 100.0;
pub const DEFAULT_TOL: f64 = 0.005;
/// Through-thickness Gauss-Lobatto nodes.
pub const THICKNESS_POINTS: usize = 5;
/// Width of the dense scan below `t*` that guards the bisection.
pub const GUARD_WINDOW: f64 = 0.1;
const GUARD_STEPS: usize = 100;

/// `det(a - 2 ζ b)`.
pub fn shell_metric_det(frame: &SurfaceFrame, zeta: f64) -> f64 {
    let g: Matrix2<f64> = frame.a - frame.b * (2.0 * zeta);
    g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]
}

/// Coefficients of `det g(ζ)` as a polynomial in `ζ`.
pub fn metric_det_coefficients(frame: &SurfaceFrame) -> [f64; 3] {
    let (a, b) = (&frame.a, &frame.b);
    let a0 = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let a1 = -2.0 * (a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)]);
    let a2 = 4.0 * (b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)]);
    [a0, a1, a2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub element: usize,
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy)]
struct SamplePoint {
    element: usize,
    xi: f64,
    eta: f64,
    coeffs: [f64; 3],
}

impl SamplePoint {
    fn det(&self, zeta: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        c0 + zeta * (c1 + zeta * c2)
    }
}

/// Smallest `t > 0` with `c0 + c1 t + c2 t² <= 0`, given `c0 > 0`.
fn first_nonpositive(c0: f64, c1: f64, c2: f64) -> Option<f64> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if c2.abs() <= 1e-14 * scale {
        return (c1 < 0.0).then(|| -c0 / c1);
    }
    let disc = c1 * c1 - 4.0 * c0 * c2;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let roots = [q / c2, if q != 0.0 { c0 / q } else { f64::NAN }];
    roots.into_iter().filter(|r| *r > 0.0).min_by(f64::total_cmp)
}

/// Surface quadrature points of a surface with their `det g` coefficients.
pub struct QualitySampler {
    points: Vec<SamplePoint>,
    n_elements: usize,
    nodes: Vec<f64>,
}

/// Outcome of a validity test at one thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub thickness: f64,
    pub valid: bool,
    /// Smallest `det g` over the sample points of each element.
    pub element_min_det: Vec<f64>,
    /// Point with the smallest `det g`; the failure location when invalid.
    pub location: Location,
    pub min_det: f64,
}

impl QualitySampler {
    /// `(p+1)²` Gauss-Legendre points per element of degree `p`.
    pub fn new(surface: &GSplineSurface) -> Result<Self> {
        let per: Vec<Vec<SamplePoint>> = (0..surface.n_elements())
            .into_par_iter()
            .map(|e| {
                let p = surface.elements[e].degree;
                unit_square_gauss(p + 1)
                    .into_iter()
                    .map(|(xi, eta, _)| {
                        let frame = surface.frame(e, xi, eta)?;
                        Ok(SamplePoint { element: e, xi, eta, coeffs: metric_det_coefficients(&frame) })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let nodes = QuadratureRule::gauss_lobatto(THICKNESS_POINTS).on_interval(-0.5, 0.5).points;
        Ok(Self { points: per.into_iter().flatten().collect(), n_elements: surface.n_elements(), nodes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Quick predicate used by the bisection driver.
    pub fn is_valid(&self, t: f64) -> bool {
        self.points
            .par_iter()
            .all(|pt| self.nodes.iter().all(|s| pt.det(s * t) > 0.0))
    }

    pub fn check(&self, t: f64) -> ValidityCheck {
        let mut element_min_det = vec![f64::INFINITY; self.n_elements];
        let mut worst = (f64::INFINITY, Location { element: 0, xi: 0.0, eta: 0.0, zeta: 0.0 });
        for pt in &self.points {
            for s in &self.nodes {
                let zeta = s * t;
                let d = pt.det(zeta);
                let slot = &mut element_min_det[pt.element];
                *slot = slot.min(d);
                if d < worst.0 {
                    worst = (d, Location { element: pt.element, xi: pt.xi, eta: pt.eta, zeta });
                }
            }
        }
        ValidityCheck { thickness: t, valid: worst.0 > 0.0, element_min_det, location: worst.1, min_det: worst.0 }
    }

    /// Smallest thickness in `(lo, hi]` at which some sample becomes invalid,
    /// from the closed-form roots of `det g` along each node ray.
    fn exact_threshold(&self, lo: f64, hi: f64) -> Option<(f64, Location)> {
        let mut best: Option<(f64, Location)> = None;
        for pt in &self.points {
            let [c0, c1, c2] = pt.coeffs;
            for &s in &self.nodes {
                if let Some(t) = first_nonpositive(c0, c1 * s, c2 * s * s) {
                    if t > lo && t <= hi && best.map_or(true, |b| t < b.0) {
                        let loc = Location { element: pt.element, xi: pt.xi, eta: pt.eta, zeta: s * t };
                        best = Some((t, loc));
                    }
                }
            }
        }
        best
    }
}

pub fn is_valid_at_thickness(surface: &GSplineSurface, t: f64) -> Result<ValidityCheck> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("thickness must be positive, got {t}")));
    }
    Ok(QualitySampler::new(surface)?.check(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub variant: Variant,
    pub n_elements: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub tol: f64,
    /// Minimum invalid thickness; `None` when the surface is valid at `t_hi`.
    pub t_star: Option<f64>,
    /// Thickness at which `element_min_det` was evaluated (`t*` or `t_hi`).
    pub tested_thickness: f64,
    pub element_min_det: Vec<f64>,
    pub location: Option<Location>,
    pub bisection_steps: usize,
    /// Whether the dense scan below `t*` found every thickness valid.
    pub monotone: bool,
}

impl QualityReport {
    /// `t*` with `+∞` for surfaces that never become invalid.
    pub fn t_star_or_inf(&self) -> f64 {
        self.t_star.unwrap_or(f64::INFINITY)
    }

    pub const CSV_HEADER: &'static str = "variant,elements,t_star,element,xi,eta,zeta";

    pub fn csv_row(&self) -> String {
        let t = self.t_star.map_or("inf".to_string(), |t| format!("{t:.6}"));
        match &self.location {
            Some(l) if self.t_star.is_some() => {
                format!("{},{},{},{},{:.6},{:.6},{:.6}", self.variant, self.n_elements, t, l.element, l.xi, l.eta, l.zeta)
            }
            _ => format!("{},{},{},,,,", self.variant, self.n_elements, t),
        }
    }
}

fn bisect(sampler: &QualitySampler, mut lo: f64, mut hi: f64, tol: f64, steps: &mut usize) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sampler.is_valid(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        *steps += 1;
    }
    (lo, hi)
}

/// Minimum thickness producing an invalid area element.
///
/// Bisection on `[t_lo, t_hi]` brackets the threshold to `tol`; the value is
/// then the exact root inside the final bracket. A dense scan over
/// `[t* - 0.1, t*]` restarts the search if a smaller invalid thickness exists.
pub fn min_invalid_thickness(surface: &GSplineSurface, t_lo: f64, t_hi: f64, tol: f64) -> Result<QualityReport> {
    if !(t_lo > 0.0 && t_hi > t_lo && tol > 0.0) {
        return Err(Error::Domain(format!("invalid thickness bracket [{t_lo}, {t_hi}] with tolerance {tol}")));
    }
    let sampler = QualitySampler::new(surface)?;
    if !sampler.is_valid(t_lo) {
        let c = sampler.check(t_lo);
        return Err(Error::Domain(format!(
            "surface already invalid at t_lo = {t_lo} (element {}, det g = {:e})",
            c.location.element, c.min_det
        )));
    }
    let mut report = QualityReport {
        variant: surface.variant,
        n_elements: surface.n_elements(),
        t_lo,
        t_hi,
        tol,
        t_star: None,
        tested_thickness: t_hi,
        element_min_det: Vec::new(),
        location: None,
        bisection_steps: 0,
        monotone: true,
    };
    if sampler.is_valid(t_hi) {
        report.element_min_det = sampler.check(t_hi).element_min_det;
        return Ok(report);
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    let t_star = loop {
        let (a, b) = bisect(&sampler, lo, hi, tol, &mut report.bisection_steps);
        let t = sampler.exact_threshold(a, b).map_or(b, |r| r.0);
        let start = (t - GUARD_WINDOW).max(t_lo);
        let bad = (0..GUARD_STEPS)
            .map(|k| start + (t - start) * k as f64 / GUARD_STEPS as f64)
            .find(|&s| s < t && !sampler.is_valid(s));
        match bad {
            None => break t,
            Some(s) => {
                report.monotone = false;
                lo = (s - (t - start) / GUARD_STEPS as f64).max(t_lo);
                hi = s;
            }
        }
    };
    let check = sampler.check(t_star);
    report.t_star = Some(t_star);
    report.tested_thickness = t_star;
    report.location = Some(check.location);
    report.element_min_det = check.element_min_det;
    Ok(report)
}

/// [`min_invalid_thickness`] with the default bracket and tolerance.
pub fn min_invalid_thickness_default(surface: &GSplineSurface) -> Result<QualityReport> {
    min_invalid_thickness(surface, DEFAULT_T_LO, DEFAULT_T_HI, DEFAULT_TOL)
}
