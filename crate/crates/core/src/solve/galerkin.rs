//! Isoparametric assembly of stiffness, mass and load on planar surfaces,
//! Dirichlet elimination, the linear solve and relative error norms.

use super::sparse::{CsrMatrix, SkylineCholesky};
use crate::error::{Error, Result};
use crate::evaluate::GSplineSurface;
use crate::quadrature::unit_square_gauss;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Coefficients below this magnitude do not count as boundary trace.
pub const TRACE_TOL: f64 = 1e-14;
/// Gauss points per direction for error integrals.
pub const ERROR_QUADRATURE: usize = 10;
/// Samples per direction per element for the maximum norm.
pub const LINF_SAMPLES: usize = 10;

/// Manufactured solution of `-Δu = f`.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub name: &'static str,
    pub u: fn(f64, f64) -> f64,
    pub grad: fn(f64, f64) -> [f64; 2],
    pub source: fn(f64, f64) -> f64,
}

impl Manufactured {
    /// `u = sin(πx) sin(πy)`, `f = 2π² sin(πx) sin(πy)`.
    pub fn sine() -> Self {
        Self {
            name: "sine",
            u: |x, y| (PI * x).sin() * (PI * y).sin(),
            grad: |x, y| [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()],
            source: |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
        }
    }

    /// `u = x` with `f = 0`; needs nonhomogeneous boundary data.
    pub fn linear_x() -> Self {
        Self { name: "linear_x", u: |x, _| x, grad: |_, _| [1.0, 0.0], source: |_, _| 0.0 }
    }

    pub fn zero() -> Self {
        Self { name: "zero", u: |_, _| 0.0, grad: |_, _| [0.0, 0.0], source: |_, _| 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    Consistent,
    Lumped,
}

impl fmt::Display for MassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MassKind::Consistent => "consistent",
            MassKind::Lumped => "lumped",
        })
    }
}

impl FromStr for MassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "consistent" => Ok(MassKind::Consistent),
            "lumped" => Ok(MassKind::Lumped),
            other => Err(Error::Format(format!("unknown mass matrix kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MassMatrix {
    Consistent(CsrMatrix),
    Lumped(DVector<f64>),
}

impl MassMatrix {
    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MassMatrix::Consistent(m) => m.mul_mat(x),
            MassMatrix::Lumped(d) => {
                let mut out = x.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                out
            }
        }
    }

    pub fn kind(&self) -> MassKind {
        match self {
            MassMatrix::Consistent(_) => MassKind::Consistent,
            MassMatrix::Lumped(_) => MassKind::Lumped,
        }
    }
}

/// Matrices over every basis function, before boundary conditions.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub stiffness: CsrMatrix,
    pub mass: Option<CsrMatrix>,
    pub load: DVector<f64>,
}

/// System after eliminating the functions with boundary trace.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub n_basis: usize,
    /// Global ids of the unknowns, in system order.
    pub active: Vec<usize>,
    /// Global ids of the eliminated functions.
    pub dirichlet: Vec<usize>,
    pub stiffness: CsrMatrix,
    /// Active rows, Dirichlet columns of the full stiffness.
    pub coupling: CsrMatrix,
    pub mass: Option<MassMatrix>,
    pub load: DVector<f64>,
}

struct ElementMatrices {
    dofs: Vec<usize>,
    k: DMatrix<f64>,
    m: Option<DMatrix<f64>>,
    f: DVector<f64>,
}

/// Values and physical gradients of the element basis at one point.
pub struct PhysicalBasis {
    pub x: f64,
    pub y: f64,
    pub det_j: f64,
    pub value: DVector<f64>,
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
}

/// Pushes the parametric gradients forward through the planar Jacobian.
pub fn physical_basis(surface: &GSplineSurface, e: usize, xi: f64, eta: f64) -> Result<PhysicalBasis> {
    let ext = &surface.elements[e];
    let n = ext.evaluate_basis(xi, eta)?;
    let pos = &surface.net.positions;
    let (mut x, mut y, mut x_xi, mut x_eta, mut y_xi, mut y_eta) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, &a) in ext.basis.iter().enumerate() {
        let p = pos[a];
        x += n.value[r] * p.x;
        y += n.value[r] * p.y;
        x_xi += n.d_xi[r] * p.x;
        x_eta += n.d_eta[r] * p.x;
        y_xi += n.d_xi[r] * p.y;
        y_eta += n.d_eta[r] * p.y;
    }
    let det_j = x_xi * y_eta - x_eta * y_xi;
    if !(det_j.abs() > surface.singular_tolerance()) {
        return Err(Error::SingularParameterization { element: e, xi, eta });
    }
    let dx = (&n.d_xi * y_eta - &n.d_eta * y_xi) / det_j;
    let dy = (&n.d_eta * x_xi - &n.d_xi * x_eta) / det_j;
    Ok(PhysicalBasis { x, y, det_j, value: n.value, dx, dy })
}

fn element_matrices(
    surface: &GSplineSurface,
    e: usize,
    source: Option<fn(f64, f64) -> f64>,
    with_mass: bool,
) -> Result<ElementMatrices> {
    let ext = &surface.elements[e];
    let nb = ext.basis.len();
    let mut k = DMatrix::zeros(nb, nb);
    let mut m = with_mass.then(|| DMatrix::zeros(nb, nb));
    let mut f = DVector::zeros(nb);
    for (xi, eta, w) in unit_square_gauss(ext.degree + 1) {
        let b = physical_basis(surface, e, xi, eta)?;
        let dw = w * b.det_j.abs();
        k.ger(dw, &b.dx, &b.dx, 1.0);
        k.ger(dw, &b.dy, &b.dy, 1.0);
        if let Some(m) = m.as_mut() {
            m.ger(dw, &b.value, &b.value, 1.0);
        }
        if let Some(src) = source {
            f.axpy(dw * src(b.x, b.y), &b.value, 1.0);
        }
    }
    Ok(ElementMatrices { dofs: ext.basis.clone(), k, m, f })
}

/// Element-parallel assembly over all basis functions; local results are
/// merged in element order.
pub fn assemble(surface: &GSplineSurface, source: Option<fn(f64, f64) -> f64>, with_mass: bool) -> Result<Assembly> {
    let locals: Vec<ElementMatrices> = (0..surface.n_elements())
        .into_par_iter()
        .map(|e| element_matrices(surface, e, source, with_mass))
        .collect::<Result<_>>()?;
    let n = surface.n_basis();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    let mut load = DVector::zeros(n);
    for loc in &locals {
        for (r, &a) in loc.dofs.iter().enumerate() {
            load[a] += loc.f[r];
            for (c, &b) in loc.dofs.iter().enumerate() {
                kt.push((a, b, loc.k[(r, c)]));
                if let Some(m) = &loc.m {
                    mt.push((a, b, m[(r, c)]));
                }
            }
        }
    }
    Ok(Assembly {
        stiffness: CsrMatrix::from_triplets(n, n, &kt),
        mass: with_mass.then(|| CsrMatrix::from_triplets(n, n, &mt)),
        load,
    })
}

/// Local Bernstein indices `(p+1) j + i` on side `s` of an element.
fn side_columns(p: usize, s: usize) -> Vec<usize> {
    (0..=p)
        .map(|t| match s {
            0 => t,
            1 => (p + 1) * t + p,
            2 => (p + 1) * p + t,
            _ => (p + 1) * t,
        })
        .collect()
}

/// Basis functions with nonzero trace on the boundary of the domain.
pub fn dirichlet_functions(surface: &GSplineSurface) -> Result<Vec<usize>> {
    let cnet = surface.cnet();
    let mut marked = vec![false; surface.n_basis()];
    let mut any = false;
    for f in 0..cnet.n_faces() {
        for s in 0..4 {
            if cnet.face_neighbor(f, s).is_some() {
                continue;
            }
            any = true;
            let ext = &surface.elements[f];
            for k in side_columns(ext.degree, s) {
                for (r, &a) in ext.basis.iter().enumerate() {
                    if ext.coeffs[(r, k)].abs() > TRACE_TOL {
                        marked[a] = true;
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::Topology("closed control net has no boundary for Dirichlet conditions".into()));
    }
    Ok((0..marked.len()).filter(|&a| marked[a]).collect())
}

impl GalerkinSystem {
    fn from_assembly(surface: &GSplineSurface, asm: Assembly, mass_kind: Option<MassKind>) -> Result<Self> {
        let n = surface.n_basis();
        let dirichlet = dirichlet_functions(surface)?;
        let mut is_dirichlet = vec![false; n];
        for &a in &dirichlet {
            is_dirichlet[a] = true;
        }
        let active: Vec<usize> = (0..n).filter(|&a| !is_dirichlet[a]).collect();
        let mass = match (mass_kind, asm.mass) {
            (Some(MassKind::Consistent), Some(m)) => Some(MassMatrix::Consistent(m.select(&active, &active))),
            (Some(MassKind::Lumped), Some(m)) => {
                let sums = m.row_sums();
                let mut d = DVector::zeros(active.len());
                for (k, &a) in active.iter().enumerate() {
                    if !(sums[a] > 0.0) {
                        return Err(Error::Lumping { index: a, value: sums[a] });
                    }
                    d[k] = sums[a];
                }
                Some(MassMatrix::Lumped(d))
            }
            _ => None,
        };
        Ok(Self {
            n_basis: n,
            stiffness: asm.stiffness.select(&active, &active),
            coupling: asm.stiffness.select(&active, &dirichlet),
            load: DVector::from_iterator(active.len(), active.iter().map(|&a| asm.load[a])),
            active,
            dirichlet,
            mass,
        })
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Boundary coefficients interpolating `g` at the control points.
    pub fn boundary_values(&self, surface: &GSplineSurface, g: fn(f64, f64) -> f64) -> DVector<f64> {
        let pos = &surface.net.positions;
        DVector::from_iterator(self.dirichlet.len(), self.dirichlet.iter().map(|&a| g(pos[a].x, pos[a].y)))
    }

    /// Right-hand side with the lifted boundary data moved over.
    pub fn lifted_rhs(&self, boundary: &DVector<f64>) -> DVector<f64> {
        &self.load - self.coupling.mul_vec(boundary)
    }

    /// Solves for the active coefficients and returns coefficients of every
    /// basis function.
    pub fn solve(&self, boundary: &DVector<f64>) -> Result<DVector<f64>> {
        let mut full = DVector::zeros(self.n_basis);
        for (k, &a) in self.dirichlet.iter().enumerate() {
            full[a] = boundary[k];
        }
        if self.active.is_empty() {
            return Ok(full);
        }
        let x = SkylineCholesky::factor(&self.stiffness)?.solve(&self.lifted_rhs(boundary));
        for (k, &a) in self.active.iter().enumerate() {
            full[a] = x[k];
        }
        Ok(full)
    }

    /// Largest weak-form residual over the active test functions, relative
    /// to the load.
    pub fn weak_residual(&self, coefficients: &DVector<f64>) -> f64 {
        let ui = DVector::from_iterator(self.active.len(), self.active.iter().map(|&a| coefficients[a]));
        let ub = DVector::from_iterator(self.dirichlet.len(), self.dirichlet.iter().map(|&a| coefficients[a]));
        let r = self.stiffness.mul_vec(&ui) + self.coupling.mul_vec(&ub) - &self.load;
        r.amax() / self.load.amax().max(self.stiffness.max_abs() * ui.amax()).max(f64::MIN_POSITIVE)
    }
}

pub fn assemble_poisson(surface: &GSplineSurface, problem: &Manufactured) -> Result<GalerkinSystem> {
    let asm = assemble(surface, Some(problem.source), false)?;
    GalerkinSystem::from_assembly(surface, asm, None)
}

pub fn assemble_membrane_eigen(surface: &GSplineSurface, kind: MassKind) -> Result<GalerkinSystem> {
    let asm = assemble(surface, None, true)?;
    GalerkinSystem::from_assembly(surface, asm, Some(kind))
}

/// Assembles and solves `-Δu = f` with boundary data interpolated from the
/// exact solution; returns coefficients of every basis function.
pub fn solve_poisson(surface: &GSplineSurface, problem: &Manufactured) -> Result<DVector<f64>> {
    let sys = assemble_poisson(surface, problem)?;
    sys.solve(&sys.boundary_values(surface, problem.u))
}

/// Discrete solution and its gradient at a parametric point.
pub fn evaluate_solution(
    surface: &GSplineSurface,
    coefficients: &DVector<f64>,
    e: usize,
    xi: f64,
    eta: f64,
) -> Result<(f64, f64, f64, [f64; 2])> {
    let b = physical_basis(surface, e, xi, eta)?;
    let (u, g) = combine(&b, &surface.elements[e].basis, coefficients);
    Ok((b.x, b.y, u, g))
}

fn combine(b: &PhysicalBasis, basis: &[usize], coefficients: &DVector<f64>) -> (f64, [f64; 2]) {
    let dot = |v: &DVector<f64>| basis.iter().enumerate().map(|(r, &a)| v[r] * coefficients[a]).sum::<f64>();
    (dot(&b.value), [dot(&b.dx), dot(&b.dy)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
}

/// Relative `L²`, `L∞` and full `H¹` errors against the exact solution.
pub fn compute_errors(surface: &GSplineSurface, coefficients: &DVector<f64>, problem: &Manufactured) -> Result<ErrorNorms> {
    compute_errors_with(surface, coefficients, problem, ERROR_QUADRATURE)
}

pub fn compute_errors_with(
    surface: &GSplineSurface,
    coefficients: &DVector<f64>,
    problem: &Manufactured,
    points: usize,
) -> Result<ErrorNorms> {
    let rule = unit_square_gauss(points);
    let grid: Vec<f64> = (0..LINF_SAMPLES).map(|k| k as f64 / (LINF_SAMPLES - 1) as f64).collect();
    // [∫e², ∫|∇e|², ∫u², ∫|∇u|², max|e|, max|u|]
    let per: Vec<[f64; 6]> = (0..surface.n_elements())
        .into_par_iter()
        .map(|e| {
            let basis = &surface.elements[e].basis;
            let mut acc = [0.0; 6];
            for &(xi, eta, w) in &rule {
                let b = physical_basis(surface, e, xi, eta)?;
                let (uh, gh) = combine(&b, basis, coefficients);
                let dw = w * b.det_j.abs();
                let (u, g) = ((problem.u)(b.x, b.y), (problem.grad)(b.x, b.y));
                acc[0] += dw * (uh - u).powi(2);
                acc[1] += dw * ((gh[0] - g[0]).powi(2) + (gh[1] - g[1]).powi(2));
                acc[2] += dw * u * u;
                acc[3] += dw * (g[0] * g[0] + g[1] * g[1]);
            }
            for &eta in &grid {
                for &xi in &grid {
                    let (x, y, uh, _) = evaluate_solution(surface, coefficients, e, xi, eta)?;
                    let u = (problem.u)(x, y);
                    acc[4] = acc[4].max((uh - u).abs());
                    acc[5] = acc[5].max(u.abs());
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut t = [0.0; 6];
    for a in &per {
        for k in 0..4 {
            t[k] += a[k];
        }
        t[4] = t[4].max(a[4]);
        t[5] = t[5].max(a[5]);
    }
    Ok(ErrorNorms {
        l2: (t[0] / t[2]).sqrt(),
        linf: t[4] / t[5],
        h1: ((t[0] + t[1]) / (t[2] + t[3])).sqrt(),
    })
}
