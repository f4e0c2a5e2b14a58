//! Smallest eigenpairs of `K v = λ M v` by subspace iteration on the
//! factorized stiffness with Rayleigh-Ritz projection.

use super::galerkin::{assemble_membrane_eigen, GalerkinSystem, MassKind, MassMatrix};
use super::sparse::SkylineCholesky;
use crate::error::{Error, Result};
use crate::evaluate::{GSplineSurface, Variant};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const EIGEN_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 1000;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Columns are `M`-orthonormal eigenvectors over the active unknowns.
    pub vectors: DMatrix<f64>,
    /// `‖K v - λ M v‖ / ‖K v‖` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Ritz pairs of `(Kr, Mr)`, ascending.
fn rayleigh_ritz(kr: &DMatrix<f64>, mr: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = symmetrize(mr)
        .cholesky()
        .ok_or_else(|| Error::Eigensolver { log: "projected mass matrix lost positive definiteness".into() })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigensolver { log: "projected mass factor is singular".into() })?;
    let c = symmetrize(&(&linv * kr * linv.transpose()));
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let z = linv.transpose() * &eig.eigenvectors;
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| z.column(i).clone_owned()).collect::<Vec<_>>());
    Ok((values, vectors))
}

/// The `k` smallest eigenpairs of the system's stiffness and mass.
pub fn solve_generalized_eigen(system: &GalerkinSystem, k: usize) -> Result<EigenPairs> {
    let mass = system
        .mass
        .as_ref()
        .ok_or_else(|| Error::Domain("system was assembled without a mass matrix".into()))?;
    let n = system.n_active();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("requested {k} eigenpairs of a system with {n} unknowns")));
    }
    let q = (2 * k).max(k + 8).min(n);
    let chol = SkylineCholesky::factor(&system.stiffness)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = DMatrix::from_fn(n, q, |_, _| rng.gen_range(-1.0..1.0));
    let mut log = Vec::new();
    for it in 1..=MAX_ITERATIONS {
        let mx = mass.mul_mat(&x);
        let y = chol.solve_mat(&mx);
        let kr = y.transpose() * &mx;
        let mr = y.transpose() * mass.mul_mat(&y);
        let (values, z) = rayleigh_ritz(&kr, &mr)?;
        x = &y * z;
        let kx = system.stiffness.mul_mat(&x.columns(0, k).clone_owned());
        let mxk = mass.mul_mat(&x.columns(0, k).clone_owned());
        let residuals: Vec<f64> = (0..k)
            .map(|j| (kx.column(j) - mxk.column(j) * values[j]).norm() / kx.column(j).norm())
            .collect();
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        log.push(format!("iteration {it}: max residual {worst:.3e}"));
        if worst < EIGEN_TOL {
            return Ok(EigenPairs {
                values: values[..k].to_vec(),
                vectors: x.columns(0, k).clone_owned(),
                residuals,
                iterations: it,
            });
        }
    }
    let tail = log.len().saturating_sub(5);
    Err(Error::Eigensolver { log: log[tail..].join("; ") })
}

/// Dirichlet spectrum of `-Δ` on the unit square, `(i² + j²) π²`, ascending.
pub fn unit_square_eigenvalues(k: usize) -> Vec<f64> {
    let m = (k as f64).sqrt().ceil() as usize + 2;
    let mut all: Vec<f64> = (1..=m)
        .flat_map(|i| (1..=m).map(move |j| ((i * i + j * j) as f64) * PI * PI))
        .collect();
    all.sort_by(f64::total_cmp);
    all.truncate(k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub variant: Variant,
    pub mass: MassKind,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub eigenvalues: Vec<f64>,
    pub analytic: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl EigenReport {
    pub const CSV_HEADER: &'static str = "variant,mass,dofs,index,eigenvalue,analytic,relative_error";

    pub fn csv_rows(&self) -> Vec<String> {
        (0..self.eigenvalues.len())
            .map(|i| {
                format!(
                    "{},{},{},{},{:.12e},{:.12e},{:.6e}",
                    self.variant,
                    self.mass,
                    self.n_dofs,
                    i + 1,
                    self.eigenvalues[i],
                    self.analytic[i],
                    self.relative_errors[i]
                )
            })
            .collect()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Membrane eigenvalues of a unit-square surface compared with the analytic spectrum.
pub fn membrane_eigen(surface: &GSplineSurface, mass: MassKind, k: usize) -> Result<EigenReport> {
    let system = assemble_membrane_eigen(surface, mass)?;
    let pairs = solve_generalized_eigen(&system, k)?;
    let analytic = unit_square_eigenvalues(k);
    let relative_errors = pairs.values.iter().zip(&analytic).map(|(l, a)| (l - a).abs() / a).collect();
    Ok(EigenReport {
        variant: surface.variant,
        mass,
        n_elements: surface.n_elements(),
        n_dofs: system.n_active(),
        eigenvalues: pairs.values,
        analytic,
        relative_errors,
        residuals: pairs.residuals,
        iterations: pairs.iterations,
    })
}

/// Diagonal entries of a lumped system.
pub fn lumped_diagonal(system: &GalerkinSystem) -> Option<&DVector<f64>> {
    match &system.mass {
        Some(MassMatrix::Lumped(d)) => Some(d),
        _ => None,
    }
}
