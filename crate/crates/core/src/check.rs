//! On-demand invariant suite for a constructed surface.

use crate::error::Result;
use crate::evaluate::{basis_jump, g1_residual, watertight_residual, GSplineSurface, Variant};
use crate::mesh::ElementClass;
use crate::quadrature::unit_square_gauss;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const EDGE_SAMPLES: usize = 50;
pub const COLLOCATION_POINTS: usize = 6;

pub const G1_TOL: f64 = 1e-8;
pub const C1_TOL: f64 = 1e-9;
pub const C0_TOL: f64 = 1e-9;
pub const PARTITION_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub variant: Variant,
    pub n_elements: usize,
    pub n_basis: usize,
    pub n_extraordinary: usize,
    pub spoke_edges: usize,
    /// Largest normalized G1 residual over spoke edges (not checked for C0).
    pub g1_residual: Option<f64>,
    /// Largest first-derivative basis jump across non-spoke edges of irregular elements.
    pub c1_jump: Option<f64>,
    pub watertight_gap: f64,
    /// Largest `|sum - 1|` of the basis (rational where flagged) over quadrature points.
    pub partition_deviation: f64,
    /// Range of the polynomial sum on rational elements.
    pub denominator_range: Option<[f64; 2]>,
    /// `sigma_min / sigma_max` of the collocation matrix, absent when skipped.
    pub collocation_ratio: Option<f64>,
    pub passed: bool,
}

pub fn collocation_ratio(surface: &GSplineSurface) -> Result<f64> {
    let pts = unit_square_gauss(COLLOCATION_POINTS);
    let mut m = DMatrix::zeros(surface.n_elements() * pts.len(), surface.n_basis());
    for e in 0..surface.n_elements() {
        for (k, &(xi, eta, _)) in pts.iter().enumerate() {
            let b = surface.basis(e, xi, eta)?;
            for (r, &a) in surface.elements[e].basis.iter().enumerate() {
                m[(e * pts.len() + k, a)] = b.value[r];
            }
        }
    }
    let sv = m.singular_values();
    Ok(sv.min() / sv.max())
}

/// Runs every check; `rank` enables the dense collocation SVD.
pub fn check_surface(surface: &GSplineSurface, rank: bool) -> Result<InvariantReport> {
    let cnet = surface.cnet();
    let spokes = cnet.spoke_edges();
    let g1 = surface.variant != Variant::C0;
    let mut g1_worst = 0.0f64;
    let mut c1_worst = 0.0f64;
    for e in 0..cnet.n_edges() {
        if cnet.is_boundary_edge(e) {
            continue;
        }
        if spokes.contains(&e) {
            if g1 {
                g1_worst = g1_worst.max(g1_residual(surface, e, EDGE_SAMPLES)?);
            }
        } else if cnet.edge_faces(e).any(|(f, _)| surface.classes[f] == ElementClass::Irregular) {
            c1_worst = c1_worst.max(basis_jump(surface, e, 1, EDGE_SAMPLES)?);
        }
    }
    let watertight_gap = watertight_residual(surface, EDGE_SAMPLES)?;
    let mut partition_deviation = 0.0f64;
    let mut denominator: Option<[f64; 2]> = None;
    for ext in &surface.elements {
        for (xi, eta, _) in unit_square_gauss(ext.degree + 1) {
            let sum = ext.evaluate_polynomial(xi, eta)?.value.sum();
            if ext.rational {
                let r = denominator.get_or_insert([sum, sum]);
                *r = [r[0].min(sum), r[1].max(sum)];
                let rat = ext.evaluate_basis(xi, eta)?.value.sum();
                partition_deviation = partition_deviation.max((rat - 1.0).abs());
            } else {
                partition_deviation = partition_deviation.max((sum - 1.0).abs());
            }
        }
    }
    let collocation = if rank { Some(collocation_ratio(surface)?) } else { None };
    let passed = (!g1 || g1_worst < G1_TOL)
        && c1_worst < C1_TOL
        && watertight_gap < C0_TOL
        && partition_deviation <= PARTITION_TOL
        && denominator.is_none_or(|r| r[0] > 0.0)
        && collocation.is_none_or(|c| c > RANK_TOL);
    Ok(InvariantReport {
        variant: surface.variant,
        n_elements: surface.n_elements(),
        n_basis: surface.n_basis(),
        n_extraordinary: cnet.extraordinary_vertices().len(),
        spoke_edges: spokes.len(),
        g1_residual: g1.then_some(g1_worst),
        c1_jump: surface.classes.contains(&ElementClass::Irregular).then_some(c1_worst),
        watertight_gap,
        partition_deviation,
        denominator_range: denominator,
        collocation_ratio: collocation,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build, nets};

    #[test]
    fn g1_constructions_pass() {
        for variant in [Variant::G1P, Variant::G1R] {
            let r = check_surface(&build(&nets::fan(5, 3, 0.5), variant).unwrap(), true).unwrap();
            assert!(r.passed, "{r:?}");
            assert_eq!(r.n_extraordinary, 1);
            assert_eq!(r.spoke_edges, 5);
            assert_eq!(r.denominator_range.is_some(), variant == Variant::G1R);
        }
    }

    #[test]
    fn c0_skips_the_g1_residual() {
        let r = check_surface(&build(&nets::grid(3, 3), Variant::C0).unwrap(), false).unwrap();
        assert!(r.passed);
        assert_eq!(r.g1_residual, None);
        assert_eq!(r.c1_jump, None);
        assert_eq!(r.collocation_ratio, None);
    }
}
