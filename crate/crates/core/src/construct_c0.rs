//! Preliminary bi-cubic construction: every Bézier point of every element is
//! an affine combination of control points. The resulting basis is C² away
//! from spoke edges and C⁰ across them.

use crate::error::Result;
use crate::evaluate::{basis_jump, GSplineSurface, Variant};
use crate::extraction::ElementExtraction;
use crate::mesh::{CNet, ControlNet};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::ops::Deref;

/// Sparse affine combination of control points.
pub type Stencil = BTreeMap<usize, f64>;

fn add_scaled(into: &mut Stencil, from: &Stencil, s: f64) {
    for (&v, &w) in from {
        *into.entry(v).or_insert(0.0) += s * w;
    }
}

fn combine(parts: &[(&Stencil, f64)]) -> Stencil {
    let mut out = Stencil::new();
    for (st, s) in parts {
        add_scaled(&mut out, st, *s);
    }
    out
}

/// Bi-cubic surface built by [`build_c0`].
#[derive(Debug, Clone)]
pub struct C0Surface(pub GSplineSurface);

impl Deref for C0Surface {
    type Target = GSplineSurface;

    fn deref(&self) -> &GSplineSurface {
        &self.0
    }
}

impl C0Surface {
    pub fn into_inner(self) -> GSplineSurface {
        self.0
    }

    /// Largest jump of the `order`-th derivatives of the basis across an interior edge.
    pub fn geometry_continuity_residual(&self, edge: usize, order: usize) -> Result<f64> {
        basis_jump(&self.0, edge, order, 21)
    }
}

/// Face point of face `f` nearest its corner `c`.
fn face_point(cnet: &CNet, f: usize, c: usize) -> Stencil {
    let q = cnet.face(f);
    let mut s = Stencil::new();
    for (d, w) in [(0, 4.0 / 9.0), (1, 2.0 / 9.0), (2, 1.0 / 9.0), (3, 2.0 / 9.0)] {
        *s.entry(q[(c + d) % 4]).or_insert(0.0) += w;
    }
    s
}

fn unit(v: usize) -> Stencil {
    Stencil::from([(v, 1.0)])
}

/// Edge point on side `s` of face `f` nearest vertex `q[near]`.
fn edge_point(cnet: &CNet, f: usize, s: usize, near: usize) -> Stencil {
    let q = cnet.face(f);
    let far = if near == s { (s + 1) % 4 } else { s };
    match cnet.face_neighbor(f, s) {
        None => combine(&[(&unit(q[near]), 2.0 / 3.0), (&unit(q[far]), 1.0 / 3.0)]),
        Some((g, t)) => {
            // the neighbor traverses the edge in the opposite direction
            let corner_g = if near == s { (t + 1) % 4 } else { t };
            combine(&[(&face_point(cnet, f, near), 0.5), (&face_point(cnet, g, corner_g), 0.5)])
        }
    }
}

/// Vertex point of vertex `v`.
fn vertex_point(cnet: &CNet, v: usize) -> Stencil {
    if !cnet.is_boundary_vertex(v) {
        let fan = cnet.vertex_corners(v);
        let w = 1.0 / fan.len() as f64;
        let mut out = Stencil::new();
        for &(f, c) in fan {
            add_scaled(&mut out, &face_point(cnet, f, c), w);
        }
        return out;
    }
    if cnet.valence(v) == 1 {
        return unit(v);
    }
    let [a, b] = cnet.boundary_neighbors(v).expect("boundary vertex");
    combine(&[(&unit(v), 2.0 / 3.0), (&unit(a), 1.0 / 6.0), (&unit(b), 1.0 / 6.0)])
}

/// The 16 Bézier-point stencils of face `f`, column `4 j + i` in the local frame.
pub fn element_stencils(cnet: &CNet, f: usize) -> Vec<Stencil> {
    let q = cnet.face(f);
    let mut out = vec![Stencil::new(); 16];
    let at = |i: usize, j: usize| 4 * j + i;
    // corner c sits at local (ci, cj) in Bézier index units; inner neighbor at (ii, ij)
    let corner_slot = [(0, 0), (3, 0), (3, 3), (0, 3)];
    let inner_slot = [(1, 1), (2, 1), (2, 2), (1, 2)];
    for c in 0..4 {
        let (ci, cj) = corner_slot[c];
        out[at(ci, cj)] = vertex_point(cnet, q[c]);
        let (ii, ij) = inner_slot[c];
        out[at(ii, ij)] = face_point(cnet, f, c);
    }
    // side s: slot nearest corner s, then slot nearest corner s+1
    let side_slots = [[(1, 0), (2, 0)], [(3, 1), (3, 2)], [(2, 3), (1, 3)], [(0, 2), (0, 1)]];
    for s in 0..4 {
        for (n, &(i, j)) in side_slots[s].iter().enumerate() {
            out[at(i, j)] = edge_point(cnet, f, s, (s + n) % 4);
        }
    }
    out
}

/// Extraction operator of one element from its Bézier-point stencils.
pub fn extraction_from_stencils(element: usize, degree: usize, stencils: &[Stencil]) -> ElementExtraction {
    let basis: Vec<usize> = stencils
        .iter()
        .flat_map(|s| s.iter().filter(|(_, &w)| w != 0.0).map(|(&v, _)| v))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let row: BTreeMap<usize, usize> = basis.iter().enumerate().map(|(r, &v)| (v, r)).collect();
    let mut coeffs = DMatrix::zeros(basis.len(), stencils.len());
    for (k, s) in stencils.iter().enumerate() {
        for (v, &w) in s {
            if w != 0.0 {
                coeffs[(row[v], k)] += w;
            }
        }
    }
    ElementExtraction { element, degree, basis, coeffs, rational: false }
}

pub fn build_c0(net: &ControlNet) -> Result<C0Surface> {
    let cnet = &net.cnet;
    let elements = (0..cnet.n_faces())
        .map(|f| extraction_from_stencils(f, 3, &element_stencils(cnet, f)))
        .collect();
    Ok(C0Surface(GSplineSurface {
        net: net.clone(),
        elements,
        variant: Variant::C0,
        classes: cnet.classify_elements(),
        diagnostics: Vec::new(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets;

    #[test]
    fn columns_sum_to_one() {
        for net in [nets::flipped_grid(6, 0.3), nets::boundary_fan(3, 2, 0.0), nets::cube(1, 1.0)] {
            let s = build_c0(&net).unwrap();
            for ext in &s.elements {
                assert!(ext.column_sums().iter().all(|c| (c - 1.0).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn regular_interior_element_is_the_bspline_extraction() {
        // 1D uniform cubic B-spline Bézier extraction over one interval
        let e1 = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0 / 6.0, 0.0, 0.0, 0.0,
                2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0,
                1.0 / 6.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0,
                0.0, 0.0, 0.0, 1.0 / 6.0,
            ],
        );
        let net = nets::unit_square_grid(5);
        let s = build_c0(&net).unwrap();
        let f = 2 * 5 + 2;
        let ext = &s.elements[f];
        assert_eq!(ext.basis.len(), 16);
        for (r, &v) in ext.basis.iter().enumerate() {
            let (vi, vj) = (v % 6, v / 6);
            let (a, b) = (vi - 1, vj - 1);
            for k in 0..16 {
                let expected = e1[(a, k % 4)] * e1[(b, k / 4)];
                assert!((ext.coeffs[(r, k)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn interior_vertex_point_averages_face_points() {
        let net = nets::fan(5, 1, 0.0);
        let st = vertex_point(&net.cnet, 0);
        assert!((st[&0] - 4.0 / 9.0).abs() < 1e-15);
        let fan = net.cnet.vertex_corners(0);
        let mut expected = Stencil::new();
        for &(f, c) in fan {
            add_scaled(&mut expected, &face_point(&net.cnet, f, c), 0.2);
        }
        for (v, w) in expected {
            assert!((st[&v] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn corner_vertex_point_is_the_control_point() {
        let net = nets::unit_square_grid(2);
        let st = element_stencils(&net.cnet, 0);
        assert_eq!(st[0], unit(0));
    }

    #[test]
    fn shared_edges_get_identical_stencils() {
        let net = nets::double_flipped_grid(8, 0.2);
        let s = build_c0(&net).unwrap();
        let res = (0..net.cnet.n_edges())
            .filter(|&e| !net.cnet.is_boundary_edge(e))
            .map(|e| s.geometry_continuity_residual(e, 0).unwrap())
            .fold(0.0, f64::max);
        assert!(res < 1e-12);
    }

    #[test]
    fn smooth_across_non_spoke_edges() {
        let net = nets::flipped_grid(6, 0.2);
        let s = build_c0(&net).unwrap();
        let spokes = net.cnet.spoke_edges();
        let mut spoke_c1 = 0.0f64;
        for e in 0..net.cnet.n_edges() {
            if net.cnet.is_boundary_edge(e) {
                continue;
            }
            if spokes.contains(&e) {
                spoke_c1 = spoke_c1.max(s.geometry_continuity_residual(e, 1).unwrap());
            } else {
                assert!(s.geometry_continuity_residual(e, 2).unwrap() < 1e-9, "edge {e}");
            }
        }
        assert!(spoke_c1 > 1e-3);
    }

    #[test]
    fn boundary_edge_is_rejected() {
        let net = nets::unit_square_grid(2);
        let s = build_c0(&net).unwrap();
        let e = (0..net.cnet.n_edges()).find(|&e| net.cnet.is_boundary_edge(e)).unwrap();
        assert!(s.geometry_continuity_residual(e, 0).is_err());
    }
}
