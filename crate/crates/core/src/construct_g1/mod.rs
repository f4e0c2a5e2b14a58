//! Tangent-plane continuous constructions on top of the bi-cubic one.
//!
//! Every basis function is degree elevated to bi-quintic on irregular
//! elements, and its Bernstein coefficients there are recomputed by an
//! equality-constrained least-squares problem: continuity equations across
//! edges shared by two elements in the unknown set, pinned coefficients
//! along the rest of its border, and fairing equations that keep the
//! coefficient differences of the elevated function.
//!
//! * `G1P` solves one problem per edge-connected component of irregular
//!   elements, for all functions touching it, so the basis stays polynomial
//!   and sums to one.
//! * `G1R` solves one problem per function over the irregular elements of its
//!   own support and normalizes the result (rational basis).

pub mod constrained_ls;

use crate::construct_c0::C0Surface;
use crate::error::{Error, Result};
use crate::evaluate::{omega, EdgePair, GSplineSurface, Variant};
use crate::extraction::{bicubic_to_biquintic, ElementExtraction};
use crate::local::rotated_index;
use crate::mesh::{CNet, ElementClass};
use constrained_ls::ConstrainedLs;
pub use constrained_ls::{solve_constrained_ls, ConstraintSystem, LsSolution};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

const P: usize = 5;
const NB: usize = 36;

/// Coefficients below this magnitude are dropped from the extraction rows.
const DROP_TOL: f64 = 1e-14;

/// Outcome of the solve that produced one basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDiagnostics {
    pub basis: usize,
    pub elements: Vec<usize>,
    pub n_unknowns: usize,
    pub n_equalities: usize,
    pub rank: usize,
    pub equality_residual: f64,
    pub ls_residual: f64,
    pub kkt_residual: f64,
}

/// Which of the two elements on an edge a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    /// The element whose rotated frame has the edge along its first axis.
    E,
    /// The element whose rotated frame has the edge along its second axis.
    H,
}

/// Linear equation over rotated-frame coefficients `(side, i, j)`.
pub type EdgeEquation = Vec<(EdgeSide, usize, usize, f64)>;

/// The six coefficient equations of the tangent-plane condition with
/// `b(v) = -2 ω1 (1-v)^2 + 2 ω2 v^2`, followed by the quartic-boundary equation.
pub fn g1_edge_equations(w1: f64, w2: f64) -> Vec<EdgeEquation> {
    use EdgeSide::{E, H};
    let d = |i: usize| (E, i, 0usize);
    let mut rows = Vec::with_capacity(7);
    // b(v) times the cubic reduction of the boundary derivative, degree 5
    let bterms: [Vec<(usize, f64)>; 6] = [
        vec![(1, -10.0 * w1), (0, 10.0 * w1)],
        vec![(2, -8.0 * w1), (1, 10.0 * w1), (0, -2.0 * w1)],
        vec![(4, -5.0 * w1), (3, 4.0 * w1), (5, w1), (1, w2), (0, -w2)],
        vec![(5, -w1), (4, w1), (2, 4.0 * w2), (1, -5.0 * w2), (0, w2)],
        vec![(4, 10.0 * w2), (3, -8.0 * w2), (5, -2.0 * w2)],
        vec![(5, 10.0 * w2), (4, -10.0 * w2)],
    ];
    for (k, bt) in bterms.iter().enumerate() {
        let mut row: EdgeEquation = vec![(H, 1, k, 5.0), (E, k, 1, 5.0)];
        let (s, i, j) = d(k);
        row.push((s, i, j, -10.0));
        for &(i, w) in bt {
            let (s, i, j) = d(i);
            row.push((s, i, j, w));
        }
        rows.push(row);
    }
    rows.push(
        [-1.0, 5.0, -10.0, 10.0, -5.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &w)| (E, i, 0, w))
            .collect(),
    );
    rows
}

/// Cross-derivative matching across an edge between two irregular elements
/// that is not a spoke edge.
pub fn c1_edge_equations() -> Vec<EdgeEquation> {
    use EdgeSide::{E, H};
    (0..=P)
        .map(|k| vec![(H, 1, k, 1.0), (E, k, 1, 1.0), (E, k, 0, -2.0)])
        .collect()
}

/// Rotated-frame indices `(i, j)` pinned along a side: the first `rows` rows.
pub fn c1_interface_slots(rows: usize) -> Vec<(usize, usize)> {
    (0..rows).flat_map(|j| (0..=P).map(move |i| (i, j))).collect()
}

/// Fairing rows over the 36 local coefficients: horizontal then vertical differences.
pub fn fairing_equations() -> Vec<[(usize, f64); 2]> {
    let slot = |i: usize, j: usize| (P + 1) * j + i;
    let mut rows = Vec::with_capacity(60);
    for j in 0..=P {
        for i in 0..P {
            rows.push([(slot(i, j), 1.0), (slot(i + 1, j), -1.0)]);
        }
    }
    for j in 0..P {
        for i in 0..=P {
            rows.push([(slot(i, j), 1.0), (slot(i, j + 1), -1.0)]);
        }
    }
    rows
}

/// Elevated bi-quintic coefficients (rows follow `ext.basis`).
pub fn elevate_extraction(ext: &ElementExtraction) -> DMatrix<f64> {
    assert_eq!(ext.degree, 3, "only bi-cubic rows are elevated");
    &ext.coeffs * bicubic_to_biquintic().transpose()
}

/// Elevated coefficients of every irregular element.
pub fn elevate_irregular(c0: &C0Surface) -> BTreeMap<usize, DMatrix<f64>> {
    c0.elements
        .iter()
        .enumerate()
        .filter(|(e, _)| c0.classes[*e] == ElementClass::Irregular)
        .map(|(e, ext)| (e, elevate_extraction(ext)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum SlotKey {
    Vertex(usize),
    /// Edge id and distance (in Bézier steps) from its lower-numbered vertex.
    Edge(usize, usize),
    Interior(usize, usize, usize),
}

fn slot_key(cnet: &CNet, f: usize, i: usize, j: usize) -> SlotKey {
    let q = cnet.face(f);
    let corner = match (i, j) {
        (0, 0) => Some(0),
        (P, 0) => Some(1),
        (P, P) => Some(2),
        (0, P) => Some(3),
        _ => None,
    };
    if let Some(c) = corner {
        return SlotKey::Vertex(q[c]);
    }
    let side = if j == 0 {
        Some((0, i))
    } else if i == P {
        Some((1, j))
    } else if j == P {
        Some((2, P - i))
    } else if i == 0 {
        Some((3, P - j))
    } else {
        None
    };
    match side {
        Some((s, t)) => {
            let (a, b) = (q[s], q[(s + 1) % 4]);
            let pos = if a < b { t } else { P - t };
            SlotKey::Edge(cnet.face_edge(f, s), pos)
        }
        None => SlotKey::Interior(f, i, j),
    }
}

/// Linear system over the unified coefficients of a set of irregular elements.
struct LocalSystem {
    elements: Vec<usize>,
    /// Unknown index of local column `k` of each element (same order as `elements`).
    columns: Vec<[usize; NB]>,
    n: usize,
    g: DMatrix<f64>,
    /// `None` for homogeneous rows, `Some(unknown)` for rows pinned to the reference.
    pinned: Vec<Option<usize>>,
    tags: Vec<Option<usize>>,
    f: DMatrix<f64>,
}

impl LocalSystem {
    fn build(cnet: &CNet, elements: &[usize]) -> Self {
        let mut keys: BTreeMap<SlotKey, usize> = BTreeMap::new();
        let mut columns = Vec::with_capacity(elements.len());
        for &f in elements {
            let mut cols = [0usize; NB];
            for (k, col) in cols.iter_mut().enumerate() {
                let key = slot_key(cnet, f, k % (P + 1), k / (P + 1));
                let next = keys.len();
                *col = *keys.entry(key).or_insert(next);
            }
            columns.push(cols);
        }
        let n = keys.len();
        let member: HashMap<usize, usize> = elements.iter().enumerate().map(|(r, &f)| (f, r)).collect();
        let col = |f: usize, k: usize, i: usize, j: usize| {
            let (a, b) = rotated_index(P, k, i, j);
            columns[member[&f]][(P + 1) * b + a]
        };

        let mut g_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut pinned = Vec::new();
        let mut tags = Vec::new();
        let spokes = cnet.spoke_edges();
        for &f in elements {
            for s in 0..4 {
                let edge = cnet.face_edge(f, s);
                match cnet.face_neighbor(f, s) {
                    Some((g, _)) if member.contains_key(&g) => {
                        // each shared edge once, from the face holding its first half-edge
                        if cnet.edge(edge).half_edges[0] != Some(4 * f + s) {
                            continue;
                        }
                        let pair = EdgePair::new(cnet, edge).expect("interior edge");
                        let eqs = if spokes.contains(&edge) {
                            g1_edge_equations(omega(cnet, pair.origin), omega(cnet, pair.end))
                        } else {
                            c1_edge_equations()
                        };
                        for eq in eqs {
                            let row = eq
                                .into_iter()
                                .map(|(side, i, j, w)| match side {
                                    EdgeSide::E => (col(pair.e, pair.k, i, j), w),
                                    EdgeSide::H => (col(pair.g, pair.m, i, j), w),
                                })
                                .collect();
                            g_rows.push(row);
                            pinned.push(None);
                            tags.push(Some(edge));
                        }
                    }
                    other => {
                        let rows = if other.is_some() { 2 } else { 1 };
                        // a spoke neighbor outside the set lies outside the support: C1 against zero
                        let vanish = other.is_some() && spokes.contains(&edge);
                        for (i, j) in c1_interface_slots(rows) {
                            let u = col(f, s, i, j);
                            g_rows.push(vec![(u, 1.0)]);
                            pinned.push(if vanish { None } else { Some(u) });
                            tags.push(Some(edge));
                        }
                    }
                }
            }
        }
        let mut g = DMatrix::zeros(g_rows.len(), n);
        for (r, row) in g_rows.iter().enumerate() {
            for &(u, w) in row {
                g[(r, u)] += w;
            }
        }
        let fair = fairing_equations();
        let mut f = DMatrix::zeros(fair.len() * elements.len(), n);
        for (r, cols) in columns.iter().enumerate() {
            for (q, row) in fair.iter().enumerate() {
                for &(k, w) in row {
                    f[(r * fair.len() + q, cols[k])] += w;
                }
            }
        }
        Self { elements: elements.to_vec(), columns, n, g, pinned, tags, f }
    }

    /// Elevated coefficients of one function gathered onto the unknowns.
    fn reference(&self, elevated: &BTreeMap<usize, DMatrix<f64>>, c0: &C0Surface, basis: usize) -> DVector<f64> {
        let mut c = DVector::zeros(self.n);
        for (r, &f) in self.elements.iter().enumerate() {
            if let Some(row) = c0.elements[f].row_of(basis) {
                for k in 0..NB {
                    c[self.columns[r][k]] = elevated[&f][(row, k)];
                }
            }
        }
        c
    }

    fn rhs(&self, reference: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let g = DVector::from_fn(self.pinned.len(), |r, _| self.pinned[r].map_or(0.0, |u| reference[u]));
        (g, &self.f * reference)
    }

    fn solve(&self, ls: &ConstrainedLs, reference: &DVector<f64>, basis: usize) -> Result<(DVector<f64>, BasisDiagnostics)> {
        let (g, f) = self.rhs(reference);
        let sol = ls.solve(&g, &f, Some(reference))?;
        let diag = BasisDiagnostics {
            basis,
            elements: self.elements.clone(),
            n_unknowns: self.n,
            n_equalities: ls.n_equalities(),
            rank: sol.rank,
            equality_residual: sol.equality_residual,
            ls_residual: sol.ls_residual,
            kkt_residual: sol.kkt_residual,
        };
        Ok((sol.c, diag))
    }
}

/// Edge-connected components of irregular elements.
fn irregular_components(cnet: &CNet, classes: &[ElementClass]) -> Vec<Vec<usize>> {
    let mut comp = vec![usize::MAX; cnet.n_faces()];
    let mut out = Vec::new();
    for start in 0..cnet.n_faces() {
        if classes[start] != ElementClass::Irregular || comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        comp[start] = id;
        while let Some(f) = stack.pop() {
            members.push(f);
            for s in 0..4 {
                if let Some((g, _)) = cnet.face_neighbor(f, s) {
                    if classes[g] == ElementClass::Irregular && comp[g] == usize::MAX {
                        comp[g] = id;
                        stack.push(g);
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Per-element accumulation of solved rows: element -> (basis -> 36 coefficients).
type Rows = BTreeMap<usize, BTreeMap<usize, Vec<f64>>>;

fn scatter(rows: &mut Rows, sys: &LocalSystem, basis: usize, c: &DVector<f64>) {
    for (r, &f) in sys.elements.iter().enumerate() {
        let vals: Vec<f64> = (0..NB).map(|k| c[sys.columns[r][k]]).collect();
        if vals.iter().any(|v| v.abs() > DROP_TOL) {
            rows.entry(f).or_default().insert(basis, vals);
        }
    }
}

fn extraction_from_rows(element: usize, rows: &BTreeMap<usize, Vec<f64>>, rational: bool) -> ElementExtraction {
    let basis: Vec<usize> = rows.keys().copied().collect();
    let coeffs = DMatrix::from_fn(basis.len(), NB, |r, k| {
        let v = rows[&basis[r]][k];
        if v.abs() > DROP_TOL {
            v
        } else {
            0.0
        }
    });
    ElementExtraction { element, degree: P, basis, coeffs, rational }
}

pub fn build_g1(c0: &C0Surface, variant: Variant) -> Result<GSplineSurface> {
    let cnet = &c0.net.cnet;
    let classes = c0.classes.clone();
    let elevated = elevate_irregular(c0);
    let solved: Vec<(Rows, Vec<BasisDiagnostics>)> = match variant {
        Variant::C0 => return Ok(c0.0.clone()),
        Variant::G1P => irregular_components(cnet, &classes)
            .par_iter()
            .map(|comp| {
                let sys = LocalSystem::build(cnet, comp);
                let ls = ConstrainedLs::factor(&sys.g, &sys.f, sys.tags.clone());
                let functions: BTreeSet<usize> =
                    comp.iter().flat_map(|&f| c0.elements[f].basis.iter().copied()).collect();
                let mut rows = Rows::new();
                let mut diags = Vec::with_capacity(functions.len());
                for a in functions {
                    let reference = sys.reference(&elevated, c0, a);
                    let (c, d) = sys.solve(&ls, &reference, a)?;
                    scatter(&mut rows, &sys, a, &c);
                    diags.push(d);
                }
                Ok((rows, diags))
            })
            .collect::<Result<_>>()?,
        Variant::G1R => {
            let mut support: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (&f, _) in elevated.iter() {
                for &a in &c0.elements[f].basis {
                    support.entry(a).or_default().push(f);
                }
            }
            support
                .into_par_iter()
                .map(|(a, elems)| {
                    let sys = LocalSystem::build(cnet, &elems);
                    let ls = ConstrainedLs::factor(&sys.g, &sys.f, sys.tags.clone());
                    let reference = sys.reference(&elevated, c0, a);
                    let (c, d) = sys.solve(&ls, &reference, a)?;
                    let mut rows = Rows::new();
                    scatter(&mut rows, &sys, a, &c);
                    Ok((rows, vec![d]))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut rows = Rows::new();
    let mut diagnostics = Vec::new();
    for (r, d) in solved {
        for (f, per) in r {
            rows.entry(f).or_default().extend(per);
        }
        diagnostics.extend(d);
    }
    diagnostics.sort_by_key(|d| d.basis);
    let rational = variant == Variant::G1R;
    let elements = (0..cnet.n_faces())
        .map(|f| {
            if classes[f] == ElementClass::Irregular {
                let per = rows.remove(&f).ok_or_else(|| Error::Internal(format!("irregular element {f} not solved")))?;
                Ok(extraction_from_rows(f, &per, rational))
            } else {
                Ok(c0.elements[f].clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GSplineSurface {
        net: c0.net.clone(),
        elements,
        variant,
        classes,
        diagnostics,
    })
}

/// Builds any of the three constructions from a control net.
pub fn build(net: &crate::mesh::ControlNet, variant: Variant) -> Result<GSplineSurface> {
    let c0 = crate::construct_c0::build_c0(net)?;
    match variant {
        Variant::C0 => Ok(c0.into_inner()),
        v => build_g1(&c0, v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct_c0::build_c0;
    use crate::extraction::bernstein_1d_derivs;
    use crate::nets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the tangent-plane condition from the two
    /// rotated-frame coefficient grids `ce[i][j]`, `ch[i][j]`.
    fn direct_residual(w1: f64, w2: f64, ce: &[[f64; 6]; 6], ch: &[[f64; 6]; 6], v: f64) -> f64 {
        let [b, db, _] = bernstein_1d_derivs(5, v);
        let [b0, db0, _] = bernstein_1d_derivs(5, 0.0);
        // ∂_u of H at (0, v): sum_i db0[i] * sum_j ch[i][j] b[j]
        let mut hu = 0.0;
        let mut eu = 0.0;
        let mut ev = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                hu += db0[i] * b[j] * ch[i][j];
                eu += db[i] * b0[j] * ce[i][j];
                ev += b[i] * db0[j] * ce[i][j];
            }
        }
        let bv = -2.0 * w1 * (1.0 - v).powi(2) + 2.0 * w2 * v * v;
        hu + bv * eu + ev
    }

    fn eval_equations(eqs: &[EdgeEquation], ce: &[[f64; 6]; 6], ch: &[[f64; 6]; 6]) -> Vec<f64> {
        eqs.iter()
            .map(|eq| {
                eq.iter()
                    .map(|&(s, i, j, w)| w * if s == EdgeSide::E { ce[i][j] } else { ch[i][j] })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constants_satisfy_the_edge_equations() {
        let ones = [[1.0; 6]; 6];
        for eq in eval_equations(&g1_edge_equations(0.3, -0.7), &ones, &ones) {
            assert!(eq.abs() < 1e-14);
        }
        for eq in eval_equations(&c1_edge_equations(), &ones, &ones) {
            assert!(eq.abs() < 1e-14);
        }
    }

    #[test]
    fn regular_vertex_drops_its_term() {
        let w = (2.0 * std::f64::consts::PI / 4.0).cos();
        assert!(w.abs() < 1e-15);
        let eqs = g1_edge_equations(w, 0.4);
        assert!(eqs[0].iter().filter(|t| t.3 != 0.0 && t.3.abs() < 1e-12).count() == 2);
    }

    #[test]
    fn coefficient_equations_match_direct_evaluation() {
        // a quartic shared boundary curve makes the equations exact
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let (w1, w2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut ce = [[0.0; 6]; 6];
            let mut ch = [[0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    ce[i][j] = rng.gen_range(-1.0..1.0);
                    ch[i][j] = rng.gen_range(-1.0..1.0);
                }
            }
            // elevate a random quartic for the boundary row, share it with H's first column
            let quartic: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..6 {
                let a = i as f64 / 5.0;
                let lo = if i > 0 { quartic[i - 1] } else { 0.0 };
                let hi = if i < 5 { quartic[i] } else { 0.0 };
                ce[i][0] = a * lo + (1.0 - a) * hi;
                ch[0][i] = ce[i][0];
            }
            let eqs = eval_equations(&g1_edge_equations(w1, w2), &ce, &ch);
            assert!(eqs[6].abs() < 1e-13, "quartic condition");
            // residual polynomial in Bernstein form has coefficients eqs[0..6]
            for s in 0..50 {
                let v = s as f64 / 49.0;
                let [b, _, _] = bernstein_1d_derivs(5, v);
                let bern: f64 = (0..6).map(|k| eqs[k] * b[k]).sum();
                assert!((bern - direct_residual(w1, w2, &ce, &ch, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slot_keys_are_shared_across_edges() {
        let net = nets::fan(5, 1, 0.0);
        let cnet = &net.cnet;
        for edge in 0..cnet.n_edges() {
            let Ok(p) = EdgePair::new(cnet, edge) else { continue };
            for t in 0..=P {
                let (a, b) = rotated_index(P, p.k, t, 0);
                let (c, d) = rotated_index(P, p.m, 0, t);
                assert_eq!(slot_key(cnet, p.e, a, b), slot_key(cnet, p.g, c, d));
            }
        }
    }

    #[test]
    fn fairing_alone_reproduces_the_elevated_function() {
        let net = nets::fan(3, 2, 0.5);
        let c0 = build_c0(&net).unwrap();
        let elevated = elevate_irregular(&c0);
        let elems: Vec<usize> = elevated.keys().copied().collect();
        let sys = LocalSystem::build(&net.cnet, &elems);
        let reference = sys.reference(&elevated, &c0, 0);
        let ls = ConstrainedLs::factor(&DMatrix::zeros(0, sys.n), &sys.f, vec![]);
        let sol = ls.solve(&DVector::zeros(0), &(&sys.f * &reference), Some(&reference)).unwrap();
        assert!((sol.c - reference).amax() < 1e-12);
    }

    #[test]
    fn no_extraordinary_points_means_no_change() {
        let net = nets::unit_square_grid(4);
        let c0 = build_c0(&net).unwrap();
        for v in [Variant::G1P, Variant::G1R] {
            let s = build_g1(&c0, v).unwrap();
            for (a, b) in s.elements.iter().zip(&c0.elements) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn irregular_elements_become_quintic() {
        let net = nets::fan(5, 3, 0.3);
        let s = build(&net, Variant::G1P).unwrap();
        for (f, ext) in s.elements.iter().enumerate() {
            let expected = if s.classes[f] == ElementClass::Irregular { 5 } else { 3 };
            assert_eq!(ext.degree, expected);
            assert!(!ext.rational);
        }
        let r = build(&net, Variant::G1R).unwrap();
        assert!(r.elements.iter().all(|e| e.rational == (e.degree == 5)));
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn partition_of_unity_g1p() {
        for net in [nets::flipped_grid(6, 0.4), nets::cube(1, 1.0), nets::boundary_fan(3, 3, 0.2)] {
            let s = build(&net, Variant::G1P).unwrap();
            for ext in &s.elements {
                for c in ext.column_sums().iter() {
                    assert!((c - 1.0).abs() < 1e-10, "column sum {c}");
                }
            }
        }
    }

    #[test]
    fn tangent_plane_continuity_on_spokes() {
        let net = nets::fan(5, 2, 0.6);
        for v in [Variant::G1P, Variant::G1R] {
            let s = build(&net, v).unwrap();
            for e in net.cnet.spoke_edges() {
                if net.cnet.is_boundary_edge(e) {
                    continue;
                }
                let r = crate::evaluate::g1_residual(&s, e, 50).unwrap();
                assert!(r < 1e-8, "{v} edge {e}: {r}");
            }
        }
    }
}
