//! The geometric map, surface frames, Bézier mesh sampling and numerical
//! continuity checks across element boundaries.

use crate::construct_g1::BasisDiagnostics;
use crate::error::{Error, Result};
use crate::extraction::{bernstein_eval, BasisValues, ElementExtraction};
use crate::local::{rotate_gradient, rotate_hessian, rotated_param};
use crate::mesh::{CNet, ControlNet, ElementClass, Point3};
use nalgebra::{DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    C0,
    G1P,
    G1R,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::C0, Variant::G1P, Variant::G1R];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::C0 => "C0",
            Variant::G1P => "G1P",
            Variant::G1R => "G1R",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c0" => Ok(Variant::C0),
            "g1p" => Ok(Variant::G1P),
            "g1r" => Ok(Variant::G1R),
            other => Err(Error::Format(format!("unknown construction {other:?}"))),
        }
    }
}

/// Control net plus per-element extraction operators.
#[derive(Debug, Clone)]
pub struct GSplineSurface {
    pub net: ControlNet,
    pub elements: Vec<ElementExtraction>,
    pub variant: Variant,
    pub classes: Vec<ElementClass>,
    pub diagnostics: Vec<BasisDiagnostics>,
}

/// Point and parametric derivatives of the geometric map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapDerivatives {
    pub x: Point3,
    pub x_xi: Point3,
    pub x_eta: Point3,
    pub x_xi_xi: Point3,
    pub x_xi_eta: Point3,
    pub x_eta_eta: Point3,
}

/// Tangents, unit normal, metric and curvature coefficients at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub x: Point3,
    pub a1: Point3,
    pub a2: Point3,
    pub a3: Point3,
    /// Covariant metric `a_{αβ}`.
    pub a: Matrix2<f64>,
    /// Curvature coefficients `b_{αβ}`.
    pub b: Matrix2<f64>,
}

impl SurfaceFrame {
    pub fn from_derivatives(d: &MapDerivatives, tol: f64) -> Option<Self> {
        let n = d.x_xi.cross(&d.x_eta);
        let len = n.norm();
        if !(len > tol) {
            return None;
        }
        let a3 = n / len;
        let a = Matrix2::new(
            d.x_xi.dot(&d.x_xi),
            d.x_xi.dot(&d.x_eta),
            d.x_eta.dot(&d.x_xi),
            d.x_eta.dot(&d.x_eta),
        );
        let b = Matrix2::new(
            d.x_xi_xi.dot(&a3),
            d.x_xi_eta.dot(&a3),
            d.x_xi_eta.dot(&a3),
            d.x_eta_eta.dot(&a3),
        );
        Some(Self { x: d.x, a1: d.x_xi, a2: d.x_eta, a3, a, b })
    }

    /// Mean and Gaussian curvature.
    pub fn mean_gauss(&self) -> (f64, f64) {
        let det_a = self.a.determinant();
        let k = self.b.determinant() / det_a;
        let h = (self.a[(0, 0)] * self.b[(1, 1)] - 2.0 * self.a[(0, 1)] * self.b[(0, 1)]
            + self.a[(1, 1)] * self.b[(0, 0)])
            / (2.0 * det_a);
        (h, k)
    }

    /// Principal curvatures, larger first.
    pub fn principal_curvatures(&self) -> (f64, f64) {
        let (h, k) = self.mean_gauss();
        let d = (h * h - k).max(0.0).sqrt();
        (h + d, h - d)
    }
}

/// Tensor samples of every element: `(resolution + 1)^2` points per element.
#[derive(Debug, Clone)]
pub struct SampledMesh {
    pub resolution: usize,
    pub positions: Vec<Point3>,
    pub quads: Vec<[usize; 4]>,
}

impl SampledMesh {
    pub fn write_obj<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for p in &self.positions {
            writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
        }
        for q in &self.quads {
            writeln!(out, "f {} {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1)?;
        }
        Ok(())
    }
}

/// Per-element Bézier control points; `weights` is set for rational elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierElement {
    pub element: usize,
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
}

impl GSplineSurface {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_basis(&self) -> usize {
        self.net.cnet.n_vertices()
    }

    pub fn cnet(&self) -> &CNet {
        &self.net.cnet
    }

    /// Same extraction operators with new control points.
    pub fn with_positions(&self, positions: Vec<Point3>) -> Result<Self> {
        let net = ControlNet::new(self.net.cnet.clone(), positions)?;
        Ok(Self { net, ..self.clone() })
    }

    pub fn basis(&self, e: usize, xi: f64, eta: f64) -> Result<BasisValues> {
        self.elements[e].evaluate_basis(xi, eta)
    }

    pub fn map_derivatives(&self, e: usize, xi: f64, eta: f64) -> Result<MapDerivatives> {
        let ext = &self.elements[e];
        let n = ext.evaluate_basis(xi, eta)?;
        let combine = |w: &DVector<f64>| -> Point3 {
            ext.basis
                .iter()
                .zip(w.iter())
                .map(|(&a, &c)| self.net.positions[a] * c)
                .sum()
        };
        Ok(MapDerivatives {
            x: combine(&n.value),
            x_xi: combine(&n.d_xi),
            x_eta: combine(&n.d_eta),
            x_xi_xi: combine(&n.d_xi_xi),
            x_xi_eta: combine(&n.d_xi_eta),
            x_eta_eta: combine(&n.d_eta_eta),
        })
    }

    pub fn map_point(&self, e: usize, xi: f64, eta: f64) -> Result<Point3> {
        let ext = &self.elements[e];
        let b = bernstein_eval(ext.degree, xi, eta)?;
        let n = &ext.coeffs * &b.value;
        let w = if ext.rational { n.sum() } else { 1.0 };
        if ext.rational && !(w > 0.0) {
            return Err(Error::DegenerateBasis { element: e, denominator: w });
        }
        let p: Point3 = ext
            .basis
            .iter()
            .zip(n.iter())
            .map(|(&a, &c)| self.net.positions[a] * c)
            .sum();
        Ok(p / w)
    }

    /// Tolerance on `|a1 x a2|` below which the parameterization counts as singular.
    pub fn singular_tolerance(&self) -> f64 {
        let d = self.net.bounding_box_diagonal();
        1e-12 * d * d
    }

    pub fn frame(&self, e: usize, xi: f64, eta: f64) -> Result<SurfaceFrame> {
        let d = self.map_derivatives(e, xi, eta)?;
        SurfaceFrame::from_derivatives(&d, self.singular_tolerance())
            .ok_or(Error::SingularParameterization { element: e, xi, eta })
    }

    /// Bézier control points `B = C^T P` of one element; for rational elements
    /// the points are projected (divided by their weight) and the weights kept.
    pub fn bezier_element(&self, e: usize) -> BezierElement {
        let ext = &self.elements[e];
        let mut points = Vec::with_capacity(ext.n_bernstein());
        let mut weights = Vec::with_capacity(ext.n_bernstein());
        for k in 0..ext.n_bernstein() {
            let col = ext.coeffs.column(k);
            let p: Point3 = ext.basis.iter().zip(col.iter()).map(|(&a, &c)| self.net.positions[a] * c).sum();
            let w = col.sum();
            let p = if ext.rational { p / w } else { p };
            points.push([p.x, p.y, p.z]);
            weights.push(w);
        }
        BezierElement {
            element: e,
            degree: ext.degree,
            points,
            weights: ext.rational.then_some(weights),
        }
    }

    pub fn bezier_elements(&self) -> Vec<BezierElement> {
        (0..self.n_elements()).map(|e| self.bezier_element(e)).collect()
    }

    /// Uniform tensor sampling of every element.
    pub fn sample_bezier_mesh(&self, resolution: usize) -> Result<SampledMesh> {
        let r = resolution.max(1);
        let per: Vec<Vec<Point3>> = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let mut pts = Vec::with_capacity((r + 1) * (r + 1));
                for j in 0..=r {
                    for i in 0..=r {
                        pts.push(self.map_point(e, i as f64 / r as f64, j as f64 / r as f64)?);
                    }
                }
                Ok(pts)
            })
            .collect::<Result<_>>()?;
        let mut positions = Vec::with_capacity(per.len() * (r + 1) * (r + 1));
        let mut quads = Vec::with_capacity(per.len() * r * r);
        for pts in per {
            let base = positions.len();
            let id = |i: usize, j: usize| base + j * (r + 1) + i;
            for j in 0..r {
                for i in 0..r {
                    quads.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
            positions.extend(pts);
        }
        Ok(SampledMesh { resolution: r, positions, quads })
    }

    /// Mean of the two diagonal lengths of each element, averaged over elements.
    pub fn mean_element_size(&self) -> Result<f64> {
        let mut sum = 0.0;
        for e in 0..self.n_elements() {
            let c = [
                self.map_point(e, 0.0, 0.0)?,
                self.map_point(e, 1.0, 0.0)?,
                self.map_point(e, 1.0, 1.0)?,
                self.map_point(e, 0.0, 1.0)?,
            ];
            sum += 0.5 * ((c[2] - c[0]).norm() + (c[3] - c[1]).norm());
        }
        Ok(sum / self.n_elements() as f64)
    }
}

/// The two elements on an interior edge in the frames used for all
/// cross-edge checks: element `e` in its frame rotated to corner `k`, where
/// the edge runs along the first axis from vertex `A` (origin), and element
/// `g` in its frame rotated to corner `m`, where the edge runs along the
/// second axis from the same vertex `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgePair {
    pub e: usize,
    pub k: usize,
    pub g: usize,
    pub m: usize,
    /// Vertex at the common origin.
    pub origin: usize,
    /// Vertex at the other end.
    pub end: usize,
}

impl EdgePair {
    pub fn new(cnet: &CNet, edge: usize) -> Result<Self> {
        let rec = cnet.edge(edge);
        let (Some(h0), Some(h1)) = (rec.half_edges[0], rec.half_edges[1]) else {
            return Err(Error::Domain(format!("edge {edge} lies on the boundary")));
        };
        let (e, k) = (h0 / 4, h0 % 4);
        let (g, t) = (h1 / 4, h1 % 4);
        Ok(Self {
            e,
            k,
            g,
            m: (t + 1) % 4,
            origin: cnet.half_edge_origin(h0),
            end: cnet.half_edge_target(h0),
        })
    }

    /// The same edge seen from the other end (vertex `end` becomes the origin).
    pub fn reversed(&self) -> Self {
        Self {
            e: self.g,
            k: (self.m + 3) % 4,
            g: self.e,
            m: (self.k + 1) % 4,
            origin: self.end,
            end: self.origin,
        }
    }
}

/// Basis values and rotated derivatives of one element, keyed by basis id.
struct RotatedSample {
    v: f64,
    du: f64,
    dv: f64,
    duu: f64,
    duv: f64,
    dvv: f64,
}

fn rotated_samples(
    surface: &GSplineSurface,
    e: usize,
    k: usize,
    u: f64,
    v: f64,
) -> Result<BTreeMap<usize, RotatedSample>> {
    let (x, y) = rotated_param(k, u, v);
    let n = surface.basis(e, x, y)?;
    Ok(surface.elements[e]
        .basis
        .iter()
        .enumerate()
        .map(|(r, &a)| {
            let (du, dv) = rotate_gradient(k, n.d_xi[r], n.d_eta[r]);
            let (duu, duv, dvv) = rotate_hessian(k, n.d_xi_xi[r], n.d_xi_eta[r], n.d_eta_eta[r]);
            (a, RotatedSample { v: n.value[r], du, dv, duu, duv, dvv })
        })
        .collect())
}

const ZERO_SAMPLE: RotatedSample = RotatedSample { v: 0.0, du: 0.0, dv: 0.0, duu: 0.0, duv: 0.0, dvv: 0.0 };

/// Largest jump of the 0th, 1st or 2nd derivatives of any basis function
/// across interior edge `edge`, using the shared parameterization of the two
/// elements, over `samples` points along the edge.
pub fn basis_jump(surface: &GSplineSurface, edge: usize, order: usize, samples: usize) -> Result<f64> {
    let pair = EdgePair::new(surface.cnet(), edge)?;
    let mut worst = 0.0f64;
    for s in 0..samples {
        let t = s as f64 / (samples - 1).max(1) as f64;
        let se = rotated_samples(surface, pair.e, pair.k, t, 0.0)?;
        let sg = rotated_samples(surface, pair.g, pair.m, 0.0, t)?;
        let ids: std::collections::BTreeSet<usize> = se.keys().chain(sg.keys()).copied().collect();
        for a in ids {
            let p = se.get(&a).unwrap_or(&ZERO_SAMPLE);
            let q = sg.get(&a).unwrap_or(&ZERO_SAMPLE);
            let jump = match order {
                0 => (p.v - q.v).abs(),
                1 => (p.du - q.dv).abs().max((p.dv + q.du).abs()),
                2 => (p.duu - q.dvv).abs().max((p.duv + q.duv).abs()).max((p.dvv - q.duu).abs()),
                _ => return Err(Error::Domain(format!("continuity order {order} not supported"))),
            };
            worst = worst.max(jump);
        }
    }
    Ok(worst)
}

/// `ω = cos(aπ/μ)` with `a = 2` for interior and `a = 1` for boundary vertices.
pub fn omega(cnet: &CNet, v: usize) -> f64 {
    let a = if cnet.is_boundary_vertex(v) { 1.0 } else { 2.0 };
    (a * std::f64::consts::PI / cnet.valence(v) as f64).cos()
}

/// Largest residual of the tangent-plane continuity condition across a spoke
/// edge, over every basis function and `samples` points, relative to the
/// largest basis-gradient magnitude seen.
pub fn g1_residual(surface: &GSplineSurface, edge: usize, samples: usize) -> Result<f64> {
    let cnet = surface.cnet();
    let pair = EdgePair::new(cnet, edge)?;
    let (w1, w2) = (omega(cnet, pair.origin), omega(cnet, pair.end));
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for s in 0..samples {
        let t = s as f64 / (samples - 1).max(1) as f64;
        let b = -2.0 * w1 * (1.0 - t) * (1.0 - t) + 2.0 * w2 * t * t;
        let se = rotated_samples(surface, pair.e, pair.k, t, 0.0)?;
        let sg = rotated_samples(surface, pair.g, pair.m, 0.0, t)?;
        let ids: std::collections::BTreeSet<usize> = se.keys().chain(sg.keys()).copied().collect();
        for a in ids {
            let p = se.get(&a).unwrap_or(&ZERO_SAMPLE);
            let q = sg.get(&a).unwrap_or(&ZERO_SAMPLE);
            scale = scale.max(p.du.hypot(p.dv)).max(q.du.hypot(q.dv));
            worst = worst.max((q.du + b * p.du + p.dv).abs());
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Largest distance between the two sides' samples of every interior edge.
pub fn watertight_residual(surface: &GSplineSurface, samples: usize) -> Result<f64> {
    let cnet = surface.cnet();
    let edges: Vec<usize> = (0..cnet.n_edges()).filter(|&e| !cnet.is_boundary_edge(e)).collect();
    let per: Vec<f64> = edges
        .par_iter()
        .map(|&edge| {
            let pair = EdgePair::new(cnet, edge)?;
            let mut worst = 0.0f64;
            for s in 0..samples {
                let t = s as f64 / (samples - 1).max(1) as f64;
                let (x, y) = rotated_param(pair.k, t, 0.0);
                let (xg, yg) = rotated_param(pair.m, 0.0, t);
                let d = surface.map_point(pair.e, x, y)? - surface.map_point(pair.g, xg, yg)?;
                worst = worst.max(d.norm());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// Largest angle (radians) between the normals of the two elements sharing `edge`.
pub fn normal_jump(surface: &GSplineSurface, edge: usize, samples: usize) -> Result<f64> {
    let pair = EdgePair::new(surface.cnet(), edge)?;
    let mut worst = 0.0f64;
    for s in 0..samples {
        let t = s as f64 / (samples - 1).max(1) as f64;
        let (x, y) = rotated_param(pair.k, t, 0.0);
        let (xg, yg) = rotated_param(pair.m, 0.0, t);
        let n1 = surface.frame(pair.e, x, y)?.a3;
        let n2 = surface.frame(pair.g, xg, yg)?.a3;
        let angle = n1.cross(&n2).norm().atan2(n1.dot(&n2));
        worst = worst.max(angle);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct_c0::build_c0;
    use crate::nets;

    #[test]
    fn variant_parsing() {
        assert_eq!("g1p".parse::<Variant>().unwrap(), Variant::G1P);
        assert_eq!("C0".parse::<Variant>().unwrap(), Variant::C0);
        assert!("g2".parse::<Variant>().is_err());
        assert_eq!(Variant::G1R.to_string(), "G1R");
    }

    #[test]
    fn planar_net_maps_to_plane() {
        let s = build_c0(&nets::flipped_grid(6, 0.0)).unwrap().0;
        for e in 0..s.n_elements() {
            for (x, y) in [(0.1, 0.2), (0.5, 0.5), (1.0, 0.3)] {
                assert!(s.map_point(e, x, y).unwrap().z.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frame_metric_matches_finite_differences() {
        let s = build_c0(&nets::fan(5, 2, 0.8)).unwrap().0;
        let h = 1e-6;
        for e in [0, 3, 7] {
            let (x, y) = (0.4, 0.7);
            let f = s.frame(e, x, y).unwrap();
            let a1 = (s.map_point(e, x + h, y).unwrap() - s.map_point(e, x - h, y).unwrap()) / (2.0 * h);
            let a2 = (s.map_point(e, x, y + h).unwrap() - s.map_point(e, x, y - h).unwrap()) / (2.0 * h);
            assert!((f.a[(0, 0)] - a1.dot(&a1)).abs() < 1e-6);
            assert!((f.a[(0, 1)] - a1.dot(&a2)).abs() < 1e-6);
            assert!((f.a[(1, 1)] - a2.dot(&a2)).abs() < 1e-6);
            assert!(f.a3.dot(&f.a1).abs() < 1e-12 && (f.a3.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_plate_has_no_curvature() {
        let s = build_c0(&nets::unit_square_grid(3)).unwrap().0;
        let f = s.frame(4, 0.3, 0.8).unwrap();
        assert!(f.b.amax() < 1e-14);
    }

    #[test]
    fn collapsed_net_is_singular() {
        let net = nets::unit_square_grid(2).map_positions(|p| Point3::new(p.x, 0.0, 0.0));
        let s = build_c0(&net).unwrap().0;
        assert!(matches!(s.frame(0, 0.5, 0.5), Err(Error::SingularParameterization { .. })));
    }

    #[test]
    fn edge_pair_reversal_is_consistent() {
        let net = nets::flipped_grid(6, 0.0);
        let s = build_c0(&net).unwrap().0;
        for edge in 0..net.cnet.n_edges() {
            let Ok(p) = EdgePair::new(&net.cnet, edge) else { continue };
            let r = p.reversed();
            let (x, y) = rotated_param(p.k, 0.3, 0.0);
            let (xr, yr) = rotated_param(r.m, 0.0, 0.7);
            let d = s.map_point(p.e, x, y).unwrap() - s.map_point(r.g, xr, yr).unwrap();
            assert!(d.norm() < 1e-14);
            assert_eq!(r.reversed(), p);
        }
    }

    #[test]
    fn bezier_mesh_sampling_counts() {
        let s = build_c0(&nets::unit_square_grid(2)).unwrap().0;
        let m = s.sample_bezier_mesh(4).unwrap();
        assert_eq!(m.positions.len(), 4 * 25);
        assert_eq!(m.quads.len(), 4 * 16);
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        assert!(crate::mesh::load_obj(&buf).is_ok());
    }
}
