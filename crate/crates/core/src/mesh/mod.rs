//! Unstructured quadrilateral connectivity (the C-net) and control nets.
//!
//! Faces are stored as counterclockwise 4-tuples of vertex indices. Side `s`
//! of a face runs from corner `s` to corner `s + 1 (mod 4)`, and half-edge
//! `4 * face + s` is that directed side.

mod classify;
mod obj;

pub use classify::{ElementClass, VertexClass};
pub use obj::{load_obj, load_obj_file, write_obj, write_obj_file};

use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;

pub type Point3 = Vector3<f64>;

/// Undirected edge record. `vertices[0] -> vertices[1]` is the direction of
/// `half_edges[0]`; the twin (if any) runs the other way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub half_edges: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.half_edges[1].is_none()
    }

    pub fn other(&self, v: usize) -> usize {
        if self.vertices[0] == v {
            self.vertices[1]
        } else {
            self.vertices[0]
        }
    }
}

#[derive(Debug, Clone)]
pub struct CNet {
    n_vertices: usize,
    faces: Vec<[usize; 4]>,
    twin: Vec<Option<usize>>,
    half_edge_edge: Vec<usize>,
    edges: Vec<Edge>,
    /// Ordered fan of (face, corner) pairs around each vertex. For boundary
    /// vertices the fan starts at the face whose incoming side is a boundary edge.
    vertex_corners: Vec<Vec<(usize, usize)>>,
    vertex_edges: Vec<Vec<usize>>,
    vertex_boundary: Vec<bool>,
}

impl CNet {
    pub fn new(n_vertices: usize, faces: Vec<[usize; 4]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::Empty);
        }
        for (f, face) in faces.iter().enumerate() {
            for (i, &v) in face.iter().enumerate() {
                if v >= n_vertices {
                    return Err(Error::Topology(format!(
                        "face {f} references vertex {v} but only {n_vertices} vertices exist"
                    )));
                }
                if face[..i].contains(&v) {
                    return Err(Error::Topology(format!("face {f} repeats vertex {v}")));
                }
            }
        }

        let n_half = 4 * faces.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(n_half);
        for (f, face) in faces.iter().enumerate() {
            for s in 0..4 {
                let key = (face[s], face[(s + 1) % 4]);
                if directed.insert(key, 4 * f + s).is_some() {
                    return Err(Error::Topology(format!(
                        "directed edge {}->{} used twice (non-manifold edge or inconsistent orientation)",
                        key.0, key.1
                    )));
                }
            }
        }

        let mut twin = vec![None; n_half];
        let mut half_edge_edge = vec![usize::MAX; n_half];
        let mut edges = Vec::new();
        for h in 0..n_half {
            let (a, b) = (faces[h / 4][h % 4], faces[h / 4][(h % 4 + 1) % 4]);
            let t = directed.get(&(b, a)).copied();
            twin[h] = t;
            if half_edge_edge[h] != usize::MAX {
                continue;
            }
            let id = edges.len();
            half_edge_edge[h] = id;
            if let Some(t) = t {
                half_edge_edge[t] = id;
            }
            edges.push(Edge {
                vertices: [a, b],
                half_edges: [Some(h), t],
            });
        }

        let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
        for (f, face) in faces.iter().enumerate() {
            for (c, &v) in face.iter().enumerate() {
                incident[v].push((f, c));
            }
        }

        let mut vertex_corners = Vec::with_capacity(n_vertices);
        let mut vertex_edges = Vec::with_capacity(n_vertices);
        let mut vertex_boundary = Vec::with_capacity(n_vertices);
        for (v, corners) in incident.iter().enumerate() {
            if corners.is_empty() {
                return Err(Error::Topology(format!("vertex {v} is not used by any face")));
            }
            // a corner whose incoming side has no twin starts an open fan
            let starts: Vec<(usize, usize)> = corners
                .iter()
                .copied()
                .filter(|&(f, c)| twin[4 * f + (c + 3) % 4].is_none())
                .collect();
            if starts.len() > 1 {
                return Err(Error::Topology(format!(
                    "vertex {v} has a non-manifold fan ({} boundary gaps)",
                    starts.len()
                )));
            }
            let boundary = !starts.is_empty();
            let start = starts.first().copied().unwrap_or(corners[0]);
            let mut fan = vec![start];
            let mut fan_edges = Vec::new();
            let (mut f, mut c) = start;
            if boundary {
                fan_edges.push(half_edge_edge[4 * f + (c + 3) % 4]);
            }
            loop {
                let out = 4 * f + c;
                fan_edges.push(half_edge_edge[out]);
                match twin[out] {
                    None => break,
                    Some(t) => {
                        let (g, gc) = (t / 4, (t % 4 + 1) % 4);
                        if (g, gc) == start {
                            break;
                        }
                        if fan.len() > corners.len() {
                            return Err(Error::Topology(format!("vertex {v}: fan walk does not close")));
                        }
                        fan.push((g, gc));
                        f = g;
                        c = gc;
                    }
                }
            }
            if fan.len() != corners.len() {
                return Err(Error::Topology(format!(
                    "vertex {v} has {} incident faces but its fan reaches {}",
                    corners.len(),
                    fan.len()
                )));
            }
            vertex_corners.push(fan);
            vertex_edges.push(fan_edges);
            vertex_boundary.push(boundary);
        }

        Ok(Self {
            n_vertices,
            faces,
            twin,
            half_edge_edge,
            edges,
            vertex_corners,
            vertex_edges,
            vertex_boundary,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 4]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 4] {
        self.faces[f]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge id of side `s` of face `f`.
    pub fn face_edge(&self, f: usize, s: usize) -> usize {
        self.half_edge_edge[4 * f + s]
    }

    /// Face and side index across side `s` of face `f`.
    pub fn face_neighbor(&self, f: usize, s: usize) -> Option<(usize, usize)> {
        self.twin[4 * f + s].map(|t| (t / 4, t % 4))
    }

    pub fn half_edge_origin(&self, h: usize) -> usize {
        self.faces[h / 4][h % 4]
    }

    pub fn half_edge_target(&self, h: usize) -> usize {
        self.faces[h / 4][(h % 4 + 1) % 4]
    }

    /// Faces sharing side `e`, at most two.
    pub fn edge_faces(&self, e: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges[e].half_edges.iter().flatten().map(|&h| (h / 4, h % 4))
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.vertex_edges[a]
            .iter()
            .copied()
            .find(|&e| self.edges[e].other(a) == b)
    }

    pub fn valence(&self, v: usize) -> usize {
        self.vertex_corners[v].len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_boundary[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edges[e].is_boundary()
    }

    /// Ordered (face, corner) fan around `v`.
    pub fn vertex_corners(&self, v: usize) -> &[(usize, usize)] {
        &self.vertex_corners[v]
    }

    /// Edges incident to `v`, in fan order.
    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }

    /// The two boundary neighbors of a boundary vertex.
    pub fn boundary_neighbors(&self, v: usize) -> Option<[usize; 2]> {
        if !self.vertex_boundary[v] {
            return None;
        }
        let edges = &self.vertex_edges[v];
        let first = self.edges[edges[0]].other(v);
        let last = self.edges[*edges.last().unwrap()].other(v);
        Some([first, last])
    }

    /// Faces that share at least one vertex with `f`, excluding `f`.
    pub fn touching_faces(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.faces[f]
            .iter()
            .flat_map(|&v| self.vertex_corners[v].iter().map(|&(g, _)| g))
            .filter(|&g| g != f)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Euler characteristic V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn is_closed(&self) -> bool {
        self.edges.iter().all(|e| !e.is_boundary())
    }
}

/// A C-net with one control point per vertex.
#[derive(Debug, Clone)]
pub struct ControlNet {
    pub cnet: CNet,
    pub positions: Vec<Point3>,
}

impl ControlNet {
    pub fn new(cnet: CNet, positions: Vec<Point3>) -> Result<Self> {
        if positions.len() != cnet.n_vertices() {
            return Err(Error::Format(format!(
                "{} positions for {} vertices",
                positions.len(),
                cnet.n_vertices()
            )));
        }
        if let Some(v) = positions.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::Format(format!("vertex {v} has a non-finite coordinate")));
        }
        Ok(Self { cnet, positions })
    }

    pub fn from_faces(positions: Vec<Point3>, faces: Vec<[usize; 4]>) -> Result<Self> {
        let cnet = CNet::new(positions.len(), faces)?;
        Self::new(cnet, positions)
    }

    /// Same connectivity, positions mapped through `f`.
    pub fn map_positions(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        Self {
            cnet: self.cnet.clone(),
            positions: self.positions.iter().map(f).collect(),
        }
    }

    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }
}
