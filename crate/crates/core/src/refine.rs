//! Global uniform refinement: every face is split into four and the control
//! points are updated with Catmull-Clark type masks extended to boundaries.
//! No refinement history is kept; the refined net is an ordinary net.

use crate::error::{Error, Result};
use crate::mesh::{CNet, ControlNet, Point3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MAX_LEVELS: usize = 8;

/// Counts after each refinement level (level 0 is the input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub level: usize,
    pub vertices: usize,
    pub faces: usize,
    pub extraordinary: usize,
}

impl LevelCounts {
    pub fn of(level: usize, net: &ControlNet) -> Self {
        Self {
            level,
            vertices: net.cnet.n_vertices(),
            faces: net.cnet.n_faces(),
            extraordinary: net.cnet.extraordinary_vertices().len(),
        }
    }
}

type Mask = Vec<(usize, f64)>;

fn apply(mask: &Mask, positions: &[Point3]) -> Point3 {
    debug_assert!((mask.iter().map(|m| m.1).sum::<f64>() - 1.0).abs() < 1e-12);
    mask.iter().map(|&(v, w)| positions[v] * w).sum()
}

fn face_mask(cnet: &CNet, f: usize) -> Mask {
    cnet.face(f).iter().map(|&v| (v, 0.25)).collect()
}

fn edge_mask(cnet: &CNet, e: usize) -> Mask {
    let rec = cnet.edge(e);
    let [a, b] = rec.vertices;
    if rec.is_boundary() {
        return vec![(a, 0.5), (b, 0.5)];
    }
    // shift toward a boundary endpoint according to its valence
    let shift = |v: usize| {
        if cnet.is_boundary_vertex(v) {
            0.25 * (PI / cnet.valence(v) as f64).cos()
        } else {
            0.0
        }
    };
    let d = shift(a) - shift(b);
    let mut mask = vec![(a, 0.375 + d), (b, 0.375 - d)];
    for (f, s) in cnet.edge_faces(e) {
        let q = cnet.face(f);
        mask.push((q[(s + 2) % 4], 1.0 / 16.0));
        mask.push((q[(s + 3) % 4], 1.0 / 16.0));
    }
    mask
}

fn vertex_mask(cnet: &CNet, v: usize) -> Mask {
    if cnet.is_boundary_vertex(v) {
        if cnet.valence(v) == 1 {
            return vec![(v, 1.0)];
        }
        let [a, b] = cnet.boundary_neighbors(v).expect("boundary vertex");
        return vec![(v, 0.75), (a, 0.125), (b, 0.125)];
    }
    let mu = cnet.valence(v) as f64;
    let mut mask = vec![(v, 1.0 - 7.0 / (4.0 * mu))];
    for &(f, c) in cnet.vertex_corners(v) {
        let q = cnet.face(f);
        mask.push((q[(c + 1) % 4], 3.0 / (2.0 * mu * mu)));
        mask.push((q[(c + 2) % 4], 1.0 / (4.0 * mu * mu)));
    }
    mask
}

/// Refined connectivity: old vertices keep their ids, then one vertex per
/// face, then one per edge. Child `k` of face `f` is face `4 f + k`.
pub fn refine_cnet(cnet: &CNet) -> Result<CNet> {
    let (nv, nf) = (cnet.n_vertices(), cnet.n_faces());
    let mut faces = Vec::with_capacity(4 * nf);
    for f in 0..nf {
        let q = cnet.face(f);
        let center = nv + f;
        for k in 0..4 {
            let next = nv + nf + cnet.face_edge(f, k);
            let prev = nv + nf + cnet.face_edge(f, (k + 3) % 4);
            faces.push([q[k], next, center, prev]);
        }
    }
    CNet::new(nv + nf + cnet.n_edges(), faces)
}

pub fn refine(net: &ControlNet) -> Result<ControlNet> {
    let cnet = &net.cnet;
    let (nv, nf, ne) = (cnet.n_vertices(), cnet.n_faces(), cnet.n_edges());
    let positions: Vec<Point3> = (0..nv + nf + ne)
        .into_par_iter()
        .map(|i| {
            let mask = if i < nv {
                vertex_mask(cnet, i)
            } else if i < nv + nf {
                face_mask(cnet, i - nv)
            } else {
                edge_mask(cnet, i - nv - nf)
            };
            apply(&mask, &net.positions)
        })
        .collect();
    ControlNet::new(refine_cnet(cnet)?, positions)
}

/// Applies [`refine`] `levels` times and reports counts per level.
pub fn refine_n(net: &ControlNet, levels: usize) -> Result<(ControlNet, Vec<LevelCounts>)> {
    if levels > MAX_LEVELS {
        return Err(Error::Resource(format!("{levels} refinement levels requested, at most {MAX_LEVELS} allowed")));
    }
    let mut current = net.clone();
    let mut counts = vec![LevelCounts::of(0, net)];
    for level in 1..=levels {
        current = refine(&current)?;
        counts.push(LevelCounts::of(level, &current));
    }
    Ok((current, counts))
}
