//! Extraordinary vertices, rings around them, and element/basis classification.

use super::CNet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexClass {
    pub valence: usize,
    pub is_boundary: bool,
    pub is_extraordinary: bool,
    pub is_corner: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementClass {
    Irregular,
    Transition,
    Regular,
}

impl CNet {
    pub fn vertex_class(&self, v: usize) -> VertexClass {
        let valence = self.valence(v);
        let is_boundary = self.is_boundary_vertex(v);
        VertexClass {
            valence,
            is_boundary,
            is_extraordinary: if is_boundary { valence > 2 } else { valence != 4 },
            is_corner: is_boundary && valence == 1,
        }
    }

    pub fn classify_vertices(&self) -> Vec<VertexClass> {
        (0..self.n_vertices()).map(|v| self.vertex_class(v)).collect()
    }

    pub fn is_extraordinary(&self, v: usize) -> bool {
        self.vertex_class(v).is_extraordinary
    }

    pub fn extraordinary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.is_extraordinary(v)).collect()
    }

    /// Face rings 1..=max_ring around `v`; entry `m - 1` holds the m-ring faces.
    /// Each ring holds the faces touching the previous ring that belong to no
    /// earlier ring, so the rings are pairwise disjoint.
    fn face_rings(&self, v: usize, max_ring: usize) -> Vec<BTreeSet<usize>> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut rings: Vec<BTreeSet<usize>> = Vec::with_capacity(max_ring);
        let first: BTreeSet<usize> = self.vertex_corners(v).iter().map(|&(f, _)| f).collect();
        seen.extend(first.iter().copied());
        rings.push(first);
        while rings.len() < max_ring {
            let prev = rings.last().unwrap();
            let next: BTreeSet<usize> = prev
                .iter()
                .flat_map(|&f| self.touching_faces(f))
                .filter(|g| !seen.contains(g))
                .collect();
            seen.extend(next.iter().copied());
            rings.push(next);
        }
        rings
    }

    /// The m-ring faces of extraordinary vertex `ep`.
    pub fn ring_faces(&self, ep: usize, m: usize) -> Result<BTreeSet<usize>> {
        if m == 0 {
            return Err(Error::Domain("0-ring faces are undefined".into()));
        }
        if ep >= self.n_vertices() || !self.is_extraordinary(ep) {
            return Err(Error::Domain(format!("vertex {ep} is not extraordinary")));
        }
        Ok(self.face_rings(ep, m).pop().unwrap())
    }

    /// The m-ring vertices of extraordinary vertex `ep` (m = 0 gives `{ep}`).
    pub fn ring_vertices(&self, ep: usize, m: usize) -> Result<BTreeSet<usize>> {
        if ep >= self.n_vertices() || !self.is_extraordinary(ep) {
            return Err(Error::Domain(format!("vertex {ep} is not extraordinary")));
        }
        let mut seen: BTreeSet<usize> = BTreeSet::from([ep]);
        let mut ring = BTreeSet::from([ep]);
        if m == 0 {
            return Ok(ring);
        }
        for faces in self.face_rings(ep, m) {
            ring = faces
                .iter()
                .flat_map(|&f| self.face(f))
                .filter(|v| !seen.contains(v))
                .collect();
            seen.extend(ring.iter().copied());
        }
        Ok(ring)
    }

    /// Minimum ring index (1 or 2) of each face over all extraordinary vertices.
    fn min_face_ring(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_faces()];
        for ep in self.extraordinary_vertices() {
            for (k, ring) in self.face_rings(ep, 2).into_iter().enumerate() {
                for f in ring {
                    let m = k + 1;
                    out[f] = Some(out[f].map_or(m, |o: usize| o.min(m)));
                }
            }
        }
        out
    }

    pub fn classify_elements(&self) -> Vec<ElementClass> {
        self.min_face_ring()
            .into_iter()
            .map(|r| match r {
                Some(1) => ElementClass::Irregular,
                Some(2) => ElementClass::Transition,
                _ => ElementClass::Regular,
            })
            .collect()
    }

    /// Edges incident to at least one extraordinary vertex.
    pub fn spoke_edges(&self) -> BTreeSet<usize> {
        self.extraordinary_vertices()
            .into_iter()
            .flat_map(|v| self.vertex_edges(v).iter().copied())
            .collect()
    }

    pub fn is_spoke_edge(&self, e: usize) -> bool {
        let [a, b] = self.edge(e).vertices;
        self.is_extraordinary(a) || self.is_extraordinary(b)
    }

    /// Vertices in the 0-, 1- or 2-ring of some extraordinary vertex; their
    /// basis functions are the irregular ones.
    pub fn irregular_basis_vertices(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for ep in self.extraordinary_vertices() {
            out.insert(ep);
            for ring in self.face_rings(ep, 2) {
                for f in ring {
                    out.extend(self.face(f));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::CNet;
    use crate::nets;
    use std::collections::BTreeSet;

    use super::ElementClass;

    #[test]
    fn cube_vertices_are_all_extraordinary() {
        let net = nets::cube(1, 1.0);
        let classes = net.cnet.classify_vertices();
        assert_eq!(classes.len(), 8);
        assert!(classes.iter().all(|c| c.valence == 3 && !c.is_boundary && c.is_extraordinary));
    }

    #[test]
    fn structured_grid_has_four_corners() {
        let net = nets::unit_square_grid(3);
        let classes = net.cnet.classify_vertices();
        assert_eq!(classes.iter().filter(|c| c.is_extraordinary).count(), 0);
        assert_eq!(classes.iter().filter(|c| c.is_corner).count(), 4);
        assert!(net.cnet.spoke_edges().is_empty());
        assert!(net
            .cnet
            .classify_elements()
            .iter()
            .all(|&c| c == ElementClass::Regular));
    }

    #[test]
    fn zero_ring_is_a_domain_error() {
        let net = nets::fan(5, 2, 0.0);
        assert!(net.cnet.ring_faces(0, 0).is_err());
        assert!(net.cnet.ring_faces(1, 1).is_err());
    }

    fn brute_force_ring(net: &CNet, ep: usize, m: usize) -> BTreeSet<usize> {
        // layer by layer over the face-vertex incidence, without touching_faces()
        let mut assigned = vec![usize::MAX; net.n_faces()];
        for f in 0..net.n_faces() {
            if net.face(f).contains(&ep) {
                assigned[f] = 1;
            }
        }
        for layer in 2..=m {
            for f in 0..net.n_faces() {
                if assigned[f] != usize::MAX {
                    continue;
                }
                let touches = (0..net.n_faces()).any(|g| {
                    assigned[g] == layer - 1 && net.face(g).iter().any(|v| net.face(f).contains(v))
                });
                if touches {
                    assigned[f] = layer + 1000;
                }
            }
            for a in assigned.iter_mut() {
                if *a == layer + 1000 {
                    *a = layer;
                }
            }
        }
        (0..net.n_faces()).filter(|&f| assigned[f] == m).collect()
    }

    #[test]
    fn rings_match_brute_force() {
        for net in [nets::fan(5, 3, 0.0), nets::fan(3, 3, 0.0), nets::flipped_grid(6, 0.0)] {
            for ep in net.cnet.extraordinary_vertices() {
                for m in 1..=3 {
                    assert_eq!(net.cnet.ring_faces(ep, m).unwrap(), brute_force_ring(&net.cnet, ep, m));
                }
            }
        }
    }

    #[test]
    fn valence_five_fan_rings() {
        let net = nets::fan(5, 3, 0.0);
        let ring1 = net.cnet.ring_faces(0, 1).unwrap();
        assert_eq!(ring1.len(), 5);
        let ring2 = net.cnet.ring_faces(0, 2).unwrap();
        assert!(ring2.is_disjoint(&ring1));
        assert_eq!(net.cnet.spoke_edges().len(), 5);
    }

    #[test]
    fn classification_of_single_valence_three_ep() {
        let net = nets::fan(3, 4, 0.0);
        let classes = net.cnet.classify_elements();
        let count = |c| classes.iter().filter(|&&x| x == c).count();
        assert_eq!(count(ElementClass::Irregular), 3);
        let ring2 = net.cnet.ring_faces(0, 2).unwrap();
        assert_eq!(count(ElementClass::Transition), ring2.len());
        for f in ring2 {
            assert_eq!(classes[f], ElementClass::Transition);
        }
        let basis = net.cnet.irregular_basis_vertices();
        let mut expected = BTreeSet::from([0]);
        for m in 1..=2 {
            expected.extend(net.cnet.ring_vertices(0, m).unwrap());
        }
        assert_eq!(basis, expected);
    }

    #[test]
    fn face_with_four_extraordinary_corners_is_irregular() {
        let net = nets::cube(1, 1.0);
        assert!(net
            .cnet
            .classify_elements()
            .iter()
            .all(|&c| c == ElementClass::Irregular));
        // every edge of the cube is a spoke, counted once
        assert_eq!(net.cnet.spoke_edges().len(), 12);
    }

    #[test]
    fn adjacent_eps_share_spoke_once() {
        let net = nets::flipped_grid(6, 0.0);
        let eps = net.cnet.extraordinary_vertices();
        let shared = net
            .cnet
            .spoke_edges()
            .into_iter()
            .filter(|&e| {
                let [a, b] = net.cnet.edge(e).vertices;
                eps.contains(&a) && eps.contains(&b)
            })
            .count();
        assert!(shared > 0);
        let total: usize = eps.iter().map(|&v| net.cnet.valence(v)).sum();
        assert_eq!(net.cnet.spoke_edges().len(), total - shared);
    }
}
