//! Procedural control nets used by the test suites, the benchmarks in the
//! CLI, and the examples in the README.

use crate::mesh::{ControlNet, Point3};
use std::collections::HashMap;
use std::f64::consts::PI;

/// `nx` by `ny` structured grid of unit-spaced faces, lower-left at the origin.
pub fn grid(nx: usize, ny: usize) -> ControlNet {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push(Point3::new(i as f64, j as f64, 0.0));
        }
    }
    let mut faces = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    ControlNet::from_faces(positions, faces).expect("structured grid is a valid net")
}

/// `n` by `n` structured control net of the unit square.
pub fn unit_square_grid(n: usize) -> ControlNet {
    let s = 1.0 / n as f64;
    grid(n, n).map_positions(|p| p * s)
}

/// Rotates the diagonal of the hexagon formed by the two faces sharing edge
/// `(u, w)`: `u` and `w` lose one face each, the two hexagon vertices that
/// follow them counterclockwise gain one.
pub fn flip_edge(faces: &mut [[usize; 4]], u: usize, w: usize) {
    let find = |faces: &[[usize; 4]], a: usize, b: usize| {
        faces.iter().enumerate().find_map(|(f, q)| {
            (0..4).find(|&s| q[s] == a && q[(s + 1) % 4] == b).map(|s| (f, s))
        })
    };
    let (f1, s1) = find(faces, u, w).expect("edge u->w exists");
    let (f2, s2) = find(faces, w, u).expect("edge w->u exists");
    let q1 = faces[f1];
    let q2 = faces[f2];
    let x1 = q1[(s1 + 2) % 4];
    let x2 = q1[(s1 + 3) % 4];
    let y1 = q2[(s2 + 2) % 4];
    let y2 = q2[(s2 + 3) % 4];
    faces[f1] = [x2, u, y1, y2];
    faces[f2] = [y2, w, x1, x2];
}

fn smooth_interior(net: &ControlNet, iterations: usize) -> ControlNet {
    let cnet = &net.cnet;
    let mut pos = net.positions.clone();
    let neighbors: Vec<Vec<usize>> = (0..cnet.n_vertices())
        .map(|v| cnet.vertex_edges(v).iter().map(|&e| cnet.edge(e).other(v)).collect())
        .collect();
    for _ in 0..iterations {
        let prev = pos.clone();
        for v in 0..cnet.n_vertices() {
            if cnet.is_boundary_vertex(v) {
                continue;
            }
            let sum: Point3 = neighbors[v].iter().map(|&n| prev[n]).sum();
            pos[v] = sum / neighbors[v].len() as f64;
        }
    }
    ControlNet::new(cnet.clone(), pos).expect("smoothing keeps the net valid")
}

fn bowl(p: &Point3, lift: f64) -> Point3 {
    let (x, y) = (p.x - 0.5, p.y - 0.5);
    Point3::new(p.x, p.y, lift * (x * x + 0.5 * y * y + 0.6 * x * y))
}

/// Unit-square grid with one flipped edge near the centre: two interior EPs of
/// valence 3 and two of valence 5, with three EPs on each of the two new faces.
/// Interior vertices are Laplacian-smoothed; `lift` bends the net out of plane.
pub fn flipped_grid(n: usize, lift: f64) -> ControlNet {
    assert!(n >= 6, "flipped_grid needs n >= 6");
    let base = unit_square_grid(n);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = base.cnet.faces().to_vec();
    let c = n / 2;
    flip_edge(&mut faces, id(c, c - 1), id(c, c));
    let net = ControlNet::from_faces(base.positions.clone(), faces).expect("flip keeps the net valid");
    smooth_interior(&net, 60).map_positions(|p| bowl(p, lift))
}

/// Two flips sharing a vertex: interior EPs of valence 3, 5 and 6, including a
/// face whose four corners are all extraordinary.
pub fn double_flipped_grid(n: usize, lift: f64) -> ControlNet {
    assert!(n >= 8, "double_flipped_grid needs n >= 8");
    let base = unit_square_grid(n);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = base.cnet.faces().to_vec();
    let c = n / 2;
    flip_edge(&mut faces, id(c, c - 1), id(c, c));
    flip_edge(&mut faces, id(c - 1, c - 2), id(c, c - 2));
    let net = ControlNet::from_faces(base.positions.clone(), faces).expect("flips keep the net valid");
    smooth_interior(&net, 60).map_positions(|p| bowl(p, lift))
}

/// Builds a fan of `sectors` structured `k` by `k` patches around vertex 0,
/// sector `s` spanning the rays at `angles[s]` and `angles[s + 1]`.
fn sector_fan(angles: &[f64], closed: bool, k: usize, lift: f64) -> ControlNet {
    let sectors = if closed { angles.len() } else { angles.len() - 1 };
    let n_rays = angles.len();
    let dir = |r: usize| {
        let a = angles[r % n_rays];
        Point3::new(a.cos(), a.sin(), 0.0)
    };
    let mut ids: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut positions = vec![Point3::zeros()];
    // canonical key: (ray, distance, 0) on rays, (sector, a, b) inside
    let mut vertex = |s: usize, a: usize, b: usize, positions: &mut Vec<Point3>| -> usize {
        let key = match (a, b) {
            (0, 0) => return 0,
            (_, 0) => (s % n_rays, a, 0),
            (0, _) => ((s + 1) % n_rays, b, 0),
            _ => (s + n_rays, a, b),
        };
        *ids.entry(key).or_insert_with(|| {
            let p = dir(s) * (a as f64 / k as f64) + dir(s + 1) * (b as f64 / k as f64);
            positions.push(p);
            positions.len() - 1
        })
    };
    let mut faces = Vec::new();
    for s in 0..sectors {
        for b in 0..k {
            for a in 0..k {
                faces.push([
                    vertex(s, a, b, &mut positions),
                    vertex(s, a + 1, b, &mut positions),
                    vertex(s, a + 1, b + 1, &mut positions),
                    vertex(s, a, b + 1, &mut positions),
                ]);
            }
        }
    }
    let net = ControlNet::from_faces(positions, faces).expect("fan is a valid net");
    net.map_positions(|p| Point3::new(p.x, p.y, lift * (p.x * p.x + 0.5 * p.y * p.y)))
}

/// Disk with one interior EP of the given valence at vertex 0.
pub fn fan(valence: usize, k: usize, lift: f64) -> ControlNet {
    let angles: Vec<f64> = (0..valence).map(|s| 2.0 * PI * s as f64 / valence as f64).collect();
    sector_fan(&angles, true, k, lift)
}

/// Half-disk with one boundary EP of the given valence at vertex 0.
pub fn boundary_fan(valence: usize, k: usize, lift: f64) -> ControlNet {
    let angles: Vec<f64> = (0..=valence).map(|s| PI * s as f64 / valence as f64).collect();
    sector_fan(&angles, false, k, lift)
}

/// Surface of the cube `[0, size]^3`, each side split into `k` by `k` faces,
/// oriented with outward normals. The eight corners are valence-3 EPs.
pub fn cube(k: usize, size: f64) -> ControlNet {
    let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut vertex = |c: [usize; 3], positions: &mut Vec<Point3>| -> usize {
        *ids.entry(c).or_insert_with(|| {
            positions.push(Point3::new(c[0] as f64, c[1] as f64, c[2] as f64) * (size / k as f64));
            positions.len() - 1
        })
    };
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for (level, outward) in [(k, true), (0, false)] {
            for j in 0..k {
                for i in 0..k {
                    let at = |di: usize, dj: usize| {
                        let mut c = [0; 3];
                        c[axis] = level;
                        c[u] = i + di;
                        c[v] = j + dj;
                        c
                    };
                    let mut quad = [
                        vertex(at(0, 0), &mut positions),
                        vertex(at(1, 0), &mut positions),
                        vertex(at(1, 1), &mut positions),
                        vertex(at(0, 1), &mut positions),
                    ];
                    if !outward {
                        quad.reverse();
                    }
                    faces.push(quad);
                }
            }
        }
    }
    ControlNet::from_faces(positions, faces).expect("cube is a valid net")
}

/// Open tube of radius `radius` around the z axis: `n_around` faces around,
/// `n_along` faces along a length of `length`.
pub fn cylinder(n_around: usize, n_along: usize, radius: f64, length: f64) -> ControlNet {
    let id = |i: usize, j: usize| j * n_around + (i % n_around);
    let mut positions = Vec::new();
    for j in 0..=n_along {
        for i in 0..n_around {
            let a = 2.0 * PI * i as f64 / n_around as f64;
            positions.push(Point3::new(
                radius * a.cos(),
                radius * a.sin(),
                length * j as f64 / n_along as f64,
            ));
        }
    }
    let mut faces = Vec::new();
    for j in 0..n_along {
        for i in 0..n_around {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    ControlNet::from_faces(positions, faces).expect("tube is a valid net")
}
