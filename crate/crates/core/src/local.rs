//! Element-local frames anchored at each corner.
//!
//! The local frame of a face has corner 0 at (0,0), corner 1 at (1,0),
//! corner 2 at (1,1) and corner 3 at (0,1). The frame rotated to corner `k`
//! has its origin at corner `k`, its first axis pointing to corner `k+1` and
//! its second axis pointing to corner `k-1`. Both frames are right-handed.

/// Parametric coordinates of corner `k` in the local frame.
pub const CORNER_PARAM: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Bernstein index `(i, j)` in the frame rotated to corner `k` mapped to the
/// local index, for degree `p`.
pub fn rotated_index(p: usize, k: usize, i: usize, j: usize) -> (usize, usize) {
    match k % 4 {
        0 => (i, j),
        1 => (p - j, i),
        2 => (p - i, p - j),
        _ => (j, p - i),
    }
}

/// Column of Bernstein index `(i, j)` in the rotated frame of corner `k`.
pub fn rotated_slot(p: usize, k: usize, i: usize, j: usize) -> usize {
    let (a, b) = rotated_index(p, k, i, j);
    (p + 1) * b + a
}

/// Local coordinates of the point `(u, v)` given in the frame rotated to corner `k`.
pub fn rotated_param(k: usize, u: f64, v: f64) -> (f64, f64) {
    match k % 4 {
        0 => (u, v),
        1 => (1.0 - v, u),
        2 => (1.0 - u, 1.0 - v),
        _ => (v, 1.0 - u),
    }
}

/// Jacobian `d(ξ, η) / d(u, v)` of [`rotated_param`] as rows `[dξ/du, dξ/dv], [dη/du, dη/dv]`.
pub fn rotation_jacobian(k: usize) -> [[f64; 2]; 2] {
    match k % 4 {
        0 => [[1.0, 0.0], [0.0, 1.0]],
        1 => [[0.0, -1.0], [1.0, 0.0]],
        2 => [[-1.0, 0.0], [0.0, -1.0]],
        _ => [[0.0, 1.0], [-1.0, 0.0]],
    }
}

/// Derivatives with respect to the rotated coordinates from local ones:
/// `(d_u, d_v)` from `(d_xi, d_eta)`.
pub fn rotate_gradient(k: usize, d_xi: f64, d_eta: f64) -> (f64, f64) {
    let j = rotation_jacobian(k);
    (j[0][0] * d_xi + j[1][0] * d_eta, j[0][1] * d_xi + j[1][1] * d_eta)
}

/// Second derivatives `(uu, uv, vv)` from local `(ξξ, ξη, ηη)`.
pub fn rotate_hessian(k: usize, xx: f64, xy: f64, yy: f64) -> (f64, f64, f64) {
    let j = rotation_jacobian(k);
    let h = [[xx, xy], [xy, yy]];
    let entry = |a: usize, b: usize| {
        let mut s = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                s += j[r][a] * h[r][c] * j[c][b];
            }
        }
        s
    };
    (entry(0, 0), entry(0, 1), entry(1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotated_origin_is_the_corner() {
        for k in 0..4 {
            assert_eq!(rotated_param(k, 0.0, 0.0), CORNER_PARAM[k]);
            assert_eq!(rotated_param(k, 1.0, 0.0), CORNER_PARAM[(k + 1) % 4]);
            assert_eq!(rotated_param(k, 0.0, 1.0), CORNER_PARAM[(k + 3) % 4]);
            let (i, j) = rotated_index(5, k, 0, 0);
            assert_eq!((i as f64 / 5.0, j as f64 / 5.0), CORNER_PARAM[k]);
            let (i, j) = rotated_index(3, k, 3, 0);
            assert_eq!((i as f64 / 3.0, j as f64 / 3.0), CORNER_PARAM[(k + 1) % 4]);
        }
    }

    #[test]
    fn index_and_param_maps_agree() {
        for k in 0..4 {
            for i in 0..=5 {
                for j in 0..=5 {
                    let (a, b) = rotated_index(5, k, i, j);
                    let (x, y) = rotated_param(k, i as f64 / 5.0, j as f64 / 5.0);
                    assert!((a as f64 / 5.0 - x).abs() < 1e-15 && (b as f64 / 5.0 - y).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn gradient_rotation_matches_finite_differences() {
        let f = |x: f64, y: f64| x * x * y + 3.0 * y * y + x;
        let fx = |x: f64, y: f64| 2.0 * x * y + 1.0;
        let fy = |x: f64, y: f64| x * x + 6.0 * y;
        let h = 1e-6;
        for k in 0..4 {
            let (u, v) = (0.3, 0.6);
            let g = |u: f64, v: f64| {
                let (x, y) = rotated_param(k, u, v);
                f(x, y)
            };
            let (x, y) = rotated_param(k, u, v);
            let (du, dv) = rotate_gradient(k, fx(x, y), fy(x, y));
            assert!((du - (g(u + h, v) - g(u - h, v)) / (2.0 * h)).abs() < 1e-8);
            assert!((dv - (g(u, v + h) - g(u, v - h)) / (2.0 * h)).abs() < 1e-8);
            let (uu, uv, vv) = rotate_hessian(k, 2.0 * y, 2.0 * x, 6.0);
            let hh = 1e-4;
            assert!((uu - (g(u + hh, v) - 2.0 * g(u, v) + g(u - hh, v)) / (hh * hh)).abs() < 1e-5);
            assert!((vv - (g(u, v + hh) - 2.0 * g(u, v) + g(u, v - hh)) / (hh * hh)).abs() < 1e-5);
            let cross = (g(u + hh, v + hh) - g(u + hh, v - hh) - g(u - hh, v + hh) + g(u - hh, v - hh))
                / (4.0 * hh * hh);
            assert!((uv - cross).abs() < 1e-5);
        }
    }
}
