//! Closed triangulated surface primitives.
//!
//! All constructors return unit-scale meshes (radius 1) that are closed and
//! consistently outward-oriented; callers scale per-axis to obtain
//! ellipsoids. Unit vertices double as direction fields, so time-varying
//! radii can be applied frame by frame without rebuilding topology.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// Latitude/longitude sphere: `n_theta` polar subdivisions (>= 2) and
/// `n_phi` azimuthal subdivisions (>= 3). Poles are single vertices.
pub fn unit_uv_sphere(n_theta: usize, n_phi: usize) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    assert!(n_theta >= 2 && n_phi >= 3);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    vertices.push([0.0, 0.0, 1.0]); // north pole, index 0
    vertices.push([0.0, 0.0, -1.0]); // south pole, index 1
    let ring = |i: usize, j: usize| -> u32 { (2 + (i - 1) * n_phi + (j % n_phi)) as u32 };
    for i in 1..n_theta {
        let theta = core::f64::consts::PI * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = 2.0 * core::f64::consts::PI * j as f64 / n_phi as f64;
            vertices.push(spherical(theta, phi));
        }
    }
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for j in 0..n_phi {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_theta - 1 {
        for j in 0..n_phi {
            let a = ring(i, j);
            let b = ring(i + 1, j);
            let c = ring(i + 1, j + 1);
            let d = ring(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..n_phi {
        faces.push([1, ring(n_theta - 1, j + 1), ring(n_theta - 1, j)]);
    }
    (vertices, faces)
}

/// Half sphere occupying `x >= 0`, closed by a flat septal cap in the x = 0
/// plane (triangle fan around the origin). `n_phi` spans the half turn.
pub fn unit_half_sphere_capped(n_theta: usize, n_phi: usize) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    assert!(n_theta >= 2 && n_phi >= 2);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    vertices.push([0.0, 0.0, 1.0]); // north pole
    vertices.push([0.0, 0.0, -1.0]); // south pole
    // columns j = 0..=n_phi, phi in [-pi/2, pi/2] (no wrap)
    let ring = |i: usize, j: usize| -> u32 { (2 + (i - 1) * (n_phi + 1) + j) as u32 };
    for i in 1..n_theta {
        let theta = core::f64::consts::PI * i as f64 / n_theta as f64;
        for j in 0..=n_phi {
            let phi = -core::f64::consts::FRAC_PI_2
                + core::f64::consts::PI * j as f64 / n_phi as f64;
            vertices.push(spherical(theta, phi));
        }
    }
    let cap_center = vertices.len() as u32;
    vertices.push([0.0, 0.0, 0.0]);

    let mut faces: Vec<[u32; 3]> = Vec::new();
    for j in 0..n_phi {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_theta - 1 {
        for j in 0..n_phi {
            let a = ring(i, j);
            let b = ring(i + 1, j);
            let c = ring(i + 1, j + 1);
            let d = ring(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..n_phi {
        faces.push([1, ring(n_theta - 1, j + 1), ring(n_theta - 1, j)]);
    }
    // boundary loop in the x = 0 plane, ordered clockwise viewed from +x so
    // cap normals point along -x (outward from the solid half)
    let mut loop_idx: Vec<u32> = Vec::new();
    loop_idx.push(0);
    for i in 1..n_theta {
        loop_idx.push(ring(i, n_phi));
    }
    loop_idx.push(1);
    for i in (1..n_theta).rev() {
        loop_idx.push(ring(i, 0));
    }
    for k in 0..loop_idx.len() {
        let a = loop_idx[k];
        let b = loop_idx[(k + 1) % loop_idx.len()];
        faces.push([cap_center, a, b]);
    }
    (vertices, faces)
}

/// Icosahedron subdivided `level` times, vertices projected to the unit
/// sphere. Vertex counts per level: 12, 42, 162, 642, ...
pub fn unit_icosphere(level: usize) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|v| normalize(*v)).collect();
    let mut faces: Vec<[u32; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut next: Vec<[u32; 3]> = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let m = |a: u32, b: u32, vertices: &mut Vec<[f64; 3]>, midpoint: &mut BTreeMap<(u32, u32), u32>| -> u32 {
                let key = (a.min(b), a.max(b));
                if let Some(&idx) = midpoint.get(&key) {
                    return idx;
                }
                let pa = vertices[a as usize];
                let pb = vertices[b as usize];
                let mid = normalize([
                    (pa[0] + pb[0]) / 2.0,
                    (pa[1] + pb[1]) / 2.0,
                    (pa[2] + pb[2]) / 2.0,
                ]);
                let idx = vertices.len() as u32;
                vertices.push(mid);
                midpoint.insert(key, idx);
                idx
            };
            let ab = m(f[0], f[1], &mut vertices, &mut midpoint);
            let bc = m(f[1], f[2], &mut vertices, &mut midpoint);
            let ca = m(f[2], f[0], &mut vertices, &mut midpoint);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Per-axis scaling, turning a unit sphere into an ellipsoid.
pub fn scale_vertices(unit: &[[f64; 3]], radii: [f64; 3]) -> Vec<[f64; 3]> {
    unit.iter()
        .map(|v| [v[0] * radii[0], v[1] * radii[1], v[2] * radii[2]])
        .collect()
}

/// Grid dimensions for a full sphere with roughly `target` vertices.
pub fn sphere_grid_for(target: usize) -> (usize, usize) {
    // (n_theta - 1) * n_phi + 2 vertices with n_phi = 2 (n_theta - 1)
    let rows = libm::sqrt(((target.max(8) - 2) as f64) / 2.0);
    let n_theta = (libm::round(rows) as usize).max(2) + 1;
    let n_phi = (2 * (n_theta - 1)).max(3);
    (n_theta, n_phi)
}

/// Grid dimensions for a capped half sphere with roughly `target` vertices.
pub fn half_grid_for(target: usize) -> (usize, usize) {
    // (n_theta - 1) * (n_phi + 1) + 3 vertices with n_phi = n_theta - 1
    let m = libm::sqrt((target.max(8) - 3) as f64);
    let n_theta = (libm::round(m) as usize).max(3) + 1;
    let n_phi = (n_theta - 1).max(2);
    (n_theta, n_phi)
}

fn spherical(theta: f64, phi: f64) -> [f64; 3] {
    [
        libm::sin(theta) * libm::cos(phi),
        libm::sin(theta) * libm::sin(phi),
        libm::cos(theta),
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / n, v[1] / n, v[2] / n]
}
