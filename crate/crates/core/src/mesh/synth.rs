//! Generated triangle meshes for tests and convergence studies.
//!
//! A structured grid is split along alternating diagonals and the interior
//! vertices are displaced by a deterministic pseudo-random jitter, giving a
//! valid unstructured triangulation whose boundary stays exactly on the
//! requested rectangle (so periodic pairing still applies).

use super::{finish_mesh, AxisBc, BoundaryKind, CartesianBc, Mesh, MeshBuild, MeshError, PeriodicSpec, Rect};
use crate::Vec2;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Vertices and triangles of the jittered grid triangulation.
pub fn triangle_grid(
    nx: usize,
    ny: usize,
    domain: Rect,
    jitter: f64,
    seed: u64,
) -> (Vec<Vec2>, Vec<[usize; 3]>) {
    let ext = domain.extent();
    let dx = ext.x / nx as f64;
    let dy = ext.y / ny as f64;
    let amp = jitter * dx.min(dy);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let mut p = Vec2::new(domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy);
            if i > 0 && i < nx && j > 0 && j < ny && amp > 0.0 {
                let mut s = seed ^ ((i as u64) << 32) ^ (j as u64).wrapping_mul(0x9E37);
                let a = unit_f64(splitmix64(&mut s)) - 0.5;
                let b = unit_f64(splitmix64(&mut s)) - 0.5;
                p += Vec2::new(a, b) * (2.0 * amp);
            }
            vertices.push(p);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    (vertices, triangles)
}

/// Jittered triangle mesh over `domain`; `jitter` is a fraction of the cell
/// size (0.25 and below keeps all triangles valid).
pub fn triangle_mesh(
    nx: usize,
    ny: usize,
    domain: Rect,
    jitter: f64,
    bc: CartesianBc,
) -> Result<Mesh, MeshError> {
    let (vertices, triangles) = triangle_grid(nx, ny, domain, jitter, 0x5EED);
    let ext = domain.extent();
    let periodic = PeriodicSpec {
        x: (bc.x == AxisBc::Periodic).then_some((domain.x0, ext.x)),
        y: (bc.y == AxisBc::Periodic).then_some((domain.y0, ext.y)),
    };
    let mid_tol = 1e-9 * ext.norm();
    finish_mesh(
        MeshBuild {
            vertices,
            cell_vertices: triangles.iter().map(|t| t.to_vec()).collect(),
            periodic,
            tagged_lines: Vec::new(),
        },
        move |mid, _| {
            let on_x = (mid.x - domain.x0).abs() < mid_tol || (mid.x - domain.x1).abs() < mid_tol;
            let axis = if on_x { bc.x } else { bc.y };
            match axis {
                AxisBc::Dirichlet => BoundaryKind::Dirichlet,
                _ => BoundaryKind::Wall,
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jittered_mesh_is_valid_and_covers_domain() {
        let mesh = triangle_mesh(8, 8, Rect::square(-1.0, 1.0), 0.2, CartesianBc::wall()).unwrap();
        assert_eq!(mesh.n_cells(), 128);
        assert_relative_eq!(mesh.domain_area, 4.0, epsilon = 1e-12);
        assert!(mesh.cells.iter().all(|c| c.area > 0.0));
    }

    #[test]
    fn periodic_triangulation_pairs_all_boundary_edges() {
        let mesh = triangle_mesh(6, 6, Rect::unit(), 0.15, CartesianBc::periodic()).unwrap();
        assert!(mesh.edges.iter().all(|e| !e.is_boundary()));
    }
}
