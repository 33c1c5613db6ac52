//! Zero-mean polynomial basis per cell.
//!
//! On cell `i` the nonconstant basis functions are
//! `phi_k(x) = phihat_k(x - x_i) - s_k` with `phihat in {x, y, x^2, y^2, xy}`
//! and shift constants `s_k` chosen so each `phi_k` has zero mean over the
//! cell. The shifts are precomputed by quadrature in the setup phase.

use super::{Mesh, QuadratureRules};
use crate::Vec2;
use nalgebra::SVector;

/// Number of nonconstant basis functions of the quadratic space.
pub const N_BASIS: usize = 5;

#[derive(Debug)]
pub struct BasisSet {
    /// Per cell: shift constants of `{x, y, x^2, y^2, xy}` around the barycenter.
    pub shifts: Vec<[f64; N_BASIS]>,
    /// Per cell: the expansion point (barycenter).
    pub centers: Vec<Vec2>,
}

fn raw_monomials(d: Vec2) -> [f64; N_BASIS] {
    [d.x, d.y, d.x * d.x, d.y * d.y, d.x * d.y]
}

/// Compute the zero-mean shifts `s_k = 1/|cell| * integral of phihat_k(x - x_i)`.
pub fn compute_basis_moments(mesh: &Mesh, rules: &QuadratureRules) -> BasisSet {
    let mut shifts = Vec::with_capacity(mesh.n_cells());
    let mut centers = Vec::with_capacity(mesh.n_cells());
    for ci in 0..mesh.n_cells() {
        let xc = mesh.cells[ci].barycenter;
        let mut s = [0.0; N_BASIS];
        for k in 0..N_BASIS {
            s[k] = rules.cell_mean(ci, |x| raw_monomials(x - xc)[k]);
        }
        shifts.push(s);
        centers.push(xc);
    }
    BasisSet { shifts, centers }
}

impl BasisSet {
    /// Row of basis values `phi(x)` of cell `home`, evaluated at a physical
    /// point `x` expressed in `home`'s frame.
    pub fn row(&self, home: usize, x: Vec2) -> SVector<f64, N_BASIS> {
        let d = x - self.centers[home];
        let m = raw_monomials(d);
        let s = &self.shifts[home];
        SVector::from([m[0] - s[0], m[1] - s[1], m[2] - s[2], m[3] - s[3], m[4] - s[4]])
    }

    /// First-derivative rows `(d/dx phi, d/dy phi)` at `x`.
    pub fn gradient_rows(&self, home: usize, x: Vec2) -> [SVector<f64, N_BASIS>; 2] {
        let d = x - self.centers[home];
        [
            SVector::from([1.0, 0.0, 2.0 * d.x, 0.0, d.y]),
            SVector::from([0.0, 1.0, 0.0, 2.0 * d.y, d.x]),
        ]
    }

    /// Constant second-derivative rows `(dxx, dyy, dxy)`.
    pub fn hessian_rows() -> [SVector<f64, N_BASIS>; 3] {
        [
            SVector::from([0.0, 0.0, 2.0, 0.0, 0.0]),
            SVector::from([0.0, 0.0, 0.0, 2.0, 0.0]),
            SVector::from([0.0, 0.0, 0.0, 0.0, 1.0]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_mesh, compute_quadratures, CartesianBc, Rect};
    use approx::assert_relative_eq;

    #[test]
    fn cartesian_quadratic_shift_is_dx2_over_12() {
        let mesh = build_cartesian_mesh(4, 4, Rect::unit(), CartesianBc::wall()).unwrap();
        let rules = compute_quadratures(&mesh);
        let basis = compute_basis_moments(&mesh, &rules);
        let dx: f64 = 0.25;
        for s in &basis.shifts {
            assert_relative_eq!(s[0], 0.0, epsilon = 1e-15);
            assert_relative_eq!(s[1], 0.0, epsilon = 1e-15);
            assert_relative_eq!(s[2], dx * dx / 12.0, epsilon = 1e-15);
            assert_relative_eq!(s[3], dx * dx / 12.0, epsilon = 1e-15);
            assert_relative_eq!(s[4], 0.0, epsilon = 1e-16);
        }
    }

    #[test]
    fn zero_mean_property_by_quadrature() {
        let mesh = crate::mesh::synth::triangle_mesh(3, 3, Rect::unit(), 0.2, CartesianBc::wall()).unwrap();
        let rules = compute_quadratures(&mesh);
        let basis = compute_basis_moments(&mesh, &rules);
        for ci in 0..mesh.n_cells() {
            for k in 0..N_BASIS {
                let mean = rules.cell_mean(ci, |x| basis.row(ci, x)[k]);
                let scale = mesh.cells[ci].diameter.powi(if k < 2 { 1 } else { 2 });
                assert!(mean.abs() <= 1e-12 * scale.max(1e-30));
            }
        }
    }

    #[test]
    fn triangle_xy_shift_matches_analytic_moment() {
        // reference triangle (0,0), (1,0), (0,1): centroid (1/3, 1/3),
        // 1/|T| int (x - cx)(y - cy) = 2 * (1/24 - (1/3)(1/6) - (1/3)(1/6) + (1/9)(1/2)) = -1/36
        let mesh = crate::mesh::finish_mesh(
            crate::mesh::MeshBuild {
                vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
                cell_vertices: vec![vec![0, 1, 2]],
                periodic: Default::default(),
                tagged_lines: Vec::new(),
            },
            |_, _| crate::mesh::BoundaryKind::Wall,
        )
        .unwrap();
        let rules = compute_quadratures(&mesh);
        let basis = compute_basis_moments(&mesh, &rules);
        assert_relative_eq!(basis.shifts[0][4], -1.0 / 36.0, epsilon = 1e-14);
    }
}
