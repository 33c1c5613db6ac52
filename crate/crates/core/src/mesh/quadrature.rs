//! Edge and cell quadrature rules.
//!
//! Edges carry a two-node Gauss rule (exact through degree 3), the minimum for
//! third order. Cell rules are a 2x2 tensor Gauss rule on rectangles and a
//! barycentric fan of midpoint-rule triangles otherwise (exact through degree
//! 2 either way). A finer rule (degree >= 4) backs initialization and
//! reference cell averages so convergence studies are not limited by setup
//! errors.

use super::Mesh;
use crate::Vec2;

/// Nodes and normalized weights: `integral over cell of g ~ |cell| * sum w_q g(x_q)`.
#[derive(Debug, Clone)]
pub struct CellRule {
    pub nodes: Vec<Vec2>,
    pub weights: Vec<f64>,
}

#[derive(Debug)]
pub struct QuadratureRules {
    /// Per edge: two Gauss nodes with weights summing to one.
    pub edges: Vec<[(Vec2, f64); 2]>,
    /// Per cell: rule exact through total degree 2.
    pub cells: Vec<CellRule>,
    /// Per cell: rule exact through total degree >= 4.
    pub cells_fine: Vec<CellRule>,
}

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

// 3-node Gauss-Legendre on [-1, 1], weights normalized to sum 1
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 18.0),
    (0.0, 4.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 18.0),
];

// 6-point degree-4 triangle rule: barycentric (1-2a, a, a) orbits
const TRI_DEG4: [(f64, f64); 2] = [
    (0.445_948_490_915_965, 0.223_381_589_678_011),
    (0.091_576_213_509_771, 0.109_951_743_655_322),
];

fn is_axis_aligned_rectangle(mesh: &Mesh, cell: usize) -> Option<(Vec2, Vec2)> {
    let c = &mesh.cells[cell];
    if c.vertices.len() != 4 {
        return None;
    }
    let p: Vec<Vec2> = c.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    let tol = 1e-12 * c.diameter;
    let ok = (0..4).all(|k| {
        let d = p[(k + 1) % 4] - p[k];
        d.x.abs() < tol || d.y.abs() < tol
    });
    if !ok {
        return None;
    }
    let lo = p.iter().fold(p[0], |a, b| a.inf(b));
    let hi = p.iter().fold(p[0], |a, b| a.sup(b));
    Some((lo, hi))
}

fn tensor_gauss_rect(lo: Vec2, hi: Vec2, pts: &[(f64, f64)]) -> CellRule {
    let c = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    let mut nodes = Vec::with_capacity(pts.len() * pts.len());
    let mut weights = Vec::with_capacity(pts.len() * pts.len());
    for &(xi, wx) in pts {
        for &(yi, wy) in pts {
            nodes.push(Vec2::new(c.x + half.x * xi, c.y + half.y * yi));
            weights.push(wx * wy);
        }
    }
    CellRule { nodes, weights }
}

/// Barycentric fan subdivision of a polygon with a per-triangle rule given by
/// barycentric orbit points. Weights come out normalized by the polygon area.
fn fan_rule(mesh: &Mesh, cell: usize, tri_rule: &dyn Fn(Vec2, Vec2, Vec2) -> (Vec<Vec2>, Vec<f64>)) -> CellRule {
    let c = &mesh.cells[cell];
    let nv = c.vertices.len();
    let b = c.barycenter;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for k in 0..nv {
        let p = mesh.vertices[c.vertices[k]];
        let q = mesh.vertices[c.vertices[(k + 1) % nv]];
        let tri_area = 0.5 * ((p - b).x * (q - b).y - (q - b).x * (p - b).y);
        let (ns, ws) = tri_rule(b, p, q);
        for (n, w) in ns.into_iter().zip(ws) {
            nodes.push(n);
            weights.push(w * tri_area / c.area);
        }
    }
    CellRule { nodes, weights }
}

fn tri_midpoint_rule(a: Vec2, b: Vec2, c: Vec2) -> (Vec<Vec2>, Vec<f64>) {
    (
        vec![(a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5],
        vec![1.0 / 3.0; 3],
    )
}

fn tri_degree4_rule(a: Vec2, b: Vec2, c: Vec2) -> (Vec<Vec2>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    for &(alpha, w) in &TRI_DEG4 {
        let l = [1.0 - 2.0 * alpha, alpha, alpha];
        for rot in 0..3 {
            let (l0, l1, l2) = (l[rot % 3], l[(rot + 1) % 3], l[(rot + 2) % 3]);
            nodes.push(a * l0 + b * l1 + c * l2);
            weights.push(w);
        }
    }
    (nodes, weights)
}

/// Build edge and cell quadrature rules for every entity of the mesh.
pub fn compute_quadratures(mesh: &Mesh) -> QuadratureRules {
    let edges = mesh
        .edges
        .iter()
        .map(|e| {
            let a = mesh.vertices[e.v[0]];
            let b = mesh.vertices[e.v[1]];
            let mid = (a + b) * 0.5;
            let half = (b - a) * 0.5;
            [
                (mid - half * INV_SQRT3, 0.5),
                (mid + half * INV_SQRT3, 0.5),
            ]
        })
        .collect();

    let mut cells = Vec::with_capacity(mesh.n_cells());
    let mut cells_fine = Vec::with_capacity(mesh.n_cells());
    for ci in 0..mesh.n_cells() {
        if let Some((lo, hi)) = is_axis_aligned_rectangle(mesh, ci) {
            let g2 = [(-INV_SQRT3, 0.5), (INV_SQRT3, 0.5)];
            cells.push(tensor_gauss_rect(lo, hi, &g2));
            cells_fine.push(tensor_gauss_rect(lo, hi, &GAUSS3));
        } else {
            cells.push(fan_rule(mesh, ci, &tri_midpoint_rule));
            cells_fine.push(fan_rule(mesh, ci, &tri_degree4_rule));
        }
    }
    QuadratureRules {
        edges,
        cells,
        cells_fine,
    }
}

impl QuadratureRules {
    /// `1/|cell| * integral over the cell` of `g`, with the degree-2 rule.
    pub fn cell_mean(&self, cell: usize, g: impl Fn(Vec2) -> f64) -> f64 {
        let rule = &self.cells[cell];
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Same with the fine (degree >= 4) rule.
    pub fn cell_mean_fine(&self, cell: usize, g: impl Fn(Vec2) -> f64) -> f64 {
        let rule = &self.cells_fine[cell];
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// `1/|e| * integral over the edge` of `g`.
    pub fn edge_mean(&self, edge: usize, g: impl Fn(Vec2) -> f64) -> f64 {
        self.edges[edge].iter().map(|&(x, w)| w * g(x)).sum()
    }
}
