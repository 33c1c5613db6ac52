//! Meshes: Cartesian grids and unstructured polygonal meshes, connectivity,
//! reconstruction stencils, quadrature rules and basis moments.
//!
//! Periodic boundaries are wired by identifying vertices that coincide after
//! translation by an integer number of periods. Connectivity across the seam
//! carries an explicit translation (`shift`/`offset`), so wrap-around stencils
//! and face neighbors work exactly like interior ones; no ghost cells exist
//! anywhere.

mod basis;
mod gmsh;
mod quadrature;
mod stencil;
pub mod synth;

pub use basis::{compute_basis_moments, BasisSet, N_BASIS};
pub use gmsh::{import_gmsh, write_gmsh22, GmshBc};
pub use quadrature::{compute_quadratures, CellRule, QuadratureRules};
pub use stencil::{build_stencils, CellStencils, StencilEntry, StencilSet};

use crate::Vec2;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh configuration: {0}")]
    InvalidConfiguration(String),
    #[error("parse error in section {section}: {message}")]
    Parse { section: String, message: String },
    #[error("unsupported element type {0}")]
    UnsupportedElement(u32),
    #[error("mesh too coarse: stencil of cell {cell} has only {got} cells, need at least {need}")]
    MeshTooCoarse { cell: usize, got: usize, need: usize },
    #[error("degenerate stencil for cell {cell}: {message}")]
    DegenerateStencil { cell: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Boundary treatment of a physical (non-periodic) boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Mirror the interior trace (normal velocity negated).
    Wall,
    /// Flux against a prescribed exterior state.
    Dirichlet,
}

/// What lies on the far side of an edge.
#[derive(Debug, Clone, Copy)]
pub enum EdgeKind {
    /// Interior or periodic neighbor. The trace of `right` at an owner-frame
    /// point `x` is evaluated at `x + shift`; `shift` is zero except across a
    /// periodic seam, where it is an exact integer multiple of the periods.
    Interior { right: usize, shift: Vec2 },
    Boundary(BoundaryKind),
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Physical endpoint vertex ids on the owner side, in the owner's
    /// counterclockwise traversal order.
    pub v: [usize; 2],
    /// Owner cell; `normal` points outward from it.
    pub left: usize,
    pub kind: EdgeKind,
    pub normal: Vec2,
    pub length: f64,
    pub midpoint: Vec2,
}

impl Edge {
    pub fn interior_pair(&self) -> Option<(usize, Vec2)> {
        match self.kind {
            EdgeKind::Interior { right, shift } => Some((right, shift)),
            EdgeKind::Boundary(_) => None,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, EdgeKind::Boundary(_))
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Vertex ids in counterclockwise order.
    pub vertices: Vec<usize>,
    /// Edge ids; entry `k` joins vertex slot `k` to slot `k+1`.
    pub edges: Vec<usize>,
    pub area: f64,
    pub barycenter: Vec2,
    pub diameter: f64,
}

/// Integer wrap counts of a vertex instance: the canonical representative sits
/// at `position + (ix * period_x, iy * period_y)`.
pub(crate) type Wrap = (i32, i32);

#[derive(Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// Global mesh size: maximum cell diameter.
    pub h: f64,
    pub domain_area: f64,
    pub(crate) periods: Vec2,
    /// Per cell, per vertex slot: (canonical vertex class, wrap counts).
    pub(crate) cell_vertex_classes: Vec<Vec<(usize, Wrap)>>,
    /// Per canonical vertex class: the fan of (cell, wrap of its instance).
    pub(crate) vertex_fans: Vec<Vec<(usize, Wrap)>>,
    /// Whether a cell touches a physical (non-periodic) boundary vertex.
    pub(crate) on_physical_boundary: Vec<bool>,
}

impl Mesh {
    /// Outward unit normal of `edge` as seen from `cell`.
    pub fn outward_normal(&self, cell: usize, edge: usize) -> Vec2 {
        let e = &self.edges[edge];
        if e.left == cell {
            e.normal
        } else {
            -e.normal
        }
    }

    /// Translation converting wrap counts into a physical offset.
    pub(crate) fn wrap_offset(&self, w: Wrap) -> Vec2 {
        Vec2::new(f64::from(w.0) * self.periods.x, f64::from(w.1) * self.periods.y)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Largest wave speed hitting each cell boundary is measured against this
    /// local size parameter.
    pub fn cell_size(&self, cell: usize) -> f64 {
        self.cells[cell].diameter
    }
}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mesh: {} cells, {} edges, {} vertices, h = {:.3e}",
            self.cells.len(),
            self.edges.len(),
            self.vertices.len(),
            self.h
        )
    }
}

/// Periodicity of the domain: `(origin, extent)` per axis when periodic.
#[derive(Debug, Clone, Copy, Default)]
pub struct PeriodicSpec {
    pub x: Option<(f64, f64)>,
    pub y: Option<(f64, f64)>,
}

/// Raw mesh description handed to [`finish_mesh`].
pub struct MeshBuild {
    pub vertices: Vec<Vec2>,
    pub cell_vertices: Vec<Vec<usize>>,
    pub periodic: PeriodicSpec,
    /// Boundary line elements with physical tags (from mesh files).
    pub tagged_lines: Vec<([usize; 2], i32)>,
}

/// Groups points that coincide within a tolerance, by hashing on a quantized
/// key and probing the neighboring buckets.
struct PointClasses {
    tol: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    positions: Vec<Vec2>,
}

impl PointClasses {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            buckets: HashMap::new(),
            positions: Vec::new(),
        }
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        (
            (p.x / self.tol).round() as i64,
            (p.y / self.tol).round() as i64,
        )
    }

    fn class_of(&mut self, p: Vec2) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in list {
                        if (self.positions[id] - p).norm() <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.positions.len();
        self.positions.push(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn polygon_area_ccw(points: &[Vec2]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for k in 0..n {
        let p = points[k];
        let q = points[(k + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

fn polygon_centroid(points: &[Vec2], area: f64) -> Vec2 {
    let n = points.len();
    let mut c = Vec2::zeros();
    for k in 0..n {
        let p = points[k];
        let q = points[(k + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        c += (p + q) * cross;
    }
    c / (6.0 * area)
}

/// Wrap a coordinate into `[origin, origin + extent)` and report how many
/// periods were added.
fn wrap_coord(x: f64, origin: f64, extent: f64, tol: f64) -> i32 {
    let t = (x - origin) / extent;
    let mut k = t.floor();
    // points on the upper seam belong to the lower one
    if (t - k - 1.0).abs() * extent <= tol {
        k += 1.0;
    }
    -(k as i32)
}

/// Build full connectivity from a raw cell-vertex description.
///
/// `tag` assigns a boundary treatment to each unpaired boundary edge, given
/// its midpoint and the physical tag of a matching line element, if any.
pub fn finish_mesh(
    build: MeshBuild,
    tag: impl Fn(Vec2, Option<i32>) -> BoundaryKind,
) -> Result<Mesh, MeshError> {
    let MeshBuild {
        vertices,
        mut cell_vertices,
        periodic,
        tagged_lines,
    } = build;
    if cell_vertices.is_empty() {
        return Err(MeshError::InvalidConfiguration("mesh has no cells".into()));
    }

    // bounding box sets the coincidence tolerance
    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for v in &vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let diag = (hi - lo).norm();
    let tol = 1e-9 * diag;
    let periods = Vec2::new(
        periodic.x.map_or(0.0, |(_, ext)| ext),
        periodic.y.map_or(0.0, |(_, ext)| ext),
    );

    // canonical vertex classes, wrapping periodic coordinates
    let mut classes = PointClasses::new(tol.max(1e-300));
    let mut vertex_class: Vec<(usize, Wrap)> = Vec::with_capacity(vertices.len());
    for &p in &vertices {
        let ix = periodic.x.map_or(0, |(o, ext)| wrap_coord(p.x, o, ext, tol));
        let iy = periodic.y.map_or(0, |(o, ext)| wrap_coord(p.y, o, ext, tol));
        let canonical = p + Vec2::new(f64::from(ix) * periods.x, f64::from(iy) * periods.y);
        vertex_class.push((classes.class_of(canonical), (ix, iy)));
    }

    // geometry per cell, enforcing counterclockwise orientation
    let n_cells = cell_vertices.len();
    let mut cells = Vec::with_capacity(n_cells);
    for (ci, vs) in cell_vertices.iter_mut().enumerate() {
        if vs.len() < 3 {
            return Err(MeshError::InvalidConfiguration(format!(
                "cell {ci} has fewer than 3 vertices"
            )));
        }
        let mut pts: Vec<Vec2> = vs.iter().map(|&v| vertices[v]).collect();
        let mut area = polygon_area_ccw(&pts);
        if area < 0.0 {
            vs.reverse();
            pts.reverse();
            area = -area;
        }
        if area <= 0.0 {
            return Err(MeshError::InvalidConfiguration(format!(
                "cell {ci} has nonpositive area"
            )));
        }
        let barycenter = polygon_centroid(&pts, area);
        let mut diameter = 0.0_f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                diameter = diameter.max((pts[a] - pts[b]).norm());
            }
        }
        cells.push(Cell {
            vertices: vs.clone(),
            edges: Vec::new(),
            area,
            barycenter,
            diameter,
        });
    }

    // edges keyed by canonical class pair; periodic partners merge automatically
    struct HalfEdge {
        cell: usize,
        slot: usize,
        v: [usize; 2],
        // wraps aligned with the sorted class key
        wrap_lo: Wrap,
    }
    let mut edge_map: HashMap<(usize, usize), Vec<HalfEdge>> = HashMap::new();
    for (ci, cell) in cells.iter().enumerate() {
        let nv = cell.vertices.len();
        for k in 0..nv {
            let a = cell.vertices[k];
            let b = cell.vertices[(k + 1) % nv];
            let (ca, wa) = vertex_class[a];
            let (cb, wb) = vertex_class[b];
            if ca == cb {
                return Err(MeshError::InvalidConfiguration(format!(
                    "cell {ci} has a degenerate edge (identified endpoints)"
                )));
            }
            let (key, wrap_lo) = if ca < cb { ((ca, cb), wa) } else { ((cb, ca), wb) };
            edge_map.entry(key).or_default().push(HalfEdge {
                cell: ci,
                slot: k,
                v: [a, b],
                wrap_lo,
            });
        }
    }

    // physical tags of boundary line elements, keyed the same way
    let mut line_tags: HashMap<(usize, usize), i32> = HashMap::new();
    for ([a, b], t) in &tagged_lines {
        let (ca, _) = vertex_class[*a];
        let (cb, _) = vertex_class[*b];
        let key = if ca < cb { (ca, cb) } else { (cb, ca) };
        line_tags.insert(key, *t);
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut cell_edges: Vec<Vec<usize>> = cells.iter().map(|c| vec![usize::MAX; c.vertices.len()]).collect();
    let mut edge_entries: Vec<_> = edge_map.into_iter().collect();
    edge_entries.sort_by_key(|(k, _)| *k);
    for (key, halves) in edge_entries {
        if halves.len() > 2 {
            return Err(MeshError::InvalidConfiguration(format!(
                "edge shared by {} cells",
                halves.len()
            )));
        }
        let owner = &halves[0];
        let pa = vertices[owner.v[0]];
        let pb = vertices[owner.v[1]];
        let d = pb - pa;
        let length = d.norm();
        if length <= tol {
            return Err(MeshError::InvalidConfiguration("zero-length edge".into()));
        }
        let normal = Vec2::new(d.y, -d.x) / length;
        let midpoint = (pa + pb) * 0.5;
        let kind = if let Some(partner) = halves.get(1) {
            let dw = (
                owner.wrap_lo.0 - partner.wrap_lo.0,
                owner.wrap_lo.1 - partner.wrap_lo.1,
            );
            let shift = Vec2::new(f64::from(dw.0) * periods.x, f64::from(dw.1) * periods.y);
            EdgeKind::Interior {
                right: partner.cell,
                shift,
            }
        } else {
            EdgeKind::Boundary(tag(midpoint, line_tags.get(&key).copied()))
        };
        let id = edges.len();
        cell_edges[owner.cell][owner.slot] = id;
        if let Some(partner) = halves.get(1) {
            cell_edges[partner.cell][partner.slot] = id;
        }
        edges.push(Edge {
            v: owner.v,
            left: owner.cell,
            kind,
            normal,
            length,
            midpoint,
        });
    }
    for (ci, es) in cell_edges.iter().enumerate() {
        if es.iter().any(|&e| e == usize::MAX) {
            return Err(MeshError::InvalidConfiguration(format!(
                "cell {ci} has an unmatched edge slot"
            )));
        }
        cells[ci].edges = es.clone();
    }

    // vertex fans and per-cell class lists
    let mut vertex_fans: Vec<Vec<(usize, Wrap)>> = vec![Vec::new(); classes.positions.len()];
    let mut cell_vertex_classes: Vec<Vec<(usize, Wrap)>> = Vec::with_capacity(n_cells);
    for (ci, cell) in cells.iter().enumerate() {
        let mut list = Vec::with_capacity(cell.vertices.len());
        for &v in &cell.vertices {
            let (class, wrap) = vertex_class[v];
            if !vertex_fans[class].iter().any(|&(c, w)| c == ci && w == wrap) {
                vertex_fans[class].push((ci, wrap));
            }
            list.push((class, wrap));
        }
        cell_vertex_classes.push(list);
    }
    for fan in &mut vertex_fans {
        fan.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    }

    // a boundary cell touches a vertex class that lies on a physical boundary
    let mut class_on_boundary = vec![false; classes.positions.len()];
    for e in &edges {
        if e.is_boundary() {
            class_on_boundary[vertex_class[e.v[0]].0] = true;
            class_on_boundary[vertex_class[e.v[1]].0] = true;
        }
    }
    let on_physical_boundary = cell_vertex_classes
        .iter()
        .map(|list| list.iter().any(|&(c, _)| class_on_boundary[c]))
        .collect();

    let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
    let domain_area = cells.iter().map(|c| c.area).sum();

    let mesh = Mesh {
        vertices,
        cells,
        edges,
        h,
        domain_area,
        periods,
        cell_vertex_classes,
        vertex_fans,
        on_physical_boundary,
    };
    mesh.check_geometry()?;
    Ok(mesh)
}

impl Mesh {
    /// Closed-polygon identity per cell, computed from the cell's own vertex
    /// loop: the outward-weighted edge normals of a closed polygon sum to zero.
    fn check_geometry(&self) -> Result<(), MeshError> {
        for (ci, cell) in self.cells.iter().enumerate() {
            let nv = cell.vertices.len();
            let mut sum = Vec2::zeros();
            let mut perimeter = 0.0;
            for k in 0..nv {
                let a = self.vertices[cell.vertices[k]];
                let b = self.vertices[cell.vertices[(k + 1) % nv]];
                let d = b - a;
                sum += Vec2::new(d.y, -d.x);
                perimeter += d.norm();
            }
            if sum.norm() > 1e-12 * perimeter {
                return Err(MeshError::InvalidConfiguration(format!(
                    "cell {ci} violates the closed-polygon identity"
                )));
            }
        }
        Ok(())
    }
}

/// Boundary condition per axis of a Cartesian mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisBc {
    Periodic,
    Wall,
    Dirichlet,
}

#[derive(Debug, Clone, Copy)]
pub struct CartesianBc {
    pub x: AxisBc,
    pub y: AxisBc,
}

impl CartesianBc {
    pub fn periodic() -> Self {
        Self {
            x: AxisBc::Periodic,
            y: AxisBc::Periodic,
        }
    }

    pub fn wall() -> Self {
        Self {
            x: AxisBc::Wall,
            y: AxisBc::Wall,
        }
    }

    pub fn dirichlet() -> Self {
        Self {
            x: AxisBc::Dirichlet,
            y: AxisBc::Dirichlet,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Self {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn square(x0: f64, x1: f64) -> Self {
        Self {
            x0,
            x1,
            y0: x0,
            y1: x1,
        }
    }

    pub fn extent(&self) -> Vec2 {
        Vec2::new(self.x1 - self.x0, self.y1 - self.y0)
    }
}

/// Uniform `nx` by `ny` grid of rectangular cells over `domain`.
pub fn build_cartesian_mesh(
    nx: usize,
    ny: usize,
    domain: Rect,
    bc: CartesianBc,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidConfiguration(
            "cartesian mesh needs nx, ny >= 1".into(),
        ));
    }
    let ext = domain.extent();
    if ext.x <= 0.0 || ext.y <= 0.0 {
        return Err(MeshError::InvalidConfiguration(
            "cartesian domain has nonpositive extent".into(),
        ));
    }
    let dx = ext.x / nx as f64;
    let dy = ext.y / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(
                domain.x0 + i as f64 * dx,
                domain.y0 + j as f64 * dy,
            ));
        }
    }
    let mut cell_vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cell_vertices.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    let periodic = PeriodicSpec {
        x: (bc.x == AxisBc::Periodic).then_some((domain.x0, ext.x)),
        y: (bc.y == AxisBc::Periodic).then_some((domain.y0, ext.y)),
    };
    let mid_tol = 1e-9 * ext.norm();
    finish_mesh(
        MeshBuild {
            vertices,
            cell_vertices,
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
