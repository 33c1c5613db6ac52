//! Reconstruction stencils.
//!
//! Interior cells use the full vertex neighborhood (all cells touching the
//! reconstruction cell on a face or a vertex) for the optimal polynomial, and
//! one vertex fan per cell vertex for the low-degree polynomials. Cells that
//! touch a physical boundary replace the vertex neighborhood by its first two
//! layers, and keep only vertex fans with at least three cells; no ghost
//! cells are ever introduced.

use super::{Mesh, MeshError, Wrap};
use crate::Vec2;

/// One member of a stencil: a cell together with the translation that moves
/// its geometry into the home cell's frame (nonzero only across periodic
/// seams).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilEntry {
    pub cell: usize,
    pub offset: Vec2,
}

#[derive(Debug, Clone)]
pub struct CellStencils {
    /// Stencil of the optimal polynomial. The home cell is entry 0 with zero
    /// offset; the remaining entries are sorted deterministically.
    pub opt: Vec<StencilEntry>,
    /// Vertex stencils, as index lists into `opt` (so zero-padding of the
    /// low-degree least-squares blocks is a plain index map).
    pub vertex: Vec<Vec<usize>>,
    pub boundary: bool,
}

#[derive(Debug)]
pub struct StencilSet {
    pub cells: Vec<CellStencils>,
}

/// Minimum number of stencil cells for the degree-2 least-squares problem:
/// five rows besides the conserved home average.
pub const MIN_OPT_STENCIL: usize = 6;
/// Minimum number of cells of a surviving vertex stencil.
pub const MIN_VERTEX_STENCIL: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct MemberKey(usize, i64, i64);

fn key_of(cell: usize, w: Wrap) -> MemberKey {
    MemberKey(cell, i64::from(w.0), i64::from(w.1))
}

/// Cells touching `cell` on a face or vertex, as (member, wrap relative to the
/// home instance). Includes the home cell itself with zero wrap.
fn vertex_neighborhood(mesh: &Mesh, cell: usize, base: Wrap) -> Vec<(usize, Wrap)> {
    let mut out: Vec<(usize, Wrap)> = Vec::new();
    for &(class, wrap) in &mesh.cell_vertex_classes[cell] {
        for &(member, member_wrap) in &mesh.vertex_fans[class] {
            // member instance wrap relative to the home instance, then shifted
            // by the frame `base` of the home instance itself
            let rel = (
                member_wrap.0 - wrap.0 + base.0,
                member_wrap.1 - wrap.1 + base.1,
            );
            if !out.iter().any(|&(c, w)| c == member && w == rel) {
                out.push((member, rel));
            }
        }
    }
    out
}

/// Build the per-cell stencils for the CWENOZ reconstruction.
pub fn build_stencils(mesh: &Mesh) -> Result<StencilSet, MeshError> {
    let mut cells = Vec::with_capacity(mesh.n_cells());
    for ci in 0..mesh.n_cells() {
        let boundary = mesh.on_physical_boundary[ci];
        let layer1 = vertex_neighborhood(mesh, ci, (0, 0));
        let mut opt_members = layer1.clone();
        if boundary {
            // second layer: vertex neighborhoods of every first-layer cell
            for &(member, wrap) in &layer1 {
                for (c2, w2) in vertex_neighborhood(mesh, member, wrap) {
                    if !opt_members.iter().any(|&(c, w)| c == c2 && w == w2) {
                        opt_members.push((c2, w2));
                    }
                }
            }
        }
        // home entry first, remaining members in a deterministic order
        let mut rest: Vec<(usize, Wrap)> = opt_members
            .into_iter()
            .filter(|&(c, w)| !(c == ci && w == (0, 0)))
            .collect();
        rest.sort_by_key(|&(c, w)| key_of(c, w));
        let mut opt = Vec::with_capacity(rest.len() + 1);
        opt.push(StencilEntry {
            cell: ci,
            offset: Vec2::zeros(),
        });
        opt.extend(rest.iter().map(|&(c, w)| StencilEntry {
            cell: c,
            offset: mesh.wrap_offset(w),
        }));
        if opt.len() < MIN_OPT_STENCIL {
            return Err(MeshError::MeshTooCoarse {
                cell: ci,
                got: opt.len(),
                need: MIN_OPT_STENCIL,
            });
        }

        // index of an (cell, wrap) member within `opt`
        let rest_keys: Vec<MemberKey> = rest.iter().map(|&(c, w)| key_of(c, w)).collect();
        let locate = |c: usize, w: Wrap| -> usize {
            if c == ci && w == (0, 0) {
                0
            } else {
                1 + rest_keys.binary_search(&key_of(c, w)).expect("vertex fan member missing from optimal stencil")
            }
        };

        let mut vertex = Vec::new();
        for &(class, wrap) in &mesh.cell_vertex_classes[ci] {
            let fan = &mesh.vertex_fans[class];
            if fan.len() < MIN_VERTEX_STENCIL {
                continue;
            }
            let ids: Vec<usize> = fan
                .iter()
                .map(|&(c, w)| locate(c, (w.0 - wrap.0, w.1 - wrap.1)))
                .collect();
            vertex.push(ids);
        }
        cells.push(CellStencils {
            opt,
            vertex,
            boundary,
        });
    }
    Ok(StencilSet { cells })
}
