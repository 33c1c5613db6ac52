//! Gmsh MSH 2.2 ASCII reader and a minimal writer.
//!
//! Supports `$MeshFormat`, `$Nodes` and `$Elements` sections with 2D triangle
//! elements (type 2). Line elements (type 1) are kept for boundary tagging and
//! point elements (type 15) are skipped; anything else is rejected.

use super::{finish_mesh, BoundaryKind, Mesh, MeshBuild, MeshError, PeriodicSpec};
use crate::Vec2;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

/// How physical-group tags of boundary lines map to boundary conditions.
#[derive(Debug, Clone)]
pub struct GmshBc {
    pub default: BoundaryKind,
    pub by_tag: Vec<(i32, BoundaryKind)>,
    /// Pair boundary edges across the bounding box in x and/or y.
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl Default for GmshBc {
    fn default() -> Self {
        Self {
            default: BoundaryKind::Wall,
            by_tag: Vec::new(),
            periodic_x: false,
            periodic_y: false,
        }
    }
}

impl GmshBc {
    pub fn periodic() -> Self {
        Self {
            periodic_x: true,
            periodic_y: true,
            ..Self::default()
        }
    }
}

fn parse_err(section: &str, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        section: section.to_string(),
        message: message.into(),
    }
}

/// Read a Gmsh MSH 2.2 ASCII file into a [`Mesh`].
pub fn import_gmsh(path: &Path, bc: &GmshBc) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    import_gmsh_str(&text, bc)
}

/// Same as [`import_gmsh`], from an in-memory string.
pub fn import_gmsh_str(text: &str, bc: &GmshBc) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().map(str::trim);
    let mut node_ids: HashMap<u64, usize> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut triangles: Vec<Vec<usize>> = Vec::new();
    let mut tagged_lines: Vec<([usize; 2], i32)> = Vec::new();
    let mut saw_format = false;

    while let Some(line) = lines.next() {
        match line {
            "$MeshFormat" => {
                let header = lines
                    .next()
                    .ok_or_else(|| parse_err("MeshFormat", "missing version line"))?;
                let version = header.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(parse_err(
                        "MeshFormat",
                        format!("unsupported version {version}, need 2.x ASCII"),
                    ));
                }
                if lines.next() != Some("$EndMeshFormat") {
                    return Err(parse_err("MeshFormat", "missing $EndMeshFormat"));
                }
                saw_format = true;
            }
            "$Nodes" => {
                let count: usize = lines
                    .next()
                    .and_then(|l| l.parse().ok())
                    .ok_or_else(|| parse_err("Nodes", "bad node count"))?;
                for _ in 0..count {
                    let l = lines.next().ok_or_else(|| parse_err("Nodes", "truncated"))?;
                    let mut it = l.split_whitespace();
                    let id: u64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("Nodes", format!("bad node line: {l}")))?;
                    let x: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("Nodes", format!("bad node line: {l}")))?;
                    let y: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("Nodes", format!("bad node line: {l}")))?;
                    node_ids.insert(id, vertices.len());
                    vertices.push(Vec2::new(x, y));
                }
                if lines.next() != Some("$EndNodes") {
                    return Err(parse_err("Nodes", "missing $EndNodes"));
                }
            }
            "$Elements" => {
                let count: usize = lines
                    .next()
                    .and_then(|l| l.parse().ok())
                    .ok_or_else(|| parse_err("Elements", "bad element count"))?;
                for _ in 0..count {
                    let l = lines
                        .next()
                        .ok_or_else(|| parse_err("Elements", "truncated"))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() < 3 {
                        return Err(parse_err("Elements", format!("bad element line: {l}")));
                    }
                    let etype: u32 = toks[1]
                        .parse()
                        .map_err(|_| parse_err("Elements", format!("bad element type in: {l}")))?;
                    let ntags: usize = toks[2]
                        .parse()
                        .map_err(|_| parse_err("Elements", format!("bad tag count in: {l}")))?;
                    let phys: i32 = if ntags >= 1 {
                        toks.get(3)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| parse_err("Elements", format!("bad physical tag in: {l}")))?
                    } else {
                        0
                    };
                    let nodes = &toks[3 + ntags..];
                    let lookup = |t: &str| -> Result<usize, MeshError> {
                        let id: u64 = t
                            .parse()
                            .map_err(|_| parse_err("Elements", format!("bad node ref in: {l}")))?;
                        node_ids
                            .get(&id)
                            .copied()
                            .ok_or_else(|| parse_err("Elements", format!("unknown node {id}")))
                    };
                    match etype {
                        2 => {
                            if nodes.len() != 3 {
                                return Err(parse_err("Elements", format!("triangle needs 3 nodes: {l}")));
                            }
                            triangles.push(vec![lookup(nodes[0])?, lookup(nodes[1])?, lookup(nodes[2])?]);
                        }
                        1 => {
                            if nodes.len() != 2 {
                                return Err(parse_err("Elements", format!("line needs 2 nodes: {l}")));
                            }
                            tagged_lines.push(([lookup(nodes[0])?, lookup(nodes[1])?], phys));
                        }
                        15 => {}
                        other => return Err(MeshError::UnsupportedElement(other)),
                    }
                }
                if lines.next() != Some("$EndElements") {
                    return Err(parse_err("Elements", "missing $EndElements"));
                }
            }
            l if l.starts_with('$') => {
                // skip unknown sections like $PhysicalNames
                let end = format!("$End{}", &l[1..]);
                for inner in lines.by_ref() {
                    if inner == end {
                        break;
                    }
                }
            }
            _ => {}
        }
    }

    if !saw_format {
        return Err(parse_err("MeshFormat", "missing $MeshFormat section"));
    }
    if triangles.is_empty() {
        return Err(parse_err("Elements", "no triangle elements found"));
    }

    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for v in &vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let periodic = PeriodicSpec {
        x: bc.periodic_x.then_some((lo.x, hi.x - lo.x)),
        y: bc.periodic_y.then_some((lo.y, hi.y - lo.y)),
    };
    let by_tag = bc.by_tag.clone();
    let default = bc.default;
    finish_mesh(
        MeshBuild {
            vertices,
            cell_vertices: triangles,
            periodic,
            tagged_lines,
        },
        move |_, tag| {
            tag.and_then(|t| by_tag.iter().find(|(k, _)| *k == t).map(|(_, b)| *b))
                .unwrap_or(default)
        },
    )
}

/// Write a triangle mesh in MSH 2.2 ASCII format.
pub fn write_gmsh22(path: &Path, vertices: &[Vec2], triangles: &[[usize; 3]]) -> Result<(), MeshError> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(out, "{}", vertices.len());
    for (k, v) in vertices.iter().enumerate() {
        let _ = writeln!(out, "{} {:.17e} {:.17e} 0", k + 1, v.x, v.y);
    }
    out.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(out, "{}", triangles.len());
    for (k, t) in triangles.iter().enumerate() {
        let _ = writeln!(out, "{} 2 2 0 1 {} {} {}", k + 1, t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out.push_str("$EndElements\n");
    fs::write(path, out).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}
