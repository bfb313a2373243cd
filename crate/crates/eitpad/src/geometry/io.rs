//! Plain-text mesh file format.
//!
//! Line oriented, whitespace delimited, `#` starts a comment that runs to
//! the end of the line, blank lines are ignored:
//!
//! ```text
//! dim 3
//! nodes 4
//! 0.0 0.0 0.0
//! 1.0 0.0 0.0
//! 0.0 1.0 0.0
//! 0.0 0.0 1.0
//! elements 1
//! 0 1 2 3
//! sigma 1          # optional section; defaults to 1.0 S/m per element
//! 0.2
//! ```
//!
//! Node lines carry 2 coordinates for `dim 2` and 3 for `dim 3`; element
//! lines carry 0-based node indices (3 for triangles, 4 for tetrahedra).
//! Parse errors report the 1-based line number; structural problems
//! (inverted elements, bad indices, disconnected meshes, ...) surface as the
//! same invariant errors [`Mesh::new`] raises.

use super::{Dim, Mesh};
use crate::error::{Error, Result};
use crate::vec3::Vec3;
use std::path::Path;

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::MeshFormat {
        line,
        message: message.into(),
    }
}

/// Parse the text form of a mesh. See the module docs for the grammar.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    // (1-based line number, payload with comments stripped)
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, raw)| {
            let payload = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            (i + 1, payload.trim())
        })
        .filter(|(_, p)| !p.is_empty());

    let mut next = || lines.next().ok_or_else(|| format_err(0, "unexpected end of file"));

    // dim
    let (ln, line) = next()?;
    let mut it = line.split_whitespace();
    if it.next() != Some("dim") {
        return Err(format_err(ln, format!("expected 'dim <2|3>', got '{line}'")));
    }
    let dim = match it.next() {
        Some("2") => Dim::Two,
        Some("3") => Dim::Three,
        other => {
            return Err(format_err(
                ln,
                format!("dim must be 2 or 3, got '{}'", other.unwrap_or("")),
            ))
        }
    };
    if it.next().is_some() {
        return Err(format_err(ln, "trailing tokens after dim"));
    }

    // nodes
    let (ln, line) = next()?;
    let n_nodes = parse_section_header(ln, line, "nodes")?;
    if n_nodes == 0 {
        return Err(format_err(ln, "node count must be positive"));
    }
    let mut nodes: Vec<Vec3> = Vec::with_capacity(n_nodes);
    let coords = dim.as_usize();
    for _ in 0..n_nodes {
        let (ln, line) = next().map_err(|_| format_err(0, "file ends inside node list"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| format_err(ln, format!("bad coordinate '{tok}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != coords {
            return Err(format_err(
                ln,
                format!("expected {coords} coordinates, got {}", values.len()),
            ));
        }
        let mut p = [0.0; 3];
        p[..coords].copy_from_slice(&values);
        nodes.push(p);
    }

    // elements
    let (ln, line) = next().map_err(|_| format_err(0, "missing elements section"))?;
    let n_elements = parse_section_header(ln, line, "elements")?;
    if n_elements == 0 {
        return Err(format_err(ln, "element count must be positive"));
    }
    let stride = dim.nodes_per_element();
    let mut element_nodes: Vec<usize> = Vec::with_capacity(n_elements * stride);
    for _ in 0..n_elements {
        let (ln, line) = next().map_err(|_| format_err(0, "file ends inside element list"))?;
        let values: Vec<usize> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| format_err(ln, format!("bad node index '{tok}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != stride {
            return Err(format_err(
                ln,
                format!("expected {stride} node indices, got {}", values.len()),
            ));
        }
        element_nodes.extend_from_slice(&values);
    }

    // optional sigma
    let mut conductivity = vec![1.0; n_elements];
    if let Some((ln, line)) = lines.next() {
        let n_sigma = parse_section_header(ln, line, "sigma")?;
        if n_sigma != n_elements {
            return Err(format_err(
                ln,
                format!("sigma count {n_sigma} does not match element count {n_elements}"),
            ));
        }
        for sigma in conductivity.iter_mut() {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| format_err(0, "file ends inside sigma list"))?;
            *sigma = line
                .trim()
                .parse::<f64>()
                .map_err(|_| format_err(ln, format!("bad conductivity '{line}'")))?;
        }
        if let Some((ln, line)) = lines.next() {
            return Err(format_err(ln, format!("unexpected trailing content '{line}'")));
        }
    }

    Mesh::new(dim, nodes, element_nodes, conductivity)
}

fn parse_section_header(ln: usize, line: &str, keyword: &str) -> Result<usize> {
    let mut it = line.split_whitespace();
    let head = it.next().unwrap_or("");
    if head != keyword {
        return Err(format_err(
            ln,
            format!("expected '{keyword} <count>', got '{line}'"),
        ));
    }
    let count = it
        .next()
        .ok_or_else(|| format_err(ln, format!("'{keyword}' needs a count")))?
        .parse::<usize>()
        .map_err(|_| format_err(ln, format!("bad {keyword} count")))?;
    if it.next().is_some() {
        return Err(format_err(ln, format!("trailing tokens after {keyword} count")));
    }
    Ok(count)
}

/// Serialise a mesh in the format [`parse_mesh`] reads. Floats use the
/// shortest representation that round-trips, so save/load is lossless.
pub fn format_mesh(mesh: &Mesh) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let coords = mesh.dim().as_usize();
    writeln!(out, "dim {coords}").unwrap();
    writeln!(out, "nodes {}", mesh.node_count()).unwrap();
    for p in mesh.nodes() {
        for k in 0..coords {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{:?}", p[k]).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "elements {}", mesh.element_count()).unwrap();
    for e in 0..mesh.element_count() {
        let chunk = mesh.element(e);
        for (k, &n) in chunk.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{n}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "sigma {}", mesh.element_count()).unwrap();
    for &s in mesh.conductivity() {
        writeln!(out, "{s:?}").unwrap();
    }
    out
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_mesh(&text)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), format_mesh(mesh))?;
    Ok(())
}
