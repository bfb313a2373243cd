//! Simplex meshes (triangles in 2-D, tetrahedra in 3-D) with per-element
//! conductivity, plus ellipsoidal conductivity inclusions.
//!
//! Coordinates are millimetres, conductivities S/m, volumes of inclusions
//! are specified in millilitres (1 mL = 1000 mm^3).
//!
//! A [`Mesh`] is immutable after construction; operations that "modify"
//! conductivity ([`apply_inclusion`], the electrode contact model) return a
//! new mesh. Construction validates the structural invariants below and
//! names the violated one in the error:
//!
//! * every element has strictly positive area / volume,
//! * every element conductivity is strictly positive and finite,
//! * every element node index refers to an existing node,
//! * the element adjacency graph (elements sharing a node) is connected.

pub mod cylinder;
pub mod disc;
pub mod io;

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Spatial dimension of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Nodes per simplex element: 3 (triangle) or 4 (tetrahedron).
    pub fn nodes_per_element(self) -> usize {
        self.as_usize() + 1
    }
}

/// Boundary description derived at construction time.
///
/// In 2-D the boundary is a set of edges; in 3-D a set of triangles oriented
/// so that their normals point out of the domain.
#[derive(Clone, Debug)]
pub enum SurfaceTopology {
    Edges(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// An immutable simplex mesh with per-element conductivity.
#[derive(Clone, Debug)]
pub struct Mesh {
    dim: Dim,
    nodes: Vec<Vec3>,
    /// Flattened element connectivity, stride = `dim.nodes_per_element()`.
    element_nodes: Vec<usize>,
    /// One conductivity per element, S/m.
    conductivity: Vec<f64>,
    /// Element areas (mm^2) or volumes (mm^3), always positive.
    measures: Vec<f64>,
    /// Sorted indices of nodes on the domain boundary.
    boundary_nodes: Vec<usize>,
    surface: SurfaceTopology,
}

impl Mesh {
    /// Build and validate a mesh. `element_nodes` is flattened connectivity
    /// with stride `dim.nodes_per_element()`.
    pub fn new(
        dim: Dim,
        nodes: Vec<Vec3>,
        element_nodes: Vec<usize>,
        conductivity: Vec<f64>,
    ) -> Result<Mesh> {
        let stride = dim.nodes_per_element();
        if nodes.is_empty() {
            return Err(Error::MeshInvariant("mesh has no nodes".into()));
        }
        if element_nodes.is_empty() || element_nodes.len() % stride != 0 {
            return Err(Error::MeshInvariant(format!(
                "element list length {} is not a positive multiple of {stride}",
                element_nodes.len()
            )));
        }
        let n_elements = element_nodes.len() / stride;
        if conductivity.len() != n_elements {
            return Err(Error::MeshInvariant(format!(
                "conductivity count {} does not match element count {n_elements}",
                conductivity.len()
            )));
        }
        for (e, chunk) in element_nodes.chunks_exact(stride).enumerate() {
            for &n in chunk {
                if n >= nodes.len() {
                    return Err(Error::MeshInvariant(format!(
                        "element {e} references missing node {n} (mesh has {})",
                        nodes.len()
                    )));
                }
            }
            let mut sorted = chunk.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != stride {
                return Err(Error::MeshInvariant(format!(
                    "element {e} repeats a node index"
                )));
            }
        }
        for (p, node) in nodes.iter().enumerate() {
            if !node.iter().all(|c| c.is_finite()) {
                return Err(Error::MeshInvariant(format!(
                    "node {p} has a non-finite coordinate"
                )));
            }
            if dim == Dim::Two && node[2] != 0.0 {
                return Err(Error::MeshInvariant(format!(
                    "node {p} of a 2-D mesh has nonzero z"
                )));
            }
        }
        let mut measures = Vec::with_capacity(n_elements);
        for (e, chunk) in element_nodes.chunks_exact(stride).enumerate() {
            let m = signed_measure(dim, &nodes, chunk);
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::MeshInvariant(format!(
                    "element {e} has non-positive {} ({m:e})",
                    if dim == Dim::Two { "area" } else { "volume" }
                )));
            }
            measures.push(m);
        }
        for (e, &s) in conductivity.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::MeshInvariant(format!(
                    "element {e} has non-positive or non-finite conductivity {s}"
                )));
            }
        }
        check_connected(n_elements, stride, &element_nodes, nodes.len())?;

        let surface = extract_surface(dim, &element_nodes, stride);
        let mut boundary_nodes: Vec<usize> = match &surface {
            SurfaceTopology::Edges(edges) => edges.iter().flatten().copied().collect(),
            SurfaceTopology::Triangles(tris) => tris.iter().flatten().copied().collect(),
        };
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        if boundary_nodes.is_empty() {
            return Err(Error::MeshInvariant("mesh has no boundary".into()));
        }

        Ok(Mesh {
            dim,
            nodes,
            element_nodes,
            conductivity,
            measures,
            boundary_nodes,
            surface,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.conductivity.len()
    }

    pub fn node(&self, i: usize) -> Vec3 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Node indices of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        let stride = self.dim.nodes_per_element();
        &self.element_nodes[e * stride..(e + 1) * stride]
    }

    pub fn conductivity(&self) -> &[f64] {
        &self.conductivity
    }

    /// Area (2-D, mm^2) or volume (3-D, mm^3) of element `e`.
    pub fn measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    pub fn centroid(&self, e: usize) -> Vec3 {
        let chunk = self.element(e);
        let mut c = [0.0; 3];
        for &n in chunk {
            c = vec3::add(c, self.nodes[n]);
        }
        vec3::scale(c, 1.0 / chunk.len() as f64)
    }

    /// Sorted node indices lying on the domain boundary.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn surface(&self) -> &SurfaceTopology {
        &self.surface
    }

    /// Same topology with a different per-element conductivity vector.
    pub fn with_conductivity(&self, conductivity: Vec<f64>) -> Result<Mesh> {
        if conductivity.len() != self.element_count() {
            return Err(Error::DimensionMismatch(format!(
                "conductivity count {} does not match element count {}",
                conductivity.len(),
                self.element_count()
            )));
        }
        for (e, &s) in conductivity.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::MeshInvariant(format!(
                    "element {e} has non-positive or non-finite conductivity {s}"
                )));
            }
        }
        let mut out = self.clone();
        out.conductivity = conductivity;
        Ok(out)
    }

    /// Same topology with every element set to `sigma` S/m.
    pub fn with_uniform_conductivity(&self, sigma: f64) -> Result<Mesh> {
        self.with_conductivity(vec![sigma; self.element_count()])
    }

    /// Axis-aligned bounding box of all nodes: (min, max).
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for n in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(n[k]);
                hi[k] = hi[k].max(n[k]);
            }
        }
        (lo, hi)
    }

    /// Does element `e` contain `p`? Barycentric test with a small slack so
    /// points on shared faces belong to at least one of the neighbours.
    pub fn element_contains(&self, e: usize, p: Vec3) -> bool {
        const SLACK: f64 = 1e-9;
        let chunk = self.element(e);
        let a = self.nodes[chunk[0]];
        match self.dim {
            Dim::Two => {
                let b = self.nodes[chunk[1]];
                let c = self.nodes[chunk[2]];
                let area2 = 2.0 * self.measures[e];
                let w0 = cross2(vec3::sub(b, p), vec3::sub(c, p)) / area2;
                let w1 = cross2(vec3::sub(c, p), vec3::sub(a, p)) / area2;
                let w2 = 1.0 - w0 - w1;
                w0 >= -SLACK && w1 >= -SLACK && w2 >= -SLACK
            }
            Dim::Three => {
                let b = self.nodes[chunk[1]];
                let c = self.nodes[chunk[2]];
                let d = self.nodes[chunk[3]];
                let vol6 = 6.0 * self.measures[e];
                let w0 = det3(vec3::sub(b, p), vec3::sub(c, p), vec3::sub(d, p)) / vol6;
                let w1 = det3(vec3::sub(a, p), vec3::sub(c, p), vec3::sub(d, p)) / -vol6;
                let w2 = det3(vec3::sub(a, p), vec3::sub(b, p), vec3::sub(d, p)) / vol6;
                let w3 = 1.0 - w0 - w1 - w2;
                w0 >= -SLACK && w1 >= -SLACK && w2 >= -SLACK && w3 >= -SLACK
            }
        }
    }
}

fn cross2(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    vec3::dot(a, vec3::cross(b, c))
}

/// Signed area (2-D) or signed volume (3-D) of one element.
fn signed_measure(dim: Dim, nodes: &[Vec3], chunk: &[usize]) -> f64 {
    let a = nodes[chunk[0]];
    match dim {
        Dim::Two => {
            let b = vec3::sub(nodes[chunk[1]], a);
            let c = vec3::sub(nodes[chunk[2]], a);
            0.5 * cross2(b, c)
        }
        Dim::Three => {
            let b = vec3::sub(nodes[chunk[1]], a);
            let c = vec3::sub(nodes[chunk[2]], a);
            let d = vec3::sub(nodes[chunk[3]], a);
            det3(b, c, d) / 6.0
        }
    }
}

/// Union-find connectivity over elements that share at least one node.
fn check_connected(
    n_elements: usize,
    stride: usize,
    element_nodes: &[usize],
    n_nodes: usize,
) -> Result<()> {
    let mut parent: Vec<usize> = (0..n_elements).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // Last element seen touching each node.
    let mut node_owner = vec![usize::MAX; n_nodes];
    for e in 0..n_elements {
        for &n in &element_nodes[e * stride..(e + 1) * stride] {
            if node_owner[n] == usize::MAX {
                node_owner[n] = e;
            } else {
                let a = find(&mut parent, e);
                let b = find(&mut parent, node_owner[n]);
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let root = find(&mut parent, 0);
    for e in 1..n_elements {
        if find(&mut parent, e) != root {
            return Err(Error::MeshInvariant(format!(
                "element adjacency graph is disconnected (element {e} unreachable from element 0)"
            )));
        }
    }
    // Unreferenced nodes are legal only if they are nobody's business; we
    // reject them because downstream code treats node indices as dense.
    if let Some(orphan) = node_owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::MeshInvariant(format!(
            "node {orphan} is not referenced by any element"
        )));
    }
    Ok(())
}

/// Faces occurring in exactly one element form the boundary. 3-D faces are
/// returned wound so their normals point out of the domain (this relies on
/// every tetrahedron having positive signed volume, checked beforehand).
fn extract_surface(dim: Dim, element_nodes: &[usize], stride: usize) -> SurfaceTopology {
    match dim {
        Dim::Two => {
            let mut map: std::collections::HashMap<(usize, usize), (usize, [usize; 2])> =
                std::collections::HashMap::new();
            for chunk in element_nodes.chunks_exact(stride) {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let (a, b) = (chunk[i], chunk[j]);
                    let key = (a.min(b), a.max(b));
                    map.entry(key)
                        .and_modify(|(count, _)| *count += 1)
                        .or_insert((1, [a, b]));
                }
            }
            let mut edges: Vec<[usize; 2]> = map
                .into_values()
                .filter(|(count, _)| *count == 1)
                .map(|(_, e)| e)
                .collect();
            edges.sort_unstable();
            SurfaceTopology::Edges(edges)
        }
        Dim::Three => {
            // Outward-oriented faces of a positively oriented tetrahedron.
            const FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];
            let mut map: std::collections::HashMap<[usize; 3], (usize, [usize; 3])> =
                std::collections::HashMap::new();
            for chunk in element_nodes.chunks_exact(stride) {
                for f in FACES {
                    let tri = [chunk[f[0]], chunk[f[1]], chunk[f[2]]];
                    let mut key = tri;
                    key.sort_unstable();
                    map.entry(key)
                        .and_modify(|(count, _)| *count += 1)
                        .or_insert((1, tri));
                }
            }
            let mut tris: Vec<[usize; 3]> = map
                .into_values()
                .filter(|(count, _)| *count == 1)
                .map(|(_, t)| t)
                .collect();
            tris.sort_unstable();
            SurfaceTopology::Triangles(tris)
        }
    }
}

// ---------------------------------------------------------------------------
// Ellipsoid inclusions
// ---------------------------------------------------------------------------

/// An axis-aligned ellipsoidal conductivity inclusion.
///
/// `radii` are the semi-axes in mm. All radii zero is the legal
/// "no inclusion" sentinel produced by [`volume_to_ellipsoid`] for volume 0;
/// it contains no points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipsoidInclusion {
    pub center: Vec3,
    pub radii: Vec3,
    pub conductivity: f64,
}

impl EllipsoidInclusion {
    pub fn contains(&self, p: Vec3) -> bool {
        if self.radii.iter().any(|&r| r <= 0.0) {
            return false;
        }
        let mut s = 0.0;
        for k in 0..3 {
            let t = (p[k] - self.center[k]) / self.radii[k];
            s += t * t;
        }
        s <= 1.0
    }

    /// Volume in mL implied by the semi-axes.
    pub fn volume_ml(&self) -> f64 {
        std::f64::consts::PI * 4.0 / 3.0 * self.radii[0] * self.radii[1] * self.radii[2] / 1000.0
    }
}

/// Convert a fluid volume in mL into an ellipsoid with the given aspect
/// ratio (relative semi-axis proportions) centred at `center`.
///
/// Volume 0 produces the all-zero-radii "no inclusion" sentinel.
pub fn volume_to_ellipsoid(
    volume_ml: f64,
    aspect: Vec3,
    center: Vec3,
    conductivity: f64,
) -> Result<EllipsoidInclusion> {
    if !(volume_ml >= 0.0) || !volume_ml.is_finite() {
        return Err(Error::param(format!(
            "inclusion volume must be finite and >= 0 mL, got {volume_ml}"
        )));
    }
    if aspect.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::param(format!(
            "aspect ratios must be positive and finite, got {aspect:?}"
        )));
    }
    if !(conductivity > 0.0) || !conductivity.is_finite() {
        return Err(Error::param(format!(
            "inclusion conductivity must be positive and finite, got {conductivity}"
        )));
    }
    if volume_ml == 0.0 {
        return Ok(EllipsoidInclusion {
            center,
            radii: [0.0; 3],
            conductivity,
        });
    }
    let volume_mm3 = volume_ml * 1000.0;
    let scale =
        (volume_mm3 * 3.0 / (4.0 * std::f64::consts::PI * aspect[0] * aspect[1] * aspect[2]))
            .cbrt();
    Ok(EllipsoidInclusion {
        center,
        radii: vec3::scale(aspect, scale),
        conductivity,
    })
}

/// New mesh in which every element whose centroid falls inside the ellipsoid
/// takes the inclusion conductivity; all other elements keep theirs.
pub fn apply_inclusion(mesh: &Mesh, inclusion: &EllipsoidInclusion) -> Result<Mesh> {
    let mut sigma = mesh.conductivity().to_vec();
    for e in 0..mesh.element_count() {
        if inclusion.contains(mesh.centroid(e)) {
            sigma[e] = inclusion.conductivity;
        }
    }
    mesh.with_conductivity(sigma)
}
