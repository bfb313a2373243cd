//! Geometry of the domain boundary: closest-point projection, outward
//! normals, and walking along the surface by arc length.
//!
//! In 3-D the boundary is the oriented triangle soup extracted by the mesh;
//! walking takes small straight steps in the current tangent direction and
//! re-projects onto the surface, carrying the direction (and an auxiliary
//! tangent, used to transport a second grid axis) across the curvature. In
//! 2-D the boundary is a closed polyline and walking is exact arc-length
//! traversal.

use crate::error::{Error, Result};
use crate::geometry::{Dim, Mesh, SurfaceTopology};
use crate::vec3::{self, Vec3};
use std::collections::HashMap;

/// Step length for the 3-D surface walk, small against any electrode
/// spacing we care about (mm).
const WALK_STEP_MM: f64 = 1.0;

#[derive(Clone, Debug)]
struct LoopPolyline {
    /// Node indices in boundary orientation (interior on the left).
    nodes: Vec<usize>,
    /// Cumulative arc length; `cum[i]` is the distance from the loop start
    /// to vertex `i`, `cum[len]` the full perimeter.
    cum: Vec<f64>,
}

#[derive(Clone, Debug)]
enum SurfaceKind {
    Polyline(Vec<LoopPolyline>),
    TriSoup {
        tris: Vec<[usize; 3]>,
        /// Unit outward normal per triangle.
        normals: Vec<Vec3>,
    },
}

/// Boundary geometry of a mesh, self-contained (owns coordinate copies).
#[derive(Clone, Debug)]
pub struct Surface {
    dim: Dim,
    nodes: Vec<Vec3>,
    boundary_nodes: Vec<usize>,
    kind: SurfaceKind,
    /// Unit outward normal per boundary node (area/length weighted).
    node_normals: HashMap<usize, Vec3>,
}

/// Result of a surface walk: end position plus the transported frame.
#[derive(Clone, Copy, Debug)]
pub struct WalkEnd {
    pub pos: Vec3,
    pub dir: Vec3,
    pub aux: Vec3,
}

impl Surface {
    pub fn new(mesh: &Mesh) -> Result<Surface> {
        let nodes = mesh.nodes().to_vec();
        let boundary_nodes = mesh.boundary_nodes().to_vec();
        let (kind, node_normals) = match mesh.surface() {
            SurfaceTopology::Edges(edges) => {
                let loops = chain_loops(edges, &nodes)?;
                let mut normals: HashMap<usize, Vec3> = HashMap::new();
                for lp in &loops {
                    let n = lp.nodes.len();
                    for i in 0..n {
                        let a = lp.nodes[i];
                        let b = lp.nodes[(i + 1) % n];
                        let d = vec3::sub(nodes[b], nodes[a]);
                        // Interior is on the left of a->b, so outward is the
                        // right-hand normal.
                        let out = [d[1], -d[0], 0.0];
                        for node in [a, b] {
                            let e = normals.entry(node).or_insert([0.0; 3]);
                            *e = vec3::add(*e, out);
                        }
                    }
                }
                finalize_normals(&mut normals)?;
                (SurfaceKind::Polyline(loops), normals)
            }
            SurfaceTopology::Triangles(tris) => {
                let mut face_normals = Vec::with_capacity(tris.len());
                let mut normals: HashMap<usize, Vec3> = HashMap::new();
                for t in tris {
                    let a = nodes[t[0]];
                    let b = nodes[t[1]];
                    let c = nodes[t[2]];
                    let raw = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
                    let unit = vec3::normalize(raw).ok_or_else(|| {
                        Error::MeshInvariant(format!("degenerate boundary face {t:?}"))
                    })?;
                    face_normals.push(unit);
                    for &node in t {
                        let e = normals.entry(node).or_insert([0.0; 3]);
                        // `raw` has twice the face area as magnitude, which
                        // is exactly the area weighting we want.
                        *e = vec3::add(*e, raw);
                    }
                }
                finalize_normals(&mut normals)?;
                (
                    SurfaceKind::TriSoup {
                        tris: tris.clone(),
                        normals: face_normals,
                    },
                    normals,
                )
            }
        };
        Ok(Surface {
            dim: mesh.dim(),
            nodes,
            boundary_nodes,
            kind,
            node_normals,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Closest point on the boundary to `p`, with the index of the face
    /// (3-D triangle) or none (2-D) that realises it.
    pub fn closest_point(&self, p: Vec3) -> (Vec3, Option<usize>) {
        match &self.kind {
            SurfaceKind::Polyline(loops) => {
                let mut best = (f64::INFINITY, p);
                for lp in loops {
                    let n = lp.nodes.len();
                    for i in 0..n {
                        let a = self.nodes[lp.nodes[i]];
                        let b = self.nodes[lp.nodes[(i + 1) % n]];
                        let q = closest_on_segment(p, a, b);
                        let d = vec3::distance(p, q);
                        if d < best.0 {
                            best = (d, q);
                        }
                    }
                }
                (best.1, None)
            }
            SurfaceKind::TriSoup { tris, .. } => {
                let mut best = (f64::INFINITY, p, 0usize);
                for (i, t) in tris.iter().enumerate() {
                    let q = closest_on_triangle(
                        p,
                        self.nodes[t[0]],
                        self.nodes[t[1]],
                        self.nodes[t[2]],
                    );
                    let d = vec3::distance(p, q);
                    if d < best.0 {
                        best = (d, q, i);
                    }
                }
                (best.1, Some(best.2))
            }
        }
    }

    /// Nearest boundary *node* to `p` and its distance. Ties break to the
    /// lower node index (boundary nodes are stored sorted).
    pub fn nearest_boundary_node(&self, p: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for &b in &self.boundary_nodes {
            let d = vec3::distance(p, self.nodes[b]);
            if d < best.1 {
                best = (b, d);
            }
        }
        (best.0, best.1)
    }

    /// Unit outward normal at a boundary node.
    pub fn node_normal(&self, node: usize) -> Result<Vec3> {
        self.node_normals
            .get(&node)
            .copied()
            .ok_or_else(|| Error::OffSurface(format!("node {node} is not a boundary node")))
    }

    /// Outward normal of the surface near point `p` (by closest face in
    /// 3-D; by closest segment's normal in 2-D).
    pub fn normal_near(&self, p: Vec3) -> Vec3 {
        match &self.kind {
            SurfaceKind::TriSoup { normals, .. } => {
                let (_, face) = self.closest_point(p);
                normals[face.expect("tri soup always reports a face")]
            }
            SurfaceKind::Polyline(_) => {
                let (node, _) = self.nearest_boundary_node(p);
                self.node_normals[&node]
            }
        }
    }

    /// Walk `distance` millimetres along the surface from `start` in tangent
    /// direction `dir`, transporting the auxiliary tangent `aux` along.
    /// `start` is projected onto the surface first; `dir`/`aux` need not be
    /// exactly tangent. A negative distance walks the opposite way.
    pub fn walk(&self, start: Vec3, dir: Vec3, aux: Vec3, distance: f64) -> Result<WalkEnd> {
        let (mut dir, mut distance) = (dir, distance);
        if distance < 0.0 {
            dir = vec3::scale(dir, -1.0);
            distance = -distance;
        }
        match &self.kind {
            SurfaceKind::Polyline(loops) => self.walk_polyline(loops, start, dir, aux, distance),
            SurfaceKind::TriSoup { normals, .. } => {
                let (mut pos, face) = self.closest_point(start);
                let mut n = normals[face.expect("tri soup face")];
                let mut d = vec3::normalize(vec3::reject(dir, n)).ok_or_else(|| {
                    Error::OffSurface("walk direction is normal to the surface".into())
                })?;
                let mut a = orthonormalize_aux(aux, n, d);
                let mut remaining = distance;
                while remaining > 1e-9 {
                    let h = WALK_STEP_MM.min(remaining);
                    let (proj, face) = self.closest_point(vec3::add(pos, vec3::scale(d, h)));
                    n = normals[face.expect("tri soup face")];
                    d = vec3::normalize(vec3::reject(d, n)).ok_or_else(|| {
                        Error::OffSurface(
                            "walk direction vanished while crossing the surface".into(),
                        )
                    })?;
                    a = orthonormalize_aux(a, n, d);
                    pos = proj;
                    remaining -= h;
                }
                Ok(WalkEnd {
                    pos,
                    dir: d,
                    aux: a,
                })
            }
        }
    }

    fn walk_polyline(
        &self,
        loops: &[LoopPolyline],
        start: Vec3,
        dir: Vec3,
        aux: Vec3,
        distance: f64,
    ) -> Result<WalkEnd> {
        // Locate the loop and arc-length position closest to `start`.
        let mut best: Option<(f64, usize, f64)> = None; // (dist, loop, s)
        for (li, lp) in loops.iter().enumerate() {
            let n = lp.nodes.len();
            for i in 0..n {
                let a = self.nodes[lp.nodes[i]];
                let b = self.nodes[lp.nodes[(i + 1) % n]];
                let q = closest_on_segment(start, a, b);
                let d = vec3::distance(start, q);
                let s = lp.cum[i] + vec3::distance(a, q);
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, li, s));
                }
            }
        }
        let (_, li, s0) = best.ok_or_else(|| Error::OffSurface("empty boundary".into()))?;
        let lp = &loops[li];
        let total = *lp.cum.last().unwrap();
        // Direction sign: compare with the tangent at s0.
        let t0 = self.tangent_at(lp, s0);
        let along = vec3::dot(dir, t0);
        if along.abs() <= 1e-12 {
            return Err(Error::OffSurface(
                "walk direction is perpendicular to the boundary curve".into(),
            ));
        }
        let sign = along.signum();
        let s1 = (s0 + sign * distance).rem_euclid(total);
        let pos = self.point_at(lp, s1);
        let t1 = vec3::scale(self.tangent_at(lp, s1), sign);
        Ok(WalkEnd {
            pos,
            dir: t1,
            aux,
        })
    }

    fn segment_at<'a>(&self, lp: &'a LoopPolyline, s: f64) -> (usize, f64) {
        let n = lp.nodes.len();
        // cum is strictly increasing; find the segment containing s.
        let mut i = match lp
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arc lengths"))
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        if i >= n {
            i = n - 1;
        }
        (i, s - lp.cum[i])
    }

    fn point_at(&self, lp: &LoopPolyline, s: f64) -> Vec3 {
        let (i, ds) = self.segment_at(lp, s);
        let n = lp.nodes.len();
        let a = self.nodes[lp.nodes[i]];
        let b = self.nodes[lp.nodes[(i + 1) % n]];
        let len = vec3::distance(a, b);
        vec3::add(a, vec3::scale(vec3::sub(b, a), (ds / len).clamp(0.0, 1.0)))
    }

    fn tangent_at(&self, lp: &LoopPolyline, s: f64) -> Vec3 {
        let (i, _) = self.segment_at(lp, s);
        let n = lp.nodes.len();
        let a = self.nodes[lp.nodes[i]];
        let b = self.nodes[lp.nodes[(i + 1) % n]];
        vec3::normalize(vec3::sub(b, a)).expect("boundary segments are non-degenerate")
    }
}

/// Keep `aux` unit, tangent (perpendicular to `n`) and perpendicular to `d`.
fn orthonormalize_aux(aux: Vec3, n: Vec3, d: Vec3) -> Vec3 {
    let projected = vec3::reject(vec3::reject(aux, n), d);
    vec3::normalize(projected).unwrap_or_else(|| {
        // aux degenerated (e.g. walked over a sharp feature); rebuild it as
        // the binormal so the frame stays usable.
        vec3::cross(n, d)
    })
}

fn finalize_normals(normals: &mut HashMap<usize, Vec3>) -> Result<()> {
    for (node, v) in normals.iter_mut() {
        *v = vec3::normalize(*v).ok_or_else(|| {
            Error::MeshInvariant(format!("outward normal vanished at boundary node {node}"))
        })?;
    }
    Ok(())
}

/// Chain oriented boundary edges (interior on the left of a->b) into closed
/// loops, visiting loops in ascending order of their smallest node index.
fn chain_loops(edges: &[[usize; 2]], coords: &[Vec3]) -> Result<Vec<LoopPolyline>> {
    let mut succ: HashMap<usize, usize> = HashMap::new();
    for &[a, b] in edges {
        if succ.insert(a, b).is_some() {
            return Err(Error::MeshInvariant(format!(
                "non-manifold boundary at node {a}"
            )));
        }
    }
    let mut starts: Vec<usize> = succ.keys().copied().collect();
    starts.sort_unstable();
    let mut visited = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for start in starts {
        if visited.contains(&start) {
            continue;
        }
        let mut seq = vec![start];
        visited.insert(start);
        let mut cur = *succ.get(&start).expect("start has a successor");
        while cur != start {
            if !visited.insert(cur) {
                return Err(Error::MeshInvariant(format!(
                    "boundary chains cross at node {cur}"
                )));
            }
            seq.push(cur);
            cur = *succ.get(&cur).ok_or_else(|| {
                Error::MeshInvariant(format!("boundary chain ends abruptly at node {cur}"))
            })?;
        }
        if seq.len() < 3 {
            return Err(Error::MeshInvariant("boundary loop with < 3 nodes".into()));
        }
        let n = seq.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let a = coords[seq[i]];
            let b = coords[seq[(i + 1) % n]];
            cum.push(cum[i] + vec3::distance(a, b));
        }
        loops.push(LoopPolyline { nodes: seq, cum });
    }
    Ok(loops)
}

fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = vec3::sub(b, a);
    let t = vec3::dot(vec3::sub(p, a), ab) / vec3::dot(ab, ab);
    vec3::add(a, vec3::scale(ab, t.clamp(0.0, 1.0)))
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = vec3::sub(b, a);
    let ac = vec3::sub(c, a);
    let ap = vec3::sub(p, a);
    let d1 = vec3::dot(ab, ap);
    let d2 = vec3::dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = vec3::sub(p, b);
    let d3 = vec3::dot(ab, bp);
    let d4 = vec3::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return vec3::add(a, vec3::scale(ab, v));
    }
    let cp = vec3::sub(p, c);
    let d5 = vec3::dot(ab, cp);
    let d6 = vec3::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return vec3::add(a, vec3::scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return vec3::add(b, vec3::scale(vec3::sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    vec3::add(a, vec3::add(vec3::scale(ab, v), vec3::scale(ac, w)))
}
