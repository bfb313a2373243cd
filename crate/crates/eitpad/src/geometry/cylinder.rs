//! Structured tetrahedral mesh of a circular cylinder.
//!
//! The disc triangulation is extruded into `layers` identical slabs of
//! triangular prisms; each prism is cut into three tetrahedra. Every
//! rectangular prism face is split along the diagonal that passes through
//! its lowest global node index, so the cut is decided identically from
//! either side of the face and the resulting mesh is conforming. Layer count
//! balances slab thickness against the in-plane edge length so elements stay
//! close to isotropic.

use super::disc::disc_triangulation;
use super::{Dim, Mesh};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Map each of the six prism vertices to slot 0 while keeping the
/// bottom-triangle / top-triangle / vertical-edge structure intact.
const TO_FRONT: [[usize; 6]; 6] = [
    [0, 1, 2, 3, 4, 5],
    [1, 2, 0, 4, 5, 3],
    [2, 0, 1, 5, 3, 4],
    [3, 5, 4, 0, 2, 1],
    [4, 3, 5, 1, 0, 2],
    [5, 4, 3, 2, 1, 0],
];

/// Split a prism (bottom triangle `g[0..3]`, top triangle `g[3..6]`, vertex
/// `g[i+3]` above `g[i]`) into three tetrahedra using the lowest-global-index
/// diagonal rule. Tetrahedra come out in an arbitrary orientation; the
/// caller fixes signs.
fn split_prism(g: [usize; 6]) -> [[usize; 4]; 3] {
    let lowest = (0..6).min_by_key(|&i| g[i]).expect("six vertices");
    let p = TO_FRONT[lowest];
    let w = [g[p[0]], g[p[1]], g[p[2]], g[p[3]], g[p[4]], g[p[5]]];
    // w[0] is the lowest index of the whole prism, so the two quads touching
    // it are split through it: diagonals (w0,w4) and (w0,w5). The remaining
    // quad (w1,w2,w5,w4) picks the diagonal through its own lowest index.
    if w[1].min(w[5]) < w[2].min(w[4]) {
        [
            [w[0], w[1], w[2], w[5]],
            [w[0], w[1], w[5], w[4]],
            [w[0], w[4], w[5], w[3]],
        ]
    } else {
        [
            [w[0], w[1], w[2], w[4]],
            [w[0], w[4], w[2], w[5]],
            [w[0], w[4], w[5], w[3]],
        ]
    }
}

/// Generate a tetrahedral cylinder mesh: radius `radius_mm`, axis along z
/// from 0 to `height_mm`, roughly `target_elements` tetrahedra (within
/// +/-25 %), unit conductivity.
pub fn generate_cylinder_mesh(
    radius_mm: f64,
    height_mm: f64,
    target_elements: usize,
) -> Result<Mesh> {
    if !(radius_mm > 0.0) || !radius_mm.is_finite() {
        return Err(Error::param(format!(
            "cylinder radius must be positive and finite, got {radius_mm}"
        )));
    }
    if !(height_mm > 0.0) || !height_mm.is_finite() {
        return Err(Error::param(format!(
            "cylinder height must be positive and finite, got {height_mm}"
        )));
    }
    if target_elements < 24 {
        return Err(Error::param(format!(
            "cylinder target element count must be at least 24, got {target_elements}"
        )));
    }

    // target/3 prisms to distribute between layers; pick the layer count
    // that makes slab thickness track the in-plane edge length.
    let prisms = target_elements as f64 / 3.0;
    let ideal_layers = (prisms * height_mm * height_mm
        / (2.0 * std::f64::consts::PI * radius_mm * radius_mm))
        .cbrt();
    let layers = (ideal_layers.round() as usize).max(1);
    let disc_target = ((prisms / layers as f64).round() as usize).max(4);
    let disc = disc_triangulation(radius_mm, disc_target)?;

    let n_disc = disc.nodes.len();
    let dz = height_mm / layers as f64;
    let mut nodes: Vec<Vec3> = Vec::with_capacity(n_disc * (layers + 1));
    for layer in 0..=layers {
        let z = dz * layer as f64;
        for p in &disc.nodes {
            nodes.push([p[0], p[1], z]);
        }
    }

    let mut elements: Vec<usize> = Vec::with_capacity(disc.triangles.len() * layers * 3 * 4);
    for layer in 0..layers {
        let below = layer * n_disc;
        let above = (layer + 1) * n_disc;
        for tri in &disc.triangles {
            let prism = [
                below + tri[0],
                below + tri[1],
                below + tri[2],
                above + tri[0],
                above + tri[1],
                above + tri[2],
            ];
            for mut tet in split_prism(prism) {
                // Fix orientation so the signed volume is positive.
                let a = nodes[tet[0]];
                let b = nodes[tet[1]];
                let c = nodes[tet[2]];
                let d = nodes[tet[3]];
                let ab = crate::vec3::sub(b, a);
                let ac = crate::vec3::sub(c, a);
                let ad = crate::vec3::sub(d, a);
                if crate::vec3::dot(ab, crate::vec3::cross(ac, ad)) < 0.0 {
                    tet.swap(2, 3);
                }
                elements.extend_from_slice(&tet);
            }
        }
    }

    let n_elements = elements.len() / 4;
    let mesh = Mesh::new(Dim::Three, nodes, elements, vec![1.0; n_elements])?;
    debug_assert!(
        (mesh.element_count() as f64 - target_elements as f64).abs()
            <= 0.25 * target_elements as f64
    );
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceTopology;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_cylinder_mesh(0.0, 10.0, 100).is_err());
        assert!(generate_cylinder_mesh(10.0, -1.0, 100).is_err());
        assert!(generate_cylinder_mesh(10.0, 10.0, 10).is_err());
    }

    #[test]
    fn element_count_within_quarter_of_target() {
        for target in [24, 120, 1000, 6000] {
            let m = generate_cylinder_mesh(50.0, 120.0, target).unwrap();
            let n = m.element_count() as f64;
            let t = target as f64;
            assert!(
                (n - t).abs() <= 0.25 * t,
                "target {target} produced {n} elements"
            );
        }
    }

    #[test]
    fn tet_volumes_sum_to_extruded_polygon_volume() {
        // The three tetrahedra of each prism partition it exactly, so the
        // mesh volume must equal (disc polygon area) x height to rounding,
        // and approach pi R^2 h from below.
        let (r, h) = (40.0, 90.0);
        let m = generate_cylinder_mesh(r, h, 2000).unwrap();
        let total: f64 = (0..m.element_count()).map(|e| m.measure(e)).sum();
        let exact = std::f64::consts::PI * r * r * h;
        assert!(total < exact);
        assert_relative_eq!(total, exact, max_relative = 0.02);
    }

    #[test]
    fn mesh_is_conforming_no_interior_boundary_faces() {
        // If neighbouring prisms disagreed about a quad diagonal, the two
        // half-faces would each appear once and leak into the boundary set. Every
        // boundary triangle must therefore lie on the lateral wall or a cap.
        let (r, h) = (30.0, 60.0);
        let m = generate_cylinder_mesh(r, h, 900).unwrap();
        let tris = match m.surface() {
            SurfaceTopology::Triangles(t) => t.clone(),
            _ => panic!("cylinder is 3-D"),
        };
        assert!(!tris.is_empty());
        for tri in tris {
            let on_bottom = tri.iter().all(|&n| m.node(n)[2].abs() < 1e-9);
            let on_top = tri.iter().all(|&n| (m.node(n)[2] - h).abs() < 1e-9);
            let on_wall = tri.iter().all(|&n| {
                let p = m.node(n);
                ((p[0] * p[0] + p[1] * p[1]).sqrt() - r).abs() < 1e-6 * r
            });
            assert!(
                on_bottom || on_top || on_wall,
                "boundary face {tri:?} sits inside the domain"
            );
        }
    }

    #[test]
    fn node_layers_match_disc() {
        let m = generate_cylinder_mesh(25.0, 50.0, 600).unwrap();
        // All nodes share a small set of z values, evenly spaced.
        let mut zs: Vec<f64> = m.nodes().iter().map(|n| n[2]).collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert!(zs.len() >= 2);
        assert_relative_eq!(zs[0], 0.0);
        assert_relative_eq!(*zs.last().unwrap(), 50.0);
        let dz = zs[1] - zs[0];
        for w in zs.windows(2) {
            assert_relative_eq!(w[1] - w[0], dz, max_relative = 1e-9);
        }
        assert_eq!(m.node_count() % zs.len(), 0);
    }

    #[test]
    fn prism_split_is_deterministic_and_partitioning() {
        // Brute check on one prism with every permutation of global labels:
        // the three tets always have total |volume| equal to the prism's.
        let base: Vec<[f64; 3]> = vec![
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 3.0, 0.0],
            [0.0, 0.0, 1.5],
            [2.0, 0.0, 1.5],
            [0.0, 3.0, 1.5],
        ];
        let prism_volume = 0.5 * 2.0 * 3.0 * 1.5;
        // A handful of label assignments (global ids permuted).
        let labelings: [[usize; 6]; 5] = [
            [0, 1, 2, 3, 4, 5],
            [5, 4, 3, 2, 1, 0],
            [10, 2, 7, 4, 90, 13],
            [3, 14, 15, 9, 2, 6],
            [8, 7, 6, 5, 4, 3],
        ];
        for labels in labelings {
            let tets = split_prism(labels);
            let coord = |g: usize| {
                let slot = labels.iter().position(|&x| x == g).unwrap();
                base[slot]
            };
            let mut sum = 0.0;
            for tet in tets {
                let a = coord(tet[0]);
                let b = coord(tet[1]);
                let c = coord(tet[2]);
                let d = coord(tet[3]);
                let v = crate::vec3::dot(
                    crate::vec3::sub(b, a),
                    crate::vec3::cross(crate::vec3::sub(c, a), crate::vec3::sub(d, a)),
                ) / 6.0;
                assert!(v.abs() > 1e-12, "degenerate tet in {labels:?}");
                sum += v.abs();
            }
            assert_relative_eq!(sum, prism_volume, max_relative = 1e-12);
        }
    }
}
