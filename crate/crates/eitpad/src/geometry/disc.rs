//! Structured triangulation of a disc.
//!
//! Nodes are laid out on concentric rings around a centre node. Ring `k`
//! (1-based, radius `k * R / n`) carries roughly `alpha * k` nodes, so ring
//! populations grow linearly and triangle size stays roughly uniform across
//! the disc. Consecutive rings are stitched by an angle-merge sweep, which
//! yields `m_inner + m_outer` triangles per annulus and `alpha * n^2` in
//! total -- the ring count `n` is chosen so this lands on the requested
//! element budget.

use super::{Dim, Mesh};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Node positions and triangles of the structured disc triangulation,
/// before being wrapped in a [`Mesh`]. Shared with the cylinder generator,
/// which extrudes exactly this layout.
pub(crate) struct DiscTriangulation {
    pub nodes: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

pub(crate) fn disc_triangulation(
    radius_mm: f64,
    target_elements: usize,
) -> Result<DiscTriangulation> {
    if !(radius_mm > 0.0) || !radius_mm.is_finite() {
        return Err(Error::param(format!(
            "disc radius must be positive and finite, got {radius_mm}"
        )));
    }
    if target_elements < 4 {
        return Err(Error::param(format!(
            "disc target element count must be at least 4, got {target_elements}"
        )));
    }

    let rings = ((target_elements as f64 / 6.0).sqrt().round() as usize).max(1);
    let alpha = target_elements as f64 / (rings * rings) as f64;
    let ring_counts: Vec<usize> = (1..=rings)
        .map(|k| ((alpha * k as f64).round() as usize).max(3))
        .collect();

    let mut nodes: Vec<Vec3> = vec![[0.0, 0.0, 0.0]];
    let mut ring_start = vec![0usize; rings + 1]; // start index of ring k (1-based)
    for (k, &m) in ring_counts.iter().enumerate() {
        ring_start[k + 1] = nodes.len();
        let r = radius_mm * (k + 1) as f64 / rings as f64;
        for j in 0..m {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            nodes.push([r * theta.cos(), r * theta.sin(), 0.0]);
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(target_elements + rings);

    // Central fan: centre node to ring 1.
    let m1 = ring_counts[0];
    for j in 0..m1 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % m1]);
    }

    // Annuli: angle-merge stitch between ring k and ring k+1.
    for k in 1..rings {
        let (a0, ma) = (ring_start[k], ring_counts[k - 1]);
        let (b0, mb) = (ring_start[k + 1], ring_counts[k]);
        let angle = |j: usize, m: usize| 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < ma || j < mb {
            let advance_inner = if i == ma {
                false
            } else if j == mb {
                true
            } else {
                angle(i + 1, ma) <= angle(j + 1, mb)
            };
            if advance_inner {
                // CCW: inner node, outer node, next inner node.
                triangles.push([a0 + i % ma, b0 + j % mb, a0 + (i + 1) % ma]);
                i += 1;
            } else {
                triangles.push([b0 + j % mb, b0 + (j + 1) % mb, a0 + i % ma]);
                j += 1;
            }
        }
    }

    Ok(DiscTriangulation { nodes, triangles })
}

/// Generate a triangulated disc of the given radius with roughly
/// `target_elements` triangles (guaranteed within  +/-25 %), unit
/// conductivity, centred on the origin.
pub fn generate_disc_mesh(radius_mm: f64, target_elements: usize) -> Result<Mesh> {
    if target_elements < 8 {
        return Err(Error::param(format!(
            "disc target element count must be at least 8, got {target_elements}"
        )));
    }
    let tri = disc_triangulation(radius_mm, target_elements)?;
    let flat: Vec<usize> = tri.triangles.iter().flatten().copied().collect();
    let n = tri.triangles.len();
    let mesh = Mesh::new(Dim::Two, tri.nodes, flat, vec![1.0; n])?;
    debug_assert!(
        (mesh.element_count() as f64 - target_elements as f64).abs()
            <= 0.25 * target_elements as f64
    );
    Ok(mesh)
}
