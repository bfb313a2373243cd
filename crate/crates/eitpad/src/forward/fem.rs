//! Linear (P1) finite element pieces: basis-function gradients and stiffness
//! assembly for the conduction equation div(sigma grad u) = 0.
//!
//! Mesh coordinates are millimetres but assembly works in SI metres, so with
//! currents in amperes the potentials come out in volts and element
//! sensitivities in volts per (S/m).

use crate::geometry::{Dim, Mesh};
use crate::vec3::{self, Vec3};

const MM_TO_M: f64 = 1e-3;

/// Gradients of the nodal hat functions on element `e` (constant over the
/// element, units 1/m) and the element measure in SI units (m^2 or m^3).
pub(crate) fn element_basis(mesh: &Mesh, e: usize) -> ([Vec3; 4], usize, f64) {
    let chunk = mesh.element(e);
    let a = vec3::scale(mesh.node(chunk[0]), MM_TO_M);
    match mesh.dim() {
        Dim::Two => {
            let b = vec3::sub(vec3::scale(mesh.node(chunk[1]), MM_TO_M), a);
            let c = vec3::sub(vec3::scale(mesh.node(chunk[2]), MM_TO_M), a);
            let det = b[0] * c[1] - b[1] * c[0]; // = 2 * area, positive
            let gb = [c[1] / det, -c[0] / det, 0.0];
            let gc = [-b[1] / det, b[0] / det, 0.0];
            let ga = [-gb[0] - gc[0], -gb[1] - gc[1], 0.0];
            ([ga, gb, gc, [0.0; 3]], 3, det / 2.0)
        }
        Dim::Three => {
            let b = vec3::sub(vec3::scale(mesh.node(chunk[1]), MM_TO_M), a);
            let c = vec3::sub(vec3::scale(mesh.node(chunk[2]), MM_TO_M), a);
            let d = vec3::sub(vec3::scale(mesh.node(chunk[3]), MM_TO_M), a);
            let det = vec3::dot(b, vec3::cross(c, d)); // = 6 * volume, positive
            let gb = vec3::scale(vec3::cross(c, d), 1.0 / det);
            let gc = vec3::scale(vec3::cross(d, b), 1.0 / det);
            let gd = vec3::scale(vec3::cross(b, c), 1.0 / det);
            let ga = [
                -gb[0] - gc[0] - gd[0],
                -gb[1] - gc[1] - gd[1],
                -gb[2] - gc[2] - gd[2],
            ];
            ([ga, gb, gc, gd], 4, det / 6.0)
        }
    }
}

/// Stiffness triplets over grounded (reduced) indices. `reduced[node]` maps
/// to the unknown index, `None` for the reference node. Emits the full
/// symmetric matrix (both copies of each off-diagonal entry).
pub(crate) fn assemble_triplets(
    mesh: &Mesh,
    reduced: &[Option<usize>],
) -> Vec<(usize, usize, f64)> {
    let stride = mesh.dim().nodes_per_element();
    let mut triplets = Vec::with_capacity(mesh.element_count() * stride * stride);
    for e in 0..mesh.element_count() {
        let (grads, count, measure) = element_basis(mesh, e);
        let sigma = mesh.conductivity()[e];
        let chunk = mesh.element(e);
        for i in 0..count {
            let Some(ri) = reduced[chunk[i]] else { continue };
            for j in 0..count {
                let Some(rj) = reduced[chunk[j]] else { continue };
                let k = sigma * measure * vec3::dot(grads[i], grads[j]);
                triplets.push((ri, rj, k));
            }
        }
    }
    triplets
}

/// Constant gradient of a nodal field over element `e`, units of
/// field-unit per metre.
pub(crate) fn field_gradient(mesh: &Mesh, e: usize, nodal: &[f64]) -> Vec3 {
    let (grads, count, _) = element_basis(mesh, e);
    let chunk = mesh.element(e);
    let mut g = [0.0; 3];
    for i in 0..count {
        g = vec3::add(g, vec3::scale(grads[i], nodal[chunk[i]]));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mesh;
    use approx::assert_relative_eq;

    #[test]
    fn gradients_reproduce_linear_fields_2d() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [20.0, 0.0, 0.0],
            [5.0, 30.0, 0.0],
        ];
        let mesh = Mesh::new(Dim::Two, nodes, vec![0, 1, 2], vec![1.0]).unwrap();
        // f(x, y) = 3 x_m + 2 y_m evaluated at the nodes (metres).
        let f = |p: Vec3| 3.0 * p[0] * 1e-3 + 2.0 * p[1] * 1e-3;
        let nodal: Vec<f64> = (0..3).map(|i| f(mesh.node(i))).collect();
        let g = field_gradient(&mesh, 0, &nodal);
        assert_relative_eq!(g[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(g[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gradients_reproduce_linear_fields_3d() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [10.0, 1.0, 0.0],
            [0.0, 12.0, 2.0],
            [3.0, 0.0, 9.0],
        ];
        let mesh = Mesh::new(Dim::Three, nodes, vec![0, 1, 2, 3], vec![1.0]).unwrap();
        let f = |p: Vec3| -1.5 * p[0] * 1e-3 + 0.25 * p[1] * 1e-3 + 4.0 * p[2] * 1e-3;
        let nodal: Vec<f64> = (0..4).map(|i| f(mesh.node(i))).collect();
        let g = field_gradient(&mesh, 0, &nodal);
        assert_relative_eq!(g[0], -1.5, max_relative = 1e-12);
        assert_relative_eq!(g[1], 0.25, max_relative = 1e-12);
        assert_relative_eq!(g[2], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [10.0, 1.0, 0.0],
            [0.0, 12.0, 2.0],
            [3.0, 0.0, 9.0],
        ];
        let mesh = Mesh::new(Dim::Three, nodes, vec![0, 1, 2, 3], vec![1.0]).unwrap();
        let (grads, count, measure) = element_basis(&mesh, 0);
        for k in 0..3 {
            let s: f64 = (0..count).map(|i| grads[i][k]).sum();
            assert!(s.abs() < 1e-12, "component {k} sums to {s}");
        }
        // Measure in SI: mesh reports mm^3.
        assert_relative_eq!(measure, mesh.measure(0) * 1e-9, max_relative = 1e-12);
    }
}
