//! Forward problem: nodal potentials for current injection patterns,
//! channel voltages, element sensitivities, and simulated time series.
//!
//! Electrodes are treated as points bound to boundary nodes (current enters
//! and leaves through single nodes). The conduction system is grounded at a
//! reference node -- the lowest-index boundary node not bound to any
//! electrode -- and factored once per mesh; every injection pair reuses the
//! factorisation. Channel voltages only ever involve potential
//! *differences*, so the reference choice cancels out (tested to 1e-8).

pub mod sparse;

mod fem;

use crate::channels::ChannelPlan;
use crate::electrodes::ElectrodeSet;
use crate::error::{Error, Result};
use crate::frames::{FrameSeries, FrameVector};
use crate::geometry::Mesh;
use crate::vec3::{self, Vec3};
use rand::SeedableRng;
use rand_distr::Distribution;
use sparse::SpdEnvelopeSolver;
use std::collections::HashMap;

/// Factored conduction operator for one mesh, ready to solve injection
/// patterns.
pub struct ForwardSolver {
    reference_node: usize,
    /// node -> grounded unknown index (None for the reference node).
    reduced: Vec<Option<usize>>,
    solver: SpdEnvelopeSolver,
}

impl ForwardSolver {
    /// Ground at the default reference: the lowest-index boundary node not
    /// bound to any electrode.
    pub fn new(mesh: &Mesh, electrodes: &ElectrodeSet) -> Result<ForwardSolver> {
        let reference = mesh
            .boundary_nodes()
            .iter()
            .copied()
            .find(|b| !electrodes.nodes().contains(b))
            .ok_or_else(|| {
                Error::param("every boundary node is bound to an electrode; cannot ground")
            })?;
        Self::with_reference(mesh, reference)
    }

    /// Ground at an explicit node (any mesh node works; channel voltages do
    /// not depend on the choice).
    pub fn with_reference(mesh: &Mesh, reference_node: usize) -> Result<ForwardSolver> {
        if reference_node >= mesh.node_count() {
            return Err(Error::param(format!(
                "reference node {reference_node} out of range ({} nodes)",
                mesh.node_count()
            )));
        }
        let mut reduced = vec![None; mesh.node_count()];
        let mut next = 0usize;
        for (node, slot) in reduced.iter_mut().enumerate() {
            if node != reference_node {
                *slot = Some(next);
                next += 1;
            }
        }
        let triplets = fem::assemble_triplets(mesh, &reduced);
        let solver = SpdEnvelopeSolver::new(next, &triplets)?;
        Ok(ForwardSolver {
            reference_node,
            reduced,
            solver,
        })
    }

    pub fn reference_node(&self) -> usize {
        self.reference_node
    }

    /// Nodal potentials (volts, reference at 0) for 1 A injected at
    /// `source_node` and drawn from `sink_node`.
    pub fn solve_pair(&self, source_node: usize, sink_node: usize) -> Result<Vec<f64>> {
        let n = self.reduced.len();
        if source_node >= n || sink_node >= n || source_node == sink_node {
            return Err(Error::param(format!(
                "bad injection pair ({source_node}, {sink_node})"
            )));
        }
        let mut b = vec![0.0; self.solver.dimension()];
        if let Some(r) = self.reduced[source_node] {
            b[r] += 1.0;
        }
        if let Some(r) = self.reduced[sink_node] {
            b[r] -= 1.0;
        }
        let x = self.solver.solve(&b)?;
        let mut u = vec![0.0; n];
        for (node, slot) in self.reduced.iter().enumerate() {
            if let Some(r) = *slot {
                u[node] = x[r];
            }
        }
        Ok(u)
    }
}

/// Potentials per distinct (canonical) injection node pair, solved once
/// each. Returns the map plus per-channel (pair key, sign) bindings for the
/// inject and, when requested, sense roles.
struct PairFields {
    fields: HashMap<(usize, usize), Vec<f64>>,
}

impl PairFields {
    fn solve(
        solver: &ForwardSolver,
        electrodes: &ElectrodeSet,
        plan: &ChannelPlan,
        include_sense: bool,
    ) -> Result<PairFields> {
        let mut fields = HashMap::new();
        for ch in plan.channels() {
            let mut wanted = vec![ch.inject];
            if include_sense {
                wanted.push(ch.sense);
            }
            for (a, b) in wanted {
                let key = canonical_nodes(electrodes, (a, b)).0;
                if let std::collections::hash_map::Entry::Vacant(e) = fields.entry(key) {
                    e.insert(solver.solve_pair(key.0, key.1)?);
                }
            }
        }
        Ok(PairFields { fields })
    }

    fn field(&self, key: (usize, usize)) -> &[f64] {
        &self.fields[&key]
    }
}

/// Map an electrode-index pair to its canonical node pair (low node first)
/// and the sign relating the requested orientation to the canonical one.
fn canonical_nodes(electrodes: &ElectrodeSet, pair: (usize, usize)) -> ((usize, usize), f64) {
    let a = electrodes.node(pair.0);
    let b = electrodes.node(pair.1);
    if a <= b {
        ((a, b), 1.0)
    } else {
        ((b, a), -1.0)
    }
}

fn check_compatible(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    plan: &ChannelPlan,
) -> Result<()> {
    if plan.electrode_count() != electrodes.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} electrodes, set has {}",
            plan.electrode_count(),
            electrodes.len()
        )));
    }
    if let Some(&bad) = electrodes.nodes().iter().find(|&&n| n >= mesh.node_count()) {
        return Err(Error::DimensionMismatch(format!(
            "electrode bound to node {bad}, mesh has {}",
            mesh.node_count()
        )));
    }
    Ok(())
}

/// Voltages for every channel of the plan at the given drive current.
/// Distinct injection pairs are solved once regardless of how many channels
/// share them.
pub fn solve_forward(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    plan: &ChannelPlan,
    current_a: f64,
) -> Result<FrameVector> {
    if !(current_a > 0.0) || !current_a.is_finite() {
        return Err(Error::param(format!(
            "drive current must be positive and finite, got {current_a}"
        )));
    }
    check_compatible(mesh, electrodes, plan)?;
    let solver = ForwardSolver::new(mesh, electrodes)?;
    frame_with(&solver, mesh, electrodes, plan, current_a)
}

/// As [`solve_forward`] but reusing an existing factorisation.
fn frame_with(
    solver: &ForwardSolver,
    _mesh: &Mesh,
    electrodes: &ElectrodeSet,
    plan: &ChannelPlan,
    current_a: f64,
) -> Result<FrameVector> {
    let pairs = PairFields::solve(solver, electrodes, plan, false)?;
    let mut values = Vec::with_capacity(plan.len());
    for ch in plan.channels() {
        let (key, sign) = canonical_nodes(electrodes, ch.inject);
        let u = pairs.field(key);
        let v = u[electrodes.node(ch.sense.0)] - u[electrodes.node(ch.sense.1)];
        values.push(current_a * sign * v);
    }
    FrameVector::new(values)
}

/// Sensitivity of every channel voltage to every element conductivity, per
/// ampere of drive current: row `c`, column `e` holds dV_c/dsigma_e in
/// V/(S/m). Computed with the adjoint two-field product, one solve per
/// distinct electrode pair.
pub struct SensitivityMatrix {
    matrix: nalgebra::DMatrix<f64>,
}

impl SensitivityMatrix {
    pub fn channels(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn elements(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn value(&self, channel: usize, element: usize) -> f64 {
        self.matrix[(channel, element)]
    }

    pub fn matrix(&self) -> &nalgebra::DMatrix<f64> {
        &self.matrix
    }

    pub fn from_matrix(matrix: nalgebra::DMatrix<f64>) -> SensitivityMatrix {
        SensitivityMatrix { matrix }
    }
}

pub fn jacobian(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    plan: &ChannelPlan,
) -> Result<SensitivityMatrix> {
    check_compatible(mesh, electrodes, plan)?;
    let solver = ForwardSolver::new(mesh, electrodes)?;
    let pairs = PairFields::solve(&solver, electrodes, plan, true)?;

    // Constant per-element gradient of each distinct field.
    let n_elem = mesh.element_count();
    let mut keys: Vec<(usize, usize)> = pairs.fields.keys().copied().collect();
    keys.sort_unstable();
    let mut grad_of: HashMap<(usize, usize), Vec<Vec3>> = HashMap::new();
    for key in keys {
        let u = pairs.field(key);
        let grads: Vec<Vec3> = (0..n_elem).map(|e| fem::field_gradient(mesh, e, u)).collect();
        grad_of.insert(key, grads);
    }
    // Element measures in SI units.
    let measures: Vec<f64> = (0..n_elem)
        .map(|e| {
            let (_, _, m) = fem::element_basis(mesh, e);
            m
        })
        .collect();

    let mut matrix = nalgebra::DMatrix::zeros(plan.len(), n_elem);
    for (c, ch) in plan.channels().iter().enumerate() {
        let (ki, si) = canonical_nodes(electrodes, ch.inject);
        let (ks, ss) = canonical_nodes(electrodes, ch.sense);
        let gi = &grad_of[&ki];
        let gs = &grad_of[&ks];
        let sign = si * ss;
        for e in 0..n_elem {
            matrix[(c, e)] = -sign * measures[e] * vec3::dot(gi[e], gs[e]);
        }
    }
    Ok(SensitivityMatrix { matrix })
}

/// Solve a sequence of meshes (same topology, varying conductivity) into a
/// timed frame series at `rate_hz`, adding zero-mean Gaussian noise of the
/// given standard deviation (volts) to every reading. Fixed seed, fixed
/// output.
#[allow(clippy::too_many_arguments)]
pub fn simulate_series(
    meshes: &[Mesh],
    electrodes: &ElectrodeSet,
    plan: &ChannelPlan,
    current_a: f64,
    rate_hz: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<FrameSeries> {
    if meshes.is_empty() {
        return Err(Error::param("need at least one mesh to simulate"));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::param(format!(
            "noise standard deviation must be finite and >= 0, got {noise_sd}"
        )));
    }
    let first = &meshes[0];
    for (i, m) in meshes.iter().enumerate() {
        if m.node_count() != first.node_count()
            || m.element_count() != first.element_count()
            || m.dim() != first.dim()
        {
            return Err(Error::DimensionMismatch(format!(
                "mesh {i} does not share the series topology"
            )));
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, noise_sd)
        .map_err(|e| Error::param(format!("bad noise distribution: {e}")))?;
    let mut frames = Vec::with_capacity(meshes.len());
    for mesh in meshes {
        let clean = solve_forward(mesh, electrodes, plan, current_a)?;
        let values = if noise_sd > 0.0 {
            clean
                .values()
                .iter()
                .map(|v| v + normal.sample(&mut rng))
                .collect()
        } else {
            clean.values().to_vec()
        };
        frames.push(FrameVector::new(values)?);
    }
    FrameSeries::new(frames, rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{enumerate_all_channels, Channel, ChannelPlan};
    use crate::electrodes::{place_grid, GridLayout};
    use crate::geometry::disc::generate_disc_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Boundary node closest to the given angle on a disc mesh.
    fn rim_node(mesh: &Mesh, radius: f64, angle: f64) -> usize {
        let target = [radius * angle.cos(), radius * angle.sin(), 0.0];
        *mesh
            .boundary_nodes()
            .iter()
            .min_by(|&&a, &&b| {
                let da = vec3::distance(mesh.node(a), target);
                let db = vec3::distance(mesh.node(b), target);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
    }

    // ------------------------------------------------------------------
    // physics oracle: analytic disc solution
    // ------------------------------------------------------------------

    #[test]
    fn disc_potentials_match_analytic_solution() {
        // For a homogeneous disc with insulating boundary and unit current
        // injected/extracted at boundary points A/B, the exact potential is
        //   u(p) = I / (pi * sigma) * ln(|p - B| / |p - A|)  (+ constant),
        // per unit depth. Check sensed voltages at third points.
        let radius = 100.0;
        let sigma = 0.5;
        let current = 0.002;
        let mesh = generate_disc_mesh(radius, 1800)
            .unwrap()
            .with_uniform_conductivity(sigma)
            .unwrap();
        let deg = std::f64::consts::PI / 180.0;
        let a = rim_node(&mesh, radius, 0.0);
        let b = rim_node(&mesh, radius, 180.0 * deg);
        let c = rim_node(&mesh, radius, 60.0 * deg);
        let d = rim_node(&mesh, radius, 120.0 * deg);
        let solver = ForwardSolver::with_reference(&mesh, b).unwrap();
        let u = solver.solve_pair(a, b).unwrap();
        let v_fem = current * (u[c] - u[d]);

        let k = current / (std::f64::consts::PI * sigma);
        let pa = vec3::scale(mesh.node(a), 1e-3);
        let pb = vec3::scale(mesh.node(b), 1e-3);
        let analytic = |p: Vec3| {
            let p = vec3::scale(p, 1e-3);
            k * (vec3::distance(p, pb).ln() - vec3::distance(p, pa).ln())
        };
        let v_exact = analytic(mesh.node(c)) - analytic(mesh.node(d));
        let rel = (v_fem - v_exact).abs() / v_exact.abs();
        assert!(
            rel < 0.05,
            "FEM voltage {v_fem:e} vs analytic {v_exact:e} (rel {rel:.4})"
        );
    }

    // ------------------------------------------------------------------
    // structural properties of the solves
    // ------------------------------------------------------------------

    fn disc_with_electrodes() -> (Mesh, crate::electrodes::ElectrodeSet) {
        let mesh = generate_disc_mesh(100.0, 1500)
            .unwrap()
            .with_uniform_conductivity(0.2)
            .unwrap();
        // 8 electrodes around the rim, 70 mm apart along the boundary.
        let layout = GridLayout::new(1, 8, 70.0)
            .unwrap()
            .with_origin([100.0, 0.0, 0.0]);
        let set = place_grid(&mesh, &layout).unwrap();
        (mesh, set)
    }

    fn random_channels(n_electrodes: usize, count: usize, seed: u64) -> ChannelPlan {
        let all = enumerate_all_channels(n_electrodes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while picked.len() < count {
            let ch = all.channels()[rng.random_range(0..all.len())];
            if seen.insert(ch.canonical()) {
                picked.push(ch);
            }
        }
        ChannelPlan::new(picked, n_electrodes).unwrap()
    }

    #[test]
    fn reciprocity_holds_on_random_channels() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 10, 99);
        let frame = solve_forward(&mesh, &set, &plan, 1.0).unwrap();
        // Swapped-role plan.
        let swapped: Vec<Channel> = plan
            .channels()
            .iter()
            .map(|ch| Channel {
                inject: ch.sense,
                sense: ch.inject,
            })
            .collect();
        let swapped = ChannelPlan::new(swapped, set.len()).unwrap();
        let frame2 = solve_forward(&mesh, &set, &swapped, 1.0).unwrap();
        let scale = frame
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..plan.len() {
            let err = (frame.get(i) - frame2.get(i)).abs() / scale;
            assert!(err <= 1e-8, "channel {i}: {} vs {}", frame.get(i), frame2.get(i));
        }
    }

    #[test]
    fn conductivity_scaling_scales_voltages_inversely() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 8, 7);
        let frame = solve_forward(&mesh, &set, &plan, 1.0).unwrap();
        let scaled_mesh = mesh
            .with_conductivity(mesh.conductivity().iter().map(|s| s * 3.7).collect())
            .unwrap();
        let frame2 = solve_forward(&scaled_mesh, &set, &plan, 1.0).unwrap();
        for i in 0..plan.len() {
            let expect = frame.get(i) / 3.7;
            let err = (frame2.get(i) - expect).abs()
                / expect.abs().max(frame.values()[0].abs() * 1e-6);
            assert!(err <= 1e-10, "channel {i}: {} vs {}", frame2.get(i), expect);
        }
    }

    #[test]
    fn channel_voltages_do_not_depend_on_the_reference_node() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 8, 13);
        // Two solvers grounded at different non-electrode boundary nodes.
        let free: Vec<usize> = mesh
            .boundary_nodes()
            .iter()
            .copied()
            .filter(|b| !set.nodes().contains(b))
            .collect();
        assert!(free.len() >= 2);
        let s1 = ForwardSolver::with_reference(&mesh, free[0]).unwrap();
        let s2 = ForwardSolver::with_reference(&mesh, free[free.len() / 2]).unwrap();
        let f1 = frame_with(&s1, &mesh, &set, &plan, 1.0).unwrap();
        let f2 = frame_with(&s2, &mesh, &set, &plan, 1.0).unwrap();
        let scale = f1.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..plan.len() {
            let err = (f1.get(i) - f2.get(i)).abs() / scale;
            assert!(err <= 1e-8, "channel {i} differs across references");
        }
    }

    #[test]
    fn default_reference_avoids_electrode_nodes() {
        let (mesh, set) = disc_with_electrodes();
        let solver = ForwardSolver::new(&mesh, &set).unwrap();
        assert!(!set.nodes().contains(&solver.reference_node()));
        assert!(mesh
            .boundary_nodes()
            .binary_search(&solver.reference_node())
            .is_ok());
    }

    // ------------------------------------------------------------------
    // jacobian vs central finite differences
    // ------------------------------------------------------------------

    #[test]
    fn jacobian_matches_finite_differences() {
        let mesh = generate_disc_mesh(100.0, 220)
            .unwrap()
            .with_uniform_conductivity(0.3)
            .unwrap();
        let layout = GridLayout::new(1, 6, 80.0)
            .unwrap()
            .with_origin([100.0, 0.0, 0.0]);
        let set = place_grid(&mesh, &layout).unwrap();
        let plan = random_channels(set.len(), 5, 5);
        let jac = jacobian(&mesh, &set, &plan).unwrap();

        let jmax = (0..plan.len())
            .flat_map(|c| (0..mesh.element_count()).map(move |e| (c, e)))
            .map(|(c, e)| jac.value(c, e).abs())
            .fold(0.0f64, f64::max);

        // Sample well-conditioned entries: tiny sensitivities drown in
        // finite-difference cancellation noise and say nothing useful.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut tested = 0;
        while tested < 12 {
            let c = rng.random_range(0..plan.len());
            let e = rng.random_range(0..mesh.element_count());
            let j = jac.value(c, e);
            if j.abs() < 1e-3 * jmax {
                continue;
            }
            let sigma = mesh.conductivity()[e];
            let delta = 1e-6 * sigma;
            let mut hi = mesh.conductivity().to_vec();
            hi[e] = sigma + delta;
            let mut lo = mesh.conductivity().to_vec();
            lo[e] = sigma - delta;
            let v_hi = solve_forward(&mesh.with_conductivity(hi).unwrap(), &set, &plan, 1.0)
                .unwrap()
                .get(c);
            let v_lo = solve_forward(&mesh.with_conductivity(lo).unwrap(), &set, &plan, 1.0)
                .unwrap()
                .get(c);
            let fd = (v_hi - v_lo) / (2.0 * delta);
            let rel = (fd - j).abs() / fd.abs().max(j.abs());
            assert!(
                rel < 1e-4,
                "channel {c} element {e}: adjoint {j:e} vs FD {fd:e} (rel {rel:e})"
            );
            tested += 1;
        }
    }

    // ------------------------------------------------------------------
    // series simulation
    // ------------------------------------------------------------------

    #[test]
    fn series_is_reproducible_and_timed() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 6, 3);
        let meshes = vec![mesh.clone(), mesh.clone(), mesh];
        let s1 = simulate_series(&meshes, &set, &plan, 0.001, 3.0, 1e-6, 42).unwrap();
        let s2 = simulate_series(&meshes, &set, &plan, 0.001, 3.0, 1e-6, 42).unwrap();
        assert_eq!(s1, s2, "same seed must give identical series");
        let s3 = simulate_series(&meshes, &set, &plan, 0.001, 3.0, 1e-6, 43).unwrap();
        assert_ne!(s1, s3, "different seed must give different noise");
        assert_eq!(s1.len(), 3);
        assert_eq!(s1.width(), plan.len());
        assert_eq!(s1.timestamps(), vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        // Identical meshes: frames differ only by the noise.
        let spread = (s1.frame(0).get(0) - s1.frame(1).get(0)).abs();
        assert!(spread < 1e-4, "noise far larger than requested: {spread}");
    }

    #[test]
    fn zero_noise_series_is_exactly_repeating() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 4, 8);
        let meshes = vec![mesh.clone(), mesh];
        let s = simulate_series(&meshes, &set, &plan, 0.001, 3.0, 0.0, 1).unwrap();
        assert_eq!(s.frame(0), s.frame(1));
    }

    #[test]
    fn incompatible_inputs_are_rejected() {
        let (mesh, set) = disc_with_electrodes();
        let plan = random_channels(set.len(), 4, 2);
        assert!(solve_forward(&mesh, &set, &plan, 0.0).is_err());
        let small_plan = enumerate_all_channels(4).unwrap();
        assert!(solve_forward(&mesh, &set, &small_plan, 1.0).is_err());
        let other = generate_disc_mesh(50.0, 300).unwrap();
        assert!(
            simulate_series(
                &[mesh.clone(), other],
                &set,
                &plan,
                1.0,
                3.0,
                0.0,
                0
            )
            .is_err(),
            "mismatched topologies must be rejected"
        );
    }
}
