//! Electrode pads: planar grid placement on the domain surface, random
//! relocation, and the degraded-contact conductivity model.
//!
//! Electrodes are points bound to mesh boundary nodes. A grid layout is
//! draped over the curved surface by walking geodesic-ish paths from the pad
//! centre: rows advance along the transported second axis, electrodes within
//! a row along the first. Electrode `r * cols + c` is row `r`, column `c`
//! (row-major), which is also the index convention the channel plans use.
//!
//! In 2-D the grid degenerates to `rows * cols` electrodes strung along the
//! boundary curve at the same spacing, in row-major order.

use crate::error::{Error, Result};
use crate::geometry::{Dim, Mesh};
use crate::surface::Surface;
use crate::vec3::{self, Vec3};
use rand::Rng;

/// How many fresh draws a relocation may take to find a collision-free
/// node before giving up.
const RELOCATE_RETRIES: usize = 64;

/// Lower end of the relocation displacement draw, mm (clamped down when the
/// requested maximum is smaller).
pub const MIN_DISPLACEMENT_MM: f64 = 5.0;

/// A rows x cols electrode grid with fixed spacing, anchored at `origin`
/// (projected onto the surface) and oriented so electrodes within a row
/// advance along `orientation` (projected tangential).
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub origin: Vec3,
    pub orientation: Vec3,
}

impl GridLayout {
    pub fn new(rows: usize, cols: usize, spacing_mm: f64) -> Result<GridLayout> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("grid must have at least one row and column"));
        }
        if rows * cols < 4 {
            return Err(Error::param(format!(
                "grid needs at least 4 electrodes, {rows}x{cols} has {}",
                rows * cols
            )));
        }
        if rows.max(cols) < 2 {
            return Err(Error::param("grid must extend in at least one direction"));
        }
        if !(spacing_mm > 0.0) || !spacing_mm.is_finite() {
            return Err(Error::param(format!(
                "electrode spacing must be positive and finite, got {spacing_mm}"
            )));
        }
        Ok(GridLayout {
            rows,
            cols,
            spacing_mm,
            origin: [0.0, 0.0, 0.0],
            orientation: [0.0, 1.0, 0.0],
        })
    }

    pub fn with_origin(mut self, origin: Vec3) -> GridLayout {
        self.origin = origin;
        self
    }

    pub fn with_orientation(mut self, orientation: Vec3) -> GridLayout {
        self.orientation = orientation;
        self
    }

    pub fn electrode_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major electrode index of grid position (row, col).
    pub fn index_of(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn label(&self) -> String {
        format!("{}x{}@{}mm", self.rows, self.cols, self.spacing_mm)
    }
}

/// Electrodes bound to mesh boundary nodes, in row-major grid order.
#[derive(Clone, Debug)]
pub struct ElectrodeSet {
    layout: GridLayout,
    /// Where the grid construction wanted each electrode (on the surface)...
    nominal: Vec<Vec3>,
    /// ...and the boundary node each one actually snapped to.
    nodes: Vec<usize>,
    /// Coordinates of the snapped nodes.
    positions: Vec<Vec3>,
    contact_radius_mm: f64,
}

impl ElectrodeSet {
    /// Validate and assemble a set. Fails on duplicate node bindings.
    fn from_parts(
        layout: GridLayout,
        nominal: Vec<Vec3>,
        nodes: Vec<usize>,
        positions: Vec<Vec3>,
        contact_radius_mm: f64,
    ) -> Result<ElectrodeSet> {
        debug_assert_eq!(nominal.len(), nodes.len());
        debug_assert_eq!(positions.len(), nodes.len());
        for a in 0..nodes.len() {
            for b in (a + 1)..nodes.len() {
                if nodes[a] == nodes[b] {
                    return Err(Error::ElectrodeCollision {
                        a,
                        b,
                        node: nodes[a],
                    });
                }
            }
        }
        Ok(ElectrodeSet {
            layout,
            nominal,
            nodes,
            positions,
            contact_radius_mm,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// Boundary node index of electrode `i`.
    pub fn node(&self, i: usize) -> usize {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Coordinate of the bound node.
    pub fn position(&self, i: usize) -> Vec3 {
        self.positions[i]
    }

    /// Where the grid wanted electrode `i` before snapping.
    pub fn nominal_position(&self, i: usize) -> Vec3 {
        self.nominal[i]
    }

    /// Radius of the contact patch used by the degraded-contact model.
    pub fn contact_radius_mm(&self) -> f64 {
        self.contact_radius_mm
    }

    pub fn with_contact_radius(mut self, radius_mm: f64) -> Result<ElectrodeSet> {
        if !(radius_mm > 0.0) || !radius_mm.is_finite() {
            return Err(Error::param(format!(
                "contact radius must be positive and finite, got {radius_mm}"
            )));
        }
        self.contact_radius_mm = radius_mm;
        Ok(self)
    }
}

/// Drape the grid over the mesh surface and bind each electrode to its
/// nearest boundary node.
///
/// Fails if a nominal position has no boundary node within half the
/// electrode spacing (mesh too coarse / pad hangs off the domain) or if two
/// electrodes snap to the same node.
pub fn place_grid(mesh: &Mesh, layout: &GridLayout) -> Result<ElectrodeSet> {
    let surface = Surface::new(mesh)?;
    let nominal = match mesh.dim() {
        Dim::Three => nominal_grid_3d(&surface, layout)?,
        Dim::Two => nominal_chain_2d(&surface, layout)?,
    };

    let tolerance = layout.spacing_mm / 2.0;
    let mut nodes = Vec::with_capacity(nominal.len());
    let mut positions = Vec::with_capacity(nominal.len());
    for (i, &p) in nominal.iter().enumerate() {
        let (node, dist) = surface.nearest_boundary_node(p);
        if dist > tolerance {
            return Err(Error::OffSurface(format!(
                "electrode {i} nominal position {p:?} is {dist:.2} mm from the nearest \
                 boundary node (limit {tolerance:.2} mm); mesh too coarse for this layout"
            )));
        }
        nodes.push(node);
        positions.push(mesh.node(node));
    }

    ElectrodeSet::from_parts(
        layout.clone(),
        nominal,
        nodes,
        positions,
        layout.spacing_mm / 4.0,
    )
}

/// Grid points on a 3-D surface: walk row offsets along the transported
/// vertical axis, then column offsets along the transported horizontal axis.
fn nominal_grid_3d(surface: &Surface, layout: &GridLayout) -> Result<Vec<Vec3>> {
    let (center, _) = surface.closest_point(layout.origin);
    let n0 = surface.normal_near(center);
    let u0 = vec3::normalize(vec3::reject(layout.orientation, n0)).ok_or_else(|| {
        Error::OffSurface(
            "grid orientation is parallel to the surface normal at the origin".into(),
        )
    })?;
    // Row-advance axis: perpendicular to both the normal and the row
    // direction, so the pad is a proper two-axis grid.
    let v0 = vec3::cross(n0, u0);

    let mut points = Vec::with_capacity(layout.electrode_count());
    for r in 0..layout.rows {
        let row_offset = (r as f64 - (layout.rows as f64 - 1.0) / 2.0) * layout.spacing_mm;
        // Walk to the row anchor, transporting the row direction as aux.
        let anchor = surface.walk(center, v0, u0, row_offset)?;
        let u_row = anchor.aux;
        let n_row = surface.normal_near(anchor.pos);
        let v_row = vec3::cross(n_row, u_row);
        for c in 0..layout.cols {
            let col_offset = (c as f64 - (layout.cols as f64 - 1.0) / 2.0) * layout.spacing_mm;
            let end = surface.walk(anchor.pos, u_row, v_row, col_offset)?;
            points.push(end.pos);
        }
    }
    Ok(points)
}

/// 2-D degenerate grid: electrodes in row-major order strung along the
/// boundary curve, centred on the origin's projection.
fn nominal_chain_2d(surface: &Surface, layout: &GridLayout) -> Result<Vec<Vec3>> {
    let (center, _) = surface.closest_point(layout.origin);
    let count = layout.electrode_count();
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let offset = (k as f64 - (count as f64 - 1.0) / 2.0) * layout.spacing_mm;
        let end = surface.walk(center, layout.orientation, [0.0, 0.0, 1.0], offset)?;
        points.push(end.pos);
    }
    Ok(points)
}

/// Randomly relocate the chosen electrodes along the surface.
///
/// Each one moves a uniform distance in `[5 mm, max_displacement_mm]` (lower
/// bound clamped down to the maximum if that is smaller) in a uniform
/// tangent direction, then snaps to the nearest boundary node. A draw that
/// lands on another electrode's node is retried a bounded number of times.
/// Nominal positions are kept: they record the designed pad, not the fault.
pub fn relocate(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    indices: &[usize],
    max_displacement_mm: f64,
    rng: &mut impl Rng,
) -> Result<ElectrodeSet> {
    let lo = MIN_DISPLACEMENT_MM.min(max_displacement_mm);
    relocate_range(mesh, electrodes, indices, (lo, max_displacement_mm), rng)
}

/// As [`relocate`] but with both ends of the displacement-distance range
/// explicit.
pub fn relocate_range(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    indices: &[usize],
    displacement_range_mm: (f64, f64),
    rng: &mut impl Rng,
) -> Result<ElectrodeSet> {
    let (lo, max_displacement_mm) = displacement_range_mm;
    if !(lo >= 0.0) || !(max_displacement_mm >= lo) || !max_displacement_mm.is_finite() {
        return Err(Error::param(format!(
            "displacement range must satisfy 0 <= low <= high, got \
             ({lo}, {max_displacement_mm})"
        )));
    }
    let checked = check_indices(indices, electrodes.len())?;
    let surface = Surface::new(mesh)?;

    let mut nodes = electrodes.nodes.clone();
    let mut positions = electrodes.positions.clone();
    for &idx in &checked {
        let p = positions[idx];
        let normal = surface.node_normal(nodes[idx])?;
        let t1 = vec3::any_tangent(normal);
        let t2 = vec3::cross(normal, t1);
        let mut placed = false;
        for _ in 0..RELOCATE_RETRIES {
            let dist = rng.random_range(lo..=max_displacement_mm);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let step = vec3::add(
                vec3::scale(t1, dist * phi.cos()),
                vec3::scale(t2, dist * phi.sin()),
            );
            let target = vec3::add(p, step);
            let (node, _) = surface.nearest_boundary_node(target);
            let collides = nodes
                .iter()
                .enumerate()
                .any(|(other, &n)| other != idx && n == node);
            if !collides {
                nodes[idx] = node;
                positions[idx] = mesh.node(node);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::OffSurface(format!(
                "no collision-free relocation found for electrode {idx} \
                 after {RELOCATE_RETRIES} draws"
            )));
        }
    }

    ElectrodeSet::from_parts(
        electrodes.layout.clone(),
        electrodes.nominal.clone(),
        nodes,
        positions,
        electrodes.contact_radius_mm,
    )
}

/// Degraded electrode contact: for each chosen electrode, divide the
/// conductivity of every element with a node inside the contact patch by a
/// factor drawn uniformly from `factor_range` (impedance up = conductivity
/// down). Overlapping patches accumulate. Returns a new mesh.
pub fn contact_shift(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    indices: &[usize],
    factor_range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<Mesh> {
    let (lo, hi) = factor_range;
    if !(lo >= 1.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::param(format!(
            "impedance factor range must satisfy 1 <= low <= high, got ({lo}, {hi})"
        )));
    }
    let checked = check_indices(indices, electrodes.len())?;
    let radius = electrodes.contact_radius_mm();
    let mut sigma = mesh.conductivity().to_vec();
    let stride = mesh.dim().nodes_per_element();
    for &idx in &checked {
        let factor = rng.random_range(lo..=hi);
        let center = electrodes.position(idx);
        for e in 0..mesh.element_count() {
            let touches = (0..stride)
                .any(|k| vec3::distance(mesh.node(mesh.element(e)[k]), center) <= radius);
            if touches {
                sigma[e] /= factor;
            }
        }
    }
    mesh.with_conductivity(sigma)
}

/// Deduplicate, bounds-check, and sort perturbation target indices so the
/// application order never depends on caller ordering.
fn check_indices(indices: &[usize], len: usize) -> Result<Vec<usize>> {
    let mut out = indices.to_vec();
    out.sort_unstable();
    out.dedup();
    if out.len() != indices.len() {
        return Err(Error::param("electrode index list contains duplicates"));
    }
    if let Some(&bad) = out.iter().find(|&&i| i >= len) {
        return Err(Error::param(format!(
            "electrode index {bad} out of range (set has {len})"
        )));
    }
    Ok(out)
}
