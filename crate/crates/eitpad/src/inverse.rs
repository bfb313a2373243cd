//! One-step regularised difference imaging, slice rasters, and the
//! region-of-interest response ratio.
//!
//! Given the sensitivity matrix J (channels x elements) and a vector of
//! channel voltage changes y, the reconstructed per-element conductivity
//! change is the damped-least-squares solution
//!
//! ```text
//!   x = (J'J + lambda R)^-1 J' y,    R = diag(J'J)^p
//! ```
//!
//! computed through the push-through identity so the only dense solve is a
//! channels-by-channels SPD system:
//!
//! ```text
//!   x = W J' (J W J' + lambda I)^-1 y,   W = R^-1 (diagonal).
//! ```
//!
//! The exponent `p` trades off depth weighting: p = 0 is plain Tikhonov,
//! p = 1 fully normalises each element by its sensitivity. The default
//! everywhere in this crate is p = 0.5.

use crate::error::{Error, Result};
use crate::forward::SensitivityMatrix;
use crate::frames::FrameVector;
use crate::geometry::{EllipsoidInclusion, Mesh};
use nalgebra::{DMatrix, DVector};

/// Default damping weight for a given sensitivity matrix:
/// `0.01 * trace(J'J) / channels`. Scales with the squared magnitude of J,
/// so reconstructions are invariant to global rescaling of the drive.
pub fn default_lambda(j: &SensitivityMatrix) -> f64 {
    let m = j.matrix();
    0.01 * m.norm_squared() / m.nrows() as f64
}

/// Per-element relative conductivity change, one scalar per mesh element.
#[derive(Clone, Debug)]
pub struct ReconstructionField {
    values: Vec<f64>,
    /// Elements whose sensitivity diagonal was exactly zero (invisible to
    /// every channel) and got an epsilon floor in the regulariser.
    floored: Vec<usize>,
}

impl ReconstructionField {
    /// Wrap raw per-element values (no floored elements). Exists for I/O
    /// and tests; reconstruction itself always goes through
    /// [`Reconstructor::apply`].
    pub fn from_values(values: Vec<f64>) -> ReconstructionField {
        ReconstructionField {
            values,
            floored: Vec::new(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Elements invisible to every channel (flagged, reconstructed as 0).
    pub fn floored_elements(&self) -> &[usize] {
        &self.floored
    }

    /// Index and value of the entry with the largest magnitude.
    pub fn peak(&self) -> (usize, f64) {
        let mut best = (0, 0.0f64);
        for (i, &v) in self.values.iter().enumerate() {
            if v.abs() > best.1.abs() {
                best = (i, v);
            }
        }
        best
    }
}

/// Reusable reconstruction operator: factors the channel-space system once
/// and maps any voltage-change frame to an element field.
pub struct Reconstructor {
    /// W J' (elements x channels): right factor applied after the solve.
    wjt: DMatrix<f64>,
    /// Cholesky factor of (J W J' + lambda I).
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    floored: Vec<usize>,
    lambda: f64,
}

impl Reconstructor {
    /// Build the operator. `lambda = None` uses [`default_lambda`];
    /// `p` must lie in [0, 1].
    pub fn new(j: &SensitivityMatrix, lambda: Option<f64>, p: f64) -> Result<Reconstructor> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("exponent p must be in [0, 1], got {p}")));
        }
        let m = j.matrix();
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "sensitivity matrix must be non-empty".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite sensitivity entries".into()));
        }
        let lambda = lambda.unwrap_or_else(|| default_lambda(j));
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!(
                "damping weight must be positive and finite, got {lambda}"
            )));
        }

        // Diagonal of J'J: squared column norms.
        let d: Vec<f64> = (0..m.ncols()).map(|e| m.column(e).norm_squared()).collect();
        let dmax = d.iter().fold(0.0f64, |a, &b| a.max(b));
        if dmax == 0.0 {
            return Err(Error::Degenerate(
                "sensitivity matrix is identically zero".into(),
            ));
        }
        // R = d^p with an epsilon floor on exactly-zero diagonals so the
        // regularised system stays positive definite; such elements are
        // invisible to every channel and get flagged.
        let mut floored = Vec::new();
        let r: Vec<f64> = d
            .iter()
            .enumerate()
            .map(|(e, &de)| {
                if de == 0.0 {
                    floored.push(e);
                    (f64::EPSILON * dmax).powf(p)
                } else {
                    de.powf(p)
                }
            })
            .collect();

        // W J' and the channel-space Gram matrix J W J' + lambda I.
        let mut wjt = m.transpose();
        for (re, mut row) in r.iter().zip(wjt.row_iter_mut()) {
            row *= 1.0 / re;
        }
        let mut gram = m * &wjt;
        for i in 0..gram.nrows() {
            gram[(i, i)] += lambda;
        }
        let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| {
            Error::Singular("regularised channel system is not positive definite".into())
        })?;
        Ok(Reconstructor {
            wjt,
            chol,
            floored,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Reconstruct one voltage-change frame. The frame must be expressed
    /// per ampere of drive current (divide raw voltage differences by the
    /// drive current first), matching the sensitivity matrix convention.
    pub fn apply(&self, delta_v: &FrameVector) -> Result<ReconstructionField> {
        if delta_v.len() != self.wjt.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "frame has {} channels, operator expects {}",
                delta_v.len(),
                self.wjt.ncols()
            )));
        }
        let y = DVector::from_column_slice(delta_v.values());
        let z = self.chol.solve(&y);
        let x = &self.wjt * z;
        Ok(ReconstructionField {
            values: x.data.into(),
            floored: self.floored.clone(),
        })
    }
}

/// One-shot reconstruction; see [`Reconstructor`] for the reusable form.
pub fn reconstruct(
    j: &SensitivityMatrix,
    delta_v: &FrameVector,
    lambda: Option<f64>,
    p: f64,
) -> Result<ReconstructionField> {
    Reconstructor::new(j, lambda, p)?.apply(delta_v)
}

/// Rectangular sample of a field on a horizontal cutting plane.
#[derive(Clone, Debug)]
pub struct SliceRaster {
    /// Row-major, `ny` rows of `nx` values; row 0 at the minimum y.
    values: Vec<f64>,
    /// Same layout; true where the cell centre lies inside the domain.
    mask: Vec<bool>,
    nx: usize,
    ny: usize,
    /// Edge length of the square cells, millimetres.
    cell_mm: f64,
    /// World coordinates of the lower-left corner of cell (0, 0).
    origin_mm: [f64; 2],
}

impl SliceRaster {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_mm(&self) -> f64 {
        self.cell_mm
    }

    pub fn origin_mm(&self) -> [f64; 2] {
        self.origin_mm
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn in_domain(&self, ix: usize, iy: usize) -> bool {
        self.mask[iy * self.nx + ix]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Centre of cell (ix, iy) in world coordinates (z is the slice height).
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin_mm[0] + (ix as f64 + 0.5) * self.cell_mm,
            self.origin_mm[1] + (iy as f64 + 0.5) * self.cell_mm,
        ]
    }

    /// In-domain cell with the largest absolute value, if any cell is
    /// in-domain.
    pub fn peak_cell(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if !self.in_domain(ix, iy) {
                    continue;
                }
                let v = self.value(ix, iy);
                if best.map_or(true, |(_, _, bv)| v.abs() > bv.abs()) {
                    best = Some((ix, iy, v));
                }
            }
        }
        best
    }
}

/// Sample `field` on the horizontal plane `height_mm` (ignored for 2-D
/// meshes, which are sampled at z = 0). `resolution` is the number of cells
/// along the longer horizontal extent; cells are square. Cells whose centre
/// falls outside every element get value 0 and a false mask bit.
pub fn slice_field(
    field: &ReconstructionField,
    mesh: &Mesh,
    height_mm: f64,
    resolution: usize,
) -> Result<SliceRaster> {
    if field.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} values, mesh has {} elements",
            field.len(),
            mesh.element_count()
        )));
    }
    if resolution == 0 {
        return Err(Error::param("raster resolution must be at least 1 cell"));
    }
    let (lo, hi) = mesh.bounding_box();
    let z = match mesh.dim() {
        crate::geometry::Dim::Two => 0.0,
        crate::geometry::Dim::Three => {
            if height_mm < lo[2] || height_mm > hi[2] {
                return Err(Error::param(format!(
                    "slice height {height_mm} outside mesh z-extent [{}, {}]",
                    lo[2], hi[2]
                )));
            }
            height_mm
        }
    };
    let extent = [hi[0] - lo[0], hi[1] - lo[1]];
    let cell = extent[0].max(extent[1]) / resolution as f64;
    if !(cell > 0.0) {
        return Err(Error::Degenerate("mesh has zero horizontal extent".into()));
    }
    let nx = (extent[0] / cell).ceil().max(1.0) as usize;
    let ny = (extent[1] / cell).ceil().max(1.0) as usize;

    // Bounding boxes per element cut the point-location cost enough for the
    // raster sizes used here.
    let boxes: Vec<([f64; 2], [f64; 2])> = (0..mesh.element_count())
        .map(|e| {
            let mut bl = [f64::INFINITY; 2];
            let mut tr = [f64::NEG_INFINITY; 2];
            let mut zr = (f64::INFINITY, f64::NEG_INFINITY);
            for &n in mesh.element(e) {
                let p = mesh.node(n);
                for k in 0..2 {
                    bl[k] = bl[k].min(p[k]);
                    tr[k] = tr[k].max(p[k]);
                }
                zr = (zr.0.min(p[2]), zr.1.max(p[2]));
            }
            if mesh.dim() == crate::geometry::Dim::Three && (z < zr.0 || z > zr.1) {
                // Mark elements that cannot contain the plane with an empty
                // box so the scan below skips them outright.
                ([1.0, 1.0], [0.0, 0.0])
            } else {
                (bl, tr)
            }
        })
        .collect();

    let mut values = vec![0.0; nx * ny];
    let mut mask = vec![false; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = [
                lo[0] + (ix as f64 + 0.5) * cell,
                lo[1] + (iy as f64 + 0.5) * cell,
                z,
            ];
            for (e, (bl, tr)) in boxes.iter().enumerate() {
                if p[0] < bl[0] || p[0] > tr[0] || p[1] < bl[1] || p[1] > tr[1] {
                    continue;
                }
                if mesh.element_contains(e, p) {
                    values[iy * nx + ix] = field.values[e];
                    mask[iy * nx + ix] = true;
                    break;
                }
            }
        }
    }
    Ok(SliceRaster {
        values,
        mask,
        nx,
        ny,
        cell_mm: cell,
        origin_mm: [lo[0], lo[1]],
    })
}

/// Localization quality: mean |value| over elements whose centroid lies in
/// `region`, divided by the mean |value| over all elements. Returns
/// `f64::INFINITY` when the region responds but the whole-domain mean is
/// exactly zero -- only possible for an identically-zero field, where the
/// ratio is meaningless and the caller should treat the run as degenerate.
pub fn roi_response_ratio(
    field: &ReconstructionField,
    mesh: &Mesh,
    region: &EllipsoidInclusion,
) -> Result<f64> {
    if field.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} values, mesh has {} elements",
            field.len(),
            mesh.element_count()
        )));
    }
    let mut inside_sum = 0.0;
    let mut inside_n = 0usize;
    let mut total_sum = 0.0;
    for e in 0..mesh.element_count() {
        let v = field.values[e].abs();
        total_sum += v;
        if region.contains(mesh.centroid(e)) {
            inside_sum += v;
            inside_n += 1;
        }
    }
    if inside_n == 0 {
        return Err(Error::Degenerate(
            "region of interest contains no element centroid".into(),
        ));
    }
    let inside_mean = inside_sum / inside_n as f64;
    let total_mean = total_sum / mesh.element_count() as f64;
    if total_mean == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(inside_mean / total_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SensitivityMatrix;
    use crate::geometry::disc::generate_disc_mesh;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sensitivity(rows: usize, cols: usize, seed: u64) -> SensitivityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        SensitivityMatrix::from_matrix(m)
    }

    /// Direct dense solve of (J'J + lambda R) x = J' y -- the textbook
    /// normal-equations form the push-through implementation must match.
    fn dense_oracle(j: &SensitivityMatrix, y: &[f64], lambda: f64, p: f64) -> Vec<f64> {
        let m = j.matrix();
        let jtj = m.transpose() * m;
        let mut a = jtj.clone();
        for e in 0..a.nrows() {
            a[(e, e)] += lambda * jtj[(e, e)].powf(p);
        }
        let rhs = m.transpose() * DVector::from_column_slice(y);
        let x = a.lu().solve(&rhs).expect("oracle system solvable");
        x.data.into()
    }

    #[test]
    fn matches_dense_normal_equations_on_a_toy_system() {
        let j = random_sensitivity(5, 8, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        for p in [0.0, 0.5, 1.0] {
            let lambda = 0.05;
            let ours = reconstruct(
                &j,
                &FrameVector::new(y.clone()).unwrap(),
                Some(lambda),
                p,
            )
            .unwrap();
            let oracle = dense_oracle(&j, &y, lambda, p);
            for (a, b) in ours.values().iter().zip(&oracle) {
                assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn zero_input_reconstructs_to_zero() {
        let j = random_sensitivity(6, 10, 3);
        let out = reconstruct(&j, &FrameVector::new(vec![0.0; 6]).unwrap(), None, 0.5).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_a_row_space_perturbation_as_damping_vanishes() {
        // x constructed in the weighted row space of J is the exact
        // damped-least-squares limit.
        let j = random_sensitivity(5, 8, 21);
        let m = j.matrix();
        let p = 0.5;
        let d: Vec<f64> = (0..m.ncols()).map(|e| m.column(e).norm_squared()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let alpha = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let mut x_true = m.transpose() * alpha;
        for e in 0..x_true.len() {
            x_true[e] /= d[e].powf(p);
        }
        let y = m * &x_true;
        let out = reconstruct(
            &j,
            &FrameVector::new(y.data.into()).unwrap(),
            Some(1e-12),
            p,
        )
        .unwrap();
        for (a, b) in out.values().iter().zip(x_true.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn reconstruction_is_linear_in_the_data() {
        let j = random_sensitivity(6, 9, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (2.5, -0.75);
        let rec = Reconstructor::new(&j, None, 0.5).unwrap();
        let fx = rec.apply(&FrameVector::new(x.clone()).unwrap()).unwrap();
        let fy = rec.apply(&FrameVector::new(y.clone()).unwrap()).unwrap();
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let fm = rec.apply(&FrameVector::new(mixed).unwrap()).unwrap();
        let scale = fm.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..fm.len() {
            let expect = a * fx.values()[i] + b * fy.values()[i];
            assert!(
                (fm.values()[i] - expect).abs() <= 1e-10 * scale.max(1.0),
                "element {i}"
            );
        }
    }

    #[test]
    fn stronger_damping_shrinks_the_solution() {
        let j = random_sensitivity(6, 9, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let frame = FrameVector::new(y).unwrap();
        let norm_at = |lambda: f64| {
            let f = reconstruct(&j, &frame, Some(lambda), 0.5).unwrap();
            f.values().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let norms: Vec<f64> = [1e-4, 1e-2, 1.0, 100.0].iter().map(|&l| norm_at(l)).collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0], "norms not decreasing: {norms:?}");
        }
    }

    #[test]
    fn invisible_elements_are_floored_and_flagged() {
        let mut m = random_sensitivity(5, 7, 51).matrix().clone();
        m.column_mut(3).fill(0.0);
        let j = SensitivityMatrix::from_matrix(m);
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = reconstruct(&j, &FrameVector::new(y).unwrap(), None, 0.5).unwrap();
        assert_eq!(out.floored_elements(), &[3]);
        assert_eq!(out.values()[3], 0.0, "invisible element must stay zero");
    }

    #[test]
    fn rejects_bad_parameters() {
        let j = random_sensitivity(5, 7, 61);
        let y = FrameVector::new(vec![0.0; 5]).unwrap();
        assert!(reconstruct(&j, &y, Some(0.01), -0.1).is_err());
        assert!(reconstruct(&j, &y, Some(0.01), 1.5).is_err());
        assert!(reconstruct(&j, &y, Some(0.0), 0.5).is_err());
        assert!(reconstruct(&j, &y, Some(-1.0), 0.5).is_err());
        let short = FrameVector::new(vec![0.0; 4]).unwrap();
        assert!(reconstruct(&j, &short, None, 0.5).is_err());
    }

    // ------------------------------------------------------------------
    // slicing
    // ------------------------------------------------------------------

    fn uniform_field(mesh: &Mesh, c: f64) -> ReconstructionField {
        ReconstructionField {
            values: vec![c; mesh.element_count()],
            floored: Vec::new(),
        }
    }

    #[test]
    fn uniform_field_slices_to_uniform_in_domain_cells() {
        let mesh = generate_disc_mesh(50.0, 300).unwrap();
        let field = uniform_field(&mesh, 2.5);
        let raster = slice_field(&field, &mesh, 0.0, 24).unwrap();
        let mut in_domain = 0;
        for iy in 0..raster.ny() {
            for ix in 0..raster.nx() {
                if raster.in_domain(ix, iy) {
                    assert_eq!(raster.value(ix, iy), 2.5);
                    in_domain += 1;
                } else {
                    assert_eq!(raster.value(ix, iy), 0.0);
                }
            }
        }
        // The disc fills pi/4 of its bounding square; the mask should too.
        let frac = in_domain as f64 / (raster.nx() * raster.ny()) as f64;
        assert!((frac - std::f64::consts::FRAC_PI_4).abs() < 0.08, "{frac}");
    }

    #[test]
    fn single_cell_raster_samples_the_containing_element() {
        let mesh = generate_disc_mesh(50.0, 300).unwrap();
        let mut values = vec![0.0; mesh.element_count()];
        for (e, v) in values.iter_mut().enumerate() {
            *v = e as f64;
        }
        let field = ReconstructionField {
            values: values.clone(),
            floored: Vec::new(),
        };
        let raster = slice_field(&field, &mesh, 0.0, 1).unwrap();
        assert_eq!((raster.nx(), raster.ny()), (1, 1));
        assert!(raster.in_domain(0, 0));
        let center = raster.cell_center(0, 0);
        let e = (0..mesh.element_count())
            .find(|&e| mesh.element_contains(e, [center[0], center[1], 0.0]))
            .expect("centre cell inside the disc");
        assert_eq!(raster.value(0, 0), values[e]);
    }

    #[test]
    fn slice_extremum_stays_inside_a_painted_inclusion() {
        let mesh = generate_disc_mesh(60.0, 900).unwrap();
        let region = EllipsoidInclusion {
            center: [20.0, -10.0, 0.0],
            radii: [14.0, 14.0, 14.0],
            conductivity: 1.0,
        };
        // Paint a sign-definite bump inside the region, weak noise outside.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..mesh.element_count())
            .map(|e| {
                if region.contains(mesh.centroid(e)) {
                    5.0 + rng.random_range(0.0..0.5)
                } else {
                    rng.random_range(-0.2..0.2)
                }
            })
            .collect();
        let field = ReconstructionField {
            values,
            floored: Vec::new(),
        };
        let raster = slice_field(&field, &mesh, 0.0, 48).unwrap();
        let (ix, iy, _) = raster.peak_cell().unwrap();
        let c = raster.cell_center(ix, iy);
        // Brute-force point-in-ellipse check.
        let dx = (c[0] - region.center[0]) / region.radii[0];
        let dy = (c[1] - region.center[1]) / region.radii[1];
        assert!(
            dx * dx + dy * dy <= 1.0,
            "peak cell at {c:?} outside the painted ellipse"
        );
    }

    #[test]
    fn slice_rejects_heights_outside_the_mesh() {
        use crate::geometry::cylinder::generate_cylinder_mesh;
        let mesh = generate_cylinder_mesh(30.0, 60.0, 400).unwrap();
        let field = uniform_field(&mesh, 1.0);
        assert!(slice_field(&field, &mesh, -5.0, 8).is_err());
        assert!(slice_field(&field, &mesh, 65.0, 8).is_err());
        assert!(slice_field(&field, &mesh, 30.0, 8).is_ok());
    }

    // ------------------------------------------------------------------
    // region-of-interest ratio
    // ------------------------------------------------------------------

    #[test]
    fn uniform_field_has_unit_roi_ratio() {
        let mesh = generate_disc_mesh(50.0, 300).unwrap();
        let field = uniform_field(&mesh, -3.0);
        let region = EllipsoidInclusion {
            center: [0.0, 0.0, 0.0],
            radii: [20.0, 20.0, 20.0],
            conductivity: 1.0,
        };
        let ratio = roi_response_ratio(&field, &mesh, &region).unwrap();
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn region_only_field_ratio_matches_direct_count() {
        let mesh = generate_disc_mesh(50.0, 500).unwrap();
        let region = EllipsoidInclusion {
            center: [10.0, 5.0, 0.0],
            radii: [15.0, 15.0, 15.0],
            conductivity: 1.0,
        };
        let inside: Vec<bool> = (0..mesh.element_count())
            .map(|e| region.contains(mesh.centroid(e)))
            .collect();
        let n_inside = inside.iter().filter(|&&b| b).count();
        assert!(n_inside > 0);
        let values: Vec<f64> = inside.iter().map(|&b| if b { 2.0 } else { 0.0 }).collect();
        let field = ReconstructionField {
            values,
            floored: Vec::new(),
        };
        let ratio = roi_response_ratio(&field, &mesh, &region).unwrap();
        let expect = mesh.element_count() as f64 / n_inside as f64;
        assert_relative_eq!(ratio, expect, max_relative = 1e-12);
        assert!(ratio > 1.0);
    }

    #[test]
    fn roi_ratio_is_scale_invariant_and_flags_degenerate_fields() {
        let mesh = generate_disc_mesh(50.0, 300).unwrap();
        let region = EllipsoidInclusion {
            center: [0.0, 0.0, 0.0],
            radii: [25.0, 25.0, 25.0],
            conductivity: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let values: Vec<f64> = (0..mesh.element_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f1 = ReconstructionField {
            values: values.clone(),
            floored: Vec::new(),
        };
        let f2 = ReconstructionField {
            values: values.iter().map(|v| v * -41.0).collect(),
            floored: Vec::new(),
        };
        let r1 = roi_response_ratio(&f1, &mesh, &region).unwrap();
        let r2 = roi_response_ratio(&f2, &mesh, &region).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-12);

        let zero = uniform_field(&mesh, 0.0);
        let rz = roi_response_ratio(&zero, &mesh, &region).unwrap();
        assert!(rz.is_infinite());

        let off_domain = EllipsoidInclusion {
            center: [500.0, 0.0, 0.0],
            radii: [1.0, 1.0, 1.0],
            conductivity: 1.0,
        };
        assert!(roi_response_ratio(&f1, &mesh, &off_domain).is_err());
    }
}
