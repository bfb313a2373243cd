//! Experiment orchestration: randomized electrode-fault trials, labeled
//! dataset generation for volume classification, and layout sweeps.
//!
//! A "trial" models one handheld placement of the pad: `k` electrodes are
//! chosen at random and each gets both a contact-impedance shift and a
//! relocation along the body surface. Everything is driven by explicit
//! seeds; the same master seed always reproduces the same dataset, row for
//! row, regardless of how the work is scheduled.

use crate::channels::{ChannelPlan, PlanStrategy};
use crate::electrodes::{contact_shift, relocate_range, ElectrodeSet, GridLayout};
use crate::error::{Error, Result};
use crate::forward::{jacobian, solve_forward};
use crate::frames::FrameVector;
use crate::geometry::{apply_inclusion, volume_to_ellipsoid, EllipsoidInclusion, Mesh};
use crate::inverse::{reconstruct, roi_response_ratio};
use crate::vec3::Vec3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

/// How hard one trial shakes the pad: `degree` electrodes get a contact
/// impedance shift and a relocation.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    /// Number of electrodes perturbed (the paper's k).
    pub degree: usize,
    /// Contact impedance multiplier range; conductivity near the electrode
    /// is divided by a draw from this range.
    pub impedance_factor_range: (f64, f64),
    /// Relocation distance range along the surface, millimetres.
    pub displacement_range_mm: (f64, f64),
    /// Seed for the self-seeding entry point [`perturb_trial_seeded`].
    pub seed: u64,
}

impl PerturbationSpec {
    /// Spec with the study's stock fault magnitudes: impedance shifts of
    /// 2-5x and displacements of 5-20 mm.
    pub fn new(degree: usize, seed: u64) -> PerturbationSpec {
        PerturbationSpec {
            degree,
            impedance_factor_range: (2.0, 5.0),
            displacement_range_mm: (5.0, 20.0),
            seed,
        }
    }

    pub fn validate(&self, electrode_count: usize) -> Result<()> {
        if self.degree > electrode_count {
            return Err(Error::param(format!(
                "cannot perturb {} of {} electrodes",
                self.degree, electrode_count
            )));
        }
        let (flo, fhi) = self.impedance_factor_range;
        if !(flo >= 1.0) || !(fhi >= flo) || !fhi.is_finite() {
            return Err(Error::param(format!(
                "impedance factor range must satisfy 1 <= low <= high, got ({flo}, {fhi})"
            )));
        }
        let (dlo, dhi) = self.displacement_range_mm;
        if !(dlo >= 0.0) || !(dhi >= dlo) || !dhi.is_finite() {
            return Err(Error::param(format!(
                "displacement range must satisfy 0 <= low <= high, got ({dlo}, {dhi})"
            )));
        }
        Ok(())
    }
}

/// Apply one randomized fault trial. Selects `spec.degree` electrodes
/// uniformly without replacement, relocates exactly that set, then applies
/// the contact-impedance shift around the *relocated* positions (the fault
/// degrades contact wherever the electrode actually sits).
pub fn perturb_trial(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    spec: &PerturbationSpec,
    rng: &mut impl Rng,
) -> Result<(Mesh, ElectrodeSet)> {
    spec.validate(electrodes.len())?;
    if spec.degree == 0 {
        return Ok((mesh.clone(), electrodes.clone()));
    }
    let mut chosen: Vec<usize> = sample(rng, electrodes.len(), spec.degree).into_vec();
    chosen.sort_unstable();
    let moved = relocate_range(mesh, electrodes, &chosen, spec.displacement_range_mm, rng)?;
    let shifted = contact_shift(mesh, &moved, &chosen, spec.impedance_factor_range, rng)?;
    Ok((shifted, moved))
}

/// [`perturb_trial`] with the random source built from `spec.seed`.
pub fn perturb_trial_seeded(
    mesh: &Mesh,
    electrodes: &ElectrodeSet,
    spec: &PerturbationSpec,
) -> Result<(Mesh, ElectrodeSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perturb_trial(mesh, electrodes, spec, &mut rng)
}

/// A complete simulated measurement setup: empty-organ background mesh, pad,
/// channel plan, inclusion geometry, and acquisition parameters.
#[derive(Clone, Debug)]
pub struct Scene {
    /// Homogeneous (empty-organ) background mesh.
    pub mesh: Mesh,
    pub electrodes: ElectrodeSet,
    pub plan: ChannelPlan,
    /// Centre of the fluid inclusion, millimetres.
    pub inclusion_center: Vec3,
    /// Relative semi-axis proportions of the inclusion.
    pub inclusion_aspect: Vec3,
    /// Conductivity of the fluid, S/m.
    pub inclusion_sigma: f64,
    /// Drive current, amperes.
    pub current_a: f64,
    /// Measurement noise standard deviation, volts.
    pub noise_sd_v: f64,
}

impl Scene {
    /// The inclusion ellipsoid for a given fluid volume.
    pub fn inclusion_for(&self, volume_ml: f64) -> Result<EllipsoidInclusion> {
        volume_to_ellipsoid(
            volume_ml,
            self.inclusion_aspect,
            self.inclusion_center,
            self.inclusion_sigma,
        )
    }

    /// Background mesh with the inclusion for `volume_ml` painted in.
    pub fn mesh_with_volume(&self, volume_ml: f64) -> Result<Mesh> {
        apply_inclusion(&self.mesh, &self.inclusion_for(volume_ml)?)
    }

    /// Noise-free voltages of the unperturbed empty scene: the session
    /// baseline every difference feature is measured against.
    pub fn baseline(&self) -> Result<FrameVector> {
        solve_forward(&self.mesh, &self.electrodes, &self.plan, self.current_a)
    }
}

/// One labeled example: difference features for every channel plus the
/// ground truth and provenance needed for grouped evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRow {
    /// Voltage change per channel against the session baseline, volts.
    pub features: Vec<f64>,
    /// Ground-truth fluid volume, mL (the class label).
    pub label_ml: f64,
    /// Perturbation degree the row was generated under (the grouping key).
    pub k: usize,
    pub trial: usize,
    /// The derived per-trial seed, recorded for replay.
    pub seed: u64,
}

/// Feature rows plus the channel plan they were measured with.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    channels: usize,
    rows: Vec<DatasetRow>,
}

impl LabeledDataset {
    pub fn new(channels: usize, rows: Vec<DatasetRow>) -> Result<LabeledDataset> {
        if channels == 0 {
            return Err(Error::param("dataset needs at least one channel"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != channels {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} features, dataset declares {channels}",
                    row.features.len()
                )));
            }
            if row.features.iter().any(|v| !v.is_finite()) || !row.label_ml.is_finite() {
                return Err(Error::Degenerate(format!("row {i} holds non-finite values")));
            }
        }
        Ok(LabeledDataset { channels, rows })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sorted distinct volume labels present.
    pub fn volumes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.label_ml).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
        v.dedup();
        v
    }

    /// Sorted distinct perturbation degrees present.
    pub fn k_levels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rows satisfying the predicate, as a new dataset (order preserved).
    pub fn filtered(&self, keep: impl Fn(&DatasetRow) -> bool) -> LabeledDataset {
        LabeledDataset {
            channels: self.channels,
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

/// What to sweep when generating a dataset.
#[derive(Clone, Debug)]
pub struct DatasetProtocol {
    /// Fluid volumes to label rows with, mL.
    pub volumes_ml: Vec<f64>,
    /// Perturbation degrees to sweep.
    pub k_levels: Vec<usize>,
    pub trials_per_cell: usize,
    pub impedance_factor_range: (f64, f64),
    pub displacement_range_mm: (f64, f64),
    pub master_seed: u64,
}

impl DatasetProtocol {
    /// Protocol used throughout the study: 16 independent trials per
    /// (volume, k) cell with the stock fault magnitudes.
    pub fn new(volumes_ml: Vec<f64>, k_levels: Vec<usize>, master_seed: u64) -> DatasetProtocol {
        DatasetProtocol {
            volumes_ml,
            k_levels,
            trials_per_cell: 16,
            impedance_factor_range: (2.0, 5.0),
            displacement_range_mm: (5.0, 20.0),
            master_seed,
        }
    }
}

/// One step of the splitmix64 output mix; a cheap, well-scrambled 64-bit
/// hash used to derive independent per-trial seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for one (volume, k, trial) cell, derived from the master seed by
/// hashing the tuple. Order-independent: trials can run in any schedule.
pub fn trial_seed(master: u64, volume_ml: f64, k: usize, trial: usize) -> u64 {
    let mut h = mix64(master);
    h = mix64(h ^ volume_ml.to_bits());
    h = mix64(h ^ (k as u64));
    mix64(h ^ (trial as u64))
}

/// Simulate the full labeled dataset: for every volume class, perturbation
/// degree, and trial, paint the inclusion, fault the pad, solve, add
/// measurement noise, and subtract the clean empty-scene baseline. Rows come
/// back ordered by (volume, k, trial) regardless of execution order; any
/// trial error aborts the whole generation.
pub fn generate_dataset(scene: &Scene, protocol: &DatasetProtocol) -> Result<LabeledDataset> {
    if protocol.trials_per_cell == 0 {
        return Err(Error::param("need at least one trial per cell"));
    }
    if protocol.volumes_ml.is_empty() || protocol.k_levels.is_empty() {
        return Err(Error::param("volume classes and k levels must be non-empty"));
    }
    let baseline = scene.baseline()?;

    let mut cells: Vec<(f64, usize, usize)> = Vec::new();
    for &vol in &protocol.volumes_ml {
        for &k in &protocol.k_levels {
            for trial in 0..protocol.trials_per_cell {
                cells.push((vol, k, trial));
            }
        }
    }

    let rows: Result<Vec<DatasetRow>> = cells
        .par_iter()
        .map(|&(vol, k, trial)| {
            let seed = trial_seed(protocol.master_seed, vol, k, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = scene.mesh_with_volume(vol)?;
            let spec = PerturbationSpec {
                degree: k,
                impedance_factor_range: protocol.impedance_factor_range,
                displacement_range_mm: protocol.displacement_range_mm,
                seed,
            };
            let (mesh, electrodes) = perturb_trial(&full, &scene.electrodes, &spec, &mut rng)?;
            let clean = solve_forward(&mesh, &electrodes, &scene.plan, scene.current_a)?;
            let noise = rand_distr::Normal::new(0.0, scene.noise_sd_v)
                .map_err(|e| Error::param(format!("bad noise distribution: {e}")))?;
            let features: Vec<f64> = clean
                .values()
                .iter()
                .zip(baseline.values())
                .map(|(v, b)| {
                    let n = if scene.noise_sd_v > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    v + n - b
                })
                .collect();
            Ok(DatasetRow {
                features,
                label_ml: vol,
                k,
                trial,
                seed,
            })
        })
        .collect();

    LabeledDataset::new(scene.plan.len(), rows?)
}

/// RoI localization score of one pad design at one fill volume.
#[derive(Clone, Debug)]
pub struct LayoutResponse {
    pub layout: GridLayout,
    pub ratio: f64,
    /// True when the difference signal was identically zero (for example a
    /// zero fill volume), making the ratio meaningless.
    pub degenerate: bool,
}

/// Score each pad design by how well a noise-free, fault-free reconstruction
/// of `volume_ml` concentrates inside the true inclusion. Each layout is
/// placed on the same mesh, measured with its own channel plan built by
/// `strategy`, and reconstructed with the shared damping parameters.
pub fn layout_sweep(
    base_mesh: &Mesh,
    layouts: &[GridLayout],
    strategy: PlanStrategy,
    volume_ml: f64,
    inclusion_center: Vec3,
    inclusion_aspect: Vec3,
    inclusion_sigma: f64,
    current_a: f64,
    lambda: Option<f64>,
    p: f64,
) -> Result<Vec<LayoutResponse>> {
    if layouts.is_empty() {
        return Err(Error::param("need at least one layout to sweep"));
    }
    let inclusion =
        volume_to_ellipsoid(volume_ml, inclusion_aspect, inclusion_center, inclusion_sigma)?;
    let full_mesh = apply_inclusion(base_mesh, &inclusion)?;
    let mut out = Vec::with_capacity(layouts.len());
    for layout in layouts {
        let electrodes = crate::electrodes::place_grid(base_mesh, layout)?;
        let plan = strategy.build(layout)?;
        let v_empty = solve_forward(base_mesh, &electrodes, &plan, current_a)?;
        let v_full = solve_forward(&full_mesh, &electrodes, &plan, current_a)?;
        let delta: Vec<f64> = v_full
            .values()
            .iter()
            .zip(v_empty.values())
            .map(|(f, e)| (f - e) / current_a)
            .collect();
        let j = jacobian(base_mesh, &electrodes, &plan)?;
        let field = reconstruct(&j, &FrameVector::new(delta)?, lambda, p)?;
        let zero_signal = field.values().iter().all(|&v| v == 0.0);
        let (ratio, degenerate) = if zero_signal {
            (f64::INFINITY, true)
        } else {
            // Score against the region the inclusion actually occupies; a
            // zero-volume inclusion has no region and is degenerate above.
            let r = roi_response_ratio(&field, base_mesh, &inclusion)?;
            (r, !r.is_finite())
        };
        out.push(LayoutResponse {
            layout: layout.clone(),
            ratio,
            degenerate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::default_plan;
    use crate::electrodes::place_grid;
    use crate::geometry::cylinder::generate_cylinder_mesh;

    fn small_scene() -> Scene {
        let mesh = generate_cylinder_mesh(120.0, 280.0, 4000)
            .unwrap()
            .with_uniform_conductivity(0.3)
            .unwrap();
        let layout = GridLayout::new(3, 3, 60.0)
            .unwrap()
            .with_origin([120.0, 0.0, 140.0])
            .with_orientation([0.0, 1.0, 0.0]);
        let electrodes = place_grid(&mesh, &layout).unwrap();
        let plan = default_plan(&layout).unwrap();
        Scene {
            mesh,
            electrodes,
            plan,
            inclusion_center: [55.0, 0.0, 140.0],
            inclusion_aspect: [1.0, 1.0, 1.0],
            inclusion_sigma: 1.8,
            current_a: 0.001,
            noise_sd_v: 0.0,
        }
    }

    #[test]
    fn degree_zero_trial_is_the_identity() {
        let scene = small_scene();
        let spec = PerturbationSpec::new(0, 5);
        let (mesh, set) = perturb_trial_seeded(&scene.mesh, &scene.electrodes, &spec).unwrap();
        assert_eq!(mesh.conductivity(), scene.mesh.conductivity());
        assert_eq!(set.nodes(), scene.electrodes.nodes());
    }

    #[test]
    fn full_degree_trial_touches_every_electrode_patch() {
        let scene = small_scene();
        let spec = PerturbationSpec::new(9, 11);
        let (mesh, set) = perturb_trial_seeded(&scene.mesh, &scene.electrodes, &spec).unwrap();
        // Contact damage applies around every relocated electrode: each one
        // must have at least one nearby element with reduced conductivity.
        let radius = set.contact_radius_mm();
        let stride = scene.mesh.dim().nodes_per_element();
        for i in 0..set.len() {
            let center = mesh.node(set.node(i));
            let mut touched = 0;
            for e in 0..mesh.element_count() {
                let near = (0..stride).any(|k| {
                    crate::vec3::distance(mesh.node(mesh.element(e)[k]), center) <= radius
                });
                if near && mesh.conductivity()[e] < scene.mesh.conductivity()[e] {
                    touched += 1;
                }
            }
            assert!(touched > 0, "electrode {i} has an undamaged contact patch");
        }
    }

    #[test]
    fn trials_are_deterministic_per_seed() {
        let scene = small_scene();
        let spec = PerturbationSpec::new(4, 77);
        let (m1, s1) = perturb_trial_seeded(&scene.mesh, &scene.electrodes, &spec).unwrap();
        let (m2, s2) = perturb_trial_seeded(&scene.mesh, &scene.electrodes, &spec).unwrap();
        assert_eq!(m1.conductivity(), m2.conductivity());
        assert_eq!(s1.nodes(), s2.nodes());
        let other = PerturbationSpec::new(4, 78);
        let (m3, s3) = perturb_trial_seeded(&scene.mesh, &scene.electrodes, &other).unwrap();
        assert!(
            m1.conductivity() != m3.conductivity() || s1.nodes() != s3.nodes(),
            "different seeds produced identical trials"
        );
    }

    #[test]
    fn spec_validation_rejects_bad_inputs() {
        let scene = small_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let too_many = PerturbationSpec::new(10, 0);
        assert!(perturb_trial(&scene.mesh, &scene.electrodes, &too_many, &mut rng).is_err());
        let bad_factor = PerturbationSpec {
            impedance_factor_range: (0.5, 2.0),
            ..PerturbationSpec::new(1, 0)
        };
        assert!(perturb_trial(&scene.mesh, &scene.electrodes, &bad_factor, &mut rng).is_err());
        let bad_range = PerturbationSpec {
            displacement_range_mm: (10.0, 5.0),
            ..PerturbationSpec::new(1, 0)
        };
        assert!(perturb_trial(&scene.mesh, &scene.electrodes, &bad_range, &mut rng).is_err());
    }

    #[test]
    fn dataset_has_the_declared_shape_and_order() {
        let scene = small_scene();
        let mut protocol = DatasetProtocol::new(vec![0.0, 100.0], vec![0, 2], 42);
        protocol.trials_per_cell = 2;
        let ds = generate_dataset(&scene, &protocol).unwrap();
        assert_eq!(ds.len(), 2 * 2 * 2);
        assert_eq!(ds.channels(), scene.plan.len());
        assert_eq!(ds.volumes(), vec![0.0, 100.0]);
        assert_eq!(ds.k_levels(), vec![0, 2]);
        // Ordered by (volume, k, trial).
        let key: Vec<(f64, usize, usize)> =
            ds.rows().iter().map(|r| (r.label_ml, r.k, r.trial)).collect();
        let mut sorted = key.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(key, sorted);
        // Per-trial seeds are all distinct.
        let mut seeds: Vec<u64> = ds.rows().iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), ds.len());
    }

    #[test]
    fn unperturbed_empty_rows_are_exactly_zero() {
        let scene = small_scene();
        let mut protocol = DatasetProtocol::new(vec![0.0], vec![0], 1);
        protocol.trials_per_cell = 2;
        let ds = generate_dataset(&scene, &protocol).unwrap();
        for row in ds.rows() {
            assert!(
                row.features.iter().all(|&v| v == 0.0),
                "baseline minus itself must vanish"
            );
        }
    }

    #[test]
    fn dataset_generation_is_reproducible() {
        let scene = small_scene();
        let mut protocol = DatasetProtocol::new(vec![100.0], vec![1], 9);
        protocol.trials_per_cell = 2;
        let a = generate_dataset(&scene, &protocol).unwrap();
        let b = generate_dataset(&scene, &protocol).unwrap();
        assert_eq!(a, b);
        protocol.master_seed = 10;
        let c = generate_dataset(&scene, &protocol).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn k_zero_rows_vary_only_by_noise() {
        let mut scene = small_scene();
        scene.noise_sd_v = 1e-6;
        let mut protocol = DatasetProtocol::new(vec![100.0], vec![0], 3);
        protocol.trials_per_cell = 3;
        let ds = generate_dataset(&scene, &protocol).unwrap();
        let rows = ds.rows();
        for pair in rows.windows(2) {
            let max_gap = pair[0]
                .features
                .iter()
                .zip(&pair[1].features)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_gap > 0.0, "noise must differ across trials");
            assert!(max_gap < 1e-5, "k=0 rows should differ only by noise");
        }
    }

    #[test]
    fn layout_sweep_flags_zero_volume_as_degenerate() {
        let scene = small_scene();
        let layouts = vec![GridLayout::new(3, 3, 60.0)
            .unwrap()
            .with_origin([120.0, 0.0, 140.0])
            .with_orientation([0.0, 1.0, 0.0])];
        let table = layout_sweep(
            &scene.mesh,
            &layouts,
            PlanStrategy::RectanglesAndDiagonals,
            0.0,
            scene.inclusion_center,
            scene.inclusion_aspect,
            scene.inclusion_sigma,
            scene.current_a,
            None,
            0.5,
        )
        .unwrap();
        assert_eq!(table.len(), 1);
        assert!(table[0].degenerate);
    }

    #[test]
    fn layout_sweep_scores_a_real_volume() {
        let scene = small_scene();
        let layouts = vec![GridLayout::new(3, 3, 60.0)
            .unwrap()
            .with_origin([120.0, 0.0, 140.0])
            .with_orientation([0.0, 1.0, 0.0])];
        let table = layout_sweep(
            &scene.mesh,
            &layouts,
            PlanStrategy::RectanglesAndDiagonals,
            100.0,
            scene.inclusion_center,
            scene.inclusion_aspect,
            scene.inclusion_sigma,
            scene.current_a,
            None,
            0.5,
        )
        .unwrap();
        assert!(!table[0].degenerate);
        assert!(
            table[0].ratio > 1.0,
            "response should concentrate in the inclusion, got {}",
            table[0].ratio
        );
    }
}
