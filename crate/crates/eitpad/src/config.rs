//! Experiment configuration: one versioned JSON document drives every CLI
//! subcommand.
//!
//! Unknown keys are rejected (typos should fail loudly, not silently fall
//! back to defaults), the seed is mandatory (nothing in the toolkit is
//! allowed to seed itself from the clock), and every other field has a
//! default so a minimal config is just `{"version": 1, "seed": 7}`.
//! Serializing a parsed config writes the *effective* configuration — all
//! defaults materialized — which the CLI drops next to its outputs so a run
//! can be reproduced from the artifact directory alone.

use crate::channels::PlanStrategy;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

/// Root document. See the field types for the individual knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    /// Master seed. Every random draw in a run derives from it.
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub layout: LayoutConfig,
    /// Channel plan construction: `rectangles`, `diagonals`,
    /// `rectangles+diagonals`, or `all`.
    #[serde(default = "default_strategy")]
    pub channel_strategy: String,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub classification: ClassificationConfig,
    /// Cases for the layout sweep, in output order.
    #[serde(default = "default_layout_sweep")]
    pub layout_sweep: Vec<LayoutCase>,
    /// Where subcommands write their outputs; `--out` overrides.
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_strategy() -> String {
    PlanStrategy::RectanglesAndDiagonals.name().to_string()
}

/// Mesh to simulate on: a generator, or a file in the plain-text format
/// `geometry::io` reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    Cylinder {
        radius_mm: f64,
        height_mm: f64,
        target_elements: usize,
    },
    Disc {
        radius_mm: f64,
        target_elements: usize,
    },
    File {
        path: String,
    },
}

impl Default for MeshSource {
    fn default() -> Self {
        MeshSource::Cylinder {
            radius_mm: 120.0,
            height_mm: 280.0,
            target_elements: 12_000,
        }
    }
}

/// The simulated body and fluid pocket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub mesh: MeshSource,
    /// Background (tissue-like) conductivity, S/m.
    pub background_s_m: f64,
    /// Fluid conductivity painted inside the inclusion, S/m.
    pub fluid_s_m: f64,
    /// Centre of the fluid pocket, mm, in mesh coordinates.
    pub center_mm: [f64; 3],
    /// Relative semi-axis proportions of the pocket (scaled to volume).
    pub aspect: [f64; 3],
    /// Fluid volume for single-shot commands (`simulate`), mL.
    pub volume_ml: f64,
    /// Drive current, amperes.
    pub current_a: f64,
    /// Additive Gaussian measurement noise SD, volts. Zero disables.
    pub noise_sd_v: f64,
    /// Frame rate stamped onto emitted series, Hz.
    pub rate_hz: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            mesh: MeshSource::default(),
            // Agar-phantom soft-tissue value; 1.4 S/m is the dilute end of
            // the reported urine range.
            background_s_m: 0.2,
            fluid_s_m: 1.4,
            // Off-axis in y: a hand-placed pad rarely sits dead centre over
            // the pocket, and the lateral offset also keeps channels that
            // straddle the pad's midline from cancelling by symmetry.
            center_mm: [55.0, 45.0, 140.0],
            aspect: [1.0, 1.0, 1.0],
            volume_ml: 100.0,
            current_a: 1e-3,
            noise_sd_v: 0.0,
            rate_hz: 3.0,
        }
    }
}

/// Electrode pad placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    /// Point whose nearest surface location anchors the pad centre.
    /// Omitted: on the +x wall, centred laterally, at the pocket's height.
    pub origin_mm: Option<[f64; 3]>,
    /// In-plane direction the grid's columns advance along.
    pub orientation: [f64; 3],
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            rows: 3,
            cols: 3,
            spacing_mm: 60.0,
            origin_mm: None,
            orientation: [0.0, 1.0, 0.0],
        }
    }
}

/// One row of the layout sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutCase {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
}

impl LayoutCase {
    /// Stable row label, e.g. `3x4@60mm`.
    pub fn label(&self) -> String {
        format!("{}x{}@{}mm", self.rows, self.cols, self.spacing_mm)
    }
}

fn default_layout_sweep() -> Vec<LayoutCase> {
    let case = |rows, cols, spacing_mm| LayoutCase {
        rows,
        cols,
        spacing_mm,
    };
    vec![
        // Grid-size family at fixed 60 mm pitch...
        case(2, 4, 60.0),
        case(3, 3, 60.0),
        case(3, 4, 60.0),
        case(4, 4, 60.0),
        // ...then pitch family on the 3x3 pad.
        case(3, 3, 30.0),
        case(3, 3, 45.0),
        case(3, 3, 60.0),
    ]
}

/// Difference-imaging parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionConfig {
    /// Tikhonov weight; `null` picks the Jacobian-scaled default.
    pub lambda: Option<f64>,
    /// Sensitivity-normalization exponent in [0, 1].
    pub p: f64,
    /// Cells along the longer extent of the slice raster.
    pub slice_resolution: usize,
    /// Slice height, mm; `null` slices at the pocket centre.
    pub slice_height_mm: Option<f64>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            lambda: None,
            p: 0.5,
            slice_resolution: 64,
            slice_height_mm: None,
        }
    }
}

/// Electrode-robustness sweep protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// Perturbation degrees k (number of electrodes disturbed per trial).
    pub degrees: Vec<usize>,
    pub trials_per_cell: usize,
    /// Contact-impedance multiplier range (conductivity divided by it).
    pub impedance_factor_range: [f64; 2],
    /// Electrode relocation distance range, mm.
    pub displacement_range_mm: [f64; 2],
    /// Fluid volumes swept, mL.
    pub volumes_ml: Vec<f64>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            degrees: (0..=9).collect(),
            trials_per_cell: 16,
            impedance_factor_range: [2.0, 5.0],
            displacement_range_mm: [5.0, 20.0],
            volumes_ml: vec![0.0, 100.0, 200.0, 300.0, 400.0],
        }
    }
}

/// Volume classification and fullness detection settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassificationConfig {
    /// Class divisions evaluated by leave-one-degree-out accuracy.
    pub divisions: Vec<Vec<f64>>,
    /// Binary task: volumes at or below this are "empty", mL.
    pub binary_low_ml: f64,
    /// Volumes at or above this are "full", mL.
    pub binary_high_ml: f64,
    /// Binary task only uses rows with degree <= this.
    pub binary_max_degree: usize,
    /// L2 penalty on classifier weights.
    pub l2: f64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            divisions: vec![
                vec![0.0, 200.0, 400.0],
                vec![0.0, 100.0, 200.0, 300.0, 400.0],
            ],
            binary_low_ml: 0.0,
            binary_high_ml: 400.0,
            binary_max_degree: 3,
            l2: crate::analysis::DEFAULT_L2,
        }
    }
}

impl ExperimentConfig {
    /// All-defaults config under the given master seed.
    pub fn with_seed(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed,
            domain: DomainConfig::default(),
            layout: LayoutConfig::default(),
            channel_strategy: default_strategy(),
            reconstruction: ReconstructionConfig::default(),
            perturbation: PerturbationConfig::default(),
            classification: ClassificationConfig::default(),
            layout_sweep: default_layout_sweep(),
            output_dir: None,
        }
    }

    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read and validate a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        ExperimentConfig::from_json(&text)
    }

    /// The effective configuration as pretty JSON (defaults materialized,
    /// trailing newline). Parsing it back yields an equal config.
    pub fn to_json(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(self).expect("config serialization cannot fail");
        out.push('\n');
        out
    }

    /// The channel strategy named by the config.
    pub fn strategy(&self) -> Result<PlanStrategy> {
        PlanStrategy::from_name(&self.channel_strategy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} not supported (this build reads version {CONFIG_VERSION})",
                self.version
            )));
        }
        self.strategy()?;
        self.domain.validate()?;
        self.layout.validate()?;
        self.reconstruction.validate()?;
        self.perturbation
            .validate(self.layout.rows * self.layout.cols)?;
        self.classification.validate(&self.perturbation)?;
        if self.layout_sweep.is_empty() {
            return Err(Error::Config("layout_sweep must list at least one case".into()));
        }
        for case in &self.layout_sweep {
            if case.rows < 2 || case.cols < 2 {
                return Err(Error::Config(format!(
                    "layout sweep case {} needs at least 2 rows and 2 columns",
                    case.label()
                )));
            }
            ensure_positive(case.spacing_mm, "layout sweep spacing_mm")?;
        }
        Ok(())
    }
}

fn ensure_positive(value: f64, what: &str) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Config(format!(
            "{what} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

fn ensure_non_negative(value: f64, what: &str) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::Config(format!(
            "{what} must be non-negative and finite, got {value}"
        )));
    }
    Ok(())
}

impl DomainConfig {
    fn validate(&self) -> Result<()> {
        match &self.mesh {
            MeshSource::Cylinder {
                radius_mm,
                height_mm,
                target_elements,
            } => {
                ensure_positive(*radius_mm, "cylinder radius_mm")?;
                ensure_positive(*height_mm, "cylinder height_mm")?;
                if *target_elements == 0 {
                    return Err(Error::Config("cylinder target_elements must be > 0".into()));
                }
            }
            MeshSource::Disc {
                radius_mm,
                target_elements,
            } => {
                ensure_positive(*radius_mm, "disc radius_mm")?;
                if *target_elements == 0 {
                    return Err(Error::Config("disc target_elements must be > 0".into()));
                }
            }
            MeshSource::File { path } => {
                if path.is_empty() {
                    return Err(Error::Config("mesh file path is empty".into()));
                }
            }
        }
        ensure_positive(self.background_s_m, "background_s_m")?;
        ensure_positive(self.fluid_s_m, "fluid_s_m")?;
        for (axis, v) in ["x", "y", "z"].iter().zip(self.aspect) {
            ensure_positive(v, &format!("aspect.{axis}"))?;
        }
        if !self.center_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("center_mm must be finite".into()));
        }
        ensure_non_negative(self.volume_ml, "volume_ml")?;
        ensure_positive(self.current_a, "current_a")?;
        ensure_non_negative(self.noise_sd_v, "noise_sd_v")?;
        ensure_positive(self.rate_hz, "rate_hz")?;
        Ok(())
    }
}

impl LayoutConfig {
    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("layout needs at least one row and column".into()));
        }
        if self.rows * self.cols < 4 {
            return Err(Error::Config(
                "four-pole channels need at least 4 electrodes in the layout".into(),
            ));
        }
        ensure_positive(self.spacing_mm, "layout spacing_mm")?;
        if let Some(origin) = self.origin_mm {
            if !origin.iter().all(|v| v.is_finite()) {
                return Err(Error::Config("layout origin_mm must be finite".into()));
            }
        }
        let norm2: f64 = self.orientation.iter().map(|v| v * v).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::Config("layout orientation must be a nonzero vector".into()));
        }
        Ok(())
    }
}

impl ReconstructionConfig {
    fn validate(&self) -> Result<()> {
        if let Some(lambda) = self.lambda {
            ensure_positive(lambda, "reconstruction lambda")?;
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "reconstruction p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.slice_resolution < 2 {
            return Err(Error::Config("slice_resolution must be at least 2".into()));
        }
        if let Some(h) = self.slice_height_mm {
            if !h.is_finite() {
                return Err(Error::Config("slice_height_mm must be finite".into()));
            }
        }
        Ok(())
    }
}

impl PerturbationConfig {
    fn validate(&self, electrode_count: usize) -> Result<()> {
        if self.degrees.is_empty() {
            return Err(Error::Config("perturbation degrees list is empty".into()));
        }
        if let Some(&bad) = self.degrees.iter().find(|&&k| k > electrode_count) {
            return Err(Error::Config(format!(
                "perturbation degree {bad} exceeds the {electrode_count}-electrode layout"
            )));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::Config("trials_per_cell must be >= 1".into()));
        }
        let [lo, hi] = self.impedance_factor_range;
        if !(lo >= 1.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::Config(format!(
                "impedance_factor_range must satisfy 1 <= low <= high, got [{lo}, {hi}]"
            )));
        }
        let [dlo, dhi] = self.displacement_range_mm;
        if !(dlo >= 0.0) || !(dhi >= dlo) || !dhi.is_finite() {
            return Err(Error::Config(format!(
                "displacement_range_mm must satisfy 0 <= low <= high, got [{dlo}, {dhi}]"
            )));
        }
        if self.volumes_ml.is_empty() {
            return Err(Error::Config("perturbation volumes_ml is empty".into()));
        }
        for &v in &self.volumes_ml {
            ensure_non_negative(v, "perturbation volume")?;
        }
        Ok(())
    }
}

impl ClassificationConfig {
    fn validate(&self, perturbation: &PerturbationConfig) -> Result<()> {
        if self.divisions.is_empty() {
            return Err(Error::Config("classification divisions list is empty".into()));
        }
        for division in &self.divisions {
            let mut sorted = division.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() < 2 {
                return Err(Error::Config(
                    "each class division needs at least two distinct volumes".into(),
                ));
            }
            for v in division {
                if !perturbation.volumes_ml.contains(v) {
                    return Err(Error::Config(format!(
                        "division volume {v} mL is not in perturbation.volumes_ml"
                    )));
                }
            }
        }
        if !(self.binary_low_ml < self.binary_high_ml) {
            return Err(Error::Config(format!(
                "binary_low_ml ({}) must be below binary_high_ml ({})",
                self.binary_low_ml, self.binary_high_ml
            )));
        }
        ensure_non_negative(self.l2, "classification l2")?;
        Ok(())
    }
}
