//! Experiment runner. Every subcommand is a pure function of the config
//! file (plus any input CSVs): same config + seed, same bytes out.

use clap::{Parser, Subcommand};
use eitpad::analysis;
use eitpad::config::{DomainConfig, ExperimentConfig, LayoutConfig, MeshSource};
use eitpad::electrodes::{place_grid, GridLayout};
use eitpad::error::{Error, Result};
use eitpad::forward::{jacobian, solve_forward};
use eitpad::frames::{FrameSeries, FrameVector};
use eitpad::geometry::{io::load_mesh, Mesh};
use eitpad::inverse::{reconstruct, roi_response_ratio, slice_field};
use eitpad::perturb::{generate_dataset, layout_sweep, DatasetProtocol, Scene};
use eitpad::report;
use eitpad::vec3::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "eitpad",
    version,
    about = "Planar-grid EIT simulation and analysis pipeline"
)]
struct Cli {
    /// Experiment config (JSON). Omitted: built-in defaults (needs --seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one empty/full pair, reconstruct the difference image, and
    /// slice it at the pocket height.
    Simulate,
    /// RoI response ratio for every pad geometry in the config.
    SweepLayout,
    /// Monte-Carlo electrode-perturbation dataset plus accuracy-vs-degree
    /// tables.
    SweepPerturbation,
    /// Signal conditioning on frame CSVs.
    Analyze {
        #[command(subcommand)]
        op: AnalyzeOp,
    },
    /// Classification tables for an existing dataset CSV.
    Classify {
        /// Dataset CSV; defaults to <out>/dataset.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnalyzeOp {
    /// Subtract the first frame from every frame.
    Baseline {
        #[arg(long)]
        input: PathBuf,
    },
    /// Average consecutive groups of frames.
    Group {
        #[arg(long)]
        input: PathBuf,
        /// Frames per group.
        #[arg(long, default_value_t = 3)]
        size: usize,
    },
    /// Divide each channel by its first-frame value.
    Normalize {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cosine and Pearson similarity between two frame files.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        other: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        // One machine-readable line; scripts can parse it as JSON.
        eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }

    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let seed = cli.seed.ok_or_else(|| {
                Error::Config("without --config a --seed is required".into())
            })?;
            ExperimentConfig::with_seed(seed)
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            Error::Config("no output directory: pass --out or set output_dir".into())
        })?;
    fs::create_dir_all(&out)?;
    // Bake the resolved run into the artifact directory: re-running from
    // this file reproduces every output.
    config.output_dir = Some(out.display().to_string());
    write_text(&out.join("config.json"), &config.to_json())?;

    match &cli.command {
        Command::Simulate => cmd_simulate(&config, &out),
        Command::SweepLayout => cmd_sweep_layout(&config, &out),
        Command::SweepPerturbation => cmd_sweep_perturbation(&config, &out),
        Command::Analyze { op } => cmd_analyze(&config, &out, op),
        Command::Classify { input } => {
            let input = input
                .clone()
                .unwrap_or_else(|| out.join("dataset.csv"));
            cmd_classify(&config, &out, &input)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn build_mesh(domain: &DomainConfig) -> Result<Mesh> {
    match &domain.mesh {
        MeshSource::Cylinder {
            radius_mm,
            height_mm,
            target_elements,
        } => eitpad::geometry::cylinder::generate_cylinder_mesh(
            *radius_mm,
            *height_mm,
            *target_elements,
        )?
        .with_uniform_conductivity(domain.background_s_m),
        MeshSource::Disc {
            radius_mm,
            target_elements,
        } => eitpad::geometry::disc::generate_disc_mesh(*radius_mm, *target_elements)?
            .with_uniform_conductivity(domain.background_s_m),
        // File meshes keep their stored (possibly heterogeneous)
        // conductivity map; background_s_m only seeds generated meshes.
        MeshSource::File { path } => load_mesh(path),
    }
}

/// Pad anchor: configured, or on the +x wall of the domain, centred
/// laterally, at the fluid pocket's height.
fn pad_origin(mesh: &Mesh, config: &ExperimentConfig) -> Vec3 {
    if let Some(origin) = config.layout.origin_mm {
        return origin;
    }
    let (lo, hi) = mesh.bounding_box();
    let center = config.domain.center_mm;
    [hi[0], (lo[1] + hi[1]) / 2.0, center[2]]
}

fn grid_layout(
    rows: usize,
    cols: usize,
    spacing_mm: f64,
    origin: Vec3,
    layout_config: &LayoutConfig,
) -> Result<GridLayout> {
    Ok(GridLayout::new(rows, cols, spacing_mm)?
        .with_origin(origin)
        .with_orientation(layout_config.orientation))
}

fn build_scene(config: &ExperimentConfig) -> Result<(Scene, GridLayout)> {
    let mesh = build_mesh(&config.domain)?;
    let origin = pad_origin(&mesh, config);
    let layout = grid_layout(
        config.layout.rows,
        config.layout.cols,
        config.layout.spacing_mm,
        origin,
        &config.layout,
    )?;
    let electrodes = place_grid(&mesh, &layout)?;
    let plan = config.strategy()?.build(&layout)?;
    let scene = Scene {
        mesh,
        electrodes,
        plan,
        inclusion_center: config.domain.center_mm,
        inclusion_aspect: config.domain.aspect,
        inclusion_sigma: config.domain.fluid_s_m,
        current_a: config.domain.current_a,
        noise_sd_v: config.domain.noise_sd_v,
    };
    Ok((scene, layout))
}

fn add_noise(frame: &FrameVector, sd: f64, rng: &mut ChaCha8Rng) -> Result<FrameVector> {
    if sd == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, sd).map_err(|e| Error::param(e.to_string()))?;
    FrameVector::new(
        frame
            .values()
            .iter()
            .map(|v| v + normal.sample(rng))
            .collect(),
    )
}

fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let (scene, _) = build_scene(config)?;
    let volume = config.domain.volume_ml;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v_empty = add_noise(&scene.baseline()?, scene.noise_sd_v, &mut rng)?;
    let full_mesh = scene.mesh_with_volume(volume)?;
    let v_full = add_noise(
        &solve_forward(&full_mesh, &scene.electrodes, &scene.plan, scene.current_a)?,
        scene.noise_sd_v,
        &mut rng,
    )?;
    write_text(
        &out.join("channels.csv"),
        &report::write_channels_csv(&scene.plan, &v_empty, &v_full),
    )?;

    // Difference imaging works on per-ampere voltage changes.
    let delta = FrameVector::new(
        v_full
            .values()
            .iter()
            .zip(v_empty.values())
            .map(|(f, e)| (f - e) / scene.current_a)
            .collect(),
    )?;
    let degenerate = delta.values().iter().all(|v| *v == 0.0);

    let j = jacobian(&scene.mesh, &scene.electrodes, &scene.plan)?;
    let field = reconstruct(
        &j,
        &delta,
        config.reconstruction.lambda,
        config.reconstruction.p,
    )?;
    write_text(&out.join("field.csv"), &report::write_field_csv(&field))?;

    let slice_height = config
        .reconstruction
        .slice_height_mm
        .unwrap_or(config.domain.center_mm[2]);
    let raster = slice_field(
        &field,
        &scene.mesh,
        slice_height,
        config.reconstruction.slice_resolution,
    )?;
    write_text(&out.join("slice.csv"), &report::write_raster_csv(&raster))?;
    write_bytes(&out.join("slice.pgm"), &report::write_pgm(&raster))?;

    let (peak_element, peak_value) = field.peak();
    let ratio = if volume > 0.0 && !degenerate {
        roi_response_ratio(&field, &scene.mesh, &scene.inclusion_for(volume)?)?
    } else {
        f64::NAN
    };
    let mut summary = String::new();
    summary.push_str("volume_ml,peak_element,peak_value,roi_ratio,degenerate\r\n");
    summary.push_str(&format!(
        "{},{},{},{},{}\r\n",
        report::fmt_f64(volume),
        peak_element,
        report::fmt_f64(peak_value),
        report::fmt_f64(ratio),
        u8::from(degenerate),
    ));
    write_text(&out.join("summary.csv"), &summary)?;

    println!(
        "volume {volume} mL: peak element {peak_element} ({}), RoI ratio {}, degenerate {degenerate}",
        report::fmt_f64(peak_value),
        report::fmt_f64(ratio),
    );
    Ok(())
}

fn cmd_sweep_layout(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let mesh = build_mesh(&config.domain)?;
    let origin = pad_origin(&mesh, config);
    let layouts = config
        .layout_sweep
        .iter()
        .map(|case| grid_layout(case.rows, case.cols, case.spacing_mm, origin, &config.layout))
        .collect::<Result<Vec<GridLayout>>>()?;
    let responses = layout_sweep(
        &mesh,
        &layouts,
        config.strategy()?,
        config.domain.volume_ml,
        config.domain.center_mm,
        config.domain.aspect,
        config.domain.fluid_s_m,
        config.domain.current_a,
        config.reconstruction.lambda,
        config.reconstruction.p,
    )?;
    write_text(&out.join("layouts.csv"), &report::write_layout_csv(&responses))?;
    for r in &responses {
        println!(
            "{}x{}@{}mm: RoI ratio {}{}",
            r.layout.rows,
            r.layout.cols,
            r.layout.spacing_mm,
            report::fmt_f64(r.ratio),
            if r.degenerate { " (degenerate)" } else { "" },
        );
    }
    Ok(())
}

fn cmd_sweep_perturbation(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let (scene, _) = build_scene(config)?;
    let protocol = DatasetProtocol {
        volumes_ml: config.perturbation.volumes_ml.clone(),
        k_levels: config.perturbation.degrees.clone(),
        trials_per_cell: config.perturbation.trials_per_cell,
        impedance_factor_range: (
            config.perturbation.impedance_factor_range[0],
            config.perturbation.impedance_factor_range[1],
        ),
        displacement_range_mm: (
            config.perturbation.displacement_range_mm[0],
            config.perturbation.displacement_range_mm[1],
        ),
        master_seed: config.seed,
    };
    let dataset = generate_dataset(&scene, &protocol)?;
    write_text(&out.join("dataset.csv"), &report::write_dataset_csv(&dataset))?;
    write_accuracy_tables(config, &dataset, out)
}

fn write_accuracy_tables(
    config: &ExperimentConfig,
    dataset: &eitpad::perturb::LabeledDataset,
    out: &Path,
) -> Result<()> {
    if dataset.k_levels().len() < 2 {
        println!("single perturbation degree: skipping leave-one-degree-out tables");
        return Ok(());
    }
    let l2 = config.classification.l2;
    let mut reports = Vec::new();
    for division in &config.classification.divisions {
        let label = report::division_label(division);
        let loo = analysis::evaluate_loo_with_l2(dataset, division, l2)?;
        println!(
            "division {label}: mean accuracy {}",
            report::fmt_f64(loo.mean_accuracy)
        );
        reports.push((label, loo));
    }
    write_text(&out.join("accuracy.csv"), &report::write_accuracy_csv(&reports))?;

    let low = config.classification.binary_low_ml;
    let high = config.classification.binary_high_ml;
    let max_degree = config.classification.binary_max_degree;
    let low_k = dataset.filtered(|r| r.k <= max_degree);
    if low_k.k_levels().len() >= 2 {
        let eval = analysis::binary_fullness_eval_with_l2(&low_k, low, high, l2)?;
        write_text(
            &out.join("binary.csv"),
            &report::write_binary_eval_csv(&eval, max_degree),
        )?;
        write_text(&out.join("roc.csv"), &report::write_roc_csv(&eval.roc))?;
        println!(
            "fullness detection (<= {low} mL vs >= {high} mL, degree <= {max_degree}): AUC {}, accuracy {}",
            report::fmt_f64(eval.auc),
            report::fmt_f64(eval.accuracy),
        );
    } else {
        println!("fewer than two degrees at or below {max_degree}: skipping binary tables");
    }
    Ok(())
}

fn cmd_classify(config: &ExperimentConfig, out: &Path, input: &Path) -> Result<()> {
    let text = fs::read_to_string(input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
    let dataset = report::read_dataset_csv(&text)?;
    println!(
        "dataset: {} rows, {} channels, degrees {:?}",
        dataset.len(),
        dataset.channels(),
        dataset.k_levels(),
    );
    write_accuracy_tables(config, &dataset, out)
}

fn read_frames(path: &Path, config: &ExperimentConfig) -> Result<FrameSeries> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    report::read_frames_csv(&text, config.domain.rate_hz)
}

fn cmd_analyze(config: &ExperimentConfig, out: &Path, op: &AnalyzeOp) -> Result<()> {
    match op {
        AnalyzeOp::Baseline { input } => {
            let series = read_frames(input, config)?;
            let result = analysis::baseline_subtract(&series);
            write_text(&out.join("baseline.csv"), &report::write_frames_csv(&result))
        }
        AnalyzeOp::Group { input, size } => {
            let series = read_frames(input, config)?;
            let result = analysis::group_average(&series, *size)?;
            write_text(&out.join("grouped.csv"), &report::write_frames_csv(&result))
        }
        AnalyzeOp::Normalize { input } => {
            let series = read_frames(input, config)?;
            let result = normalize_channels(&series)?;
            write_text(
                &out.join("normalized.csv"),
                &report::write_frames_csv(&result),
            )
        }
        AnalyzeOp::Compare { input, other } => {
            let a = flatten(&read_frames(input, config)?);
            let b = flatten(&read_frames(other, config)?);
            let cosine = analysis::cosine_similarity(&a, &b)?;
            let pearson = analysis::pearson(&a, &b)?;
            println!(
                "cosine {}, pearson {}",
                report::fmt_f64(cosine),
                report::fmt_f64(pearson)
            );
            write_text(&out.join("compare.csv"), &report::write_compare_csv(cosine, pearson))
        }
    }
}

/// Channel-wise amplitude normalization: each channel's trace divided by
/// its first-frame value.
fn normalize_channels(series: &FrameSeries) -> Result<FrameSeries> {
    let width = series.width();
    let mut columns = Vec::with_capacity(width);
    for ch in 0..width {
        let curve: Vec<f64> = series.frames().iter().map(|f| f.get(ch)).collect();
        columns.push(analysis::normalize_to_start(&curve).map_err(|e| {
            Error::Degenerate(format!("channel {ch}: {e}"))
        })?);
    }
    let frames = (0..series.len())
        .map(|i| FrameVector::new(columns.iter().map(|c| c[i]).collect()))
        .collect::<Result<Vec<FrameVector>>>()?;
    FrameSeries::new(frames, series.rate_hz())
}

fn flatten(series: &FrameSeries) -> Vec<f64> {
    series
        .frames()
        .iter()
        .flat_map(|f| f.values().iter().copied())
        .collect()
}
