//! Tabular and raster output: CSV emitters/parsers and the slice graymap.
//!
//! Everything here is byte-deterministic, which is a load-bearing property
//! (reruns must produce identical artifacts), so the formats are pinned
//! down hard rather than delegated:
//!
//! - CSV per RFC 4180: CRLF row terminators, `"`-quoting only where a field
//!   needs it. The parser also accepts bare LF.
//! - Floats are written with Rust's `{:?}`, the shortest string that parses
//!   back to the identical bit pattern, so CSV → parse → CSV is the
//!   identity on bytes. `.` is always the decimal separator; locales never
//!   enter the picture.
//! - Slice images are 8-bit binary PGM (`P5`), in-domain cells min-max
//!   scaled onto 1..=255 and out-of-domain cells pinned to 0.

use crate::analysis::{BinaryEval, LooReport, RocPoint};
use crate::channels::ChannelPlan;
use crate::error::{Error, Result};
use crate::frames::{FrameSeries, FrameVector};
use crate::inverse::{ReconstructionField, SliceRaster};
use crate::perturb::{DatasetRow, LabeledDataset, LayoutResponse};

/// Shortest lossless text form of a float (also used for CSV cells).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn quote_if_needed(field: &str) -> String {
    if field.contains(['"', ',', '\r', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn push_row<S: AsRef<str>>(out: &mut String, fields: impl IntoIterator<Item = S>) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&quote_if_needed(f.as_ref()));
        first = false;
    }
    out.push_str("\r\n");
}

/// Split one CSV record into fields (RFC 4180 quoting rules).
fn split_record(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    cur.push('"');
                }
                '"' => quoted = false,
                _ => cur.push(c),
            }
        } else {
            match c {
                '"' if cur.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
    }
    if quoted {
        return Err(Error::Parse(format!("line {lineno}: unterminated quote")));
    }
    fields.push(cur);
    Ok(fields)
}

/// Non-empty records of a CSV document, with 1-based line numbers.
fn records(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        out.push((i + 1, split_record(line, i + 1)?));
    }
    Ok(out)
}

fn parse_f64(s: &str, lineno: usize, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {lineno}: {what} '{s}' is not a number")))
}

fn parse_usize(s: &str, lineno: usize, what: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("line {lineno}: {what} '{s}' is not an integer")))
}

fn parse_u64(s: &str, lineno: usize, what: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("line {lineno}: {what} '{s}' is not an integer")))
}

fn channel_headers(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|i| format!("ch_{i}"))
}

/// Frame series → CSV with a leading `t_s` timestamp column.
pub fn write_frames_csv(series: &FrameSeries) -> String {
    let mut out = String::new();
    let header = std::iter::once("t_s".to_string()).chain(channel_headers(series.width()));
    push_row(&mut out, header);
    for (t, frame) in series.timestamps().iter().zip(series.frames()) {
        let row = std::iter::once(fmt_f64(*t)).chain(frame.values().iter().map(|v| fmt_f64(*v)));
        push_row(&mut out, row);
    }
    out
}

/// Parse a frames CSV. The rate is recovered from the timestamp span when
/// the file has two or more frames; a single-frame file falls back to
/// `fallback_rate_hz`.
pub fn read_frames_csv(text: &str, fallback_rate_hz: f64) -> Result<FrameSeries> {
    let records = records(text)?;
    let mut iter = records.into_iter();
    let (hline, header) = iter
        .next()
        .ok_or_else(|| Error::Parse("frames CSV is empty".into()))?;
    if header.first().map(String::as_str) != Some("t_s") {
        return Err(Error::Parse(format!(
            "line {hline}: expected header starting with 't_s'"
        )));
    }
    let width = header.len() - 1;
    if width == 0 {
        return Err(Error::Parse(format!("line {hline}: no channel columns")));
    }
    let mut timestamps = Vec::new();
    let mut frames = Vec::new();
    for (lineno, rec) in iter {
        if rec.len() != width + 1 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {} fields, got {}",
                width + 1,
                rec.len()
            )));
        }
        timestamps.push(parse_f64(&rec[0], lineno, "timestamp")?);
        let values = rec[1..]
            .iter()
            .map(|s| parse_f64(s, lineno, "sample"))
            .collect::<Result<Vec<f64>>>()?;
        frames.push(FrameVector::new(values)?);
    }
    if frames.is_empty() {
        return Err(Error::Parse("frames CSV holds no data rows".into()));
    }
    let rate = if frames.len() >= 2 {
        let span = timestamps[timestamps.len() - 1] - timestamps[0];
        if !(span > 0.0) {
            return Err(Error::Parse(
                "frame timestamps must be strictly increasing".into(),
            ));
        }
        (frames.len() - 1) as f64 / span
    } else {
        fallback_rate_hz
    };
    FrameSeries::new(frames, rate)
}

/// Per-channel empty/full voltages and their difference, with the channel's
/// electrode assignment for provenance.
pub fn write_channels_csv(plan: &ChannelPlan, empty: &FrameVector, full: &FrameVector) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        [
            "channel", "inject_a", "inject_b", "sense_a", "sense_b", "empty_v", "full_v",
            "delta_v",
        ],
    );
    for (i, ch) in plan.channels().iter().enumerate() {
        let e = empty.get(i);
        let f = full.get(i);
        push_row(
            &mut out,
            [
                i.to_string(),
                ch.inject.0.to_string(),
                ch.inject.1.to_string(),
                ch.sense.0.to_string(),
                ch.sense.1.to_string(),
                fmt_f64(e),
                fmt_f64(f),
                fmt_f64(f - e),
            ],
        );
    }
    out
}

/// Reconstructed per-element values; `floored` marks elements whose
/// sensitivity normalization hit the numerical floor.
pub fn write_field_csv(field: &ReconstructionField) -> String {
    let mut out = String::new();
    push_row(&mut out, ["element", "value", "floored"]);
    for (e, v) in field.values().iter().enumerate() {
        let floored = field.floored_elements().binary_search(&e).is_ok();
        push_row(
            &mut out,
            [
                e.to_string(),
                fmt_f64(*v),
                (if floored { "1" } else { "0" }).to_string(),
            ],
        );
    }
    out
}

/// Slice raster in long form: one row per cell with its centre coordinates.
pub fn write_raster_csv(raster: &SliceRaster) -> String {
    let mut out = String::new();
    push_row(&mut out, ["ix", "iy", "x_mm", "y_mm", "inside", "value"]);
    for iy in 0..raster.ny() {
        for ix in 0..raster.nx() {
            let [x, y] = raster.cell_center(ix, iy);
            push_row(
                &mut out,
                [
                    ix.to_string(),
                    iy.to_string(),
                    fmt_f64(x),
                    fmt_f64(y),
                    (if raster.in_domain(ix, iy) { "1" } else { "0" }).to_string(),
                    fmt_f64(raster.value(ix, iy)),
                ],
            );
        }
    }
    out
}

/// Labeled feature rows → CSV (`ch_0..ch_{n-1},label_ml,k,trial,seed`).
pub fn write_dataset_csv(dataset: &LabeledDataset) -> String {
    let mut out = String::new();
    let header = channel_headers(dataset.channels()).chain(
        ["label_ml", "k", "trial", "seed"]
            .into_iter()
            .map(str::to_string),
    );
    push_row(&mut out, header);
    for row in dataset.rows() {
        let fields = row.features.iter().map(|v| fmt_f64(*v)).chain([
            fmt_f64(row.label_ml),
            row.k.to_string(),
            row.trial.to_string(),
            row.seed.to_string(),
        ]);
        push_row(&mut out, fields);
    }
    out
}

/// Parse a dataset CSV written by [`write_dataset_csv`].
pub fn read_dataset_csv(text: &str) -> Result<LabeledDataset> {
    let records = records(text)?;
    let mut iter = records.into_iter();
    let (hline, header) = iter
        .next()
        .ok_or_else(|| Error::Parse("dataset CSV is empty".into()))?;
    if header.len() < 5 || header[header.len() - 4..] != ["label_ml", "k", "trial", "seed"] {
        return Err(Error::Parse(format!(
            "line {hline}: expected ch_* columns followed by label_ml,k,trial,seed"
        )));
    }
    let channels = header.len() - 4;
    let mut rows = Vec::new();
    for (lineno, rec) in iter {
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {} fields, got {}",
                header.len(),
                rec.len()
            )));
        }
        let features = rec[..channels]
            .iter()
            .map(|s| parse_f64(s, lineno, "feature"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(DatasetRow {
            features,
            label_ml: parse_f64(&rec[channels], lineno, "label_ml")?,
            k: parse_usize(&rec[channels + 1], lineno, "k")?,
            trial: parse_usize(&rec[channels + 2], lineno, "trial")?,
            seed: parse_u64(&rec[channels + 3], lineno, "seed")?,
        });
    }
    LabeledDataset::new(channels, rows)
}

/// Stable text label for a class division, e.g. `0-200-400`.
pub fn division_label(division: &[f64]) -> String {
    division
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join("-")
}

/// Leave-one-degree-out accuracy tables, one row per (division, degree).
pub fn write_accuracy_csv(reports: &[(String, LooReport)]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["division", "degree", "n_train", "n_test", "accuracy"],
    );
    for (label, report) in reports {
        for g in &report.groups {
            push_row(
                &mut out,
                [
                    label.clone(),
                    g.group.to_string(),
                    g.n_train.to_string(),
                    g.n_test.to_string(),
                    fmt_f64(g.accuracy),
                ],
            );
        }
    }
    out
}

/// ROC curve → CSV. Thresholds at the ends are `inf`/`-inf`, which
/// `f64::from_str` round-trips.
pub fn write_roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::new();
    push_row(&mut out, ["threshold", "fpr", "tpr"]);
    for p in points {
        push_row(
            &mut out,
            [fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)],
        );
    }
    out
}

/// One-row summary of a binary fullness evaluation.
pub fn write_binary_eval_csv(eval: &BinaryEval, max_degree: usize) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["auc", "accuracy", "n_positive", "n_negative", "max_degree"],
    );
    push_row(
        &mut out,
        [
            fmt_f64(eval.auc),
            fmt_f64(eval.accuracy),
            eval.n_positive.to_string(),
            eval.n_negative.to_string(),
            max_degree.to_string(),
        ],
    );
    out
}

/// Layout sweep results, one row per case in input order.
pub fn write_layout_csv(responses: &[LayoutResponse]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["configuration", "rows", "cols", "spacing_mm", "ratio", "degenerate"],
    );
    for r in responses {
        let label = format!(
            "{}x{}@{}mm",
            r.layout.rows, r.layout.cols, r.layout.spacing_mm
        );
        push_row(
            &mut out,
            [
                label,
                r.layout.rows.to_string(),
                r.layout.cols.to_string(),
                fmt_f64(r.layout.spacing_mm),
                fmt_f64(r.ratio),
                (if r.degenerate { "1" } else { "0" }).to_string(),
            ],
        );
    }
    out
}

/// Similarity metrics table for `analyze compare`.
pub fn write_compare_csv(cosine: f64, pearson: f64) -> String {
    let mut out = String::new();
    push_row(&mut out, ["metric", "value"]);
    push_row(&mut out, ["cosine".to_string(), fmt_f64(cosine)]);
    push_row(&mut out, ["pearson".to_string(), fmt_f64(pearson)]);
    out
}

/// Normalized scalar curve for `analyze normalize`.
pub fn write_curve_csv(header: &str, values: &[f64]) -> String {
    let mut out = String::new();
    push_row(&mut out, ["index", header]);
    for (i, v) in values.iter().enumerate() {
        push_row(&mut out, [i.to_string(), fmt_f64(*v)]);
    }
    out
}

/// Render the slice as an 8-bit binary graymap (`P5`).
///
/// In-domain cells are min-max scaled onto 1..=255 (flat fields collapse to
/// mid-gray 128); cells outside the domain are 0, so the body outline is
/// visible in any viewer. Image rows run top-down (maximum y first), the
/// usual raster convention.
pub fn write_pgm(raster: &SliceRaster) -> Vec<u8> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for iy in 0..raster.ny() {
        for ix in 0..raster.nx() {
            if raster.in_domain(ix, iy) {
                lo = lo.min(raster.value(ix, iy));
                hi = hi.max(raster.value(ix, iy));
            }
        }
    }
    let mut bytes = format!("P5\n{} {}\n255\n", raster.nx(), raster.ny()).into_bytes();
    for iy in (0..raster.ny()).rev() {
        for ix in 0..raster.nx() {
            let px = if !raster.in_domain(ix, iy) {
                0u8
            } else if !(hi > lo) {
                128
            } else {
                let t = (raster.value(ix, iy) - lo) / (hi - lo);
                1 + (t * 254.0).round() as u8
            };
            bytes.push(px);
        }
    }
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Channel;
    use crate::inverse::slice_field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_end_with_crlf_and_quote_only_when_needed() {
        let mut out = String::new();
        push_row(&mut out, ["plain", "with,comma", "with\"quote"]);
        assert_eq!(out, "plain,\"with,comma\",\"with\"\"quote\"\r\n");
    }

    #[test]
    fn record_splitting_inverts_quoting() {
        let fields = ["a,b", "c\"d\"", "plain", ""];
        let mut out = String::new();
        push_row(&mut out, fields);
        let parsed = split_record(out.trim_end(), 1).unwrap();
        assert_eq!(parsed, fields);
    }

    #[test]
    fn frames_csv_round_trips_bytes_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<FrameVector> = (0..7)
            .map(|_| {
                FrameVector::new((0..4).map(|_| rng.random_range(-1e-3..1e-3)).collect())
                    .unwrap()
            })
            .collect();
        let series = FrameSeries::new(frames, 3.0).unwrap();
        let text = write_frames_csv(&series);
        let back = read_frames_csv(&text, 1.0).unwrap();
        assert_eq!(back.width(), 4);
        assert_eq!(back.len(), 7);
        for (a, b) in back.frames().iter().zip(series.frames()) {
            assert_eq!(a.values(), b.values(), "values must survive exactly");
        }
        // Writing the parsed series reproduces the file byte for byte.
        assert_eq!(write_frames_csv(&back), text);
    }

    #[test]
    fn single_frame_csv_uses_the_fallback_rate() {
        let series = FrameSeries::new(vec![FrameVector::new(vec![1.0, 2.0]).unwrap()], 3.0)
            .unwrap();
        let back = read_frames_csv(&write_frames_csv(&series), 7.5).unwrap();
        assert_eq!(back.rate_hz(), 7.5);
    }

    #[test]
    fn frames_csv_rejects_malformed_documents() {
        assert!(read_frames_csv("", 1.0).is_err());
        assert!(read_frames_csv("a,b\r\n1,2\r\n", 1.0).is_err(), "bad header");
        assert!(
            read_frames_csv("t_s,ch_0\r\n0.0,1.0\r\n0.5\r\n", 1.0).is_err(),
            "short row"
        );
        assert!(
            read_frames_csv("t_s,ch_0\r\n0.0,1.0\r\n0.0,2.0\r\n", 1.0).is_err(),
            "non-increasing timestamps"
        );
    }

    #[test]
    fn dataset_csv_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<DatasetRow> = (0..20)
            .map(|i| DatasetRow {
                features: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label_ml: [0.0, 200.0, 400.0][i % 3],
                k: i % 4,
                trial: i,
                seed: rng.random(),
            })
            .collect();
        let ds = LabeledDataset::new(6, rows).unwrap();
        let text = write_dataset_csv(&ds);
        let back = read_dataset_csv(&text).unwrap();
        assert_eq!(back.channels(), 6);
        assert_eq!(back.rows(), ds.rows());
        assert_eq!(write_dataset_csv(&back), text);
    }

    #[test]
    fn dataset_csv_header_is_checked() {
        assert!(read_dataset_csv("ch_0,label_ml,k,trial\r\n").is_err());
        assert!(read_dataset_csv("").is_err());
    }

    #[test]
    fn channels_csv_carries_the_electrode_assignment() {
        let plan = ChannelPlan::new(
            vec![Channel::new((0, 1), (2, 3)).unwrap()],
            4,
        )
        .unwrap();
        let empty = FrameVector::new(vec![2.0]).unwrap();
        let full = FrameVector::new(vec![2.5]).unwrap();
        let text = write_channels_csv(&plan, &empty, &full);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "channel,inject_a,inject_b,sense_a,sense_b,empty_v,full_v,delta_v"
        );
        assert_eq!(lines[1], "0,0,1,2,3,2.0,2.5,0.5");
    }

    #[test]
    fn division_labels_are_compact() {
        assert_eq!(division_label(&[0.0, 200.0, 400.0]), "0-200-400");
        assert_eq!(division_label(&[0.0, 100.5]), "0-100.5");
    }

    fn tiny_raster() -> SliceRaster {
        // A disc mesh gives a raster with both in- and out-of-domain cells.
        let mesh = crate::geometry::disc::generate_disc_mesh(50.0, 200).unwrap();
        let field = ReconstructionField::from_values(
            (0..mesh.element_count())
                .map(|e| mesh.centroid(e)[0] / 50.0)
                .collect(),
        );
        slice_field(&field, &mesh, 0.0, 16).unwrap()
    }

    #[test]
    fn pgm_has_correct_header_size_and_range() {
        let raster = tiny_raster();
        let bytes = write_pgm(&raster);
        let header = format!("P5\n{} {}\n255\n", raster.nx(), raster.ny());
        assert!(bytes.starts_with(header.as_bytes()));
        let pixels = &bytes[header.len()..];
        assert_eq!(pixels.len(), raster.nx() * raster.ny());
        // Corners of the bounding box lie outside the disc.
        assert_eq!(pixels[0], 0);
        let inside: Vec<u8> = pixels.iter().copied().filter(|&p| p != 0).collect();
        assert!(!inside.is_empty());
        assert!(inside.iter().any(|&p| p == 1), "min maps to 1");
        assert!(inside.iter().any(|&p| p == 255), "max maps to 255");
    }

    #[test]
    fn pgm_flat_field_collapses_to_mid_gray() {
        let mesh = crate::geometry::disc::generate_disc_mesh(50.0, 200).unwrap();
        let field = ReconstructionField::from_values(vec![0.0; mesh.element_count()]);
        let raster = slice_field(&field, &mesh, 0.0, 8).unwrap();
        let bytes = write_pgm(&raster);
        let header_len = format!("P5\n{} {}\n255\n", raster.nx(), raster.ny()).len();
        for &p in &bytes[header_len..] {
            assert!(p == 0 || p == 128);
        }
    }

    #[test]
    fn pgm_top_row_is_maximum_y() {
        let raster = tiny_raster();
        let bytes = write_pgm(&raster);
        let header_len = format!("P5\n{} {}\n255\n", raster.nx(), raster.ny()).len();
        let pixels = &bytes[header_len..];
        // The raster stores row 0 at minimum y; the image stores it last.
        for ix in 0..raster.nx() {
            let image_last_row = pixels[(raster.ny() - 1) * raster.nx() + ix];
            let expected = if raster.in_domain(ix, 0) { 1 } else { 0 };
            assert_eq!(image_last_row == 0, expected == 0);
        }
    }

    #[test]
    fn roc_csv_writes_infinite_thresholds_readably() {
        let points = vec![
            RocPoint {
                threshold: f64::NEG_INFINITY,
                fpr: 1.0,
                tpr: 1.0,
            },
            RocPoint {
                threshold: f64::INFINITY,
                fpr: 0.0,
                tpr: 0.0,
            },
        ];
        let text = write_roc_csv(&points);
        assert!(text.contains("-inf"));
        assert!("inf".parse::<f64>().unwrap().is_infinite());
    }

    #[test]
    fn float_formatting_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v: f64 = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-9..9));
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }
}
