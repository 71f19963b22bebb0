use std::path::Path;

use hoaseg::labels::{fuse_labels, parse_landmarks, validate_landmarks, LandmarkSet};
use hoaseg::metrics::{default_boundary_specs, default_line_specs, evaluate_pair};
use hoaseg::refine::{refine_with_report, RefinementConfig, RefineReport};
use hoaseg::volume::{read_label_volume, read_volume_typed, write_volume, write_volume_as, AnyVolume, Datatype, LabelVolume};

use crate::manifest::RunManifest;
use crate::{Exit, RuleArgs};

/// Label volume plus the element type it was stored with.
pub fn read_labels(path: &Path) -> anyhow::Result<(LabelVolume, Option<Datatype>)> {
    match read_volume_typed(path)? {
        (AnyVolume::Label(v), dt) => Ok((v, Some(dt))),
        (AnyVolume::Scalar(_), _) => Ok((read_label_volume(path)?, None)),
    }
}

/// Write labels in the input's element type when it can hold them.
pub fn write_labels(vol: &LabelVolume, datatype: Option<Datatype>, path: &Path) -> anyhow::Result<()> {
    match datatype {
        Some(dt) if dt != Datatype::Float32 => write_volume_as(vol, dt, path)?,
        _ => write_volume(vol, path)?,
    }
    Ok(())
}

pub fn load_landmarks(path: &Path, vol: &LabelVolume) -> anyhow::Result<LandmarkSet> {
    let lm = parse_landmarks(path)?;
    for v in validate_landmarks(&lm, vol) {
        log::warn!("{}: {v}", path.display());
    }
    Ok(lm)
}

pub fn fuse(input: &Path, output: &Path) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("fuse");
    manifest.input(input)?;
    let (vol, dt) = read_labels(input)?;
    let fused = fuse_labels(&vol)?;
    write_labels(&fused, dt, output)?;
    manifest.output(output);
    manifest.finish(output)
}

/// Refine one subject; shared with batch runs.
pub fn refine_volume(
    input: &Path,
    landmarks: &Path,
    cfg: &RefinementConfig,
) -> anyhow::Result<(LabelVolume, Option<Datatype>, RefineReport)> {
    let (vol, dt) = read_labels(input)?;
    let lm = load_landmarks(landmarks, &vol)?;
    let (out, report) = refine_with_report(&vol, &lm, cfg)?;
    Ok((out, dt, report))
}

pub fn refine(input: &Path, landmarks: &Path, output: &Path, rules: &RuleArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("refine");
    let cfg = rules.resolve()?;
    manifest.input(input)?;
    manifest.input(landmarks)?;
    if let Some(c) = &rules.config {
        manifest.input(c)?;
    }
    manifest.config(&cfg);
    let (out, dt, report) = refine_volume(input, landmarks, &cfg)?;
    write_labels(&out, dt, output)?;
    manifest.details(&report);
    manifest.output(output);
    manifest.finish(output)
}

pub fn roundtrip(
    input: &Path,
    landmarks: &Path,
    threshold: f64,
    output: Option<&Path>,
    rules: &RuleArgs,
) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("roundtrip");
    let cfg = rules.resolve()?;
    manifest.input(input)?;
    manifest.input(landmarks)?;
    manifest.config(&cfg);
    let (gt, _) = read_labels(input)?;
    let lm = load_landmarks(landmarks, &gt)?;
    let fused = fuse_labels(&gt)?;
    let (refined, _) = refine_with_report(&fused, &lm, &cfg)?;
    let report = evaluate_pair("roundtrip", &refined, &gt, &lm, &default_boundary_specs(), &default_line_specs())?;
    let mean_dice = report.mean_dice();
    let mean_pasd = report.mean_pasd();
    match mean_pasd {
        Some(p) => println!("mean Dice {mean_dice:.6}  mean PASD {p:.6} mm"),
        None => println!("mean Dice {mean_dice:.6}  mean PASD undefined"),
    }
    if let Some(out) = output {
        std::fs::write(out, report.to_json_string()).map_err(|e| hoaseg::Error::io(out, e))?;
        manifest.details(&serde_json::json!({ "mean_dice": mean_dice, "mean_pasd": mean_pasd }));
        manifest.output(out);
        manifest.finish(out)?;
    }
    if mean_dice < threshold {
        return Err(Exit::validation(format!("mean Dice {mean_dice:.6} below threshold {threshold}")));
    }
    Ok(())
}
