use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use hoaseg::metrics::{default_boundary_specs, default_line_specs, evaluate_pair, MetricRecord};
use rayon::prelude::*;
use serde::Deserialize;

use crate::labels::{load_landmarks, read_labels, refine_volume, write_labels};
use crate::manifest::RunManifest;
use crate::report::write_records;
use crate::RuleArgs;

#[derive(Args, Debug)]
pub struct BatchArgs {
    /// Cohort CSV with columns subject,input,landmarks and optionally
    /// reference,reference_landmarks; relative paths resolve against the
    /// CSV's directory.
    pub cohort: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Subjects processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub rules: RuleArgs,
}

#[derive(Debug, Deserialize)]
struct CohortRow {
    subject: String,
    input: PathBuf,
    landmarks: PathBuf,
    #[serde(default)]
    reference: Option<PathBuf>,
    /// Landmarks for scoring against the reference; defaults to `landmarks`.
    #[serde(default)]
    reference_landmarks: Option<PathBuf>,
}

fn read_cohort(path: &Path) -> anyhow::Result<Vec<CohortRow>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let mut row: CohortRow = row.with_context(|| format!("parsing {}", path.display()))?;
        row.input = base.join(&row.input);
        row.landmarks = base.join(&row.landmarks);
        row.reference = row.reference.filter(|p| !p.as_os_str().is_empty()).map(|p| base.join(p));
        row.reference_landmarks = row
            .reference_landmarks
            .filter(|p| !p.as_os_str().is_empty())
            .map(|p| base.join(p));
        rows.push(row);
    }
    let mut names: Vec<&str> = rows.iter().map(|r| r.subject.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(crate::Exit::validation(format!("subject {} listed twice", w[0])));
    }
    Ok(rows)
}

fn process(row: &CohortRow, output_dir: &Path, rules: &RuleArgs) -> anyhow::Result<Vec<MetricRecord>> {
    let mut manifest = RunManifest::start("batch");
    let cfg = rules.resolve()?;
    manifest.input(&row.input)?;
    manifest.input(&row.landmarks)?;
    manifest.config(&cfg);
    let (refined, dt, report) = refine_volume(&row.input, &row.landmarks, &cfg)?;
    let output = output_dir.join(format!("{}.nii.gz", row.subject));
    write_labels(&refined, dt, &output)?;
    manifest.output(&output);
    let mut records = Vec::new();
    if let Some(reference) = &row.reference {
        manifest.input(reference)?;
        let lm_path = row.reference_landmarks.as_ref().unwrap_or(&row.landmarks);
        if row.reference_landmarks.is_some() {
            manifest.input(lm_path)?;
        }
        let (gt, _) = read_labels(reference)?;
        let lm = load_landmarks(lm_path, &gt)?;
        let metrics = evaluate_pair(
            &row.subject,
            &refined,
            &gt,
            &lm,
            &default_boundary_specs(),
            &default_line_specs(),
        )?;
        records = metrics.records();
        manifest.details(&serde_json::json!({ "refine": report, "mean_dice": metrics.mean_dice() }));
    } else {
        manifest.details(&report);
    }
    manifest.finish(&output)?;
    Ok(records)
}

pub fn run(args: &BatchArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("batch");
    manifest.input(&args.cohort)?;
    let cfg = args.rules.resolve()?;
    manifest.config(&serde_json::json!({ "rules": cfg, "jobs": args.jobs }));
    let rows = read_cohort(&args.cohort)?;
    std::fs::create_dir_all(&args.output_dir).map_err(|e| hoaseg::Error::io(&args.output_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let results: Vec<anyhow::Result<Vec<MetricRecord>>> = pool.install(|| {
        rows.par_iter()
            .map(|row| process(row, &args.output_dir, &args.rules).with_context(|| format!("subject {}", row.subject)))
            .collect()
    });
    let mut records = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rec) => records.extend(rec),
            Err(e) => {
                log::error!("{e:#}");
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let metrics = args.output_dir.join("metrics.csv");
    if !records.is_empty() {
        write_records(&records, &metrics)?;
        manifest.output(&metrics);
    }
    println!("processed {} subject(s)", rows.len());
    manifest.details(&serde_json::json!({ "subjects": rows.iter().map(|r| &r.subject).collect::<Vec<_>>() }));
    manifest.finish(&args.output_dir.join("cohort"))
}
