use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::Context;
use hoaseg::metrics::{
    default_boundary_specs, default_line_specs, evaluate_pair, wilcoxon_fdr, Alternative, MetricRecord,
    MetricReport, PairedColumn, PairedSampleTable,
};
use serde::Serialize;

use crate::labels::{load_landmarks, read_labels};
use crate::manifest::RunManifest;
use crate::{AlternativeArg, Exit, Format};

pub fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn write_records(records: &[MetricRecord], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> anyhow::Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.with_context(|| format!("parsing {}", path.display()))?);
    }
    Ok(out)
}

/// Write the report in the requested formats; returns the files written.
pub fn write_report(report: &MetricReport, output: &Path, format: Option<Format>) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if format != Some(Format::Csv) {
        let p = with_extension(output, "json");
        std::fs::write(&p, report.to_json_string()).map_err(|e| hoaseg::Error::io(&p, e))?;
        written.push(p);
    }
    if format != Some(Format::Json) {
        let p = with_extension(output, "csv");
        write_records(&report.records(), &p)?;
        written.push(p);
    }
    Ok(written)
}

pub fn evaluate(
    pred: &Path,
    gt: &Path,
    landmarks: &Path,
    output: &Path,
    format: Option<Format>,
    subject: &str,
) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("evaluate");
    for p in [pred, gt, landmarks] {
        manifest.input(p)?;
    }
    let (p, _) = read_labels(pred)?;
    let (g, _) = read_labels(gt)?;
    let lm = load_landmarks(landmarks, &g)?;
    let boundaries = default_boundary_specs();
    let lines = default_line_specs();
    manifest.config(&serde_json::json!({ "boundaries": boundaries, "lines": lines }));
    let report = evaluate_pair(subject, &p, &g, &lm, &boundaries, &lines)?;
    let written = write_report(&report, output, format)?;
    for w in &written {
        manifest.output(w);
    }
    manifest.details(&serde_json::json!({ "mean_dice": report.mean_dice(), "mean_pasd": report.mean_pasd() }));
    manifest.finish(&written[0])
}

type ColumnKey = (String, String, String, String);

fn key(r: &MetricRecord) -> ColumnKey {
    (r.metric.clone(), r.region.clone(), r.surface.clone(), r.side.clone())
}

fn column_name(k: &ColumnKey) -> String {
    [&k.0, &k.1, &k.2, &k.3]
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(":")
}

/// Pair two long-format metric tables by subject and column.
pub fn paired_table(a: &[MetricRecord], b: &[MetricRecord]) -> anyhow::Result<PairedSampleTable> {
    let mut subjects: Vec<String> = Vec::new();
    let mut columns: Vec<ColumnKey> = Vec::new();
    let mut seen_cols = HashMap::new();
    let mut values: [HashMap<(String, ColumnKey), f64>; 2] = [HashMap::new(), HashMap::new()];
    let mut subject_sets = [BTreeMap::new(), BTreeMap::new()];
    for (side, records) in [a, b].into_iter().enumerate() {
        for r in records {
            let k = key(r);
            if side == 0 && !subject_sets[0].contains_key(&r.subject) {
                subjects.push(r.subject.clone());
            }
            subject_sets[side].insert(r.subject.clone(), ());
            if !seen_cols.contains_key(&k) {
                seen_cols.insert(k.clone(), columns.len());
                columns.push(k.clone());
            }
            let v = r.value.unwrap_or(f64::NAN);
            if values[side].insert((r.subject.clone(), k.clone()), v).is_some() {
                return Err(Exit::validation(format!(
                    "duplicate row for subject {} column {}",
                    r.subject,
                    column_name(&k)
                )));
            }
        }
    }
    if subject_sets[0] != subject_sets[1] {
        let only_a: Vec<&String> = subject_sets[0].keys().filter(|s| !subject_sets[1].contains_key(*s)).collect();
        let only_b: Vec<&String> = subject_sets[1].keys().filter(|s| !subject_sets[0].contains_key(*s)).collect();
        return Err(Exit::validation(format!(
            "subject sets differ: only in A {only_a:?}, only in B {only_b:?}"
        )));
    }
    let columns = columns
        .iter()
        .map(|k| {
            let get = |side: usize, s: &String| values[side].get(&(s.clone(), k.clone())).copied().unwrap_or(f64::NAN);
            PairedColumn {
                name: column_name(k),
                a: subjects.iter().map(|s| get(0, s)).collect(),
                b: subjects.iter().map(|s| get(1, s)).collect(),
            }
        })
        .collect();
    Ok(PairedSampleTable { subjects, columns })
}

#[derive(Debug, Serialize)]
struct StatsRow {
    column: String,
    n: Option<usize>,
    mean_difference: f64,
    w_plus: Option<f64>,
    p_value: Option<f64>,
    adjusted_p: Option<f64>,
    significant: bool,
    star: &'static str,
}

pub fn stats(
    a: &Path,
    b: &Path,
    q: f64,
    alternative: AlternativeArg,
    output: &Path,
    format: Format,
) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("stats");
    manifest.input(a)?;
    manifest.input(b)?;
    let alternative = match alternative {
        AlternativeArg::TwoSided => Alternative::TwoSided,
        AlternativeArg::Greater => Alternative::Greater,
        AlternativeArg::Less => Alternative::Less,
    };
    manifest.config(&serde_json::json!({ "q": q, "alternative": alternative }));
    let table = paired_table(&read_records(a)?, &read_records(b)?)?;
    let tests = wilcoxon_fdr(&table, alternative, q)?;
    let rows: Vec<StatsRow> = tests
        .iter()
        .map(|t| StatsRow {
            column: t.column.clone(),
            n: t.result.map(|r| r.n),
            mean_difference: t.mean_difference,
            w_plus: t.result.map(|r| r.w_plus),
            p_value: t.result.map(|r| r.p_value),
            adjusted_p: t.adjusted_p,
            significant: t.significant,
            star: if t.significant { "*" } else { "" },
        })
        .collect();
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&rows)?;
            std::fs::write(output, text).map_err(|e| hoaseg::Error::io(output, e))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_path(output).with_context(|| format!("creating {}", output.display()))?;
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    let significant = rows.iter().filter(|r| r.significant).count();
    let tested = rows.iter().filter(|r| r.p_value.is_some()).count();
    println!("{significant} of {tested} tested columns significant at q = {q}");
    manifest.details(&serde_json::json!({ "subjects": table.subjects.len(), "tested": tested, "significant": significant }));
    manifest.output(output);
    manifest.finish(output)
}
