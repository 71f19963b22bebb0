//! Per-subject evaluation of a refined label map against its reference.

use serde::{Deserialize, Serialize};

use super::lines::{compare_lines, extract_separation_line, scan_direction, LineMetrics};
use super::overlap::dice;
use super::surface::{pasd, BoundarySpec, SurfaceKind};
use crate::error::{Error, Result};
use crate::labels::{fine, LandmarkSet, Laterality, FINE_LABELS};
use crate::refine::Side;
use crate::volume::{reorient_to_canonical, LabelVolume};

/// A separation line between two labels, sampled slice by slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub region: String,
    pub surface: SurfaceKind,
    pub side: Side,
    /// Label the scan starts from.
    pub from: u16,
    /// Label whose first voxel marks the line.
    pub to: u16,
    /// Canonical axis the slices are taken across.
    pub slice_axis: usize,
    /// Canonical axis the line position is measured along.
    pub scan_axis: usize,
}

/// The three separation lines per hemisphere: inferior-horn posterior and
/// VDC_P anterior on sagittal slices, NAcc lateral on coronal slices.
pub fn default_line_specs() -> Vec<LineSpec> {
    let mut specs = Vec::new();
    for side in Side::BOTH {
        specs.push(LineSpec {
            region: "IH".into(),
            surface: SurfaceKind::Posterior,
            side,
            from: side.fine(fine::LV_L),
            to: side.fine(fine::IH_L),
            slice_axis: 0,
            scan_axis: 1,
        });
        specs.push(LineSpec {
            region: "VDC_P".into(),
            surface: SurfaceKind::Anterior,
            side,
            from: side.fine(fine::VDC_P_L),
            to: side.fine(fine::VDC_A_L),
            slice_axis: 0,
            scan_axis: 1,
        });
        specs.push(LineSpec {
            region: "NAcc".into(),
            surface: SurfaceKind::Lateral,
            side,
            from: side.fine(fine::NACC_L),
            to: side.fine(fine::PUT_L),
            slice_axis: 1,
            scan_axis: 0,
        });
    }
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceEntry {
    pub label: u16,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub region: String,
    pub surface: SurfaceKind,
    pub side: Option<Side>,
    /// Millimetres; `None` when the surface or predicted set is empty.
    pub pasd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineEntry {
    pub region: String,
    pub surface: SurfaceKind,
    pub side: Side,
    /// Slices where both lines were found.
    pub slices: usize,
    /// Mean over slices, in millimetres; `None` when no slice compared.
    pub mae: Option<f64>,
    pub sigma_y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkErrorEntry {
    pub id: u8,
    pub error_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub subject: String,
    pub dice: Vec<DiceEntry>,
    pub boundaries: Vec<BoundaryEntry>,
    pub lines: Vec<LineEntry>,
    #[serde(default)]
    pub landmark_errors: Vec<LandmarkErrorEntry>,
}

/// One row of the flat CSV form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub subject: String,
    pub metric: String,
    pub region: String,
    pub surface: String,
    pub side: String,
    pub value: Option<f64>,
}

fn side_name(side: Option<Side>) -> String {
    match side {
        Some(Side::Left) => "left".into(),
        Some(Side::Right) => "right".into(),
        None => "midline".into(),
    }
}

fn laterality_name(l: Laterality) -> String {
    match l {
        Laterality::Left => "left".into(),
        Laterality::Right => "right".into(),
        Laterality::Midline => "midline".into(),
    }
}

impl MetricReport {
    pub fn mean_dice(&self) -> f64 {
        self.dice.iter().map(|d| d.value).sum::<f64>() / self.dice.len().max(1) as f64
    }

    /// Mean over defined boundary distances; `None` when none is defined.
    pub fn mean_pasd(&self) -> Option<f64> {
        let v: Vec<f64> = self.boundaries.iter().filter_map(|b| b.pasd).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        let rec = |metric: &str, region: &str, surface: &str, side: String, value: Option<f64>| MetricRecord {
            subject: self.subject.clone(),
            metric: metric.into(),
            region: region.into(),
            surface: surface.into(),
            side,
            value,
        };
        for d in &self.dice {
            let lat = FINE_LABELS[(d.label - 1) as usize].laterality;
            out.push(rec("dice", &d.name, "", laterality_name(lat), Some(d.value)));
        }
        for b in &self.boundaries {
            out.push(rec("pasd", &b.region, b.surface.name(), side_name(b.side), b.pasd));
        }
        for l in &self.lines {
            out.push(rec("mae", &l.region, l.surface.name(), side_name(Some(l.side)), l.mae));
            out.push(rec("sigma_y", &l.region, l.surface.name(), side_name(Some(l.side)), l.sigma_y));
        }
        for e in &self.landmark_errors {
            out.push(rec("landmark_error", &e.id.to_string(), "", String::new(), Some(e.error_mm)));
        }
        out
    }

    /// Add per-landmark Euclidean errors of predicted against reference landmarks.
    pub fn with_landmark_errors(mut self, pred: &LandmarkSet, gt: &LandmarkSet) -> Self {
        self.landmark_errors = gt
            .iter()
            .filter_map(|(id, g)| {
                pred.get(id).map(|p| LandmarkErrorEntry {
                    id,
                    error_mm: crate::geometry::distance(p, g),
                })
            })
            .collect();
        self
    }
}

/// Line metrics of one spec over every slice where both volumes have the
/// line, scaled to millimetres along the scan axis.
pub fn evaluate_line(pred: &LabelVolume, gt: &LabelVolume, spec: &LineSpec) -> LineEntry {
    let mut per_slice: Vec<LineMetrics> = Vec::new();
    for s in 0..gt.dims()[spec.slice_axis] {
        let Some(dir) = scan_direction(gt, spec.slice_axis, s, spec.from, spec.to, spec.scan_axis) else {
            continue;
        };
        let Ok(g) = extract_separation_line(gt, spec.slice_axis, s, spec.from, spec.to, spec.scan_axis, dir) else {
            continue;
        };
        let Ok(p) = extract_separation_line(pred, spec.slice_axis, s, spec.from, spec.to, spec.scan_axis, dir) else {
            continue;
        };
        if let Some(m) = compare_lines(&p, &g) {
            per_slice.push(m);
        }
    }
    let h = gt.spacing()[spec.scan_axis];
    let n = per_slice.len();
    let mean = |f: fn(&LineMetrics) -> f64| (n > 0).then(|| h * per_slice.iter().map(f).sum::<f64>() / n as f64);
    LineEntry {
        region: spec.region.clone(),
        surface: spec.surface,
        side: spec.side,
        slices: n,
        mae: mean(|m| m.mae),
        sigma_y: mean(|m| m.sigma_y),
    }
}

/// Dice for every fine label, distance for every boundary and line metrics
/// for every line. Both volumes must share one grid; undefined distances and
/// lines are reported as `None`.
pub fn evaluate_pair(
    subject: &str,
    pred: &LabelVolume,
    gt: &LabelVolume,
    lm: &LandmarkSet,
    boundaries: &[BoundarySpec],
    lines: &[LineSpec],
) -> Result<MetricReport> {
    pred.same_grid(gt)?;
    let (gt_c, _) = reorient_to_canonical(gt)?;
    let (pred_c, _) = reorient_to_canonical(pred)?;
    let mut dice_entries = Vec::with_capacity(FINE_LABELS.len());
    for l in &FINE_LABELS {
        dice_entries.push(DiceEntry {
            label: l.id,
            name: l.name.into(),
            value: dice(&pred_c, &gt_c, l.id)?,
        });
    }
    let mut boundary_entries = Vec::with_capacity(boundaries.len());
    for spec in boundaries {
        let value = match pasd(&gt_c, &pred_c, spec, lm) {
            Ok(v) => Some(v),
            Err(e @ (Error::EmptySurface(_) | Error::EmptyPrediction(_))) => {
                log::warn!("{subject}: {e}; distance undefined");
                None
            }
            Err(e) => return Err(e),
        };
        boundary_entries.push(BoundaryEntry {
            region: spec.region.clone(),
            surface: spec.surface,
            side: spec.side,
            pasd: value,
        });
    }
    let line_entries = lines.iter().map(|s| evaluate_line(&pred_c, &gt_c, s)).collect();
    Ok(MetricReport {
        subject: subject.into(),
        dice: dice_entries,
        boundaries: boundary_entries,
        lines: line_entries,
        landmark_errors: Vec::new(),
    })
}
