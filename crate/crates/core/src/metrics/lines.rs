//! Separation-line accuracy (mean absolute error) and straightness
//! (population standard deviation within a slice).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub mae: f64,
    pub sigma_y: f64,
}

/// MAE between paired positions and the spread of the predicted line.
pub fn line_metrics(pred: &[f64], gt: &[f64]) -> Result<LineMetrics> {
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let mae = pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let sigma_y = if pred.iter().all(|&p| p == pred[0]) {
        0.0
    } else {
        let mean = pred.iter().sum::<f64>() / n;
        (pred.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    Ok(LineMetrics { mae, sigma_y })
}

/// Line positions in one slice, keyed by row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePositions {
    pub rows: Vec<usize>,
    /// Voxel index along the scan axis.
    pub positions: Vec<usize>,
}

/// Direction to scan from label `a` towards label `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    Increasing,
    Decreasing,
}

fn remaining_axis(slice_axis: usize, scan_axis: usize) -> usize {
    3 - slice_axis - scan_axis
}

/// Orientation that puts `a` on the low side when its mean position along the
/// scan axis is below that of `b`; `None` when either label is absent.
pub fn scan_direction(
    vol: &LabelVolume,
    slice_axis: usize,
    slice: usize,
    a: u16,
    b: u16,
    scan_axis: usize,
) -> Option<ScanDirection> {
    let (mut sa, mut na, mut sb, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for_slice(vol, slice_axis, slice, |p, label| {
        if label == a {
            sa += p[scan_axis] as f64;
            na += 1;
        } else if label == b {
            sb += p[scan_axis] as f64;
            nb += 1;
        }
    });
    if na == 0 || nb == 0 {
        return None;
    }
    Some(if sa / (na as f64) <= sb / (nb as f64) {
        ScanDirection::Increasing
    } else {
        ScanDirection::Decreasing
    })
}

fn for_slice(vol: &LabelVolume, slice_axis: usize, slice: usize, mut f: impl FnMut([usize; 3], u16)) {
    let dims = vol.dims();
    if slice >= dims[slice_axis] {
        return;
    }
    let mut lo = [0usize; 3];
    let mut hi = dims;
    lo[slice_axis] = slice;
    hi[slice_axis] = slice + 1;
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                f([i, j, k], vol.get(i, j, k));
            }
        }
    }
}

/// For each row of the slice holding both labels, the position of the first
/// `b` voxel met when scanning from the `a` side.
pub fn extract_separation_line(
    vol: &LabelVolume,
    slice_axis: usize,
    slice: usize,
    a: u16,
    b: u16,
    scan_axis: usize,
    direction: ScanDirection,
) -> Result<LinePositions> {
    assert!(slice_axis < 3 && scan_axis < 3 && slice_axis != scan_axis);
    let row_axis = remaining_axis(slice_axis, scan_axis);
    let nrows = vol.dims()[row_axis];
    let mut has_a = vec![false; nrows];
    let mut first_b: Vec<Option<usize>> = vec![None; nrows];
    for_slice(vol, slice_axis, slice, |p, label| {
        let r = p[row_axis];
        if label == a {
            has_a[r] = true;
        } else if label == b {
            let y = p[scan_axis];
            first_b[r] = Some(match (first_b[r], direction) {
                (None, _) => y,
                (Some(c), ScanDirection::Increasing) => c.min(y),
                (Some(c), ScanDirection::Decreasing) => c.max(y),
            });
        }
    });
    let mut out = LinePositions {
        rows: Vec::new(),
        positions: Vec::new(),
    };
    for r in 0..nrows {
        if let (true, Some(y)) = (has_a[r], first_b[r]) {
            out.rows.push(r);
            out.positions.push(y);
        }
    }
    if out.rows.is_empty() {
        return Err(Error::NoSeparationLine(a, b));
    }
    Ok(out)
}

/// Line metrics of one slice against the reference on rows present in
/// both, in voxel units along the scan axis. `None` when no row is shared.
pub fn compare_lines(pred: &LinePositions, gt: &LinePositions) -> Option<LineMetrics> {
    let mut p = Vec::new();
    let mut g = Vec::new();
    let mut gi = 0;
    for (r, &y) in pred.rows.iter().zip(&pred.positions) {
        while gi < gt.rows.len() && gt.rows[gi] < *r {
            gi += 1;
        }
        if gi < gt.rows.len() && gt.rows[gi] == *r {
            p.push(y as f64);
            g.push(gt.positions[gi] as f64);
        }
    }
    line_metrics(&p, &g).ok()
}
