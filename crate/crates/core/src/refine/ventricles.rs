//! Lateral ventricle / inferior horn separation by a seeded anterior sweep.

use super::components::{components_2d, NO_COMPONENT};
use super::hemisphere::{HemisphereTags, Side};
use super::{landmark_for, landmark_slice, RefinementConfig};
use crate::error::Result;
use crate::labels::{fine, fused, landmark, LandmarkSet};
use crate::volume::{LabelVolume, Point3};

/// Split fused LV+IH per side.
///
/// Voxels at or posterior to the first-posterior-appearance slice are LV.
/// Anterior to it, the first non-empty slice seeds the inferior horn with the
/// 2D component nearest the landmark in (x, z). Each later slice continues it
/// with the lowest-centroid component touching the previous slice's horn
/// (26-adjacency); once no component touches, the horn ends. Everything else
/// is LV.
pub fn split_lv_ih(
    vol12: &LabelVolume,
    lm: &LandmarkSet,
    tags: &HemisphereTags,
    cfg: &RefinementConfig,
    out: &mut LabelVolume,
) -> Result<()> {
    for side in Side::BOTH {
        let lv = side.fine(fine::LV_L);
        let ih = side.fine(fine::IH_L);
        for (idx, &label) in vol12.data().iter().enumerate() {
            if label == fused::LV_IH && tags.side(idx) == Some(side) {
                out.data_mut()[idx] = lv;
            }
        }
        if !cfg.rule_inferior_horn {
            continue;
        }
        let Some(seed) = landmark_for(lm, side.pick(landmark::IH_FIRST_L, landmark::IH_FIRST_R), cfg)? else {
            continue;
        };
        let plane = landmark_slice(vol12, seed);
        let first = if cfg.ih_plane_in_sweep { plane } else { plane + 1 };
        sweep(vol12, tags, side, seed, first.max(0) as usize, ih, out);
    }
    Ok(())
}

fn sweep(
    vol12: &LabelVolume,
    tags: &HemisphereTags,
    side: Side,
    seed: Point3,
    first: usize,
    ih: u16,
    out: &mut LabelVolume,
) {
    let [nx, ny, nz] = vol12.dims();
    let mut key = vec![0u16; nx * nz];
    let mut prev: Option<Vec<bool>> = None;
    for j in first..ny {
        let mut any = false;
        for k in 0..nz {
            for i in 0..nx {
                let idx = vol12.index(i, j, k);
                let on = vol12.data()[idx] == fused::LV_IH && tags.side(idx) == Some(side);
                key[i + nx * k] = on as u16;
                any |= on;
            }
        }
        let chosen = match &prev {
            None if !any => continue,
            None => {
                let (comp, count) = components_2d(&key, nx, nz);
                nearest_component(vol12, j, &comp, count, seed).map(|c| (comp, c))
            }
            Some(prev_mask) => {
                let (comp, count) = components_2d(&key, nx, nz);
                lowest_touching(vol12, j, &comp, count, prev_mask, nx, nz).map(|c| (comp, c))
            }
        };
        let Some((comp, c)) = chosen else { break };
        let mut mask = vec![false; nx * nz];
        for k in 0..nz {
            for i in 0..nx {
                let cell = i + nx * k;
                if comp[cell] == c {
                    mask[cell] = true;
                    out.set(i, j, k, ih);
                }
            }
        }
        prev = Some(mask);
    }
}

fn nearest_component(vol: &LabelVolume, j: usize, comp: &[u32], count: usize, seed: Point3) -> Option<u32> {
    let nx = vol.dims()[0];
    let mut best = vec![f64::INFINITY; count];
    for (cell, &c) in comp.iter().enumerate() {
        if c == NO_COMPONENT {
            continue;
        }
        let p = vol.voxel_center(cell % nx, j, cell / nx);
        let d = (p[0] - seed[0]).powi(2) + (p[2] - seed[2]).powi(2);
        best[c as usize] = best[c as usize].min(d);
    }
    argmin(&best)
}

fn lowest_touching(
    vol: &LabelVolume,
    j: usize,
    comp: &[u32],
    count: usize,
    prev: &[bool],
    nx: usize,
    nz: usize,
) -> Option<u32> {
    let mut touches = vec![false; count];
    let mut z_sum = vec![0.0; count];
    let mut n = vec![0usize; count];
    for (cell, &c) in comp.iter().enumerate() {
        if c == NO_COMPONENT {
            continue;
        }
        let (i, k) = (cell % nx, cell / nx);
        z_sum[c as usize] += vol.voxel_center(i, j, k)[2];
        n[c as usize] += 1;
        if !touches[c as usize] {
            let near = (k.saturating_sub(1)..=(k + 1).min(nz - 1))
                .any(|kk| (i.saturating_sub(1)..=(i + 1).min(nx - 1)).any(|ii| prev[ii + nx * kk]));
            touches[c as usize] = near;
        }
    }
    let centroid_z: Vec<f64> = (0..count)
        .map(|c| if touches[c] { z_sum[c] / n[c] as f64 } else { f64::INFINITY })
        .collect();
    argmin(&centroid_z)
}

/// Index of the smallest finite value; the first one wins ties.
fn argmin(values: &[f64]) -> Option<u32> {
    let mut best: Option<(usize, f64)> = None;
    for (c, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((c, v));
        }
    }
    best.map(|(c, _)| c as u32)
}
