//! Slice-wise relabeling rules: pass-through splits, the NAcc/putamen
//! separator, coronal truncations and the ventral diencephalon split.

use serde::{Deserialize, Serialize};

use super::hemisphere::{HemisphereTags, Side};
use super::{landmark_for, landmark_slice, RefinementConfig};
use crate::error::Result;
use crate::labels::{fine, fused, landmark, LandmarkSet};
use crate::volume::{LabelVolume, Point3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparatorMode {
    /// Interpolate x between the posterior and anterior contact slices.
    #[default]
    Linear,
    /// Use the anterior contact's x on every slice.
    ConstantAnterior,
    /// Use the posterior contact's x on every slice.
    ConstantPosterior,
}

/// Constant-x separator per coronal slice between NAcc (medial) and putamen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatorLine {
    pub anterior_slice: i64,
    pub anterior_x: f64,
    pub posterior_slice: i64,
    pub posterior_x: f64,
    pub mode: SeparatorMode,
}

impl SeparatorLine {
    pub fn x_at(&self, j: i64) -> f64 {
        match self.mode {
            SeparatorMode::ConstantAnterior => self.anterior_x,
            SeparatorMode::ConstantPosterior => self.posterior_x,
            SeparatorMode::Linear => {
                let (j0, x0, j1, x1) = (self.posterior_slice, self.posterior_x, self.anterior_slice, self.anterior_x);
                if j0 == j1 {
                    return 0.5 * (x0 + x1);
                }
                let (lo, hi) = (j0.min(j1), j0.max(j1));
                let j = j.clamp(lo, hi);
                x0 + (x1 - x0) * (j - j0) as f64 / (j1 - j0) as f64
            }
        }
    }
}

/// Separator from the anterior and posterior contact landmarks of one side,
/// in the volume's slice indexing.
pub fn separator_line(vol: &LabelVolume, anterior: Point3, posterior: Point3, mode: SeparatorMode) -> SeparatorLine {
    SeparatorLine {
        anterior_slice: landmark_slice(vol, anterior),
        anterior_x: anterior[0],
        posterior_slice: landmark_slice(vol, posterior),
        posterior_x: posterior[0],
        mode,
    }
}

/// Labels that need no landmark: midline structures keep their identity and
/// the simple bilateral structures split by hemisphere.
pub fn assign_pass_through(vol12: &LabelVolume, tags: &HemisphereTags, out: &mut LabelVolume) {
    let src = vol12.data();
    let dst = out.data_mut();
    for (idx, (&label, o)) in src.iter().zip(dst.iter_mut()).enumerate() {
        let midline = match label {
            fused::CSF => Some(fine::CSF),
            fused::V3 => Some(fine::V3),
            fused::V4 => Some(fine::V4),
            fused::BRAINSTEM => Some(fine::BRAINSTEM),
            _ => None,
        };
        if let Some(m) = midline {
            *o = m;
            continue;
        }
        let left = match label {
            fused::CAU => fine::CAU_L,
            fused::GP => fine::GP_L,
            fused::TH => fine::TH_L,
            fused::HF => fine::HF_L,
            fused::AMY => fine::AMY_L,
            _ => continue,
        };
        if let Some(side) = tags.side(idx) {
            *o = side.fine(left);
        }
    }
}

/// Split fused NAcc+putamen per side: voxels medial to the separator become
/// NAcc, the rest (including on-line voxels) putamen.
pub fn separate_nacc_putamen(
    vol12: &LabelVolume,
    lm: &LandmarkSet,
    tags: &HemisphereTags,
    cfg: &RefinementConfig,
    out: &mut LabelVolume,
) -> Result<()> {
    let [nx, ny, nz] = vol12.dims();
    for side in Side::BOTH {
        let ant = landmark_for(lm, side.pick(landmark::CONTACT_ANT_L, landmark::CONTACT_ANT_R), cfg)?;
        let post = landmark_for(lm, side.pick(landmark::CONTACT_POST_L, landmark::CONTACT_POST_R), cfg)?;
        let line = match (ant, post) {
            (Some(a), Some(p)) => Some(separator_line(vol12, a, p, cfg.separator_mode)),
            _ => None,
        };
        let nacc = side.fine(fine::NACC_L);
        let put = side.fine(fine::PUT_L);
        for j in 0..ny {
            let sep = line.map(|l| l.x_at(j as i64));
            for k in 0..nz {
                for i in 0..nx {
                    let idx = vol12.index(i, j, k);
                    if vol12.data()[idx] != fused::NACC_PUT || tags.side(idx) != Some(side) {
                        continue;
                    }
                    let medial = sep.is_some_and(|s| {
                        let x = vol12.voxel_center(i, j, k)[0];
                        side.pick(x > s, x < s)
                    });
                    out.data_mut()[idx] = if medial { nacc } else { put };
                }
            }
        }
    }
    Ok(())
}

/// Count of voxels moved by each truncation rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtentCounts {
    pub putamen_to_nacc: usize,
    pub nacc_to_putamen: usize,
    pub third_ventricle_excluded: usize,
}

fn beyond(j: i64, plane: i64, anterior: bool, inclusive: bool) -> bool {
    match (anterior, inclusive) {
        (true, false) => j > plane,
        (true, true) => j >= plane,
        (false, false) => j < plane,
        (false, true) => j <= plane,
    }
}

fn relabel_beyond(out: &mut LabelVolume, from: u16, to: u16, plane: i64, anterior: bool, inclusive: bool) -> usize {
    let [nx, ny, _] = out.dims();
    let plane_stride = nx * ny;
    let mut moved = 0;
    for (idx, v) in out.data_mut().iter_mut().enumerate() {
        if *v == from && beyond(((idx % plane_stride) / nx) as i64, plane, anterior, inclusive) {
            *v = to;
            moved += 1;
        }
    }
    moved
}

/// Coronal truncations on a canonical fine-label volume, applied in order:
/// putamen anterior to its first appearance becomes NAcc, NAcc posterior to
/// its last appearance becomes putamen, and third ventricle anterior to its
/// first appearance is excluded. Re-applying the rules changes nothing.
pub fn apply_coronal_extents(out: &mut LabelVolume, lm: &LandmarkSet, cfg: &RefinementConfig) -> Result<ExtentCounts> {
    let mut counts = ExtentCounts::default();
    for side in Side::BOTH {
        if !cfg.rule_putamen_anterior {
            break;
        }
        if let Some(p) = landmark_for(lm, side.pick(landmark::PUT_FIRST_L, landmark::PUT_FIRST_R), cfg)? {
            let plane = landmark_slice(out, p);
            counts.putamen_to_nacc += relabel_beyond(
                out,
                side.fine(fine::PUT_L),
                side.fine(fine::NACC_L),
                plane,
                true,
                cfg.putamen_anterior_inclusive,
            );
        }
    }
    for side in Side::BOTH {
        if !cfg.rule_nacc_posterior {
            break;
        }
        if let Some(p) = landmark_for(lm, side.pick(landmark::NACC_LAST_L, landmark::NACC_LAST_R), cfg)? {
            let plane = landmark_slice(out, p);
            counts.nacc_to_putamen += relabel_beyond(
                out,
                side.fine(fine::NACC_L),
                side.fine(fine::PUT_L),
                plane,
                false,
                cfg.nacc_posterior_inclusive,
            );
        }
    }
    if cfg.rule_third_ventricle && cfg.third_ventricle_target != fine::V3 {
        if let Some(p) = landmark_for(lm, landmark::V3_FIRST, cfg)? {
            let plane = landmark_slice(out, p);
            counts.third_ventricle_excluded = relabel_beyond(
                out,
                fine::V3,
                cfg.third_ventricle_target,
                plane,
                true,
                cfg.third_ventricle_inclusive,
            );
        }
    }
    Ok(counts)
}

/// Split ventral diencephalon per side at the mammillary-body slice:
/// anterior voxels become VDC_A, the plane slice and posterior ones VDC_P.
pub fn split_vdc(
    vol12: &LabelVolume,
    lm: &LandmarkSet,
    tags: &HemisphereTags,
    cfg: &RefinementConfig,
    out: &mut LabelVolume,
) -> Result<()> {
    let [nx, ny, _] = vol12.dims();
    let mut planes = [None, None];
    for side in Side::BOTH {
        if cfg.rule_vdc_split {
            planes[side.pick(0, 1)] = landmark_for(lm, side.pick(landmark::MB_L, landmark::MB_R), cfg)?
                .map(|p| landmark_slice(vol12, p));
        }
    }
    let plane_stride = nx * ny;
    for (idx, (&label, o)) in vol12.data().iter().zip(out.data_mut().iter_mut()).enumerate() {
        if label != fused::VDC {
            continue;
        }
        let Some(side) = tags.side(idx) else { continue };
        let j = ((idx % plane_stride) / nx) as i64;
        let anterior = planes[side.pick(0, 1)].is_some_and(|plane| beyond(j, plane, true, cfg.vdc_plane_anterior));
        *o = if anterior {
            side.fine(fine::VDC_A_L)
        } else {
            side.fine(fine::VDC_P_L)
        };
    }
    Ok(())
}
