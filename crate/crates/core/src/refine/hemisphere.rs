//! Midsagittal plane and per-voxel hemisphere tags.

use serde::{Deserialize, Serialize};

use super::components::{components_2d, NO_COMPONENT};
use super::RefinementConfig;
use crate::error::Result;
use crate::geometry::Plane;
use crate::labels::{fused, landmark, LandmarkSet};
use crate::volume::LabelVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn pick<T>(self, left: T, right: T) -> T {
        match self {
            Side::Left => left,
            Side::Right => right,
        }
    }

    /// Fine ids of a left/right pair differ by one, left first.
    pub fn fine(self, left_id: u16) -> u16 {
        self.pick(left_id, left_id + 1)
    }

    fn tag(self) -> u8 {
        self.pick(1, 2)
    }

    fn from_tag(tag: u8) -> Option<Side> {
        match tag {
            1 => Some(Side::Left),
            2 => Some(Side::Right),
            _ => None,
        }
    }
}

/// Fused labels that are split into left and right parts.
pub fn is_bilateral_fused(label: u16) -> bool {
    matches!(
        label,
        fused::LV_IH | fused::NACC_PUT | fused::CAU | fused::GP | fused::TH | fused::HF | fused::AMY | fused::VDC
    )
}

/// Plane through AC, PC and PPF with its normal pointing to subject-right.
pub fn build_midsagittal_plane(lm: &LandmarkSet) -> Result<Plane> {
    Plane::through(
        lm.require(landmark::AC)?,
        lm.require(landmark::PC)?,
        lm.require(landmark::PPF)?,
    )
}

/// Hemisphere of every bilateral foreground voxel.
#[derive(Debug, Clone)]
pub struct HemisphereTags {
    pub plane: Plane,
    /// Per coronal slice shift of the dividing line along the plane normal, mm.
    pub slice_offsets: Vec<f64>,
    tags: Vec<u8>,
}

impl HemisphereTags {
    pub fn side(&self, idx: usize) -> Option<Side> {
        Side::from_tag(self.tags[idx])
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Tag bilateral voxels of a canonical 12-label volume by the side of the
/// plane their centre falls on (on-plane counts as right).
pub fn split_hemispheres(vol12: &LabelVolume, plane: &Plane, cfg: &RefinementConfig) -> HemisphereTags {
    let [nx, ny, nz] = vol12.dims();
    let mut tags = vec![0u8; vol12.len()];
    let mut slice_offsets = vec![0.0; ny];
    let lateral_step = vol12.spacing()[0];

    let mut key = vec![0u16; nx * nz];
    let mut dist = vec![0.0f64; nx * nz];
    let mut prev: Option<Vec<u8>> = None;
    for j in 0..ny {
        let mut any = false;
        for k in 0..nz {
            for i in 0..nx {
                let label = vol12.get(i, j, k);
                let cell = i + nx * k;
                if is_bilateral_fused(label) {
                    key[cell] = label;
                    dist[cell] = plane.signed_distance(vol12.voxel_center(i, j, k));
                    any = true;
                } else {
                    key[cell] = 0;
                }
            }
        }
        if !any {
            prev = None;
            continue;
        }
        let offset = match (&prev, cfg.slice_adjust) {
            (Some(prev), true) => best_shift(&key, &dist, prev, nx, nz, cfg.slice_adjust_radius, lateral_step) as f64 * lateral_step,
            _ => 0.0,
        };
        slice_offsets[j] = offset;

        let mut current = vec![0u8; nx * nz];
        for k in 0..nz {
            for i in 0..nx {
                let cell = i + nx * k;
                if key[cell] != 0 {
                    let side = if dist[cell] - offset >= 0.0 { Side::Right } else { Side::Left };
                    current[cell] = side.tag();
                    tags[vol12.index(i, j, k)] = side.tag();
                }
            }
        }
        prev = Some(current);
    }

    HemisphereTags {
        plane: *plane,
        slice_offsets,
        tags,
    }
}

/// Lateral shift, in voxels, that best agrees with the previous slice.
///
/// Each 2D component votes for the side most of its overlap with the previous
/// slice held; the score counts voxels landing on their component's side.
/// Ties go to the smaller shift, then to the negative one.
fn best_shift(key: &[u16], dist: &[f64], prev: &[u8], nx: usize, nz: usize, radius: usize, lateral_step: f64) -> i64 {
    let (comp, count) = components_2d(key, nx, nz);
    let mut votes = vec![[0usize; 2]; count];
    for cell in 0..key.len() {
        if comp[cell] != NO_COMPONENT && prev[cell] != 0 {
            votes[comp[cell] as usize][(prev[cell] - 1) as usize] += 1;
        }
    }
    let majority: Vec<u8> = votes
        .iter()
        .map(|v| match v[0].cmp(&v[1]) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 2,
            std::cmp::Ordering::Equal => 0,
        })
        .collect();

    let score = |s: i64| -> usize {
        let offset = s as f64 * lateral_step;
        (0..key.len())
            .filter(|&cell| {
                comp[cell] != NO_COMPONENT && {
                    let want = majority[comp[cell] as usize];
                    let got = if dist[cell] - offset >= 0.0 { 2 } else { 1 };
                    want != 0 && want == got
                }
            })
            .count()
    };

    let mut best = (0i64, score(0));
    for m in 1..=radius as i64 {
        for s in [-m, m] {
            let sc = score(s);
            if sc > best.1 {
                best = (s, sc);
            }
        }
    }
    best.0
}
