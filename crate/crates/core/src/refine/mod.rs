//! Landmark-guided refinement of a 12-label fused volume into 26 labels.
//!
//! All rule functions operate on volumes already in the canonical RAS frame,
//! where the second voxel axis runs posterior to anterior. Landmarks are
//! compared to voxels by coronal slice index after snapping.

mod components;
mod hemisphere;
mod rules;
mod ventricles;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use components::{components_2d, NO_COMPONENT};
pub use hemisphere::{build_midsagittal_plane, is_bilateral_fused, split_hemispheres, HemisphereTags, Side};
pub use rules::{
    apply_coronal_extents, assign_pass_through, separate_nacc_putamen, separator_line, split_vdc, ExtentCounts,
    SeparatorLine, SeparatorMode,
};
pub use ventricles::split_lv_ih;

use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::labels::{self, fine, LandmarkSet, LANDMARKS};
use crate::volume::{reorient_from_canonical, reorient_to_canonical, snap_index, CanonicalFrame, LabelVolume, Point3};

/// Environment variable naming a fallback configuration file.
pub const CONFIG_ENV: &str = "HOA_REFINE_CONFIG";

/// Rule switches and boundary conventions. Defaults give the reference
/// behaviour: plain plane split, linear separator, exclusive truncations,
/// posterior-inclusive VDC plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub slice_adjust: bool,
    /// Largest lateral shift of the per-slice dividing line, in voxels.
    pub slice_adjust_radius: usize,
    pub separator_mode: SeparatorMode,
    /// Skip rules whose landmarks are absent instead of failing.
    pub partial_rules: bool,
    pub rule_putamen_anterior: bool,
    pub rule_nacc_posterior: bool,
    pub rule_third_ventricle: bool,
    pub rule_vdc_split: bool,
    pub rule_inferior_horn: bool,
    /// Fine label given to third-ventricle voxels anterior to its first appearance.
    pub third_ventricle_target: u16,
    pub putamen_anterior_inclusive: bool,
    pub nacc_posterior_inclusive: bool,
    pub third_ventricle_inclusive: bool,
    /// Put voxels on the mammillary slice into VDC_A instead of VDC_P.
    pub vdc_plane_anterior: bool,
    /// Let the inferior-horn sweep start on the landmark slice itself.
    pub ih_plane_in_sweep: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            slice_adjust: false,
            slice_adjust_radius: 2,
            separator_mode: SeparatorMode::Linear,
            partial_rules: false,
            rule_putamen_anterior: true,
            rule_nacc_posterior: true,
            rule_third_ventricle: true,
            rule_vdc_split: true,
            rule_inferior_horn: true,
            third_ventricle_target: fine::CSF,
            putamen_anterior_inclusive: false,
            nacc_posterior_inclusive: false,
            third_ventricle_inclusive: false,
            vdc_plane_anterior: false,
            ih_plane_in_sweep: false,
        }
    }
}

impl RefinementConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RefinementConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=labels::FINE_COUNT).contains(&self.third_ventricle_target) {
            return Err(Error::Config(format!(
                "third_ventricle_target {} is not a fine label",
                self.third_ventricle_target
            )));
        }
        Ok(())
    }
}

/// Coronal slice index of a landmark in a canonical volume.
pub fn landmark_slice(vol: &LabelVolume, p: Point3) -> i64 {
    snap_index(vol.world_to_voxel(p)[1])
}

/// Landmark needed by a rule: absent ones are an error unless partial rules
/// are enabled, in which case the rule is skipped.
pub(crate) fn landmark_for(lm: &LandmarkSet, id: u8, cfg: &RefinementConfig) -> Result<Option<Point3>> {
    match lm.get(id) {
        Some(p) => Ok(Some(p)),
        None if cfg.partial_rules => Ok(None),
        None => lm.require(id).map(Some),
    }
}

/// What a refinement run did, for manifests and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub frame: CanonicalFrame,
    pub plane: Plane,
    /// Non-zero per-slice dividing-line shifts as `(slice, mm)`.
    pub slice_offsets: Vec<(usize, f64)>,
    pub extents: ExtentCounts,
    pub missing_landmarks: Vec<u8>,
}

/// Refine a fused volume in any orientation; see [`refine_with_report`].
pub fn refine_full(vol12: &LabelVolume, lm: &LandmarkSet, cfg: &RefinementConfig) -> Result<LabelVolume> {
    refine_with_report(vol12, lm, cfg).map(|(v, _)| v)
}

/// Canonicalize, apply every rule, and return to the input frame.
pub fn refine_with_report(
    vol12: &LabelVolume,
    lm: &LandmarkSet,
    cfg: &RefinementConfig,
) -> Result<(LabelVolume, RefineReport)> {
    cfg.validate()?;
    labels::check_fused(vol12)?;
    let missing: Vec<u8> = LANDMARKS.iter().map(|l| l.id).filter(|&id| !lm.contains(id)).collect();
    if !cfg.partial_rules {
        if let Some(&id) = missing.first() {
            lm.require(id)?;
        }
    }
    let (canon, frame) = reorient_to_canonical(vol12)?;
    let (out, plane, offsets, extents) = refine_canonical(&canon, lm, cfg)?;
    let out = reorient_from_canonical(&out, &frame)?;
    let report = RefineReport {
        frame,
        plane,
        slice_offsets: offsets
            .iter()
            .enumerate()
            .filter(|(_, &o)| o != 0.0)
            .map(|(j, &o)| (j, o))
            .collect(),
        extents,
        missing_landmarks: missing,
    };
    Ok((out, report))
}

type CanonicalResult = (LabelVolume, Plane, Vec<f64>, ExtentCounts);

fn refine_canonical(vol12: &LabelVolume, lm: &LandmarkSet, cfg: &RefinementConfig) -> Result<CanonicalResult> {
    let plane = build_midsagittal_plane(lm)?;
    let tags = split_hemispheres(vol12, &plane, cfg);
    let mut out = vol12.with_data(vec![0u16; vol12.len()])?;
    assign_pass_through(vol12, &tags, &mut out);
    separate_nacc_putamen(vol12, lm, &tags, cfg, &mut out)?;
    let extents = apply_coronal_extents(&mut out, lm, cfg)?;
    split_vdc(vol12, lm, &tags, cfg, &mut out)?;
    split_lv_ih(vol12, lm, &tags, cfg, &mut out)?;
    Ok((out, plane, tags.slice_offsets, extents))
}
