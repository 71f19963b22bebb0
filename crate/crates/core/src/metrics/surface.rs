//! Protocol-aligned surface distance: one-way mean nearest distance from a
//! reference boundary surface to the predicted voxels of the same structure.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{fine, landmark, LandmarkSet};
use crate::refine::{landmark_slice, Side};
use crate::volume::{LabelVolume, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Anterior,
    Posterior,
    Lateral,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Anterior => "anterior",
            SurfaceKind::Posterior => "posterior",
            SurfaceKind::Lateral => "lateral",
        }
    }
}

/// Which predicted voxels a surface is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideSet {
    /// Voxels of the label on the structure's side of the plane, plane slice included.
    #[default]
    PlaneSide,
    /// Every voxel of the label.
    WholeLabel,
}

/// One protocol boundary of one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub region: String,
    pub surface: SurfaceKind,
    /// Hemisphere, or `None` for a midline structure.
    pub side: Option<Side>,
    pub label: u16,
    /// Label across the separator, for lateral surfaces.
    pub neighbour: Option<u16>,
    /// Landmark fixing the coronal plane, for anterior/posterior surfaces.
    pub landmark: Option<u8>,
    /// Surface slice relative to the landmark slice.
    pub slice_offset: i64,
    pub side_set: SideSet,
}

impl BoundarySpec {
    pub fn name(&self) -> String {
        let side = match self.side {
            Some(Side::Left) => " L",
            Some(Side::Right) => " R",
            None => "",
        };
        format!("{} ({}){}", self.region, self.surface.name(), side)
    }

    /// Coronal slice of the defining landmark, for plane-defined boundaries.
    pub fn plane_slice(&self, vol: &LabelVolume, lm: &LandmarkSet) -> Result<Option<i64>> {
        match self.landmark {
            Some(id) => Ok(Some(landmark_slice(vol, lm.require(id)?))),
            None => Ok(None),
        }
    }

    /// Coronal slice holding the surface itself.
    pub fn surface_slice(&self, vol: &LabelVolume, lm: &LandmarkSet) -> Result<Option<i64>> {
        Ok(self.plane_slice(vol, lm)?.map(|j| j + self.slice_offset))
    }
}

fn coronal(region: &str, surface: SurfaceKind, side: Option<Side>, label: u16, lm: u8, offset: i64) -> BoundarySpec {
    BoundarySpec {
        region: region.into(),
        surface,
        side,
        label,
        neighbour: None,
        landmark: Some(lm),
        slice_offset: offset,
        side_set: SideSet::PlaneSide,
    }
}

fn lateral(region: &str, side: Side, label: u16, neighbour: u16) -> BoundarySpec {
    BoundarySpec {
        region: region.into(),
        surface: SurfaceKind::Lateral,
        side: Some(side),
        label,
        neighbour: Some(neighbour),
        landmark: None,
        slice_offset: 0,
        side_set: SideSet::WholeLabel,
    }
}

/// The landmark-driven boundaries: eight per hemisphere, the third
/// ventricle once.
///
/// Surface slices follow the refinement conventions: a structure kept
/// strictly anterior to a landmark slice has its posterior face one slice
/// further forward, while one kept on or behind it ends on that slice.
pub fn default_boundary_specs() -> Vec<BoundarySpec> {
    use SurfaceKind::{Anterior, Posterior};
    let mut specs = Vec::new();
    for side in Side::BOTH {
        let s = Some(side);
        let id = |l: u8, r: u8| side.pick(l, r);
        specs.push(coronal("IH", Posterior, s, side.fine(fine::IH_L), id(landmark::IH_FIRST_L, landmark::IH_FIRST_R), 1));
        specs.push(lateral("NAcc", side, side.fine(fine::NACC_L), side.fine(fine::PUT_L)));
        specs.push(coronal("NAcc", Posterior, s, side.fine(fine::NACC_L), id(landmark::NACC_LAST_L, landmark::NACC_LAST_R), 0));
        specs.push(coronal("Put", Anterior, s, side.fine(fine::PUT_L), id(landmark::PUT_FIRST_L, landmark::PUT_FIRST_R), 0));
        specs.push(lateral("Put", side, side.fine(fine::PUT_L), side.fine(fine::NACC_L)));
        if side == Side::Left {
            specs.push(coronal("3V", Anterior, None, fine::V3, landmark::V3_FIRST, 0));
        }
        specs.push(coronal("VDC_A", Posterior, s, side.fine(fine::VDC_A_L), id(landmark::MB_L, landmark::MB_R), 1));
        specs.push(coronal("VDC_P", Anterior, s, side.fine(fine::VDC_P_L), id(landmark::MB_L, landmark::MB_R), 0));
    }
    specs
}

/// Reference surface voxel centres: the label's voxels on the boundary's
/// coronal slice, or for lateral boundaries the label's voxels touching the
/// neighbour label along x. Expects a canonical volume.
pub fn extract_protocol_surface(gt: &LabelVolume, spec: &BoundarySpec, lm: &LandmarkSet) -> Result<Vec<Point3>> {
    let [nx, ny, nz] = gt.dims();
    let mut out = Vec::new();
    match spec.surface_slice(gt, lm)? {
        Some(j) => {
            if (0..ny as i64).contains(&j) {
                let j = j as usize;
                for k in 0..nz {
                    for i in 0..nx {
                        if gt.get(i, j, k) == spec.label {
                            out.push(gt.voxel_center(i, j, k));
                        }
                    }
                }
            }
        }
        None => {
            let other = spec.neighbour.unwrap_or(0);
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        if gt.get(i, j, k) != spec.label {
                            continue;
                        }
                        let touches = (i > 0 && gt.get(i - 1, j, k) == other) || (i + 1 < nx && gt.get(i + 1, j, k) == other);
                        if touches {
                            out.push(gt.voxel_center(i, j, k));
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySurface(spec.name()));
    }
    Ok(out)
}

/// Predicted voxels the surface is measured against, as a voxel mask. A
/// posterior surface faces a structure lying anterior to the landmark plane,
/// so the side set keeps label voxels on or anterior to it, and vice versa.
pub fn predicted_side_set(pred: &LabelVolume, spec: &BoundarySpec, lm: &LandmarkSet) -> Result<Vec<bool>> {
    let plane = match spec.side_set {
        SideSet::PlaneSide => spec.plane_slice(pred, lm)?,
        SideSet::WholeLabel => None,
    };
    let [nx, ny, _] = pred.dims();
    let stride = nx * ny;
    let mask: Vec<bool> = pred
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &l)| {
            l == spec.label
                && plane.is_none_or(|s| {
                    let j = ((idx % stride) / nx) as i64;
                    match spec.surface {
                        SurfaceKind::Posterior => j >= s,
                        SurfaceKind::Anterior => j <= s,
                        SurfaceKind::Lateral => true,
                    }
                })
        })
        .collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyPrediction(spec.name()));
    }
    Ok(mask)
}

/// Exact nearest-voxel search over a mask by growing index-space shells.
struct NearestVoxel<'a> {
    vol: &'a LabelVolume,
    mask: &'a [bool],
    /// Lower bound on the world distance of one index step in any direction.
    min_step: f64,
}

impl<'a> NearestVoxel<'a> {
    fn new(vol: &'a LabelVolume, mask: &'a [bool]) -> Self {
        let a = vol.affine();
        let lin = Matrix3::from_fn(|r, c| a.linear(r, c));
        let min_step = lin.singular_values().min();
        NearestVoxel { vol, mask, min_step }
    }

    fn distance(&self, q: Point3) -> f64 {
        let dims = self.vol.dims();
        let c = self.vol.world_to_voxel(q);
        let centre = [0, 1, 2].map(|a| (c[a].round() as i64).clamp(0, dims[a] as i64 - 1));
        let max_r = dims.iter().map(|&d| d as i64).max().unwrap_or(0);
        // Any voxel in shell r is at least (r - offset) index steps from q.
        let offset = (0..3).map(|a| (c[a] - centre[a] as f64).abs()).fold(0.0, f64::max);
        let mut best = f64::INFINITY;
        for r in 0..=max_r {
            if best.is_finite() && ((r as f64 - offset) * self.min_step) > best {
                break;
            }
            self.visit_shell(centre, r, dims, |idx| {
                let [i, j, k] = self.vol.coords(idx);
                let p = self.vol.voxel_center(i, j, k);
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                if d < best {
                    best = d;
                }
            });
        }
        best
    }

    fn visit_shell(&self, c: [i64; 3], r: i64, dims: [usize; 3], mut f: impl FnMut(usize)) {
        let lo = |a: usize| (c[a] - r).max(0);
        let hi = |a: usize| (c[a] + r).min(dims[a] as i64 - 1);
        let mut visit = |i: i64, j: i64, k: i64| {
            let idx = self.vol.index(i as usize, j as usize, k as usize);
            if self.mask[idx] {
                f(idx);
            }
        };
        for k in lo(2)..=hi(2) {
            for j in lo(1)..=hi(1) {
                if (k - c[2]).abs() == r || (j - c[1]).abs() == r {
                    for i in lo(0)..=hi(0) {
                        visit(i, j, k);
                    }
                } else {
                    if c[0] - r >= 0 {
                        visit(c[0] - r, j, k);
                    }
                    if c[0] + r < dims[0] as i64 {
                        visit(c[0] + r, j, k);
                    }
                }
            }
        }
    }
}

/// Mean over surface points of the distance to the closest masked voxel
/// centre of `vol`.
pub fn mean_nearest_distance(surface: &[Point3], vol: &LabelVolume, mask: &[bool]) -> Result<f64> {
    if surface.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyInput);
    }
    let search = NearestVoxel::new(vol, mask);
    let total: f64 = surface.iter().map(|&q| search.distance(q)).sum();
    Ok(total / surface.len() as f64)
}

/// One-way surface distance from the reference boundary to the prediction.
/// Undefined (an error) when either set is empty. Expects canonical volumes.
pub fn pasd(gt: &LabelVolume, pred: &LabelVolume, spec: &BoundarySpec, lm: &LandmarkSet) -> Result<f64> {
    pred.same_grid(gt)?;
    let surface = extract_protocol_surface(gt, spec, lm)?;
    let mask = predicted_side_set(pred, spec, lm)?;
    mean_nearest_distance(&surface, pred, &mask)
}
