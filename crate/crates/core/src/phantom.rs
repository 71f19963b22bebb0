//! Seeded synthetic 26-label phantoms whose landmarks satisfy every
//! refinement rule, plus controlled degradations of them.
//!
//! The layout is drawn on a 96-voxel reference grid and scaled per axis to the
//! requested dims. Lateral positions are offsets `u` from the midline column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::labels::{self, fine, landmark, LandmarkSet, LANDMARKS};
use crate::refine::{build_midsagittal_plane, components_2d, landmark_slice, separator_line, SeparatorMode, Side};
use crate::volume::{Affine, LabelVolume};

const REFERENCE: f64 = 96.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub seed: u64,
    /// Randomize positions and internal boundaries from the seed.
    pub jitter: bool,
    /// Extend the lateral putamen this many slices anterior to its landmark.
    /// Any value above zero makes the phantom inconsistent.
    pub putamen_anterior_overhang: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [96; 3],
            spacing: 0.7,
            seed: 0,
            jitter: true,
            putamen_anterior_overhang: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub labels: LabelVolume,
    pub landmarks: LandmarkSet,
}

impl Phantom {
    /// SHA-256 over dims, label payload and landmark coordinates.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in self.labels.dims() {
            h.update((d as u64).to_le_bytes());
        }
        for v in self.labels.data() {
            h.update(v.to_le_bytes());
        }
        for (id, p) in self.landmarks.iter() {
            h.update([id]);
            for c in p {
                h.update(c.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Per-axis scaling from the reference grid.
struct Scale([f64; 3]);

impl Scale {
    fn at(&self, axis: usize, v: f64) -> i64 {
        (v * self.0[axis]).round() as i64
    }

    /// Inclusive reference range to an inclusive scaled range.
    fn span(&self, axis: usize, lo: i64, hi: i64) -> (i64, i64) {
        (self.at(axis, lo as f64), self.at(axis, (hi + 1) as f64) - 1)
    }
}

/// Integer translation of one structure, in scaled voxels. `u` moves a
/// bilateral structure away from the midline.
#[derive(Debug, Clone, Copy)]
struct Shift {
    u: i64,
    j: i64,
    k: i64,
}

struct Canvas {
    vol: LabelVolume,
    centre: i64,
}

impl Canvas {
    fn put(&mut self, i: i64, j: i64, k: i64, label: u16) -> Result<()> {
        let [nx, ny, nz] = self.vol.dims();
        if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
            return Err(Error::PhantomOutOfBounds(label));
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        let existing = self.vol.get(i, j, k);
        if existing != 0 && existing != label {
            return Err(Error::PhantomOverlap(existing, label));
        }
        self.vol.set(i, j, k, label);
        Ok(())
    }

    fn column(&self, side: Side, u: i64) -> i64 {
        self.centre + side.pick(-u, u)
    }

    /// Fill a lateral box on one side; `label` may depend on `(u, j, k)`.
    fn lateral_box(
        &mut self,
        side: Side,
        u: (i64, i64),
        j: (i64, i64),
        k: (i64, i64),
        mut label: impl FnMut(i64, i64, i64) -> u16,
    ) -> Result<()> {
        for kk in k.0..=k.1 {
            for jj in j.0..=j.1 {
                for uu in u.0..=u.1 {
                    let l = label(uu, jj, kk);
                    self.put(self.column(side, uu), jj, kk, l)?;
                }
            }
        }
        Ok(())
    }

    fn midline_box(&mut self, half_width: i64, j: (i64, i64), k: (i64, i64), label: u16) -> Result<()> {
        for kk in k.0..=k.1 {
            for jj in j.0..=j.1 {
                for i in (self.centre - half_width)..=(self.centre + half_width) {
                    self.put(i, jj, kk, label)?;
                }
            }
        }
        Ok(())
    }

    fn lateral_ellipsoid(&mut self, side: Side, centre: [f64; 3], radii: [f64; 3], label: u16) -> Result<()> {
        let lo = |a: usize| (centre[a] - radii[a]).floor() as i64;
        let hi = |a: usize| (centre[a] + radii[a]).ceil() as i64;
        for kk in lo(2)..=hi(2) {
            for jj in lo(1)..=hi(1) {
                for uu in lo(0)..=hi(0) {
                    let q = [uu as f64, jj as f64, kk as f64];
                    let r2: f64 = (0..3).map(|a| ((q[a] - centre[a]) / radii[a]).powi(2)).sum();
                    if r2 <= 1.0 {
                        self.put(self.column(side, uu), jj, kk, label)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generate a phantom and verify it against every rule.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let phantom = build(spec)?;
    check_phantom(&phantom.labels, &phantom.landmarks)?;
    Ok(phantom)
}

fn build(spec: &PhantomSpec) -> Result<Phantom> {
    let dims = spec.dims;
    if dims.iter().any(|&d| d < 32) || !(spec.spacing > 0.0) {
        return Err(Error::PhantomInconsistent(format!(
            "dims {dims:?} / spacing {} too small for the layout",
            spec.spacing
        )));
    }
    let h = spec.spacing;
    let origin = [
        -h * (dims[0] - 1) as f64 / 2.0,
        -h * (dims[1] - 1) as f64 / 2.0,
        -h * (dims[2] - 1) as f64 / 2.0,
    ];
    let affine = Affine::diagonal([h; 3], origin)?;
    let s = Scale([
        dims[0] as f64 / REFERENCE,
        dims[1] as f64 / REFERENCE,
        dims[2] as f64 / REFERENCE,
    ]);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |lo: i64, hi: i64| if spec.jitter { rng.random_range(lo..=hi) } else { (lo + hi) / 2 };

    let c = s.at(0, draw(45, 51) as f64);
    let j1 = draw(59, 61);
    let j7 = draw(51, 53);
    let j11 = draw(38, 42);
    let j13 = draw(26, 28);
    let sep_base = draw(0, 1);
    let sep_slope = draw(-1, 1);
    let mut shift = |midline: bool| Shift {
        u: if midline { 0 } else { draw(-1, 1) },
        j: draw(-1, 1),
        k: draw(-1, 1),
    };
    let sh_csf = shift(true);
    let sh_v3 = shift(true);
    let sh_v4 = shift(true);
    let sh_bs = shift(true);
    let bilateral: Vec<[Shift; 8]> = (0..2)
        .map(|_| {
            [
                shift(false), // VDC
                shift(false), // TH
                shift(false), // LV/IH
                shift(false), // CAU
                shift(false), // HF
                shift(false), // AMY
                shift(false), // GP
                shift(false), // NAcc/Put
            ]
        })
        .collect();

    let mut canvas = Canvas {
        vol: LabelVolume::filled(dims, [h; 3], affine, 0)?,
        centre: c,
    };
    let mut lm = LandmarkSet::new();
    let world = |i: f64, j: f64, k: f64| affine.voxel_to_world([i, j, k]);
    let off = |r: (i64, i64), t: i64| (r.0 + t, r.1 + t);

    // Midline structures.
    let w1 = s.at(0, 1.0).max(1);
    canvas.midline_box(w1, off(s.span(1, 58, 64), sh_csf.j), off(s.span(2, 62, 70), sh_csf.k), fine::CSF)?;
    let v3_j = off(s.span(1, 38, 50), sh_v3.j);
    let v3_k = off(s.span(2, 38, 50), sh_v3.k);
    canvas.midline_box(w1, v3_j, v3_k, fine::V3)?;
    lm.insert(landmark::V3_FIRST, world(c as f64, v3_j.1 as f64, s.at(2, 44.0) as f64 + sh_v3.k as f64))?;
    canvas.midline_box(s.at(0, 2.0).max(1), off(s.span(1, 14, 20), sh_v4.j), off(s.span(2, 20, 28), sh_v4.k), fine::V4)?;
    canvas.midline_box(
        s.at(0, 4.0).max(2),
        off(s.span(1, 24, 34), sh_bs.j),
        off(s.span(2, 4, 27), sh_bs.k),
        fine::BRAINSTEM,
    )?;

    lm.insert(landmark::AC, world(c as f64, s.at(1, 46.0) as f64, s.at(2, 44.0) as f64))?;
    lm.insert(landmark::PC, world(c as f64, s.at(1, 30.0) as f64, s.at(2, 44.0) as f64))?;
    lm.insert(landmark::PPF, world(c as f64, s.at(1, 36.0) as f64, s.at(2, 20.0) as f64))?;

    for (n, side) in Side::BOTH.into_iter().enumerate() {
        let [sh_vdc, sh_th, sh_lv, sh_cau, sh_hf, sh_amy, sh_gp, sh_np] = bilateral[n];
        let col = |u: f64| (c as f64) + side.pick(-u, u);

        // Ventral diencephalon, split at the mammillary slice.
        let j11s = s.at(1, j11 as f64) + sh_vdc.j;
        canvas.lateral_box(
            side,
            off(s.span(0, 3, 7), sh_vdc.u),
            off(s.span(1, 34, 46), sh_vdc.j),
            off(s.span(2, 30, 35), sh_vdc.k),
            |_, j, _| side.fine(if j > j11s { fine::VDC_A_L } else { fine::VDC_P_L }),
        )?;
        let u_mb = (s.at(0, 5.0) + sh_vdc.u) as f64;
        lm.insert(
            side.pick(landmark::MB_L, landmark::MB_R),
            world(col(u_mb), j11s as f64, (s.at(2, 32.0) + sh_vdc.k) as f64),
        )?;

        let ell = |centre: [f64; 3], t: Shift| {
            [
                centre[0] * s.0[0] + t.u as f64,
                centre[1] * s.0[1] + t.j as f64,
                centre[2] * s.0[2] + t.k as f64,
            ]
        };
        let radii = |r: [f64; 3]| [r[0] * s.0[0], r[1] * s.0[1], r[2] * s.0[2]];
        canvas.lateral_ellipsoid(side, ell([7.0, 30.0, 46.0], sh_th), radii([3.0, 5.0, 5.0]), side.fine(fine::TH_L))?;

        // Lateral ventricle: body, connectors down to the inferior horn tube.
        let lv = side.fine(fine::LV_L);
        let ih = side.fine(fine::IH_L);
        let j13s = s.at(1, j13 as f64) + sh_lv.j;
        let back = s.at(1, 22.0) + sh_lv.j;
        let horn_u = off(s.span(0, 13, 16), sh_lv.u);
        let top_k = off(s.span(2, 56, 60), sh_lv.k);
        canvas.lateral_box(side, off(s.span(0, 3, 6), sh_lv.u), off(s.span(1, 22, 66), sh_lv.j), top_k, |_, _, _| lv)?;
        canvas.lateral_box(side, (s.at(0, 3.0) + sh_lv.u, horn_u.1), (back, j13s), top_k, |_, _, _| lv)?;
        canvas.lateral_box(side, horn_u, (back, j13s), (s.at(2, 18.0) + sh_lv.k, top_k.1), |_, _, _| lv)?;
        canvas.lateral_box(
            side,
            horn_u,
            (j13s + 1, s.at(1, 43.0) - 1 + sh_lv.j),
            off(s.span(2, 18, 23), sh_lv.k),
            |_, _, _| ih,
        )?;
        lm.insert(
            side.pick(landmark::IH_FIRST_L, landmark::IH_FIRST_R),
            world(
                col((s.at(0, 14.0) + sh_lv.u) as f64),
                j13s as f64,
                (s.at(2, 20.0) + sh_lv.k) as f64,
            ),
        )?;

        canvas.lateral_box(
            side,
            off(s.span(0, 9, 14), sh_cau.u),
            off(s.span(1, 44, 64), sh_cau.j),
            off(s.span(2, 56, 66), sh_cau.k),
            |_, _, _| side.fine(fine::CAU_L),
        )?;
        canvas.lateral_box(
            side,
            off(s.span(0, 19, 24), sh_hf.u),
            off(s.span(1, 22, 40), sh_hf.j),
            off(s.span(2, 12, 22), sh_hf.k),
            |_, _, _| side.fine(fine::HF_L),
        )?;
        canvas.lateral_ellipsoid(side, ell([20.0, 50.0, 18.0], sh_amy), radii([3.0, 4.0, 4.0]), side.fine(fine::AMY_L))?;
        canvas.lateral_box(
            side,
            off(s.span(0, 12, 15), sh_gp.u),
            off(s.span(1, 38, 44), sh_gp.j),
            off(s.span(2, 38, 46), sh_gp.k),
            |_, _, _| side.fine(fine::GP_L),
        )?;

        // NAcc/putamen complex. Medial of the separator: NAcc from the
        // NAcc-last slice forward, putamen behind it. Lateral: putamen up to
        // the putamen-first slice, NAcc in front of it.
        let t = sh_np;
        let j1s = s.at(1, j1 as f64) + t.j;
        let j7s = s.at(1, j7 as f64) + t.j;
        let j5s = j7s;
        let j3s = if (j1s - j5s) % 2 != 0 { j1s } else { j1s - 1 };
        let sep_post = ((14.5 + sep_base as f64) * s.0[0]).floor() + 0.5 + t.u as f64;
        let sep_ant = sep_post + (sep_slope as f64 * s.0[0]).round();
        let sep_at = |j: i64| {
            let jc = j.clamp(j5s, j3s);
            sep_post + (sep_ant - sep_post) * (jc - j5s) as f64 / (j3s - j5s) as f64
        };
        let nacc = side.fine(fine::NACC_L);
        let put = side.fine(fine::PUT_L);
        let overhang = spec.putamen_anterior_overhang as i64;
        canvas.lateral_box(
            side,
            off(s.span(0, 8, 24), t.u),
            off(s.span(1, 48, 66), t.j),
            off(s.span(2, 40, 52), t.k),
            |u, j, _| {
                if (u as f64) < sep_at(j) {
                    if j >= j7s {
                        nacc
                    } else {
                        put
                    }
                } else if j <= j1s + overhang {
                    put
                } else {
                    nacc
                }
            },
        )?;
        let kc = (s.at(2, 46.0) + t.k) as f64;
        let ids = |l: u8, r: u8| side.pick(l, r);
        lm.insert(ids(landmark::CONTACT_POST_L, landmark::CONTACT_POST_R), world(col(sep_post), j5s as f64, kc))?;
        lm.insert(ids(landmark::CONTACT_ANT_L, landmark::CONTACT_ANT_R), world(col(sep_ant), j3s as f64, kc))?;
        lm.insert(
            ids(landmark::PUT_FIRST_L, landmark::PUT_FIRST_R),
            world(col((s.at(0, 20.0) + t.u) as f64), j1s as f64, kc),
        )?;
        lm.insert(
            ids(landmark::NACC_LAST_L, landmark::NACC_LAST_R),
            world(col((s.at(0, 10.0) + t.u) as f64), j7s as f64, kc),
        )?;
    }

    Ok(Phantom {
        labels: canvas.vol,
        landmarks: lm,
    })
}

fn inconsistent(msg: String) -> Error {
    Error::PhantomInconsistent(msg)
}

/// Verify that a 26-label volume and its landmarks obey every rule: bilateral
/// labels on their own side, truncations, separator, VDC split, a single
/// inferior-horn component per slice anterior to its plane, and a clean
/// landmark validation report. Expects a canonical (RAS-aligned) volume.
pub fn check_phantom(vol26: &LabelVolume, lm: &LandmarkSet) -> Result<()> {
    if let Some(v) = labels::validate_landmarks(lm, vol26).first() {
        return Err(inconsistent(v.to_string()));
    }
    let plane = build_midsagittal_plane(lm)?;
    let slice = |id: u8| lm.require(id).map(|p| landmark_slice(vol26, p));
    let v3 = slice(landmark::V3_FIRST)?;
    let mut per_side = Vec::new();
    for side in Side::BOTH {
        let id = |l: u8, r: u8| side.pick(l, r);
        per_side.push((
            side,
            slice(id(landmark::PUT_FIRST_L, landmark::PUT_FIRST_R))?,
            slice(id(landmark::NACC_LAST_L, landmark::NACC_LAST_R))?,
            slice(id(landmark::MB_L, landmark::MB_R))?,
            slice(id(landmark::IH_FIRST_L, landmark::IH_FIRST_R))?,
            separator_line(
                vol26,
                lm.require(id(landmark::CONTACT_ANT_L, landmark::CONTACT_ANT_R))?,
                lm.require(id(landmark::CONTACT_POST_L, landmark::CONTACT_POST_R))?,
                SeparatorMode::Linear,
            ),
        ));
    }

    for idx in 0..vol26.len() {
        let label = vol26.data()[idx];
        if label == 0 {
            continue;
        }
        let Some(info) = labels::fine_label(label) else {
            return Err(inconsistent(format!("label {label} outside the fine taxonomy")));
        };
        let [i, j, k] = vol26.coords(idx);
        let j = j as i64;
        let p = vol26.voxel_center(i, j as usize, k);
        if label == fine::V3 && j > v3 {
            return Err(inconsistent(format!("third ventricle anterior to its first appearance at slice {j}")));
        }
        let side = match info.laterality {
            labels::Laterality::Midline => continue,
            labels::Laterality::Left => Side::Left,
            labels::Laterality::Right => Side::Right,
        };
        if plane.is_nonnegative_side(p) != (side == Side::Right) {
            return Err(inconsistent(format!("{} voxel on the wrong side of the midline", info.name)));
        }
        let (_, j1, j7, j11, j13, sep) = per_side[side.pick(0, 1)];
        let base = label - side.pick(0, 1);
        let medial = {
            let s = sep.x_at(j);
            side.pick(p[0] > s, p[0] < s)
        };
        let ok = match base {
            fine::PUT_L => j <= j1 && (!medial || j < j7),
            fine::NACC_L => j >= j7 && (medial || j > j1),
            fine::VDC_A_L => j > j11,
            fine::VDC_P_L => j <= j11,
            fine::IH_L => j > j13,
            _ => true,
        };
        if !ok {
            return Err(inconsistent(format!("{} voxel violates its rule at slice {j}", info.name)));
        }
    }

    // One inferior-horn component per slice, and it is the lowest of the
    // ventricle components there.
    let [nx, ny, nz] = vol26.dims();
    for side in Side::BOTH {
        let lv = side.fine(fine::LV_L);
        let ih = side.fine(fine::IH_L);
        for j in 0..ny {
            let mut key = vec![0u16; nx * nz];
            for k in 0..nz {
                for i in 0..nx {
                    let l = vol26.get(i, j, k);
                    if l == lv || l == ih {
                        key[i + nx * k] = l;
                    }
                }
            }
            let (comp, count) = components_2d(&key, nx, nz);
            let mut z = vec![(0.0, 0usize, false); count];
            for (cell, &cid) in comp.iter().enumerate() {
                if cid != crate::refine::NO_COMPONENT {
                    let e = &mut z[cid as usize];
                    e.0 += (cell / nx) as f64;
                    e.1 += 1;
                    e.2 = key[cell] == ih;
                }
            }
            let horns: Vec<f64> = z.iter().filter(|e| e.2).map(|e| e.0 / e.1 as f64).collect();
            if horns.len() > 1 {
                return Err(inconsistent(format!("inferior horn splits at slice {j}")));
            }
            if let Some(&hz) = horns.first() {
                if z.iter().any(|e| !e.2 && e.0 / e.1 as f64 <= hz) {
                    return Err(inconsistent(format!("inferior horn is not the lowest component at slice {j}")));
                }
            }
        }
    }
    Ok(())
}

/// Perturbation applied by [`degrade_phantom`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Degradation {
    None,
    /// Each interface voxel takes a neighbour's label with this probability.
    BoundaryNoise { probability: f64 },
    /// Peel this many layers of interface voxels to background.
    Erosion { iterations: usize },
    /// Gaussian noise of this standard deviation (mm) on every landmark axis.
    LandmarkJitter { sigma_mm: f64 },
}

/// Fuse a 26-label volume to 12 labels and apply one perturbation.
///
/// Landmark jitter draws one standard normal per landmark axis in catalog
/// order, so runs with the same seed and different sigma share their noise.
pub fn degrade_phantom(
    vol26: &LabelVolume,
    lm: &LandmarkSet,
    mode: Degradation,
    seed: u64,
) -> Result<(LabelVolume, LandmarkSet)> {
    let mut vol12 = labels::fuse_labels(vol26)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lm = lm.clone();
    match mode {
        Degradation::None => {}
        Degradation::LandmarkJitter { sigma_mm } => {
            let mut jittered = LandmarkSet::new();
            for info in &LANDMARKS {
                let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                if let Some(p) = lm.get(info.id) {
                    jittered.insert(info.id, [p[0] + sigma_mm * z[0], p[1] + sigma_mm * z[1], p[2] + sigma_mm * z[2]])?;
                }
            }
            lm = jittered;
        }
        Degradation::BoundaryNoise { probability } => {
            let src = vol12.clone();
            for idx in 0..src.len() {
                let others = differing_neighbours(&src, idx);
                if others.is_empty() {
                    continue;
                }
                if rng.random::<f64>() < probability {
                    let pick = others[rng.random_range(0..others.len())];
                    vol12.data_mut()[idx] = pick;
                }
            }
        }
        Degradation::Erosion { iterations } => {
            for _ in 0..iterations {
                let src = vol12.clone();
                for idx in 0..src.len() {
                    if src.data()[idx] != 0 && !differing_neighbours(&src, idx).is_empty() {
                        vol12.data_mut()[idx] = 0;
                    }
                }
            }
        }
    }
    Ok((vol12, lm))
}

/// Labels of 6-neighbours that differ from the voxel's own label.
fn differing_neighbours(vol: &LabelVolume, idx: usize) -> Vec<u16> {
    let [i, j, k] = vol.coords(idx);
    let dims = vol.dims();
    let own = vol.data()[idx];
    let mut out = Vec::new();
    let p = [i, j, k];
    for axis in 0..3 {
        for step in [-1i64, 1] {
            let q = p[axis] as i64 + step;
            if q < 0 || q >= dims[axis] as i64 {
                continue;
            }
            let mut n = p;
            n[axis] = q as usize;
            let l = vol.get(n[0], n[1], n[2]);
            if l != own && !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}
