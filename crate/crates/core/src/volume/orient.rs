//! Nearest-axis reorientation into the RAS frame (+x right, +y anterior,
//! +z superior), so that "anterior" and "left" become index directions.

use serde::{Deserialize, Serialize};

use super::{Affine, Volume};
use crate::error::{Error, Result};

/// Axis permutation and flips taking a stored volume to RAS.
///
/// Output axis `a` reads input axis `source_axis[a]`, reversed when `flip[a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalFrame {
    pub source_axis: [usize; 3],
    pub flip: [bool; 3],
}

impl CanonicalFrame {
    pub const IDENTITY: CanonicalFrame = CanonicalFrame {
        source_axis: [0, 1, 2],
        flip: [false; 3],
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn inverse(&self) -> CanonicalFrame {
        let mut source_axis = [0; 3];
        let mut flip = [false; 3];
        for a in 0..3 {
            let c = self.source_axis[a];
            source_axis[c] = a;
            flip[c] = self.flip[a];
        }
        CanonicalFrame { source_axis, flip }
    }

    /// Frame taking a volume with this affine to RAS.
    pub fn from_affine(affine: &Affine) -> Result<CanonicalFrame> {
        let mut dominant = [0usize; 3];
        for (c, d) in dominant.iter_mut().enumerate() {
            let col = affine.column(c);
            let mut best = 0;
            for r in 1..3 {
                if col[r].abs() > col[best].abs() {
                    best = r;
                }
            }
            *d = best;
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                if dominant[a] == dominant[b] {
                    return Err(Error::AmbiguousOrientation(a, b));
                }
            }
        }
        let mut source_axis = [0; 3];
        let mut flip = [false; 3];
        for c in 0..3 {
            let a = dominant[c];
            source_axis[a] = c;
            flip[a] = affine.linear(a, c) < 0.0;
        }
        Ok(CanonicalFrame { source_axis, flip })
    }

    /// Apply this frame to a volume. Physical positions of voxel centres are
    /// preserved; only storage order and the affine change.
    pub fn apply<T: Copy>(&self, vol: &Volume<T>) -> Result<Volume<T>> {
        if self.is_identity() {
            return Ok(vol.clone());
        }
        let old_dims = vol.dims();
        let new_dims = [
            old_dims[self.source_axis[0]],
            old_dims[self.source_axis[1]],
            old_dims[self.source_axis[2]],
        ];
        let old_spacing = vol.spacing();
        let spacing = [
            old_spacing[self.source_axis[0]],
            old_spacing[self.source_axis[1]],
            old_spacing[self.source_axis[2]],
        ];

        let old = vol.affine();
        let mut rows = [[0.0; 4]; 4];
        rows[3][3] = 1.0;
        let mut t = old.translation();
        for a in 0..3 {
            let c = self.source_axis[a];
            let col = old.column(c);
            let sign = if self.flip[a] { -1.0 } else { 1.0 };
            for r in 0..3 {
                rows[r][a] = sign * col[r];
            }
            if self.flip[a] {
                let n = (old_dims[c] - 1) as f64;
                for r in 0..3 {
                    t[r] += n * col[r];
                }
            }
        }
        for r in 0..3 {
            rows[r][3] = t[r];
        }
        let affine = Affine::from_rows(rows)?;

        // Old-index stride contributed by each new axis.
        let old_strides = [1, old_dims[0], old_dims[0] * old_dims[1]];
        let mut base = 0isize;
        let mut step = [0isize; 3];
        for a in 0..3 {
            let c = self.source_axis[a];
            let stride = old_strides[c] as isize;
            if self.flip[a] {
                base += (old_dims[c] as isize - 1) * stride;
                step[a] = -stride;
            } else {
                step[a] = stride;
            }
        }
        let src = vol.data();
        let mut data = Vec::with_capacity(src.len());
        for p2 in 0..new_dims[2] {
            let o2 = base + p2 as isize * step[2];
            for p1 in 0..new_dims[1] {
                let o1 = o2 + p1 as isize * step[1];
                for p0 in 0..new_dims[0] {
                    data.push(src[(o1 + p0 as isize * step[0]) as usize]);
                }
            }
        }
        Volume::new(new_dims, spacing, affine, data)
    }
}

/// Reorient into RAS, returning the frame needed to undo it.
pub fn reorient_to_canonical<T: Copy>(vol: &Volume<T>) -> Result<(Volume<T>, CanonicalFrame)> {
    let frame = CanonicalFrame::from_affine(vol.affine())?;
    Ok((frame.apply(vol)?, frame))
}

/// Undo [`reorient_to_canonical`].
pub fn reorient_from_canonical<T: Copy>(vol: &Volume<T>, frame: &CanonicalFrame) -> Result<Volume<T>> {
    frame.inverse().apply(vol)
}
