//! Volumetric images: dense 3D grids with a voxel-to-world affine.
//!
//! Data is stored with the first index varying fastest, matching the NIfTI
//! on-disk order. World coordinates are millimetres.

mod nifti;
mod orient;

pub use nifti::{
    read_label_volume, read_scalar_volume, read_volume, read_volume_typed, write_volume, write_volume_as, AnyVolume, Datatype, NiftiPayload,
};
pub use orient::{reorient_from_canonical, reorient_to_canonical, CanonicalFrame};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Homogeneous voxel-to-world transform with an invertible linear part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct Affine {
    matrix: Matrix4<f64>,
    inverse_linear: Matrix3<f64>,
}

impl Affine {
    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        let matrix = Matrix4::from_fn(|r, c| rows[r][c]);
        let linear: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let det = linear.determinant();
        if !det.is_finite() || det.abs() <= 1e-12 {
            return Err(Error::SingularAffine(det));
        }
        let inverse_linear = linear.try_inverse().ok_or(Error::SingularAffine(det))?;
        Ok(Affine {
            matrix,
            inverse_linear,
        })
    }

    pub fn diagonal(spacing: [f64; 3], origin: Point3) -> Result<Self> {
        Self::from_rows([
            [spacing[0], 0.0, 0.0, origin[0]],
            [0.0, spacing[1], 0.0, origin[1]],
            [0.0, 0.0, spacing[2], origin[2]],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0; 3], [0.0; 3]).expect("identity is invertible")
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.matrix[(r, c)];
            }
        }
        out
    }

    /// Linear part entry: world axis `row`, voxel axis `col`.
    pub fn linear(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    pub fn translation(&self) -> Point3 {
        [
            self.matrix[(0, 3)],
            self.matrix[(1, 3)],
            self.matrix[(2, 3)],
        ]
    }

    /// World-space step taken by one voxel along `axis`.
    pub fn column(&self, axis: usize) -> Point3 {
        [
            self.matrix[(0, axis)],
            self.matrix[(1, axis)],
            self.matrix[(2, axis)],
        ]
    }

    pub fn voxel_to_world(&self, ijk: Point3) -> Point3 {
        let v = self.matrix * nalgebra::Vector4::new(ijk[0], ijk[1], ijk[2], 1.0);
        [v.x, v.y, v.z]
    }

    pub fn world_to_voxel(&self, xyz: Point3) -> Point3 {
        let t = self.translation();
        let v = self.inverse_linear * Vector3::new(xyz[0] - t[0], xyz[1] - t[1], xyz[2] - t[2]);
        [v.x, v.y, v.z]
    }

    pub fn approx_eq(&self, other: &Affine, tol: f64) -> bool {
        (self.matrix - other.matrix).amax() <= tol
    }
}

impl TryFrom<[[f64; 4]; 4]> for Affine {
    type Error = Error;
    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self> {
        Affine::from_rows(rows)
    }
}

impl From<Affine> for [[f64; 4]; 4] {
    fn from(a: Affine) -> Self {
        a.rows()
    }
}

/// Dense 3D grid with geometry. `LabelVolume` and `ScalarVolume` are the two
/// instantiations used throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: Affine,
    data: Vec<T>,
}

pub type LabelVolume = Volume<u16>;
pub type ScalarVolume = Volume<f64>;

impl<T: Copy> Volume<T> {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: Affine, data: Vec<T>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidHeader(format!("zero dimension in {dims:?}")));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidHeader(format!("non-positive spacing {spacing:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::DataLength {
                dims,
                found: data.len(),
            });
        }
        Ok(Volume {
            dims,
            spacing,
            affine,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], affine: Affine, value: T) -> Result<Self> {
        Self::new(dims, spacing, affine, vec![value; dims[0] * dims[1] * dims[2]])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn voxel_to_world(&self, ijk: Point3) -> Point3 {
        self.affine.voxel_to_world(ijk)
    }

    pub fn world_to_voxel(&self, xyz: Point3) -> Point3 {
        self.affine.world_to_voxel(xyz)
    }

    /// World position of the centre of voxel `(i, j, k)`.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.affine.voxel_to_world([i as f64, j as f64, k as f64])
    }

    /// Same geometry, new payload.
    pub fn with_data<U: Copy>(&self, data: Vec<U>) -> Result<Volume<U>> {
        Volume::new(self.dims, self.spacing, self.affine, data)
    }

    pub fn same_grid<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(self.dims, other.dims));
        }
        if !self.affine.approx_eq(&other.affine, 1e-6) {
            return Err(Error::Misaligned);
        }
        Ok(())
    }
}

/// Round half away from zero. Used wherever a world position is snapped to a
/// voxel index.
#[inline]
pub fn snap_index(continuous: f64) -> i64 {
    continuous.round() as i64
}

/// Per-volume z-score normalization over `mask` (nonzero voxels), or over the
/// whole volume when no mask is given. Population standard deviation; voxels
/// outside the mask are set to zero.
pub fn zscore_normalize(vol: &ScalarVolume, mask: Option<&LabelVolume>) -> Result<ScalarVolume> {
    if let Some(m) = mask {
        if m.dims() != vol.dims() {
            return Err(Error::ShapeMismatch(vol.dims(), m.dims()));
        }
    }
    let inside = |idx: usize| mask.is_none_or(|m| m.data()[idx] != 0);
    let selected: Vec<f64> = (0..vol.len())
        .filter(|&i| inside(i))
        .map(|i| vol.data()[i])
        .collect();
    if selected.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: selected.len(),
        });
    }
    if selected.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidHeader("non-finite intensity".into()));
    }
    let n = selected.len() as f64;
    let mean = selected.iter().sum::<f64>() / n;
    let var = selected.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) || sd <= 1e-300 {
        return Err(Error::ZeroVariance);
    }
    let out = (0..vol.len())
        .map(|i| {
            if inside(i) {
                (vol.data()[i] - mean) / sd
            } else {
                0.0
            }
        })
        .collect();
    vol.with_data(out)
}
