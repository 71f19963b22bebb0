//! Single-file NIfTI-1 reader/writer (plain or gzip-compressed).
//!
//! Only the fields needed for 3D label and intensity images are interpreted.
//! Endianness is detected from `sizeof_hdr`; gzip is detected from the
//! stream's magic bytes, not the file extension.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{Affine, LabelVolume, ScalarVolume, Volume};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const DEFAULT_VOX_OFFSET: usize = 352;

mod offset {
    pub const SIZEOF_HDR: usize = 0;
    pub const REGULAR: usize = 38;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// Supported on-disk element types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Uint16,
}

impl Datatype {
    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            512 => Datatype::Uint16,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Uint16 => 512,
        }
    }

    fn size(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 | Datatype::Uint16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn array<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[at..at + N]);
        if self.endian == Endian::Big {
            b.reverse();
        }
        b
    }
    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.array(at))
    }
    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.array(at))
    }
}

/// A decoded volume: integer datatypes without intensity scaling become label
/// volumes, everything else becomes a scalar volume.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    Label(LabelVolume),
    Scalar(ScalarVolume),
}

impl AnyVolume {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            AnyVolume::Label(v) => v.dims(),
            AnyVolume::Scalar(v) => v.dims(),
        }
    }
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn image_path_for(header_path: &Path) -> PathBuf {
    let s = header_path.to_string_lossy();
    if let Some(stem) = s.strip_suffix(".hdr.gz") {
        PathBuf::from(format!("{stem}.img.gz"))
    } else if let Some(stem) = s.strip_suffix(".hdr") {
        PathBuf::from(format!("{stem}.img"))
    } else {
        header_path.with_extension("img")
    }
}

/// Read a NIfTI-1 volume from disk.
pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    read_volume_typed(path).map(|(v, _)| v)
}

/// Read a volume together with its on-disk element type.
pub fn read_volume_typed(path: impl AsRef<Path>) -> Result<(AnyVolume, Datatype)> {
    let path = path.as_ref();
    let bytes = load_bytes(path)?;
    let pair = bytes.len() >= HEADER_SIZE && bytes[offset::MAGIC..offset::MAGIC + 4] == *b"ni1\0";
    if pair {
        let img = load_bytes(&image_path_for(path))?;
        decode_typed(&bytes, Some(&img))
    } else {
        decode_typed(&bytes, None)
    }
}

/// Read a volume and require integer labels. Float files are accepted when
/// every value is a non-negative integer.
pub fn read_label_volume(path: impl AsRef<Path>) -> Result<LabelVolume> {
    match read_volume(path)? {
        AnyVolume::Label(v) => Ok(v),
        AnyVolume::Scalar(v) => {
            let data = v
                .data()
                .iter()
                .map(|&x| {
                    if x.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&x) {
                        Ok(x as u16)
                    } else {
                        Err(Error::InvalidHeader(format!("value {x} is not a label")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            v.with_data(data)
        }
    }
}

pub fn read_scalar_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    match read_volume(path)? {
        AnyVolume::Scalar(v) => Ok(v),
        AnyVolume::Label(v) => {
            let data = v.data().iter().map(|&x| x as f64).collect();
            v.with_data(data)
        }
    }
}

/// Decode an in-memory header (+ payload when `image` is `None`).
#[cfg(test)]
pub(crate) fn decode(bytes: &[u8], image: Option<&[u8]>) -> Result<AnyVolume> {
    decode_typed(bytes, image).map(|(v, _)| v)
}

fn decode_typed(bytes: &[u8], image: Option<&[u8]>) -> Result<(AnyVolume, Datatype)> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::TruncatedPayload {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let endian = if le == HEADER_SIZE as i32 {
        Endian::Little
    } else if le.swap_bytes() == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(Error::InvalidHeader(format!("sizeof_hdr = {le}")));
    };
    let r = Reader { bytes, endian };

    let magic: [u8; 4] = bytes[offset::MAGIC..offset::MAGIC + 4].try_into().unwrap();
    let single = match &magic {
        b"n+1\0" => true,
        b"ni1\0" => false,
        _ => return Err(Error::BadMagic(magic)),
    };

    let mut dim = [0i16; 8];
    for (n, d) in dim.iter_mut().enumerate() {
        *d = r.i16(offset::DIM + 2 * n);
    }
    if !(1..=7).contains(&dim[0]) {
        return Err(Error::InvalidHeader(format!("dim[0] = {}", dim[0])));
    }
    let mut ndim = dim[0] as usize;
    if dim[1..=ndim].iter().any(|&d| d < 1) {
        return Err(Error::InvalidHeader(format!("non-positive dim in {dim:?}")));
    }
    while ndim > 3 && dim[ndim] == 1 {
        ndim -= 1;
    }
    if ndim != 3 {
        return Err(Error::DimensionCount(ndim));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = Datatype::from_code(r.i16(offset::DATATYPE))?;
    let bitpix = r.i16(offset::BITPIX);
    if bitpix as usize != datatype.size() * 8 {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} inconsistent with datatype {:?}",
            datatype
        )));
    }

    let mut pixdim = [0f32; 8];
    for (n, p) in pixdim.iter_mut().enumerate() {
        *p = r.f32(offset::PIXDIM + 4 * n);
    }
    let mut spacing = [1.0f64; 3];
    for d in 0..3 {
        let p = (pixdim[d + 1] as f64).abs();
        if p.is_finite() && p > 0.0 {
            spacing[d] = p;
        }
    }

    let affine = header_affine(&r, &pixdim, spacing)?;

    let vox_offset = r.f32(offset::VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= 0.0) {
        return Err(Error::InvalidHeader(format!("vox_offset = {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    let (payload, start) = match (single, image) {
        (true, _) => {
            if vox_offset < HEADER_SIZE {
                return Err(Error::InvalidHeader(format!("vox_offset = {vox_offset}")));
            }
            (bytes, vox_offset)
        }
        (false, Some(img)) => (img, vox_offset),
        (false, None) => return Err(Error::InvalidHeader("header/image pair without image".into())),
    };
    let n = dims[0] * dims[1] * dims[2];
    let expected = n * datatype.size();
    let available = payload.len().saturating_sub(start);
    if available < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: available,
        });
    }
    let raw = &payload[start..start + expected];

    let slope = r.f32(offset::SCL_SLOPE) as f64;
    let inter = r.f32(offset::SCL_INTER) as f64;
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);

    let words = Reader {
        bytes: raw,
        endian,
    };
    let int_at = |i: usize| -> i64 {
        match datatype {
            Datatype::Uint8 => raw[i] as i64,
            Datatype::Int16 => i16::from_le_bytes(words.array(2 * i)) as i64,
            Datatype::Uint16 => u16::from_le_bytes(words.array(2 * i)) as i64,
            Datatype::Int32 => i32::from_le_bytes(words.array(4 * i)) as i64,
            Datatype::Float32 => unreachable!("float payloads decode separately"),
        }
    };
    let integer = datatype != Datatype::Float32;
    let labels: Option<Vec<u16>> = if integer && !scaled {
        (0..n).map(|i| u16::try_from(int_at(i)).ok()).collect()
    } else {
        None
    };

    let vol = match labels {
        Some(data) => AnyVolume::Label(Volume::new(dims, spacing, affine, data)?),
        None if integer => {
            let data = (0..n)
                .map(|i| {
                    let v = int_at(i) as f64;
                    if scaled {
                        slope * v + inter
                    } else {
                        v
                    }
                })
                .collect();
            AnyVolume::Scalar(Volume::new(dims, spacing, affine, data)?)
        }
        None => {
            let data = (0..n)
                .map(|i| {
                    let v = f32::from_le_bytes(words.array(4 * i)) as f64;
                    if scaled {
                        slope * v + inter
                    } else {
                        v
                    }
                })
                .collect();
            AnyVolume::Scalar(Volume::new(dims, spacing, affine, data)?)
        }
    };
    Ok((vol, datatype))
}

/// sform if `sform_code > 0`, else qform if `qform_code > 0`, else pixdim scaling.
fn header_affine(r: &Reader<'_>, pixdim: &[f32; 8], spacing: [f64; 3]) -> Result<Affine> {
    let sform_code = r.i16(offset::SFORM_CODE);
    let qform_code = r.i16(offset::QFORM_CODE);
    if sform_code > 0 {
        let mut rows = [[0.0; 4]; 4];
        rows[3][3] = 1.0;
        for (row, out) in rows.iter_mut().take(3).enumerate() {
            for (c, v) in out.iter_mut().enumerate() {
                *v = r.f32(offset::SROW_X + 16 * row + 4 * c) as f64;
            }
        }
        return Affine::from_rows(rows);
    }
    if qform_code > 0 {
        let b = r.f32(offset::QUATERN_B) as f64;
        let c = r.f32(offset::QUATERN_B + 4) as f64;
        let d = r.f32(offset::QUATERN_B + 8) as f64;
        let t = [
            r.f32(offset::QOFFSET_X) as f64,
            r.f32(offset::QOFFSET_X + 4) as f64,
            r.f32(offset::QOFFSET_X + 8) as f64,
        ];
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let rot = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let scale = [spacing[0], spacing[1], spacing[2] * qfac];
        let mut rows = [[0.0; 4]; 4];
        rows[3][3] = 1.0;
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = rot[i][j] * scale[j];
            }
            rows[i][3] = t[i];
        }
        return Affine::from_rows(rows);
    }
    Affine::diagonal(spacing, [0.0; 3])
}

/// Element encoding chosen for writing.
pub trait NiftiPayload {
    fn volume_dims(&self) -> [usize; 3];
    fn volume_spacing(&self) -> [f64; 3];
    fn volume_affine(&self) -> &Affine;
    fn encode(&self) -> (Datatype, Vec<u8>);
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_>;
}

/// Little-endian payload in `datatype`; integer types require every value
/// to be an in-range integer.
fn encode_values(values: impl Iterator<Item = f64>, datatype: Datatype) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for v in values {
        let int = |lo: f64, hi: f64| {
            if v.fract() == 0.0 && (lo..=hi).contains(&v) {
                Ok(v as i64)
            } else {
                Err(Error::InvalidHeader(format!("value {v} not representable as {datatype:?}")))
            }
        };
        match datatype {
            Datatype::Uint8 => out.push(int(0.0, u8::MAX as f64)? as u8),
            Datatype::Int16 => out.extend((int(i16::MIN as f64, i16::MAX as f64)? as i16).to_le_bytes()),
            Datatype::Uint16 => out.extend((int(0.0, u16::MAX as f64)? as u16).to_le_bytes()),
            Datatype::Int32 => out.extend((int(i32::MIN as f64, i32::MAX as f64)? as i32).to_le_bytes()),
            Datatype::Float32 => out.extend((v as f32).to_le_bytes()),
        }
    }
    Ok(out)
}

impl NiftiPayload for LabelVolume {
    fn volume_dims(&self) -> [usize; 3] {
        self.dims()
    }
    fn volume_spacing(&self) -> [f64; 3] {
        self.spacing()
    }
    fn volume_affine(&self) -> &Affine {
        self.affine()
    }
    fn encode(&self) -> (Datatype, Vec<u8>) {
        let max = self.data().iter().copied().max().unwrap_or(0);
        if max < 256 {
            (Datatype::Uint8, self.data().iter().map(|&v| v as u8).collect())
        } else if max <= i16::MAX as u16 {
            let bytes = self.data().iter().flat_map(|&v| (v as i16).to_le_bytes()).collect();
            (Datatype::Int16, bytes)
        } else {
            let bytes = self.data().iter().flat_map(|&v| v.to_le_bytes()).collect();
            (Datatype::Uint16, bytes)
        }
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.data().iter().map(|&v| v as f64))
    }
}

impl NiftiPayload for ScalarVolume {
    fn volume_dims(&self) -> [usize; 3] {
        self.dims()
    }
    fn volume_spacing(&self) -> [f64; 3] {
        self.spacing()
    }
    fn volume_affine(&self) -> &Affine {
        self.affine()
    }
    fn encode(&self) -> (Datatype, Vec<u8>) {
        let bytes = self.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        (Datatype::Float32, bytes)
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.data().iter().copied())
    }
}

impl NiftiPayload for AnyVolume {
    fn volume_dims(&self) -> [usize; 3] {
        self.dims()
    }
    fn volume_spacing(&self) -> [f64; 3] {
        match self {
            AnyVolume::Label(v) => v.spacing(),
            AnyVolume::Scalar(v) => v.spacing(),
        }
    }
    fn volume_affine(&self) -> &Affine {
        match self {
            AnyVolume::Label(v) => v.affine(),
            AnyVolume::Scalar(v) => v.affine(),
        }
    }
    fn encode(&self) -> (Datatype, Vec<u8>) {
        match self {
            AnyVolume::Label(v) => v.encode(),
            AnyVolume::Scalar(v) => v.encode(),
        }
    }
    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            AnyVolume::Label(v) => v.values(),
            AnyVolume::Scalar(v) => v.values(),
        }
    }
}

/// Quaternion parameters `(b, c, d, qfac)` when the affine's linear part is a
/// rotation (possibly improper) times `diag(spacing)`.
fn quaternion_of(affine: &Affine, spacing: [f64; 3]) -> Option<([f64; 3], f64)> {
    let mut r = [[0.0; 3]; 3];
    for c in 0..3 {
        let col = affine.column(c);
        let norm = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
        if (norm - spacing[c]).abs() > 1e-6 * spacing[c].max(1.0) {
            return None;
        }
        for row in 0..3 {
            r[row][c] = col[row] / spacing[c];
        }
    }
    for a in 0..3 {
        for b in (a + 1)..3 {
            let dot: f64 = (0..3).map(|i| r[i][a] * r[i][b]).sum();
            if dot.abs() > 1e-6 {
                return None;
            }
        }
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let qfac = if det < 0.0 {
        for row in r.iter_mut() {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let (r11, r12, r13) = (r[0][0], r[0][1], r[0][2]);
    let (r21, r22, r23) = (r[1][0], r[1][1], r[1][2]);
    let (r31, r32, r33) = (r[2][0], r[2][1], r[2][2]);
    let trace = r11 + r22 + r33 + 1.0;
    let (mut a, mut b, mut c, mut d);
    if trace > 0.5 {
        a = 0.5 * trace.sqrt();
        b = 0.25 * (r32 - r23) / a;
        c = 0.25 * (r13 - r31) / a;
        d = 0.25 * (r21 - r12) / a;
    } else {
        let xd = 1.0 + r11 - (r22 + r33);
        let yd = 1.0 + r22 - (r11 + r33);
        let zd = 1.0 + r33 - (r11 + r22);
        if xd > 1.0 {
            b = 0.5 * xd.sqrt();
            c = 0.25 * (r12 + r21) / b;
            d = 0.25 * (r13 + r31) / b;
            a = 0.25 * (r32 - r23) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd.sqrt();
            b = 0.25 * (r12 + r21) / c;
            d = 0.25 * (r23 + r32) / c;
            a = 0.25 * (r13 - r31) / c;
        } else {
            d = 0.5 * zd.sqrt();
            b = 0.25 * (r13 + r31) / d;
            c = 0.25 * (r23 + r32) / d;
            a = 0.25 * (r21 - r12) / d;
        }
        if a < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
        }
    }
    let _ = a;
    Some(([b, c, d], qfac))
}

pub(crate) fn encode_file<V: NiftiPayload + ?Sized>(vol: &V) -> Vec<u8> {
    let (datatype, payload) = vol.encode();
    assemble(vol, datatype, payload)
}

fn assemble<V: NiftiPayload + ?Sized>(vol: &V, datatype: Datatype, payload: Vec<u8>) -> Vec<u8> {
    let dims = vol.volume_dims();
    let spacing = vol.volume_spacing();
    let affine = vol.volume_affine();

    let mut h = vec![0u8; DEFAULT_VOX_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, at: usize, v: f32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());

    h[offset::SIZEOF_HDR..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[offset::REGULAR] = b'r';
    let dim = [3i16, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (n, d) in dim.iter().enumerate() {
        put_i16(&mut h, offset::DIM + 2 * n, *d);
    }
    put_i16(&mut h, offset::DATATYPE, datatype.code());
    put_i16(&mut h, offset::BITPIX, (datatype.size() * 8) as i16);

    let quat = quaternion_of(affine, spacing);
    let qfac = quat.map_or(1.0, |q| q.1);
    let pixdim = [qfac, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0];
    for (n, p) in pixdim.iter().enumerate() {
        put_f32(&mut h, offset::PIXDIM + 4 * n, *p as f32);
    }
    put_f32(&mut h, offset::VOX_OFFSET, DEFAULT_VOX_OFFSET as f32);
    put_f32(&mut h, offset::SCL_SLOPE, 0.0);
    put_f32(&mut h, offset::SCL_INTER, 0.0);
    h[offset::XYZT_UNITS] = 2 | 8;
    let descrip = b"hoaseg";
    h[offset::DESCRIP..offset::DESCRIP + descrip.len()].copy_from_slice(descrip);

    let t = affine.translation();
    if let Some((bcd, _)) = quat {
        put_i16(&mut h, offset::QFORM_CODE, 1);
        for (n, q) in bcd.iter().enumerate() {
            put_f32(&mut h, offset::QUATERN_B + 4 * n, *q as f32);
        }
        for (n, o) in t.iter().enumerate() {
            put_f32(&mut h, offset::QOFFSET_X + 4 * n, *o as f32);
        }
    }
    put_i16(&mut h, offset::SFORM_CODE, 2);
    let rows = affine.rows();
    for (row, r) in rows.iter().take(3).enumerate() {
        for (c, v) in r.iter().enumerate() {
            put_f32(&mut h, offset::SROW_X + 16 * row + 4 * c, *v as f32);
        }
    }
    h[offset::MAGIC..offset::MAGIC + 4].copy_from_slice(b"n+1\0");
    h.extend_from_slice(&payload);
    h
}

/// Write a volume as single-file NIfTI-1; gzip when the path ends in `.gz`.
/// Labels are stored as uint8 when every label is below 256, else int16.
pub fn write_volume<V: NiftiPayload + ?Sized>(vol: &V, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(&encode_file(vol), path.as_ref())
}

/// Write a volume with an explicit element type.
pub fn write_volume_as<V: NiftiPayload + ?Sized>(vol: &V, datatype: Datatype, path: impl AsRef<Path>) -> Result<()> {
    let payload = encode_values(vol.values(), datatype)?;
    write_bytes(&assemble(vol, datatype, payload), path.as_ref())
}

fn write_bytes(bytes: &[u8], path: &Path) -> Result<()> {
    let gz = path.extension().is_some_and(|e| e == "gz");
    let write = || -> std::io::Result<()> {
        let file = File::create(path)?;
        if gz {
            let mut enc = GzEncoder::new(file, Compression::fast());
            enc.write_all(bytes)?;
            enc.finish()?.sync_all()
        } else {
            let mut file = file;
            file.write_all(bytes)
        }
    };
    write().map_err(|e| Error::io(path, e))
}
