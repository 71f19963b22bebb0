//! Label taxonomies (26 fine, 12 fused), the fusion map, and the 16-landmark
//! catalog with its JSON/CSV file formats.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    Left,
    Right,
    Midline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FineLabel {
    pub id: u16,
    pub name: &'static str,
    pub laterality: Laterality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusedLabel {
    pub id: u16,
    pub name: &'static str,
    pub members: &'static [u16],
}

pub const FINE_COUNT: u16 = 26;
pub const FUSED_COUNT: u16 = 12;

/// Fine label ids by structure.
pub mod fine {
    pub const LV_L: u16 = 1;
    pub const LV_R: u16 = 2;
    pub const CSF: u16 = 3;
    pub const V3: u16 = 4;
    pub const V4: u16 = 5;
    pub const NACC_L: u16 = 6;
    pub const NACC_R: u16 = 7;
    pub const CAU_L: u16 = 8;
    pub const CAU_R: u16 = 9;
    pub const PUT_L: u16 = 10;
    pub const PUT_R: u16 = 11;
    pub const GP_L: u16 = 12;
    pub const GP_R: u16 = 13;
    pub const BRAINSTEM: u16 = 14;
    pub const TH_L: u16 = 15;
    pub const TH_R: u16 = 16;
    pub const IH_L: u16 = 17;
    pub const IH_R: u16 = 18;
    pub const HF_L: u16 = 19;
    pub const HF_R: u16 = 20;
    pub const AMY_L: u16 = 21;
    pub const AMY_R: u16 = 22;
    // Sub-label order of the four VDC parts is an assumption; only these
    // four constants encode it.
    pub const VDC_A_L: u16 = 23;
    pub const VDC_A_R: u16 = 24;
    pub const VDC_P_L: u16 = 25;
    pub const VDC_P_R: u16 = 26;
}

/// Fused label ids.
pub mod fused {
    pub const LV_IH: u16 = 1;
    pub const CSF: u16 = 2;
    pub const V3: u16 = 3;
    pub const V4: u16 = 4;
    pub const NACC_PUT: u16 = 5;
    pub const CAU: u16 = 6;
    pub const GP: u16 = 7;
    pub const BRAINSTEM: u16 = 8;
    pub const TH: u16 = 9;
    pub const HF: u16 = 10;
    pub const AMY: u16 = 11;
    pub const VDC: u16 = 12;
}

use Laterality::{Left, Midline, Right};

pub static FINE_LABELS: [FineLabel; 26] = [
    FineLabel { id: 1, name: "LV_L", laterality: Left },
    FineLabel { id: 2, name: "LV_R", laterality: Right },
    FineLabel { id: 3, name: "CSF", laterality: Midline },
    FineLabel { id: 4, name: "3V", laterality: Midline },
    FineLabel { id: 5, name: "4V", laterality: Midline },
    FineLabel { id: 6, name: "NAcc_L", laterality: Left },
    FineLabel { id: 7, name: "NAcc_R", laterality: Right },
    FineLabel { id: 8, name: "CAU_L", laterality: Left },
    FineLabel { id: 9, name: "CAU_R", laterality: Right },
    FineLabel { id: 10, name: "Put_L", laterality: Left },
    FineLabel { id: 11, name: "Put_R", laterality: Right },
    FineLabel { id: 12, name: "GP_L", laterality: Left },
    FineLabel { id: 13, name: "GP_R", laterality: Right },
    FineLabel { id: 14, name: "Brainstem", laterality: Midline },
    FineLabel { id: 15, name: "TH_L", laterality: Left },
    FineLabel { id: 16, name: "TH_R", laterality: Right },
    FineLabel { id: 17, name: "IH_L", laterality: Left },
    FineLabel { id: 18, name: "IH_R", laterality: Right },
    FineLabel { id: 19, name: "HF_L", laterality: Left },
    FineLabel { id: 20, name: "HF_R", laterality: Right },
    FineLabel { id: 21, name: "AMY_L", laterality: Left },
    FineLabel { id: 22, name: "AMY_R", laterality: Right },
    FineLabel { id: 23, name: "VDC_A_L", laterality: Left },
    FineLabel { id: 24, name: "VDC_A_R", laterality: Right },
    FineLabel { id: 25, name: "VDC_P_L", laterality: Left },
    FineLabel { id: 26, name: "VDC_P_R", laterality: Right },
];

pub static FUSED_LABELS: [FusedLabel; 12] = [
    FusedLabel { id: 1, name: "LV+IH", members: &[1, 2, 17, 18] },
    FusedLabel { id: 2, name: "CSF", members: &[3] },
    FusedLabel { id: 3, name: "3V", members: &[4] },
    FusedLabel { id: 4, name: "4V", members: &[5] },
    FusedLabel { id: 5, name: "NAcc+Put", members: &[6, 7, 10, 11] },
    FusedLabel { id: 6, name: "CAU", members: &[8, 9] },
    FusedLabel { id: 7, name: "GP", members: &[12, 13] },
    FusedLabel { id: 8, name: "Brainstem", members: &[14] },
    FusedLabel { id: 9, name: "TH", members: &[15, 16] },
    FusedLabel { id: 10, name: "HF", members: &[19, 20] },
    FusedLabel { id: 11, name: "AMY", members: &[21, 22] },
    FusedLabel { id: 12, name: "VDC", members: &[23, 24, 25, 26] },
];

pub fn fine_label(id: u16) -> Option<&'static FineLabel> {
    FINE_LABELS.get((id as usize).wrapping_sub(1))
}

pub fn fused_label(id: u16) -> Option<&'static FusedLabel> {
    FUSED_LABELS.get((id as usize).wrapping_sub(1))
}

/// Fused group of a fine label (0 for background).
pub fn fused_of(fine_id: u16) -> Option<u16> {
    FUSE_TABLE.get(fine_id as usize).copied()
}

/// Lookup table fine id -> fused id, index 0 is background.
pub static FUSE_TABLE: [u16; 27] = build_fuse_table();

const fn build_fuse_table() -> [u16; 27] {
    let mut table = [0u16; 27];
    let mut g = 0;
    while g < FUSED_LABELS.len() {
        let members = FUSED_LABELS[g].members;
        let mut m = 0;
        while m < members.len() {
            table[members[m] as usize] = FUSED_LABELS[g].id;
            m += 1;
        }
        g += 1;
    }
    table
}

/// Map a 26-label volume onto the 12 fused labels.
pub fn fuse_labels(vol26: &LabelVolume) -> Result<LabelVolume> {
    if let Some(&bad) = vol26.data().iter().find(|&&v| v > FINE_COUNT) {
        return Err(Error::LabelOutOfRange {
            label: bad as u32,
            taxonomy: "fine (1-26)",
        });
    }
    let data = vol26.data().iter().map(|&v| FUSE_TABLE[v as usize]).collect();
    vol26.with_data(data)
}

/// Fail on any label outside the fused taxonomy.
pub fn check_fused(vol12: &LabelVolume) -> Result<()> {
    match vol12.data().iter().find(|&&v| v > FUSED_COUNT) {
        Some(&bad) => Err(Error::LabelOutOfRange {
            label: bad as u32,
            taxonomy: "fused (1-12)",
        }),
        None => Ok(()),
    }
}

/// Per-label voxel counts, index = label id.
pub fn histogram(vol: &LabelVolume) -> Vec<usize> {
    let max = vol.data().iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0usize; max + 1];
    for &v in vol.data() {
        h[v as usize] += 1;
    }
    h
}

/// Catalog entry for a protocol landmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkInfo {
    pub id: u8,
    pub name: &'static str,
    pub region: &'static str,
    pub description: &'static str,
    pub laterality: Laterality,
}

pub const LANDMARK_COUNT: usize = 16;

/// Landmark ids by role.
pub mod landmark {
    pub const PUT_FIRST_L: u8 = 1;
    pub const PUT_FIRST_R: u8 = 2;
    pub const CONTACT_ANT_L: u8 = 3;
    pub const CONTACT_ANT_R: u8 = 4;
    pub const CONTACT_POST_L: u8 = 5;
    pub const CONTACT_POST_R: u8 = 6;
    pub const NACC_LAST_L: u8 = 7;
    pub const NACC_LAST_R: u8 = 8;
    pub const V3_FIRST: u8 = 9;
    pub const AC: u8 = 10;
    pub const MB_L: u8 = 11;
    pub const MB_R: u8 = 12;
    pub const IH_FIRST_L: u8 = 13;
    pub const IH_FIRST_R: u8 = 14;
    pub const PC: u8 = 15;
    pub const PPF: u8 = 16;
}

pub static LANDMARKS: [LandmarkInfo; 16] = [
    LandmarkInfo { id: 1, name: "Put_first_L", region: "Putamen", description: "First anterior appearance", laterality: Left },
    LandmarkInfo { id: 2, name: "Put_first_R", region: "Putamen", description: "First anterior appearance", laterality: Right },
    LandmarkInfo { id: 3, name: "NAccPut_ant_L", region: "Nucleus accumbens-putamen interface", description: "Anterior contact", laterality: Left },
    LandmarkInfo { id: 4, name: "NAccPut_ant_R", region: "Nucleus accumbens-putamen interface", description: "Anterior contact", laterality: Right },
    LandmarkInfo { id: 5, name: "NAccPut_post_L", region: "Nucleus accumbens-putamen interface", description: "Posterior contact", laterality: Left },
    LandmarkInfo { id: 6, name: "NAccPut_post_R", region: "Nucleus accumbens-putamen interface", description: "Posterior contact", laterality: Right },
    LandmarkInfo { id: 7, name: "NAcc_last_L", region: "Nubbins", description: "Last anterior appearance of nucleus accumbens", laterality: Left },
    LandmarkInfo { id: 8, name: "NAcc_last_R", region: "Nubbins", description: "Last anterior appearance of nucleus accumbens", laterality: Right },
    LandmarkInfo { id: 9, name: "3V_first", region: "Third ventricle", description: "First anterior appearance", laterality: Midline },
    LandmarkInfo { id: 10, name: "AC", region: "Commissures", description: "Anterior commissure", laterality: Midline },
    LandmarkInfo { id: 11, name: "MB_L", region: "Ventral Diencephalon", description: "Mammillary bodies", laterality: Left },
    LandmarkInfo { id: 12, name: "MB_R", region: "Ventral Diencephalon", description: "Mammillary bodies", laterality: Right },
    LandmarkInfo { id: 13, name: "IH_first_L", region: "Continuity of atrium", description: "First posterior appearance of inferior horn", laterality: Left },
    LandmarkInfo { id: 14, name: "IH_first_R", region: "Continuity of atrium", description: "First posterior appearance of inferior horn", laterality: Right },
    LandmarkInfo { id: 15, name: "PC", region: "Commissures", description: "Posterior commissure", laterality: Midline },
    LandmarkInfo { id: 16, name: "PPF", region: "Brainstem limit", description: "Prepontine fissure", laterality: Midline },
];

/// Left/right landmark pairs as `(left, right)`.
pub const LANDMARK_PAIRS: [(u8, u8); 6] = [(1, 2), (3, 4), (5, 6), (7, 8), (11, 12), (13, 14)];

pub fn landmark_info(id: u8) -> Option<&'static LandmarkInfo> {
    LANDMARKS.get((id as usize).wrapping_sub(1))
}

/// Named landmarks in world millimetres (RAS).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkSet {
    points: BTreeMap<u8, Point3>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkFile {
    #[serde(default = "default_space")]
    space: String,
    #[serde(default = "default_frame")]
    frame: String,
    landmarks: Vec<LandmarkEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkEntry {
    id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    xyz: [f64; 3],
}

fn default_space() -> String {
    "world_mm".into()
}
fn default_frame() -> String {
    "RAS".into()
}

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(id, point)` entries, rejecting duplicates, unknown ids and
    /// non-finite coordinates.
    pub fn from_entries<I: IntoIterator<Item = (i64, Point3)>>(entries: I) -> Result<Self> {
        let mut set = LandmarkSet::new();
        for (id, p) in entries {
            let id = u8::try_from(id)
                .ok()
                .filter(|id| landmark_info(*id).is_some())
                .ok_or(Error::UnknownLandmark(id))?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFiniteLandmark(id));
            }
            if set.points.insert(id, p).is_some() {
                return Err(Error::DuplicateLandmark(id));
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: u8, p: Point3) -> Result<()> {
        if landmark_info(id).is_none() {
            return Err(Error::UnknownLandmark(id as i64));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteLandmark(id));
        }
        self.points.insert(id, p);
        Ok(())
    }

    pub fn get(&self, id: u8) -> Option<Point3> {
        self.points.get(&id).copied()
    }

    pub fn require(&self, id: u8) -> Result<Point3> {
        self.get(id).ok_or_else(|| Error::MissingLandmark {
            id,
            name: landmark_info(id).map_or("?", |l| l.name),
        })
    }

    pub fn contains(&self, id: u8) -> bool {
        self.points.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.points.len() == LANDMARK_COUNT
    }

    /// First missing id among `ids`, if any.
    pub fn missing(&self, ids: &[u8]) -> Option<u8> {
        ids.iter().copied().find(|id| !self.contains(*id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, Point3)> + '_ {
        self.points.iter().map(|(k, v)| (*k, *v))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: LandmarkFile = serde_json::from_str(s).map_err(|e| Error::LandmarkFormat(e.to_string()))?;
        if file.space != "world_mm" {
            return Err(Error::LandmarkFormat(format!("unsupported space {:?}", file.space)));
        }
        if file.frame != "RAS" {
            return Err(Error::LandmarkFormat(format!("unsupported frame {:?}", file.frame)));
        }
        Self::from_entries(file.landmarks.into_iter().map(|e| (e.id, e.xyz)))
    }

    pub fn to_json_string(&self) -> String {
        let file = LandmarkFile {
            space: default_space(),
            frame: default_frame(),
            landmarks: self
                .iter()
                .map(|(id, xyz)| LandmarkEntry {
                    id: id as i64,
                    name: landmark_info(id).map(|l| l.name.to_string()),
                    xyz,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("landmark file serializes")
    }

    /// CSV mirror with columns `id,name,x,y,z`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id,name,x,y,z\n");
        for (id, p) in self.iter() {
            let name = landmark_info(id).map_or("", |l| l.name);
            out.push_str(&format!("{id},{name},{},{},{}\n", p[0], p[1], p[2]));
        }
        out
    }

    /// Concatenated coordinates in catalog order (requires a complete set).
    pub fn to_configuration(&self) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(3 * LANDMARK_COUNT);
        for info in &LANDMARKS {
            x.extend_from_slice(&self.require(info.id)?);
        }
        Ok(x)
    }

    pub fn from_configuration(x: &[f64]) -> Result<Self> {
        if x.len() != 3 * LANDMARK_COUNT {
            return Err(Error::DimensionMismatch {
                expected: 3 * LANDMARK_COUNT,
                found: x.len(),
            });
        }
        Self::from_entries(
            LANDMARKS
                .iter()
                .zip(x.chunks_exact(3))
                .map(|(info, c)| (info.id as i64, [c[0], c[1], c[2]])),
        )
    }
}

pub fn parse_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LandmarkSet::from_json_str(&text)
}

pub fn write_landmarks(lm: &LandmarkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, lm.to_json_string()).map_err(|e| Error::io(path, e))
}

/// Maximum plausible separation of a left/right landmark pair.
pub const MAX_PAIR_DISTANCE_MM: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfBounds { id: u8 },
    LateralityOrdering { left: u8, right: u8 },
    AcPcOrdering,
    PairDistance { left: u8, right: u8, distance: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfBounds { id } => write!(f, "landmark #{id} lies outside the volume"),
            Violation::LateralityOrdering { left, right } => {
                write!(f, "laterality ordering: #{left} is not left of #{right}")
            }
            Violation::AcPcOrdering => write!(f, "AC/PC ordering: AC is not anterior to PC"),
            Violation::PairDistance { left, right, distance } => {
                write!(f, "pair distance: #{left}-#{right} are {distance:.1} mm apart")
            }
        }
    }
}

/// Sanity report for a landmark set against a volume; never fails.
pub fn validate_landmarks(lm: &LandmarkSet, vol: &LabelVolume) -> Vec<Violation> {
    let mut out = Vec::new();
    let dims = vol.dims();
    for (id, p) in lm.iter() {
        let ijk = vol.world_to_voxel(p);
        let inside = (0..3).all(|d| ijk[d] >= -0.5 && ijk[d] <= dims[d] as f64 - 0.5);
        if !inside {
            out.push(Violation::OutOfBounds { id });
        }
    }
    for (l, r) in LANDMARK_PAIRS {
        if let (Some(pl), Some(pr)) = (lm.get(l), lm.get(r)) {
            if pl[0] >= pr[0] {
                out.push(Violation::LateralityOrdering { left: l, right: r });
            }
            let distance = crate::geometry::distance(pl, pr);
            if distance > MAX_PAIR_DISTANCE_MM {
                out.push(Violation::PairDistance { left: l, right: r, distance });
            }
        }
    }
    if let (Some(ac), Some(pc)) = (lm.get(landmark::AC), lm.get(landmark::PC)) {
        if ac[1] <= pc[1] {
            out.push(Violation::AcPcOrdering);
        }
    }
    out
}
