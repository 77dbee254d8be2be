//! Cell files (TOML).
//!
//! ```toml
//! resolution = 8
//! voxel_encoding = "base64-u8"
//! voxel_map = "AAAAAQEB..."
//!
//! [[phases]]
//! a_ex = 1.0
//! M_s = 1.0
//! anisotropy = { variant = "uniaxial", kappa = 0.5, axis = [0.0, 0.0, 1.0] }
//! ```
//!
//! `voxel_map` is either an integer array or a base64 string (`base64-u8`,
//! or `base64-u16le` for more than 256 phases), in flat order k, then j,
//! then i (i fastest). A `[generator]` table (`kind = "laminate"`, ...) may be
//! given instead of `voxel_map`. The writer always emits a base64 map.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{make_structured, Geometry, Phase, UnitCellMaterial};
use crate::{Error, Result};

const U8: &str = "base64-u8";
const U16: &str = "base64-u16le";

#[derive(Serialize, Deserialize)]
struct CellDoc {
    resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voxel_encoding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voxel_map: Option<VoxelMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<Geometry>,
    phases: Vec<Phase>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VoxelMap {
    Encoded(String),
    Indices(Vec<i64>),
}

/// Parses a cell file and validates the result.
pub fn parse_cell(text: &str) -> Result<UnitCellMaterial> {
    parse_cell_unvalidated(text)?.validated()
}

/// Parses a cell file, checking only its structure (resolution,
/// map length, phase indices), so that [`validate`](super::validate) can
/// report every material issue.
pub fn parse_cell_unvalidated(text: &str) -> Result<UnitCellMaterial> {
    parse_doc(text, None)
}

/// Parses and validates a cell at resolution `n`: generator documents are
/// rebuilt at `n`, explicit voxel maps are resampled.
pub fn parse_cell_at(text: &str, n: usize) -> Result<UnitCellMaterial> {
    parse_doc(text, Some(n))?.validated()
}

fn parse_doc(text: &str, n: Option<usize>) -> Result<UnitCellMaterial> {
    let doc: CellDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let cell = match (doc.voxel_map, doc.generator) {
        (Some(_), Some(_)) => return Err(Error::Parse("give either voxel_map or generator, not both".into())),
        (None, None) => return Err(Error::Parse("missing voxel_map or generator".into())),
        (None, Some(geometry)) => make_structured(&geometry, doc.phases, n.unwrap_or(doc.resolution))?,
        (Some(map), None) => {
            let map = decode_map(map, doc.voxel_encoding.as_deref())?;
            let cell = UnitCellMaterial::new(doc.resolution, doc.phases, map)?;
            match n {
                Some(n) if n != cell.resolution() => cell.resample(n)?,
                _ => cell,
            }
        }
    };
    Ok(cell)
}

fn decode_map(map: VoxelMap, encoding: Option<&str>) -> Result<Vec<u16>> {
    match map {
        VoxelMap::Indices(v) => v
            .into_iter()
            .enumerate()
            .map(|(voxel, x)| {
                u16::try_from(x).map_err(|_| Error::UnknownPhase {
                    index: x.max(0) as usize,
                    voxel,
                    phases: 0,
                })
            })
            .collect(),
        VoxelMap::Encoded(s) => {
            let bytes = STANDARD
                .decode(s.trim())
                .map_err(|e| Error::Parse(format!("voxel_map base64: {e}")))?;
            match encoding.unwrap_or(U8) {
                U8 => Ok(bytes.into_iter().map(u16::from).collect()),
                U16 => {
                    if bytes.len() % 2 != 0 {
                        return Err(Error::Parse("odd byte count for base64-u16le".into()));
                    }
                    Ok(bytes
                        .chunks_exact(2)
                        .map(|c| u16::from_le_bytes([c[0], c[1]]))
                        .collect())
                }
                other => Err(Error::Parse(format!("unknown voxel_encoding {other:?}"))),
            }
        }
    }
}

/// Serializes a cell as a cell file with a base64 voxel map.
pub fn write_cell(cell: &UnitCellMaterial) -> Result<String> {
    let (encoding, bytes) = if cell.phases().len() <= 256 {
        (U8, cell.voxel_map().iter().map(|&p| p as u8).collect::<Vec<_>>())
    } else {
        (U16, cell.voxel_map().iter().flat_map(|p| p.to_le_bytes()).collect())
    };
    let doc = CellDoc {
        resolution: cell.resolution(),
        voxel_encoding: Some(encoding.into()),
        voxel_map: Some(VoxelMap::Encoded(STANDARD.encode(bytes))),
        generator: None,
        phases: cell.phases().to_vec(),
    };
    toml::to_string(&doc).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_cell(path: impl AsRef<Path>) -> Result<UnitCellMaterial> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cell(&text)
}

pub fn load_cell_unvalidated(path: impl AsRef<Path>) -> Result<UnitCellMaterial> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cell_unvalidated(&text)
}

pub fn save_cell(cell: &UnitCellMaterial, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_cell(cell)?).map_err(|e| Error::io(path, e))
}
