//! Sphere-valued fields on a domain grid and their file formats.
//!
//! Text format, one record per line:
//!
//! ```text
//! extent <Lx> <Ly> <Lz>
//! resolution <nx> <ny> <nz>
//! <mx> <my> <mz>        (nx*ny*nz lines, x fastest, z slowest)
//! ```
//!
//! Lines starting with `#` are comments. Binary format, all little-endian:
//! magic `MAGF`, `u32` version (1), three `f64` extents, three `u32`
//! resolutions, then `3 * nx * ny * nz` `f64` components in voxel order.

use std::path::Path;

use rand::Rng;

use crate::demag::DomainGrid;
use crate::linalg::{norm, normalize, Vec3};
use crate::{Error, Result};

/// Tolerance on `| |m| - 1 |`.
pub const UNIT_TOL: f64 = 1e-10;

const MAGIC: &[u8; 4] = b"MAGF";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationField {
    grid: DomainGrid,
    values: Vec<Vec3>,
}

impl MagnetizationField {
    pub fn new(grid: DomainGrid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ResolutionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            let n = norm(*v);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::Validation(format!("voxel {i} has |m| = {n}")));
            }
        }
        Ok(MagnetizationField { grid, values })
    }

    /// Normalizes every value; fails on vectors shorter than `1e-12`.
    pub fn normalized(grid: DomainGrid, values: Vec<Vec3>) -> Result<Self> {
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                normalize(v).ok_or(Error::DegenerateNormalization {
                    voxel: i,
                    norm: norm(v),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn uniform(grid: DomainGrid, m: Vec3) -> Result<Self> {
        Self::normalized(grid, vec![m; grid.len()])
    }

    /// Samples `f` at voxel centers and normalizes.
    pub fn from_fn(grid: DomainGrid, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::normalized(grid, values)
    }

    /// Independent uniformly distributed directions.
    pub fn random(grid: DomainGrid, rng: &mut impl Rng) -> Self {
        let values = (0..grid.len()).map(|_| random_direction(rng)).collect();
        MagnetizationField { grid, values }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    /// Largest `| |m| - 1 |` over the voxels.
    pub fn unit_defect(&self) -> f64 {
        self.values.iter().fold(0.0, |w, v| w.max((norm(*v) - 1.0).abs()))
    }

    /// `L^2(Omega)` distance to another field on the same grid.
    pub fn l2_distance(&self, other: &MagnetizationField) -> f64 {
        let d = crate::linalg::sum_indexed(self.values.len(), |i| {
            let e = crate::linalg::sub(self.values[i], other.values[i]);
            crate::linalg::dot(e, e)
        });
        (d * self.grid.voxel_volume()).sqrt()
    }

    pub fn to_text(&self) -> String {
        let e = self.grid.extent();
        let r = self.grid.resolution();
        let mut s = format!(
            "# magnetization field\nextent {} {} {}\nresolution {} {} {}\n",
            e[0], e[1], e[2], r[0], r[1], r[2]
        );
        for v in &self.values {
            s.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let extent: [f64; 3] = header(lines.next(), "extent")?;
        let res: [usize; 3] = header(lines.next(), "resolution")?;
        let grid = DomainGrid::new(extent, res)?;
        let mut values = Vec::with_capacity(grid.len());
        for (n, line) in lines.enumerate() {
            values.push(
                parse3::<f64>(line.split_whitespace())
                    .ok_or_else(|| Error::Parse(format!("field record {n}: expected three numbers, got '{line}'")))?,
            );
        }
        Self::new(grid, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 24 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for e in self.grid.extent() {
            out.extend_from_slice(&e.to_le_bytes());
        }
        for r in self.grid.resolution() {
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for v in &self.values {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("binary field: {m}"));
        if bytes.len() < 48 || &bytes[..4] != MAGIC {
            return Err(bad("missing MAGF header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(bad(&format!("unsupported version {}", u32_at(4))));
        }
        let extent = [f64_at(8), f64_at(16), f64_at(24)];
        let res = [32, 36, 40].map(|o| u32_at(o) as usize);
        let grid = DomainGrid::new(extent, res)?;
        let body = &bytes[44..];
        if body.len() != 24 * grid.len() {
            return Err(bad(&format!(
                "expected {} data bytes, found {}",
                24 * grid.len(),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(24)
            .map(|c| [0, 8, 16].map(|o| f64::from_le_bytes(c[o..o + 8].try_into().unwrap())))
            .collect();
        Self::new(grid, values)
    }

    /// Writes the binary format for a `.bin` extension, text otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let data = if is_binary(path) {
            self.to_bytes()
        } else {
            self.to_text().into_bytes()
        };
        std::fs::write(path, data).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if data.starts_with(MAGIC) {
            Self::from_bytes(&data)
        } else {
            let text = String::from_utf8(data).map_err(|_| Error::Parse("field file is not UTF-8".into()))?;
            Self::from_text(&text)
        }
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn parse3<'a, T: std::str::FromStr>(mut it: impl Iterator<Item = &'a str>) -> Option<[T; 3]> {
    let out = [
        it.next()?.parse().ok()?,
        it.next()?.parse().ok()?,
        it.next()?.parse().ok()?,
    ];
    it.next().is_none().then_some(out)
}

fn header<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<[T; 3]> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing '{key}' header")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::Parse(format!("expected '{key}' header, got '{line}'")));
    }
    parse3(it).ok_or_else(|| Error::Parse(format!("malformed '{key}' header '{line}'")))
}

pub(crate) fn random_direction(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(v);
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
