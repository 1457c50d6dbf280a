//! Binary field snapshots.
//!
//! Layout (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `NSFS` |
//! | 4     | u32 format version (1) |
//! | 4     | u32 N |
//! | 3·N³·16 | per component, per wavevector: f64 real, f64 imaginary |
//!
//! Wavevectors run lexicographically over (k¹, k², k³) with each component
//! ascending from −N/2 to N/2−1. A JSON sidecar at `<path>.json` records
//! the dealiasing choice, the field flags and free-form provenance.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FieldFlags, GridSpec, SpectralVectorField, WaveVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NSFS";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format_version: u32,
    pub n: usize,
    pub dealias: bool,
    pub flags: FieldFlags,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

fn lexicographic(grid: GridSpec) -> impl Iterator<Item = WaveVector> {
    let h = (grid.n() / 2) as i64;
    (-h..h).flat_map(move |a| {
        (-h..h).flat_map(move |b| (-h..h).map(move |c| WaveVector::new(a, b, c)))
    })
}

pub fn encode(u: &SpectralVectorField) -> Vec<u8> {
    let grid = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 48 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    for c in 0..3 {
        for k in lexicographic(grid) {
            let z = u.get(c, k);
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], dealias: bool, flags: FieldFlags) -> Result<SpectralVectorField> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(Error::Format("missing snapshot magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let n = word(8) as usize;
    let grid = GridSpec::with_dealias(n, dealias)?;
    let expected = HEADER_LEN + 48 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot body has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let float = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let mut u = SpectralVectorField::zeros(grid);
    let mut pos = HEADER_LEN;
    for c in 0..3 {
        for k in lexicographic(grid) {
            u.set(c, k, Complex64::new(float(pos), float(pos + 8)));
            pos += 16;
        }
    }
    u.flags = flags;
    Ok(u)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_snapshot(
    path: &Path,
    u: &SpectralVectorField,
    provenance: serde_json::Value,
) -> Result<()> {
    fs::write(path, encode(u))?;
    let meta = SnapshotMeta {
        format_version: FORMAT_VERSION,
        n: u.grid().n(),
        dealias: u.grid().dealias(),
        flags: u.flags,
        provenance,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SpectralVectorField, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let u = decode(&fs::read(path)?, meta.dealias, meta.flags)?;
    if u.grid().n() != meta.n {
        return Err(Error::Format(format!(
            "sidecar says N = {}, body says N = {}",
            meta.n,
            u.grid().n()
        )));
    }
    Ok((u, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_divfree;

    #[test]
    fn encode_decode_is_bit_exact() {
        let g = GridSpec::new(8).unwrap();
        let u = random_divfree(g, 11, 3.0, 1.0).unwrap();
        let bytes = encode(&u);
        assert_eq!(bytes.len(), 12 + 48 * 512);
        let v = decode(&bytes, true, u.flags).unwrap();
        assert_eq!(v, u);
        assert_eq!(encode(&v), bytes);
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::new(4).unwrap();
        let mut u = SpectralVectorField::zeros(g);
        u.set(0, WaveVector::new(-2, -2, -2), Complex64::new(1.5, -2.0));
        let bytes = encode(&u);
        assert_eq!(&bytes[0..4], b"NSFS");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), -2.0);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = GridSpec::new(4).unwrap();
        let mut bytes = encode(&SpectralVectorField::zeros(g));
        assert!(decode(&bytes[..20], true, FieldFlags::default()).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes, true, FieldFlags::default()).is_err());
    }
}
