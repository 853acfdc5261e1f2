//! Velocity snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `NSSNAP01` |
//! | 8 | box length `L` (f64) |
//! | 4 + 4 + 4 | dimension, points per axis `N`, components (u32) |
//! | 8 | time (f64) |
//! | 16 per coefficient | Fourier coefficients of the full velocity, mean included, as (re, im) f64 pairs, component-major |
//! | 32 | SHA-256 of everything above |

use std::fs;
use std::path::Path;

use ns_stability_core::{Complex64, PeriodicGrid, SpectralField};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MAGIC: &[u8; 8] = b"NSSNAP01";
const HEADER: usize = 8 + 8 + 12 + 8;
const DIGEST: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub velocity: SpectralField,
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    let g = s.velocity.grid();
    let coeffs = s.velocity.coeffs();
    let mut out = Vec::with_capacity(HEADER + 16 * coeffs.len() + DIGEST);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&g.length().to_le_bytes());
    for v in [g.dim(), g.n(), s.velocity.components()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&s.t.to_le_bytes());
    for c in coeffs {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn u32_at(b: &[u8], at: usize) -> usize {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes")) as usize
}

/// Checks magic, length and digest before interpreting anything.
pub fn decode(bytes: &[u8]) -> Result<Snapshot, CliError> {
    let bad = |m: &str| CliError::Integrity(format!("snapshot {m}"));
    if bytes.len() < HEADER + DIGEST || &bytes[..8] != MAGIC {
        return Err(bad("has no valid header"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    let length = f64_at(body, 8);
    let (dim, n, components) = (u32_at(body, 16), u32_at(body, 20), u32_at(body, 24));
    let t = f64_at(body, 28);
    let grid = PeriodicGrid::new(length, dim, n).map_err(|e| bad(&format!("grid is invalid ({e})")))?;
    if components != dim {
        return Err(bad("component count differs from the dimension"));
    }
    let count = grid.len() * components;
    if body.len() != HEADER + 16 * count {
        return Err(bad(&format!("holds {} bytes of data, grid needs {}", body.len() - HEADER, 16 * count)));
    }
    let coeffs = (0..count)
        .map(|i| {
            let at = HEADER + 16 * i;
            Complex64::new(f64_at(body, at), f64_at(body, at + 8))
        })
        .collect();
    let velocity = SpectralField::from_coeffs(&grid, components, coeffs).map_err(|e| bad(&e.to_string()))?;
    Ok(Snapshot { t, velocity })
}

pub fn write(path: &Path, s: &Snapshot) -> Result<(), CliError> {
    fs::write(path, encode(s)).map_err(|e| CliError::io(path.display(), e))
}

pub fn read(path: &Path) -> Result<Snapshot, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Integrity(m) => CliError::Integrity(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ns_stability_core::random::{random_solenoidal, FieldRng, Spectrum};

    fn sample() -> Snapshot {
        let g = PeriodicGrid::new(2.5, 3, 8).unwrap();
        let v = random_solenoidal(&g, Spectrum::Flat { max_mode: 2 }, &mut FieldRng::new(3));
        Snapshot { t: 1.25, velocity: v }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let back = decode(&encode(&s)).unwrap();
        assert_eq!(back.t, s.t);
        assert_eq!(back.velocity.grid(), s.velocity.grid());
        assert_eq!(back.velocity.coeffs(), s.velocity.coeffs());
    }

    #[test]
    fn any_flipped_byte_is_an_integrity_error() {
        let bytes = encode(&sample());
        for at in [0, 9, 17, 30, 100, bytes.len() - 1] {
            let mut b = bytes.clone();
            b[at] ^= 0x01;
            assert!(matches!(decode(&b), Err(CliError::Integrity(_))), "byte {at}");
        }
        assert!(matches!(decode(&bytes[..bytes.len() - 8]), Err(CliError::Integrity(_))));
        assert!(matches!(decode(b"NSSNAP01"), Err(CliError::Integrity(_))));
    }
}
