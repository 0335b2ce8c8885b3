//! Binary field files.
//!
//! Layout, all little endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `NLS2` |
//! | 4 | version `u32` (1 = single field, 2 = state checkpoint) |
//! | 4 | dim `u32` |
//! | 4 | n `u32` |
//! | 8 | half width `f64` |
//! | 8 | time `f64` (version 2 only) |
//! | 16 n^dim per field | `(re, im)` pairs of `f64`, row-major |
//!
//! A version-2 file carries two fields, `u` then `v`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{make_grid, Field, Grid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NLS2";
pub const VERSION_FIELD: u32 = 1;
pub const VERSION_CHECKPOINT: u32 = 2;

fn write_header(w: &mut impl Write, grid: &Grid, version: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&grid.half_width().to_le_bytes())?;
    Ok(())
}

fn write_samples(w: &mut impl Write, f: &Field) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * f.values().len());
    for z in f.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header(r: &mut impl Read) -> Result<(u32, Grid)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    let dim = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let half_width = read_f64(r)?;
    let grid = make_grid(dim, n, half_width).map_err(|e| Error::Format(e.to_string()))?;
    Ok((version, grid))
}

fn read_samples(r: &mut impl Read, grid: &Grid) -> Result<Field> {
    let mut buf = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated samples: {e}")))?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Field::from_values(grid, values)
}

pub fn write_field(w: &mut impl Write, f: &Field) -> Result<()> {
    write_header(w, f.grid(), VERSION_FIELD)?;
    write_samples(w, f)
}

pub fn read_field(r: &mut impl Read) -> Result<Field> {
    let (version, grid) = read_header(r)?;
    if version != VERSION_FIELD {
        return Err(Error::Format(format!("expected a single-field file, found version {version}")));
    }
    read_samples(r, &grid)
}

pub fn write_checkpoint(w: &mut impl Write, u: &Field, v: &Field, t: f64) -> Result<()> {
    u.check_same_grid(v)?;
    write_header(w, u.grid(), VERSION_CHECKPOINT)?;
    w.write_all(&t.to_le_bytes())?;
    write_samples(w, u)?;
    write_samples(w, v)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(Field, Field, f64)> {
    let (version, grid) = read_header(r)?;
    if version != VERSION_CHECKPOINT {
        return Err(Error::Format(format!("expected a checkpoint, found version {version}")));
    }
    let t = read_f64(r)?;
    let u = read_samples(r, &grid)?;
    let v = read_samples(r, &grid)?;
    Ok((u, v, t))
}

pub fn save_field(path: &std::path::Path, f: &Field) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load_field(path: &std::path::Path) -> Result<Field> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = make_grid(2, 8, 1.5).unwrap();
        let f = Field::from_fn(&g, |x| Complex64::new(x[0], x[1]));
        let mut bytes = Vec::new();
        write_field(&mut bytes, &f).unwrap();
        assert_eq!(&bytes[..4], b"NLS2");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1.5);
        assert_eq!(bytes.len(), 24 + 16 * 64);
        // first sample is the corner (-L, -L)
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), -1.5);
    }

    #[test]
    fn rejects_bad_input() {
        let mut bad = b"NOPE".to_vec();
        bad.extend_from_slice(&[0u8; 40]);
        assert!(matches!(read_field(&mut bad.as_slice()), Err(Error::Format(_))));

        let g = make_grid(1, 8, 1.0).unwrap();
        let mut bytes = Vec::new();
        write_field(&mut bytes, &Field::zeros(&g)).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_field(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let g = make_grid(1, 8, 1.0).unwrap();
        let u = Field::from_fn(&g, |x| Complex64::new(x[0], 0.25));
        let v = Field::from_fn(&g, |x| Complex64::new(-x[0], 1.0 / 3.0));
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &u, &v, 0.125).unwrap();
        let (u2, v2, t) = read_checkpoint(&mut bytes.as_slice()).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(u2.values(), u.values());
        assert_eq!(v2.values(), v.values());
        assert!(read_field(&mut bytes.as_slice()).is_err());
    }
}
