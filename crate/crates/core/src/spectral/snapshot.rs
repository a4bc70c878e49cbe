//! Binary field snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SPLF"                  4 bytes magic
//! version                 u32 (currently 1)
//! d, n                    u32, u32
//! mode count              u32
//! per mode, lexicographic z order, canonical half-space only:
//!     z                   d × i32
//!     v̂_z                 d × (re: f64, im: f64)
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{ModeSet, SpectralField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPLF";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(field: &SpectralField, mut w: W) -> Result<()> {
    let d = field.d();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(d as u32).to_le_bytes())?;
    w.write_all(&(field.n() as u32).to_le_bytes())?;
    w.write_all(&(field.modes().len() as u32).to_le_bytes())?;
    for (k, z) in field.modes().iter().enumerate() {
        for &c in z.components() {
            w.write_all(&c.to_le_bytes())?;
        }
        for c in field.coeff(k) {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes(field: &SpectralField) -> Vec<u8> {
    let mut out = Vec::new();
    write_snapshot(field, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let modes = ModeSet::new(d, n)?;
    if count > modes.len() {
        return Err(Error::Snapshot(format!(
            "{count} modes exceed the {} half-space modes of order {n}",
            modes.len()
        )));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); modes.len() * d];
    let mut previous: Option<usize> = None;
    let mut z = vec![0i32; d];
    for _ in 0..count {
        for c in z.iter_mut() {
            *c = read_u32(&mut r)? as i32;
        }
        let k = match modes.locate(&z) {
            Some((k, false)) => k,
            _ => return Err(Error::Snapshot(format!("wave vector {z:?} is not a canonical mode of order {n}"))),
        };
        if previous.is_some_and(|p| p >= k) {
            return Err(Error::Snapshot(format!("wave vector {z:?} out of lexicographic order")));
        }
        previous = Some(k);
        let mut along = Complex64::new(0.0, 0.0);
        let mut size = 0.0f64;
        for (i, slot) in coeffs[k * d..(k + 1) * d].iter_mut().enumerate() {
            *slot = Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?);
            along += *slot * z[i] as f64;
            size = size.max(slot.norm());
        }
        if along.norm() > 1e-12 * (1.0 + size) {
            return Err(Error::Snapshot(format!("mode {z:?} is not divergence free")));
        }
    }
    Ok(SpectralField::from_parts(modes, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_field, rng};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut r = rng(12);
        let v = random_field(3, 2, &mut r);
        let bytes = to_bytes(&v);
        assert_eq!(&bytes[..4], b"SPLF");
        let modes = v.modes().len();
        assert_eq!(bytes.len(), 20 + modes * (3 * 4 + 6 * 8));
        let back = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(back.coeffs(), v.coeffs());
        assert_eq!(back.n(), 2);
    }

    #[test]
    fn header_fields_little_endian() {
        let v = SpectralField::zero(2, 1).unwrap();
        let bytes = to_bytes(&v);
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &4u32.to_le_bytes());
        // first mode is z = (0, 1)
        assert_eq!(&bytes[20..24], &0i32.to_le_bytes());
        assert_eq!(&bytes[24..28], &1i32.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        let v = SpectralField::zero(2, 1).unwrap();
        let mut bytes = to_bytes(&v);
        bytes[0] = b'X';
        assert!(matches!(read_snapshot(bytes.as_slice()), Err(Error::Snapshot(_))));

        let mut bytes = to_bytes(&v);
        // make mode (0,1) carry a gradient component
        bytes[28..36].copy_from_slice(&0.0f64.to_le_bytes());
        bytes[44..52].copy_from_slice(&1.0f64.to_le_bytes());
        assert!(read_snapshot(bytes.as_slice()).is_err());

        let bytes = to_bytes(&v);
        assert!(read_snapshot(&bytes[..30]).is_err());
    }
}
