//! Flat binary field snapshots.
//!
//! Layout (all little-endian): `n: u64`, `L: f64`, `N: u64`, component
//! count `u64`, then each component's `N^n` doubles in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, FieldArrays, Grid};

pub fn write_field<F: Field + ?Sized, W: Write>(field: &F, mut w: W) -> Result<()> {
    let grid = field.grid();
    let arrays = field.arrays();
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&(grid.points() as u64).to_le_bytes())?;
    w.write_all(&(arrays.len() as u64).to_le_bytes())?;
    for a in arrays {
        for v in a {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a snapshot back; the component count must match the field type.
pub fn read_field<F: FieldArrays, R: Read>(mut r: R) -> Result<F> {
    let n = read_u64(&mut r)? as usize;
    let length = f64::from_bits(read_u64(&mut r)?);
    let points = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let grid = Grid::new(n, length, points)?;
    if count != F::component_count(n) {
        return Err(Error::param(format!(
            "snapshot has {count} components, expected {}",
            F::component_count(n)
        )));
    }
    let mut arrays = Vec::with_capacity(count);
    let mut buf = vec![0u8; grid.len() * 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        arrays.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    F::from_arrays(grid, arrays)
}

pub fn save_field<F: Field + ?Sized>(field: &F, path: &Path) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load_field<F: FieldArrays>(path: &Path) -> Result<F> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ScalarField, VectorField};

    #[test]
    fn round_trip_and_header() {
        let g = Grid::new(2, 16.0, 8).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[1]).unwrap();
        let mut bytes = Vec::new();
        write_field(&u, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 8 * 64);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &16f64.to_le_bytes());
        let back: ScalarField = read_field(bytes.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(read_field::<VectorField, _>(bytes.as_slice()).is_err());
        assert!(read_field::<ScalarField, _>(&bytes[..100]).is_err());
    }
}
