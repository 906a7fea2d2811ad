//! Field snapshots.
//!
//! 3D fields use a small binary layout: the magic `PKF3`, `n` as a
//! little-endian u64, `L` as a little-endian f64, then the `n³` values in
//! row-major order. Radial fields are plain CSV with columns `r,value`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field3D, Grid3D};
use crate::radial::{RadialField, RadialGrid};

const MAGIC: &[u8; 4] = b"PKF3";

pub fn write_field<W: Write>(f: &Field3D, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(f.grid().n() as u64).to_le_bytes())?;
    out.write_all(&f.grid().length().to_le_bytes())?;
    for v in f.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut input: R) -> Result<Field3D> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("not a field snapshot (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Snapshot("grid size overflows".into()))?;
    input.read_exact(&mut word)?;
    let length = f64::from_le_bytes(word);
    let grid = Grid3D::new(n, length).map_err(|e| Error::Snapshot(format!("invalid grid header: {e}")))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Snapshot("truncated snapshot".into()))?;
        values.push(f64::from_le_bytes(word));
    }
    Field3D::new(grid, values)
}

pub fn write_radial_csv<W: Write>(u: &RadialField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["r", "value"]).map_err(io)?;
    for (j, v) in u.values().iter().enumerate() {
        w.serialize((u.grid().r(j), v)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a profile written by [`write_radial_csv`]; nodes must be uniform
/// and start at the origin.
pub fn read_radial_csv<R: Read>(input: R) -> Result<RadialField> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rs = Vec::new();
    let mut vals = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        let (r, v) = rec.map_err(|e| Error::Snapshot(format!("radial csv: {e}")))?;
        rs.push(r);
        vals.push(v);
    }
    if rs.len() < 3 || rs[0] != 0.0 {
        return Err(Error::Snapshot(
            "radial csv needs at least 3 rows starting at r = 0".into(),
        ));
    }
    let grid = RadialGrid::new(rs.len(), *rs.last().unwrap())?;
    if rs
        .iter()
        .enumerate()
        .any(|(j, r)| (r - grid.r(j)).abs() > 1e-9 * grid.r_max())
    {
        return Err(Error::Snapshot("radial csv nodes are not uniform".into()));
    }
    RadialField::new(grid, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip_is_bit_exact() {
        let g = Grid3D::new(8, 3.5).unwrap();
        let f = Field3D::from_fn(g, |x| x[0].sin() + x[1] * x[2]);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 16 + 8 * 512);
        assert_eq!(read_field(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn bad_magic_and_truncation_are_errors() {
        assert!(matches!(
            read_field(&b"NOPE0000000000000000"[..]),
            Err(Error::Snapshot(_))
        ));
        let g = Grid3D::new(8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&Field3D::zeros(g), &mut buf).unwrap();
        buf.truncate(100);
        assert!(matches!(read_field(buf.as_slice()), Err(Error::Snapshot(_))));
    }

    #[test]
    fn radial_roundtrip() {
        let g = RadialGrid::new(50, 7.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-r).exp());
        let mut buf = Vec::new();
        write_radial_csv(&u, &mut buf).unwrap();
        let back = read_radial_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), u.grid());
        assert!(back.values().iter().zip(u.values()).all(|(a, b)| a == b));
    }
}
