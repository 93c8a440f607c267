//! `PFLD` binary field archives.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"PFLD" | u32 version (=1) | u32 nx | u32 ny | u32 nt
//!        | f64 hx | f64 hy | f64 tau
//!        | nt·nx·ny f64 values, time-major then row-major
//! ```
//!
//! `nt` counts stored slices, so a single field has `nt = 1` and a trajectory
//! with `N` steps has `nt = N + 1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::grid::{Grid2D, TimeGrid};

pub const MAGIC: &[u8; 4] = b"PFLD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 3 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldArchive {
    pub grid: Grid2D,
    pub tau: f64,
    pub slices: Vec<ScalarField>,
}

impl FieldArchive {
    pub fn single(field: &ScalarField) -> Self {
        Self {
            grid: *field.grid(),
            tau: 0.0,
            slices: vec![field.clone()],
        }
    }

    pub fn from_series(series: &FieldSeries) -> Self {
        Self {
            grid: *series.grid(),
            tau: series.time().tau(),
            slices: series.slices().to_vec(),
        }
    }

    /// Rebuilds a series; the time grid is `(nt - 1)` steps of width `tau`.
    pub fn into_series(self) -> Result<FieldSeries> {
        let steps = self.slices.len() - 1;
        let time = if steps == 0 {
            TimeGrid::new(0.0, 0)?
        } else {
            TimeGrid::from_step(self.tau, steps)?
        };
        FieldSeries::from_slices(time, self.slices)
    }

    /// The only slice of a single-field archive.
    pub fn into_field(mut self) -> Result<ScalarField> {
        if self.slices.len() != 1 {
            return Err(Error::Archive(format!(
                "expected a single slice, found {}",
                self.slices.len()
            )));
        }
        Ok(self.slices.pop().expect("one slice"))
    }

    pub fn encode<W: Write>(&self, mut w: W) -> Result<()> {
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Archive(format!("{what} {v} exceeds u32")))
        };
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&to_u32(self.grid.nx(), "nx")?.to_le_bytes());
        header.extend_from_slice(&to_u32(self.grid.ny(), "ny")?.to_le_bytes());
        header.extend_from_slice(&to_u32(self.slices.len(), "nt")?.to_le_bytes());
        header.extend_from_slice(&self.grid.hx().to_le_bytes());
        header.extend_from_slice(&self.grid.hy().to_le_bytes());
        header.extend_from_slice(&self.tau.to_le_bytes());
        let io = |e| Error::io("<archive stream>", e);
        w.write_all(&header).map_err(io)?;
        let mut buf = Vec::with_capacity(self.grid.len() * 8);
        for s in &self.slices {
            if !s.grid().same_shape(&self.grid) {
                return Err(Error::Shape("archive slice grid differs from header".into()));
            }
            buf.clear();
            for v in s.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn decode<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::Archive("truncated header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Archive("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Archive(format!("unsupported version {version}")));
        }
        let (nx, ny, nt) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        let (hx, hy, tau) = (f64_at(20), f64_at(28), f64_at(36));
        if nt == 0 {
            return Err(Error::Archive("archive holds no slices".into()));
        }
        let grid = Grid2D::new(nx, ny, hx, hy).map_err(|e| Error::Archive(e.to_string()))?;
        let mut bytes = vec![0u8; grid.len() * 8];
        let mut slices = Vec::with_capacity(nt);
        for n in 0..nt {
            r.read_exact(&mut bytes)
                .map_err(|_| Error::Archive(format!("truncated data in slice {n}")))?;
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            slices.push(ScalarField::from_values(grid, values)?);
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe).map_err(|e| Error::io("<archive stream>", e))? != 0 {
            return Err(Error::Archive("trailing bytes after data".into()));
        }
        Ok(Self { grid, tau, slices })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.encode(BufWriter::new(file))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::decode(BufReader::new(file))
    }
}

pub fn write_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    FieldArchive::single(field).write(path)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    FieldArchive::read(path)?.into_field()
}

pub fn write_series(path: impl AsRef<Path>, series: &FieldSeries) -> Result<()> {
    FieldArchive::from_series(series).write(path)
}

pub fn read_series(path: impl AsRef<Path>) -> Result<FieldSeries> {
    FieldArchive::read(path)?.into_series()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid2D::new(3, 4, 0.1, 0.25).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x - y);
        let mut buf = Vec::new();
        FieldArchive::single(&f).encode(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 12 * 8);
        assert_eq!(&buf[..4], b"PFLD");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..16], &4u32.to_le_bytes());
        assert_eq!(&buf[16..20], &1u32.to_le_bytes());
        assert_eq!(&buf[28..36], &0.25f64.to_le_bytes());
        assert_eq!(&buf[44..52], &f.values()[0].to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid2D::square(3, 3, 0.1).unwrap();
        let mut buf = Vec::new();
        FieldArchive::single(&ScalarField::zeros(g)).encode(&mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(FieldArchive::decode(&bad[..]).is_err());

        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(FieldArchive::decode(&bad[..]).is_err());

        assert!(FieldArchive::decode(&buf[..buf.len() - 1]).is_err());

        let mut long = buf.clone();
        long.push(0);
        assert!(FieldArchive::decode(&long[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            nx in 3usize..7, ny in 3usize..7, nt in 1usize..4,
            seed in proptest::collection::vec(any::<f64>(), 1..300),
        ) {
            let g = Grid2D::new(nx, ny, 0.1, 0.3).unwrap();
            let slices = (0..nt)
                .map(|n| {
                    let vals = (0..g.len()).map(|k| seed[(k + n * 7) % seed.len()]).collect();
                    ScalarField::from_values(g, vals).unwrap()
                })
                .collect();
            let a = FieldArchive { grid: g, tau: 0.05, slices };
            let mut buf = Vec::new();
            a.encode(&mut buf).unwrap();
            let b = FieldArchive::decode(&buf[..]).unwrap();
            let mut buf2 = Vec::new();
            b.encode(&mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
