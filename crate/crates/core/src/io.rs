//! Snapshot and trace file formats.
//!
//! Snapshot layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GFS1"
//!      4     4  version (u32) = 1
//!      8     4  nx (u32)
//!     12     4  ny (u32)
//!     16    32  x0, x1, y0, y1 (f64)
//!     48     8  time (f64)
//!     56  8·nx·ny  values (f64), row-major, x fastest
//! ```
//!
//! Traces are CSV with the header [`TRACE_HEADER`]; floats carry 17
//! significant digits and unused columns are left empty.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::diagnostics::TraceRow;
use crate::error::{Error, Result};
use crate::spectral::{make_grid, Field, Grid2D};

pub const MAGIC: [u8; 4] = *b"GFS1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;
pub const TRACE_HEADER: &str = "n,t,E_orig,E_mod,mass,lambda,xi,E1,E2,ratio,W,lin_iters,clamped";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn grid(&self) -> Result<Arc<Grid2D>> {
        let [x0, x1, y0, y1] = self.bounds;
        make_grid(self.nx, self.ny, x0, x1, y0, y1)
    }

    pub fn field(&self) -> Result<Field> {
        Field::from_values(&self.grid()?, self.values.clone())
    }
}

pub fn encode_snapshot(phi: &Field, time: f64) -> Vec<u8> {
    let grid = phi.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.ny() as u32).to_le_bytes());
    for b in grid.bounds() {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out.extend_from_slice(&time.to_le_bytes());
    for v in phi.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let bounds = [f64_at(16), f64_at(24), f64_at(32), f64_at(40)];
    let time = f64_at(48);
    let expected = HEADER_LEN + 8 * nx * ny;
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload { expected, found: bytes.len() });
    }
    let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Snapshot { nx, ny, bounds, time, values })
}

pub fn write_snapshot(path: impl AsRef<Path>, phi: &Field, time: f64) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_snapshot(phi, time))?;
    f.flush()?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn format_trace_row(r: &TraceRow) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{:.16e},{},{}",
        r.n,
        r.t,
        r.e_orig,
        r.e_mod,
        r.mass,
        opt(r.lambda),
        opt(r.xi),
        opt(r.e1),
        opt(r.e2),
        opt(r.ratio),
        r.roughness,
        r.lin_iters,
        u8::from(r.clamped)
    )
}

pub fn write_trace_to(mut w: impl Write, rows: &[TraceRow]) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", format_trace_row(r))?;
    }
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_trace_to(&mut f, rows)?;
    f.flush()?;
    Ok(())
}

pub fn parse_trace(text: impl BufRead) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != TRACE_HEADER {
                return Err(Error::TraceParse { line: 1, msg: "unexpected header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(Error::TraceParse { line: lineno, msg: format!("expected 13 columns, found {}", cols.len()) });
        }
        let bad = |name: &str| Error::TraceParse { line: lineno, msg: format!("invalid {name}") };
        let num = |s: &str, name: &str| s.parse::<f64>().map_err(|_| bad(name));
        let opt = |s: &str, name: &str| if s.is_empty() { Ok(None) } else { num(s, name).map(Some) };
        rows.push(TraceRow {
            n: cols[0].parse().map_err(|_| bad("n"))?,
            t: num(cols[1], "t")?,
            e_orig: num(cols[2], "E_orig")?,
            e_mod: num(cols[3], "E_mod")?,
            mass: num(cols[4], "mass")?,
            lambda: opt(cols[5], "lambda")?,
            xi: opt(cols[6], "xi")?,
            e1: opt(cols[7], "E1")?,
            e2: opt(cols[8], "E2")?,
            ratio: opt(cols[9], "ratio")?,
            roughness: num(cols[10], "W")?,
            lin_iters: cols[11].parse().map_err(|_| bad("lin_iters"))?,
            clamped: match cols[12] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("clamped")),
            },
        });
    }
    Ok(rows)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    parse_trace(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initcond::InitSpec;
    use proptest::prelude::*;

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(4, 4, -1.0, 2.0, 0.5, 0.75).unwrap();
        let f = InitSpec::seeded_random(9).build(&g);
        let path = dir.path().join("s.gfs");
        write_snapshot(&path, &f, 0.125).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.time, 0.125);
        assert_eq!(s.bounds, [-1.0, 2.0, 0.5, 0.75]);
        let a: Vec<u64> = f.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = s.values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert!(s.field().unwrap().grid().same_as(&g));
    }

    #[test]
    fn snapshot_size_matches_format() {
        let g = make_grid(64, 64, -0.5, 0.5, -0.5, 0.5).unwrap();
        let bytes = encode_snapshot(&InitSpec::tanh_star(0.01).build(&g), 0.1);
        assert_eq!(bytes.len(), 32824);
    }

    #[test]
    fn snapshot_errors() {
        let g = make_grid(4, 4, 0.0, 1.0, 0.0, 1.0).unwrap();
        let mut bytes = encode_snapshot(&Field::zeros(&g), 0.0);
        let mut bad = bytes.clone();
        bad[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_snapshot(&bad), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_snapshot(&v2), Err(Error::VersionUnsupported(2))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_snapshot(&bytes), Err(Error::TruncatedPayload { expected: 184, found: 181 })));
        assert!(matches!(decode_snapshot(b"GFS1"), Err(Error::TruncatedPayload { .. })));
    }

    fn row(n: usize, x: f64) -> TraceRow {
        TraceRow {
            n,
            t: x * 0.1,
            e_orig: x,
            e_mod: -x / 3.0,
            mass: 1.0 / 7.0,
            lambda: Some(0.1 + x.abs().sqrt()),
            xi: None,
            e1: Some(x * 1e-300),
            e2: Some(f64::MAX),
            ratio: None,
            roughness: f64::MIN_POSITIVE,
            lin_iters: 12,
            clamped: n % 2 == 1,
        }
    }

    #[test]
    fn trace_line_counts() {
        let mut out = Vec::new();
        write_trace_to(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{TRACE_HEADER}\n"));
        let mut out = Vec::new();
        write_trace_to(&mut out, &[row(1, 2.0)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    proptest! {
        #[test]
        fn trace_round_trip_is_lossless(xs in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            let rows: Vec<TraceRow> = xs.iter().enumerate().map(|(i, &x)| row(i, x)).collect();
            let mut out = Vec::new();
            write_trace_to(&mut out, &rows).unwrap();
            let back = parse_trace(out.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }

    #[test]
    fn trace_parse_reports_line() {
        let text = format!("{TRACE_HEADER}\n1,2,3\n");
        assert!(matches!(parse_trace(text.as_bytes()), Err(Error::TraceParse { line: 2, .. })));
    }
}
