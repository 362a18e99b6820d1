//! Space-time field files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes   b"WESNSTF\0"
//! version   u32       1
//! flags     u32       bit 0: missing-value sentinel declared
//! sentinel  f64       meaningful only with bit 0 set
//! start     u64       time index of the first row
//! step      u64       hours between rows, always 1
//! n_loc     u64
//! n_time    u64
//! n_loc × { id_len u32, id UTF-8, x f64, y f64 }
//! n_time × n_loc f64  row-major (one row per time)
//! ```
//!
//! CSV layout: `#`-prefixed metadata lines (`# wind-esn space-time v1`,
//! `# start=<t>`, optionally `# missing=<value>`), then the rows `id,...`,
//! `x,...`, `y,...` and one row `t,v_1,...,v_n` per time.
//!
//! Sentinel values are read as NaN and NaN is written as the sentinel.

use std::fs;
use std::io::Write;
use std::path::Path;

use wind_esn_core::field::{Location, SpaceTimeField};
use wind_esn_core::Matrix;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"WESNSTF\0";
pub const VERSION: u32 = 1;
const CSV_TAG: &str = "wind-esn space-time v1";

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn read_field(path: &Path) -> Result<SpaceTimeField> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if is_csv(path) {
        let text = String::from_utf8(bytes).map_err(|_| CliError::format(path, "not UTF-8 text"))?;
        decode_csv(&text).map_err(|m| CliError::format(path, m))
    } else {
        decode_binary(&bytes).map_err(|m| CliError::format(path, m))
    }
}

/// Write without a sentinel; NaN values are rejected.
pub fn write_field(path: &Path, field: &SpaceTimeField) -> Result<()> {
    write_field_with(path, field, None)
}

pub fn write_field_with(path: &Path, field: &SpaceTimeField, missing: Option<f64>) -> Result<()> {
    if missing.is_none() && field.values().iter().any(|v| v.is_nan()) {
        return Err(CliError::format(path, "field contains NaN but no missing-value sentinel was declared"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let bytes = if is_csv(path) {
        encode_csv(field, missing).into_bytes()
    } else {
        encode_binary(field, missing)
    };
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| CliError::io(path, e))
}

pub fn encode_binary(field: &SpaceTimeField, missing: Option<f64>) -> Vec<u8> {
    let (n_t, n_l) = (field.n_times(), field.n_locations());
    let mut out = Vec::with_capacity(48 + n_l * 32 + n_t * n_l * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32::from(missing.is_some()).to_le_bytes());
    out.extend_from_slice(&missing.unwrap_or(0.0).to_le_bytes());
    for v in [field.start() as u64, 1, n_l as u64, n_t as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for loc in field.locations() {
        out.extend_from_slice(&(loc.id.len() as u32).to_le_bytes());
        out.extend_from_slice(loc.id.as_bytes());
        out.extend_from_slice(&loc.x.to_le_bytes());
        out.extend_from_slice(&loc.y.to_le_bytes());
    }
    let v = field.values();
    for t in 0..n_t {
        for j in 0..n_l {
            let x = v[(t, j)];
            let x = match missing {
                Some(s) if x.is_nan() => s,
                _ => x,
            };
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated file at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_binary(bytes: &[u8]) -> std::result::Result<SpaceTimeField, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err("not a wind-esn space-time file (bad magic)".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let flags = c.u32()?;
    let sentinel = c.f64()?;
    let start = c.u64()? as usize;
    let step = c.u64()?;
    if step != 1 {
        return Err(format!("time step {step} h; only hourly (1) is supported"));
    }
    let n_l = c.u64()? as usize;
    let n_t = c.u64()? as usize;
    let mut locs = Vec::with_capacity(n_l.min(1 << 20));
    for _ in 0..n_l {
        let len = c.u32()? as usize;
        let id = std::str::from_utf8(c.take(len)?).map_err(|_| "location id is not UTF-8".to_string())?;
        let (x, y) = (c.f64()?, c.f64()?);
        locs.push(Location::new(id, x, y));
    }
    let expected = n_t.checked_mul(n_l).and_then(|k| k.checked_mul(8)).ok_or("dimensions overflow")?;
    if bytes.len() - c.pos != expected {
        return Err(format!(
            "payload has {} bytes but the header declares {n_t} × {n_l} values ({expected} bytes)",
            bytes.len() - c.pos
        ));
    }
    let mut values = Matrix::zeros(n_t, n_l);
    for t in 0..n_t {
        for j in 0..n_l {
            values[(t, j)] = c.f64()?;
        }
    }
    finish(locs, start, values, (flags & 1 == 1).then_some(sentinel))
}

fn finish(
    locs: Vec<Location>,
    start: usize,
    mut values: Matrix,
    missing: Option<f64>,
) -> std::result::Result<SpaceTimeField, String> {
    match missing {
        Some(s) => values.iter_mut().filter(|v| **v == s).for_each(|v| *v = f64::NAN),
        None => {
            if let Some(k) = values.iter().position(|v| v.is_nan()) {
                let t = k % values.nrows().max(1);
                return Err(format!("NaN at time {} without a declared missing-value sentinel", start + t));
            }
        }
    }
    SpaceTimeField::new(locs, start, values).map_err(|e| e.to_string())
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that reads back to the same bits.
    format!("{v:?}")
}

pub fn encode_csv(field: &SpaceTimeField, missing: Option<f64>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let locs = field.locations();
    let row = |head: &str, vals: Vec<String>| {
        let mut r = vec![head.to_string()];
        r.extend(vals);
        r
    };
    w.write_record(row("id", locs.iter().map(|l| l.id.clone()).collect())).unwrap();
    w.write_record(row("x", locs.iter().map(|l| fmt_f64(l.x)).collect())).unwrap();
    w.write_record(row("y", locs.iter().map(|l| fmt_f64(l.y)).collect())).unwrap();
    let v = field.values();
    for t in 0..field.n_times() {
        let vals = (0..field.n_locations())
            .map(|j| match (v[(t, j)], missing) {
                (x, Some(s)) if x.is_nan() => fmt_f64(s),
                (x, _) => fmt_f64(x),
            })
            .collect();
        w.write_record(row(&(field.start() + t).to_string(), vals)).unwrap();
    }
    let body = String::from_utf8(w.into_inner().unwrap()).unwrap();
    let mut head = format!("# {CSV_TAG}\n# start={}\n", field.start());
    if let Some(s) = missing {
        head.push_str(&format!("# missing={}\n", fmt_f64(s)));
    }
    head + &body
}

pub fn decode_csv(text: &str) -> std::result::Result<SpaceTimeField, String> {
    let mut start = None;
    let mut missing = None;
    let mut tagged = false;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let meta = line.trim_start_matches('#').trim();
        if meta == CSV_TAG {
            tagged = true;
        } else if let Some(v) = meta.strip_prefix("start=") {
            start = Some(v.trim().parse::<usize>().map_err(|_| format!("bad start '{v}'"))?);
        } else if let Some(v) = meta.strip_prefix("missing=") {
            missing = Some(v.trim().parse::<f64>().map_err(|_| format!("bad missing sentinel '{v}'"))?);
        }
    }
    if !tagged {
        return Err(format!("missing '# {CSV_TAG}' header line"));
    }
    let start = start.ok_or("missing '# start=' header line")?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    if records.len() < 3 {
        return Err("expected id, x and y rows".into());
    }
    let labels = ["id", "x", "y"];
    for (r, l) in records.iter().zip(labels) {
        if r.get(0) != Some(l) {
            return Err(format!("expected a row starting with '{l}'"));
        }
    }
    let n_l = records[0].len() - 1;
    let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| format!("bad {what} '{s}'"));
    let mut locs = Vec::with_capacity(n_l);
    for j in 0..n_l {
        let x = num(&records[1][j + 1], "x coordinate")?;
        let y = num(&records[2][j + 1], "y coordinate")?;
        locs.push(Location::new(&records[0][j + 1], x, y));
    }
    let body = &records[3..];
    let mut values = Matrix::zeros(body.len(), n_l);
    for (t, r) in body.iter().enumerate() {
        if r.len() != n_l + 1 {
            return Err(format!("row for time index {} has {} values, expected {n_l}", start + t, r.len() - 1));
        }
        let ti: usize = r[0].parse().map_err(|_| format!("bad time index '{}'", &r[0]))?;
        if ti != start + t {
            return Err(format!("time index {ti} out of sequence (expected {})", start + t));
        }
        for j in 0..n_l {
            values[(t, j)] = num(&r[j + 1], "value")?;
        }
    }
    finish(locs, start, values, missing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SpaceTimeField {
        let locs = vec![Location::new("a", 1.5, -2.0), Location::new("b,c", 0.1, 0.2)];
        SpaceTimeField::new(locs, 7, Matrix::from_row_slice(3, 2, &[1.0, 2.0, 0.1 + 0.2, -4.5, 1e-300, 6.0])).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = sample();
        let bytes = encode_binary(&f, None);
        assert_eq!(decode_binary(&bytes).unwrap(), f);
        assert!(decode_binary(&bytes[..bytes.len() - 1]).unwrap_err().contains("payload"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_binary(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = sample();
        let text = encode_csv(&f, None);
        assert_eq!(decode_csv(&text).unwrap(), f);
    }

    #[test]
    fn missing_sentinel() {
        let mut v = sample().values().clone();
        v[(1, 0)] = f64::NAN;
        let f = SpaceTimeField::new(sample().locations().to_vec(), 0, v).unwrap();
        for enc in [decode_binary(&encode_binary(&f, Some(-999.0))).unwrap(), decode_csv(&encode_csv(&f, Some(-999.0))).unwrap()] {
            assert!(enc.values()[(1, 0)].is_nan());
            assert_eq!(enc.values()[(2, 1)], 6.0);
        }
        let text = encode_csv(&f, None);
        assert!(decode_csv(&text).unwrap_err().contains("NaN"));
    }

    #[test]
    fn csv_sequence_checked() {
        let text = "# wind-esn space-time v1\n# start=0\nid,a\nx,0\ny,0\n0,1\n2,1\n";
        assert!(decode_csv(text).unwrap_err().contains("sequence"));
    }
}
