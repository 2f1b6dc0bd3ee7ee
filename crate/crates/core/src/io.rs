//! Field checkpoints, CSV tables and graymap heatmaps.
//!
//! A field block is one ASCII header line `KRF1 <kind> <n> <t>`, optionally
//! followed by a ` cfg=<hash>` token, then `n²` little-endian `f64` values,
//! row-major with `x` fastest.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::metric::{DistanceField, HolderFit};
use crate::torus::{ScalarField, TorusGrid};

pub const MAGIC: &str = "KRF1";

/// Header of one field block.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub kind: String,
    pub n: usize,
    pub t: f64,
    pub config_hash: Option<String>,
}

pub fn write_field(
    w: &mut impl Write,
    kind: &str,
    t: f64,
    field: &ScalarField,
    config_hash: Option<&str>,
) -> Result<()> {
    if kind.is_empty() || kind.contains(char::is_whitespace) {
        return Err(Error::Format(format!(
            "field kind {kind:?} must be one word"
        )));
    }
    let n = field.grid().n();
    match config_hash {
        Some(h) => writeln!(w, "{MAGIC} {kind} {n} {t:e} cfg={h}")?,
        None => writeln!(w, "{MAGIC} {kind} {n} {t:e}")?,
    }
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn parse_header(line: &str) -> Result<FieldHeader> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.first() != Some(&MAGIC) {
        return Err(Error::Format(format!(
            "missing {MAGIC} magic in header {line:?}"
        )));
    }
    if !(4..=5).contains(&tokens.len()) {
        return Err(Error::Format(format!("header {line:?} must have 4 fields")));
    }
    let n: usize = tokens[2]
        .parse()
        .map_err(|_| Error::Format(format!("bad grid size {:?}", tokens[2])))?;
    let t: f64 = tokens[3]
        .parse()
        .map_err(|_| Error::Format(format!("bad time {:?}", tokens[3])))?;
    let config_hash = match tokens.get(4) {
        Some(tok) => Some(
            tok.strip_prefix("cfg=")
                .ok_or_else(|| Error::Format(format!("unexpected header token {tok:?}")))?
                .to_string(),
        ),
        None => None,
    };
    Ok(FieldHeader {
        kind: tokens[1].to_string(),
        n,
        t,
        config_hash,
    })
}

/// Reads one block; `Ok(None)` at a clean end of input.
pub fn read_field(r: &mut impl BufRead) -> Result<Option<(FieldHeader, ScalarField)>> {
    let mut line = Vec::new();
    if r.read_until(b'\n', &mut line)? == 0 {
        return Ok(None);
    }
    let text = std::str::from_utf8(&line)
        .map_err(|_| Error::Format("header is not ASCII".into()))?
        .trim_end();
    let header = parse_header(text)?;
    let grid = TorusGrid::new(header.n)
        .map_err(|_| Error::Format(format!("grid size {} is not supported", header.n)))?;
    let mut bytes = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut bytes).map_err(|e| {
        Error::Format(format!(
            "{} block truncated: expected {} values ({e})",
            header.kind,
            grid.len()
        ))
    })?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Some((
        header,
        ScalarField::from_values_unchecked(&grid, values),
    )))
}

/// All blocks of a stream, in order.
pub fn read_fields(r: &mut impl BufRead) -> Result<Vec<(FieldHeader, ScalarField)>> {
    let mut out = Vec::new();
    while let Some(block) = read_field(r)? {
        out.push(block);
    }
    Ok(out)
}

/// First line of every CSV file carrying a config hash.
pub fn hash_line(config_hash: &str) -> String {
    format!("# config {config_hash}")
}

pub const DISTANCES_HEADER: &str =
    "source_x,source_y,target_x,target_y,d_value,method,metric_tag,t_or_limit";

/// Rows of `distances.csv` for `(field, node)` pairs; `time` is `None` for the limit.
pub fn distance_rows(
    fields: &[DistanceField],
    pairs: &[(usize, usize)],
    time: Option<f64>,
) -> Vec<String> {
    let when = time.map_or_else(|| "limit".to_string(), |t| format!("{t:e}"));
    pairs
        .iter()
        .map(|&(i, k)| {
            let f = &fields[i];
            let p = f.values.grid().point(k);
            format!(
                "{:.12},{:.12},{:.12},{:.12},{:.12e},{},{},{}",
                f.source.x,
                f.source.y,
                p.x,
                p.y,
                f.at(k),
                f.method,
                f.metric.replace(',', ";"),
                when
            )
        })
        .collect()
}

pub const HOLDER_HEADER: &str = "label,exponent,constant,residual,direction";

pub fn holder_row(label: &str, fit: &HolderFit) -> String {
    format!(
        "{label},{:.9e},{:.9e},{:.9e},{}",
        fit.alpha, fit.constant, fit.residual, fit.direction
    )
}

/// Binary graymap of `field` scaled linearly from its minimum (black) to
/// its maximum (white), `y` increasing upwards.
pub fn write_pgm(w: &mut impl Write, field: &ScalarField, config_hash: Option<&str>) -> Result<()> {
    let n = field.grid().n();
    let finite = field.values().iter().filter(|v| v.is_finite());
    let lo = finite.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    writeln!(w, "P5")?;
    if let Some(h) = config_hash {
        writeln!(w, "# config {h}")?;
    }
    write!(w, "# range {lo:e} {hi:e}\n{n} {n}\n255\n")?;
    let mut buf = Vec::with_capacity(n * n);
    for j in (0..n).rev() {
        for i in 0..n {
            let v = field.at(i, j);
            let g = if v.is_finite() {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else if v > 0.0 {
                255
            } else {
                0
            };
            buf.push(g);
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn blocks_round_trip_bit_for_bit() {
        let g = TorusGrid::new(64).unwrap();
        let a = g.from_fn(|p| (p.x * 7.0).sin() + p.y.powi(3));
        let b = g.from_fn(|p| -1e-300 * p.x);
        let mut out = Vec::new();
        write_field(&mut out, "phi", 0.125, &a, Some("abc123")).unwrap();
        write_field(&mut out, "u", 0.125, &b, None).unwrap();
        let blocks = read_fields(&mut Cursor::new(out)).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].0.kind, "phi");
        assert_eq!(blocks[0].0.config_hash.as_deref(), Some("abc123"));
        assert_eq!(blocks[1].0.t, 0.125);
        assert_eq!(blocks[0].1.values(), a.values());
        assert_eq!(blocks[1].1.values(), b.values());
    }

    #[test]
    fn header_is_ascii_and_layout_is_x_fastest() {
        let g = TorusGrid::new(64).unwrap();
        let f = g.from_fn_index(|i, j| (i + 1000 * j) as f64);
        let mut out = Vec::new();
        write_field(&mut out, "u", 1.0, &f, None).unwrap();
        let nl = out.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(std::str::from_utf8(&out[..nl]).unwrap(), "KRF1 u 64 1e0");
        let second = f64::from_le_bytes(out[nl + 9..nl + 17].try_into().unwrap());
        assert_eq!(second, 1.0);
        assert_eq!(out.len(), nl + 1 + 8 * 64 * 64);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_field(&mut Cursor::new(b"KRF2 u 64 0\n".to_vec())).is_err());
        assert!(read_field(&mut Cursor::new(b"KRF1 u 64 0\n\x00\x01".to_vec())).is_err());
        assert!(read_field(&mut Cursor::new(b"KRF1 u 63 0\n".to_vec())).is_err());
        assert!(read_field(&mut Cursor::new(b"KRF1 u 64 0 extra\n".to_vec())).is_err());
        assert!(read_field(&mut Cursor::new(Vec::new())).unwrap().is_none());
    }

    #[test]
    fn graymap_has_expected_size() {
        let g = TorusGrid::new(64).unwrap();
        let f = g.from_fn(|p| p.x);
        let mut out = Vec::new();
        write_pgm(&mut out, &f, Some("h")).unwrap();
        assert!(out.starts_with(b"P5\n# config h\n"));
        let header_end = out.len() - 64 * 64;
        assert_eq!(out[header_end], 0);
        assert_eq!(out[out.len() - 1], 255);
        assert!(std::str::from_utf8(&out[..header_end])
            .unwrap()
            .ends_with("64 64\n255\n"));
    }
}
