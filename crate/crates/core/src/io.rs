//! File formats.
//!
//! A grid-function file is one line of JSON header followed by the cell
//! values in flat grid order (axis 0 fastest). The header names the payload
//! encoding: `csv` is one value per line in shortest round-trip decimal
//! form, `f64le` is raw little-endian IEEE-754 doubles. Maximal fields use
//! the same layout. The header may carry a `meta` object of string pairs
//! (tool version, configuration hash, ...) that readers ignore.
//!
//! A box-union file is a single JSON object `{"n": .., "boxes": [{"lo": [..],
//! "hi": [..]}, ..]}`; overlapping boxes are accepted and merged.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::grid::{BoxUnionIndicator, Grid, GridFunction};
use crate::operators::{MaximalField, TestFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Csv,
    F64le,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub n: usize,
    pub delta: f64,
    pub domain: DomainSpec,
    pub encoding: Encoding,
    pub len: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxUnionFile {
    pub n: usize,
    pub boxes: Vec<AxisBox>,
}

fn header_for(grid: &Grid, encoding: Encoding, meta: &BTreeMap<String, String>) -> GridHeader {
    GridHeader {
        n: grid.dim(),
        delta: grid.delta(),
        domain: DomainSpec {
            lo: grid.domain().lo().to_vec(),
            hi: grid.domain().hi().to_vec(),
        },
        encoding,
        len: grid.len(),
        meta: meta.clone(),
    }
}

/// Writes header and payload for cell values on `grid`.
pub fn write_grid_values<W: Write>(w: W, grid: &Grid, values: &[f64], encoding: Encoding) -> Result<()> {
    write_grid_values_with_meta(w, grid, values, encoding, &BTreeMap::new())
}

/// Like [`write_grid_values`] with extra string pairs in the header.
pub fn write_grid_values_with_meta<W: Write>(
    mut w: W,
    grid: &Grid,
    values: &[f64],
    encoding: Encoding,
    meta: &BTreeMap<String, String>,
) -> Result<()> {
    serde_json::to_writer(&mut w, &header_for(grid, encoding, meta))?;
    w.write_all(b"\n")?;
    match encoding {
        Encoding::Csv => {
            for v in values {
                writeln!(w, "{v:?}")?;
            }
        }
        Encoding::F64le => {
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_function<W: Write>(w: W, f: &GridFunction, encoding: Encoding) -> Result<()> {
    write_grid_values(w, f.grid(), f.values(), encoding)
}

pub fn write_field<W: Write>(w: W, field: &MaximalField, encoding: Encoding) -> Result<()> {
    write_grid_values(w, field.grid(), field.values(), encoding)
}

fn parse_payload(header: &GridHeader, body: &[u8]) -> Result<(Grid, Vec<f64>)> {
    if header.domain.lo.len() != header.n || header.domain.hi.len() != header.n {
        return Err(Error::Invalid("header domain does not match n".into()));
    }
    let grid = Grid::new(
        AxisBox::new(header.domain.lo.clone(), header.domain.hi.clone())?,
        header.delta,
    )?;
    if grid.len() != header.len {
        return Err(Error::Invalid(format!(
            "header declares {} values but the grid has {} cells",
            header.len,
            grid.len()
        )));
    }
    let values: Vec<f64> = match header.encoding {
        Encoding::Csv => std::str::from_utf8(body)
            .map_err(|e| Error::Invalid(format!("payload is not UTF-8: {e}")))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad value {l:?}: {e}")))
            })
            .collect::<Result<_>>()?,
        Encoding::F64le => {
            if !body.len().is_multiple_of(8) {
                return Err(Error::Invalid("binary payload length is not a multiple of 8".into()));
            }
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
    };
    if values.len() != header.len {
        return Err(Error::Invalid(format!(
            "expected {} values, found {}",
            header.len,
            values.len()
        )));
    }
    Ok((grid, values))
}

fn split_header(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let pos = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Invalid("missing header line".into()))?;
    Ok((&bytes[..pos], &bytes[pos + 1..]))
}

pub fn read_grid_function<R: Read>(mut r: R) -> Result<GridFunction> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let (head, body) = split_header(&bytes)?;
    let header: GridHeader = serde_json::from_slice(head)?;
    let (grid, values) = parse_payload(&header, body)?;
    GridFunction::new(grid, values)
}

pub fn read_field<R: Read>(mut r: R) -> Result<MaximalField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let (head, body) = split_header(&bytes)?;
    let header: GridHeader = serde_json::from_slice(head)?;
    let (grid, values) = parse_payload(&header, body)?;
    MaximalField::new(grid, values)
}

pub fn write_box_union<W: Write>(w: W, e: &BoxUnionIndicator, n: usize) -> Result<()> {
    let file = BoxUnionFile {
        n,
        boxes: e.boxes().to_vec(),
    };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

pub fn read_box_union<R: Read>(r: R) -> Result<(usize, BoxUnionIndicator)> {
    let file: BoxUnionFile = serde_json::from_reader(r)?;
    if let Some(b) = file.boxes.iter().find(|b| b.dim() != file.n) {
        return Err(Error::Invalid(format!(
            "box of dimension {} in a file declaring n = {}",
            b.dim(),
            file.n
        )));
    }
    for b in &file.boxes {
        // re-run the corner checks skipped by deserialization
        AxisBox::new(b.lo().to_vec(), b.hi().to_vec())?;
    }
    Ok((file.n, BoxUnionIndicator::from_union(&file.boxes)?))
}

/// Reads either file kind, telling them apart by the first line.
pub fn read_test_function<R: BufRead>(mut r: R) -> Result<(usize, TestFunction)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if let Ok((head, body)) = split_header(&bytes) {
        if let Ok(header) = serde_json::from_slice::<GridHeader>(head) {
            let (grid, values) = parse_payload(&header, body)?;
            return Ok((header.n, GridFunction::new(grid, values)?.into()));
        }
    }
    let (n, e) = read_box_union(bytes.as_slice())?;
    Ok((n, e.into()))
}

/// Writes serializable rows as CSV after `#`-prefixed preamble lines.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, preamble: &[String], rows: &[T]) -> Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> GridFunction {
        let g = Grid::new(AxisBox::new(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap(), 0.25).unwrap();
        GridFunction::from_fn(g, |x| (x[0] * 3.1).abs() + x[1] / 7.0).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &sample(), Encoding::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["delta"], 0.25);
        assert_eq!(v["encoding"], "csv");
        assert_eq!(v["len"], 16);
        assert_eq!(v["domain"]["lo"], serde_json::json!([-1.0, 0.0]));
        assert_eq!(text.lines().count(), 17);
        assert!(v.get("meta").is_none());
    }

    #[test]
    fn meta_roundtrip() {
        let f = sample();
        let meta = BTreeMap::from([("tool".to_string(), "x 1.0".to_string())]);
        let mut buf = Vec::new();
        write_grid_values_with_meta(&mut buf, f.grid(), f.values(), Encoding::Csv, &meta).unwrap();
        let (head, _) = split_header(&buf).unwrap();
        let h: GridHeader = serde_json::from_slice(head).unwrap();
        assert_eq!(h.meta, meta);
        assert_eq!(read_grid_function(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn binary_payload_is_little_endian() {
        let f = sample();
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f, Encoding::F64le).unwrap();
        let (_, body) = split_header(&buf).unwrap();
        assert_eq!(body.len(), 8 * f.values().len());
        assert_eq!(&body[..8], &f.values()[0].to_le_bytes());
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &sample(), Encoding::Csv).unwrap();
        buf.truncate(buf.len() - 6);
        let cut = buf.iter().rposition(|b| *b == b'\n').unwrap();
        buf.truncate(cut);
        assert!(read_grid_function(buf.as_slice()).is_err());
        assert!(read_grid_function(&b"no header"[..]).is_err());
    }

    #[test]
    fn box_union_files() {
        let text = r#"{"n": 2, "boxes": [{"lo": [0, 0], "hi": [1, 1]}, {"lo": [0.5, 0], "hi": [1.5, 1]}]}"#;
        let (n, e) = read_box_union(text.as_bytes()).unwrap();
        assert_eq!(n, 2);
        assert!((e.measure() - 1.5).abs() < 1e-12);
        let bad = r#"{"n": 3, "boxes": [{"lo": [0, 0], "hi": [1, 1]}]}"#;
        assert!(read_box_union(bad.as_bytes()).is_err());
        let flipped = r#"{"n": 1, "boxes": [{"lo": [1], "hi": [0]}]}"#;
        assert!(read_box_union(flipped.as_bytes()).is_err());
        let extra = r#"{"n": 1, "boxes": [], "colour": 3}"#;
        assert!(read_box_union(extra.as_bytes()).is_err());
        let (_, tf) = read_test_function(text.as_bytes()).unwrap();
        assert!(matches!(tf, TestFunction::Boxes(_)));
    }

    #[test]
    fn csv_preamble() {
        #[derive(Serialize)]
        struct Row {
            a: u32,
            b: f64,
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &["tool=x".into()], &[Row { a: 1, b: 0.5 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# tool=x\na,b\n1,0.5\n");
    }

    proptest! {
        #[test]
        fn grid_files_roundtrip(
            values in proptest::collection::vec(0.0f64..1e6, 16),
            binary in any::<bool>(),
        ) {
            let g = Grid::unit(2, 0.25).unwrap();
            let f = GridFunction::new(g, values).unwrap();
            let enc = if binary { Encoding::F64le } else { Encoding::Csv };
            let mut buf = Vec::new();
            write_grid_function(&mut buf, &f, enc).unwrap();
            let back = read_grid_function(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &f);
            let (_, tf) = read_test_function(buf.as_slice()).unwrap();
            prop_assert_eq!(tf, TestFunction::Grid(f));
        }
    }
}
