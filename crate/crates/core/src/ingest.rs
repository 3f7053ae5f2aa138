//! CSV loading, Max-Min normalization and the binary table cache.
//!
//! Cache layout (`<path>` plus `<path>.schema`):
//!
//! * `<path>`: `d * n` little-endian `f64` values, column-major: all `n`
//!   values of column 0, then column 1, and so on. No header.
//! * `<path>.schema`: UTF-8 text. First line `rows=<n>`, then one
//!   `name,kind` line per column in order, `kind` being `numeric` or
//!   `categorical`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ColumnKind, Schema, Table};

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }
}

/// Un-normalized table as parsed from CSV; row ids follow file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: Schema,
    pub columns: Vec<RawColumn>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.columns.first().map(RawColumn::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sorted unique raw values per categorical column. Code `i` maps to
/// `i / (u - 1)` (or 0 when the column has one value).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDictionary {
    pub columns: BTreeMap<usize, Vec<String>>,
}

impl CategoricalDictionary {
    pub fn code(&self, col: usize, raw: &str) -> Option<usize> {
        self.columns
            .get(&col)
            .and_then(|vals| vals.binary_search_by(|v| v.as_str().cmp(raw)).ok())
    }

    pub fn normalized(&self, col: usize, raw: &str) -> Option<f64> {
        let vals = self.columns.get(&col)?;
        let code = self.code(col, raw)?;
        Some(if vals.len() > 1 {
            code as f64 / (vals.len() - 1) as f64
        } else {
            0.0
        })
    }
}

/// Schema hint: one `name,kind` line per column. Blank lines and `#`
/// comments are skipped.
pub fn parse_schema_hint(text: &str) -> Result<Schema> {
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(i + 1, "expected `name,kind`"))?;
        let kind: ColumnKind = kind
            .parse()
            .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
        names.push(name.trim().to_string());
        kinds.push(kind);
    }
    Schema::new(names, kinds)
}

pub fn read_schema_hint(path: &Path) -> Result<Schema> {
    parse_schema_hint(&fs::read_to_string(path)?)
}

pub fn load_table(path: &Path, hint: &Schema) -> Result<RawTable> {
    load_table_from(fs::File::open(path)?, hint)
}

/// Parse CSV with a header row. Line numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn load_table_from<R: Read>(reader: R, hint: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_len = rdr.headers()?.len();
    if header_len != hint.dims() {
        return Err(Error::parse(
            1,
            format!("header has {header_len} columns, schema hint has {}", hint.dims()),
        ));
    }
    let mut columns: Vec<RawColumn> = hint
        .kinds()
        .iter()
        .map(|k| match k {
            ColumnKind::Numeric => RawColumn::Numeric(Vec::new()),
            ColumnKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != hint.dims() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, got {}", hint.dims(), rec.len()),
            ));
        }
        for (k, (field, col)) in rec.iter().zip(columns.iter_mut()).enumerate() {
            if field.is_empty() {
                return Err(Error::parse(
                    line,
                    format!("missing value in column `{}`", hint.names()[k]),
                ));
            }
            match col {
                RawColumn::Numeric(v) => {
                    let x: f64 = field.parse().map_err(|_| {
                        Error::parse(
                            line,
                            format!("`{field}` is not numeric (column `{}`)", hint.names()[k]),
                        )
                    })?;
                    if !x.is_finite() {
                        return Err(Error::parse(line, format!("non-finite value `{field}`")));
                    }
                    v.push(x);
                }
                RawColumn::Categorical(v) => v.push(field.to_string()),
            }
        }
    }
    Ok(RawTable {
        schema: hint.clone(),
        columns,
    })
}

fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if v == hi { 1.0 } else { (v - lo) / span })
        .collect()
}

pub fn normalize(raw: &RawTable) -> Result<(Table, CategoricalDictionary)> {
    let n = raw.len();
    let d = raw.schema.dims();
    let mut dict = CategoricalDictionary::default();
    let mut data = vec![0.0; n * d];
    for (k, col) in raw.columns.iter().enumerate() {
        let scaled = match col {
            RawColumn::Numeric(v) => min_max_scale(v),
            RawColumn::Categorical(v) => {
                let mut uniq: Vec<String> = v.clone();
                uniq.sort_unstable();
                uniq.dedup();
                let codes: Vec<f64> = v
                    .iter()
                    .map(|s| uniq.binary_search(s).expect("value present") as f64)
                    .collect();
                dict.columns.insert(k, uniq);
                min_max_scale(&codes)
            }
        };
        for (i, x) in scaled.into_iter().enumerate() {
            data[i * d + k] = x;
        }
    }
    Ok((Table::new(raw.schema.clone(), data)?, dict))
}

pub fn schema_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema");
    PathBuf::from(s)
}

pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    let n = table.len();
    let d = table.dims();
    let mut w = BufWriter::new(fs::File::create(path)?);
    for k in 0..d {
        for i in 0..n {
            w.write_all(&table.data()[i * d + k].to_le_bytes())?;
        }
    }
    w.flush()?;
    let mut s = format!("rows={n}\n");
    for (name, kind) in table.schema().names().iter().zip(table.schema().kinds()) {
        s.push_str(&format!("{name},{kind}\n"));
    }
    fs::write(schema_sidecar(path), s)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let sidecar = fs::File::open(schema_sidecar(path))?;
    let mut lines = BufReader::new(sidecar).lines();
    let first = lines.next().ok_or_else(|| Error::parse(1, "empty schema sidecar"))??;
    let n: usize = first
        .trim()
        .strip_prefix("rows=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected `rows=<n>`"))?;
    let rest: Vec<String> = lines.collect::<std::io::Result<_>>()?;
    let schema = parse_schema_hint(&rest.join("\n"))?;
    let d = schema.dims();
    let bytes = fs::read(path)?;
    if bytes.len() != n * d * 8 {
        return Err(Error::Schema(format!(
            "cache holds {} bytes, expected {} for {n} rows x {d} columns",
            bytes.len(),
            n * d * 8
        )));
    }
    let mut data = vec![0.0; n * d];
    for (j, chunk) in bytes.chunks_exact(8).enumerate() {
        let (k, i) = (j / n.max(1), j % n.max(1));
        data[i * d + k] = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Table::new(schema, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hint(text: &str) -> Schema {
        parse_schema_hint(text).unwrap()
    }

    #[test]
    fn loads_rows_in_file_order() {
        let csv = "a,b\n1,2\n3,4\n5,6\n";
        let raw = load_table_from(csv.as_bytes(), &hint("a,numeric\nb,numeric")).unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw.columns[0], RawColumn::Numeric(vec![1.0, 3.0, 5.0]));
    }

    #[test]
    fn bad_token_names_line() {
        let csv = "a,b\n1,2\n3,x\n";
        let err = load_table_from(csv.as_bytes(), &hint("a,numeric\nb,numeric")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_value_rejected() {
        let csv = "a,b\n1,\n";
        assert!(matches!(
            load_table_from(csv.as_bytes(), &hint("a,numeric\nb,numeric")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(parse_schema_hint("a,float").is_err());
    }

    #[test]
    fn power_shaped_schema() {
        let names = ["date", "time", "gap", "grp", "volt", "gi", "sub1"];
        let text: String = names.iter().map(|n| format!("{n},numeric\n")).collect();
        let h = hint(&text);
        let mut csv = names.join(",") + "\n";
        csv.push_str("1,2,3,4,5,6,7\n");
        let raw = load_table_from(csv.as_bytes(), &h).unwrap();
        assert_eq!(raw.schema.dims(), 7);
        assert_eq!(raw.schema.categorical_count(), 0);
    }

    #[test]
    fn normalize_examples() {
        let csv = "x,c,k\n2,b,5\n4,a,5\n6,b,5\n";
        let raw = load_table_from(csv.as_bytes(), &hint("x,numeric\nc,categorical\nk,numeric"))
            .unwrap();
        let (t, dict) = normalize(&raw).unwrap();
        let col = |k: usize| t.rows().map(|r| r[k]).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(col(1), vec![1.0, 0.0, 1.0]);
        assert_eq!(col(2), vec![0.0, 0.0, 0.0]);
        assert_eq!(dict.code(1, "a"), Some(0));
        assert_eq!(dict.code(1, "b"), Some(1));
        assert_eq!(dict.normalized(1, "b"), Some(1.0));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let t = Table::from_rows(
            Schema::new(
                vec!["a".into(), "b".into()],
                vec![ColumnKind::Numeric, ColumnKind::Categorical],
            )
            .unwrap(),
            &[vec![0.0, 0.25], vec![1.0, 0.5], vec![0.125, 1.0]],
        )
        .unwrap();
        write_table(&t, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 3 * 2 * 8);
        // column-major: first value of column 1 sits after all of column 0
        let bytes = fs::read(&path).unwrap();
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.25);
        assert_eq!(read_table(&path).unwrap(), t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalized_values_in_unit_range(vals in prop::collection::vec(-1e6..1e6f64, 1..40)) {
                let raw = RawTable {
                    schema: Schema::numeric(1),
                    columns: vec![RawColumn::Numeric(vals.clone())],
                };
                let (t, _) = normalize(&raw).unwrap();
                let out: Vec<f64> = t.rows().map(|r| r[0]).collect();
                prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    prop_assert_eq!(out.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
                    prop_assert_eq!(out.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
                }
            }
        }
    }
}
