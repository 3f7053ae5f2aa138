//! Domain types shared across the crate: tables, range queries, bounding
//! boxes and blocks, plus the geometric predicates used for pruning.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RowId = u32;
pub type BlockId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "numeric" | "num" => Ok(ColumnKind::Numeric),
            "categorical" | "cat" => Ok(ColumnKind::Categorical),
            other => Err(Error::Schema(format!("unknown column kind `{other}`"))),
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
}

impl Schema {
    pub fn new(names: Vec<String>, kinds: Vec<ColumnKind>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("at least one column is required".into()));
        }
        if names.len() != kinds.len() {
            return Err(Error::Schema(format!(
                "{} names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Schema(format!("duplicate column name `{n}`")));
            }
        }
        Ok(Self { names, kinds })
    }

    /// All-numeric schema with generated names `c0..c{d-1}`.
    pub fn numeric(dims: usize) -> Self {
        Self::new(
            (0..dims).map(|i| format!("c{i}")).collect(),
            vec![ColumnKind::Numeric; dims],
        )
        .expect("generated schema is valid")
    }

    pub fn dims(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn categorical_count(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| **k == ColumnKind::Categorical)
            .count()
    }
}

/// A normalized table stored row-major. Row `i` has row id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    data: Vec<f64>,
}

impl Table {
    pub fn new(schema: Schema, data: Vec<f64>) -> Result<Self> {
        let d = schema.dims();
        if !data.len().is_multiple_of(d) {
            return Err(Error::Schema(format!(
                "{} values do not form rows of width {d}",
                data.len()
            )));
        }
        if data.len() / d > RowId::MAX as usize {
            return Err(Error::Schema("too many rows for 32-bit row ids".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(pos / d, "non-finite value"));
        }
        Ok(Self { schema, data })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<f64>]) -> Result<Self> {
        let d = schema.dims();
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::parse(i, format!("expected {d} values, got {}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(schema, data)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dims(&self) -> usize {
        self.schema.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.schema.dims()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, id: RowId) -> &[f64] {
        let d = self.dims();
        let s = id as usize * d;
        &self.data[s..s + d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_ids(&self) -> Vec<RowId> {
        (0..self.len() as RowId).collect()
    }

    /// MBR of a subset of rows.
    pub fn mbr_of_rows(&self, ids: &[RowId]) -> Result<Mbr> {
        mbr_of(ids.iter().map(|&i| self.row(i)))
    }

    /// Number of rows in `ids` that satisfy `q`.
    pub fn count_matching(&self, q: &Query, ids: &[RowId]) -> usize {
        ids.iter().filter(|&&i| q.matches(self.row(i))).count()
    }
}

/// One open-interval predicate `lo < col < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub col: usize,
    pub lo: f64,
    pub hi: f64,
}

/// A conjunctive range query; bounds are sorted by column and unique per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: u32,
    bounds: Vec<Bound>,
}

impl Query {
    pub fn new(id: u32, mut bounds: Vec<Bound>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidQuery(format!("query {id} bounds no column")));
        }
        bounds.sort_by_key(|b| b.col);
        for w in bounds.windows(2) {
            if w[0].col == w[1].col {
                return Err(Error::InvalidQuery(format!(
                    "query {id} bounds column {} twice",
                    w[0].col
                )));
            }
        }
        for b in &bounds {
            if !(b.lo.is_finite() && b.hi.is_finite()) || b.lo >= b.hi {
                return Err(Error::InvalidQuery(format!(
                    "query {id}: column {} needs lo < hi, got ({}, {})",
                    b.col, b.lo, b.hi
                )));
            }
        }
        Ok(Self { id, bounds })
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.id = id;
        self
    }

    /// Largest column index referenced, used to check against table width.
    pub fn max_col(&self) -> usize {
        self.bounds.last().map(|b| b.col).unwrap_or(0)
    }

    #[inline]
    pub fn matches(&self, t: &[f64]) -> bool {
        tuple_satisfies(self, t)
    }

    #[inline]
    pub fn intersects(&self, m: &Mbr) -> bool {
        query_intersects(self, m)
    }

    /// True when every point of `m` satisfies the query.
    pub fn contains_mbr(&self, m: &Mbr) -> bool {
        self.bounds
            .iter()
            .all(|b| b.lo < m.min[b.col] && m.max[b.col] < b.hi)
    }
}

/// `l_k < t[k] < u_k` for every bounded column `k`.
#[inline]
pub fn tuple_satisfies(q: &Query, t: &[f64]) -> bool {
    q.bounds.iter().all(|b| {
        let v = t[b.col];
        b.lo < v && v < b.hi
    })
}

/// Open query box against closed MBR. A tuple `v` inside the MBR with
/// `lo < v < hi` forces `min < hi` and `max > lo`, so this never prunes a
/// block holding a match.
#[inline]
pub fn query_intersects(q: &Query, m: &Mbr) -> bool {
    q.bounds
        .iter()
        .all(|b| m.min[b.col] < b.hi && m.max[b.col] > b.lo)
}

/// Per-dimension min/max (Max-Min index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mbr {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Mbr {
    pub fn point(p: &[f64]) -> Self {
        Self {
            min: p.to_vec(),
            max: p.to_vec(),
        }
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn extend(&mut self, p: &[f64]) {
        for (k, &v) in p.iter().enumerate() {
            if v < self.min[k] {
                self.min[k] = v;
            }
            if v > self.max[k] {
                self.max[k] = v;
            }
        }
    }

    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            min: self.min.iter().zip(&other.min).map(|(a, b)| a.min(*b)).collect(),
            max: self.max.iter().zip(&other.max).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(k, &v)| self.min[k] <= v && v <= self.max[k])
    }

    pub fn encloses(&self, other: &Mbr) -> bool {
        (0..self.dims()).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn center(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

pub fn mbr_of<'a>(mut tuples: impl Iterator<Item = &'a [f64]>) -> Result<Mbr> {
    let first = tuples.next().ok_or(Error::EmptyBlock)?;
    let mut m = Mbr::point(first);
    for t in tuples {
        m.extend(t);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    #[default]
    Cloud,
    Edge,
    End,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Cloud => "cloud",
            Tier::Edge => "edge",
            Tier::End => "end",
        })
    }
}

/// The migration unit: a capacity-bounded group of rows with its Max-Min
/// index, temperature and current tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub rows: Vec<RowId>,
    pub mbr: Mbr,
    pub heat: f64,
    pub hits: u64,
    pub placement: Tier,
}

impl Block {
    pub fn new(id: BlockId, table: &Table, rows: Vec<RowId>) -> Result<Self> {
        let mbr = table.mbr_of_rows(&rows)?;
        Ok(Self {
            id,
            rows,
            mbr,
            heat: 0.0,
            hits: 0,
            placement: Tier::Cloud,
        })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }
}

/// Sort row ids by their value vectors, lexicographically in schema column
/// order, ties by row id.
pub fn sort_lexicographic(table: &Table, rows: &mut [RowId]) {
    rows.sort_unstable_by(|&a, &b| {
        let (ra, rb) = (table.row(a), table.row(b));
        for (x, y) in ra.iter().zip(rb) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });
}
