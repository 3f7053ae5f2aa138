use crate::types::{Query, RowId, Table};

/// One bit-vector of width `|W|` per row; bit `j` of row `i` is set when
/// row `i` satisfies query `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    rows: usize,
    width: usize,
    words: usize,
    bits: Vec<u64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, width: usize) -> Self {
        let words = width.div_ceil(64).max(1);
        Self {
            rows,
            width,
            words,
            bits: vec![0; rows * words],
        }
    }

    /// Build from explicit 0/1 rows (mainly for tests and page features).
    pub fn from_bool_rows(rows: &[Vec<bool>]) -> Self {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut m = Self::zeros(rows.len(), width);
        for (i, r) in rows.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                if b {
                    m.set(i, j);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn popcount(&self, i: usize) -> u32 {
        self.row(i).iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn row_string(&self, i: usize) -> String {
        (0..self.width)
            .map(|j| if self.get(i, j) { '1' } else { '0' })
            .collect()
    }
}

/// Encode the rows `rows` of `table` against `workload`; feature row `i`
/// belongs to `rows[i]`.
pub fn encode_tuples(table: &Table, rows: &[RowId], workload: &[Query]) -> FeatureMatrix {
    let mut m = FeatureMatrix::zeros(rows.len(), workload.len());
    let Ok(mbr) = table.mbr_of_rows(rows) else {
        return m;
    };
    let live: Vec<usize> = (0..workload.len())
        .filter(|&j| workload[j].intersects(&mbr))
        .collect();
    for (i, &r) in rows.iter().enumerate() {
        let t = table.row(r);
        for &j in &live {
            if workload[j].matches(t) {
                m.set(i, j);
            }
        }
    }
    m
}
