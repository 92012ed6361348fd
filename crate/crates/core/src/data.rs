//! Observation matrices, pair indexing, CSV ingestion and seeded random
//! streams.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An `n × p` matrix of observations, rows are samples and columns are
/// variables. Stored column-major.
///
/// Construction rejects non-finite entries, fewer than three rows, fewer
/// than two columns and columns with zero sample variance, so downstream
/// correlation code never divides by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<S = f64> {
    n: usize,
    p: usize,
    values: Vec<S>,
    names: Option<Vec<String>>,
}

impl<S: Scalar> DataMatrix<S> {
    pub fn from_column_major(n: usize, p: usize, values: Vec<S>) -> Result<Self> {
        Self::build(n, p, values, None)
    }

    fn build(n: usize, p: usize, values: Vec<S>, names: Option<Vec<String>>) -> Result<Self> {
        if let Some(names) = &names {
            if names.len() != p {
                return Err(Error::InvalidData(format!(
                    "{} column names for {p} columns",
                    names.len()
                )));
            }
        }
        let m = DataMatrix {
            n,
            p,
            values,
            names,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_columns(columns: Vec<Vec<S>>) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(j) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidData(format!(
                "column {} has {} rows, expected {n}",
                j + 1,
                columns[j].len()
            )));
        }
        Self::from_column_major(n, p, columns.into_iter().flatten().collect())
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        Self::from_rows_named(rows, None)
    }

    fn from_rows_named(rows: &[Vec<S>], names: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidData(format!(
                "row {} has {} fields, expected {p}",
                i + 1,
                rows[i].len()
            )));
        }
        let mut values = Vec::with_capacity(n * p);
        for j in 0..p {
            values.extend(rows.iter().map(|r| r[j]));
        }
        Self::build(n, p, values, names)
    }

    pub fn with_names(self, names: Vec<String>) -> Result<Self> {
        Self::build(self.n, self.p, self.values, Some(names))
    }

    /// Skips validation; callers guarantee every column is a rearrangement
    /// of a column that already passed it.
    pub(crate) fn from_parts_unchecked(
        n: usize,
        p: usize,
        values: Vec<S>,
        names: Option<Vec<String>>,
    ) -> Self {
        debug_assert_eq!(values.len(), n * p);
        DataMatrix {
            n,
            p,
            values,
            names,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.n * self.p {
            return Err(Error::InvalidData(format!(
                "{} values for a {}x{} matrix",
                self.values.len(),
                self.n,
                self.p
            )));
        }
        if self.n < 3 {
            return Err(Error::InvalidData(format!(
                "need at least 3 observations, got {}",
                self.n
            )));
        }
        if self.p < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 variables, got {}",
                self.p
            )));
        }
        for j in 0..self.p {
            let col = self.column(j);
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return Err(Error::DegenerateColumn {
                    name: self.column_name(j),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of distinct variable pairs, `p(p-1)/2`.
    #[inline]
    pub fn p_star(&self) -> usize {
        pair_count(self.p)
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[S] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> S {
        self.values[col * self.n + row]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.values.chunks_exact(self.n)
    }

    pub fn as_column_major(&self) -> &[S] {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Header name if one was loaded, else the 1-based column number.
    pub fn column_name(&self, j: usize) -> String {
        self.names
            .as_ref()
            .map_or_else(|| format!("{}", j + 1), |names| names[j].clone())
    }

    /// Applies `x ↦ f(j, x)` to every entry of column `j`, revalidating.
    pub fn map_columns(&self, f: impl Fn(usize, S) -> S) -> Result<Self> {
        let mut values = self.values.clone();
        for (j, col) in values.chunks_exact_mut(self.n).enumerate() {
            for v in col {
                *v = f(j, *v);
            }
        }
        let m = DataMatrix {
            n: self.n,
            p: self.p,
            values,
            names: self.names.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn cast<T: Scalar>(&self) -> DataMatrix<T> {
        DataMatrix {
            n: self.n,
            p: self.p,
            values: self.values.iter().map(|v| T::lit(v.as_f64())).collect(),
            names: self.names.clone(),
        }
    }
}

/// `p(p-1)/2`.
#[inline]
pub const fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// A variable pair `(i, j)`, 1-based with `i < j`.
///
/// Pairs are enumerated row-major: `(1,2), (1,3), …, (1,p), (2,3), …`.
/// [`PairIndex::flat`] is the 0-based position in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairIndex {
    i: usize,
    j: usize,
}

impl PairIndex {
    pub fn new(i: usize, j: usize, p: usize) -> Result<Self> {
        if !(1 <= i && i < j && j <= p) {
            return Err(Error::InvalidData(format!(
                "pair ({i}, {j}) violates 1 <= i < j <= {p}"
            )));
        }
        Ok(PairIndex { i, j })
    }

    #[inline]
    pub fn i(&self) -> usize {
        self.i
    }

    #[inline]
    pub fn j(&self) -> usize {
        self.j
    }

    /// 0-based position in the row-major enumeration for dimension `p`.
    pub fn flat(&self, p: usize) -> usize {
        let i0 = self.i - 1;
        // pairs before row i0: sum_{r < i0} (p - 1 - r)
        i0 * (2 * p - i0 - 1) / 2 + (self.j - self.i - 1)
    }

    pub fn from_flat(flat: usize, p: usize) -> Result<Self> {
        if flat >= pair_count(p) {
            return Err(Error::InvalidData(format!(
                "flat pair index {flat} >= p* = {}",
                pair_count(p)
            )));
        }
        let mut rest = flat;
        let mut i = 1;
        while rest >= p - i {
            rest -= p - i;
            i += 1;
        }
        Ok(PairIndex { i, j: i + 1 + rest })
    }

    /// All pairs for dimension `p` in enumeration order.
    pub fn all(p: usize) -> impl Iterator<Item = PairIndex> {
        (1..p).flat_map(move |i| (i + 1..=p).map(move |j| PairIndex { i, j }))
    }
}

/// Reads a comma-separated numeric file into a [`DataMatrix`].
///
/// Rows become observations. Empty fields are treated as missing values and
/// rejected, as are non-numeric fields; both errors carry the 1-based line
/// and column of the offending field.
pub fn load_csv<S: Scalar>(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix<S>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, has_header)
}

pub fn read_csv<S: Scalar, R: std::io::Read>(reader: R, has_header: bool) -> Result<DataMatrix<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let names = if has_header {
        let header = rdr.headers().map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            detail: e.to_string(),
        })?;
        Some(header.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };

    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            detail: e.to_string(),
        })?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(expected) + 1,
                detail: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::Parse {
                    row: line,
                    column: c + 1,
                    detail: "missing value".into(),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: c + 1,
                detail: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: c + 1,
                    detail: format!("{field:?} is not finite"),
                });
            }
            row.push(S::lit(v));
        }
        rows.push(row);
    }

    DataMatrix::from_rows_named(&rows, names)
}

/// Identifies one reproducible random stream.
///
/// The generator is ChaCha8 (`rand_chacha`): the 256-bit key is expanded
/// from `master_seed` by `SeedableRng::seed_from_u64`, and `stream_index`
/// selects the ChaCha stream (nonce). Streams with the same key and
/// different indices are independent keystreams, so replicate `r` can use
/// stream `r` on whichever thread happens to run it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSpec {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        RngSpec {
            master_seed,
            stream_index,
        }
    }

    /// Stream `index` of a fresh key derived from this spec. Used for nested
    /// experiments: the children of two different specs never share a key
    /// except by a 64-bit hash collision.
    pub fn child(&self, index: u64) -> RngSpec {
        RngSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_index)),
            stream_index: index,
        }
    }

    pub fn stream(&self) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        RngStream(rng)
    }
}

/// Deterministic random source for one [`RngSpec`].
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(rand_distr::StandardNormal)
    }

    /// In-place Fisher–Yates shuffle (Durstenfeld form, drawing
    /// `j ∈ [0, i]` for `i = len-1, …, 1`).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.0.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        self.shuffle(&mut perm);
        perm
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str, header: bool) -> Result<DataMatrix<f64>> {
        read_csv(text.as_bytes(), header)
    }

    #[test]
    fn small_csv_loads() {
        let m = csv("1,1\n2,2\n3,4", false).unwrap();
        assert_eq!((m.n(), m.p()), (3, 2));
        assert_eq!(m.column(1), &[1.0, 2.0, 4.0]);
        assert_eq!(m.get(2, 1), 4.0);
    }

    #[test]
    fn header_names_are_kept() {
        let m = csv("a,b\n1,1\n2,2\n3,4\n", true).unwrap();
        assert_eq!(m.names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn constant_column_is_rejected() {
        let err = csv("x,y\n1,5\n2,5\n3,5", true).unwrap_err();
        match err {
            Error::DegenerateColumn { name } => assert_eq!(name, "y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_location() {
        match csv("1,2\n3,abc\n5,6", false).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        match csv("a,b\n1,2\n3,abc\n5,6", true).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_ragged_rows_are_errors() {
        assert!(matches!(
            csv("1,2\n3,\n5,6", false),
            Err(Error::Parse { row: 2, column: 2, .. })
        ));
        assert!(matches!(
            csv("1,2\n3,4,5\n5,6", false),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(csv("1,2\n3,4", false), Err(Error::InvalidData(_))));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(DataMatrix::from_columns(vec![vec![1.0, f64::NAN, 2.0], vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn pair_enumeration_order() {
        let pairs: Vec<_> = PairIndex::all(3).map(|q| (q.i(), q.j())).collect();
        assert_eq!(pairs, vec![(1, 2), (1, 3), (2, 3)]);
        for p in 2..12 {
            let all: Vec<_> = PairIndex::all(p).collect();
            assert_eq!(all.len(), pair_count(p));
            for (k, q) in all.iter().enumerate() {
                assert_eq!(q.flat(p), k);
                assert_eq!(PairIndex::from_flat(k, p).unwrap(), *q);
            }
        }
        assert!(PairIndex::new(2, 2, 3).is_err());
        assert!(PairIndex::new(1, 4, 3).is_err());
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = {
            let mut s = RngSpec::new(42, 0).stream();
            (0..100).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RngSpec::new(42, 0).stream();
            (0..100).map(|_| s.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut s = RngSpec::new(42, 1).stream();
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngSpec::new(42, 0).child(3), RngSpec::new(42, 1).child(3));
    }

    #[test]
    fn permutation_is_bijection() {
        let mut s = RngSpec::new(7, 3).stream();
        for n in [1, 2, 3, 50] {
            let mut perm = s.permutation(n);
            perm.sort_unstable();
            assert_eq!(perm, (0..n).collect::<Vec<_>>());
        }
    }
}
