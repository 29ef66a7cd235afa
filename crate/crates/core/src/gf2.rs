//! Bit-packed linear algebra over GF(2).
//!
//! Rows are stored as packed `u64` words so elimination is word-level XOR.
//! Pivot search always scans columns left to right (or in a caller-supplied
//! order) and takes the first row holding a one, so results are reproducible.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

const WORD: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix text parse error: {0}")]
    Parse(String),
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Packed binary vector.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BinVector {
    len: usize,
    words: Vec<u64>,
}

impl BinVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Builds a vector from 0/1 values; any nonzero entry is a one.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    /// Vector with ones at `indices` (repeated indices cancel).
    pub fn from_support(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in indices {
            v.flip(i);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    /// In-place XOR. Panics on length mismatch.
    #[inline]
    pub fn xor_assign(&mut self, other: &BinVector) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn xor(&self, other: &BinVector) -> BinVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the bitwise AND.
    #[inline]
    pub fn dot(&self, other: &BinVector) -> bool {
        debug_assert_eq!(self.len, other.len);
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * WORD + tz)
                }
            })
        })
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    /// Appends `other` after `self`.
    pub fn concat(&self, other: &BinVector) -> BinVector {
        let mut out = BinVector::zeros(self.len + other.len);
        for i in self.ones() {
            out.set(i, true);
        }
        for i in other.ones() {
            out.set(self.len + i, true);
        }
        out
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinVector(")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Dense binary matrix with packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    cols: usize,
    rows: Vec<BinVector>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![BinVector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds from 0/1 rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, Gf2Error> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != cols {
                return Err(Gf2Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            out.push(BinVector::from_bits(r));
        }
        Ok(Self { cols, rows: out })
    }

    pub fn from_row_vectors(cols: usize, rows: Vec<BinVector>) -> Result<Self, Gf2Error> {
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Gf2Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(Self { cols, rows })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(nrows: usize, columns: &[BinVector]) -> Result<Self, Gf2Error> {
        let mut m = Self::zeros(nrows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != nrows {
                return Err(Gf2Error::DimensionMismatch {
                    expected: nrows,
                    got: c.len(),
                });
            }
            for i in c.ones() {
                m.set(i, j, true);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value)
    }

    pub fn row(&self, r: usize) -> &BinVector {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[BinVector] {
        &self.rows
    }

    pub fn column(&self, c: usize) -> BinVector {
        let mut v = BinVector::zeros(self.nrows());
        for (r, row) in self.rows.iter().enumerate() {
            if row.get(c) {
                v.set(r, true);
            }
        }
        v
    }

    pub fn row_weights(&self) -> Vec<usize> {
        self.rows.iter().map(BinVector::weight).collect()
    }

    pub fn col_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.cols];
        for row in &self.rows {
            for c in row.ones() {
                w[c] += 1;
            }
        }
        w
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut t = BinMatrix::zeros(self.cols, self.nrows());
        for (r, row) in self.rows.iter().enumerate() {
            for c in row.ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BinVector::is_zero)
    }

    /// `out_i = XOR_j m[i][j] v[j]`.
    pub fn mul_vec(&self, v: &BinVector) -> Result<BinVector, Gf2Error> {
        if v.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = BinVector::zeros(self.nrows());
        for (i, row) in self.rows.iter().enumerate() {
            if row.dot(v) {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if other.nrows() != self.cols {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.cols,
                got: other.nrows(),
            });
        }
        let mut out = BinMatrix::zeros(self.nrows(), other.cols);
        for (i, row) in self.rows.iter().enumerate() {
            for k in row.ones() {
                out.rows[i].xor_assign(&other.rows[k]);
            }
        }
        Ok(out)
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if other.nrows() != self.nrows() {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.nrows(),
                got: other.nrows(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.concat(b))
            .collect();
        Ok(BinMatrix {
            cols: self.cols + other.cols,
            rows,
        })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if other.cols != self.cols {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(BinMatrix {
            cols: self.cols,
            rows,
        })
    }

    /// Sub-matrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> BinMatrix {
        let mut out = BinMatrix::zeros(self.nrows(), cols.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                if row.get(c) {
                    out.set(r, j, true);
                }
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> BinMatrix {
        BinMatrix {
            cols: self.cols,
            rows: rows.iter().map(|&r| self.rows[r].clone()).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        RowBasis::new(self).rank()
    }

    pub fn in_rowspace(&self, v: &BinVector) -> Result<bool, Gf2Error> {
        if v.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok(RowBasis::new(self).contains(v))
    }

    /// Any `x` with `self · x = s`, or `None` when inconsistent.
    pub fn solve(&self, s: &BinVector) -> Result<Option<BinVector>, Gf2Error> {
        let order: Vec<usize> = (0..self.cols).collect();
        self.solve_ordered(s, &order)
    }

    /// Solves `self · x = s` choosing pivot columns greedily in `order`.
    /// Columns never selected as pivots are zero in the solution.
    /// Columns absent from `order` are never used.
    pub fn solve_ordered(
        &self,
        s: &BinVector,
        order: &[usize],
    ) -> Result<Option<BinVector>, Gf2Error> {
        if s.len() != self.nrows() {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.nrows(),
                got: s.len(),
            });
        }
        let m = self.nrows();
        // augmented rows: original row bits plus the syndrome bit at index `cols`
        let mut rows: Vec<BinVector> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut a = BinVector::zeros(self.cols + 1);
                a.words[..r.words.len()].copy_from_slice(&r.words);
                if s.get(i) {
                    a.set(self.cols, true);
                }
                a
            })
            .collect();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut rank = 0;
        for &c in order {
            if rank == m {
                break;
            }
            let Some(p) = (rank..m).find(|&r| rows[r].get(c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.get(c) {
                    row.xor_assign(&pivot);
                }
            }
            pivots.push((rank, c));
            rank += 1;
        }
        if rows[rank..].iter().any(|r| r.get(self.cols)) {
            return Ok(None);
        }
        let mut x = BinVector::zeros(self.cols);
        for (r, c) in pivots {
            if rows[r].get(self.cols) {
                x.set(c, true);
            }
        }
        Ok(Some(x))
    }

    /// Plain-text form: `rows cols` then one 0/1 string per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.nrows(), self.cols);
        for row in &self.rows {
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, Gf2Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Gf2Error::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| Gf2Error::Parse(format!("bad header {header:?}: {e}")))?;
        let [nrows, ncols] = dims[..] else {
            return Err(Gf2Error::Parse(format!("bad header {header:?}")));
        };
        let mut m = BinMatrix::zeros(nrows, ncols);
        for r in 0..nrows {
            let line = lines
                .next()
                .ok_or_else(|| Gf2Error::Parse(format!("missing row {r}")))?
                .trim();
            if line.len() != ncols {
                return Err(Gf2Error::Parse(format!(
                    "row {r} has {} entries, expected {ncols}",
                    line.len()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    other => return Err(Gf2Error::Parse(format!("bad symbol {other:?}"))),
                }
            }
        }
        if lines.next().is_some() {
            return Err(Gf2Error::Parse("trailing rows".into()));
        }
        Ok(m)
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.nrows(), self.cols)?;
        for row in &self.rows {
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

impl FromStr for BinMatrix {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_text(s)
    }
}

/// Reduced row-echelon basis of a row space, for repeated membership tests.
#[derive(Clone, Debug)]
pub struct RowBasis {
    cols: usize,
    // (pivot column, fully reduced row)
    rows: Vec<(usize, BinVector)>,
}

impl RowBasis {
    pub fn new(m: &BinMatrix) -> Self {
        let mut rows: Vec<BinVector> = m.rows.clone();
        let mut basis: Vec<(usize, BinVector)> = Vec::new();
        let mut rank = 0;
        for c in 0..m.cols {
            let Some(p) = (rank..rows.len()).find(|&r| rows[r].get(c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.get(c) {
                    row.xor_assign(&pivot);
                }
            }
            for (_, b) in basis.iter_mut() {
                if b.get(c) {
                    b.xor_assign(&pivot);
                }
            }
            basis.push((c, pivot));
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        Self {
            cols: m.cols,
            rows: basis,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, v: &BinVector) -> bool {
        debug_assert_eq!(v.len(), self.cols);
        let mut r = v.clone();
        for (c, b) in &self.rows {
            if r.get(*c) {
                r.xor_assign(b);
            }
        }
        r.is_zero()
    }
}
