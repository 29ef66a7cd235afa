//! Bivariate bicycle CSS codes and their Tanner graphs.
//!
//! A code is described by two polynomials `a(x, y)` and `b(x, y)` over
//! `Z_ell × Z_em`. Each monomial `x^i y^j` becomes the permutation matrix of the
//! shift `(r, c) -> (r + i, c + j)` on `ell·em` points, `A` and `B` are sums of
//! those, and the code is `H_X = [A B]`, `H_Z = [Bᵀ Aᵀ]`. Univariate bicycle
//! codes are the `em = 1` case.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::BinMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("invalid code spec: {0}")]
    InvalidSpec(String),
    #[error("H_X · H_Zᵀ != 0 for code {0}")]
    NotOrthogonal(String),
    #[error("code {name}: expected {what} = {expected}, computed {got}")]
    ParameterMismatch {
        name: String,
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// `x^x y^y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub x: u32,
    pub y: u32,
}

impl Monomial {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// Which half of the data qubits a column belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Columns `0..n/2`, touched by X-checks through `A`.
    L,
    /// Columns `n/2..n`, touched by X-checks through `B`.
    R,
}

/// One polynomial term: `A` or `B` block and its index in the term list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TermRef {
    pub block: Side,
    pub index: usize,
}

impl TermRef {
    pub const fn a(index: usize) -> Self {
        Self {
            block: Side::L,
            index,
        }
    }

    pub const fn b(index: usize) -> Self {
        Self {
            block: Side::R,
            index,
        }
    }
}

impl fmt::Display for TermRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.block {
            Side::L => 'a',
            Side::R => 'b',
        };
        write!(f, "{c}{}", self.index)
    }
}

impl FromStr for TermRef {
    type Err = CodeError;

    /// Parses `a0`, `b2`, ...
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodeError::InvalidSpec(format!("bad schedule term {s:?}"));
        let mut chars = s.trim().chars();
        let block = match chars.next() {
            Some('a') | Some('A') => Side::L,
            Some('b') | Some('B') => Side::R,
            _ => return Err(bad()),
        };
        let index = chars.as_str().parse().map_err(|_| bad())?;
        Ok(Self { block, index })
    }
}

/// Polynomial description of a bivariate bicycle code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BBSpec {
    pub name: String,
    pub ell: u32,
    pub em: u32,
    pub a_terms: Vec<Monomial>,
    pub b_terms: Vec<Monomial>,
    /// CNOT order of every X-check. `None` interleaves `a0, b0, a1, b1, ...`.
    pub schedule: Option<Vec<TermRef>>,
    /// Advertised `n`, checked at build time when present.
    pub expect_n: Option<usize>,
    /// Advertised `k`, checked at build time when present.
    pub expect_k: Option<usize>,
}

impl BBSpec {
    pub fn new(name: &str, ell: u32, em: u32, a: &[(u32, u32)], b: &[(u32, u32)]) -> Self {
        let mono = |t: &[(u32, u32)]| t.iter().map(|&(x, y)| Monomial::new(x, y)).collect();
        Self {
            name: name.to_string(),
            ell,
            em,
            a_terms: mono(a),
            b_terms: mono(b),
            schedule: None,
            expect_n: None,
            expect_k: None,
        }
    }

    pub fn with_schedule(mut self, schedule: Vec<TermRef>) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn with_expected(mut self, n: usize, k: usize) -> Self {
        self.expect_n = Some(n);
        self.expect_k = Some(k);
        self
    }

    /// The `(2,4)`-regular `N = 5` bicycle code with
    /// `H_X(x) = [x + x³, 1 + x²]`, measured in the order `b:1, a:x³, b:x², a:x`.
    pub fn example_n5() -> Self {
        Self::new("example-n5", 5, 1, &[(1, 0), (3, 0)], &[(0, 0), (2, 0)])
            .with_schedule(vec![TermRef::b(0), TermRef::a(1), TermRef::b(1), TermRef::a(0)])
    }

    /// `[[90, 8, 10]]`: `ell = 15, em = 3, a = x⁹ + y + y², b = 1 + x² + x⁷`.
    pub fn bb90() -> Self {
        Self::new(
            "bb90",
            15,
            3,
            &[(9, 0), (0, 1), (0, 2)],
            &[(0, 0), (2, 0), (7, 0)],
        )
        .with_expected(90, 8)
    }

    /// `[[144, 12, 12]]` gross code: `ell = 12, em = 6, a = x³ + y + y², b = y³ + x + x²`.
    pub fn gross144() -> Self {
        Self::new(
            "gross144",
            12,
            6,
            &[(3, 0), (0, 1), (0, 2)],
            &[(0, 3), (1, 0), (2, 0)],
        )
        .with_expected(144, 12)
    }

    /// Looks up a built-in spec by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "example-n5" | "example" => Some(Self::example_n5()),
            "bb90" | "90" => Some(Self::bb90()),
            "gross144" | "gross" | "144" => Some(Self::gross144()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CodeError> {
        let err = |m: String| Err(CodeError::InvalidSpec(format!("{}: {m}", self.name)));
        if self.ell == 0 || self.em == 0 {
            return err("ell and em must be positive".into());
        }
        for (label, terms) in [("a", &self.a_terms), ("b", &self.b_terms)] {
            if terms.is_empty() {
                return err(format!("{label}_terms is empty"));
            }
            let mut seen = HashSet::new();
            for t in terms {
                if t.x >= self.ell || t.y >= self.em {
                    return err(format!("{label} term {t:?} not reduced mod ({}, {})", self.ell, self.em));
                }
                if !seen.insert(*t) {
                    return err(format!("duplicate {label} term {t:?}"));
                }
            }
        }
        if let Some(sched) = &self.schedule {
            let expected: HashSet<TermRef> = (0..self.a_terms.len())
                .map(TermRef::a)
                .chain((0..self.b_terms.len()).map(TermRef::b))
                .collect();
            let given: HashSet<TermRef> = sched.iter().copied().collect();
            if sched.len() != expected.len() || given != expected {
                return err("schedule must list every a and b term exactly once".into());
            }
        }
        Ok(())
    }

    /// Effective CNOT order.
    pub fn term_order(&self) -> Vec<TermRef> {
        if let Some(s) = &self.schedule {
            return s.clone();
        }
        let (na, nb) = (self.a_terms.len(), self.b_terms.len());
        let mut order = Vec::with_capacity(na + nb);
        for i in 0..na.max(nb) {
            if i < na {
                order.push(TermRef::a(i));
            }
            if i < nb {
                order.push(TermRef::b(i));
            }
        }
        order
    }

    pub fn block_size(&self) -> usize {
        (self.ell * self.em) as usize
    }

    /// Image of group element `g` under multiplication by monomial `t`.
    pub fn shift(&self, g: usize, t: Monomial) -> usize {
        let (em, ell) = (self.em as usize, self.ell as usize);
        let (i, j) = (g / em, g % em);
        ((i + t.x as usize) % ell) * em + (j + t.y as usize) % em
    }

    pub fn term(&self, r: TermRef) -> Monomial {
        match r.block {
            Side::L => self.a_terms[r.index],
            Side::R => self.b_terms[r.index],
        }
    }

    /// Data qubit reached from X-check `check` through term `r`.
    pub fn qubit_of(&self, check: usize, r: TermRef) -> usize {
        let g = self.shift(check, self.term(r));
        match r.block {
            Side::L => g,
            Side::R => self.block_size() + g,
        }
    }

    fn block_matrix(&self, terms: &[Monomial]) -> BinMatrix {
        let size = self.block_size();
        let mut m = BinMatrix::zeros(size, size);
        for r in 0..size {
            for &t in terms {
                let c = self.shift(r, t);
                m.set(r, c, !m.get(r, c));
            }
        }
        m
    }
}

/// A CSS code with regular bicycle structure.
#[derive(Clone, Debug)]
pub struct CssCode {
    pub name: String,
    pub n: usize,
    pub h_x: BinMatrix,
    pub h_z: BinMatrix,
    /// Column weight of `h_x`.
    pub gamma: usize,
    /// Row weight of `h_x`.
    pub rho: usize,
    pub k: usize,
    pub spec: BBSpec,
}

impl CssCode {
    pub fn side(&self, qubit: usize) -> Side {
        if qubit < self.n / 2 {
            Side::L
        } else {
            Side::R
        }
    }

    pub fn m_x(&self) -> usize {
        self.h_x.nrows()
    }

    pub fn m_z(&self) -> usize {
        self.h_z.nrows()
    }
}

/// Builds `H_X = [A B]`, `H_Z = [Bᵀ Aᵀ]` and checks orthogonality and any
/// advertised parameters.
pub fn build_bb_code(spec: &BBSpec) -> Result<CssCode, CodeError> {
    spec.validate()?;
    let a = spec.block_matrix(&spec.a_terms);
    let b = spec.block_matrix(&spec.b_terms);
    let h_x = a.hstack(&b).expect("blocks share row count");
    let h_z = b.transpose().hstack(&a.transpose()).expect("blocks share row count");
    if !h_x.mul(&h_z.transpose()).expect("inner dims agree").is_zero() {
        return Err(CodeError::NotOrthogonal(spec.name.clone()));
    }
    let n = h_x.ncols();
    let rho = spec.a_terms.len() + spec.b_terms.len();
    let gamma = h_x.col_weights().into_iter().max().unwrap_or(0);
    let k = n - h_x.rank() - h_z.rank();
    let mismatch = |what, expected, got| CodeError::ParameterMismatch {
        name: spec.name.clone(),
        what,
        expected,
        got,
    };
    if let Some(rw) = h_x.row_weights().into_iter().find(|&w| w != rho) {
        return Err(mismatch("row weight", rho, rw));
    }
    // A and B blocks have column weights |a| and |b|
    let cw = h_x.col_weights();
    let half = n / 2;
    if let Some(&w) = cw[..half].iter().find(|&&w| w != spec.a_terms.len()) {
        return Err(mismatch("left column weight", spec.a_terms.len(), w));
    }
    if let Some(&w) = cw[half..].iter().find(|&&w| w != spec.b_terms.len()) {
        return Err(mismatch("right column weight", spec.b_terms.len(), w));
    }
    if let Some(e) = spec.expect_n {
        if e != n {
            return Err(mismatch("n", e, n));
        }
    }
    if let Some(e) = spec.expect_k {
        if e != k {
            return Err(mismatch("k", e, k));
        }
    }
    Ok(CssCode {
        name: spec.name.clone(),
        n,
        h_x,
        h_z,
        gamma,
        rho,
        k,
        spec: spec.clone(),
    })
}

/// `n − rank(H_X) − rank(H_Z)`.
pub fn code_dimension(code: &CssCode) -> usize {
    code.n - code.h_x.rank() - code.h_z.rank()
}

/// Adjacency lists of a parity-check matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    pub var_count: usize,
    pub check_count: usize,
    /// Variables of each check, ascending.
    pub check_adj: Vec<Vec<usize>>,
    /// Checks of each variable, ascending.
    pub var_adj: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn edge_count(&self) -> usize {
        self.check_adj.iter().map(Vec::len).sum()
    }
}

pub fn tanner_graph(h: &BinMatrix) -> TannerGraph {
    let mut var_adj = vec![Vec::new(); h.ncols()];
    let check_adj: Vec<Vec<usize>> = (0..h.nrows())
        .map(|i| {
            let vars: Vec<usize> = h.row(i).ones().collect();
            for &j in &vars {
                var_adj[j].push(i);
            }
            vars
        })
        .collect();
    TannerGraph {
        var_count: h.ncols(),
        check_count: h.nrows(),
        check_adj,
        var_adj,
    }
}
