//! Baselines on the circuit-level graph: normalized min-sum (NMS) and BP-OSD
//! of order zero.

use crate::compile::CircuitLevelGraph;
use crate::gf2::BinVector;
use crate::scalar::{Real, LLR_MAX};
use crate::ta::min_sum_check;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmsConfig {
    pub max_iters: usize,
    pub beta: f64,
    pub llr_max: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            max_iters: 900,
            beta: 0.875,
            llr_max: LLR_MAX,
        }
    }
}

impl NmsConfig {
    /// Settings of the BP stage that precedes OSD.
    pub fn bp_stage() -> Self {
        Self {
            max_iters: 300,
            ..Self::default()
        }
    }
}

/// Column-space estimate with posteriors.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftDecision<T> {
    pub hard: BinVector,
    pub posterior: Vec<T>,
    pub converged: bool,
    pub iters_used: usize,
}

/// Flooding min-sum over `h_circ` with reusable buffers.
pub struct NmsDecoder<'g, T> {
    graph: &'g CircuitLevelGraph,
    check_start: Vec<usize>,
    edge_col: Vec<usize>,
    col_edges: Vec<Vec<usize>>,
    priors: Vec<T>,
    v2c: Vec<T>,
    c2v: Vec<T>,
    post: Vec<T>,
    hard: Vec<u8>,
}

impl<'g, T: Real> NmsDecoder<'g, T> {
    pub fn new(graph: &'g CircuitLevelGraph) -> Self {
        let h = &graph.h_circ;
        let mut check_start = vec![0];
        let mut edge_col = Vec::new();
        let mut col_edges = vec![Vec::new(); h.ncols()];
        for row in h.rows() {
            for c in row.ones() {
                col_edges[c].push(edge_col.len());
                edge_col.push(c);
            }
            check_start.push(edge_col.len());
        }
        let e = edge_col.len();
        Self {
            graph,
            check_start,
            edge_col,
            col_edges,
            priors: graph.prior_llrs.iter().map(|&l| T::lit(l)).collect(),
            v2c: vec![T::zero(); e],
            c2v: vec![T::zero(); e],
            post: vec![T::zero(); h.ncols()],
            hard: vec![0; h.ncols()],
        }
    }

    fn checks(&self) -> usize {
        self.check_start.len() - 1
    }

    fn decide(&mut self) {
        for (c, edges) in self.col_edges.iter().enumerate() {
            let q = edges.iter().fold(self.priors[c], |a, &e| a + self.c2v[e]);
            self.post[c] = q;
            self.hard[c] = (q < T::zero()) as u8;
        }
    }

    fn satisfied(&self, s: &BinVector) -> bool {
        (0..self.checks()).all(|i| {
            let p = self.edge_col[self.check_start[i]..self.check_start[i + 1]]
                .iter()
                .fold(0u8, |a, &c| a ^ self.hard[c]);
            (p == 1) == s.get(i)
        })
    }

    pub fn decode(&mut self, s: &BinVector, cfg: &NmsConfig) -> SoftDecision<T> {
        assert_eq!(s.len(), self.checks(), "syndrome length must equal check count");
        let beta = T::lit(cfg.beta);
        let bound = T::lit(cfg.llr_max);
        self.c2v.fill(T::zero());
        self.decide();
        let mut iters = 0;
        let mut converged = self.satisfied(s);
        let mut out = Vec::new();
        while !converged && iters < cfg.max_iters {
            for (c, edges) in self.col_edges.iter().enumerate() {
                for &e in edges {
                    self.v2c[e] = (self.post[c] - self.c2v[e]).clip(bound);
                }
            }
            for i in 0..self.checks() {
                let r = self.check_start[i]..self.check_start[i + 1];
                out.resize(r.len(), T::zero());
                min_sum_check(&self.v2c[r.clone()], s.get(i), beta, &mut out);
                for (o, e) in r.enumerate() {
                    self.c2v[e] = out[o].clip(bound);
                }
            }
            iters += 1;
            self.decide();
            converged = self.satisfied(s);
        }
        SoftDecision {
            hard: BinVector::from_bits(&self.hard),
            posterior: self.post.clone(),
            converged,
            iters_used: iters,
        }
    }

    /// BP for `cfg.max_iters`, then OSD-0 when BP fails.
    pub fn decode_bposd(&mut self, s: &BinVector, cfg: &NmsConfig) -> SoftDecision<T> {
        let mut d = self.decode(s, cfg);
        if !d.converged {
            if let Some(x) = osd0(self.graph, s, &d.posterior) {
                d.hard = x;
                d.converged = true;
            }
        }
        d
    }
}

pub fn nms_decode<T: Real>(g: &CircuitLevelGraph, s: &BinVector, cfg: &NmsConfig) -> SoftDecision<T> {
    NmsDecoder::<T>::new(g).decode(s, cfg)
}

pub fn bposd0_decode<T: Real>(g: &CircuitLevelGraph, s: &BinVector) -> SoftDecision<T> {
    NmsDecoder::<T>::new(g).decode_bposd(s, &NmsConfig::bp_stage())
}

/// Order-zero OSD: pivots are chosen from the most likely error columns first
/// (ascending posterior LLR, ties by index); non-pivot columns are zero.
pub fn osd0<T: Real>(g: &CircuitLevelGraph, s: &BinVector, posterior: &[T]) -> Option<BinVector> {
    let mut order: Vec<usize> = (0..g.columns()).collect();
    order.sort_by(|&a, &b| {
        posterior[a]
            .partial_cmp(&posterior[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    g.h_circ
        .solve_ordered(s, &order)
        .expect("syndrome length matches h_circ")
}

/// Data-qubit error implied by a column-space estimate.
pub fn reconstruct_data_error(g: &CircuitLevelGraph, columns: &BinVector) -> BinVector {
    let mut e = BinVector::zeros(g.n);
    for c in columns.ones() {
        e.xor_assign(&g.column_effects[c]);
    }
    e
}
