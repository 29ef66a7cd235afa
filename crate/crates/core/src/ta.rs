//! Turbo-annihilation (TA) message passing on the joint graph.
//!
//! Node classes and the messages they exchange:
//!
//! ```text
//!   Z-checks  --mu_zv-->  variables  --nu_vz-->  Z-checks
//!   constraints --mu_cv--> variables --nu_vc--> constraints
//!   constraints --mu_ce--> equalizers --sigma--> constraints
//! ```
//!
//! Z-checks and constraint nodes run normalized min-sum (constraints with a
//! zero syndrome bit), variables sum their inputs with optional min-sum with
//! past influence (MS-PI), and each equalizer runs max-log BCJR on its trellis
//! and returns extrinsic LLRs.

use crate::code::Side;
use crate::compile::JointGraph;
use crate::gf2::BinVector;
use crate::scalar::{Real, LLR_MAX};
use crate::trellis::{Bcjr, Semiring};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Equalizers → constraints → variables → Z-checks → variables → constraints.
    Layered,
    /// Every node class updates from the previous iteration's messages.
    Flooding,
}

/// Which data qubits use the MS-PI variable rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsPiSide {
    L,
    R,
    Off,
}

impl MsPiSide {
    fn applies(self, side: Side) -> bool {
        matches!((self, side), (MsPiSide::L, Side::L) | (MsPiSide::R, Side::R))
    }
}

/// Where the direct data-error prior enters the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Added to every variable-node sum and to the hard decision.
    Variable,
    /// Attached to the constraint node as a leaf input.
    Constraint,
    /// No direct-error prior.
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderConfig {
    pub max_iters: usize,
    pub beta: f64,
    pub schedule: Schedule,
    pub mspi_side: MsPiSide,
    pub llr_max: f64,
    pub prior_mode: PriorMode,
    pub semiring: Semiring,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            beta: 0.875,
            schedule: Schedule::Layered,
            mspi_side: MsPiSide::L,
            llr_max: LLR_MAX,
            prior_mode: PriorMode::Variable,
            semiring: Semiring::MaxLog,
        }
    }
}

impl DecoderConfig {
    /// The three diversity members: layered/MS-PI on L, layered/MS-PI on R,
    /// flooding/MS-PI on L.
    pub fn diversity_members(&self) -> [DecoderConfig; 3] {
        [
            DecoderConfig {
                schedule: Schedule::Layered,
                mspi_side: MsPiSide::L,
                ..*self
            },
            DecoderConfig {
                schedule: Schedule::Layered,
                mspi_side: MsPiSide::R,
                ..*self
            },
            DecoderConfig {
                schedule: Schedule::Flooding,
                mspi_side: MsPiSide::L,
                ..*self
            },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    pub estimate: BinVector,
    pub converged: bool,
    pub iters_used: usize,
    /// 1-based diversity member that produced the estimate.
    pub decoder_id: usize,
    /// Operation count under the per-message accounting.
    pub ops: u64,
}

/// Normalized min-sum check update.
///
/// `out[i] = beta · (1 − 2s) · ∏_{j≠i} sgn(in[j]) · min_{j≠i} |in[j]|`.
pub fn min_sum_check<T: Real>(inputs: &[T], syndrome: bool, beta: T, out: &mut [T]) {
    debug_assert_eq!(inputs.len(), out.len());
    let (mut min1, mut min2) = (T::infinity(), T::infinity());
    let mut argmin = usize::MAX;
    let mut negative = syndrome;
    for (i, &v) in inputs.iter().enumerate() {
        let a = v.abs();
        if v < T::zero() {
            negative = !negative;
        }
        if a < min1 {
            min2 = min1;
            min1 = a;
            argmin = i;
        } else if a < min2 {
            min2 = a;
        }
    }
    for (i, (&v, o)) in inputs.iter().zip(out.iter_mut()).enumerate() {
        let mag = if i == argmin { min2 } else { min1 };
        // drop this input's own sign from the product
        let neg = negative ^ (v < T::zero());
        let m = if mag.is_infinite() { T::zero() } else { beta * mag };
        *o = if neg { -m } else { m };
    }
}

/// Min-sum with past influence: keep `nu` when its sign agrees with the previous
/// message on the edge, otherwise add the previous message.
#[inline]
pub fn mspi<T: Real>(nu: T, prev: T) -> T {
    if nu.sgn() == prev.sgn() {
        nu
    } else {
        nu + prev
    }
}

/// Message arrays over the joint-graph edges.
#[derive(Clone, Debug, Default)]
pub struct MessageState<T> {
    /// Per Z-edge.
    pub nu_vz: Vec<T>,
    pub mu_zv: Vec<T>,
    /// Per data qubit.
    pub nu_vc: Vec<T>,
    pub mu_cv: Vec<T>,
    /// Per equalizer edge, `k·rho + (t − 1)`.
    pub mu_ce: Vec<T>,
    pub sigma: Vec<T>,
    /// Previous emitted variable messages, for MS-PI.
    pub prev_vz: Vec<T>,
    pub prev_vc: Vec<T>,
}

impl<T: Real> MessageState<T> {
    fn new(z_edges: usize, n: usize, x_edges: usize) -> Self {
        let z = |len| vec![T::zero(); len];
        Self {
            nu_vz: z(z_edges),
            mu_zv: z(z_edges),
            nu_vc: z(n),
            mu_cv: z(n),
            mu_ce: z(x_edges),
            sigma: z(x_edges),
            prev_vz: z(z_edges),
            prev_vc: z(n),
        }
    }

    fn reset(&mut self) {
        for v in [
            &mut self.nu_vz,
            &mut self.mu_zv,
            &mut self.nu_vc,
            &mut self.mu_cv,
            &mut self.mu_ce,
            &mut self.sigma,
            &mut self.prev_vz,
            &mut self.prev_vc,
        ] {
            v.fill(T::zero());
        }
    }

    pub fn max_abs(&self) -> T {
        [
            &self.nu_vz,
            &self.mu_zv,
            &self.nu_vc,
            &self.mu_cv,
            &self.mu_ce,
            &self.sigma,
        ]
        .iter()
        .flat_map(|v| v.iter())
        .fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

/// Flat edge indexing of a [`JointGraph`].
#[derive(Clone, Debug)]
struct Layout {
    n: usize,
    rho: usize,
    /// Z-edge range of each check; edges are check-major.
    z_start: Vec<usize>,
    z_var: Vec<usize>,
    /// Z-edges of each variable.
    var_z: Vec<Vec<usize>>,
    /// Equalizer edges of each constraint node.
    con_x: Vec<Vec<usize>>,
    sides: Vec<Side>,
}

impl Layout {
    fn new(g: &JointGraph) -> Self {
        let mut z_start = vec![0];
        let mut z_var = Vec::new();
        let mut var_z = vec![Vec::new(); g.n];
        for vars in &g.z_checks.check_adj {
            for &j in vars {
                var_z[j].push(z_var.len());
                z_var.push(j);
            }
            z_start.push(z_var.len());
        }
        let con_x = g
            .constraint_links
            .iter()
            .map(|links| {
                links
                    .iter()
                    .map(|l| l.equalizer * g.rho + l.step - 1)
                    .collect()
            })
            .collect();
        Self {
            n: g.n,
            rho: g.rho,
            z_start,
            z_var,
            var_z,
            con_x,
            sides: g.sides.clone(),
        }
    }

    fn m_z(&self) -> usize {
        self.z_start.len() - 1
    }

    fn z_edges(&self) -> usize {
        self.z_var.len()
    }
}

/// A TA decoder bound to one graph; owns its message buffers.
pub struct TaDecoder<'g, T> {
    graph: &'g JointGraph,
    layout: Layout,
    fault_priors: Vec<T>,
    var_priors: Vec<T>,
    pub state: MessageState<T>,
    old: MessageState<T>,
    bcjr: Bcjr<T>,
    scratch_in: Vec<T>,
    scratch_out: Vec<T>,
    hard: Vec<u8>,
    ops: u64,
}

impl<'g, T: Real> TaDecoder<'g, T> {
    pub fn new(graph: &'g JointGraph) -> Self {
        let layout = Layout::new(graph);
        let x_edges = graph.m_x() * graph.rho;
        let state = MessageState::new(layout.z_edges(), graph.n, x_edges);
        Self {
            graph,
            fault_priors: graph
                .equalizers
                .iter()
                .flat_map(|e| e.fault_priors.iter().map(|&l| T::lit(l)))
                .collect(),
            var_priors: graph.variable_priors.iter().map(|&l| T::lit(l)).collect(),
            old: state.clone(),
            state,
            layout,
            bcjr: Bcjr::new(Semiring::MaxLog),
            scratch_in: Vec::new(),
            scratch_out: Vec::new(),
            hard: vec![0; graph.n],
            ops: 0,
        }
    }

    pub fn graph(&self) -> &JointGraph {
        self.graph
    }

    fn var_prior(&self, cfg: &DecoderConfig, j: usize) -> T {
        match cfg.prior_mode {
            PriorMode::Variable => self.var_priors[j],
            _ => T::zero(),
        }
    }

    /// Runs BCJR on every equalizer from `mu_ce` and writes extrinsic `sigma`.
    pub fn equalizer_update(&mut self, cfg: &DecoderConfig) {
        let rho = self.layout.rho;
        let bound = T::lit(cfg.llr_max);
        self.bcjr.semiring = cfg.semiring;
        self.scratch_out.resize(rho, T::zero());
        let src = match cfg.schedule {
            Schedule::Layered => &self.state.mu_ce,
            Schedule::Flooding => &self.old.mu_ce,
        };
        for k in 0..self.graph.m_x() {
            let range = k * rho..(k + 1) * rho;
            let l_x = &src[range.clone()];
            self.bcjr
                .run(l_x, &self.fault_priors[range.clone()], &mut self.scratch_out);
            for (t, e) in range.enumerate() {
                self.state.sigma[e] = (self.scratch_out[t] - l_x[t]).clip(bound);
            }
        }
        self.ops += 9 * (rho * self.graph.m_x()) as u64;
    }

    /// Constraint nodes: min-sum with zero syndrome over the variable message,
    /// the equalizer extrinsics and, in [`PriorMode::Constraint`], the prior leaf.
    fn constraint_update(&mut self, cfg: &DecoderConfig, to_var: bool, to_eq: bool) {
        let beta = T::lit(cfg.beta);
        let bound = T::lit(cfg.llr_max);
        let leaf = cfg.prior_mode == PriorMode::Constraint;
        let (nu_vc, sigma) = match cfg.schedule {
            Schedule::Layered => (&self.state.nu_vc, &self.state.sigma),
            Schedule::Flooding => (&self.old.nu_vc, &self.old.sigma),
        };
        for j in 0..self.layout.n {
            let xs = &self.layout.con_x[j];
            self.scratch_in.clear();
            self.scratch_in.push(nu_vc[j]);
            self.scratch_in.extend(xs.iter().map(|&e| sigma[e]));
            if leaf {
                self.scratch_in.push(self.var_priors[j]);
            }
            self.scratch_out.resize(self.scratch_in.len(), T::zero());
            min_sum_check(&self.scratch_in, false, beta, &mut self.scratch_out);
            if to_var {
                self.state.mu_cv[j] = self.scratch_out[0].clip(bound);
                self.ops += 1;
            }
            if to_eq {
                for (i, &e) in xs.iter().enumerate() {
                    self.state.mu_ce[e] = self.scratch_out[i + 1].clip(bound);
                }
                self.ops += xs.len() as u64;
            }
        }
    }

    /// Variable nodes: sum of incoming check messages (plus prior), MS-PI on
    /// the configured side.
    fn variable_update_inner(&mut self, cfg: &DecoderConfig, to_z: bool, to_con: bool) {
        let bound = T::lit(cfg.llr_max);
        for j in 0..self.layout.n {
            let prior = self.var_prior(cfg, j);
            let pi = cfg.mspi_side.applies(self.layout.sides[j]);
            let (mu_zv, mu_cv) = match cfg.schedule {
                Schedule::Layered => (&self.state.mu_zv, &self.state.mu_cv),
                Schedule::Flooding => (&self.old.mu_zv, &self.old.mu_cv),
            };
            let zsum = self.layout.var_z[j]
                .iter()
                .fold(T::zero(), |acc, &e| acc + mu_zv[e]);
            let total = zsum + mu_cv[j] + prior;
            if to_z {
                for &e in &self.layout.var_z[j] {
                    let mut nu = total - mu_zv[e];
                    if pi {
                        nu = mspi(nu, self.state.prev_vz[e]);
                    }
                    let nu = nu.clip(bound);
                    self.state.nu_vz[e] = nu;
                    self.state.prev_vz[e] = nu;
                }
                self.ops += self.layout.var_z[j].len() as u64;
            }
            if to_con {
                let mut nu = total - mu_cv[j];
                if pi {
                    nu = mspi(nu, self.state.prev_vc[j]);
                }
                let nu = nu.clip(bound);
                self.state.nu_vc[j] = nu;
                self.state.prev_vc[j] = nu;
                self.ops += 1;
            }
        }
    }

    /// Updates all variable-to-check and variable-to-constraint messages.
    pub fn variable_update(&mut self, cfg: &DecoderConfig) {
        self.variable_update_inner(cfg, true, true);
    }

    /// Z-check min-sum update against syndrome `s`.
    pub fn check_update(&mut self, cfg: &DecoderConfig, s: &BinVector) {
        let beta = T::lit(cfg.beta);
        let bound = T::lit(cfg.llr_max);
        let nu_vz = match cfg.schedule {
            Schedule::Layered => &self.state.nu_vz,
            Schedule::Flooding => &self.old.nu_vz,
        };
        for i in 0..self.layout.m_z() {
            let range = self.layout.z_start[i]..self.layout.z_start[i + 1];
            self.scratch_out.resize(range.len(), T::zero());
            min_sum_check(&nu_vz[range.clone()], s.get(i), beta, &mut self.scratch_out);
            for (o, e) in range.enumerate() {
                self.state.mu_zv[e] = self.scratch_out[o].clip(bound);
            }
            self.ops += self.scratch_out.len() as u64;
        }
    }

    /// `q_j = Σ mu_zv + mu_cv + prior`; `ê_j = 1` iff `q_j < 0`.
    fn hard_decision(&mut self, cfg: &DecoderConfig) {
        for j in 0..self.layout.n {
            let q = self.layout.var_z[j]
                .iter()
                .fold(T::zero(), |acc, &e| acc + self.state.mu_zv[e])
                + self.state.mu_cv[j]
                + self.var_prior(cfg, j);
            self.hard[j] = (q < T::zero()) as u8;
        }
    }

    /// Posterior LLR of each data qubit.
    pub fn posteriors(&self, cfg: &DecoderConfig) -> Vec<T> {
        (0..self.layout.n)
            .map(|j| {
                self.layout.var_z[j]
                    .iter()
                    .fold(T::zero(), |acc, &e| acc + self.state.mu_zv[e])
                    + self.state.mu_cv[j]
                    + self.var_prior(cfg, j)
            })
            .collect()
    }

    fn syndrome_matches(&self, s: &BinVector) -> bool {
        (0..self.layout.m_z()).all(|i| {
            let parity = self.layout.z_var[self.layout.z_start[i]..self.layout.z_start[i + 1]]
                .iter()
                .fold(0u8, |acc, &j| acc ^ self.hard[j]);
            (parity == 1) == s.get(i)
        })
    }

    fn estimate(&self) -> BinVector {
        BinVector::from_bits(&self.hard)
    }

    /// One full iteration under `cfg.schedule`.
    pub fn iterate(&mut self, cfg: &DecoderConfig, s: &BinVector) {
        match cfg.schedule {
            Schedule::Layered => {
                self.equalizer_update(cfg);
                self.constraint_update(cfg, true, false);
                self.variable_update_inner(cfg, true, false);
                self.check_update(cfg, s);
                self.variable_update_inner(cfg, false, true);
                self.constraint_update(cfg, false, true);
            }
            Schedule::Flooding => {
                self.old.clone_from(&self.state);
                self.equalizer_update(cfg);
                self.constraint_update(cfg, true, true);
                self.variable_update_inner(cfg, true, true);
                self.check_update(cfg, s);
            }
        }
        debug_assert!(self.state.max_abs() <= T::lit(cfg.llr_max));
    }

    pub fn reset(&mut self) {
        self.state.reset();
        self.old.reset();
        self.ops = 0;
    }

    /// Decodes one syndrome from fresh messages.
    pub fn decode(&mut self, s: &BinVector, cfg: &DecoderConfig) -> DecodeResult {
        assert_eq!(s.len(), self.layout.m_z(), "syndrome length must equal m_z");
        self.reset();
        self.hard_decision(cfg);
        let mut iters = 0;
        let mut converged = self.syndrome_matches(s);
        while !converged && iters < cfg.max_iters {
            self.iterate(cfg, s);
            iters += 1;
            self.hard_decision(cfg);
            converged = self.syndrome_matches(s);
        }
        DecodeResult {
            estimate: self.estimate(),
            converged,
            iters_used: iters,
            decoder_id: 1,
            ops: self.ops,
        }
    }

    /// Tries the three diversity members in order and returns the first that
    /// converges, or member 1's estimate if none does. `iters_used` and `ops`
    /// accumulate over every member run.
    pub fn diversity_decode(&mut self, s: &BinVector, base: &DecoderConfig) -> DecodeResult {
        let mut first: Option<DecodeResult> = None;
        let (mut iters, mut ops) = (0, 0);
        for (i, cfg) in base.diversity_members().iter().enumerate() {
            let mut r = self.decode(s, cfg);
            iters += r.iters_used;
            ops += r.ops;
            r.decoder_id = i + 1;
            if r.converged {
                r.iters_used = iters;
                r.ops = ops;
                return r;
            }
            first.get_or_insert(r);
        }
        let mut r = first.expect("three members ran");
        r.iters_used = iters;
        r.ops = ops;
        r
    }

    /// Runs exactly `iters` iterations and returns the operation count.
    pub fn count_operations(&mut self, iters: usize, cfg: &DecoderConfig) -> u64 {
        self.reset();
        let s = BinVector::zeros(self.layout.m_z());
        for _ in 0..iters {
            self.iterate(cfg, &s);
        }
        self.ops
    }
}

/// Single decoder run with a fresh instance.
pub fn decode<T: Real>(graph: &JointGraph, s: &BinVector, cfg: &DecoderConfig) -> DecodeResult {
    TaDecoder::<T>::new(graph).decode(s, cfg)
}

pub fn diversity_decode<T: Real>(
    graph: &JointGraph,
    s: &BinVector,
    base: &DecoderConfig,
) -> DecodeResult {
    TaDecoder::<T>::new(graph).diversity_decode(s, base)
}

/// Instrumented operation count of `iters` layered iterations.
pub fn count_operations(graph: &JointGraph, iters: usize) -> u64 {
    TaDecoder::<f64>::new(graph).count_operations(iters, &DecoderConfig::default())
}

/// `2n(γ + 1) + 10mρ`.
pub fn complexity_formula(n: usize, m: usize, gamma: usize, rho: usize) -> u64 {
    (2 * n * (gamma + 1) + 10 * m * rho) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_circuit, propagate, syndrome, FaultSet, NoiseParams};
    use crate::code::{build_bb_code, BBSpec};
    use crate::compile::compile_joint;
    use crate::trellis::{bcjr, Trellis};

    fn brute_min_sum(inputs: &[f64], s: bool, beta: f64) -> Vec<f64> {
        (0..inputs.len())
            .map(|i| {
                let others: Vec<f64> = inputs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v)
                    .collect();
                let sign: f64 = others.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).product();
                let mag = others.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                beta * if s { -1.0 } else { 1.0 } * sign * mag
            })
            .collect()
    }

    #[test]
    fn check_update_examples() {
        let mut out = [0.0; 2];
        min_sum_check(&[3.0, -2.0], false, 0.875, &mut out);
        assert_eq!(out, [0.875 * -2.0, 0.875 * 3.0]);
        min_sum_check(&[3.0, -2.0], true, 0.875, &mut out);
        assert_eq!(out, [0.875 * 2.0, 0.875 * -3.0]);
        let mut out = [0.0; 4];
        min_sum_check(&[3.0, -2.0, 5.0, -1.0], false, 0.875, &mut out);
        assert_eq!(out[3], -1.75);
        assert_eq!(out.to_vec(), brute_min_sum(&[3.0, -2.0, 5.0, -1.0], false, 0.875));
    }

    #[test]
    fn check_update_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let d = rng.gen_range(2..8);
            let inputs: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let s = rng.gen_bool(0.5);
            let mut out = vec![0.0; d];
            min_sum_check(&inputs, s, 0.875, &mut out);
            assert_eq!(out, brute_min_sum(&inputs, s, 0.875));
        }
        // sgn(0) = +1
        let mut out = [0.0; 3];
        min_sum_check(&[0.0, -1.0, 2.0], false, 1.0, &mut out);
        assert_eq!(out, [-1.0, 0.0, -0.0]);
    }

    #[test]
    fn mspi_rule() {
        assert_eq!(mspi(2.0, 0.0), 2.0);
        assert_eq!(mspi(2.0, 5.0), 2.0);
        assert_eq!(mspi(-2.0, 5.0), 3.0);
    }

    fn example_graph(p: f64) -> (crate::circuit::MeasurementCircuit, JointGraph) {
        let circ = build_circuit(&build_bb_code(&BBSpec::example_n5()).unwrap());
        let g = compile_joint(&circ, NoiseParams::new(p).unwrap()).unwrap();
        (circ, g)
    }

    #[test]
    fn first_iteration_variable_sum_is_plain() {
        let (_, g) = example_graph(0.02);
        let mut dec = TaDecoder::<f64>::new(&g);
        let cfg = DecoderConfig::default();
        dec.state.mu_zv.iter_mut().for_each(|m| *m = -1.0);
        dec.state.mu_cv.iter_mut().for_each(|m| *m = 0.5);
        dec.variable_update(&cfg);
        // MS-PI history is zero, so sgn(prev) = +1 and negative sums gain nothing
        for j in 0..g.n {
            let want = -1.0 + 0.5 + g.variable_priors[j];
            assert!((dec.state.nu_vz[dec.layout.var_z[j][0]] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn equalizer_update_uses_permutation() {
        let (_, g) = example_graph(0.02);
        let mut dec = TaDecoder::<f64>::new(&g);
        let cfg = DecoderConfig::default();
        dec.equalizer_update(&cfg);
        let tr = Trellis::new(4);
        let prior_only = bcjr(&tr, &[0.0; 4], &g.equalizers[0].fault_priors);
        assert_eq!(&dec.state.sigma[0..4], &*prior_only);
        // nonzero inputs: sigma = bcjr(L) - L in trellis order
        let lx = [1.5, -2.0, 0.25, 3.0];
        dec.state.mu_ce[4..8].copy_from_slice(&lx);
        dec.equalizer_update(&cfg);
        let post = bcjr(&tr, &lx, &g.equalizers[1].fault_priors);
        for t in 0..4 {
            assert!((dec.state.sigma[4 + t] - (post[t] - lx[t])).abs() < 1e-12);
        }
        // the constraint of qubit q reads the edge at q's step
        for (j, xs) in dec.layout.con_x.iter().enumerate() {
            for &e in xs {
                assert_eq!(g.equalizers[e / 4].qubit_order[e % 4], j);
            }
        }
    }

    #[test]
    fn zero_syndrome_converges_immediately() {
        let (_, g) = example_graph(0.01);
        let r = decode::<f64>(&g, &BinVector::zeros(5), &DecoderConfig::default());
        assert!(r.converged);
        assert_eq!(r.iters_used, 0);
        assert!(r.estimate.is_zero());
        let r = diversity_decode::<f32>(&g, &BinVector::zeros(5), &DecoderConfig::default());
        assert_eq!((r.decoder_id, r.iters_used), (1, 0));
    }

    #[test]
    fn single_qubit_error_is_corrected() {
        let (circ, g) = example_graph(0.01);
        for q in 0..10 {
            let e = BinVector::unit(10, q);
            let s = syndrome(&circ.code, &e);
            for cfg in DecoderConfig::default().diversity_members() {
                let r = decode::<f64>(&g, &s, &cfg);
                assert!(r.converged, "qubit {q} {cfg:?}");
                assert_eq!(syndrome(&circ.code, &r.estimate), s);
            }
        }
    }

    #[test]
    fn injected_hook_is_corrected_up_to_stabilizers() {
        let (circ, g) = example_graph(0.01);
        let rowspace = crate::gf2::RowBasis::new(&circ.code.h_x);
        for k in 0..5 {
            for t in 1..=4 {
                let mut f = FaultSet::zeros(&circ);
                f.flip_hook(k, t);
                let e = propagate(&circ, &f);
                let s = syndrome(&circ.code, &e);
                let r = diversity_decode::<f64>(&g, &s, &DecoderConfig::default());
                assert!(r.converged);
                assert_eq!(syndrome(&circ.code, &r.estimate), s);
                if t == 1 {
                    // a full-row hook is itself a stabilizer
                    assert!(rowspace.contains(&e));
                    assert!(r.estimate.is_zero(), "k={k}");
                }
            }
        }
    }

    #[test]
    fn unconverged_result_is_flagged() {
        let (_, g) = example_graph(0.01);
        let cfg = DecoderConfig {
            max_iters: 1,
            ..Default::default()
        };
        // odd-weight syndrome is unreachable: every column of H_Z has weight 2
        let s = BinVector::from_bits(&[1, 0, 0, 0, 0]);
        let r = decode::<f64>(&g, &s, &cfg);
        assert!(!r.converged);
        assert_eq!(r.iters_used, 1);
        let r = diversity_decode::<f64>(&g, &s, &cfg);
        assert!(!r.converged);
        assert_eq!((r.decoder_id, r.iters_used), (1, 3));
    }

    #[test]
    fn operation_counts_match_formula() {
        let (_, g) = example_graph(0.01);
        assert_eq!(count_operations(&g, 1), 260);
        assert_eq!(count_operations(&g, 7), 7 * 260);
        assert_eq!(complexity_formula(10, 5, 2, 4), 260);
        let mut dec = TaDecoder::<f64>::new(&g);
        let flood = DecoderConfig {
            schedule: Schedule::Flooding,
            ..Default::default()
        };
        assert_eq!(dec.count_operations(3, &flood), 3 * 260);
    }

    /// Cycle-free joint graph: one Z-check on qubits {0, 1}; equalizer 0 covers
    /// qubits (1, 2) and equalizer 1 covers (3, 0), in trellis order.
    fn tree_graph(var_priors: &[f64], fault_priors: &[f64]) -> JointGraph {
        use crate::code::tanner_graph;
        use crate::compile::{EqualizerSpec, TrellisLink};
        use crate::gf2::BinMatrix;
        let h_z = BinMatrix::from_rows(&[vec![1, 1, 0, 0]]).unwrap();
        let eq = |check, order: Vec<usize>, pri: &[f64]| EqualizerSpec {
            check,
            qubit_order: order,
            fault_priors: pri.to_vec(),
        };
        let link = |equalizer, step| vec![TrellisLink { equalizer, step }];
        JointGraph {
            n: 4,
            rho: 2,
            z_checks: tanner_graph(&h_z),
            h_z,
            equalizers: vec![
                eq(0, vec![1, 2], &fault_priors[0..2]),
                eq(1, vec![3, 0], &fault_priors[2..4]),
            ],
            constraint_links: vec![link(1, 2), link(0, 1), link(0, 2), link(1, 1)],
            variable_priors: var_priors.to_vec(),
            sides: vec![Side::L, Side::L, Side::R, Side::R],
        }
    }

    /// Max-marginal LLR of each data bit by enumerating the four faults.
    fn tree_max_marginals(var_priors: &[f64], fault_priors: &[f64], s: bool) -> Vec<f64> {
        let mut best = [[f64::NEG_INFINITY; 2]; 4];
        for f in 0u32..16 {
            let bit = |i: u32| (f >> i & 1) as usize;
            // accumulator outputs: x_1 = f_1, x_2 = f_1 + f_2
            let e = [bit(2) ^ bit(3), bit(0), bit(0) ^ bit(1), bit(2)];
            if ((e[0] ^ e[1]) == 1) != s {
                continue;
            }
            let score: f64 = (0..4).map(|i| -fault_priors[i] * bit(i as u32) as f64).sum::<f64>()
                + (0..4).map(|j| -var_priors[j] * e[j] as f64).sum::<f64>();
            for j in 0..4 {
                best[j][e[j]] = best[j][e[j]].max(score);
            }
        }
        best.iter().map(|b| b[0] - b[1]).collect()
    }

    proptest::proptest! {
        #[test]
        fn tree_schedules_reach_exact_max_marginals(
            vp in proptest::collection::vec(-6.0f64..6.0, 4),
            fp in proptest::collection::vec(-6.0f64..6.0, 4),
            s in proptest::bool::ANY,
        ) {
            let g = tree_graph(&vp, &fp);
            let want = tree_max_marginals(&vp, &fp, s);
            let syn = BinVector::from_bits(&[s as u8]);
            let mut dec = TaDecoder::<f64>::new(&g);
            for schedule in [Schedule::Layered, Schedule::Flooding] {
                let cfg = DecoderConfig {
                    beta: 1.0,
                    mspi_side: MsPiSide::Off,
                    schedule,
                    ..Default::default()
                };
                dec.reset();
                for _ in 0..12 {
                    dec.iterate(&cfg, &syn);
                }
                let got = dec.posteriors(&cfg);
                for j in 0..4 {
                    proptest::prop_assert!((got[j] - want[j]).abs() < 1e-9, "{schedule:?} q{j}: {} vs {}", got[j], want[j]);
                }
            }
        }
    }

    #[test]
    fn deterministic_results() {
        let (circ, g) = example_graph(0.03);
        let mut f = FaultSet::zeros(&circ);
        f.flip_hook(2, 3);
        f.data_init.flip(7);
        let s = syndrome(&circ.code, &propagate(&circ, &f));
        let a = diversity_decode::<f64>(&g, &s, &DecoderConfig::default());
        let b = diversity_decode::<f64>(&g, &s, &DecoderConfig::default());
        assert_eq!(a, b);
    }
}
