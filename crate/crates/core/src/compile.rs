//! Decoding graphs compiled from a measurement circuit.
//!
//! Two graphs come out of here:
//!
//! * the joint graph used by the TA decoder: the `H_Z` Tanner graph, one
//!   always-satisfied constraint node per data qubit, and one equalizer node
//!   per X-check whose `rho` edges are ordered by the check's CNOT schedule;
//! * the circuit-level graph used by the baselines, with one column per
//!   distinct nonzero syndrome signature of a single fault.
//!
//! The hook propagation matrix `P` links the two views: column `(s, k)` holds
//! the data qubits reached by an X fault entering ancilla `k` at step `s`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{MeasurementCircuit, NoiseParams};
use crate::code::{tanner_graph, CssCode, Side, TannerGraph};
use crate::gf2::{BinMatrix, BinVector};
use crate::scalar::{prob_to_llr, xor_combine};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("check {check}: hook columns are not nested ({reason})")]
    NotNested { check: usize, reason: String },
    #[error("check {check}: no row permutation maps its segment block onto G")]
    NoPermutation { check: usize },
    #[error("expected {expected} equalizers, got {got}")]
    EqualizerCount { expected: usize, got: usize },
}

/// Hook propagation matrix, `n × (rho · m_x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropagationMatrix {
    pub p_mat: BinMatrix,
    /// `(check, step)` of every column; column `(s − 1)·m_x + k` is `(k, s)`.
    pub column_labels: Vec<(usize, usize)>,
    pub rho: usize,
    pub m_x: usize,
}

impl PropagationMatrix {
    pub fn column_index(&self, check: usize, step: usize) -> usize {
        (step - 1) * self.m_x + check
    }

    /// Columns `(s − 1)·m_x .. s·m_x`.
    pub fn segment(&self, step: usize) -> BinMatrix {
        let cols: Vec<usize> = (0..self.m_x).map(|k| self.column_index(k, step)).collect();
        self.p_mat.select_columns(&cols)
    }

    /// `rho` columns of one check, step order.
    pub fn check_block(&self, check: usize) -> BinMatrix {
        let cols: Vec<usize> = (1..=self.rho).map(|s| self.column_index(check, s)).collect();
        self.p_mat.select_columns(&cols)
    }
}

pub fn build_p_matrix(circ: &MeasurementCircuit) -> PropagationMatrix {
    let (n, m_x, rho) = (circ.code.n, circ.check_count(), circ.rho());
    let mut p_mat = BinMatrix::zeros(n, rho * m_x);
    let mut column_labels = Vec::with_capacity(rho * m_x);
    for s in 1..=rho {
        for k in 0..m_x {
            let col = column_labels.len();
            for &q in &circ.slots(k)[s - 1..] {
                p_mat.set(q, col, true);
            }
            column_labels.push((k, s));
        }
    }
    PropagationMatrix {
        p_mat,
        column_labels,
        rho,
        m_x,
    }
}

/// `G[t][s] = 1` iff `s <= t`: row `t` is the qubit touched at step `t`,
/// column `s` the fault entering at step `s`.
pub fn canonical_g(rho: usize) -> BinMatrix {
    let mut g = BinMatrix::zeros(rho, rho);
    for t in 0..rho {
        for s in 0..=t {
            g.set(t, s, true);
        }
    }
    g
}

/// One equalizer node: a check's trellis and how its steps map to qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct EqualizerSpec {
    pub check: usize,
    /// `qubit_order[t − 1]` is the data qubit seen at trellis step `t`.
    pub qubit_order: Vec<usize>,
    /// Prior LLR of a fault entering at each step.
    pub fault_priors: Vec<f64>,
}

impl EqualizerSpec {
    /// Trellis step (1-based) at which `qubit` is touched, if at all.
    pub fn step_of(&self, qubit: usize) -> Option<usize> {
        self.qubit_order.iter().position(|&q| q == qubit).map(|i| i + 1)
    }
}

/// Finds, for every X-check, the row permutation taking its support-restricted
/// block of `P` to [`canonical_g`].
pub fn group_segments(
    pm: &PropagationMatrix,
    h_x: &BinMatrix,
) -> Result<Vec<EqualizerSpec>, CompileError> {
    let rho = pm.rho;
    let g = canonical_g(rho);
    (0..pm.m_x)
        .map(|k| {
            let support: Vec<usize> = h_x.row(k).ones().collect();
            let block = pm.check_block(k);
            let first = block.column(0);
            if first != *h_x.row(k) {
                return Err(CompileError::NotNested {
                    check: k,
                    reason: "first segment column differs from the H_X row".into(),
                });
            }
            for s in 1..rho {
                let (prev, cur) = (block.column(s - 1), block.column(s));
                if cur.xor(&prev).weight() != 1 {
                    return Err(CompileError::NotNested {
                        check: k,
                        reason: format!("step {} does not drop exactly one qubit", s + 1),
                    });
                }
                if cur.ones().any(|q| !prev.get(q)) {
                    return Err(CompileError::NotNested {
                        check: k,
                        reason: format!("step {} leaves the previous support", s + 1),
                    });
                }
            }
            let restricted = block.select_rows(&support);
            // the slot-t qubit is hit by faults 1..=t, so its row has weight t
            let mut rows: Vec<(usize, usize)> = support
                .iter()
                .enumerate()
                .map(|(i, &q)| (restricted.row(i).weight(), q))
                .collect();
            rows.sort_unstable();
            let order: Vec<usize> = rows.iter().map(|&(_, q)| q).collect();
            let permuted = block.select_rows(&order);
            if permuted != g {
                return Err(CompileError::NoPermutation { check: k });
            }
            Ok(EqualizerSpec {
                check: k,
                qubit_order: order,
                fault_priors: vec![0.0; rho],
            })
        })
        .collect()
}

/// Prior LLRs for trellis faults and direct data-qubit errors.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultPriors {
    /// `[k][t − 1]`: fault entering check `k` at step `t`.
    pub equalizer: Vec<Vec<f64>>,
    /// Direct X error on each data qubit (initial depolarizing plus CNOT targets).
    pub variable: Vec<f64>,
}

/// Step 1: ancilla preparation noise `2p/3`; steps `t >= 2`: the X/Y control
/// component of the CNOT at slot `t − 1`, `8p/15`. Data qubit `j`: `2p/3`
/// XOR-combined with one `8p/15` event per incident X-check.
pub fn fault_priors(circ: &MeasurementCircuit, np: NoiseParams) -> FaultPriors {
    let p = np.p();
    let (init, cnot) = (2.0 * p / 3.0, 8.0 * p / 15.0);
    let rho = circ.rho();
    let step: Vec<f64> = (1..=rho)
        .map(|t| prob_to_llr(if t == 1 { init } else { cnot }))
        .collect();
    let gamma = circ.code.h_x.col_weights();
    let variable = gamma
        .iter()
        .map(|&g| prob_to_llr((0..g).fold(init, |q, _| xor_combine(q, cnot))))
        .collect();
    FaultPriors {
        equalizer: vec![step; circ.check_count()],
        variable,
    }
}

/// Where a constraint node attaches to an equalizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrellisLink {
    pub equalizer: usize,
    /// 1-based trellis step.
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct JointGraph {
    pub n: usize,
    pub rho: usize,
    pub h_z: BinMatrix,
    pub z_checks: TannerGraph,
    pub equalizers: Vec<EqualizerSpec>,
    /// Per data qubit, the equalizer edges of its constraint node.
    pub constraint_links: Vec<Vec<TrellisLink>>,
    pub variable_priors: Vec<f64>,
    pub sides: Vec<Side>,
}

impl JointGraph {
    pub fn m_z(&self) -> usize {
        self.z_checks.check_count
    }

    pub fn m_x(&self) -> usize {
        self.equalizers.len()
    }

    pub fn variable_degree(&self, j: usize) -> usize {
        self.z_checks.var_adj[j].len() + 1
    }

    pub fn constraint_degree(&self, j: usize) -> usize {
        self.constraint_links[j].len() + 1
    }

    /// Sum of node degrees over all four node classes (each edge counted twice).
    pub fn degree_sum(&self) -> usize {
        let vars: usize = (0..self.n).map(|j| self.variable_degree(j)).sum();
        let cons: usize = (0..self.n).map(|j| self.constraint_degree(j)).sum();
        let zs = self.z_checks.edge_count();
        let eqs: usize = self.equalizers.iter().map(|e| e.qubit_order.len()).sum();
        vars + cons + zs + eqs
    }

    /// `[[H_Z, 0], [I_n, H_Xᵀ]]` with `H_X` rebuilt from the equalizer supports.
    pub fn h_joint(&self) -> BinMatrix {
        let m_x = self.m_x();
        let mut top = BinMatrix::zeros(self.m_z(), self.n + m_x);
        for i in 0..self.m_z() {
            for &j in &self.z_checks.check_adj[i] {
                top.set(i, j, true);
            }
        }
        let mut bottom = BinMatrix::zeros(self.n, self.n + m_x);
        for j in 0..self.n {
            bottom.set(j, j, true);
            for l in &self.constraint_links[j] {
                bottom.set(j, self.n + l.equalizer, true);
            }
        }
        top.vstack(&bottom).expect("same width")
    }

    /// `check,step,qubit` rows for every equalizer.
    pub fn permutation_csv(&self) -> String {
        let mut out = String::from("check,step,qubit\n");
        for eq in &self.equalizers {
            for (t, q) in eq.qubit_order.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", eq.check, t + 1, q);
            }
        }
        out
    }
}

pub fn build_joint_graph(
    code: &CssCode,
    eqs: &[EqualizerSpec],
    priors: &FaultPriors,
) -> Result<JointGraph, CompileError> {
    if eqs.len() != code.m_x() {
        return Err(CompileError::EqualizerCount {
            expected: code.m_x(),
            got: eqs.len(),
        });
    }
    let mut equalizers = eqs.to_vec();
    let mut constraint_links = vec![Vec::new(); code.n];
    for (k, eq) in equalizers.iter_mut().enumerate() {
        eq.fault_priors = priors.equalizer[k].clone();
        for (t, &q) in eq.qubit_order.iter().enumerate() {
            constraint_links[q].push(TrellisLink {
                equalizer: k,
                step: t + 1,
            });
        }
    }
    Ok(JointGraph {
        n: code.n,
        rho: code.rho,
        h_z: code.h_z.clone(),
        z_checks: tanner_graph(&code.h_z),
        equalizers,
        constraint_links,
        variable_priors: priors.variable.clone(),
        sides: (0..code.n).map(|j| code.side(j)).collect(),
    })
}

/// One-call compilation of the TA decoding graph.
pub fn compile_joint(circ: &MeasurementCircuit, np: NoiseParams) -> Result<JointGraph, CompileError> {
    let pm = build_p_matrix(circ);
    let eqs = group_segments(&pm, &circ.code.h_x)?;
    build_joint_graph(&circ.code, &eqs, &fault_priors(circ, np))
}

/// Single-fault class before merging.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FaultClass {
    DataInit { qubit: usize },
    Hook { check: usize, step: usize },
    CnotTarget { check: usize, slot: usize },
}

#[derive(Clone, Debug)]
pub struct CircuitLevelGraph {
    /// `m_z × columns`.
    pub h_circ: BinMatrix,
    pub prior_probs: Vec<f64>,
    pub prior_llrs: Vec<f64>,
    /// Data error of each column's representative fault.
    pub column_effects: Vec<BinVector>,
    /// Fault classes merged into each column.
    pub members: Vec<Vec<FaultClass>>,
    pub n: usize,
}

impl CircuitLevelGraph {
    pub fn columns(&self) -> usize {
        self.h_circ.ncols()
    }
}

/// Enumerates single-fault classes with their probability and data-error effect.
pub fn fault_classes(circ: &MeasurementCircuit, np: NoiseParams) -> Vec<(FaultClass, f64, BinVector)> {
    let p = np.p();
    let (init, cnot) = (2.0 * p / 3.0, 8.0 * p / 15.0);
    let n = circ.code.n;
    let mut out = Vec::new();
    for j in 0..n {
        out.push((FaultClass::DataInit { qubit: j }, init, BinVector::unit(n, j)));
    }
    for k in 0..circ.check_count() {
        let slots = circ.slots(k);
        for t in 1..=circ.rho() {
            let prob = if t == 1 { init } else { cnot };
            let effect = BinVector::from_support(n, slots[t - 1..].iter().copied());
            out.push((FaultClass::Hook { check: k, step: t }, prob, effect));
        }
        for t in 1..=circ.rho() {
            out.push((
                FaultClass::CnotTarget { check: k, slot: t },
                cnot,
                BinVector::unit(n, slots[t - 1]),
            ));
        }
    }
    out
}

/// Merges fault classes by syndrome signature; zero-syndrome classes are dropped.
/// A merged column keeps the effect of its most probable member (earliest on ties).
pub fn build_circuit_level_graph(circ: &MeasurementCircuit, np: NoiseParams) -> CircuitLevelGraph {
    let code = &circ.code;
    let mut index: HashMap<BinVector, usize> = HashMap::new();
    let mut syndromes: Vec<BinVector> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut best: Vec<f64> = Vec::new();
    let mut effects: Vec<BinVector> = Vec::new();
    let mut members: Vec<Vec<FaultClass>> = Vec::new();
    for (class, prob, effect) in fault_classes(circ, np) {
        let syn = code.h_z.mul_vec(&effect).expect("effect length n");
        if syn.is_zero() {
            continue;
        }
        match index.get(&syn) {
            Some(&c) => {
                probs[c] = xor_combine(probs[c], prob);
                if prob > best[c] {
                    best[c] = prob;
                    effects[c] = effect;
                }
                members[c].push(class);
            }
            None => {
                index.insert(syn.clone(), syndromes.len());
                syndromes.push(syn);
                probs.push(prob);
                best.push(prob);
                effects.push(effect);
                members.push(vec![class]);
            }
        }
    }
    let h_circ = BinMatrix::from_columns(code.m_z(), &syndromes).expect("syndrome length m_z");
    CircuitLevelGraph {
        h_circ,
        prior_llrs: probs.iter().map(|&q| prob_to_llr(q)).collect(),
        prior_probs: probs,
        column_effects: effects,
        members,
        n: code.n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_circuit;
    use crate::code::{build_bb_code, BBSpec};
    use std::collections::HashSet;

    fn example() -> MeasurementCircuit {
        build_circuit(&build_bb_code(&BBSpec::example_n5()).unwrap())
    }

    fn bb90() -> MeasurementCircuit {
        build_circuit(&build_bb_code(&BBSpec::bb90()).unwrap())
    }

    #[test]
    fn first_segment_is_hx_transpose() {
        let circ = example();
        let pm = build_p_matrix(&circ);
        assert_eq!(pm.p_mat.nrows(), 10);
        assert_eq!(pm.p_mat.ncols(), 20);
        assert_eq!(pm.segment(1), circ.code.h_x.transpose());
        assert!(pm.segment(4).col_weights().iter().all(|&w| w == 1));
    }

    #[test]
    fn nested_supports_strict() {
        let circ = bb90();
        let pm = build_p_matrix(&circ);
        for k in 0..circ.check_count() {
            let block = pm.check_block(k);
            for s in 1..circ.rho() {
                let (a, b) = (block.column(s - 1), block.column(s));
                assert!(b.ones().all(|q| a.get(q)));
                assert_eq!(a.weight(), b.weight() + 1);
            }
        }
    }

    #[test]
    fn canonical_g_shapes() {
        assert_eq!(canonical_g(1), BinMatrix::identity(1));
        let g = canonical_g(4);
        assert_eq!(g.row_weights(), vec![1, 2, 3, 4]);
        // recursion oracle d_t = d_{t-1} ⊕ x_t for x = (1,1,0,0)
        let x = BinVector::from_bits(&[1, 1, 0, 0]);
        let mut d = Vec::new();
        let mut acc = 0u8;
        for t in 0..4 {
            acc ^= x.get(t) as u8;
            d.push(acc);
        }
        assert_eq!(g.mul_vec(&x).unwrap(), BinVector::from_bits(&d));
        assert_eq!(d, vec![1, 0, 0, 0]);
    }

    #[test]
    fn example_first_check_block() {
        let circ = example();
        let pm = build_p_matrix(&circ);
        // the 10x4 block printed for the first check
        let printed = BinMatrix::from_rows(&[
            vec![0, 0, 0, 0],
            vec![1, 1, 1, 1],
            vec![0, 0, 0, 0],
            vec![1, 1, 0, 0],
            vec![0, 0, 0, 0],
            vec![1, 0, 0, 0],
            vec![0, 0, 0, 0],
            vec![1, 1, 1, 0],
            vec![0, 0, 0, 0],
            vec![0, 0, 0, 0],
        ])
        .unwrap();
        assert_eq!(pm.check_block(0), printed);
        let eqs = group_segments(&pm, &circ.code.h_x).unwrap();
        assert_eq!(eqs[0].qubit_order, vec![5, 3, 7, 1]);
        assert_eq!(pm.check_block(0).select_rows(&eqs[0].qubit_order), canonical_g(4));
    }

    #[test]
    fn permutation_is_the_schedule() {
        let circ = example();
        let mut slots = circ.all_slots().to_vec();
        slots[2] = vec![9, 0, 3, 7];
        let circ = MeasurementCircuit::with_slots(&circ.code, slots).unwrap();
        let eqs = group_segments(&build_p_matrix(&circ), &circ.code.h_x).unwrap();
        assert_eq!(eqs[2].qubit_order, vec![9, 0, 3, 7]);
        for (k, eq) in eqs.iter().enumerate() {
            assert_eq!(eq.qubit_order, circ.slots(k));
        }
        let rev = circ.reversed();
        let eqs_rev = group_segments(&build_p_matrix(&rev), &rev.code.h_x).unwrap();
        assert_eq!(eqs_rev[2].qubit_order, vec![7, 3, 0, 9]);
    }

    #[test]
    fn inconsistent_block_is_rejected() {
        let circ = example();
        let mut pm = build_p_matrix(&circ);
        let col = pm.column_index(1, 3);
        let q = circ.slots(1)[0];
        pm.p_mat.set(q, col, true);
        assert!(matches!(
            group_segments(&pm, &circ.code.h_x),
            Err(CompileError::NotNested { check: 1, .. })
        ));
    }

    #[test]
    fn prior_values() {
        let circ = bb90();
        let fp = fault_priors(&circ, NoiseParams::new(0.15).unwrap());
        assert!((fp.equalizer[0][0] - 9f64.ln()).abs() < 1e-12);
        let q8: f64 = 0.08;
        assert!((fp.equalizer[3][4] - ((1.0 - q8) / q8).ln()).abs() < 1e-12);
        // gamma = 3: odd number of flips among 0.1, 0.08, 0.08, 0.08 by enumeration
        let ps = [0.1, 0.08, 0.08, 0.08];
        let mut odd: f64 = 0.0;
        for mask in 0u32..16 {
            let pr: f64 = (0..4)
                .map(|i| if mask >> i & 1 == 1 { ps[i] } else { 1.0 - ps[i] })
                .product();
            if mask.count_ones() % 2 == 1 {
                odd += pr;
            }
        }
        assert!((fp.variable[17] - ((1.0 - odd) / odd).ln()).abs() < 1e-12);
        let zero = fault_priors(&circ, NoiseParams::new(0.0).unwrap());
        assert!(zero.variable.iter().all(|&l| l == crate::scalar::LLR_MAX));
    }

    #[test]
    fn joint_graph_degrees() {
        let circ = example();
        let g = compile_joint(&circ, NoiseParams::new(0.01).unwrap()).unwrap();
        assert!((0..10).all(|j| g.constraint_degree(j) == 3));
        assert!((0..10).all(|j| g.variable_degree(j) == 3));
        let circ = bb90();
        let g = compile_joint(&circ, NoiseParams::new(0.01).unwrap()).unwrap();
        assert!((0..90).all(|j| g.constraint_degree(j) == 4 && g.variable_degree(j) == 4));
        assert!(g.equalizers.iter().all(|e| e.qubit_order.len() == 6));
        // every edge seen from both ends: 2·(nγ + n + m_x·ρ)
        let (n, gamma, m_x, rho) = (90, 3, 45, 6);
        assert_eq!(g.degree_sum(), 2 * (n * gamma + n + m_x * rho));
        // links agree with the equalizer orders
        for (j, links) in g.constraint_links.iter().enumerate() {
            for l in links {
                assert_eq!(g.equalizers[l.equalizer].step_of(j), Some(l.step));
            }
        }
    }

    #[test]
    fn reduced_joint_matrix() {
        let circ = example();
        let g = compile_joint(&circ, NoiseParams::new(0.01).unwrap()).unwrap();
        let want = circ
            .code
            .h_z
            .hstack(&BinMatrix::zeros(5, 5))
            .unwrap()
            .vstack(&BinMatrix::identity(10).hstack(&circ.code.h_x.transpose()).unwrap())
            .unwrap();
        assert_eq!(g.h_joint(), want);
        assert!(g.permutation_csv().starts_with("check,step,qubit\n0,1,5\n0,2,3\n"));
    }

    #[test]
    fn circuit_level_merging() {
        let circ = example();
        let np = NoiseParams::new(0.01).unwrap();
        let g = build_circuit_level_graph(&circ, np);
        // oracle: distinct nonzero syndromes of all single faults
        let mut distinct = HashSet::new();
        for (_, _, e) in fault_classes(&circ, np) {
            let s = circ.code.h_z.mul_vec(&e).unwrap();
            if !s.is_zero() {
                distinct.insert(s);
            }
        }
        assert_eq!(g.columns(), distinct.len());
        assert_eq!(g.columns(), 10);
        // step-1 hooks are stabilizers and vanish
        assert!(g
            .members
            .iter()
            .flatten()
            .all(|m| !matches!(m, FaultClass::Hook { step: 1, .. })));
        // data init on qubit 0 merges with the CNOT target hitting qubit 0
        let c0 = g
            .members
            .iter()
            .position(|m| m.contains(&FaultClass::DataInit { qubit: 0 }))
            .unwrap();
        assert!(g.members[c0]
            .iter()
            .any(|m| matches!(m, FaultClass::CnotTarget { .. })));
        assert_eq!(g.column_effects[c0], BinVector::unit(10, 0));
        for c in 0..g.columns() {
            assert_eq!(
                circ.code.h_z.mul_vec(&g.column_effects[c]).unwrap(),
                g.h_circ.column(c)
            );
        }
    }

    #[test]
    fn circuit_level_prior_combination() {
        let circ = example();
        let p = 0.03;
        let g = build_circuit_level_graph(&circ, NoiseParams::new(p).unwrap());
        let c0 = g
            .members
            .iter()
            .position(|m| m.contains(&FaultClass::DataInit { qubit: 0 }))
            .unwrap();
        let want = g.members[c0].iter().fold(0.0, |q, m| {
            let pm = match m {
                FaultClass::DataInit { .. } => 2.0 * p / 3.0,
                FaultClass::Hook { step: 1, .. } => 2.0 * p / 3.0,
                _ => 8.0 * p / 15.0,
            };
            q + pm - 2.0 * q * pm
        });
        assert!((g.prior_probs[c0] - want).abs() < 1e-15);
    }
}
