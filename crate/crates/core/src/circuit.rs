//! Noisy X-stabilizer round followed by a perfect Z round.
//!
//! Only the X component of the Pauli frame is tracked: Y counts as X and Z
//! components are dropped, since Z-frame faults never reach the Z syndrome.
//!
//! # Randomness
//!
//! Every trial draws from its own ChaCha8 stream: the 64-bit experiment seed
//! is expanded into the ChaCha key with `SeedableRng::seed_from_u64`, and the
//! trial index selects the ChaCha stream (`set_stream(trial_index)`). Trial
//! `i` therefore sees the same faults no matter which worker runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::code::CssCode;
use crate::gf2::BinVector;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("check {check}: schedule {slots:?} is not an ordering of its support {support:?}")]
    BadSchedule {
        check: usize,
        slots: Vec<usize>,
        support: Vec<usize>,
    },
    #[error("expected {expected} checks in schedule, got {got}")]
    CheckCount { expected: usize, got: usize },
    #[error("fault probability {0} outside [0, 0.5]")]
    BadProbability(f64),
}

/// Per-component fault rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    p: f64,
}

impl NoiseParams {
    pub fn new(p: f64) -> Result<Self, CircuitError> {
        if !(0.0..=0.5).contains(&p) {
            return Err(CircuitError::BadProbability(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Single-qubit Pauli, as seen by the X frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_index(i: u8) -> Self {
        match i & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn flips_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }
}

/// CNOT order of every X-check.
#[derive(Clone, Debug)]
pub struct MeasurementCircuit {
    pub code: CssCode,
    /// `slots[k][t]` is the data qubit targeted at time step `t + 1` by check `k`.
    slots: Vec<Vec<usize>>,
}

impl MeasurementCircuit {
    /// Uses an explicit per-check qubit order.
    pub fn with_slots(code: &CssCode, slots: Vec<Vec<usize>>) -> Result<Self, CircuitError> {
        if slots.len() != code.m_x() {
            return Err(CircuitError::CheckCount {
                expected: code.m_x(),
                got: slots.len(),
            });
        }
        for (k, s) in slots.iter().enumerate() {
            let support: Vec<usize> = code.h_x.row(k).ones().collect();
            let mut sorted = s.clone();
            sorted.sort_unstable();
            if sorted != support {
                return Err(CircuitError::BadSchedule {
                    check: k,
                    slots: s.clone(),
                    support,
                });
            }
        }
        Ok(Self {
            code: code.clone(),
            slots,
        })
    }

    pub fn rho(&self) -> usize {
        self.code.rho
    }

    pub fn check_count(&self) -> usize {
        self.slots.len()
    }

    /// Qubit order of check `k`; index `t - 1` holds time step `t`.
    pub fn slots(&self, k: usize) -> &[usize] {
        &self.slots[k]
    }

    pub fn all_slots(&self) -> &[Vec<usize>] {
        &self.slots
    }

    /// Same circuit with every check's order reversed.
    pub fn reversed(&self) -> Self {
        Self {
            code: self.code.clone(),
            slots: self
                .slots
                .iter()
                .map(|s| s.iter().rev().copied().collect())
                .collect(),
        }
    }
}

/// Default schedule: one layer of parallel CNOTs per polynomial term, in the
/// code spec's term order.
pub fn build_circuit(code: &CssCode) -> MeasurementCircuit {
    let order = code.spec.term_order();
    let slots = (0..code.m_x())
        .map(|k| order.iter().map(|&t| code.spec.qubit_of(k, t)).collect())
        .collect();
    MeasurementCircuit::with_slots(code, slots).expect("term schedule covers each check support")
}

/// X-frame faults of one trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultSet {
    pub data_init: BinVector,
    /// Bit `k·rho + (t − 1)`: an X fault enters the trellis of check `k` at step `t`.
    pub ancilla_hook: BinVector,
    pub direct_cnot: BinVector,
    rho: usize,
}

impl FaultSet {
    pub fn zeros(circ: &MeasurementCircuit) -> Self {
        Self {
            data_init: BinVector::zeros(circ.code.n),
            ancilla_hook: BinVector::zeros(circ.check_count() * circ.rho()),
            direct_cnot: BinVector::zeros(circ.code.n),
            rho: circ.rho(),
        }
    }

    /// `t` is 1-based.
    pub fn hook(&self, check: usize, t: usize) -> bool {
        self.ancilla_hook.get(check * self.rho + t - 1)
    }

    pub fn flip_hook(&mut self, check: usize, t: usize) {
        assert!((1..=self.rho).contains(&t), "hook step {t} outside 1..={}", self.rho);
        self.ancilla_hook.flip(check * self.rho + t - 1);
    }

    /// Hook steps of one check as a length-`rho` vector.
    pub fn hooks_of(&self, check: usize) -> BinVector {
        BinVector::from_support(
            self.rho,
            (1..=self.rho).filter(|&t| self.hook(check, t)).map(|t| t - 1),
        )
    }

    /// Applies a two-qubit Pauli after the CNOT at `slot` (1-based) of `check`.
    pub fn inject_cnot(
        &mut self,
        circ: &MeasurementCircuit,
        check: usize,
        slot: usize,
        control: Pauli,
        target: Pauli,
    ) {
        if control.flips_x() && slot < self.rho {
            self.flip_hook(check, slot + 1);
        }
        if target.flips_x() {
            self.direct_cnot.flip(circ.slots(check)[slot - 1]);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data_init.is_zero() && self.ancilla_hook.is_zero() && self.direct_cnot.is_zero()
    }
}

/// Deterministic per-trial stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws the faults of one round at rate `np.p` per component.
pub fn sample_faults<R: Rng + ?Sized>(
    circ: &MeasurementCircuit,
    np: NoiseParams,
    rng: &mut R,
) -> FaultSet {
    let mut f = FaultSet::zeros(circ);
    let p = np.p();
    if p == 0.0 {
        return f;
    }
    // single-qubit depolarizing: X or Y branch flips the X frame
    let depolarized = |rng: &mut R| rng.gen::<f64>() < p && rng.gen_range(0u8..3) < 2;
    for j in 0..circ.code.n {
        if depolarized(rng) {
            f.data_init.flip(j);
        }
    }
    for k in 0..circ.check_count() {
        if depolarized(rng) {
            f.flip_hook(k, 1);
        }
    }
    let rho = circ.rho();
    for k in 0..circ.check_count() {
        for slot in 1..=rho {
            if rng.gen::<f64>() < p {
                // one of the 15 non-identity two-qubit Paulis
                let r = rng.gen_range(1u8..16);
                f.inject_cnot(circ, k, slot, Pauli::from_index(r >> 2), Pauli::from_index(r));
            }
        }
    }
    f
}

/// Ancilla-only faults: every trellis step of every check fires independently
/// at `rate`.
pub fn sample_hooks_only<R: Rng + ?Sized>(
    circ: &MeasurementCircuit,
    rate: f64,
    rng: &mut R,
) -> FaultSet {
    let mut f = FaultSet::zeros(circ);
    for k in 0..circ.check_count() {
        for t in 1..=circ.rho() {
            if rng.gen::<f64>() < rate {
                f.flip_hook(k, t);
            }
        }
    }
    f
}

/// Data-qubit X error after the round.
pub fn propagate(circ: &MeasurementCircuit, f: &FaultSet) -> BinVector {
    let mut e = f.data_init.xor(&f.direct_cnot);
    for k in 0..circ.check_count() {
        // running parity of hook faults, d_t = d_{t-1} + x_t
        let mut d = false;
        for (t, &q) in circ.slots(k).iter().enumerate() {
            d ^= f.hook(k, t + 1);
            if d {
                e.flip(q);
            }
        }
    }
    e
}

/// `s = H_Z · e`.
pub fn syndrome(code: &CssCode, e: &BinVector) -> BinVector {
    code.h_z.mul_vec(e).expect("error length equals n")
}

/// `(1 − (1 − 2p)^t) / 2`: flip rate of the slot-`t` qubit from ancilla faults alone.
pub fn hook_marginal(p: f64, t: usize) -> f64 {
    (1.0 - (1.0 - 2.0 * p).powi(t as i32)) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_bb_code, BBSpec};

    fn example() -> MeasurementCircuit {
        build_circuit(&build_bb_code(&BBSpec::example_n5()).unwrap())
    }

    #[test]
    fn example_schedule_follows_terms() {
        let circ = example();
        // b:1, a:x³, b:x², a:x on row 0 → R0, L3, R2, L1
        assert_eq!(circ.slots(0), &[5, 3, 7, 1]);
        assert_eq!(circ.slots(2), &[7, 0, 9, 3]);
    }

    #[test]
    fn benchmark_checks_have_six_slots() {
        let circ = build_circuit(&build_bb_code(&BBSpec::bb90()).unwrap());
        assert!(circ.all_slots().iter().all(|s| s.len() == 6));
    }

    #[test]
    fn custom_schedule_validation() {
        let circ = example();
        let rev = circ.reversed();
        assert_eq!(rev.slots(0), &[1, 7, 3, 5]);
        let mut bad = circ.all_slots().to_vec();
        bad[0][0] = 0;
        assert!(matches!(
            MeasurementCircuit::with_slots(&circ.code, bad),
            Err(CircuitError::BadSchedule { check: 0, .. })
        ));
    }

    #[test]
    fn zero_noise_gives_no_faults() {
        let circ = example();
        let mut rng = trial_rng(1, 0);
        let f = sample_faults(&circ, NoiseParams::new(0.0).unwrap(), &mut rng);
        assert!(f.is_zero());
        assert!(NoiseParams::new(0.6).is_err());
    }

    #[test]
    fn forced_control_fault_sets_next_step() {
        let circ = example();
        let mut f = FaultSet::zeros(&circ);
        f.inject_cnot(&circ, 3, 1, Pauli::X, Pauli::I);
        assert_eq!(f.ancilla_hook.ones().collect::<Vec<_>>(), vec![3 * 4 + 1]);
        assert!(f.hook(3, 2));
        // fault after the last CNOT is dropped
        let mut g = FaultSet::zeros(&circ);
        g.inject_cnot(&circ, 3, 4, Pauli::Y, Pauli::Z);
        assert!(g.is_zero());
    }

    #[test]
    fn propagation_patterns() {
        let circ = example();
        let slots = circ.slots(1).to_vec();
        let mut f = FaultSet::zeros(&circ);
        f.flip_hook(1, 1);
        assert_eq!(propagate(&circ, &f), BinVector::from_support(10, slots.clone()));
        let mut f = FaultSet::zeros(&circ);
        f.flip_hook(1, 4);
        assert_eq!(propagate(&circ, &f), BinVector::unit(10, slots[3]));
        let mut f = FaultSet::zeros(&circ);
        f.flip_hook(1, 1);
        f.flip_hook(1, 2);
        assert_eq!(propagate(&circ, &f), BinVector::unit(10, slots[0]));
    }

    #[test]
    fn propagate_matches_g_matrix_oracle() {
        // d = x · Gᵀ with G[t][s] = 1 iff s <= t, computed by explicit sums
        let circ = example();
        for mask in 0u32..16 {
            let mut f = FaultSet::zeros(&circ);
            for t in 0..4 {
                if mask >> t & 1 == 1 {
                    f.flip_hook(0, t + 1);
                }
            }
            let e = propagate(&circ, &f);
            for t in 0..4 {
                let d = (0..=t).filter(|&s| mask >> s & 1 == 1).count() % 2 == 1;
                assert_eq!(e.get(circ.slots(0)[t]), d);
            }
        }
    }

    #[test]
    fn syndrome_examples() {
        let circ = example();
        let code = &circ.code;
        assert!(syndrome(code, &BinVector::zeros(10)).is_zero());
        assert!(syndrome(code, code.h_x.row(2)).is_zero());
        assert_eq!(syndrome(code, &BinVector::unit(10, 6)), code.h_z.column(6));
    }

    #[test]
    fn sampling_is_deterministic_per_trial() {
        let circ = build_circuit(&build_bb_code(&BBSpec::bb90()).unwrap());
        let np = NoiseParams::new(0.05).unwrap();
        let a = propagate(&circ, &sample_faults(&circ, np, &mut trial_rng(9, 17)));
        let b = propagate(&circ, &sample_faults(&circ, np, &mut trial_rng(9, 17)));
        let c = propagate(&circ, &sample_faults(&circ, np, &mut trial_rng(9, 18)));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn control_component_frequency() {
        // p = 0.5 on a single CNOT, 10^6 draws; control X/Y with rate 8/15 · p
        let circ = example();
        let np = NoiseParams::new(0.5).unwrap();
        let draws = 1_000_000u64;
        let mut rng = trial_rng(3, 0);
        let mut hits = 0u64;
        for _ in 0..draws / 5 {
            let f = sample_faults(&circ, np, &mut rng);
            // slot 1 control faults of each check land on step 2
            hits += (0..5).filter(|&k| f.hook(k, 2)).count() as u64;
        }
        let q = 8.0 / 15.0 * 0.5;
        let sigma = (q * (1.0 - q) / draws as f64).sqrt();
        let rate = hits as f64 / draws as f64;
        assert!((rate - q).abs() < 3.0 * sigma, "rate {rate} vs {q}");
    }

    #[test]
    fn marginal_recursion_holds() {
        let p = 0.013;
        for t in 2..10 {
            let prev = hook_marginal(p, t - 1);
            assert!((hook_marginal(p, t) - (p + prev - 2.0 * p * prev)).abs() < 1e-15);
        }
    }
}
