//! Two-state accumulator trellis and its BCJR soft-input soft-output estimator.
//!
//! A hook fault entering an ancilla at step `t` flips every data qubit touched
//! from step `t` on, so the error seen at step `t` is the running parity of the
//! fault inputs: `d_t = d_{t-1} ⊕ f_t`. The state is that parity, the output
//! `x_t` equals the new state, and the trellis starts in state 0.

use std::ops::Deref;

use crate::scalar::{softplus, Real, LLR_MAX};

/// Metric accumulation rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Semiring {
    /// Max-plus recursions.
    #[default]
    MaxLog,
    /// Exact log-sum-exp; for diagnostics.
    Exact,
}

/// One branch of a trellis layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub from: u8,
    pub to: u8,
    pub input: u8,
    pub output: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trellis {
    pub rho: usize,
}

impl Trellis {
    pub fn new(rho: usize) -> Self {
        assert!(rho >= 1, "trellis needs at least one layer");
        Self { rho }
    }

    /// The four branches shared by every layer.
    pub fn transitions(&self) -> [Transition; 4] {
        let mut out = [Transition {
            from: 0,
            to: 0,
            input: 0,
            output: 0,
        }; 4];
        for (i, t) in out.iter_mut().enumerate() {
            let from = (i >> 1) as u8;
            let input = (i & 1) as u8;
            let to = from ^ input;
            *t = Transition {
                from,
                to,
                input,
                output: to,
            };
        }
        out
    }
}

/// LLR array with entries clipped to `±LLR_MAX`.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrVector<T>(Vec<T>);

impl<T: Real> LlrVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        let bound = T::lit(LLR_MAX);
        Self(values.into_iter().map(|v| v.clip(bound)).collect())
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for LlrVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Log branch metrics of one layer, indexed by input `f` and output `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchMetrics<T> {
    /// `[f][x]`
    pub by_label: [[T; 2]; 2],
}

impl<T: Real> BranchMetrics<T> {
    /// `log P(x) + log P(f)` for each label.
    pub fn new(l_x: T, l_f: T) -> Self {
        let bound = T::lit(LLR_MAX);
        let (lx, lf) = (l_x.clip(bound), l_f.clip(bound));
        let (sx, sf) = (softplus(lx), softplus(lf));
        let px = [lx - sx, -sx];
        let pf = [lf - sf, -sf];
        Self {
            by_label: [[pf[0] + px[0], pf[0] + px[1]], [pf[1] + px[0], pf[1] + px[1]]],
        }
    }

    #[inline]
    pub fn get(&self, input: u8, output: u8) -> T {
        self.by_label[input as usize][output as usize]
    }
}

pub fn branch_metrics<T: Real>(l_x: &[T], l_f: &[T]) -> Vec<BranchMetrics<T>> {
    assert_eq!(l_x.len(), l_f.len(), "L(x) and L(f) lengths differ");
    l_x.iter()
        .zip(l_f)
        .map(|(&x, &f)| BranchMetrics::new(x, f))
        .collect()
}

#[inline]
fn combine<T: Real>(semiring: Semiring, a: T, b: T) -> T {
    match semiring {
        Semiring::MaxLog => a.max(b),
        Semiring::Exact => {
            if a == T::neg_infinity() {
                b
            } else if b == T::neg_infinity() {
                a
            } else {
                let m = a.max(b);
                m + (-(a - b).abs()).exp().ln_1p()
            }
        }
    }
}

/// Reusable buffers for [`Bcjr::run`].
#[derive(Clone, Debug, Default)]
pub struct Bcjr<T> {
    pub semiring: Semiring,
    gammas: Vec<BranchMetrics<T>>,
    alpha: Vec<[T; 2]>,
}

impl<T: Real> Bcjr<T> {
    pub fn new(semiring: Semiring) -> Self {
        Self {
            semiring,
            gammas: Vec::new(),
            alpha: Vec::new(),
        }
    }

    /// Writes the a-posteriori `L'(x_t)` into `out`.
    pub fn run(&mut self, l_x: &[T], l_f: &[T], out: &mut [T]) {
        let rho = l_x.len();
        assert_eq!(l_f.len(), rho);
        assert_eq!(out.len(), rho);
        let sr = self.semiring;
        let ninf = T::neg_infinity();
        self.gammas.clear();
        self.gammas
            .extend(l_x.iter().zip(l_f).map(|(&x, &f)| BranchMetrics::new(x, f)));
        // alpha[t] is the forward metric after layer t; alpha[0] pins state 0
        self.alpha.clear();
        self.alpha.push([T::zero(), ninf]);
        for g in &self.gammas {
            let a = *self.alpha.last().unwrap();
            // to state s: from s with f = 0, or from 1 - s with f = 1; output x = s
            let next = [
                combine(sr, a[0] + g.get(0, 0), a[1] + g.get(1, 0)),
                combine(sr, a[1] + g.get(0, 1), a[0] + g.get(1, 1)),
            ];
            self.alpha.push(next);
        }
        let bound = T::lit(LLR_MAX);
        // final state unconstrained
        let mut beta = [T::zero(), T::zero()];
        for t in (0..rho).rev() {
            let g = &self.gammas[t];
            let a = self.alpha[t];
            let zero = combine(sr, a[0] + g.get(0, 0), a[1] + g.get(1, 0)) + beta[0];
            let one = combine(sr, a[1] + g.get(0, 1), a[0] + g.get(1, 1)) + beta[1];
            out[t] = (zero - one).clip(bound);
            beta = [
                combine(sr, g.get(0, 0) + beta[0], g.get(1, 1) + beta[1]),
                combine(sr, g.get(0, 1) + beta[1], g.get(1, 0) + beta[0]),
            ];
        }
    }
}

/// Max-log BCJR over the accumulator trellis.
pub fn bcjr<T: Real>(tr: &Trellis, l_x: &[T], l_f: &[T]) -> LlrVector<T> {
    bcjr_with(tr, l_x, l_f, Semiring::MaxLog)
}

pub fn bcjr_with<T: Real>(tr: &Trellis, l_x: &[T], l_f: &[T], semiring: Semiring) -> LlrVector<T> {
    assert_eq!(l_x.len(), tr.rho);
    let mut out = vec![T::zero(); tr.rho];
    Bcjr::new(semiring).run(l_x, l_f, &mut out);
    LlrVector(out)
}

/// `L'(x) − L(x)`, clipped.
pub fn extrinsic<T: Real>(l_post: &[T], l_in: &[T]) -> LlrVector<T> {
    assert_eq!(l_post.len(), l_in.len());
    LlrVector::new(l_post.iter().zip(l_in).map(|(&a, &b)| a - b).collect())
}

pub mod oracle {
    //! Exhaustive MAP over all `2^rho` fault patterns.
    use super::*;

    /// `(score(0), score(1))` per position, scores combined by max or log-sum-exp.
    pub fn brute_force(l_x: &[f64], l_f: &[f64], exact: bool) -> Vec<f64> {
        let rho = l_x.len();
        let mut best = vec![[f64::NEG_INFINITY; 2]; rho];
        let lp = |l: f64, bit: u32| {
            let l = l.clamp(-LLR_MAX, LLR_MAX);
            // log P(0) = -ln(1 + e^-L), log P(1) = -ln(1 + e^L)
            if bit == 0 {
                -(-l).exp().ln_1p()
            } else {
                -l.exp().ln_1p()
            }
        };
        for pattern in 0u32..(1 << rho) {
            let mut state = 0;
            let mut xs = vec![0; rho];
            let mut score = 0.0;
            for t in 0..rho {
                let f = pattern >> t & 1;
                state ^= f;
                xs[t] = state;
                score += lp(l_f[t], f) + lp(l_x[t], state);
            }
            for t in 0..rho {
                let slot = &mut best[t][xs[t] as usize];
                *slot = if exact {
                    if *slot == f64::NEG_INFINITY {
                        score
                    } else {
                        let m = slot.max(score);
                        m + ((*slot - m).exp() + (score - m).exp()).ln()
                    }
                } else {
                    slot.max(score)
                };
            }
        }
        best.iter()
            .map(|b| (b[0] - b[1]).clamp(-LLR_MAX, LLR_MAX))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn transitions_follow_accumulator() {
        let tr = Trellis::new(4);
        let ts = tr.transitions();
        assert_eq!(ts.len(), 4);
        for t in ts {
            assert_eq!(t.to, t.from ^ t.input);
            assert_eq!(t.output, t.to);
        }
    }

    #[test]
    fn uniform_metrics() {
        let g = BranchMetrics::new(0.0f64, 0.0);
        for f in 0..2 {
            for x in 0..2 {
                assert!((g.get(f, x) - 2.0 * 0.5f64.ln()).abs() < 1e-12);
                assert!((g.get(f, x) + 1.3863).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn saturated_fault_prior_suppresses_faulty_branches() {
        let g = BranchMetrics::new(0.0f64, LLR_MAX);
        assert!(g.get(1, 0) < -LLR_MAX + 1.0);
        assert!(g.get(1, 1) < -LLR_MAX + 1.0);
        assert!(g.get(0, 0) > -1.0);
    }

    #[test]
    fn metric_hand_evaluation() {
        let g = BranchMetrics::new(2.0f64, -1.0);
        // probability oracle: P(x=1) = 1/(1+e^2), P(f=0) = e^-1/(1+e^-1)
        let px1 = 1.0 / (1.0 + 2f64.exp());
        let pf0 = (-1f64).exp() / (1.0 + (-1f64).exp());
        assert!((g.get(0, 1) - (px1 * pf0).ln()).abs() < 1e-12);
        assert!((g.get(0, 1) + 3.4402).abs() < 1e-4);
        let all = branch_metrics(&[2.0f64], &[-1.0]);
        assert_eq!(all[0], g);
    }

    #[test]
    fn single_step_passes_fault_prior() {
        let tr = Trellis::new(1);
        for &lambda in &[-4.0, 0.3, 7.5] {
            let out = bcjr(&tr, &[0.0f64], &[lambda]);
            assert!((out[0] - lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn no_error_path_dominates() {
        let tr = Trellis::new(6);
        let out = bcjr(&tr, &[0.0f64; 6], &[8.0; 6]);
        assert!(out.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn matches_brute_force_rho4() {
        let tr = Trellis::new(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let lx: Vec<f64> = (0..4).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let lf: Vec<f64> = (0..4).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let got = bcjr(&tr, &lx, &lf);
            let want = oracle::brute_force(&lx, &lf, false);
            for t in 0..4 {
                assert!((got[t] - want[t]).abs() < 1e-9, "{got:?} vs {want:?}");
            }
            let ext = extrinsic(&got, &lx);
            for t in 0..4 {
                assert!((ext[t] - (want[t] - lx[t])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_semiring_matches_exhaustive_sum() {
        let tr = Trellis::new(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let lx: Vec<f64> = (0..5).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let lf: Vec<f64> = (0..5).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let got = bcjr_with(&tr, &lx, &lf, Semiring::Exact);
            let want = oracle::brute_force(&lx, &lf, true);
            for t in 0..5 {
                assert!((got[t] - want[t]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn extrinsic_edge_cases() {
        let post = [1.0f64, -2.0, 3.0];
        assert_eq!(&*extrinsic(&post, &[0.0; 3]), &post);
        assert!(extrinsic(&post, &post).iter().all(|&v| v == 0.0));
        assert_eq!(extrinsic(&[29.0f64], &[-29.0])[0], LLR_MAX);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let tr = Trellis::new(6);
        let lx = [1.5, -0.5, 3.0, 0.0, -2.0, 4.0];
        let lf = [2.0, 5.0, 5.0, 5.0, 5.0, 5.0];
        let a = bcjr(&tr, &lx, &lf);
        let lx32: Vec<f32> = lx.iter().map(|&v| v as f32).collect();
        let lf32: Vec<f32> = lf.iter().map(|&v| v as f32).collect();
        let b = bcjr(&tr, &lx32, &lf32);
        for t in 0..6 {
            assert!((a[t] - b[t] as f64).abs() < 1e-4);
        }
    }

    fn llrs(rho: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-40.0f64..40.0, rho)
    }

    proptest! {
        #[test]
        fn outputs_bounded_and_match_oracle(
            (lx, lf) in (1usize..=6).prop_flat_map(|r| (llrs(r), llrs(r)))
        ) {
            let tr = Trellis::new(lx.len());
            let out = bcjr(&tr, &lx, &lf);
            let want = oracle::brute_force(&lx, &lf, false);
            for (o, w) in out.iter().zip(&want) {
                prop_assert!(o.is_finite() && o.abs() <= LLR_MAX);
                prop_assert!((o - w).abs() < 1e-9);
            }
        }

        #[test]
        fn fault_flip_symmetry(
            (lx, lf, s) in (2usize..=6).prop_flat_map(|r| (llrs(r), llrs(r), 0..r))
        ) {
            // toggling f_s toggles x_t for all t >= s
            let tr = Trellis::new(lx.len());
            let base = bcjr(&tr, &lx, &lf);
            let lx2: Vec<f64> = lx.iter().enumerate().map(|(t, &v)| if t >= s { -v } else { v }).collect();
            let mut lf2 = lf.clone();
            lf2[s] = -lf2[s];
            let flipped = bcjr(&tr, &lx2, &lf2);
            for t in 0..lx.len() {
                let want = if t >= s { -base[t] } else { base[t] };
                prop_assert!((flipped[t] - want).abs() < 1e-9);
            }
        }

        #[test]
        fn first_step_monotone_in_fault_prior(
            (lx, lf) in (1usize..=6).prop_flat_map(|r| (llrs(r), llrs(r))),
            bump in 0.0f64..10.0
        ) {
            let tr = Trellis::new(lx.len());
            let lo = bcjr(&tr, &lx, &lf)[0];
            let mut lf2 = lf.clone();
            lf2[0] += bump;
            let hi = bcjr(&tr, &lx, &lf2)[0];
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
