//! Slow reference implementations used by tests.

use crate::policies::{recommend, PolicyState, SamplingRule};
use crate::rates::{g_closed, inner_objective, Allocation, Arm, BanditInstance};
use crate::Result;

/// Decision probabilities and `E[N1]` by walking every action and reward
/// path of length `budget` and replaying the rule along each path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumerated {
    pub p_pick1: f64,
    pub p_pick2: f64,
    pub e_n1: f64,
}

pub fn enumerate_paths<R: SamplingRule + ?Sized>(
    rule: &R,
    inst: &BanditInstance,
    budget: u32,
) -> Result<Enumerated> {
    let mut acc = [Neumaier::default(); 3];
    walk(rule, inst, budget, PolicyState::initial(), 1.0, &mut acc)?;
    Ok(Enumerated {
        p_pick1: acc[0].value(),
        p_pick2: acc[1].value(),
        e_n1: acc[2].value(),
    })
}

/// Compensated running sum; path counts reach `4^T`.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn walk<R: SamplingRule + ?Sized>(
    rule: &R,
    inst: &BanditInstance,
    budget: u32,
    st: PolicyState,
    weight: f64,
    acc: &mut [Neumaier; 3],
) -> Result<()> {
    if st.t == budget {
        let d = recommend(&st)?;
        acc[0].add(weight * d.arm1);
        acc[1].add(weight * d.arm2);
        acc[2].add(weight * st.n1 as f64);
        return Ok(());
    }
    let q = rule.prob_arm1(&st);
    for (arm, w_arm) in [(Arm::One, q), (Arm::Two, 1.0 - q)] {
        if w_arm == 0.0 {
            continue;
        }
        let mu = inst.mean(arm);
        walk(rule, inst, budget, st.advance(arm, true), weight * w_arm * mu, acc)?;
        walk(rule, inst, budget, st.advance(arm, false), weight * w_arm * (1.0 - mu), acc)?;
    }
    Ok(())
}

/// Grid maximiser of `g(., inst)` over `x = k / n`.
pub fn grid_argmax_g(inst: &BanditInstance, n: u32) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=n {
        let x = k as f64 / n as f64;
        let v = g_closed(Allocation::new(x).expect("grid point in [0, 1]"), inst);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Grid minimiser of the inner objective over `lambda` in `[lo, hi]`.
pub fn grid_argmin_inner(x: Allocation, inst: &BanditInstance, lo: f64, hi: f64, n: u32) -> (f64, f64) {
    let mut best = (lo, f64::INFINITY);
    for k in 0..=n {
        let lam = lo + (hi - lo) * k as f64 / n as f64;
        let v = inner_objective(lam, x, inst);
        if v < best.1 {
            best = (lam, v);
        }
    }
    best
}
