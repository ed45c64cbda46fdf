//! Exact finite-budget evaluation.
//!
//! [`ExactEngine::summary`] propagates the law of the sufficient statistic
//! `(n1, s1, s2)` forward one round at a time and applies the recommendation
//! rule to the final layer. States are visited in lexicographic order of
//! `(n1, s1, s2)` and every target cell is accumulated in that order, so
//! results are bit-reproducible.
//!
//! Static schedules do not react to rewards, so their error probability is a
//! comparison of two independent binomials; [`ExactEngine::static_exact`]
//! evaluates it in the log domain, which keeps budgets in the thousands
//! (error probabilities far below `1e-300`) representable.

use serde::Serialize;

use crate::policies::{recommend, static_counts, PolicySpec, PolicyState, SamplingRule};
use crate::rates::{g_closed, kl_unchecked, Allocation, Arm, BanditInstance};
use crate::{Error, Result};

/// Environment variable overriding [`Capacity::max_states`].
pub const MAX_STATES_ENV: &str = "BAI_MAX_STATES";

/// Largest adaptive budget handled by default.
pub const DEFAULT_MAX_BUDGET: u32 = 150;

/// Largest budget for the binomial fast path.
pub const MAX_STATIC_BUDGET: u32 = 5000;

/// Number of `(n1, s1, s2)` states after `t` rounds: `C(t + 3, 3)`.
pub fn layer_size(t: u32) -> usize {
    let t = t as usize;
    (t + 1) * (t + 2) * (t + 3) / 6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capacity {
    /// States allowed in one DP layer.
    pub max_states: usize,
    pub max_static_budget: u32,
}

impl Default for Capacity {
    fn default() -> Self {
        Capacity {
            max_states: layer_size(DEFAULT_MAX_BUDGET),
            max_static_budget: MAX_STATIC_BUDGET,
        }
    }
}

impl Capacity {
    /// Default capacity, with `max_states` taken from `BAI_MAX_STATES` when set.
    pub fn from_env() -> Result<Self> {
        let mut cap = Capacity::default();
        if let Ok(v) = std::env::var(MAX_STATES_ENV) {
            cap.max_states = v.trim().parse().map_err(|_| {
                Error::Parse(format!("{MAX_STATES_ENV}='{v}' is not a state count"))
            })?;
        }
        Ok(cap)
    }

    /// Largest budget whose final layer fits in `max_states`.
    pub fn max_adaptive_budget(&self) -> u32 {
        let mut t = 0;
        while layer_size(t + 1) <= self.max_states {
            t += 1;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactSummary {
    pub p_error: f64,
    pub p_pick2: f64,
    pub e_n1: f64,
    pub e_omega2: f64,
}

/// Decision probabilities and pull counts; defined for any instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionSummary {
    pub budget: u32,
    pub p_pick1: f64,
    pub p_pick2: f64,
    pub e_n1: f64,
}

impl DecisionSummary {
    pub fn e_n2(&self) -> f64 {
        self.budget as f64 - self.e_n1
    }

    pub fn p_pick(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.p_pick1,
            Arm::Two => self.p_pick2,
        }
    }

    fn into_exact(self, best: Arm) -> ExactSummary {
        ExactSummary {
            p_error: self.p_pick(best.other()),
            p_pick2: self.p_pick2,
            e_n1: self.e_n1,
            e_omega2: self.e_n2() / self.budget as f64,
        }
    }
}

struct Layer {
    t: u32,
    offsets: Vec<usize>,
    probs: Vec<f64>,
}

impl Layer {
    fn zeros(t: u32) -> Self {
        let mut offsets = Vec::with_capacity(t as usize + 2);
        let mut next = 0usize;
        for n1 in 0..=t {
            offsets.push(next);
            next += (n1 as usize + 1) * ((t - n1) as usize + 1);
        }
        Layer {
            t,
            offsets,
            probs: vec![0.0; next],
        }
    }

    fn index(&self, n1: u32, s1: u32, s2: u32) -> usize {
        self.offsets[n1 as usize] + s1 as usize * ((self.t - n1) as usize + 1) + s2 as usize
    }

    /// Visit nonzero states in lexicographic `(n1, s1, s2)` order.
    fn for_each(&self, mut f: impl FnMut(PolicyState, f64)) {
        let t = self.t;
        for n1 in 0..=t {
            let base = self.offsets[n1 as usize];
            let width = (t - n1) as usize + 1;
            for s1 in 0..=n1 {
                let row = base + s1 as usize * width;
                for s2 in 0..=(t - n1) {
                    let p = self.probs[row + s2 as usize];
                    if p != 0.0 {
                        f(PolicyState { t, n1, s1, s2 }, p);
                    }
                }
            }
        }
    }

    fn mass(&self) -> f64 {
        let mut total = 0.0;
        self.for_each(|_, p| total += p);
        total
    }
}

/// Exact engine with a state budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEngine {
    pub capacity: Capacity,
}

/// Log-domain result of the binomial fast path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticExact {
    pub budget: u32,
    pub n1: u32,
    pub n2: u32,
    pub log_p_pick1: f64,
    pub log_p_pick2: f64,
}

impl StaticExact {
    pub fn log_p_pick(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.log_p_pick1,
            Arm::Two => self.log_p_pick2,
        }
    }

    pub fn decisions(&self) -> DecisionSummary {
        DecisionSummary {
            budget: self.budget,
            p_pick1: self.log_p_pick1.exp(),
            p_pick2: self.log_p_pick2.exp(),
            e_n1: self.n1 as f64,
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// `ln k!` for `k = 0..=n`, with compensated summation.
fn ln_factorials(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    out.push(0.0);
    for k in 1..=n {
        let term = (k as f64).ln();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

fn binomial_log_pmf(n: u32, p: f64, ln_fact: &[f64]) -> Vec<f64> {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|k| {
            ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize]
                + k as f64 * lp
                + (n - k) as f64 * lq
        })
        .collect()
}

impl ExactEngine {
    pub fn new(capacity: Capacity) -> Self {
        ExactEngine { capacity }
    }

    fn check_budget(&self, budget: u32) -> Result<()> {
        if budget < 2 {
            return Err(Error::argument(format!("budget T = {budget} must be at least 2")));
        }
        let needed = layer_size(budget);
        if needed > self.capacity.max_states {
            return Err(Error::Capacity {
                what: "exact DP layer",
                requested: needed,
                limit: self.capacity.max_states,
            });
        }
        Ok(())
    }

    fn run<R: SamplingRule + ?Sized>(
        &self,
        rule: &R,
        inst: &BanditInstance,
        budget: u32,
        mut on_layer: impl FnMut(&Layer),
    ) -> Result<DecisionSummary> {
        self.check_budget(budget)?;
        let (m1, m2) = (inst.mu1(), inst.mu2());
        let mut layer = Layer::zeros(0);
        layer.probs[0] = 1.0;
        on_layer(&layer);
        for t in 0..budget {
            let mut next = Layer::zeros(t + 1);
            layer.for_each(|st, p| {
                let q = rule.prob_arm1(&st);
                if q > 0.0 {
                    let mass = p * q;
                    let hit = next.index(st.n1 + 1, st.s1 + 1, st.s2);
                    next.probs[hit] += mass * m1;
                    let miss = next.index(st.n1 + 1, st.s1, st.s2);
                    next.probs[miss] += mass * (1.0 - m1);
                }
                if q < 1.0 {
                    let mass = p * (1.0 - q);
                    let hit = next.index(st.n1, st.s1, st.s2 + 1);
                    next.probs[hit] += mass * m2;
                    let miss = next.index(st.n1, st.s1, st.s2);
                    next.probs[miss] += mass * (1.0 - m2);
                }
            });
            layer = next;
            on_layer(&layer);
        }

        let (mut pick1, mut pick2, mut e_n1) = (0.0, 0.0, 0.0);
        let mut failure = None;
        layer.for_each(|st, p| {
            match recommend(&st) {
                Ok(d) => {
                    pick1 += p * d.arm1;
                    pick2 += p * d.arm2;
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
            e_n1 += p * st.n1 as f64;
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(DecisionSummary {
            budget,
            p_pick1: pick1,
            p_pick2: pick2,
            e_n1,
        })
    }

    /// Decision probabilities and expected pulls; the instance may have equal
    /// means.
    pub fn decisions<R: SamplingRule + ?Sized>(
        &self,
        rule: &R,
        inst: &BanditInstance,
        budget: u32,
    ) -> Result<DecisionSummary> {
        self.run(rule, inst, budget, |_| {})
    }

    pub fn summary<R: SamplingRule + ?Sized>(
        &self,
        rule: &R,
        inst: &BanditInstance,
        budget: u32,
    ) -> Result<ExactSummary> {
        let best = inst.require_best_arm()?;
        Ok(self.decisions(rule, inst, budget)?.into_exact(best))
    }

    /// [`ExactEngine::summary`] together with the total probability of every
    /// layer `t = 0..=T`.
    pub fn summary_traced<R: SamplingRule + ?Sized>(
        &self,
        rule: &R,
        inst: &BanditInstance,
        budget: u32,
    ) -> Result<(ExactSummary, Vec<f64>)> {
        let best = inst.require_best_arm()?;
        let mut masses = Vec::with_capacity(budget as usize + 1);
        let d = self.run(rule, inst, budget, |l| masses.push(l.mass()))?;
        Ok((d.into_exact(best), masses))
    }

    /// Binomial fast path for the static schedule with arm-2 fraction `x`.
    pub fn static_exact(&self, x: Allocation, inst: &BanditInstance, budget: u32) -> Result<StaticExact> {
        if budget > self.capacity.max_static_budget {
            return Err(Error::Capacity {
                what: "static fast-path budget",
                requested: budget as usize,
                limit: self.capacity.max_static_budget as usize,
            });
        }
        let (n1, n2) = static_counts(x, budget);
        if n1 == 0 || n2 == 0 {
            return Err(Error::argument(format!(
                "static schedule x = {} with T = {budget} leaves an arm unsampled",
                x.value()
            )));
        }
        let ln_fact = ln_factorials(n1.max(n2));
        let lp1 = binomial_log_pmf(n1, inst.mu1(), &ln_fact);
        let lp2 = binomial_log_pmf(n2, inst.mu2(), &ln_fact);

        // tail[k] = log P(S2 >= k), head[k] = log P(S2 <= k - 1)
        let mut tail = vec![f64::NEG_INFINITY; n2 as usize + 2];
        for k in (0..=n2 as usize).rev() {
            tail[k] = log_add_exp(lp2[k], tail[k + 1]);
        }
        let mut head = vec![f64::NEG_INFINITY; n2 as usize + 2];
        for k in 0..=n2 as usize {
            head[k + 1] = log_add_exp(head[k], lp2[k]);
        }

        let half = 0.5_f64.ln();
        let mut terms2 = Vec::with_capacity(n1 as usize + 1);
        let mut terms1 = Vec::with_capacity(n1 as usize + 1);
        for s1 in 0..=n1 {
            // arm 2 wins iff s2 n1 > s1 n2
            let cross = s1 as u64 * n2 as u64;
            let q = (cross / n1 as u64) as usize;
            let tie = cross % n1 as u64 == 0;
            let tie_term = if tie { half + lp2[q] } else { f64::NEG_INFINITY };
            let above = q + 1; // smallest s2 strictly beating s1
            let below = if tie { q } else { q + 1 }; // count of s2 strictly losing
            terms2.push(lp1[s1 as usize] + log_add_exp(tail[above], tie_term));
            terms1.push(lp1[s1 as usize] + log_add_exp(head[below], tie_term));
        }
        Ok(StaticExact {
            budget,
            n1,
            n2,
            log_p_pick1: log_sum_exp(&terms1),
            log_p_pick2: log_sum_exp(&terms2),
        })
    }

    pub fn static_log_error(&self, x: Allocation, inst: &BanditInstance, budget: u32) -> Result<f64> {
        let best = inst.require_best_arm()?;
        Ok(self.static_exact(x, inst, budget)?.log_p_pick(best.other()))
    }

    /// Exact summary through the fast path when the policy is static, the DP
    /// otherwise. Also returns `log p_error`.
    pub fn summary_any(
        &self,
        policy: &PolicySpec,
        inst: &BanditInstance,
        budget: u32,
    ) -> Result<(ExactSummary, f64)> {
        let best = inst.require_best_arm()?;
        match policy.static_allocation() {
            Some(x) => {
                let s = self.static_exact(x, inst, budget)?;
                Ok((s.decisions().into_exact(best), s.log_p_pick(best.other())))
            }
            None => {
                let s = self.summary(policy, inst, budget)?;
                Ok((s, s.p_error.ln()))
            }
        }
    }

    pub fn change_of_measure<R: SamplingRule + ?Sized>(
        &self,
        rule: &R,
        pi: &BanditInstance,
        mu: &BanditInstance,
        budget: u32,
    ) -> Result<MeasureChange> {
        let under_pi = self.decisions(rule, pi, budget)?;
        let under_mu = self.decisions(rule, mu, budget)?;
        let lhs = under_pi.e_n1 * kl_unchecked(pi.mu1(), mu.mu1())
            + under_pi.e_n2() * kl_unchecked(pi.mu2(), mu.mu2());
        let (p, q) = (under_pi.p_pick2, under_mu.p_pick2);
        let degenerate = (q <= 0.0 || q >= 1.0) && p != q;
        let rhs = if degenerate {
            f64::INFINITY
        } else if q <= 0.0 || q >= 1.0 {
            0.0
        } else {
            kl_unchecked(p.clamp(0.0, 1.0), q)
        };
        let slack = if degenerate { f64::INFINITY } else { lhs - rhs };
        Ok(MeasureChange {
            lhs,
            rhs,
            slack,
            infinite_rhs: degenerate,
            p_pi_pick2: p,
            p_mu_pick2: q,
            chained_bound: p * (-q.ln()) - std::f64::consts::LN_2,
        })
    }

    pub fn rate_ratio_scan(
        &self,
        policy: &PolicySpec,
        inst: &BanditInstance,
        budgets: &[u32],
    ) -> Result<RateScan> {
        inst.require_best_arm()?;
        let points = budgets
            .iter()
            .map(|&budget| {
                let (summary, log_p) = self.summary_any(policy, inst, budget)?;
                Ok(ScanPoint {
                    budget,
                    log_p_error: log_p,
                    ratio: budget as f64 / -log_p,
                    summary,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RateScan {
            reference: 1.0 / g_closed(Allocation::UNIFORM, inst),
            points,
        })
    }

    pub fn stability_profile(
        &self,
        policy: &PolicySpec,
        a: f64,
        gaps: &[f64],
        budgets: &[u32],
    ) -> Result<StabilityProfile> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::argument(format!("a = {a} is not in (0, 1)")));
        }
        let omega2 = |inst: BanditInstance, budget: u32| -> Result<f64> {
            match policy.static_allocation() {
                Some(x) => {
                    if budget < 2 {
                        return Err(Error::argument("budget must be at least 2"));
                    }
                    Ok(static_counts(x, budget).1 as f64 / budget as f64)
                }
                None => Ok(self.summary(policy, &inst, budget)?.e_omega2),
            }
        };
        let mut profile_a = Vec::with_capacity(gaps.len());
        let mut profile_b = Vec::with_capacity(gaps.len());
        for &gap in gaps {
            let (lo, hi) = (a - gap / 2.0, a + gap / 2.0);
            if !(gap > 0.0 && lo > 0.0 && hi < 1.0) {
                return Err(Error::argument(format!(
                    "gap {gap} around a = {a} leaves (0, 1)"
                )));
            }
            let lam = BanditInstance::new(hi, lo)?;
            let pi = BanditInstance::new(lo, hi)?;
            profile_a.push(budgets.iter().map(|&b| omega2(lam, b)).collect::<Result<Vec<_>>>()?);
            profile_b.push(budgets.iter().map(|&b| omega2(pi, b)).collect::<Result<Vec<_>>>()?);
        }
        Ok(StabilityProfile {
            a,
            gaps: gaps.to_vec(),
            budgets: budgets.to_vec(),
            profile_a,
            profile_b,
        })
    }
}

/// Both sides of the change-of-measure inequality
/// `E_pi[N1] d(pi1, mu1) + E_pi[N2] d(pi2, mu2) >= d(P_pi[pick 2], P_mu[pick 2])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureChange {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; `+inf` when `rhs` is infinite (see `infinite_rhs`).
    pub slack: f64,
    /// Set when `P_mu[pick 2]` is 0 or 1 while `P_pi[pick 2]` differs.
    pub infinite_rhs: bool,
    pub p_pi_pick2: f64,
    pub p_mu_pick2: f64,
    /// `P_pi[pick 2] log(1 / P_mu[pick 2]) - log 2`, a lower bound on `rhs`.
    pub chained_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub budget: u32,
    pub log_p_error: f64,
    /// `T / log(1 / p_error)`.
    pub ratio: f64,
    pub summary: ExactSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateScan {
    /// `1 / g(1/2, mu)`, the level uniform sampling attains.
    pub reference: f64,
    pub points: Vec<ScanPoint>,
}

impl RateScan {
    /// Least-squares slope of `-log p_error` against `T`.
    pub fn fitted_slope(&self) -> f64 {
        let n = self.points.len() as f64;
        let mx = self.points.iter().map(|p| p.budget as f64).sum::<f64>() / n;
        let my = self.points.iter().map(|p| -p.log_p_error).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for p in &self.points {
            let dx = p.budget as f64 - mx;
            sxy += dx * (-p.log_p_error - my);
            sxx += dx * dx;
        }
        sxy / sxx
    }

    /// Whether `p_error` never increases along the scan. Reported only: parity
    /// of ties can make small budgets non-monotone.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].log_p_error <= w[0].log_p_error)
    }
}

/// `E[omega2(T)]` along instances converging to `(a, a)` from both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProfile {
    pub a: f64,
    pub gaps: Vec<f64>,
    pub budgets: Vec<u32>,
    /// Under `(a + gap/2, a - gap/2)`, indexed `[gap][budget]`.
    pub profile_a: Vec<Vec<f64>>,
    /// Under `(a - gap/2, a + gap/2)`.
    pub profile_b: Vec<Vec<f64>>,
}

pub fn exact_summary<R: SamplingRule + ?Sized>(
    rule: &R,
    inst: &BanditInstance,
    budget: u32,
) -> Result<ExactSummary> {
    ExactEngine::default().summary(rule, inst, budget)
}

pub fn static_error_exact(x: Allocation, inst: &BanditInstance, budget: u32) -> Result<f64> {
    Ok(ExactEngine::default().static_log_error(x, inst, budget)?.exp())
}

pub fn static_log_error_exact(x: Allocation, inst: &BanditInstance, budget: u32) -> Result<f64> {
    ExactEngine::default().static_log_error(x, inst, budget)
}

pub fn change_of_measure_slack<R: SamplingRule + ?Sized>(
    rule: &R,
    pi: &BanditInstance,
    mu: &BanditInstance,
    budget: u32,
) -> Result<MeasureChange> {
    ExactEngine::default().change_of_measure(rule, pi, mu, budget)
}

pub fn rate_ratio_scan(policy: &PolicySpec, inst: &BanditInstance, budgets: &[u32]) -> Result<RateScan> {
    ExactEngine::default().rate_ratio_scan(policy, inst, budgets)
}

pub fn stability_profile(
    policy: &PolicySpec,
    a: f64,
    gaps: &[f64],
    budgets: &[u32],
) -> Result<StabilityProfile> {
    ExactEngine::default().stability_profile(policy, a, gaps, budgets)
}
