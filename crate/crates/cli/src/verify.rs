//! Randomised property suites behind `bai verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use bai_core::constructions::{
    asymmetry_gap, check_odds_inequality, construct_beating_instance, construct_dual_instance,
    verify_certificate,
};
use bai_core::dual::{bregman, dual_rate_objects, natural_to_mean, taylor_bracket_check, NaturalInstance};
use bai_core::exact::ExactEngine;
use bai_core::policies::PolicySpec;
use bai_core::rates::{
    g_by_minimization, g_closed, kl_bernoulli, lambda_star, pinsker_like_bound_slack,
    stationarity_residual, x_star, DEFAULT_TOL,
};
use bai_core::{Allocation, BanditInstance};

use crate::args::Suite;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Every value must be at most the limit.
    AtMost,
    /// Every value must be at least the limit.
    AtLeast,
    /// Every value must exceed the limit.
    Above,
    /// Every value must be below the limit.
    Below,
}

/// Worst case of one property over a suite run.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub samples: usize,
    pub bound: Bound,
    pub limit: f64,
    pub worst: f64,
    pub passed: bool,
    /// Inputs at the worst value.
    pub witness: Option<Value>,
}

impl PropertyReport {
    fn new(name: &str, bound: Bound, limit: f64) -> Self {
        let worst = match bound {
            Bound::AtMost | Bound::Below => f64::NEG_INFINITY,
            Bound::AtLeast | Bound::Above => f64::INFINITY,
        };
        PropertyReport {
            name: name.to_string(),
            samples: 0,
            bound,
            limit,
            worst,
            passed: true,
            witness: None,
        }
    }

    fn ok(&self, v: f64) -> bool {
        match self.bound {
            Bound::AtMost => v <= self.limit,
            Bound::AtLeast => v >= self.limit,
            Bound::Above => v > self.limit,
            Bound::Below => v < self.limit,
        }
    }

    fn record(&mut self, value: f64, witness: impl FnOnce() -> Value) {
        self.samples += 1;
        let worse = match self.bound {
            Bound::AtMost | Bound::Below => !(value <= self.worst),
            Bound::AtLeast | Bound::Above => !(value >= self.worst),
        };
        if worse {
            self.worst = value;
            self.witness = Some(witness());
        }
        self.passed &= self.ok(value);
    }

    pub fn line(&self) -> String {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
            Bound::Above => ">",
            Bound::Below => "<",
        };
        format!(
            "{}  {:<40} samples={:<6} worst={:<12.4e} required {op} {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.worst,
            self.limit
        )
    }
}

fn inst_json(i: &BanditInstance) -> Value {
    json!({ "mu1": i.mu1(), "mu2": i.mu2() })
}

fn random_instance(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> BanditInstance {
    loop {
        let (a, b) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
        if a != b {
            return BanditInstance::new(a, b).expect("sampled inside (0, 1)");
        }
    }
}

/// Instance with `mu1 > mu2` and `mu1 + mu2 >= 1`.
fn random_upper_instance(rng: &mut ChaCha8Rng) -> BanditInstance {
    loop {
        let m1 = rng.random_range(0.5..0.999);
        let m2 = rng.random_range((1.0 - m1)..m1);
        if m1 > m2 && m1 + m2 >= 1.0 {
            return BanditInstance::new(m1, m2).expect("sampled inside (0, 1)");
        }
    }
}

pub fn rates_suite(samples: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<PropertyReport>> {
    let mut closed = PropertyReport::new("rates.closed_form_vs_minimization", Bound::AtMost, 1e-6);
    let mut stationarity = PropertyReport::new("rates.lambda_stationarity", Bound::AtMost, 1e-8);
    let mut concave = PropertyReport::new("rates.second_difference_in_x", Bound::Below, 0.0);
    let mut optimal = PropertyReport::new("rates.x_star_beats_neighbours", Bound::AtLeast, 0.0);
    let mut pinsker = PropertyReport::new("rates.kl_chained_bound_slack", Bound::AtLeast, 0.0);
    let h = 1e-3;
    for _ in 0..samples {
        let inst = random_instance(rng, 0.01, 0.99);
        let x = Allocation::new(rng.random_range(h..1.0 - h))?;
        let w = || json!({ "instance": inst_json(&inst), "x": x.value() });

        let numeric = g_by_minimization(x, &inst, DEFAULT_TOL)?;
        closed.record((numeric.value - g_closed(x, &inst)).abs(), w);
        stationarity.record(stationarity_residual(x, &inst)?.abs(), w);

        let g = |v: f64| g_closed(Allocation::new(v).expect("grid point in [0, 1]"), &inst);
        concave.record(g(x.value() - h) - 2.0 * g(x.value()) + g(x.value() + h), w);

        let xs = x_star(&inst, DEFAULT_TOL)?.value();
        let up = (xs + h).min(1.0);
        let down = (xs - h).max(0.0);
        optimal.record(g(xs) - g(up).max(g(down)), || json!({ "instance": inst_json(&inst), "x_star": xs }));

        let (p, q) = (rng.random_range(0.0..1.0), rng.random_range(0.001..0.999));
        pinsker.record(pinsker_like_bound_slack(p, q)?, || json!({ "p": p, "q": q }));
    }
    Ok(vec![closed, stationarity, concave, optimal, pinsker])
}

pub fn dual_suite(samples: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<PropertyReport>> {
    let mut kl = PropertyReport::new("dual.kl_equals_bregman", Bound::AtMost, 1e-10);
    let mut lam = PropertyReport::new("dual.lambda_matches_primal", Bound::AtMost, 1e-8);
    let mut xs = PropertyReport::new("dual.x_star_matches_primal", Bound::AtMost, 1e-8);
    let mut taylor = PropertyReport::new("dual.taylor_bracket_margin", Bound::AtLeast, 0.0);
    for _ in 0..samples {
        let inst = random_instance(rng, 0.001, 0.999);
        let nat = NaturalInstance::from_means(&inst);
        let w = || json!({ "instance": inst_json(&inst) });
        let d = kl_bernoulli(inst.mu1(), inst.mu2())?;
        kl.record((d - bregman(nat.xi2, nat.xi1)).abs(), w);

        let x = Allocation::new(rng.random_range(0.0..=1.0))?;
        let objs = dual_rate_objects(x, &nat)?;
        lam.record((natural_to_mean(objs.lambda_bar) - lambda_star(x, &inst)).abs(), || {
            json!({ "instance": inst_json(&inst), "x": x.value() })
        });
        xs.record((objs.x_star_dual - x_star(&inst, DEFAULT_TOL)?.value()).abs(), w);

        let (alpha, beta) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        if alpha != beta {
            let t = taylor_bracket_check(alpha, beta)?;
            taylor.record((t.ratio - t.lo).min(t.hi - t.ratio), || json!({ "alpha": alpha, "beta": beta }));
        }
    }
    Ok(vec![kl, lam, xs, taylor])
}

pub fn constructions_suite(samples: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<PropertyReport>> {
    let mut residual = PropertyReport::new("constructions.lambda_residual", Bound::AtMost, 1e-9);
    let mut xs_margin = PropertyReport::new("constructions.x_tilde_minus_x_star", Bound::Above, 0.0);
    let mut g_margin = PropertyReport::new("constructions.g_uniform_minus_g_x", Bound::Above, 0.0);
    let mut gap = PropertyReport::new("constructions.mu1_minus_mu2", Bound::Above, 0.0);
    let mut sum = PropertyReport::new("constructions.mu1_plus_mu2", Bound::AtLeast, 1.0);
    for k in 0..samples {
        let a = rng.random_range(0.05..0.95);
        let x = rng.random_range(0.6..=1.0);
        let (x, cert) = if k % 2 == 0 {
            let x = Allocation::new(x)?;
            (x, construct_dual_instance(a, x)?)
        } else {
            let x = Allocation::new(1.0 - x)?;
            (x, construct_beating_instance(a, x)?)
        };
        let check = verify_certificate(&cert)?;
        let (canon, _) = cert.canonical();
        let w = || json!({ "a": a, "x": x.value(), "certificate": serde_json::to_value(&cert).ok() });
        residual.record(check.residual_lambda, w);
        xs_margin.record(check.x_tilde - check.x_star, w);
        g_margin.record(check.g_uniform - check.g_at_x, w);
        gap.record(canon.mu1() - canon.mu2(), w);
        sum.record(canon.mu1() + canon.mu2(), w);
    }
    Ok(vec![residual, xs_margin, g_margin, gap, sum])
}

/// Points `k / (n + 1)`, `k = 1..=n`, on each axis, restricted to
/// `mu1 > mu2` and `mu1 + mu2 >= 1`.
pub fn upper_region_grid(n: u32) -> Vec<BanditInstance> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            let (m1, m2) = (i as f64 / (n + 1) as f64, j as f64 / (n + 1) as f64);
            if m1 > m2 && m1 + m2 >= 1.0 {
                out.push(BanditInstance::new(m1, m2).expect("grid inside (0, 1)"));
            }
        }
    }
    out
}

pub fn asymmetry_suite(samples: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<PropertyReport>> {
    let mut gap = PropertyReport::new("asymmetry.gap", Bound::AtLeast, -1e-12);
    let mut fp = PropertyReport::new("asymmetry.f_prime", Bound::AtLeast, -1e-12);
    let mut m = PropertyReport::new("asymmetry.stationarity_ratios_agree", Bound::AtMost, 1e-9);
    let mut odds = PropertyReport::new("asymmetry.odds_inequality_grid_failures", Bound::AtMost, 0.0);
    for _ in 0..samples {
        let inst = random_upper_instance(rng);
        let xs = x_star(&inst, DEFAULT_TOL)?.value();
        let delta = xs.min(1.0 - xs) * (1.0 - rng.random_range(0.0..1.0));
        let r = asymmetry_gap(&inst, delta)?;
        let w = || json!({ "instance": inst_json(&inst), "delta": delta });
        gap.record(r.gap, w);
        fp.record(r.f_prime, w);
        m.record((r.m - r.m_alt).abs(), w);
    }
    let grid = upper_region_grid(200);
    let failures = grid.iter().filter(|i| !check_odds_inequality(i)).count();
    odds.record(failures as f64, || {
        let first = grid.iter().find(|i| !check_odds_inequality(i));
        json!({ "grid_points": grid.len(), "first_failure": first.map(inst_json) })
    });
    odds.samples = grid.len();
    Ok(vec![gap, fp, m, odds])
}

/// One of the built-in policies, drawn at random; static fractions stay in
/// `[0.15, 0.85]` so that budgets of 7 or more sample both arms.
pub fn random_policy(rng: &mut ChaCha8Rng) -> CliResult<PolicySpec> {
    Ok(match rng.random_range(0..4) {
        0 => PolicySpec::uniform(),
        1 => PolicySpec::static_rule(Allocation::new(rng.random_range(0.15..0.85))?),
        2 => {
            let reference = loop {
                let r = random_instance(rng, 0.05, 0.95);
                let xs = x_star(&r, DEFAULT_TOL)?.value();
                if (0.15..=0.85).contains(&xs) {
                    break r;
                }
            };
            PolicySpec::oracle_static(reference)?
        }
        _ => PolicySpec::plugin_tracking(rng.random_range(0.0..=1.0))?,
    })
}

/// Change-of-measure suite; `max_budget` caps the DP budgets drawn.
pub fn com_suite(samples: usize, max_budget: u32, rng: &mut ChaCha8Rng) -> CliResult<Vec<PropertyReport>> {
    let mut slack = PropertyReport::new("com.slack", Bound::AtLeast, -1e-10);
    let mut chained = PropertyReport::new("com.rhs_minus_chained_bound", Bound::AtLeast, -1e-12);
    let engine = ExactEngine::default();
    for _ in 0..samples {
        let policy = random_policy(rng)?;
        let pi = random_instance(rng, 0.05, 0.95);
        let mu = random_instance(rng, 0.05, 0.95);
        let budget = rng.random_range(7..=max_budget);
        let c = engine.change_of_measure(&policy, &pi, &mu, budget)?;
        let w = || {
            json!({
                "policy": policy.to_string(),
                "pi": inst_json(&pi),
                "mu": inst_json(&mu),
                "T": budget,
                "lhs": c.lhs,
                "rhs": c.rhs,
            })
        };
        slack.record(c.slack, w);
        chained.record(c.rhs - c.chained_bound, w);
    }
    Ok(vec![slack, chained])
}

pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> CliResult<Vec<PropertyReport>> {
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Rates {
        out.extend(rates_suite(samples, &mut rng(1))?);
    }
    if all || suite == Suite::Dual {
        out.extend(dual_suite(samples, &mut rng(2))?);
    }
    if all || suite == Suite::Constructions {
        out.extend(constructions_suite(samples, &mut rng(3))?);
    }
    if all || suite == Suite::Asymmetry {
        out.extend(asymmetry_suite(samples, &mut rng(4))?);
    }
    if all || suite == Suite::Com {
        out.extend(com_suite(samples, 40, &mut rng(5))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_bounds() {
        let mut r = PropertyReport::new("p", Bound::AtMost, 1.0);
        r.record(0.5, || json!(1));
        r.record(0.7, || json!(2));
        assert!(r.passed);
        assert_eq!(r.witness, Some(json!(2)));
        r.record(3.0, || json!(3));
        assert!(!r.passed);
        assert_eq!(r.worst, 3.0);

        let mut r = PropertyReport::new("q", Bound::Above, 0.0);
        r.record(0.0, || json!(null));
        assert!(!r.passed);
    }

    #[test]
    fn grid_region() {
        let g = upper_region_grid(200);
        assert!(!g.is_empty());
        assert!(g.iter().all(|i| i.mu1() > i.mu2() && i.mu1() + i.mu2() >= 1.0));
    }

    #[test]
    fn suites_pass_small() {
        for suite in [Suite::Rates, Suite::Dual, Suite::Constructions, Suite::Asymmetry, Suite::Com] {
            for r in run_suite(suite, 30, 3).unwrap() {
                assert!(r.passed, "{}", r.line());
            }
        }
    }
}
