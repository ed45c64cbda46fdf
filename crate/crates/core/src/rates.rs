//! Primal rate-function machinery for two Bernoulli arms.
//!
//! For a static rule that spends a fraction `x` of the budget on arm 2, the
//! misidentification probability decays like `exp(-T g(x, mu))` where
//!
//! ```text
//! g(x, mu) = inf_lambda (1 - x) d(lambda, mu1) + x d(lambda, mu2)
//!          = -log((1 - mu1)^(1-x) (1 - mu2)^x + mu1^(1-x) mu2^x)
//! ```
//!
//! and `d` is the Bernoulli KL divergence.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default tolerance for [`x_star`] and [`g_by_minimization`].
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Arm {
    pub fn index(self) -> u8 {
        match self {
            Arm::One => 1,
            Arm::Two => 2,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::One => Arm::Two,
            Arm::Two => Arm::One,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// A pair of Bernoulli means, both strictly inside `(0, 1)`.
///
/// Equal means are allowed; operations that need a unique best arm check
/// [`BanditInstance::in_parameter_set`] themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct BanditInstance {
    mu1: f64,
    mu2: f64,
}

#[derive(Deserialize)]
struct RawInstance {
    mu1: f64,
    mu2: f64,
}

impl TryFrom<RawInstance> for BanditInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        BanditInstance::new(raw.mu1, raw.mu2)
    }
}

impl BanditInstance {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        for (name, mu) in [("mu1", mu1), ("mu2", mu2)] {
            if !(mu > 0.0 && mu < 1.0) {
                return Err(Error::domain(format!("{name} = {mu} is not in (0, 1)")));
            }
        }
        Ok(BanditInstance { mu1, mu2 })
    }

    /// The instance `(p, 1 - p)`. The complement is exact in floating point
    /// for `p >= 1/2`, and `p + (1 - p)` rounds to one for every `p`.
    pub fn complementary(p: f64) -> Result<Self> {
        BanditInstance::new(p, 1.0 - p)
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn mean(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.mu1,
            Arm::Two => self.mu2,
        }
    }

    /// Whether the means differ, i.e. the instance has a unique best arm.
    pub fn in_parameter_set(&self) -> bool {
        self.mu1 != self.mu2
    }

    pub fn best_arm(&self) -> Option<Arm> {
        if self.mu1 > self.mu2 {
            Some(Arm::One)
        } else if self.mu2 > self.mu1 {
            Some(Arm::Two)
        } else {
            None
        }
    }

    pub(crate) fn require_best_arm(&self) -> Result<Arm> {
        self.best_arm().ok_or(Error::NotInParameterSet {
            mu1: self.mu1,
            mu2: self.mu2,
        })
    }

    /// The same bandit with arm labels exchanged.
    pub fn swapped(&self) -> Self {
        BanditInstance {
            mu1: self.mu2,
            mu2: self.mu1,
        }
    }
}

impl fmt::Display for BanditInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.mu1, self.mu2)
    }
}

/// Fraction of the budget spent on arm 2.
///
/// Both shares are stored so that [`Allocation::complement`] is exact: the
/// arm-swap identities `g(x, (m1, m2)) = g(1 - x, (m2, m1))` then hold bit for
/// bit instead of up to the rounding of `1 - (1 - x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Allocation {
    arm2: f64,
    arm1: f64,
}

impl Allocation {
    pub const UNIFORM: Allocation = Allocation {
        arm2: 0.5,
        arm1: 0.5,
    };

    pub fn new(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("allocation {x} is not in [0, 1]")));
        }
        Ok(Allocation {
            arm2: x,
            arm1: 1.0 - x,
        })
    }

    /// The arm-2 fraction `x`.
    pub fn value(&self) -> f64 {
        self.arm2
    }

    pub fn share(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.arm1,
            Arm::Two => self.arm2,
        }
    }

    /// The allocation `1 - x`, i.e. the same rule with arm labels exchanged.
    pub fn complement(&self) -> Self {
        Allocation {
            arm2: self.arm1,
            arm1: self.arm2,
        }
    }

    pub fn is_interior(&self) -> bool {
        self.arm1 > 0.0 && self.arm2 > 0.0
    }
}

impl TryFrom<f64> for Allocation {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Allocation::new(x)
    }
}

impl From<Allocation> for f64 {
    fn from(x: Allocation) -> f64 {
        x.arm2
    }
}

/// `x log(x / y)` with `0 log 0 = 0`.
fn xlog_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

pub(crate) fn kl_unchecked(a: f64, b: f64) -> f64 {
    (xlog_ratio(a, b) + xlog_ratio(1.0 - a, 1.0 - b)).max(0.0)
}

/// Bernoulli KL divergence `d(a, b)`.
///
/// `a` may sit on the boundary (`0 log 0 = 0`); `b` must be interior since
/// the divergence is infinite otherwise.
pub fn kl_bernoulli(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::domain("NaN argument to kl_bernoulli"));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("first argument {a} is not in [0, 1]")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain(format!(
            "second argument {b} is not in (0, 1); the divergence is infinite"
        )));
    }
    Ok(kl_unchecked(a, b))
}

pub(crate) fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The two terms of `exp(-g)`: the all-failure and all-success weights.
fn exp_neg_g_terms(x: Allocation, inst: &BanditInstance) -> (f64, f64) {
    let (w1, w2) = (x.arm1, x.arm2);
    let failures = (w1 * (-inst.mu1).ln_1p() + w2 * (-inst.mu2).ln_1p()).exp();
    let successes = (w1 * inst.mu1.ln() + w2 * inst.mu2.ln()).exp();
    (failures, successes)
}

/// `exp(-g(x, mu))`.
pub fn exp_neg_g(x: Allocation, inst: &BanditInstance) -> f64 {
    let (f, s) = exp_neg_g_terms(x, inst);
    f + s
}

/// Rate function by its closed form.
pub fn g_closed(x: Allocation, inst: &BanditInstance) -> f64 {
    if !x.is_interior() {
        return 0.0;
    }
    (-exp_neg_g(x, inst).ln()).max(0.0)
}

/// `(log((1 - mu2) / (1 - mu1)), log(mu2 / mu1))`, accurate to a few ulps
/// relative even when the means nearly coincide.
pub(crate) fn log_ratios(inst: &BanditInstance) -> (f64, f64) {
    let d = inst.mu1 - inst.mu2;
    ((d / (1.0 - inst.mu1)).ln_1p(), (-d / inst.mu1).ln_1p())
}

/// First derivative of [`g_closed`] in `x`. Strictly decreasing in `x` when the
/// means differ.
pub fn g_slope(x: Allocation, inst: &BanditInstance) -> f64 {
    let (f, s) = exp_neg_g_terms(x, inst);
    let (log_fail_ratio, log_succ_ratio) = log_ratios(inst);
    -(f * log_fail_ratio + s * log_succ_ratio) / (f + s)
}

/// The objective `(1 - x) d(lambda, mu1) + x d(lambda, mu2)`.
pub fn inner_objective(lambda: f64, x: Allocation, inst: &BanditInstance) -> f64 {
    x.arm1 * kl_unchecked(lambda, inst.mu1) + x.arm2 * kl_unchecked(lambda, inst.mu2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerMinimum {
    pub value: f64,
    pub argmin: f64,
}

/// Derivative of [`inner_objective`] in `lambda`: the weighted sum of
/// `log(lambda / mu) - log((1 - lambda) / (1 - mu))` over the arms.
pub fn inner_objective_slope(lambda: f64, x: Allocation, inst: &BanditInstance) -> f64 {
    let term = |mu: f64| (lambda / mu).ln() - ((1.0 - lambda) / (1.0 - mu)).ln();
    x.arm1 * term(inst.mu1) + x.arm2 * term(inst.mu2)
}

/// Rate function by minimising the KL mixture over `lambda` directly.
///
/// The objective is strictly convex with its minimiser between the two means,
/// so the minimiser is located by bisection on the sign of
/// [`inner_objective_slope`] over `[min(mu), max(mu)]` until the bracket is
/// narrower than `tol`. A search on objective values alone would resolve the
/// minimiser only to about the square root of machine precision.
pub fn g_by_minimization(x: Allocation, inst: &BanditInstance, tol: f64) -> Result<InnerMinimum> {
    if !(tol > 0.0) {
        return Err(Error::argument(format!("tolerance {tol} must be positive")));
    }
    if x.arm2 == 0.0 || inst.mu1 == inst.mu2 {
        return Ok(InnerMinimum {
            value: 0.0,
            argmin: inst.mu1,
        });
    }
    if x.arm1 == 0.0 {
        return Ok(InnerMinimum {
            value: 0.0,
            argmin: inst.mu2,
        });
    }
    let mut lo = inst.mu1.min(inst.mu2);
    let mut hi = inst.mu1.max(inst.mu2);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let slope = inner_objective_slope(mid, x, inst);
        if slope > 0.0 {
            hi = mid;
        } else if slope < 0.0 {
            lo = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let argmin = 0.5 * (lo + hi);
    Ok(InnerMinimum {
        value: inner_objective(argmin, x, inst),
        argmin,
    })
}

/// The inner minimiser `lambda(x, mu)`: the sigmoid of the `x`-interpolated
/// log-odds of the two means.
pub fn lambda_star(x: Allocation, inst: &BanditInstance) -> f64 {
    if x.arm2 == 0.0 {
        return inst.mu1;
    }
    if x.arm1 == 0.0 {
        return inst.mu2;
    }
    sigmoid(x.arm1 * logit(inst.mu1) + x.arm2 * logit(inst.mu2))
}

/// The allocation maximising `g(., mu)`, by bisection on [`g_slope`].
pub fn x_star(inst: &BanditInstance, tol: f64) -> Result<Allocation> {
    inst.require_best_arm()?;
    if !(tol > 0.0) {
        return Err(Error::argument(format!("tolerance {tol} must be positive")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let slope = g_slope(Allocation::new(mid)?, inst);
        if slope > 0.0 {
            lo = mid;
        } else if slope < 0.0 {
            hi = mid;
        } else {
            return Allocation::new(mid);
        }
    }
    Allocation::new(0.5 * (lo + hi))
}

/// First-order optimality residual of [`lambda_star`]:
/// `(1 - x) d'(lambda, mu1) + x d'(lambda, mu2)` with `d'` the derivative of
/// the KL divergence in its first argument.
pub fn stationarity_residual(x: Allocation, inst: &BanditInstance) -> Result<f64> {
    if !x.is_interior() {
        return Err(Error::argument(
            "stationarity is only defined for interior allocations",
        ));
    }
    let lambda = lambda_star(x, inst);
    let l = logit(lambda);
    Ok(x.arm1 * (l - logit(inst.mu1)) + x.arm2 * (l - logit(inst.mu2)))
}

/// Slack in `d(p, q) >= p log(1/q) - log 2`; never negative.
pub fn pinsker_like_bound_slack(p: f64, q: f64) -> Result<f64> {
    let d = kl_bernoulli(p, q)?;
    Ok(d - (-p * q.ln() - LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub g_value: f64,
    pub lambda_min: f64,
    /// Present when the instance has a unique best arm.
    pub x_star: Option<f64>,
}

pub fn rate_profile(x: Allocation, inst: &BanditInstance) -> RateProfile {
    RateProfile {
        g_value: g_closed(x, inst),
        lambda_min: lambda_star(x, inst),
        x_star: x_star(inst, DEFAULT_TOL).ok().map(|a| a.value()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inst(a: f64, b: f64) -> BanditInstance {
        BanditInstance::new(a, b).unwrap()
    }

    fn alloc(x: f64) -> Allocation {
        Allocation::new(x).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        // mpmath, 40 digits
        assert_abs_diff_eq!(
            kl_bernoulli(0.5, 0.25).unwrap(),
            0.143_841_036_225_890_46,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kl_bernoulli(0.0, 0.3).unwrap(),
            0.356_674_943_938_732_36,
            epsilon = 1e-15
        );
        // boundary convention agrees with the limit from the interior
        let near = kl_bernoulli(1e-12, 0.3).unwrap();
        assert_abs_diff_eq!(near, kl_bernoulli(0.0, 0.3).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(kl_bernoulli(1.0, 0.2).unwrap(), (1.0_f64 / 0.2).ln(), epsilon = 1e-15);
    }

    #[test]
    fn kl_rejects_bad_inputs() {
        assert!(matches!(kl_bernoulli(0.3, 0.0), Err(Error::Domain(_))));
        assert!(matches!(kl_bernoulli(0.3, 1.0), Err(Error::Domain(_))));
        assert!(matches!(kl_bernoulli(f64::NAN, 0.5), Err(Error::Domain(_))));
        assert!(matches!(kl_bernoulli(0.5, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(kl_bernoulli(1.5, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn instance_validation() {
        assert!(BanditInstance::new(0.0, 0.5).is_err());
        assert!(BanditInstance::new(0.5, 1.0).is_err());
        assert!(BanditInstance::new(f64::NAN, 0.5).is_err());
        let i = inst(0.3, 0.3);
        assert!(!i.in_parameter_set());
        assert_eq!(i.best_arm(), None);
        assert_eq!(inst(0.2, 0.6).best_arm(), Some(Arm::Two));
        assert!(Allocation::new(-0.1).is_err());
        assert!(Allocation::new(1.1).is_err());
    }

    #[test]
    fn g_closed_examples() {
        assert_eq!(g_closed(alloc(0.0), &inst(0.3, 0.8)), 0.0);
        assert_eq!(g_closed(alloc(1.0), &inst(0.3, 0.8)), 0.0);
        assert_abs_diff_eq!(
            g_closed(alloc(0.5), &inst(0.7, 0.3)),
            0.087_176_693_572_388_86,
            epsilon = 1e-15
        );
        let c = BanditInstance::complementary(0.8).unwrap();
        for x in [0.1, 0.25, 0.4, 0.7] {
            let a = alloc(x);
            assert_abs_diff_eq!(g_closed(a, &c), g_closed(a.complement(), &c), epsilon = 1e-15);
        }
    }

    #[test]
    fn minimization_examples() {
        let m = g_by_minimization(alloc(0.0), &inst(0.6, 0.2), DEFAULT_TOL).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.argmin, 0.6);

        let i = inst(0.7, 0.3);
        let m = g_by_minimization(alloc(0.5), &i, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(m.value, g_closed(alloc(0.5), &i), epsilon = DEFAULT_TOL);

        let i = inst(0.8, 0.4);
        let m = g_by_minimization(alloc(0.75), &i, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(m.argmin, lambda_star(alloc(0.75), &i), epsilon = 1e-8);

        assert!(g_by_minimization(alloc(0.5), &i, 0.0).is_err());
        assert!(g_by_minimization(alloc(0.5), &i, -1.0).is_err());
    }

    #[test]
    fn lambda_examples() {
        let i = inst(0.8, 0.4);
        assert_eq!(lambda_star(alloc(0.0), &i), 0.8);
        assert_abs_diff_eq!(
            lambda_star(alloc(0.75), &i),
            0.510_617_093_651_577_36,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            lambda_star(alloc(0.5), &BanditInstance::complementary(0.9).unwrap()),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn x_star_examples() {
        for p in [0.6, 0.7, 0.95, 0.51] {
            let x = x_star(&BanditInstance::complementary(p).unwrap(), DEFAULT_TOL).unwrap();
            assert_abs_diff_eq!(x.value(), 0.5, epsilon = 1e-10);
        }
        let x = x_star(&inst(0.9, 0.5), DEFAULT_TOL).unwrap().value();
        assert!(x > 0.50 && x < 0.60);
        // root of the derivative found with mpmath
        assert_abs_diff_eq!(x, 0.541_568_842_153_902_1, epsilon = 1e-9);
        let y = x_star(&inst(0.5, 0.9), DEFAULT_TOL).unwrap().value();
        assert_abs_diff_eq!(y, 1.0 - x, epsilon = 2e-10);
        // means 1e-6 apart: the slope is O(1e-17) near the root (mpmath)
        let z = x_star(&inst(0.600_001, 0.6), DEFAULT_TOL).unwrap().value();
        assert_abs_diff_eq!(z, 0.500_000_034_722_410_3, epsilon = 1e-9);

        assert!(matches!(
            x_star(&inst(0.7, 0.7), DEFAULT_TOL),
            Err(Error::NotInParameterSet { .. })
        ));
        assert!(x_star(&inst(0.7, 0.2), 0.0).is_err());
    }

    #[test]
    fn stationarity_examples() {
        let r = stationarity_residual(alloc(0.5), &inst(0.7, 0.3)).unwrap();
        assert!(r.abs() <= 1e-8);
        let r = stationarity_residual(alloc(0.9), &inst(0.6, 0.1)).unwrap();
        assert!(r.abs() <= 1e-8);
        assert!(stationarity_residual(alloc(0.0), &inst(0.6, 0.1)).is_err());
        assert!(stationarity_residual(alloc(1.0), &inst(0.6, 0.1)).is_err());
    }

    #[test]
    fn stationarity_matches_finite_difference() {
        let i = inst(0.7, 0.3);
        let x = alloc(0.5);
        let lam = lambda_star(x, &i);
        let h = 1e-6;
        let fd = (inner_objective(lam + h, x, &i) - inner_objective(lam - h, x, &i)) / (2.0 * h);
        assert!(fd.abs() < 1e-8);
    }

    #[test]
    fn pinsker_examples() {
        assert_abs_diff_eq!(
            pinsker_like_bound_slack(0.5, 0.5).unwrap(),
            0.5 * LN_2,
            epsilon = 1e-15
        );
        for q in [0.01, 0.3, 0.77, 0.999] {
            assert_abs_diff_eq!(pinsker_like_bound_slack(1.0, q).unwrap(), LN_2, epsilon = 1e-14);
        }
        let s = pinsker_like_bound_slack(0.0, 0.3).unwrap();
        assert_abs_diff_eq!(s, kl_bernoulli(0.0, 0.3).unwrap() + LN_2, epsilon = 1e-15);
        assert!(pinsker_like_bound_slack(0.5, 1.0).is_err());
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let grid = [0.05, 0.2, 0.33, 0.5, 0.61, 0.9];
        for &a in &grid {
            for &b in &grid {
                let i = inst(a, b);
                for k in 0..=20 {
                    let x = alloc(k as f64 / 20.0);
                    assert_eq!(g_closed(x, &i), g_closed(x.complement(), &i.swapped()));
                    assert_eq!(lambda_star(x, &i), lambda_star(x.complement(), &i.swapped()));
                }
            }
        }
    }

    #[test]
    fn profile_carries_x_star_only_in_parameter_set() {
        assert!(rate_profile(Allocation::UNIFORM, &inst(0.4, 0.4)).x_star.is_none());
        let p = rate_profile(Allocation::UNIFORM, &inst(0.7, 0.3));
        assert!(p.x_star.is_some());
        assert!(p.lambda_min > 0.3 && p.lambda_min < 0.7);
    }
}
