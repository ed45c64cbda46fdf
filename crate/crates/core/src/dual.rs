//! Natural-parameter coordinates for Bernoulli arms.
//!
//! A mean `p` corresponds to the natural parameter `xi = log(p / (1 - p))`,
//! with log-partition potential `phi(xi) = log(1 + e^xi)`. In these
//! coordinates the KL divergence is the Bregman divergence of `phi`,
//! `d(mu1, mu2) = bregman(xi2, xi1)`, and the inner minimiser of the rate
//! function is the straight interpolation `(1 - x) xi1 + x xi2`.

use serde::{Deserialize, Serialize};

use crate::rates::{logit, sigmoid, Allocation, BanditInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalInstance {
    pub xi1: f64,
    pub xi2: f64,
}

impl NaturalInstance {
    pub fn new(xi1: f64, xi2: f64) -> Result<Self> {
        if !xi1.is_finite() || !xi2.is_finite() {
            return Err(Error::domain(format!(
                "natural parameters ({xi1}, {xi2}) must be finite"
            )));
        }
        Ok(NaturalInstance { xi1, xi2 })
    }

    pub fn from_means(inst: &BanditInstance) -> Self {
        NaturalInstance {
            xi1: logit(inst.mu1()),
            xi2: logit(inst.mu2()),
        }
    }

    /// Mean-coordinate instance. Fails when a coordinate is so large that its
    /// mean rounds to 0 or 1.
    pub fn to_means(&self) -> Result<BanditInstance> {
        BanditInstance::new(natural_to_mean(self.xi1), natural_to_mean(self.xi2))
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.xi1 != self.xi2
    }
}

pub fn mean_to_natural(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("mean {p} is not in (0, 1)")));
    }
    Ok(logit(p))
}

pub fn natural_to_mean(xi: f64) -> f64 {
    sigmoid(xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub phi: f64,
    pub phi_prime: f64,
    pub phi_second: f64,
}

pub fn phi(xi: f64) -> f64 {
    xi.max(0.0) + (-xi.abs()).exp().ln_1p()
}

pub fn phi_second(xi: f64) -> f64 {
    let e = (-xi.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `phi`, `phi'` and `phi''` at `xi`, without overflow for large `|xi|`.
pub fn potential(xi: f64) -> Potential {
    Potential {
        phi: phi(xi),
        phi_prime: sigmoid(xi),
        phi_second: phi_second(xi),
    }
}

/// `ln(1 + u) - u`.
fn log1p_minus(u: f64) -> f64 {
    if u.abs() >= 0.1 {
        return u.ln_1p() - u;
    }
    let (mut term, mut sum) = (u, 0.0);
    for k in 2..=20 {
        term *= -u;
        sum += term / k as f64;
    }
    sum
}

/// `e^h - 1 - h`.
fn expm1_minus(h: f64) -> f64 {
    if h.abs() >= 0.5 {
        return h.exp_m1() - h;
    }
    let (mut term, mut sum) = (h, 0.0);
    for k in 2..=24 {
        term *= h / k as f64;
        sum += term;
    }
    sum
}

/// Bregman divergence of `phi`: `phi(alpha) - phi(beta) - (alpha - beta) phi'(beta)`.
pub fn bregman(alpha: f64, beta: f64) -> f64 {
    if alpha == beta {
        return 0.0;
    }
    let h = alpha - beta;
    if h.abs() > 1.0 {
        return (phi(alpha) - phi(beta) - h * sigmoid(beta)).max(0.0);
    }
    // phi(alpha) - phi(beta) = ln(1 + s (e^h - 1)) with s = sigmoid(beta);
    // splitting off the linear terms avoids cancellation for small h
    let s = sigmoid(beta);
    (log1p_minus(s * h.exp_m1()) + s * expm1_minus(h)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualRateObjects {
    pub lambda_bar: f64,
    pub eta: f64,
    pub x_star_dual: f64,
}

/// The dual inner minimiser, the tangency point `eta` and the dual optimal
/// allocation `(xi1 - eta) / (xi1 - xi2)`.
pub fn dual_rate_objects(x: Allocation, nat: &NaturalInstance) -> Result<DualRateObjects> {
    if !nat.is_nondegenerate() {
        return Err(Error::DualDegenerate {
            xi1: nat.xi1,
            xi2: nat.xi2,
        });
    }
    let lambda_bar = x.share(crate::Arm::One) * nat.xi1 + x.value() * nat.xi2;
    // chord slope of phi, written as phi'(xi2) plus a Bregman correction so
    // that nearby coordinates do not cancel
    let h = nat.xi1 - nat.xi2;
    let slope = sigmoid(nat.xi2) + bregman(nat.xi1, nat.xi2) / h;
    let eta = logit(slope);
    let x_star_dual = (nat.xi1 - eta) / (nat.xi1 - nat.xi2);
    Ok(DualRateObjects {
        lambda_bar,
        eta,
        x_star_dual,
    })
}

/// Minimum and maximum of `phi''` over `[min(a, b), max(a, b)]`.
///
/// `phi''` increases on `(-inf, 0]` and decreases on `[0, inf)`, so the minimum
/// is at an endpoint and the maximum is `1/4` whenever the interval covers 0.
pub fn phi_second_range(a: f64, b: f64) -> (f64, f64) {
    let (lo_end, hi_end) = (a.min(b), a.max(b));
    let (fa, fb) = (phi_second(lo_end), phi_second(hi_end));
    let min = fa.min(fb);
    let max = if lo_end <= 0.0 && hi_end >= 0.0 {
        0.25
    } else {
        fa.max(fb)
    };
    (min, max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorBracket {
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TaylorBracket {
    pub fn holds(&self) -> bool {
        self.lo <= self.ratio && self.ratio <= self.hi
    }
}

/// `2 bregman(alpha, beta) / (alpha - beta)^2` together with the range of
/// `phi''` between the two points; the mean-value form of Taylor's theorem
/// puts the ratio inside that range.
pub fn taylor_bracket_check(alpha: f64, beta: f64) -> Result<TaylorBracket> {
    if alpha == beta {
        return Err(Error::argument("taylor bracket needs alpha != beta"));
    }
    let diff = alpha - beta;
    let ratio = 2.0 * bregman(alpha, beta) / (diff * diff);
    let (lo, hi) = phi_second_range(alpha, beta);
    Ok(TaylorBracket { ratio, lo, hi })
}

/// `mu1 > mu2` and `mu1 + mu2 >= 1`.
pub fn upper_region_primal(inst: &BanditInstance) -> bool {
    inst.mu1() > inst.mu2() && inst.mu1() + inst.mu2() >= 1.0
}

/// `xi1 > xi2` and `xi1 >= -xi2`; the same region in natural coordinates.
pub fn upper_region_dual(nat: &NaturalInstance) -> bool {
    nat.xi1 > nat.xi2 && nat.xi1 >= -nat.xi2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{kl_bernoulli, lambda_star, x_star, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn logit_examples() {
        assert_eq!(mean_to_natural(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(mean_to_natural(0.880_797_077_977_882_3).unwrap(), 2.0, epsilon = 1e-14);
        assert!(mean_to_natural(0.0).is_err());
        assert!(mean_to_natural(1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        let p = potential(0.0);
        assert_abs_diff_eq!(p.phi, std::f64::consts::LN_2, epsilon = 1e-16);
        assert_eq!(p.phi_prime, 0.5);
        assert_eq!(p.phi_second, 0.25);

        let p = potential(50.0);
        assert!(p.phi.is_finite());
        // log(1 + e^50) = 50 + log1p(e^-50)
        assert_abs_diff_eq!(p.phi, 50.0, epsilon = 1e-20);
        assert_abs_diff_eq!(p.phi_prime, 1.0, epsilon = 1e-20);

        let p = potential(700.0);
        assert!(p.phi.is_finite() && p.phi_second >= 0.0);
        let p = potential(-700.0);
        assert!(p.phi >= 0.0 && p.phi < 1e-300);
    }

    #[test]
    fn bregman_examples() {
        assert_eq!(bregman(1.3, 1.3), 0.0);
        // phi(2) - phi(-2) - 4 sigmoid(-2), mpmath
        assert_abs_diff_eq!(bregman(2.0, -2.0), 1.523_188_311_911_529_8, epsilon = 1e-14);
        // mpmath, 30 digits
        let b = bregman(0.3, 0.2);
        assert!((b - 1.232_975_355_687_488_3e-3).abs() <= 1e-17, "{b:e}");
        let b = bregman(1e-4, -1e-4);
        assert!((b - 4.999_999_995_833_333_3e-9).abs() <= 1e-22, "{b:e}");
    }

    #[test]
    fn dual_objects_examples() {
        let nat = NaturalInstance::new(1.5, -0.5).unwrap();
        let d = dual_rate_objects(Allocation::new(0.0).unwrap(), &nat).unwrap();
        assert_eq!(d.lambda_bar, 1.5);
        assert!(d.x_star_dual > 0.0 && d.x_star_dual < 1.0);
        assert!(matches!(
            dual_rate_objects(Allocation::UNIFORM, &NaturalInstance::new(1.0, 1.0).unwrap()),
            Err(Error::DualDegenerate { .. })
        ));
    }

    #[test]
    fn dual_objects_close_means() {
        let inst = BanditInstance::new(0.600_001, 0.6).unwrap();
        let nat = NaturalInstance::from_means(&inst);
        let d = dual_rate_objects(Allocation::UNIFORM, &nat).unwrap();
        let xs = x_star(&inst, DEFAULT_TOL).unwrap().value();
        assert!((d.x_star_dual - xs).abs() <= 1e-8, "{} vs {xs}", d.x_star_dual);
    }

    #[test]
    fn taylor_examples() {
        let t = taylor_bracket_check(1e-4, -1e-4).unwrap();
        assert_abs_diff_eq!(t.ratio, 0.25, epsilon = 1e-8);
        assert!(t.holds());

        let t = taylor_bracket_check(3.0, 1.0).unwrap();
        assert_eq!(t.lo, phi_second(3.0));
        assert_eq!(t.hi, phi_second(1.0));
        assert!(t.holds());
        // grid oracle for the range
        let n = 10_000;
        let (mut gmin, mut gmax) = (f64::INFINITY, 0.0_f64);
        for k in 0..=n {
            let v = phi_second(1.0 + 2.0 * k as f64 / n as f64);
            gmin = gmin.min(v);
            gmax = gmax.max(v);
        }
        assert_abs_diff_eq!(t.lo, gmin, epsilon = 1e-15);
        assert_abs_diff_eq!(t.hi, gmax, epsilon = 1e-15);

        let t = taylor_bracket_check(-5.0, 5.0).unwrap();
        assert_eq!(t.hi, 0.25);
        assert!(taylor_bracket_check(2.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn logit_round_trip(p in 1e-6..(1.0 - 1e-6)) {
            let back = natural_to_mean(mean_to_natural(p).unwrap());
            prop_assert!((back - p).abs() <= 1e-12);
        }

        #[test]
        fn phi_second_is_even(xi in -700.0..700.0f64) {
            prop_assert_eq!(phi_second(xi), phi_second(-xi));
            prop_assert!(phi_second(xi) <= 0.25);
        }

        #[test]
        fn kl_is_bregman(m1 in 0.001..0.999f64, m2 in 0.001..0.999f64) {
            let inst = BanditInstance::new(m1, m2).unwrap();
            let nat = NaturalInstance::from_means(&inst);
            let d = kl_bernoulli(m1, m2).unwrap();
            prop_assert!((d - bregman(nat.xi2, nat.xi1)).abs() <= 1e-10);
        }

        #[test]
        fn dual_matches_primal(m1 in 0.01..0.99f64, m2 in 0.01..0.99f64, x in 0.0..=1.0f64) {
            prop_assume!(m1 != m2);
            let inst = BanditInstance::new(m1, m2).unwrap();
            let nat = NaturalInstance::from_means(&inst);
            let a = Allocation::new(x).unwrap();
            let d = dual_rate_objects(a, &nat).unwrap();
            prop_assert!((natural_to_mean(d.lambda_bar) - lambda_star(a, &inst)).abs() <= 1e-10);
            let xs = x_star(&inst, DEFAULT_TOL).unwrap().value();
            prop_assert!((d.x_star_dual - xs).abs() <= 1e-8);
        }

        #[test]
        fn upper_region_equivalence(m1 in 0.001..0.999f64, m2 in 0.001..0.999f64) {
            let inst = BanditInstance::new(m1, m2).unwrap();
            prop_assume!((m1 + m2 - 1.0).abs() > 1e-12);
            let nat = NaturalInstance::from_means(&inst);
            prop_assert_eq!(upper_region_primal(&inst), upper_region_dual(&nat));
        }
    }
}
