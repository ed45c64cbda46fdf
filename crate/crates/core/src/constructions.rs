//! Certified instance builders.
//!
//! Given a target mean `a` and an allocation `x != 1/2`, the builders return
//! an instance `mu` with `lambda(x, mu) = a` on which the static rule `x` has a
//! strictly smaller rate than uniform sampling. The construction works in
//! natural coordinates: for `x > 1/2` and `alpha = logit(a)`,
//!
//! - `alpha < 0`: the point `(-alpha, alpha) / (2x - 1)` on the anti-diagonal;
//! - `alpha >= 0`: a point on the line `(1 - x) xi1 + x xi2 = alpha` inside a
//!   half-disk around `(alpha, alpha)` small enough that `phi''` is nearly
//!   constant there.
//!
//! `x < 1/2` is handled by exchanging the arm labels. Every certificate is
//! re-checked against the primal formulas in [`crate::rates`] before it is
//! returned.

use serde::{Deserialize, Serialize};

use crate::dual::{natural_to_mean, phi_second, phi_second_range};
use crate::rates::{
    exp_neg_g, g_closed, lambda_star, log_ratios, logit, x_star, Allocation, BanditInstance, DEFAULT_TOL,
};
use crate::{Error, Result};

/// Maximum tolerated `|lambda(x, mu) - a|` on a certificate.
pub const LAMBDA_TOL: f64 = 1e-9;

/// Natural parameters beyond this magnitude put a mean within `~1.5e-8` of 0
/// or 1, where the stored double no longer pins `lambda(x, mu)` to
/// [`LAMBDA_TOL`].
pub const MAX_NATURAL: f64 = 18.0;

/// Relative bisection resolution for [`find_halfdisk_delta`].
pub const HALFDISK_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionCase {
    NegativeAlpha,
    HalfDisk,
    Mirrored,
}

/// A constructed instance with the quantities that certify it.
///
/// `instance` and `x_input` are in the caller's orientation. For a
/// [`ConstructionCase::Mirrored`] certificate the arms were exchanged after
/// building for `1 - x`; `x_star_value` and `x_tilde` then refer to that
/// canonical (unmirrored) orientation, see [`ConstructionCertificate::canonical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionCertificate {
    pub instance: BanditInstance,
    pub a_target: f64,
    pub x_input: Allocation,
    pub case_used: ConstructionCase,
    pub residual_lambda: f64,
    pub x_star_value: f64,
    pub x_tilde: f64,
    /// Half-disk radius, for half-disk constructions.
    pub delta: Option<f64>,
    /// Offset along the constraint line, for half-disk constructions.
    pub offset: Option<f64>,
}

impl ConstructionCertificate {
    /// Instance and allocation with `x > 1/2` and arm 1 the best arm.
    pub fn canonical(&self) -> (BanditInstance, Allocation) {
        match self.case_used {
            ConstructionCase::Mirrored => (self.instance.swapped(), self.x_input.complement()),
            _ => (self.instance, self.x_input),
        }
    }
}

/// Outcome of re-verifying a certificate using only the primal formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub upper_region: bool,
    pub residual_lambda: f64,
    pub x_star: f64,
    pub x_tilde: f64,
    pub g_at_x: f64,
    pub g_uniform: f64,
}

impl CertificateCheck {
    pub fn lambda_ok(&self) -> bool {
        self.residual_lambda <= LAMBDA_TOL
    }

    pub fn x_star_ok(&self) -> bool {
        self.x_star < self.x_tilde
    }

    pub fn beats_uniform(&self) -> bool {
        self.g_at_x < self.g_uniform
    }

    pub fn passed(&self) -> bool {
        self.upper_region && self.lambda_ok() && self.x_star_ok() && self.beats_uniform()
    }
}

/// Recomputes every certificate condition from the instance alone.
pub fn verify_certificate(cert: &ConstructionCertificate) -> Result<CertificateCheck> {
    let (canon, x_canon) = cert.canonical();
    let x_tilde = 0.5 * (0.5 + x_canon.value());
    let x_star = x_star(&canon, DEFAULT_TOL)?.value();
    Ok(CertificateCheck {
        upper_region: canon.mu1() > canon.mu2() && canon.mu1() + canon.mu2() >= 1.0,
        residual_lambda: (lambda_star(cert.x_input, &cert.instance) - cert.a_target).abs(),
        x_star,
        x_tilde,
        g_at_x: g_closed(cert.x_input, &cert.instance),
        g_uniform: g_closed(Allocation::UNIFORM, &cert.instance),
    })
}

fn halfdisk_condition(alpha: f64, x_tilde: f64, delta: f64) -> bool {
    let center = phi_second(alpha);
    let lower = center / (4.0 * x_tilde * x_tilde);
    let upper = center / (4.0 * (1.0 - x_tilde) * (1.0 - x_tilde));
    let (min, max) = phi_second_range(alpha - delta, alpha + delta);
    min > lower && max < upper
}

/// Radius `delta` of a box around `(alpha, alpha)` on which
/// `min phi'' * x_tilde^2 > max phi'' * (1 - x_tilde)^2` over `[xi2, xi1]`.
///
/// Uses the sufficient condition that `phi''` stays within
/// `(phi''(alpha) / (4 x_tilde^2), phi''(alpha) / (4 (1 - x_tilde)^2))` on
/// `|r - alpha| <= delta`, which is monotone in `delta`, and bisects for the
/// largest such radius at relative resolution [`HALFDISK_RESOLUTION`].
pub fn find_halfdisk_delta(alpha: f64, x_tilde: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::argument(format!("alpha = {alpha} must be finite")));
    }
    if !(x_tilde > 0.5 && x_tilde < 1.0) {
        return Err(Error::argument(format!(
            "x_tilde = {x_tilde} must lie in (1/2, 1)"
        )));
    }
    let mut good = 0.0_f64;
    let mut bad = 1.0_f64;
    while halfdisk_condition(alpha, x_tilde, bad) {
        good = bad;
        bad *= 2.0;
        if bad > 1e6 {
            return Ok(good);
        }
    }
    for _ in 0..4000 {
        if good > 0.0 && bad - good <= HALFDISK_RESOLUTION * bad.min(1.0) {
            break;
        }
        let mid = if good == 0.0 { 0.5 * bad } else { 0.5 * (good + bad) };
        if halfdisk_condition(alpha, x_tilde, mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    if good > 0.0 {
        Ok(good)
    } else {
        Err(Error::argument(format!(
            "no half-disk radius resolvable for x_tilde = {x_tilde}"
        )))
    }
}

fn certificate_from_naturals(
    a: f64,
    x: Allocation,
    xi1: f64,
    xi2: f64,
    case_used: ConstructionCase,
    halfdisk: Option<(f64, f64)>,
) -> Result<ConstructionCertificate> {
    if xi1.abs() > MAX_NATURAL || xi2.abs() > MAX_NATURAL {
        return Err(Error::domain(format!(
            "construction for a = {a}, x = {} needs natural parameters ({xi1}, {xi2}); \
             beyond |xi| = {MAX_NATURAL} doubles cannot certify lambda to {LAMBDA_TOL}",
            x.value()
        )));
    }
    let mu1 = natural_to_mean(xi1);
    let mu2 = if case_used == ConstructionCase::NegativeAlpha {
        // sigmoid(-xi) = 1 - sigmoid(xi); the subtraction is exact for mu1 >= 1/2
        1.0 - mu1
    } else {
        natural_to_mean(xi2)
    };
    let instance = BanditInstance::new(mu1, mu2)?;
    let x_tilde = 0.5 * (0.5 + x.value());
    let cert = ConstructionCertificate {
        instance,
        a_target: a,
        x_input: x,
        case_used,
        residual_lambda: (lambda_star(x, &instance) - a).abs(),
        x_star_value: x_star(&instance, DEFAULT_TOL)?.value(),
        x_tilde,
        delta: halfdisk.map(|h| h.0),
        offset: halfdisk.map(|h| h.1),
    };

    if !(instance.mu1() > instance.mu2() && instance.mu1() + instance.mu2() >= 1.0) {
        return Err(Error::Construction(format!(
            "instance {instance} is not in the region mu1 > mu2, mu1 + mu2 >= 1"
        )));
    }
    if cert.residual_lambda > LAMBDA_TOL {
        return Err(Error::Construction(format!(
            "lambda residual {} exceeds {LAMBDA_TOL}",
            cert.residual_lambda
        )));
    }
    if !(cert.x_star_value < x_tilde) {
        return Err(Error::Construction(format!(
            "x* = {} is not below x_tilde = {x_tilde}",
            cert.x_star_value
        )));
    }
    Ok(cert)
}

/// Instance with `mu1 > mu2`, `mu1 + mu2 >= 1`, `lambda(x, mu) = a` and
/// `x*(mu) < (1/2 + x) / 2`, for `x` in `(1/2, 1]`.
pub fn construct_dual_instance(a: f64, x: Allocation) -> Result<ConstructionCertificate> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("target mean a = {a} is not in (0, 1)")));
    }
    if !(x.value() > 0.5) {
        return Err(Error::argument(format!(
            "x = {} must exceed 1/2; use construct_beating_instance to mirror",
            x.value()
        )));
    }
    let alpha = logit(a);
    let spread = 2.0 * x.value() - 1.0;
    if alpha < 0.0 {
        let k = -alpha / spread;
        certificate_from_naturals(a, x, k, -k, ConstructionCase::NegativeAlpha, None)
    } else {
        let x_tilde = 0.5 * (0.5 + x.value());
        let delta = find_halfdisk_delta(alpha, x_tilde)?;
        let s = delta / (2.0 * x.value());
        let xi1 = alpha + x.value() * s;
        let xi2 = alpha - x.share(crate::Arm::One) * s;
        certificate_from_naturals(a, x, xi1, xi2, ConstructionCase::HalfDisk, Some((delta, s)))
    }
}

/// Instance on which the static rule `x` is strictly worse than uniform
/// sampling while `lambda(x, mu) = a`.
pub fn construct_beating_instance(a: f64, x: Allocation) -> Result<ConstructionCertificate> {
    if x.value() == 0.5 {
        return Err(Error::argument(
            "no instance beats the uniform allocation at x = 1/2",
        ));
    }
    let cert = if x.value() > 0.5 {
        construct_dual_instance(a, x)?
    } else {
        let canon = construct_dual_instance(a, x.complement())?;
        let instance = canon.instance.swapped();
        ConstructionCertificate {
            instance,
            x_input: x,
            case_used: ConstructionCase::Mirrored,
            residual_lambda: (lambda_star(x, &instance) - a).abs(),
            ..canon
        }
    };
    if cert.residual_lambda > LAMBDA_TOL {
        return Err(Error::Construction(format!(
            "lambda residual {} exceeds {LAMBDA_TOL} after mirroring",
            cert.residual_lambda
        )));
    }
    let g_x = g_closed(x, &cert.instance);
    let g_half = g_closed(Allocation::UNIFORM, &cert.instance);
    if !(g_x < g_half) {
        return Err(Error::Construction(format!(
            "g(x) = {g_x} is not below g(1/2) = {g_half}"
        )));
    }
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetryReport {
    /// `g(x* - delta) - g(x* + delta)`.
    pub gap: f64,
    /// The common value of the two stationarity ratios at `x*`.
    pub m: f64,
    /// The second stationarity ratio; equals `m` up to the accuracy of `x*`.
    pub m_alt: f64,
    /// `exp(-g(x* + delta)) - exp(-g(x* - delta))`, evaluated directly.
    pub f_value: f64,
    /// The same difference through its closed form in `m`.
    pub f_value_closed: f64,
    pub f_prime: f64,
    pub x_star: f64,
}

/// Compares `g` at equal distances on either side of `x*` for an instance
/// with `mu1 > mu2` and `mu1 + mu2 >= 1`.
pub fn asymmetry_gap(inst: &BanditInstance, delta: f64) -> Result<AsymmetryReport> {
    let (m1, m2) = (inst.mu1(), inst.mu2());
    if !(m1 > m2 && m1 + m2 >= 1.0) {
        return Err(Error::argument(format!(
            "asymmetry needs mu1 > mu2 and mu1 + mu2 >= 1, got {inst}"
        )));
    }
    let xs = x_star(inst, DEFAULT_TOL)?.value();
    if !(delta > 0.0 && delta <= xs.min(1.0 - xs)) {
        return Err(Error::argument(format!(
            "delta = {delta} must lie in (0, min(x*, 1 - x*)] with x* = {xs}"
        )));
    }
    let left = Allocation::new((xs - delta).clamp(0.0, 1.0))?;
    let right = Allocation::new((xs + delta).clamp(0.0, 1.0))?;
    let gap = g_closed(left, inst) - g_closed(right, inst);

    let (l1, l2) = (m1.ln(), m2.ln());
    let (c1, c2) = ((-m1).ln_1p(), (-m2).ln_1p());
    let (log_r, log_succ) = log_ratios(inst);
    let log_p = -log_succ; // log(mu1 / mu2)
    let a_star = ((1.0 - xs) * c1 + xs * c2).exp();
    let b_star = ((1.0 - xs) * l1 + xs * l2).exp();
    let m = a_star / log_p;
    let m_alt = b_star / log_r;

    let (rp, rm) = ((delta * log_r).exp(), (-delta * log_r).exp());
    let (pp, pm) = ((delta * log_p).exp(), (-delta * log_p).exp());
    let f_value = exp_neg_g(right, inst) - exp_neg_g(left, inst);
    let f_value_closed = m * log_p * (rp - rm) - m * log_r * (pp - pm);
    let f_prime = m * log_p * log_r * (rp + rm - pp - pm);
    Ok(AsymmetryReport {
        gap,
        m,
        m_alt,
        f_value,
        f_value_closed,
        f_prime,
        x_star: xs,
    })
}

/// `(1 - mu2) / (1 - mu1) >= mu1 / mu2`.
///
/// Evaluated through the equivalent `(mu1 - mu2)(mu1 + mu2 - 1) >= 0`. Both
/// factors are computed exactly once `mu1 + mu2` is rounded, so the sign is
/// right on the boundary `mu1 + mu2 = 1` where the ratios are equal and the
/// quotient form can round either way.
pub fn check_odds_inequality(inst: &BanditInstance) -> bool {
    let (m1, m2) = (inst.mu1(), inst.mu2());
    (m1 - m2) * ((m1 + m2) - 1.0) >= 0.0
}

/// `(1 - mu2) / (1 - mu1) - mu1 / mu2`, evaluated as written.
pub fn odds_margin(inst: &BanditInstance) -> f64 {
    let (m1, m2) = (inst.mu1(), inst.mu2());
    (1.0 - m2) / (1.0 - m1) - m1 / m2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::sigmoid;
    use approx::assert_abs_diff_eq;

    fn alloc(x: f64) -> Allocation {
        Allocation::new(x).unwrap()
    }

    #[test]
    fn negative_alpha_example() {
        let a = sigmoid(-1.0);
        let cert = construct_dual_instance(a, alloc(0.75)).unwrap();
        assert_eq!(cert.case_used, ConstructionCase::NegativeAlpha);
        assert_abs_diff_eq!(cert.instance.mu1(), 0.880_797_077_977_882_4, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.instance.mu2(), 0.119_202_922_022_117_56, epsilon = 1e-15);
        assert!(cert.residual_lambda <= 1e-12);
        assert_abs_diff_eq!(cert.x_star_value, 0.5, epsilon = 1e-9);
        assert_eq!(cert.x_tilde, 0.625);
        assert!(cert.delta.is_none());
        assert!(verify_certificate(&cert).unwrap().passed());
    }

    #[test]
    fn half_disk_example() {
        let cert = construct_dual_instance(0.5, alloc(0.75)).unwrap();
        assert_eq!(cert.case_used, ConstructionCase::HalfDisk);
        assert!(cert.residual_lambda <= LAMBDA_TOL);
        let check = verify_certificate(&cert).unwrap();
        assert!(check.passed(), "{check:?}");
        let (delta, s) = (cert.delta.unwrap(), cert.offset.unwrap());
        assert_abs_diff_eq!(s, delta / 1.5, epsilon = 1e-15);
    }

    #[test]
    fn dual_instance_rejects_bad_arguments() {
        assert!(matches!(
            construct_dual_instance(0.3, alloc(0.5)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            construct_dual_instance(0.3, alloc(0.2)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            construct_dual_instance(0.0, alloc(0.8)),
            Err(Error::Domain(_))
        ));
        // |alpha| / (2x - 1) far beyond the representable range
        assert!(matches!(
            construct_dual_instance(0.01, alloc(0.5001)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn x_equal_one_is_admitted() {
        for a in [0.2, 0.5, 0.8] {
            let cert = construct_dual_instance(a, alloc(1.0)).unwrap();
            assert_eq!(cert.x_tilde, 0.75);
            assert!(verify_certificate(&cert).unwrap().passed());
        }
    }

    #[test]
    fn beating_examples() {
        let cert = construct_beating_instance(0.3, alloc(0.8)).unwrap();
        let i = cert.instance;
        assert!(g_closed(alloc(0.8), &i) < g_closed(Allocation::UNIFORM, &i));

        let cert = construct_beating_instance(0.3, alloc(0.2)).unwrap();
        assert_eq!(cert.case_used, ConstructionCase::Mirrored);
        assert!((lambda_star(alloc(0.2), &cert.instance) - 0.3).abs() <= 1e-9);
        assert!(cert.instance.mu2() > cert.instance.mu1());
        assert!(verify_certificate(&cert).unwrap().passed());

        assert!(matches!(
            construct_beating_instance(0.3, Allocation::UNIFORM),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn halfdisk_delta_probe() {
        let (alpha, x_tilde) = (0.0, 0.625);
        let delta = find_halfdisk_delta(alpha, x_tilde).unwrap();
        assert!(delta > 0.0);
        // Grid every pair inside the half-disk; min/max of phi'' by dense sampling.
        let n = 32;
        let mut probes = 0;
        for i in 0..n {
            for j in 0..n {
                let xi1 = alpha - delta + 2.0 * delta * (i as f64 + 0.5) / n as f64;
                let xi2 = alpha - delta + 2.0 * delta * (j as f64 + 0.5) / n as f64;
                if xi1 <= xi2 {
                    continue;
                }
                probes += 1;
                let (mut mn, mut mx) = (f64::INFINITY, 0.0_f64);
                for k in 0..=200 {
                    let r = xi2 + (xi1 - xi2) * k as f64 / 200.0;
                    mn = mn.min(phi_second(r));
                    mx = mx.max(phi_second(r));
                }
                assert!(mn * x_tilde * x_tilde > mx * (1.0 - x_tilde) * (1.0 - x_tilde));
            }
        }
        assert!(probes >= 400);
    }

    #[test]
    fn halfdisk_delta_shrinks_towards_uniform() {
        for alpha in [0.0, 0.7, 2.5] {
            let mut prev = f64::INFINITY;
            for x_tilde in [0.74, 0.7, 0.65, 0.6, 0.55, 0.52, 0.505, 0.501] {
                let d = find_halfdisk_delta(alpha, x_tilde).unwrap();
                assert!(d <= prev * (1.0 + 2e-6), "alpha {alpha} x_tilde {x_tilde}");
                prev = d;
            }
        }
        assert!(find_halfdisk_delta(0.0, 0.5).is_err());
        assert!(find_halfdisk_delta(0.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_pair_satisfies_halfdisk_inequality() {
        let xt: f64 = 0.6;
        let f = phi_second(1.3);
        assert!(f * xt * xt > f * (1.0 - xt) * (1.0 - xt));
    }

    #[test]
    fn asymmetry_examples() {
        let c = BanditInstance::complementary(0.8).unwrap();
        for delta in [0.05, 0.2, 0.49] {
            let r = asymmetry_gap(&c, delta).unwrap();
            assert!(r.gap.abs() <= 1e-9, "{r:?}");
        }
        let r = asymmetry_gap(&BanditInstance::new(0.9, 0.5).unwrap(), 1e-9).unwrap();
        assert!(r.gap.abs() < 1e-12);

        let r = asymmetry_gap(&BanditInstance::new(0.9, 0.5).unwrap(), 0.1).unwrap();
        assert!(r.gap >= 0.0);
        assert!(r.f_value >= 0.0 && r.f_prime >= 0.0);
        assert_abs_diff_eq!(r.m, r.m_alt, epsilon = 1e-9);
        assert_abs_diff_eq!(r.f_value, r.f_value_closed, epsilon = 1e-9);

        let i = BanditInstance::new(0.9, 0.5).unwrap();
        assert!(asymmetry_gap(&i, 0.0).is_err());
        assert!(asymmetry_gap(&i, 0.5).is_err());
        assert!(asymmetry_gap(&BanditInstance::new(0.4, 0.2).unwrap(), 0.1).is_err());
        assert!(asymmetry_gap(&BanditInstance::new(0.5, 0.9).unwrap(), 0.1).is_err());
    }

    #[test]
    fn odds_examples() {
        // 0.3 is not the double nearest to 1 - 0.7; build the exact complement
        assert!(check_odds_inequality(&BanditInstance::complementary(0.7).unwrap()));
        let c = BanditInstance::complementary(0.7).unwrap();
        assert_eq!((1.0 - c.mu2()) / (1.0 - c.mu1()), c.mu1() / c.mu2());
        assert!(check_odds_inequality(&BanditInstance::new(0.9, 0.5).unwrap()));
        assert!(!check_odds_inequality(&BanditInstance::new(0.4, 0.2).unwrap()));
        // on the boundary the quotient form rounds the wrong way here
        let edge = BanditInstance::new(105.0 / 201.0, 96.0 / 201.0).unwrap();
        assert!(odds_margin(&edge) < 0.0 && odds_margin(&edge) > -1e-14);
        assert!(check_odds_inequality(&edge));
    }

    #[test]
    fn certificate_json_field_names() {
        let cert = construct_beating_instance(0.3, alloc(0.2)).unwrap();
        let v = serde_json::to_value(&cert).unwrap();
        for key in [
            "instance",
            "a_target",
            "x_input",
            "case_used",
            "residual_lambda",
            "x_star_value",
            "x_tilde",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["case_used"], "mirrored");
        let back: ConstructionCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, cert);
    }
}
