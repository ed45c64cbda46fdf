//! Sampling rules over sufficient statistics and the recommendation rule.
//!
//! Every rule sees only the state `(t, n1, s1, s2)`: rounds so far, pulls of
//! arm 1, and successes on each arm. A rule returns the probability of
//! pulling arm 1 next; deterministic rules return 0 or 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rates::{g_slope, x_star, Allocation, Arm, BanditInstance, DEFAULT_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyState {
    /// Rounds played so far (0-based index of the next round).
    pub t: u32,
    pub n1: u32,
    pub s1: u32,
    pub s2: u32,
}

impl PolicyState {
    pub fn new(t: u32, n1: u32, s1: u32, s2: u32) -> Result<Self> {
        let st = PolicyState { t, n1, s1, s2 };
        if !st.is_valid() {
            return Err(Error::argument(format!("inconsistent state {st:?}")));
        }
        Ok(st)
    }

    pub fn initial() -> Self {
        PolicyState {
            t: 0,
            n1: 0,
            s1: 0,
            s2: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.n1 <= self.t && self.s1 <= self.n1 && self.s2 <= self.t - self.n1
    }

    pub fn n2(&self) -> u32 {
        self.t - self.n1
    }

    pub fn pulls(&self, arm: Arm) -> u32 {
        match arm {
            Arm::One => self.n1,
            Arm::Two => self.n2(),
        }
    }

    /// Proportion of rounds spent on arm 2; zero before the first round.
    pub fn omega2(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.n2() as f64 / self.t as f64
        }
    }

    /// State after pulling `arm` and observing `success`.
    pub fn advance(&self, arm: Arm, success: bool) -> Self {
        let mut next = *self;
        next.t += 1;
        match arm {
            Arm::One => {
                next.n1 += 1;
                next.s1 += success as u32;
            }
            Arm::Two => next.s2 += success as u32,
        }
        next
    }

    /// The state with arm labels exchanged.
    pub fn mirrored(&self) -> Self {
        PolicyState {
            t: self.t,
            n1: self.n2(),
            s1: self.s2,
            s2: self.s1,
        }
    }
}

/// Anything that maps a state to the probability of pulling arm 1.
pub trait SamplingRule {
    fn prob_arm1(&self, state: &PolicyState) -> f64;

    /// Short label used in reports and CSV output.
    fn label(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Alternate, starting with arm 1.
    Uniform,
    /// Deterministic largest-remainder schedule with arm-2 fraction `x`.
    Static { x: Allocation },
    /// The static schedule at `x*(reference)`; `x` is cached at construction.
    OracleStatic {
        reference: BanditInstance,
        x: Allocation,
    },
    /// Track `x*` of the clamped empirical means, forcing the under-sampled
    /// arm with probability `force_rate`.
    PluginTracking { force_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub description: String,
}

impl PolicySpec {
    pub fn uniform() -> Self {
        PolicySpec {
            kind: PolicyKind::Uniform,
            description: "uniform sampling, alternating from arm 1".into(),
        }
    }

    pub fn static_rule(x: Allocation) -> Self {
        PolicySpec {
            kind: PolicyKind::Static { x },
            description: format!("static schedule with arm-2 fraction {}", x.value()),
        }
    }

    pub fn oracle_static(reference: BanditInstance) -> Result<Self> {
        let x = x_star(&reference, DEFAULT_TOL)?;
        Ok(PolicySpec {
            kind: PolicyKind::OracleStatic { reference, x },
            description: format!(
                "static schedule tuned to {reference}, arm-2 fraction {}",
                x.value()
            ),
        })
    }

    pub fn plugin_tracking(force_rate: f64) -> Result<Self> {
        if !(force_rate > 0.0 && force_rate <= 1.0) {
            return Err(Error::argument(format!(
                "force rate {force_rate} must lie in (0, 1]"
            )));
        }
        Ok(PolicySpec {
            kind: PolicyKind::PluginTracking { force_rate },
            description: format!("plug-in tracking of x*, forcing rate {force_rate}"),
        })
    }

    /// The allocation of a reward-independent schedule, if this is one.
    pub fn static_allocation(&self) -> Option<Allocation> {
        match &self.kind {
            PolicyKind::Uniform => Some(Allocation::UNIFORM),
            PolicyKind::Static { x } | PolicyKind::OracleStatic { x, .. } => Some(*x),
            PolicyKind::PluginTracking { .. } => None,
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PolicyKind::Uniform => write!(f, "uniform"),
            PolicyKind::Static { x } => write!(f, "static:{}", x.value()),
            PolicyKind::OracleStatic { reference, .. } => {
                write!(f, "oracle:{},{}", reference.mu1(), reference.mu2())
            }
            PolicyKind::PluginTracking { force_rate } => write!(f, "plugin:{force_rate}"),
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number")))
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("uniform", None) => Ok(PolicySpec::uniform()),
            ("static", Some(a)) => Ok(PolicySpec::static_rule(Allocation::new(parse_f64(
                a,
                "static allocation",
            )?)?)),
            ("oracle", Some(a)) => {
                let (m1, m2) = a
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("oracle needs 'mu1,mu2', got '{a}'")))?;
                let reference =
                    BanditInstance::new(parse_f64(m1, "oracle mu1")?, parse_f64(m2, "oracle mu2")?)?;
                PolicySpec::oracle_static(reference)
            }
            ("plugin", Some(a)) => PolicySpec::plugin_tracking(parse_f64(a, "plugin force rate")?),
            _ => Err(Error::Parse(format!(
                "unknown policy '{s}'; expected uniform, static:X, oracle:M1,M2 or plugin:R"
            ))),
        }
    }
}

impl TryFrom<String> for PolicySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PolicySpec> for String {
    fn from(p: PolicySpec) -> String {
        p.to_string()
    }
}

/// Whether the largest-remainder schedule with arm-2 fraction `x` pulls arm 2
/// at round `t`: it does iff `floor((t + 1) x) > floor(t x)`.
pub fn static_pulls_arm2(x: Allocation, t: u32) -> bool {
    let x = x.value();
    ((t + 1) as f64 * x).floor() > (t as f64 * x).floor()
}

/// Pull counts `(n1, n2)` of the static schedule after `budget` rounds. The
/// increments telescope, so `n2 = floor(budget x)`.
pub fn static_counts(x: Allocation, budget: u32) -> (u32, u32) {
    let n2 = (budget as f64 * x.value()).floor() as u32;
    (budget - n2, n2)
}

/// Tracking step of the plug-in rule: pull arm 1 iff
/// `omega1 < 1 - x*(mu_hat)`, i.e. iff `x*(mu_hat) < omega2`. Since `g` is
/// strictly concave the comparison reduces to the sign of its slope at
/// `omega2`, which avoids a bisection per state.
fn tracking_prefers_arm1(state: &PolicyState) -> bool {
    let t = state.t as f64;
    let lo = 1.0 / (t + 1.0);
    let clamp = |s: u32, n: u32| {
        let m = if n == 0 { 0.5 } else { s as f64 / n as f64 };
        m.clamp(lo, 1.0 - lo)
    };
    let m1 = clamp(state.s1, state.n1);
    let m2 = clamp(state.s2, state.n2());
    let omega2 = state.omega2();
    if m1 == m2 {
        return omega2 > 0.5;
    }
    let estimate = BanditInstance::new(m1, m2).expect("clamped means are interior");
    let at = Allocation::new(omega2).expect("proportion lies in [0, 1]");
    g_slope(at, &estimate) < 0.0
}

fn plugin_prob_arm1(force_rate: f64, state: &PolicyState) -> f64 {
    match state.t {
        0 => return 1.0,
        1 => return if state.n1 == 0 { 1.0 } else { 0.0 },
        _ => {}
    }
    let forced = if state.n1 <= state.n2() { 1.0 } else { 0.0 };
    let tracked = if tracking_prefers_arm1(state) { 1.0 } else { 0.0 };
    force_rate * forced + (1.0 - force_rate) * tracked
}

/// Probability that `policy` pulls arm 1 in `state`.
pub fn action_distribution(policy: &PolicySpec, state: &PolicyState) -> f64 {
    match &policy.kind {
        PolicyKind::Uniform => {
            if state.t % 2 == 0 {
                1.0
            } else {
                0.0
            }
        }
        PolicyKind::Static { x } | PolicyKind::OracleStatic { x, .. } => {
            if static_pulls_arm2(*x, state.t) {
                0.0
            } else {
                1.0
            }
        }
        PolicyKind::PluginTracking { force_rate } => plugin_prob_arm1(*force_rate, state),
    }
}

impl SamplingRule for PolicySpec {
    fn prob_arm1(&self, state: &PolicyState) -> f64 {
        action_distribution(self, state)
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

/// A rule run with the arm labels exchanged.
#[derive(Debug, Clone, Copy)]
pub struct Mirrored<'a, R: ?Sized>(pub &'a R);

impl<R: SamplingRule + ?Sized> SamplingRule for Mirrored<'_, R> {
    fn prob_arm1(&self, state: &PolicyState) -> f64 {
        1.0 - self.0.prob_arm1(&state.mirrored())
    }

    fn label(&self) -> String {
        format!("mirror({})", self.0.label())
    }
}

/// Distribution of the recommended arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub arm1: f64,
    pub arm2: f64,
}

impl Decision {
    pub fn prob(&self, arm: Arm) -> f64 {
        match arm {
            Arm::One => self.arm1,
            Arm::Two => self.arm2,
        }
    }
}

/// Recommend the arm with the larger empirical mean, splitting ties evenly.
pub fn recommend(state: &PolicyState) -> Result<Decision> {
    let n2 = state.n2();
    if state.n1 == 0 {
        return Err(Error::Recommendation { arm: 1 });
    }
    if n2 == 0 {
        return Err(Error::Recommendation { arm: 2 });
    }
    // s1 / n1 against s2 / n2 without rounding
    let lhs = state.s1 as u64 * n2 as u64;
    let rhs = state.s2 as u64 * state.n1 as u64;
    Ok(match lhs.cmp(&rhs) {
        std::cmp::Ordering::Greater => Decision { arm1: 1.0, arm2: 0.0 },
        std::cmp::Ordering::Less => Decision { arm1: 0.0, arm2: 1.0 },
        std::cmp::Ordering::Equal => Decision { arm1: 0.5, arm2: 0.5 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schedule(policy: &PolicySpec, budget: u32) -> Vec<Arm> {
        let mut st = PolicyState::initial();
        let mut arms = Vec::new();
        for _ in 0..budget {
            let p = action_distribution(policy, &st);
            assert!(p == 0.0 || p == 1.0);
            let arm = if p == 1.0 { Arm::One } else { Arm::Two };
            arms.push(arm);
            st = st.advance(arm, false);
        }
        arms
    }

    #[test]
    fn uniform_alternates() {
        assert_eq!(
            schedule(&PolicySpec::uniform(), 4),
            vec![Arm::One, Arm::Two, Arm::One, Arm::Two]
        );
        let odd = schedule(&PolicySpec::uniform(), 7);
        assert_eq!(odd.iter().filter(|a| **a == Arm::One).count(), 4);
    }

    #[test]
    fn static_examples() {
        let half = schedule(&PolicySpec::static_rule(Allocation::UNIFORM), 4);
        assert_eq!(half.iter().filter(|a| **a == Arm::Two).count(), 2);

        let quarter = schedule(&PolicySpec::static_rule(Allocation::new(0.25).unwrap()), 8);
        let rounds: Vec<usize> = quarter
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Arm::Two)
            .map(|(t, _)| t)
            .collect();
        // floor((t + 1) / 4) increments at t = 3 and t = 7
        assert_eq!(rounds, vec![3, 7]);
    }

    #[test]
    fn uniform_is_static_half() {
        for budget in 1..40 {
            assert_eq!(
                schedule(&PolicySpec::uniform(), budget),
                schedule(&PolicySpec::static_rule(Allocation::UNIFORM), budget)
            );
        }
    }

    #[test]
    fn plugin_with_full_forcing_alternates() {
        let p = PolicySpec::plugin_tracking(1.0).unwrap();
        let mut st = PolicyState::initial();
        for t in 0..30u32 {
            let prob = action_distribution(&p, &st);
            let expect = if t % 2 == 0 { 1.0 } else { 0.0 };
            assert_eq!(prob, expect, "t = {t}");
            let arm = if prob == 1.0 { Arm::One } else { Arm::Two };
            st = st.advance(arm, t % 3 == 0);
        }
    }

    #[test]
    fn plugin_tracks_x_star() {
        let p = PolicySpec::plugin_tracking(1e-9).unwrap();
        // arm 1 looks like 0.9, arm 2 like 0.5; x*(0.9, 0.5) ~ 0.54
        let st = PolicyState::new(20, 10, 9, 5).unwrap();
        // omega2 = 0.5 < x*, so arm 2 is behind its target
        assert!(action_distribution(&p, &st) < 1e-6);
        let st = PolicyState::new(20, 8, 7, 6).unwrap();
        assert!(action_distribution(&p, &st) > 1.0 - 1e-6);
    }

    #[test]
    fn recommend_examples() {
        let d = recommend(&PolicyState::new(2, 1, 1, 0).unwrap()).unwrap();
        assert_eq!((d.arm1, d.arm2), (1.0, 0.0));
        let d = recommend(&PolicyState::new(4, 2, 1, 1).unwrap()).unwrap();
        assert_eq!((d.arm1, d.arm2), (0.5, 0.5));
        let d = recommend(&PolicyState::new(5, 3, 1, 1).unwrap()).unwrap();
        assert_eq!((d.arm1, d.arm2), (0.0, 1.0));
        assert!(matches!(
            recommend(&PolicyState::new(3, 0, 0, 2).unwrap()),
            Err(Error::Recommendation { arm: 1 })
        ));
        assert!(matches!(
            recommend(&PolicyState::new(3, 3, 2, 0).unwrap()),
            Err(Error::Recommendation { arm: 2 })
        ));
    }

    #[test]
    fn parse_round_trip() {
        for s in ["uniform", "static:0.3", "oracle:0.9,0.5", "plugin:0.1"] {
            let p: PolicySpec = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("static".parse::<PolicySpec>().is_err());
        assert!("static:1.5".parse::<PolicySpec>().is_err());
        assert!("oracle:0.5,0.5".parse::<PolicySpec>().is_err());
        assert!("plugin:0".parse::<PolicySpec>().is_err());
        assert!("greedy".parse::<PolicySpec>().is_err());
        assert!(matches!(
            "static:abc".parse::<PolicySpec>(),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(PolicyState::new(3, 4, 0, 0).is_err());
        assert!(PolicyState::new(3, 2, 3, 0).is_err());
        assert!(PolicyState::new(3, 2, 0, 2).is_err());
    }

    proptest! {
        #[test]
        fn static_counts_within_one(x in 0.0..=1.0f64, budget in 1u32..2000) {
            let a = Allocation::new(x).unwrap();
            let (_, n2) = static_counts(a, budget);
            prop_assert!((n2 as f64 - x * budget as f64).abs() < 1.0);
            let pulled = (0..budget).filter(|&t| static_pulls_arm2(a, t)).count() as u32;
            prop_assert_eq!(pulled, n2);
        }
    }
}
