//! Monte Carlo estimates of the misidentification probability.
//!
//! Replication `i` of a run seeded with `seed` draws from a `ChaCha8Rng`
//! seeded from `(seed, i)` through
//! [`replication_rng`]. Replications run in parallel and are
//! collected in index order before a pairwise reduction, so an estimate does
//! not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::policies::{recommend, static_counts, PolicyState, SamplingRule};
use crate::rates::{lambda_star, Allocation, Arm, BanditInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    Tilted,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Plain => "plain",
            Method::Tilted => "tilted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub method: Method,
}

/// SplitMix64 finaliser.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replication `i`: seeded with `splitmix64(splitmix64(seed) ^ i)`.
/// Mixing the seed before the XOR keeps nearby seeds from sharing streams.
pub fn replication_rng(seed: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ i))
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn check_common(inst: &BanditInstance, budget: u32, n: u64) -> Result<Arm> {
    if n == 0 {
        return Err(Error::argument("sample count n must be positive"));
    }
    if budget < 2 {
        return Err(Error::argument(format!("budget T = {budget} must be at least 2")));
    }
    inst.require_best_arm()
}

/// Runs one bandit episode and returns whether the recommendation is wrong.
fn episode<R: SamplingRule + ?Sized>(
    rule: &R,
    inst: &BanditInstance,
    budget: u32,
    best: Arm,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let mut st = PolicyState::initial();
    for _ in 0..budget {
        let q = rule.prob_arm1(&st);
        let arm = if q >= 1.0 {
            Arm::One
        } else if q <= 0.0 {
            Arm::Two
        } else if rng.random::<f64>() < q {
            Arm::One
        } else {
            Arm::Two
        };
        let success = rng.random::<f64>() < inst.mean(arm);
        st = st.advance(arm, success);
    }
    let d = recommend(&st)?;
    let wrong = d.prob(best.other());
    Ok(if wrong == 0.0 || wrong == 1.0 {
        wrong == 1.0
    } else {
        rng.random::<f64>() < wrong
    })
}

/// Plain simulation; recommendation ties are broken by a fair coin.
pub fn simulate_plain<R: SamplingRule + Sync + ?Sized>(
    rule: &R,
    inst: &BanditInstance,
    budget: u32,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    let best = check_common(inst, budget, n)?;
    let errors = (0..n)
        .into_par_iter()
        .map(|i| episode(rule, inst, budget, best, &mut replication_rng(seed, i)).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = errors as f64 / n as f64;
    Ok(Estimate {
        mean: p,
        std_err: (p * (1.0 - p) / n as f64).sqrt(),
        n_samples: n,
        seed,
        method: Method::Plain,
    })
}

struct Tilt {
    n1: u64,
    n2: u64,
    lambda: f64,
    best: Arm,
    // per-success and per-failure log likelihood ratios
    arm1: (f64, f64),
    arm2: (f64, f64),
}

impl Tilt {
    fn new(x: Allocation, inst: &BanditInstance, budget: u32, n: u64) -> Result<Self> {
        let best = check_common(inst, budget, n)?;
        let (n1, n2) = static_counts(x, budget);
        if n1 == 0 || n2 == 0 {
            return Err(Error::argument(format!(
                "static schedule x = {} with T = {budget} leaves an arm unsampled",
                x.value()
            )));
        }
        let lambda = lambda_star(x, inst);
        let llr = |mu: f64| ((mu / lambda).ln(), ((1.0 - mu) / (1.0 - lambda)).ln());
        Ok(Tilt {
            n1: n1 as u64,
            n2: n2 as u64,
            lambda,
            best,
            arm1: llr(inst.mu1()),
            arm2: llr(inst.mu2()),
        })
    }

    /// Likelihood ratio and error indicator (1/2 on ties) of one draw.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let b1 = Binomial::new(self.n1, self.lambda).expect("lambda is a probability");
        let b2 = Binomial::new(self.n2, self.lambda).expect("lambda is a probability");
        let s1 = b1.sample(rng);
        let s2 = b2.sample(rng);
        let log_w = s1 as f64 * self.arm1.0
            + (self.n1 - s1) as f64 * self.arm1.1
            + s2 as f64 * self.arm2.0
            + (self.n2 - s2) as f64 * self.arm2.1;
        let (lhs, rhs) = (s2 * self.n1, s1 * self.n2);
        let arm2_wins = match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
        let indicator = match self.best {
            Arm::One => arm2_wins,
            Arm::Two => 1.0 - arm2_wins,
        };
        (log_w.exp(), indicator)
    }
}

fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn tilted_values(
    x: Allocation,
    inst: &BanditInstance,
    budget: u32,
    n: u64,
    seed: u64,
    with_indicator: bool,
) -> Result<Vec<f64>> {
    let tilt = Tilt::new(x, inst, budget, n)?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let (w, ind) = tilt.draw(&mut replication_rng(seed, i));
            if with_indicator {
                w * ind
            } else {
                w
            }
        })
        .collect())
}

/// Importance sampling for a static schedule: both arms are drawn at the
/// inner minimiser `lambda_star(x, inst)` and reweighted by the exact
/// likelihood ratio.
pub fn simulate_tilted_static(
    x: Allocation,
    inst: &BanditInstance,
    budget: u32,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    let values = tilted_values(x, inst, budget, n, seed, true)?;
    let (mean, std_err) = mean_and_std_err(&values);
    Ok(Estimate {
        mean,
        std_err,
        n_samples: n,
        seed,
        method: Method::Tilted,
    })
}

/// Mean of the raw likelihood ratios of the tilted sampler; its expectation is 1.
pub fn tilted_weight_mean(
    x: Allocation,
    inst: &BanditInstance,
    budget: u32,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    let values = tilted_values(x, inst, budget, n, seed, false)?;
    let (mean, std_err) = mean_and_std_err(&values);
    Ok(Estimate {
        mean,
        std_err,
        n_samples: n,
        seed,
        method: Method::Tilted,
    })
}
