use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bai_core::policies::PolicySpec;

#[derive(Debug, Parser)]
#[command(name = "bai", version, about = "Fixed-budget best-arm identification with two Bernoulli arms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate function g(x, mu), the inner minimiser and the optimal allocation.
    Rates(RatesArgs),
    /// Randomised property suites, or re-verification of a certificate.
    Verify(VerifyArgs),
    /// Build an instance on which a static allocation loses to uniform sampling.
    Construct(ConstructArgs),
    /// Exact error probability and pull counts (CSV).
    Exact(ExactArgs),
    /// Monte Carlo estimate of the error probability (CSV).
    Mc(McArgs),
    /// Exact error probabilities over a budget grid with the ratio T / log(1/p) (CSV).
    Scan(ScanArgs),
    /// Search for an instance where the policy tuned to mu0 loses to uniform sampling.
    Demo(DemoArgs),
    /// Exact evaluation over a JSON-configured grid of instances, policies and budgets.
    Sweep(SweepArgs),
}

/// Two means given as `a,b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPair(pub f64, pub f64);

pub fn parse_mean_pair(s: &str) -> Result<MeanPair, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated means, got '{s}'"));
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("'{p}' is not a number"));
    Ok(MeanPair(num(parts[0])?, num(parts[1])?))
}

/// Budgets as `T`, `T1,T2,...` or `start:stop:step` (inclusive).
pub fn parse_budgets(s: &str) -> Result<Vec<u32>, String> {
    let int = |p: &str| {
        p.trim()
            .parse::<u32>()
            .map_err(|_| format!("'{p}' is not a budget"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [single] => single.split(',').map(int).collect::<Result<Vec<_>, _>>()?,
        [start, stop, step] => {
            let (start, stop, step) = (int(start)?, int(stop)?, int(step)?);
            if step == 0 || start > stop {
                return Err(format!("empty budget range '{s}'"));
            }
            (start..=stop).step_by(step as usize).collect()
        }
        _ => return Err(format!("budget range '{s}' must be start:stop:step")),
    };
    if out.is_empty() {
        return Err("no budgets given".into());
    }
    Ok(out)
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    s.parse::<PolicySpec>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, value_parser = parse_mean_pair)]
    pub mu: MeanPair,
    /// Allocation to arm 2; omit for the full profile at x*.
    #[arg(long)]
    pub x: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Rates,
    Dual,
    Constructions,
    Asymmetry,
    Com,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Re-verify a certificate JSON file instead of running suites.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Target value of the inner minimiser lambda(x, mu).
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub x: f64,
    /// Write the certificate here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: PolicySpec,
    #[arg(long, value_parser = parse_mean_pair)]
    pub mu: MeanPair,
    #[arg(long = "T")]
    pub budget: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: PolicySpec,
    #[arg(long, value_parser = parse_mean_pair)]
    pub mu: MeanPair,
    #[arg(long = "T")]
    pub budget: u32,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Importance sampling at the inner minimiser (static policies only).
    #[arg(long)]
    pub tilted: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: PolicySpec,
    #[arg(long, value_parser = parse_mean_pair)]
    pub mu: MeanPair,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long = "T", value_parser = parse_budgets)]
    pub budgets: std::vec::Vec<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, value_parser = parse_mean_pair, default_value = "0.9,0.5")]
    pub mu0: MeanPair,
    /// Spacing of the instance grid.
    #[arg(long, default_value_t = 0.01)]
    pub grid: f64,
    /// Budget for the exact confirmation.
    #[arg(long = "T", default_value_t = 2000)]
    pub budget: u32,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
}
