use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use bai_core::constructions::{construct_beating_instance, verify_certificate, ConstructionCertificate};
use bai_core::exact::{Capacity, ExactEngine, ExactSummary};
use bai_core::mc::{simulate_plain, simulate_tilted_static, Estimate};
use bai_core::policies::PolicySpec;
use bai_core::rates::{g_closed, lambda_star, x_star, DEFAULT_TOL};
use bai_core::{Allocation, BanditInstance};

use crate::args::{
    Command, ConstructArgs, DemoArgs, ExactArgs, McArgs, MeanPair, RatesArgs, ScanArgs, SweepArgs, VerifyArgs,
};
use crate::demo::no_free_lunch;
use crate::error::{CliError, CliResult};
use crate::format::{fmt17, to_json};
use crate::verify::run_suite;

pub const EXACT_HEADER: [&str; 8] = ["policy", "mu1", "mu2", "T", "p_error", "p_pick2", "e_n1", "e_omega2"];
pub const MC_HEADER: [&str; 9] = ["method", "policy", "mu1", "mu2", "T", "n", "seed", "estimate", "std_err"];
pub const SCAN_EXTRA: [&str; 3] = ["log_p_error", "ratio", "reference"];

fn instance(mu: MeanPair) -> CliResult<BanditInstance> {
    Ok(BanditInstance::new(mu.0, mu.1)?)
}

fn engine() -> CliResult<ExactEngine> {
    Ok(ExactEngine::new(Capacity::from_env()?))
}

fn exact_row(policy: &PolicySpec, inst: &BanditInstance, budget: u32, s: &ExactSummary) -> Vec<String> {
    vec![
        policy.to_string(),
        fmt17(inst.mu1()),
        fmt17(inst.mu2()),
        budget.to_string(),
        fmt17(s.p_error),
        fmt17(s.p_pick2),
        fmt17(s.e_n1),
        fmt17(s.e_omega2),
    ]
}

fn mc_row(policy: &PolicySpec, inst: &BanditInstance, budget: u32, e: &Estimate) -> Vec<String> {
    vec![
        e.method.to_string(),
        policy.to_string(),
        fmt17(inst.mu1()),
        fmt17(inst.mu2()),
        budget.to_string(),
        e.n_samples.to_string(),
        e.seed.to_string(),
        fmt17(e.mean),
        fmt17(e.std_err),
    ]
}

/// CSV text with the given header and rows.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv fields are UTF-8"))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p.display().to_string(), e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("stdout", e)),
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Rates(a) => rates(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Construct(a) => construct(a, out),
        Command::Exact(a) => exact(a, out),
        Command::Mc(a) => mc(a, out),
        Command::Scan(a) => scan(a, out),
        Command::Demo(a) => demo(a, out),
        Command::Sweep(a) => sweep(a, out),
    }
}

fn rates(a: RatesArgs, out: &mut dyn Write) -> CliResult<()> {
    let inst = instance(a.mu)?;
    let xs = x_star(&inst, DEFAULT_TOL)?;
    let reference = 1.0 / g_closed(Allocation::UNIFORM, &inst);
    let report = match a.x {
        Some(x) => {
            let x = Allocation::new(x)?;
            json!({
                "mu1": inst.mu1(),
                "mu2": inst.mu2(),
                "x": x.value(),
                "g": g_closed(x, &inst),
                "lambda": lambda_star(x, &inst),
                "x_star": xs.value(),
                "reference": reference,
            })
        }
        None => json!({
            "mu1": inst.mu1(),
            "mu2": inst.mu2(),
            "x_star": xs.value(),
            "g_x_star": g_closed(xs, &inst),
            "lambda_x_star": lambda_star(xs, &inst),
            "g_uniform": g_closed(Allocation::UNIFORM, &inst),
            "reference": reference,
        }),
    };
    emit(out, None, &to_json(&report))
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    if let Some(path) = a.certificate {
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        let cert: ConstructionCertificate = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: not a certificate: {e}", path.display())))?;
        let check = verify_certificate(&cert)?;
        let passed = check.passed();
        let report = json!({
            "passed": passed,
            "lambda_ok": check.lambda_ok(),
            "x_star_ok": check.x_star_ok(),
            "beats_uniform": check.beats_uniform(),
            "check": check,
        });
        emit(out, None, &to_json(&report))?;
        return if passed {
            Ok(())
        } else {
            Err(CliError::Verify(format!("certificate {} failed", path.display())))
        };
    }
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let reports = run_suite(a.suite, a.samples, a.seed)?;
    let mut text = String::new();
    let mut failed = Vec::new();
    for r in &reports {
        text.push_str(&r.line());
        text.push('\n');
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    for r in reports.iter().filter(|r| !r.passed) {
        text.push_str(&to_json(&json!({ "property": r.name, "worst": r.worst, "witness": r.witness })));
    }
    text.push_str(&format!(
        "{} of {} properties passed (seed {})\n",
        reports.len() - failed.len(),
        reports.len(),
        a.seed
    ));
    emit(out, None, &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}

fn construct(a: ConstructArgs, out: &mut dyn Write) -> CliResult<()> {
    let cert = construct_beating_instance(a.a, Allocation::new(a.x)?)?;
    emit(out, a.out.as_deref(), &to_json(&cert))
}

fn exact(a: ExactArgs, out: &mut dyn Write) -> CliResult<()> {
    let inst = instance(a.mu)?;
    let (s, _) = engine()?.summary_any(&a.policy, &inst, a.budget)?;
    let text = csv_text(&EXACT_HEADER, &[exact_row(&a.policy, &inst, a.budget, &s)])?;
    emit(out, a.out.as_deref(), &text)
}

fn mc(a: McArgs, out: &mut dyn Write) -> CliResult<()> {
    let inst = instance(a.mu)?;
    let est = if a.tilted {
        let x = a
            .policy
            .static_allocation()
            .ok_or_else(|| CliError::usage(format!("--tilted needs a static policy, got '{}'", a.policy)))?;
        simulate_tilted_static(x, &inst, a.budget, a.n, a.seed)?
    } else {
        simulate_plain(&a.policy, &inst, a.budget, a.n, a.seed)?
    };
    let text = csv_text(&MC_HEADER, &[mc_row(&a.policy, &inst, a.budget, &est)])?;
    emit(out, a.out.as_deref(), &text)
}

fn scan(a: ScanArgs, out: &mut dyn Write) -> CliResult<()> {
    let inst = instance(a.mu)?;
    let result = engine()?.rate_ratio_scan(&a.policy, &inst, &a.budgets)?;
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            let mut row = exact_row(&a.policy, &inst, p.budget, &p.summary);
            row.extend([fmt17(p.log_p_error), fmt17(p.ratio), fmt17(result.reference)]);
            row
        })
        .collect();
    let header: Vec<&str> = EXACT_HEADER.iter().chain(SCAN_EXTRA.iter()).copied().collect();
    emit(out, a.out.as_deref(), &csv_text(&header, &rows)?)
}

fn demo(a: DemoArgs, out: &mut dyn Write) -> CliResult<()> {
    let mu0 = instance(a.mu0)?;
    let report = no_free_lunch(&engine()?, mu0, a.grid, a.budget)?;
    emit(out, None, &to_json(&report))
}

/// JSON document accepted by `bai sweep --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub instances: Vec<BanditInstance>,
    pub policies: Vec<PolicySpec>,
    pub budgets: Vec<u32>,
    /// Exact results, one CSV row per (instance, policy, budget).
    pub output_path: String,
    pub seed: u64,
    /// When positive, plain Monte Carlo rows with this many replications are
    /// written next to `output_path` with a `.mc.csv` suffix.
    #[serde(default)]
    pub mc_samples: u64,
}

impl SweepConfig {
    pub fn mc_path(&self) -> PathBuf {
        let p = Path::new(&self.output_path);
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        p.with_file_name(format!("{stem}.mc.csv"))
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> CliResult<(String, Option<String>)> {
    if cfg.instances.is_empty() || cfg.policies.is_empty() || cfg.budgets.is_empty() {
        return Err(CliError::usage("sweep config needs non-empty instances, policies and budgets"));
    }
    let engine = engine()?;
    let mut exact_rows = Vec::new();
    let mut mc_rows = Vec::new();
    for inst in &cfg.instances {
        for policy in &cfg.policies {
            for &budget in &cfg.budgets {
                let (s, _) = engine.summary_any(policy, inst, budget)?;
                exact_rows.push(exact_row(policy, inst, budget, &s));
                if cfg.mc_samples > 0 {
                    let e = simulate_plain(policy, inst, budget, cfg.mc_samples, cfg.seed)?;
                    mc_rows.push(mc_row(policy, inst, budget, &e));
                }
            }
        }
    }
    let exact = csv_text(&EXACT_HEADER, &exact_rows)?;
    let mc = if cfg.mc_samples > 0 {
        Some(csv_text(&MC_HEADER, &mc_rows)?)
    } else {
        None
    };
    Ok((exact, mc))
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::io(a.config.display().to_string(), e))?;
    let cfg: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: invalid sweep config: {e}", a.config.display())))?;
    let (exact, mc) = run_sweep(&cfg)?;
    let path = PathBuf::from(&cfg.output_path);
    emit(out, Some(&path), &exact)?;
    let mut note = format!("wrote {}\n", path.display());
    if let Some(mc) = mc {
        let mc_path = cfg.mc_path();
        emit(out, Some(&mc_path), &mc)?;
        note.push_str(&format!("wrote {}\n", mc_path.display()));
    }
    emit(out, None, &note)
}
