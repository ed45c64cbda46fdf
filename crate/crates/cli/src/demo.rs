//! Witness search for `bai demo`: the static rule tuned to `mu0` beats uniform
//! sampling on `mu0`, and this finds instances where it loses.

use serde::Serialize;

use bai_core::constructions::{construct_beating_instance, verify_certificate, CertificateCheck, ConstructionCertificate};
use bai_core::exact::ExactEngine;
use bai_core::rates::{g_closed, x_star, DEFAULT_TOL};
use bai_core::{Allocation, BanditInstance};

use crate::error::{CliError, CliResult};

/// Tuned allocations this close to 1/2 are treated as uniform sampling.
pub const UNIFORM_TOL: f64 = 1e-8;

/// Rates and exact log error probabilities of the tuned and uniform rules.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub instance: BanditInstance,
    pub g_tuned: f64,
    pub g_uniform: f64,
    /// `g_uniform - g_tuned`; positive when uniform sampling has the better rate.
    pub rate_gap: f64,
    pub log_p_tuned: f64,
    pub log_p_uniform: f64,
    /// Whether the exact error ordering at the demo budget agrees with the
    /// sign of `rate_gap`.
    pub confirmed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifiedWitness {
    pub certificate: ConstructionCertificate,
    pub check: CertificateCheck,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub mu0: BanditInstance,
    pub x_tuned: f64,
    pub budget: u32,
    pub coincides_with_uniform: bool,
    pub message: String,
    /// `mu0` itself, where the tuned rule wins.
    pub tuned_instance: Option<Comparison>,
    pub grid_step: f64,
    pub grid_points: usize,
    /// Grid instance with the largest `rate_gap`.
    pub grid_witness: Option<Comparison>,
    pub certified_witness: Option<CertifiedWitness>,
}

fn compare(engine: &ExactEngine, x: Allocation, inst: BanditInstance, budget: u32) -> CliResult<Comparison> {
    let g_tuned = g_closed(x, &inst);
    let g_uniform = g_closed(Allocation::UNIFORM, &inst);
    let log_p_tuned = engine.static_log_error(x, &inst, budget)?;
    let log_p_uniform = engine.static_log_error(Allocation::UNIFORM, &inst, budget)?;
    let rate_gap = g_uniform - g_tuned;
    Ok(Comparison {
        instance: inst,
        g_tuned,
        g_uniform,
        rate_gap,
        log_p_tuned,
        log_p_uniform,
        confirmed: if rate_gap > 0.0 {
            log_p_tuned > log_p_uniform
        } else {
            log_p_tuned < log_p_uniform
        },
    })
}

/// Targets tried for the certified construction; the one with the largest
/// rate gap is kept.
const TARGETS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn no_free_lunch(engine: &ExactEngine, mu0: BanditInstance, grid_step: f64, budget: u32) -> CliResult<DemoReport> {
    if !(grid_step > 0.0 && grid_step < 0.5) {
        return Err(CliError::usage(format!("grid step {grid_step} must lie in (0, 0.5)")));
    }
    let x = x_star(&mu0, DEFAULT_TOL)?;
    let mut report = DemoReport {
        mu0,
        x_tuned: x.value(),
        budget,
        coincides_with_uniform: false,
        message: String::new(),
        tuned_instance: None,
        grid_step,
        grid_points: 0,
        grid_witness: None,
        certified_witness: None,
    };
    if (x.value() - 0.5).abs() <= UNIFORM_TOL {
        report.coincides_with_uniform = true;
        report.message = "policy coincides with uniform; no witness exists".into();
        return Ok(report);
    }
    report.tuned_instance = Some(compare(engine, x, mu0, budget)?);

    let n = ((1.0 / grid_step).round() as u32).max(2);
    let mut best: Option<(f64, BanditInstance)> = None;
    for i in 1..n {
        for j in 1..n {
            if i == j {
                continue;
            }
            let inst = BanditInstance::new(i as f64 / n as f64, j as f64 / n as f64)?;
            report.grid_points += 1;
            let gap = g_closed(Allocation::UNIFORM, &inst) - g_closed(x, &inst);
            if gap > 0.0 && best.is_none_or(|(b, _)| gap > b) {
                best = Some((gap, inst));
            }
        }
    }
    let Some((_, witness)) = best else {
        return Err(CliError::NoWitness(format!(
            "grid step {grid_step} contains no instance where x = {} loses to uniform; try a finer grid",
            x.value()
        )));
    };
    report.grid_witness = Some(compare(engine, x, witness, budget)?);

    let mut certified: Option<CertifiedWitness> = None;
    for a in TARGETS {
        let Ok(cert) = construct_beating_instance(a, x) else {
            continue;
        };
        let check = verify_certificate(&cert)?;
        if !check.passed() {
            continue;
        }
        let gap = check.g_uniform - check.g_at_x;
        if certified.as_ref().is_none_or(|c| gap > c.comparison.rate_gap) {
            let comparison = compare(engine, x, cert.instance, budget)?;
            certified = Some(CertifiedWitness {
                certificate: cert,
                check,
                comparison,
            });
        }
    }
    report.certified_witness = certified;
    report.message = format!(
        "static rule x = {:.6} beats uniform on mu0 and loses on the witness instances",
        x.value()
    );
    Ok(report)
}
