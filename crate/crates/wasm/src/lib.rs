//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page needs no exception handling and the functions
//! run unchanged in native tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use bai_core::constructions::{construct_beating_instance, verify_certificate, ConstructionCertificate};
use bai_core::exact::ExactEngine;
use bai_core::rates::{g_closed, lambda_star, x_star, DEFAULT_TOL};
use bai_core::{Allocation, BanditInstance};

/// Largest budget the error-curve export accepts.
pub const MAX_CURVE_BUDGET: u32 = 5000;

/// Most points the error-curve export evaluates.
pub const MAX_CURVE_POINTS: u32 = 200;

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    let v = match r {
        Ok(v) => serde_json::to_value(v).map_err(|e| e.to_string()),
        Err(e) => Err(e),
    };
    match v {
        Ok(v) => v.to_string(),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

fn instance(mu1: f64, mu2: f64) -> Result<BanditInstance, String> {
    BanditInstance::new(mu1, mu2).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RateCurve {
    x: Vec<f64>,
    g: Vec<f64>,
    lambda: Vec<f64>,
    x_star: f64,
    g_star: f64,
    g_uniform: f64,
}

fn rate_curve_impl(mu1: f64, mu2: f64, points: u32) -> Result<RateCurve, String> {
    let inst = instance(mu1, mu2)?;
    if !(2..=2000).contains(&points) {
        return Err(format!("points must lie in [2, 2000], got {points}"));
    }
    let xs = x_star(&inst, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let mut curve = RateCurve {
        x: Vec::new(),
        g: Vec::new(),
        lambda: Vec::new(),
        x_star: xs.value(),
        g_star: g_closed(xs, &inst),
        g_uniform: g_closed(Allocation::UNIFORM, &inst),
    };
    for k in 1..=points {
        let x = Allocation::new(k as f64 / (points + 1) as f64).map_err(|e| e.to_string())?;
        curve.x.push(x.value());
        curve.g.push(g_closed(x, &inst));
        curve.lambda.push(lambda_star(x, &inst));
    }
    Ok(curve)
}

/// Large-deviation rate `g(x)` and tilting mean over an interior grid of
/// `points` allocations, plus the optimal allocation.
#[wasm_bindgen]
pub fn rate_curve(mu1: f64, mu2: f64, points: u32) -> String {
    respond(rate_curve_impl(mu1, mu2, points))
}

#[derive(Serialize)]
struct ErrorCurves {
    x: f64,
    x_star: f64,
    budgets: Vec<u32>,
    /// Exact `log P(error)` of the static rule at `x`.
    log_p_x: Vec<f64>,
    log_p_x_star: Vec<f64>,
    log_p_uniform: Vec<f64>,
    g_x: f64,
    g_x_star: f64,
    g_uniform: f64,
}

fn error_curves_impl(mu1: f64, mu2: f64, x: f64, t_max: u32, t_step: u32) -> Result<ErrorCurves, String> {
    let inst = instance(mu1, mu2)?;
    let x = Allocation::new(x).map_err(|e| e.to_string())?;
    if t_step == 0 || t_max < t_step || t_max > MAX_CURVE_BUDGET {
        return Err(format!("need 0 < step <= T_max <= {MAX_CURVE_BUDGET}"));
    }
    if t_max / t_step > MAX_CURVE_POINTS {
        return Err(format!("at most {MAX_CURVE_POINTS} budgets per curve"));
    }
    let xs = x_star(&inst, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let engine = ExactEngine::default();
    let log_p = |a: Allocation, t: u32| engine.static_log_error(a, &inst, t).map_err(|e| e.to_string());
    let mut out = ErrorCurves {
        x: x.value(),
        x_star: xs.value(),
        budgets: Vec::new(),
        log_p_x: Vec::new(),
        log_p_x_star: Vec::new(),
        log_p_uniform: Vec::new(),
        g_x: g_closed(x, &inst),
        g_x_star: g_closed(xs, &inst),
        g_uniform: g_closed(Allocation::UNIFORM, &inst),
    };
    for t in (t_step..=t_max).step_by(t_step as usize) {
        out.budgets.push(t);
        out.log_p_x.push(log_p(x, t)?);
        out.log_p_x_star.push(log_p(xs, t)?);
        out.log_p_uniform.push(log_p(Allocation::UNIFORM, t)?);
    }
    Ok(out)
}

/// Exact log error probabilities against the budget for the static rule at
/// `x`, the rate-optimal static rule and uniform sampling.
#[wasm_bindgen]
pub fn error_curves(mu1: f64, mu2: f64, x: f64, t_max: u32, t_step: u32) -> String {
    respond(error_curves_impl(mu1, mu2, x, t_max, t_step))
}

#[derive(Serialize)]
struct Witness {
    x_tuned: f64,
    g_tuned_on_mu0: f64,
    g_uniform_on_mu0: f64,
    certificate: ConstructionCertificate,
    passed: bool,
    g_tuned_on_witness: f64,
    g_uniform_on_witness: f64,
}

fn beating_witness_impl(mu1: f64, mu2: f64, a: f64) -> Result<Witness, String> {
    let mu0 = instance(mu1, mu2)?;
    let x = x_star(&mu0, DEFAULT_TOL).map_err(|e| e.to_string())?;
    if (x.value() - 0.5).abs() <= 1e-8 {
        return Err("policy coincides with uniform; no witness exists".into());
    }
    let cert = construct_beating_instance(a, x).map_err(|e| e.to_string())?;
    let check = verify_certificate(&cert).map_err(|e| e.to_string())?;
    Ok(Witness {
        x_tuned: x.value(),
        g_tuned_on_mu0: g_closed(x, &mu0),
        g_uniform_on_mu0: g_closed(Allocation::UNIFORM, &mu0),
        passed: check.passed(),
        g_tuned_on_witness: check.g_at_x,
        g_uniform_on_witness: check.g_uniform,
        certificate: cert,
    })
}

/// Tunes the static rule to `(mu1, mu2)` and builds a certified instance,
/// with tilting mean `a`, on which that tuned rule has a worse rate than
/// uniform sampling.
#[wasm_bindgen]
pub fn beating_witness(mu1: f64, mu2: f64, a: f64) -> String {
    respond(beating_witness_impl(mu1, mu2, a))
}
