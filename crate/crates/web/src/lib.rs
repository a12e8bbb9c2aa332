//! Browser bindings for exploring (expectation, variance) trade-offs.
//!
//! Every export takes and returns JSON text. The plain functions are the
//! ones tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use mdpstab::fixtures::{M_GLOB_JSON, M_UNI_JSON};
use mdpstab::global::{CheckMethod, GlobalAnalyzer, GlobalAnswer};
use mdpstab::hybrid::{default_eps, HybridAnalyzer, HybridAnswer};
use mdpstab::local::{check_local, LocalAnswer};
use mdpstab::model::{Mdp, StochasticUpdateStrategy};
use mdpstab::numerics::rational::{format_rational, parse_rational, to_f64, Rat};
use mdpstab::pareto::{pareto, ParetoOptions};
use mdpstab::zerovar::zero_var;
use mdpstab::VarianceKind;

/// Pair budget for local queries in the browser, where there are no threads.
pub const WEB_PAIR_BUDGET: usize = 400;

fn model(mdp_json: &str, from: &str) -> Result<(Mdp, usize), String> {
    let mdp = Mdp::from_json_str(mdp_json).map_err(|e| e.to_string())?;
    let start = if from.is_empty() { mdp.initial() } else { mdp.require_state(from).map_err(|e| e.to_string())? };
    Ok((mdp, start))
}

fn number(text: &str, what: &str) -> Result<Rat, String> {
    parse_rational(text).map_err(|_| format!("{what}: `{text}` is not a number"))
}

fn strategy_value(mdp: &Mdp, s: &StochasticUpdateStrategy) -> Value {
    serde_json::to_value(s.to_file(mdp)).expect("strategy serializes")
}

/// Bundled example models by name (`m_glob`, `m_uni`).
pub fn fixture_json(name: &str) -> Result<String, String> {
    match name {
        "m_glob" => Ok(M_GLOB_JSON.to_string()),
        "m_uni" => Ok(M_UNI_JSON.to_string()),
        _ => Err(format!("no bundled model `{name}`")),
    }
}

/// Grid of answers plus staircase and witnesses. Rationals are also given
/// as floats (`uf`, `vf`) for plotting.
pub fn pareto_json(mdp_json: &str, from: &str, kind: &str, eps: &str) -> Result<String, String> {
    let (mdp, start) = model(mdp_json, from)?;
    let kind: VarianceKind = kind.parse()?;
    let eps = number(eps, "eps")?;
    let opts = ParetoOptions { pair_budget: Some(WEB_PAIR_BUDGET), threads: Some(1) };
    let grid = pareto(&mdp, start, kind, &eps, &opts).map_err(|e| e.to_string())?;

    let r = to_f64(&mdp.max_abs_reward());
    let cells: Vec<Value> = grid
        .cells
        .iter()
        .map(|c| {
            json!({
                "u": format_rational(&c.u), "v": format_rational(&c.v),
                "uf": to_f64(&c.u), "vf": to_f64(&c.v),
                "answer": c.answer, "witness": c.witness,
            })
        })
        .collect();
    let stairs: Vec<Value> = grid
        .staircase
        .iter()
        .map(|p| json!({ "u": format_rational(&p.u), "v": format_rational(&p.v), "uf": to_f64(&p.u), "vf": to_f64(&p.v) }))
        .collect();
    let witnesses: Vec<Value> = grid.witnesses.iter().map(|w| strategy_value(&mdp, w)).collect();
    Ok(json!({
        "kind": kind,
        "eps": format_rational(&eps),
        "bound": r,
        "cells": cells,
        "staircase": stairs,
        "witnesses": witnesses,
    })
    .to_string())
}

/// Single-point check with the witness values when the answer is Yes.
pub fn check_json(mdp_json: &str, from: &str, kind: &str, u: &str, v: &str, eps: &str) -> Result<String, String> {
    let (mdp, start) = model(mdp_json, from)?;
    let kind: VarianceKind = kind.parse()?;
    let (u, v) = (number(u, "u")?, number(v, "v")?);
    let eps = if eps.is_empty() { default_eps() } else { number(eps, "eps")? };
    let err = |e: mdpstab::Error| e.to_string();
    let found: Option<(Rat, Rat, StochasticUpdateStrategy)> = match kind {
        VarianceKind::Global => match GlobalAnalyzer::new(&mdp, start).check(&u, &v, &eps, CheckMethod::Hull).map_err(err)? {
            GlobalAnswer::Yes(w) => Some((w.expectation, w.variance, w.strategy)),
            GlobalAnswer::No => None,
        },
        VarianceKind::Hybrid => match HybridAnalyzer::new(&mdp, start).check(&u, &v, &eps, CheckMethod::Hull).map_err(err)? {
            HybridAnswer::Yes(w) => Some((w.expectation, w.hybrid_variance, w.strategy)),
            HybridAnswer::No => None,
        },
        VarianceKind::Local => match check_local(&mdp, start, &u, &v, Some(WEB_PAIR_BUDGET)).map_err(err)? {
            LocalAnswer::Yes(w) => Some((w.expectation, w.local_variance, w.strategy)),
            LocalAnswer::No => None,
            LocalAnswer::BudgetExceeded { checked, .. } => {
                return Ok(json!({ "answer": "Unknown", "pairs_checked": checked }).to_string());
            }
        },
    };
    let out = match found {
        Some((e, var, s)) => json!({
            "answer": "Yes",
            "expectation": format_rational(&e),
            "variance": format_rational(&var),
            "strategy": strategy_value(&mdp, &s),
        }),
        None => json!({ "answer": "No" }),
    };
    Ok(out.to_string())
}

/// Zero-variance optimum for every state and every variance kind.
pub fn zero_var_json(mdp_json: &str) -> Result<String, String> {
    let (mdp, _) = model(mdp_json, "")?;
    let mut rows = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let mut row = json!({ "state": mdp.state_name(s) });
        for kind in VarianceKind::ALL {
            let ans = zero_var(&mdp, s, kind).map_err(|e| e.to_string())?;
            row[kind.name()] = json!(ans.value.as_ref().map(format_rational));
        }
        rows.push(row);
    }
    Ok(Value::Array(rows).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fixture)]
pub fn fixture(name: &str) -> Result<String, JsError> {
    js(fixture_json(name))
}

#[wasm_bindgen(js_name = paretoGrid)]
pub fn pareto_grid(mdp_json: &str, from: &str, kind: &str, eps: &str) -> Result<String, JsError> {
    js(pareto_json(mdp_json, from, kind, eps))
}

#[wasm_bindgen(js_name = checkPoint)]
pub fn check_point(mdp_json: &str, from: &str, kind: &str, u: &str, v: &str, eps: &str) -> Result<String, JsError> {
    js(check_json(mdp_json, from, kind, u, v, eps))
}

#[wasm_bindgen(js_name = zeroVarTable)]
pub fn zero_var_table(mdp_json: &str) -> Result<String, JsError> {
    js(zero_var_json(mdp_json))
}
