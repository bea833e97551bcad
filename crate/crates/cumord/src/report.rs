//! Deterministic CSV/JSON rendering of models, tables and bound reports.
//!
//! Numbers print with 17 significant digits so round-trips are lossless and
//! identical configs produce byte-identical files.

use serde_json::{json, Value};

use crate::bounds::BoundReport;
use crate::family::OrdModel;
use crate::fourier::FourierSpectrum;
use crate::moments::MomentTable;
use crate::poly::OrthoPolynomial;
use crate::quad::Quadratic;
use crate::{Error, Result};

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn endpoint_value(end: Option<i64>, lower: bool) -> Value {
    match end {
        Some(v) => json!(v),
        None => json!(if lower { "-inf" } else { "inf" }),
    }
}

/// The structured model record:
/// `{mu, delta, beta, gamma, alpha, omega, kind, params, tail_tol, window,
/// norm_constant}`.
pub fn model_record(model: &OrdModel) -> Value {
    let q = model.quadratic();
    let pmf = model.pmf();
    let kind_json = serde_json::to_value(model.kind()).expect("kind serializes");
    let (kind_tag, params) = match kind_json {
        Value::Object(mut map) => {
            let tag = map.remove("type").unwrap_or_else(|| json!("unknown"));
            (tag, Value::Object(map))
        }
        other => (other, json!({})),
    };
    json!({
        "mu": model.mu(),
        "delta": q.delta,
        "beta": q.beta,
        "gamma": q.gamma,
        "alpha": endpoint_value(model.support().alpha, true),
        "omega": endpoint_value(model.support().omega, false),
        "kind": kind_tag,
        "params": params,
        "tail_tol": pmf.tail_tol,
        "window": {
            "lo": pmf.window.lo,
            "hi": pmf.window.hi,
            "lo_truncated": pmf.window.lo_truncated,
            "hi_truncated": pmf.window.hi_truncated,
        },
        "norm_constant": pmf.norm_constant,
    })
}

/// Rebuilds a model from a record produced by [`model_record`] (only the
/// defining fields are read).
pub fn model_from_record(value: &Value) -> Result<OrdModel> {
    let field = |name: &str| -> Result<f64> {
        value
            .get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::InvalidInput(format!("model record missing field '{name}'")))
    };
    let mu = field("mu")?;
    let q = Quadratic::new(field("delta")?, field("beta")?, field("gamma")?);
    let tail_tol = value
        .get("tail_tol")
        .and_then(Value::as_f64)
        .unwrap_or(crate::family::DEFAULT_TAIL_TOL);
    OrdModel::with_tail_tol(mu, q, tail_tol)
}

/// CSV columns `(j, p)`.
pub fn pmf_csv(model: &OrdModel) -> String {
    let mut out = String::from("j,p\n");
    for (j, p) in model.pmf().iter() {
        out.push_str(&format!("{j},{}\n", format_float(p)));
    }
    out
}

/// CSV columns `(order, descending, ascending, raw)`.
pub fn moments_csv(table: &MomentTable) -> String {
    let mut out = String::from("order,descending,ascending,raw\n");
    for r in 0..=table.max_order {
        out.push_str(&format!(
            "{r},{},{},{}\n",
            format_float(table.descending[r]),
            format_float(table.ascending[r]),
            format_float(table.raw[r]),
        ));
    }
    out
}

/// CSV columns `(k, j, P, phi)` over the window for every polynomial.
pub fn polynomial_values_csv(model: &OrdModel, basis: &[OrthoPolynomial]) -> String {
    let mut out = String::from("k,j,P,phi\n");
    for poly in basis {
        for (idx, j) in model.window().iter().enumerate() {
            out.push_str(&format!(
                "{},{j},{},{}\n",
                poly.degree,
                format_float(poly.values[idx]),
                format_float(poly.standardized_values[idx]),
            ));
        }
    }
    out
}

/// CSV rows `(k, c_0..c_k)`; rows grow with the degree.
pub fn polynomial_coefficients_csv(basis: &[OrthoPolynomial]) -> String {
    let mut out = String::from("k,coefficients\n");
    for poly in basis {
        let coeffs: Vec<String> = poly.coeffs.iter().map(|&c| format_float(c)).collect();
        out.push_str(&format!("{},{}\n", poly.degree, coeffs.join(",")));
    }
    out
}

/// CSV columns `(k, alpha_k, alpha_k_direct, discrepancy)`.
pub fn spectrum_csv(spectrum: &FourierSpectrum) -> String {
    let mut out = String::from("k,alpha,alpha_direct,discrepancy\n");
    for k in 0..=spectrum.k_max {
        out.push_str(&format!(
            "{k},{},{},{}\n",
            format_float(spectrum.alphas[k]),
            format_float(spectrum.alphas_direct[k]),
            format_float(spectrum.alphas[k] - spectrum.alphas_direct[k]),
        ));
    }
    out
}

/// CSV columns `(m, n, s, residual, cap, equality_flag)`; the cap column
/// reports the tightest available cap.
pub fn bounds_csv(report: &BoundReport) -> String {
    let mut out = String::from("m,n,s,residual,cap,equality\n");
    for cell in &report.cells {
        let cap = cell
            .caps
            .iter()
            .map(|&(_, c)| c)
            .fold(f64::INFINITY, f64::min);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.m,
            cell.n,
            format_float(cell.s),
            format_float(cell.residual_direct),
            format_float(cap),
            u8::from(cell.equality),
        ));
    }
    out
}

/// The bound report as a JSON document embedding the model record.
pub fn bounds_json(model: &OrdModel, report: &BoundReport) -> Value {
    json!({
        "model": model_record(model),
        "g": report.g_label,
        "var": report.var_direct,
        "cells": report.cells.iter().map(|c| json!({
            "m": c.m,
            "n": c.n,
            "s": c.s,
            "residual": c.residual_direct,
            "residual_series": c.residual_series,
            "series_remainder": c.series_remainder,
            "caps": c.caps.iter().map(|&(tau, v)| json!({"tau": tau, "cap": v})).collect::<Vec<_>>(),
            "equality": c.equality,
        })).collect::<Vec<_>>(),
        "zetas": report.zetas.iter().map(|z| json!({
            "m1": z.m1, "m2": z.m2, "n": z.n, "zeta": z.zeta, "margin": z.margin, "ok": z.ok,
        })).collect::<Vec<_>>(),
        "checks": {
            "sandwich_ok": report.sandwich_ok,
            "residual_routes_ok": report.residual_routes_ok,
            "caps_ok": report.caps_ok,
            "weights_positive": report.weights_positive,
            "membership_margin": report.membership_margin,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_lossless() {
        for &x in &[0.5, 1.0 / 3.0, 2.720290549821331e-1, -1.5e-300, 6.02e23] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn record_round_trip() {
        let model = OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap();
        let record = model_record(&model);
        assert_eq!(record["kind"], "binomial");
        assert_eq!(record["params"]["n"], 4);
        assert_eq!(record["alpha"], 0);
        assert_eq!(record["omega"], 4);
        let back = model_from_record(&record).unwrap();
        assert_eq!(back.mu(), model.mu());
        assert_eq!(back.quadratic(), model.quadratic());
    }

    #[test]
    fn infinite_endpoints_serialize_as_strings() {
        let model = OrdModel::new(2.0, Quadratic::constant(2.0)).unwrap();
        let record = model_record(&model);
        assert_eq!(record["alpha"], 0);
        assert_eq!(record["omega"], "inf");
    }

    #[test]
    fn csv_is_deterministic() {
        let model = OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap();
        assert_eq!(pmf_csv(&model), pmf_csv(&model));
        assert!(pmf_csv(&model).starts_with("j,p\n0,"));
    }
}
