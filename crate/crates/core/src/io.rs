//! Problem files and result emission.
//!
//! Problem files are JSON with fields `a, b, n, m, A, B, W, R, S, omega, x,
//! v, qa, qb`. A matrix is a nested array (constant), `{"poly": ...}` with
//! per-entry coefficient lists in `t` (lowest degree first), or
//! `{"builtin": "sin" | "cos" | "exp", "scale": <matrix>}`. Vectors accept a
//! flat array or `{"poly": [[c0, c1, ...], ...]}`. A bare number stands for a
//! 1×1 matrix. `omega`, `x`, `v` and `qb` default to zero.
//!
//! CSV output uses 17 significant digits and no locale.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::blocks::IntervalBlocks;
use crate::coefficient::{Builtin, CoefficientFunction};
use crate::error::{Error, Result};
use crate::experiments::{CompareReport, ConvergenceRow, ConvergenceRun, Reference};
use crate::oracle::CrossCheckReport;
use crate::pipeline::SolveOutput;
use crate::problem::LqProblem;
use crate::riccati::SweepStep;
use crate::simulate::{CostateTrajectory, Trajectory};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| perr(format!("{what}: expected a number, got {v}")))
}

fn parse_dense(v: &Value, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(x) = v.as_f64() {
        if rows == 1 && cols == 1 {
            return Ok(DMatrix::from_element(1, 1, x));
        }
        return Err(perr(format!("{what}: scalar given for a {rows}x{cols} matrix")));
    }
    let arr = v.as_array().ok_or_else(|| perr(format!("{what}: expected an array")))?;
    // Flat arrays are column vectors.
    if cols == 1 && arr.iter().all(Value::is_number) {
        if arr.len() != rows {
            return Err(Error::DimensionMismatch {
                what: what.into(),
                expected: (rows, 1),
                got: (arr.len(), 1),
            });
        }
        let data = arr.iter().map(|x| as_f64(x, what)).collect::<Result<Vec<_>>>()?;
        return Ok(DMatrix::from_column_slice(rows, 1, &data));
    }
    let got_cols = arr.first().and_then(Value::as_array).map_or(0, Vec::len);
    if arr.len() != rows || got_cols != cols {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected: (rows, cols),
            got: (arr.len(), got_cols),
        });
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, row) in arr.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| perr(format!("{what}: row {r} is not an array")))?;
        if row.len() != cols {
            return Err(perr(format!("{what}: ragged row {r}")));
        }
        for (c, x) in row.iter().enumerate() {
            m[(r, c)] = as_f64(x, what)?;
        }
    }
    Ok(m)
}

fn parse_coeff_list(v: &Value, what: &str) -> Result<Vec<f64>> {
    match v {
        Value::Number(_) => Ok(vec![as_f64(v, what)?]),
        Value::Array(a) => a.iter().map(|x| as_f64(x, what)).collect(),
        _ => Err(perr(format!("{what}: polynomial coefficients must be numbers"))),
    }
}

fn parse_coefficient(v: &Value, rows: usize, cols: usize, what: &str) -> Result<CoefficientFunction> {
    let Some(obj) = v.as_object() else {
        return Ok(CoefficientFunction::Constant(parse_dense(v, rows, cols, what)?));
    };
    if let Some(poly) = obj.get("poly") {
        let outer = poly.as_array().ok_or_else(|| perr(format!("{what}: poly must be an array")))?;
        if outer.len() != rows {
            return Err(Error::DimensionMismatch {
                what: what.into(),
                expected: (rows, cols),
                got: (outer.len(), 0),
            });
        }
        let mut coeffs = Vec::with_capacity(rows * cols);
        for row in outer {
            let row = row.as_array().ok_or_else(|| perr(format!("{what}: poly row must be an array")))?;
            // Vectors list one coefficient array per entry.
            let is_vector_entry = cols == 1 && row.iter().all(Value::is_number);
            if is_vector_entry {
                coeffs.push(parse_coeff_list(&Value::Array(row.clone()), what)?);
                continue;
            }
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: (rows, cols),
                    got: (outer.len(), row.len()),
                });
            }
            for entry in row {
                coeffs.push(parse_coeff_list(entry, what)?);
            }
        }
        return Ok(CoefficientFunction::Polynomial { rows, cols, coeffs });
    }
    if let Some(name) = obj.get("builtin") {
        let name = name.as_str().ok_or_else(|| perr(format!("{what}: builtin must be a name")))?;
        let profile = Builtin::from_name(name)
            .ok_or_else(|| perr(format!("{what}: unknown builtin '{name}'")))?;
        let scale = match obj.get("scale") {
            Some(s) => parse_dense(s, rows, cols, what)?,
            None => DMatrix::from_element(rows, cols, 1.0),
        };
        return Ok(CoefficientFunction::Builtin { profile, scale });
    }
    Err(perr(format!("{what}: expected an array, {{\"poly\": ...}} or {{\"builtin\": ...}}")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| perr(format!("missing field '{key}'")))
}

fn parse_dim(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    let v = field(obj, key)?;
    v.as_u64()
        .filter(|&d| d > 0)
        .map(|d| d as usize)
        .ok_or_else(|| perr(format!("'{key}' must be a positive integer")))
}

/// Parses a problem file. The result is not yet validated.
pub fn parse_problem(text: &str) -> Result<LqProblem> {
    let root: Value = serde_json::from_str(text).map_err(|e| perr(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| perr("problem must be a JSON object"))?;
    let a = as_f64(field(obj, "a")?, "a")?;
    let b = as_f64(field(obj, "b")?, "b")?;
    let n = parse_dim(obj, "n")?;
    let m = parse_dim(obj, "m")?;

    let state_matrix = parse_coefficient(field(obj, "A")?, n, n, "A")?;
    let input_matrix = parse_coefficient(field(obj, "B")?, n, m, "B")?;
    let state_weight = parse_coefficient(field(obj, "W")?, n, n, "W")?;
    let control_weight = parse_coefficient(field(obj, "R")?, m, m, "R")?;
    let terminal_weight = parse_dense(field(obj, "S")?, n, n, "S")?;
    let q_a = DVector::from_column_slice(parse_dense(field(obj, "qa")?, n, 1, "qa")?.as_slice());

    let optional = |key: &str, len: usize| -> Result<CoefficientFunction> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(CoefficientFunction::zeros(len, 1)),
            Some(v) => parse_coefficient(v, len, 1, key),
        }
    };
    let drift = optional("omega", n)?;
    let state_ref = optional("x", n)?;
    let control_ref = optional("v", m)?;
    let q_b = match obj.get("qb") {
        None | Some(Value::Null) => DVector::zeros(n),
        Some(v) => DVector::from_column_slice(parse_dense(v, n, 1, "qb")?.as_slice()),
    };

    Ok(LqProblem::homogeneous(a, b, state_matrix, input_matrix, state_weight, control_weight, terminal_weight, q_a)
        .with_drift(drift)
        .with_state_ref(state_ref)
        .with_control_ref(control_ref)
        .with_target(q_b))
}

/// Parses a comma-separated vector such as `1,0.5,-2`.
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| perr(format!("bad number '{s}'"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<_>>())).collect())
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn step_json(s: &SweepStep) -> Value {
    json!({
        "i": s.index,
        "gain": matrix_json(&s.gain),
        "offset": vector_json(&s.offset),
        "T_condition": s.t_condition,
    })
}

pub fn solution_json(out: &SolveOutput) -> Value {
    let sol = &out.solution;
    json!({
        "grid": { "h": sol.grid.durations(), "s": sol.grid.times() },
        "U": sol.controls.iter().map(vector_json).collect::<Vec<_>>(),
        "q_nodes": sol.q_nodes.iter().map(vector_json).collect::<Vec<_>>(),
        "predicted_cost": sol.predicted_cost,
        "simulated_cost": sol.simulated_cost,
        "steps": out.sweep.steps.iter().map(step_json).collect::<Vec<_>>(),
        "pmp_residuals": out.residuals.iter().map(vector_json).collect::<Vec<_>>(),
        "max_relative_pmp_residual": out.max_relative_residual(),
    })
}

/// One JSON object with every block of an interval, plus the sweep's
/// condition estimate of `T_i` when available.
pub fn blocks_json(b: &IntervalBlocks, step: Option<&SweepStep>) -> Value {
    let mut v = json!({
        "i": b.index,
        "Zstep": matrix_json(&b.z_step),
        "ZB": matrix_json(&b.zb),
        "ZOmega": vector_json(&b.z_omega),
        "ZWZ": matrix_json(&b.zwz),
        "ZBWZ": matrix_json(&b.zbwz),
        "ZBWZB": matrix_json(&b.zbwzb),
        "ZBWZOmegaX": vector_json(&b.zbwz_omega_x),
        "ZWZOmegaX": vector_json(&b.zwz_omega_x),
        "WZOmegaX2": b.wz_omega_x2,
        "Rbar": matrix_json(&b.r_bar),
        "RV": vector_json(&b.rv),
        "RV2": b.rv2,
    });
    if let Some(s) = step {
        v["T_condition"] = json!(s.t_condition);
    }
    v
}

fn indexed_header(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}_{k}")).collect()
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// `i,s_i,h_i,U_1..U_m`.
pub fn controls_csv(out: &SolveOutput) -> String {
    let sol = &out.solution;
    let m = sol.controls.first().map_or(0, DVector::len);
    let mut s = String::new();
    let mut header = vec!["i".to_string(), "s_i".into(), "h_i".into()];
    header.extend(indexed_header("U", m));
    push_row(&mut s, &header);
    for (i, u) in sol.controls.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            fmt_f64(sol.grid.times()[i]),
            fmt_f64(sol.grid.durations()[i]),
        ];
        row.extend(u.iter().map(|&x| fmt_f64(x)));
        push_row(&mut s, &row);
    }
    s
}

/// `t,q_1..q_n` and, with a costate, `p_1..p_n`. Interval joins are written
/// once.
pub fn trajectory_csv(traj: &Trajectory, costate: Option<&CostateTrajectory>) -> String {
    let n = traj.q_end.len();
    let mut s = String::new();
    let mut header = vec!["t".to_string()];
    header.extend(indexed_header("q", n));
    if costate.is_some() {
        header.extend(indexed_header("p", n));
    }
    push_row(&mut s, &header);
    let last = traj.intervals.len() - 1;
    for (i, iv) in traj.intervals.iter().enumerate() {
        let count = if i == last { iv.times.len() } else { iv.times.len() - 1 };
        for k in 0..count {
            let mut row = vec![fmt_f64(iv.times[k])];
            row.extend(iv.states[k].iter().map(|&x| fmt_f64(x)));
            if let Some(c) = costate {
                row.extend(c.intervals[i][k].iter().map(|&x| fmt_f64(x)));
            }
            push_row(&mut s, &row);
        }
    }
    s
}

/// `N,norm_delta,max_node_err,cost_sampled,cost_gap,cost_averaged`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("N,norm_delta,max_node_err,cost_sampled,cost_gap,cost_averaged\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.norm_delta),
            fmt_f64(r.max_node_err),
            fmt_f64(r.cost_sampled),
            fmt_f64(r.cost_gap),
            fmt_f64(r.cost_averaged)
        );
    }
    s
}

fn suffixed(name: &str, m: usize) -> Vec<String> {
    if m == 1 {
        vec![name.to_string()]
    } else {
        indexed_header(name, m)
    }
}

/// Staircase-versus-reference trace `t,u_sampled,u_reference`, sampled at
/// `points_per_interval` evenly spaced times per interval (left-closed) plus
/// the final time.
pub fn control_trace_csv(run: &ConvergenceRun, reference: &Reference, points_per_interval: usize) -> String {
    let sol = &run.output.solution;
    let m = sol.controls.first().map_or(0, DVector::len);
    let mut s = String::new();
    let mut header = vec!["t".to_string()];
    header.extend(suffixed("u_sampled", m));
    header.extend(suffixed("u_reference", m));
    push_row(&mut s, &header);
    let grid = &sol.grid;
    let mut emit = |t: f64, u: &DVector<f64>| {
        let mut row = vec![fmt_f64(t)];
        row.extend(u.iter().map(|&x| fmt_f64(x)));
        row.extend(reference.control.eval(t).iter().map(|&x| fmt_f64(x)));
        push_row(&mut s, &row);
    };
    let per = points_per_interval.max(1);
    for (i, u) in sol.controls.iter().enumerate() {
        for k in 0..per {
            let t = grid.times()[i] + grid.durations()[i] * k as f64 / per as f64;
            emit(t, u);
        }
    }
    emit(grid.end(), sol.controls.last().expect("non-empty grid"));
    s
}

/// `i,s_i,U_optimal,U_averaged,diff`.
pub fn compare_csv(report: &CompareReport) -> String {
    let m = report.rows.first().map_or(0, |r| r.optimal.len());
    let mut s = String::new();
    let mut header = vec!["i".to_string(), "s_i".into()];
    header.extend(suffixed("U_optimal", m));
    header.extend(suffixed("U_averaged", m));
    header.push("diff".into());
    push_row(&mut s, &header);
    for r in &report.rows {
        let mut row = vec![r.i.to_string(), fmt_f64(r.s)];
        row.extend(r.optimal.iter().map(|&x| fmt_f64(x)));
        row.extend(r.averaged.iter().map(|&x| fmt_f64(x)));
        row.push(fmt_f64(r.diff));
        push_row(&mut s, &row);
    }
    s
}

pub fn compare_json(report: &CompareReport) -> Value {
    json!({
        "rows": report.rows.iter().map(|r| json!({
            "i": r.i,
            "s_i": r.s,
            "U_optimal": vector_json(&r.optimal),
            "U_averaged": vector_json(&r.averaged),
            "diff": r.diff,
        })).collect::<Vec<_>>(),
        "cost_sampled": report.cost_sampled,
        "cost_averaged": report.cost_averaged,
    })
}

pub fn convergence_json(rows: &[ConvergenceRow], reference_cost: f64) -> Value {
    json!({
        "reference_cost": reference_cost,
        "rows": rows.iter().map(|r| json!({
            "N": r.n,
            "norm_delta": r.norm_delta,
            "max_node_err": r.max_node_err,
            "cost_sampled": r.cost_sampled,
            "cost_gap": r.cost_gap,
            "cost_averaged": r.cost_averaged,
        })).collect::<Vec<_>>(),
    })
}

pub fn oracle_report_json(report: &CrossCheckReport) -> Value {
    json!({
        "diffs": report.diffs.iter().map(|d| json!({
            "interval": d.interval,
            "component": d.component,
            "sweep": d.sweep,
            "qp": d.qp,
            "abs_diff": d.abs_diff,
        })).collect::<Vec<_>>(),
        "max_abs_diff": report.max_abs_diff,
        "max_rel_diff": report.max_rel_diff,
        "sweep_cost": report.sweep_cost,
        "qp_cost": report.qp_cost,
        "certificate_norm": report.certificate_norm,
        "hessian_min_eigenvalue": report.hessian_min_eigenvalue,
    })
}
