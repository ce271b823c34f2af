use std::fmt::Write;

use super::SrpiRun;
use crate::poly::{parse_polynomial, Polynomial};
use crate::sim::sig12;

/// Iteration table: `i,objective,delta,min_gram_eig`. Row 0 is the
/// initialization and has no evaluation Gram matrix.
pub fn iteration_csv(run: &SrpiRun) -> String {
    let mut s = String::from("i,objective,delta,min_gram_eig\n");
    for r in &run.records {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.index,
            sig12(r.objective),
            sig12(r.delta),
            if r.min_eig.is_finite() { sig12(r.min_eig) } else { String::new() }
        );
    }
    s
}

/// Plain structured-text run manifest with the configuration echoed
/// verbatim.
pub fn manifest(run: &SrpiRun, model_name: &str, config_echo: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "model = {model_name}");
    let _ = writeln!(s, "stop = {}", run.stop);
    let _ = writeln!(s, "iterations = {}", run.records.len().saturating_sub(1));
    if let Some(e) = &run.failure {
        let _ = writeln!(s, "failure_stage = {}", e.stage());
        let _ = writeln!(s, "failure = {e}");
    }
    let _ = writeln!(s, "stop_threshold = {:e}", run.threshold);
    let _ = writeln!(s, "init_inflation = {}", run.init.inflation);
    let _ = writeln!(s, "init_slack = {:e}", run.init.slack);
    let _ = writeln!(
        s,
        "scaling = {}",
        run.scaling.d.iter().map(|d| format!("{d:e}")).collect::<Vec<_>>().join(" ")
    );
    if let Some(b) = &run.barrier {
        let _ = writeln!(s, "barrier_margin = {:e}", b.margin);
        let _ = writeln!(s, "barrier_zcbf_certified = {}", b.zcbf.is_some());
    }
    let total: f64 = run.solves.iter().map(|x| x.seconds).sum();
    let _ = writeln!(s, "solver_seconds = {total:.3}");
    let _ = writeln!(s, "solves = {}", run.solves.len());
    let _ = writeln!(s, "\n[config]");
    s.push_str(config_echo.trim_end());
    s.push('\n');
    for r in &run.records {
        let _ = writeln!(s, "\n[iteration.{}]", r.index);
        let _ = writeln!(s, "objective = {:e}", r.objective);
        let _ = writeln!(s, "delta = {:e}", r.delta);
        let _ = writeln!(s, "slack = {:e}", r.slack);
        let _ = writeln!(s, "beta_u = {:e}", r.beta_u);
        let _ = writeln!(s, "min_gram_eig = {:e}", r.min_eig);
        if let Some(c) = r.chain_slack {
            let _ = writeln!(s, "chain_slack = {c:e}");
        }
        let _ = writeln!(s, "guard = {}", r.guard);
        let _ = writeln!(s, "held = {}", r.held);
        if let Some(st) = &r.stop {
            let _ = writeln!(s, "stop_certified = {}", st.certified);
            if let Some(c) = &st.certificate {
                let _ = writeln!(s, "stop_min_eig = {:e}", c.min_eig);
                let _ = writeln!(s, "stop_reconstruction = {:e}", c.reconstruction_error);
            }
        }
        let _ = writeln!(s, "seconds = {:.3}", r.seconds);
        for st in &r.solves {
            let _ = writeln!(
                s,
                "solve = {} {} certified={} iterations={} seconds={:.3}",
                st.label, st.status, st.certified, st.iterations, st.seconds
            );
        }
    }
    s
}

/// `name = polynomial` lines preceded by `nvars = n`.
pub fn polynomial_file(nvars: usize, entries: &[(String, &Polynomial)]) -> String {
    let mut s = format!("nvars = {nvars}\n");
    for (name, p) in entries {
        let _ = writeln!(s, "{name} = {p}");
    }
    s
}

/// Parses `polynomial_file` output; `#` starts a comment line.
pub fn parse_polynomial_file(text: &str) -> Result<(usize, Vec<(String, Polynomial)>), String> {
    let mut nvars = None;
    let mut entries = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'name = value'", k + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "nvars" {
            nvars = Some(
                value
                    .parse::<usize>()
                    .map_err(|_| format!("line {}: bad nvars", k + 1))?,
            );
            continue;
        }
        let n = nvars.ok_or_else(|| format!("line {}: nvars must come first", k + 1))?;
        let p = parse_polynomial(value, n).map_err(|e| format!("line {}: {e}", k + 1))?;
        entries.push((key.to_string(), p));
    }
    Ok((nvars.ok_or("missing nvars")?, entries))
}
