//! Line-oriented text format for archiving and replaying problems. Floats
//! are written in shortest round-trip form, so a dump reloads bit-exactly.
//!
//! ```text
//! sdp 1
//! blocks 3 2
//! free 1
//! objective 0e0
//! e 0 0 1 2e0
//! f 0 -1e0
//! constraint 1e0
//! e 1 0 0 1e0
//! end
//! ```

use super::{LinearForm, SdpError, SdpProblem};

pub fn dump_problem(problem: &SdpProblem) -> String {
    let mut out = String::from("sdp 1\nblocks");
    for d in &problem.block_dims {
        out.push_str(&format!(" {d}"));
    }
    out.push_str(&format!("\nfree {}\n", problem.num_free));
    out.push_str(&format!("objective {:e}\n", problem.objective_constant));
    write_form(&mut out, &problem.objective);
    for c in &problem.constraints {
        out.push_str(&format!("constraint {:e}\n", c.rhs));
        write_form(&mut out, &c.form);
    }
    out.push_str("end\n");
    out
}

fn write_form(out: &mut String, form: &LinearForm) {
    for e in &form.entries {
        out.push_str(&format!("e {} {} {} {:e}\n", e.block, e.i, e.j, e.coef));
    }
    for &(k, c) in &form.free {
        out.push_str(&format!("f {k} {c:e}\n"));
    }
}

pub fn load_problem(text: &str) -> Result<SdpProblem, SdpError> {
    let err = |line: usize, message: &str| SdpError::Dump {
        line: line + 1,
        message: message.into(),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<&str>), SdpError> {
        lines
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| err(usize::MAX - 1, &format!("unexpected end of input, expected {what}")))
    };
    fn num<T: std::str::FromStr>(tok: Option<&&str>, line: usize) -> Result<T, SdpError> {
        tok.and_then(|t| t.parse().ok()).ok_or(SdpError::Dump {
            line: line + 1,
            message: format!("bad number {:?}", tok.copied().unwrap_or("")),
        })
    }

    let (n, head) = next("header")?;
    if head != ["sdp", "1"] {
        return Err(err(n, "expected header 'sdp 1'"));
    }
    let (n, toks) = next("blocks")?;
    if toks.first() != Some(&"blocks") {
        return Err(err(n, "expected 'blocks'"));
    }
    let dims = toks[1..]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| err(n, "bad block size")))
        .collect::<Result<Vec<_>, _>>()?;
    let (n, toks) = next("free")?;
    if toks.first() != Some(&"free") {
        return Err(err(n, "expected 'free'"));
    }
    let mut problem = SdpProblem::new(dims, num(toks.get(1), n)?);

    enum Target {
        None,
        Objective,
        Constraint,
    }
    let mut target = Target::None;
    loop {
        let (n, toks) = next("'end'")?;
        match toks.first().copied() {
            Some("end") => break,
            Some("objective") => {
                problem.objective_constant = num(toks.get(1), n)?;
                target = Target::Objective;
            }
            Some("constraint") => {
                problem.add_constraint(LinearForm::new(), num(toks.get(1), n)?);
                target = Target::Constraint;
            }
            Some(kind @ ("e" | "f")) => {
                let form = match target {
                    Target::None => return Err(err(n, "term outside objective/constraint")),
                    Target::Objective => &mut problem.objective,
                    Target::Constraint => &mut problem.constraints.last_mut().unwrap().form,
                };
                if kind == "e" {
                    if toks.len() != 5 {
                        return Err(err(n, "entry needs block, i, j, coefficient"));
                    }
                    form.add_entry(
                        num(toks.get(1), n)?,
                        num(toks.get(2), n)?,
                        num(toks.get(3), n)?,
                        num(toks.get(4), n)?,
                    );
                } else {
                    if toks.len() != 3 {
                        return Err(err(n, "free term needs index, coefficient"));
                    }
                    form.add_free(num(toks.get(1), n)?, num(toks.get(2), n)?);
                }
            }
            _ => return Err(err(n, "unknown record")),
        }
    }
    problem.validate()?;
    Ok(problem)
}
