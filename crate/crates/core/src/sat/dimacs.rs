//! DIMACS CNF text and solver output in the SAT competition format.

use std::fmt::Write as _;

use super::{Cnf, Lit};
use crate::error::{Error, Result};

/// `p cnf <vars> <clauses>` followed by one 0-terminated clause per line.
pub fn write(cnf: &Cnf) -> String {
    let mut out = String::with_capacity(cnf.clauses.len() * 12 + 32);
    let _ = writeln!(out, "p cnf {} {}", cnf.num_vars, cnf.clauses.len());
    for c in &cnf.clauses {
        for l in c {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        col: 1,
        message: message.into(),
    }
}

/// Parses DIMACS CNF. Comments start with `c`; clauses may span lines.
pub fn parse(text: &str) -> Result<Cnf> {
    let mut header: Option<(u32, usize)> = None;
    let mut cnf = Cnf::default();
    let mut current: Vec<Lit> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| syntax(line_no, "bad variable count"))?;
                    let c = c.parse().map_err(|_| syntax(line_no, "bad clause count"))?;
                    header = Some((v, c));
                    cnf.num_vars = v;
                }
                _ => return Err(syntax(line_no, "expected `p cnf <vars> <clauses>`")),
            }
            continue;
        }
        if header.is_none() {
            return Err(syntax(line_no, "clause before header"));
        }
        for tok in trimmed.split_whitespace() {
            let x: i32 = tok
                .parse()
                .map_err(|_| syntax(line_no, format!("bad literal `{tok}`")))?;
            if x == 0 {
                cnf.add_clause(std::mem::take(&mut current));
            } else {
                current.push(Lit::from_dimacs(x));
            }
        }
    }
    if !current.is_empty() {
        cnf.add_clause(current);
    }
    let (vars, clauses) = header.ok_or_else(|| syntax(1, "missing header"))?;
    if cnf.num_vars > vars {
        return Err(syntax(1, format!("literal over variable {} exceeds header", cnf.num_vars)));
    }
    if cnf.clauses.len() != clauses {
        return Err(syntax(
            1,
            format!("header declares {clauses} clauses, found {}", cnf.clauses.len()),
        ));
    }
    Ok(cnf)
}

/// Verdict of a solver run in competition output format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverOutput {
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

/// Reads `s` and `v` lines. Variables missing from `v` lines are false.
pub fn parse_solver_output(text: &str, num_vars: u32) -> Result<SolverOutput> {
    let mut status = None;
    let mut model = vec![false; num_vars as usize];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            status = Some(s.trim().to_owned());
        } else if let Some(v) = line.strip_prefix("v ").or_else(|| (line == "v").then_some("")) {
            for tok in v.split_whitespace() {
                let x: i32 = tok
                    .parse()
                    .map_err(|_| syntax(i + 1, format!("bad literal `{tok}`")))?;
                if x == 0 {
                    continue;
                }
                let idx = x.unsigned_abs() as usize - 1;
                if idx < model.len() {
                    model[idx] = x > 0;
                }
            }
        }
    }
    Ok(match status.as_deref() {
        Some("SATISFIABLE") => SolverOutput::Sat(model),
        Some("UNSATISFIABLE") => SolverOutput::Unsat,
        _ => SolverOutput::Unknown,
    })
}

/// Formats a model as `v` lines, 10 literals per line, ending with `v 0`.
pub fn write_model(model: &[bool]) -> String {
    let mut out = String::new();
    for chunk in model.chunks(10).enumerate() {
        let (k, vals) = chunk;
        out.push('v');
        for (j, &b) in vals.iter().enumerate() {
            let v = (k * 10 + j + 1) as i64;
            let _ = write!(out, " {}", if b { v } else { -v });
        }
        out.push('\n');
    }
    out.push_str("v 0\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cnf = Cnf::new(3);
        cnf.add_clause([Lit::from_dimacs(1), Lit::from_dimacs(-3)]);
        cnf.add_clause([Lit::from_dimacs(2)]);
        let text = write(&cnf);
        assert!(text.starts_with("p cnf 3 2\n"));
        assert_eq!(parse(&text).unwrap(), cnf);
    }

    #[test]
    fn comments_and_multiline_clauses() {
        let cnf = parse("c hello\np cnf 2 2\n1\n-2 0 2\n0\n").unwrap();
        assert_eq!(cnf.clauses.len(), 2);
        assert_eq!(cnf.clauses[0], vec![Lit::from_dimacs(1), Lit::from_dimacs(-2)]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse("1 2 0\n").is_err());
        assert!(parse("p cnf 1 1\n1 2 0\n").is_err());
        assert!(parse("p cnf 2 2\n1 2 0\n").is_err());
        assert!(parse("p cnf 2 1\n1 x 0\n").is_err());
    }

    #[test]
    fn solver_output() {
        let out = "c x\ns SATISFIABLE\nv 1 -2\nv 3 0\n";
        assert_eq!(
            parse_solver_output(out, 3).unwrap(),
            SolverOutput::Sat(vec![true, false, true])
        );
        assert_eq!(parse_solver_output("s UNSATISFIABLE\n", 3).unwrap(), SolverOutput::Unsat);
        assert_eq!(parse_solver_output("", 3).unwrap(), SolverOutput::Unknown);
        let model = vec![true; 12];
        let text = format!("s SATISFIABLE\n{}", write_model(&model));
        assert_eq!(parse_solver_output(&text, 12).unwrap(), SolverOutput::Sat(model));
    }
}
