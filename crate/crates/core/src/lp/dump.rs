//! Line-oriented text dump of a [`LinearProgram`], stable enough to diff.
//!
//! ```text
//! LP vars 2 ineq 1 eq 0
//! [objective]
//!        0                        1
//! [bounds]
//!        0                        0                       10
//! [ineq]
//!        0        0                        1
//! [b_ub]
//!        0                        3
//! [eq]
//! [b_eq]
//! END
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so reading a dump back
//! reproduces the program exactly.

use std::io::{self, BufRead, Write};

use super::{LinearProgram, LpError, Triplet};

pub fn write_dump<W: Write>(lp: &LinearProgram, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "LP vars {} ineq {} eq {}",
        lp.num_vars(),
        lp.num_ineq(),
        lp.num_eq()
    )?;
    writeln!(w, "[objective]")?;
    for (j, c) in lp.objective.iter().enumerate() {
        writeln!(w, "{j:>8} {c:>24}")?;
    }
    writeln!(w, "[bounds]")?;
    for (j, (l, u)) in lp.lower.iter().zip(&lp.upper).enumerate() {
        writeln!(w, "{j:>8} {l:>24} {u:>24}")?;
    }
    for (name, entries, rhs, rhs_name) in [
        ("[ineq]", &lp.ineq, &lp.b_ub, "[b_ub]"),
        ("[eq]", &lp.eq, &lp.b_eq, "[b_eq]"),
    ] {
        writeln!(w, "{name}")?;
        for t in entries {
            writeln!(w, "{:>8} {:>8} {:>24}", t.row, t.col, t.coeff)?;
        }
        writeln!(w, "{rhs_name}")?;
        for (i, b) in rhs.iter().enumerate() {
            writeln!(w, "{i:>8} {b:>24}")?;
        }
    }
    writeln!(w, "END")
}

pub fn read_dump<R: BufRead>(r: R) -> Result<LinearProgram, LpError> {
    let bad = |line: usize, msg: &str| LpError::Malformed(format!("dump line {}: {msg}", line + 1));
    let mut lp = LinearProgram::new();
    let mut section = String::new();
    let mut saw_end = false;
    for (ln, line) in r.lines().enumerate() {
        let line = line.map_err(|e| bad(ln, &e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if ln == 0 {
            if !line.starts_with("LP ") {
                return Err(bad(ln, "missing LP header"));
            }
            continue;
        }
        if line == "END" {
            saw_end = true;
            break;
        }
        if line.starts_with('[') {
            section = line.to_string();
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| -> Result<f64, LpError> {
            fields
                .get(k)
                .ok_or_else(|| bad(ln, "missing field"))?
                .parse::<f64>()
                .map_err(|_| bad(ln, "bad number"))
        };
        let idx = |k: usize| -> Result<usize, LpError> {
            fields
                .get(k)
                .ok_or_else(|| bad(ln, "missing field"))?
                .parse::<usize>()
                .map_err(|_| bad(ln, "bad index"))
        };
        match section.as_str() {
            "[objective]" => lp.objective.push(num(1)?),
            "[bounds]" => {
                lp.lower.push(num(1)?);
                lp.upper.push(num(2)?);
            }
            "[ineq]" | "[eq]" => {
                let t = Triplet {
                    row: idx(0)?,
                    col: idx(1)?,
                    coeff: num(2)?,
                };
                if section == "[ineq]" {
                    lp.ineq.push(t);
                } else {
                    lp.eq.push(t);
                }
            }
            "[b_ub]" => lp.b_ub.push(num(1)?),
            "[b_eq]" => lp.b_eq.push(num(1)?),
            _ => return Err(bad(ln, "data outside a section")),
        }
    }
    if !saw_end {
        return Err(LpError::Malformed("dump is missing END".into()));
    }
    lp.validate()?;
    Ok(lp)
}
