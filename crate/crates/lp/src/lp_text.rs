//! Plain LP-text dump of a model (objective, rows, bounds).
//!
//! Variables are written as `x<index>` and rows as `c<index>`, so a solution
//! read back by index maps directly onto the model.

use std::fmt::Write;

use crate::model::{Direction, LpModel, Sense};

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

fn write_terms(out: &mut String, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 x0");
    }
    for &(j, a) in terms {
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} x{j}", fmt_num(a.abs()));
    }
}

pub fn write_lp_text(model: &LpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ flexenv LP model\n");
    out.push_str(match model.direction {
        Direction::Maximize => "Maximize\n",
        Direction::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, &model.objective);
    if model.objective_constant != 0.0 {
        let _ = write!(out, "\n\\ objective constant {}", fmt_num(model.objective_constant));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        write_terms(&mut out, &c.terms);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (j, v) in model.vars.iter().enumerate() {
        let name = model.var_name(j);
        let comment = if name != format!("x{j}") {
            format!(" \\ {name}")
        } else {
            String::new()
        };
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " x{j} free{comment}");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " x{j} = {}{comment}", fmt_num(v.lower));
            }
            _ => {
                let lo = if v.lower.is_finite() { fmt_num(v.lower) } else { "-inf".into() };
                let hi = if v.upper.is_finite() { fmt_num(v.upper) } else { "+inf".into() };
                let _ = writeln!(out, " {lo} <= x{j} <= {hi}{comment}");
            }
        }
    }
    out.push_str("End\n");
    out
}
