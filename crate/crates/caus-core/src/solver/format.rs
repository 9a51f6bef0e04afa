//! Neutral constraint-list text format for problem dump/load.
//!
//! One declaration per line, whitespace-separated:
//!
//! ```text
//! caus-lp 1
//! minimize
//! var <index> <continuous|binary> <lb> <ub> <objective-coeff>
//! row <le|ge|eq> <rhs> <col>:<coeff> [<col>:<coeff> ...]
//! end
//! ```
//!
//! Floats are written with full round-trip precision. `inf`/`-inf` denote
//! infinite bounds. Lines starting with `#` are comments.

use super::{ConstraintSense, LinearProgram, ObjectiveSense, SolverError, VarKind};

fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        let mut buf = ryu_like(x);
        if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN")
        {
            buf.push_str(".0");
        }
        buf
    }
}

// Rust's default float Display is shortest-round-trip, which is what we need.
fn ryu_like(x: f64) -> String {
    format!("{x}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64, SolverError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|e| SolverError::ParseError {
            line,
            message: format!("bad float '{s}': {e}"),
        }),
    }
}

/// Serialize a problem to the text format.
pub fn dump_lp(p: &LinearProgram) -> String {
    let mut out = String::from("caus-lp 1\n");
    out.push_str(match p.sense {
        ObjectiveSense::Minimize => "minimize\n",
        ObjectiveSense::Maximize => "maximize\n",
    });
    for i in 0..p.num_vars() {
        let kind = match p.kinds[i] {
            VarKind::Continuous => "continuous",
            VarKind::Binary => "binary",
        };
        out.push_str(&format!(
            "var {i} {kind} {} {} {}\n",
            fmt_f64(p.lower[i]),
            fmt_f64(p.upper[i]),
            fmt_f64(p.objective[i])
        ));
    }
    // Group triplets by row, preserving row order.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_rows()];
    for &(r, c, v) in &p.triplets {
        rows[r].push((c, v));
    }
    for (r, terms) in rows.iter().enumerate() {
        let sense = match p.senses[r] {
            ConstraintSense::Le => "le",
            ConstraintSense::Ge => "ge",
            ConstraintSense::Eq => "eq",
        };
        out.push_str(&format!("row {sense} {}", fmt_f64(p.rhs[r])));
        for &(c, v) in terms {
            out.push_str(&format!(" {c}:{}", fmt_f64(v)));
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

/// Parse a problem from the text format.
pub fn parse_lp(text: &str) -> Result<LinearProgram, SolverError> {
    let mut p = LinearProgram::minimize();
    let mut saw_header = false;
    let mut saw_end = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if saw_end {
            return Err(SolverError::ParseError { line, message: "content after 'end'".into() });
        }
        let mut tok = trimmed.split_whitespace();
        let head = tok.next().unwrap();
        if !saw_header {
            if head != "caus-lp" || tok.next() != Some("1") {
                return Err(SolverError::ParseError {
                    line,
                    message: "expected header 'caus-lp 1'".into(),
                });
            }
            saw_header = true;
            continue;
        }
        match head {
            "minimize" => p.sense = ObjectiveSense::Minimize,
            "maximize" => p.sense = ObjectiveSense::Maximize,
            "var" => {
                let idx: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| SolverError::ParseError { line, message: "bad var index".into() })?;
                if idx != p.num_vars() {
                    return Err(SolverError::ParseError {
                        line,
                        message: format!("var index {idx} out of order (expected {})", p.num_vars()),
                    });
                }
                let kind = match tok.next() {
                    Some("continuous") => VarKind::Continuous,
                    Some("binary") => VarKind::Binary,
                    other => {
                        return Err(SolverError::ParseError {
                            line,
                            message: format!("bad var kind {other:?}"),
                        })
                    }
                };
                let lb = parse_f64(
                    tok.next().ok_or(SolverError::ParseError { line, message: "missing lb".into() })?,
                    line,
                )?;
                let ub = parse_f64(
                    tok.next().ok_or(SolverError::ParseError { line, message: "missing ub".into() })?,
                    line,
                )?;
                let obj = parse_f64(
                    tok.next().ok_or(SolverError::ParseError { line, message: "missing obj".into() })?,
                    line,
                )?;
                p.add_var(obj, lb, ub, kind);
            }
            "row" => {
                let sense = match tok.next() {
                    Some("le") => ConstraintSense::Le,
                    Some("ge") => ConstraintSense::Ge,
                    Some("eq") => ConstraintSense::Eq,
                    other => {
                        return Err(SolverError::ParseError {
                            line,
                            message: format!("bad row sense {other:?}"),
                        })
                    }
                };
                let rhs = parse_f64(
                    tok.next().ok_or(SolverError::ParseError { line, message: "missing rhs".into() })?,
                    line,
                )?;
                let mut terms = Vec::new();
                for t in tok {
                    let (col, coeff) = t.split_once(':').ok_or_else(|| SolverError::ParseError {
                        line,
                        message: format!("bad term '{t}' (expected col:coeff)"),
                    })?;
                    let col: usize = col.parse().map_err(|_| SolverError::ParseError {
                        line,
                        message: format!("bad column '{col}'"),
                    })?;
                    terms.push((col, parse_f64(coeff, line)?));
                }
                p.add_row(&terms, sense, rhs);
            }
            "end" => saw_end = true,
            other => {
                return Err(SolverError::ParseError {
                    line,
                    message: format!("unknown directive '{other}'"),
                })
            }
        }
    }
    if !saw_end {
        return Err(SolverError::ParseError { line: 0, message: "missing 'end'".into() });
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_parse_round_trip_preserves_everything() {
        let mut lp = LinearProgram::maximize();
        let x = lp.add_var(1.5, 0.0, f64::INFINITY, VarKind::Continuous);
        let b = lp.add_var(-0.25, 0.0, 1.0, VarKind::Binary);
        let y = lp.add_var(0.1234567890123456789, f64::NEG_INFINITY, 2.5, VarKind::Continuous);
        lp.add_row(&[(x, 3.0), (b, -1.0)], ConstraintSense::Le, 6.5);
        lp.add_row(&[(y, 1.0)], ConstraintSense::Eq, 0.1);
        lp.add_row(&[(x, 1.0), (y, 1.0), (b, 1.0)], ConstraintSense::Ge, -2.0);
        let text = dump_lp(&lp);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.sense, lp.sense);
        assert_eq!(back.objective, lp.objective);
        assert_eq!(back.lower, lp.lower);
        assert_eq!(back.upper, lp.upper);
        assert_eq!(back.kinds, lp.kinds);
        assert_eq!(back.senses, lp.senses);
        assert_eq!(back.rhs, lp.rhs);
        assert_eq!(back.triplets, lp.triplets);
        // And the re-dump is byte-identical.
        assert_eq!(dump_lp(&back), text);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "caus-lp 1\nminimize\nvar 0 continuous 0.0 oops 1.0\nend\n";
        match parse_lp(text) {
            Err(SolverError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
