//! LP-format text interchange and the paired solution-file format.
//!
//! The writer emits a conservative LP-style dialect: `Minimize` /
//! `Subject To` / `Bounds` / `Binary` / `General` / `End`, variables named
//! `x{index}`, floats printed with Rust's shortest round-trip formatting. The
//! parser is tolerant (section aliases, multi-line rows, `<`/`=<` variants)
//! so the helper solver binary and third-party tools can both consume it.
//! Lazy flags are not expressible in the dialect; lazy rows are written as
//! ordinary rows, which leaves solve semantics unchanged.
//!
//! Solution files are plain text:
//! ```text
//! status optimal
//! objective -6
//! x0 4
//! x1 2
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{CcspError, Result};

use super::{LinearModel, Sense, SolveOutcome, SolveStatus};

/// Serializes a model to the LP dialect.
pub fn write_lp(model: &LinearModel) -> Result<String> {
    model.validate()?;
    let mut out = String::new();
    out.push_str("\\ ccsp linear model\nMinimize\n obj:");
    let mut wrote_term = false;
    for (j, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            write_term(&mut out, c, j, !wrote_term);
            wrote_term = true;
        }
    }
    if !wrote_term && !model.variables.is_empty() {
        out.push_str(" 0 x0");
    }
    out.push_str("\nSubject To\n");
    for (i, row) in model.rows.iter().enumerate() {
        // Accumulate duplicate mentions so each variable appears once.
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for &(j, a) in &row.coeffs {
            *acc.entry(j).or_insert(0.0) += a;
        }
        let mut indices: Vec<usize> = acc.keys().copied().collect();
        indices.sort_unstable();
        let _ = write!(out, " c{i}:");
        let mut first = true;
        for j in indices {
            let a = acc[&j];
            if a != 0.0 {
                write_term(&mut out, a, j, first);
                first = false;
            }
        }
        if first {
            // Constant row; keep it syntactically valid.
            out.push_str(" 0 x0");
        }
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {sense} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, v) in model.variables.iter().enumerate() {
        if v.lower == v.upper {
            let _ = writeln!(out, " x{j} = {}", v.lower);
        } else if v.lower.is_infinite() && v.upper.is_infinite() {
            let _ = writeln!(out, " x{j} free");
        } else {
            let lo = bound_token(v.lower);
            let hi = bound_token(v.upper);
            let _ = writeln!(out, " {lo} <= x{j} <= {hi}");
        }
    }
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integral && v.lower == 0.0 && v.upper == 1.0)
        .map(|(j, _)| j)
        .collect();
    let generals: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integral && !(v.lower == 0.0 && v.upper == 1.0))
        .map(|(j, _)| j)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for j in binaries {
            let _ = writeln!(out, " x{j}");
        }
    }
    if !generals.is_empty() {
        out.push_str("General\n");
        for j in generals {
            let _ = writeln!(out, " x{j}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

fn write_term(out: &mut String, coeff: f64, var: usize, first: bool) {
    if first {
        if coeff < 0.0 {
            let _ = write!(out, " - {} x{var}", -coeff);
        } else {
            let _ = write!(out, " {coeff} x{var}");
        }
    } else if coeff < 0.0 {
        let _ = write!(out, " - {} x{var}", -coeff);
    } else {
        let _ = write!(out, " + {coeff} x{var}");
    }
}

fn bound_token(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Binary,
    General,
    Done,
}

/// Parses the LP dialect back into a model. Variables are registered on
/// first mention; names must be `x{index}`-style or any identifier (indices
/// are assigned in encounter order for foreign names).
pub fn parse_lp(text: &str) -> Result<LinearModel> {
    let mut model = LinearModel::new();
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut section = Section::Preamble;
    let mut pending: Vec<String> = Vec::new();

    let mut intern = |model: &mut LinearModel, name: &str| -> usize {
        if let Some(&j) = names.get(name) {
            return j;
        }
        // LP-format default bounds are [0, +inf).
        let j = model.add_var(0.0, f64::INFINITY, false, 0.0);
        names.insert(name.to_string(), j);
        j
    };

    for raw_line in text.lines() {
        let line = match raw_line.find('\\') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(next) = section_header(trimmed) {
            if !pending.is_empty() {
                finish_statement(&mut model, &mut intern, section, &pending)?;
                pending.clear();
            }
            section = next;
            continue;
        }
        match section {
            Section::Preamble | Section::Done => {}
            Section::Objective | Section::Rows => {
                pending.extend(tokenize(trimmed));
                // A statement is complete once a sense and rhs are present
                // (objective lines have no sense; they flush at the section
                // switch).
                if section == Section::Rows && statement_complete(&pending) {
                    finish_statement(&mut model, &mut intern, section, &pending)?;
                    pending.clear();
                }
            }
            Section::Bounds => {
                let tokens = tokenize(trimmed);
                parse_bound_line(&mut model, &mut intern, &tokens)?;
            }
            Section::Binary | Section::General => {
                for token in tokenize(trimmed) {
                    let j = intern(&mut model, &token);
                    let v = &mut model.variables[j];
                    v.integral = true;
                    if section == Section::Binary {
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                }
            }
        }
    }
    if !pending.is_empty() {
        finish_statement(&mut model, &mut intern, section, &pending)?;
    }
    model.validate()?;
    Ok(model)
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.to_ascii_lowercase();
    let compact: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    match compact.as_str() {
        "minimize" | "min" | "minimise" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "general" | "generals" | "gen" | "integer" | "integers" => Some(Section::General),
        "end" => Some(Section::Done),
        _ => None,
    }
}

/// Splits a line into tokens, keeping `<=`, `>=`, `=` and splitting signs off
/// coefficients.
fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for piece in line.split_whitespace() {
        let mut rest = piece;
        // Peel label prefixes like "c3:".
        if let Some(pos) = rest.find(':') {
            tokens.push(rest[..=pos].to_string());
            rest = &rest[pos + 1..];
            if rest.is_empty() {
                continue;
            }
        }
        tokens.push(rest.to_string());
    }
    tokens
}

fn is_sense(token: &str) -> Option<Sense> {
    match token {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

fn statement_complete(tokens: &[String]) -> bool {
    tokens
        .iter()
        .position(|t| is_sense(t).is_some())
        .is_some_and(|pos| pos + 1 < tokens.len())
}

fn parse_number(token: &str) -> Option<f64> {
    match token.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => token.parse::<f64>().ok(),
    }
}

/// Parses `[label:] ±c x ±c x … [sense rhs]`; objective statements carry no
/// sense part.
fn finish_statement(
    model: &mut LinearModel,
    intern: &mut impl FnMut(&mut LinearModel, &str) -> usize,
    section: Section,
    tokens: &[String],
) -> Result<()> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut sense: Option<Sense> = None;
    let mut rhs: Option<f64> = None;
    let mut sign = 1.0f64;
    let mut coeff: Option<f64> = None;

    for token in tokens {
        if token.ends_with(':') {
            continue; // label
        }
        if let Some(s) = is_sense(token) {
            sense = Some(s);
            continue;
        }
        if sense.is_some() {
            let value = parse_number(token).ok_or_else(|| bad_token(token))?;
            rhs = Some(sign * value);
            sign = 1.0;
            continue;
        }
        match token.as_str() {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                if let Some(value) = parse_number(token) {
                    // Numeric tokens multiply into the pending coefficient.
                    let base = coeff.take().unwrap_or(1.0);
                    coeff = Some(base * sign * value);
                    sign = 1.0;
                } else {
                    let j = intern(model, token);
                    terms.push((j, sign * coeff.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }

    match section {
        Section::Objective => {
            for (j, c) in terms {
                model.objective[j] += c;
            }
            Ok(())
        }
        Section::Rows => {
            let sense = sense.ok_or_else(|| {
                CcspError::Adapter {
                    message: "constraint without sense".into(),
                    stdout: String::new(),
                    stderr: tokens.join(" "),
                }
            })?;
            let rhs = rhs.ok_or_else(|| bad_token("<missing rhs>"))?;
            model.add_row(terms, sense, rhs);
            Ok(())
        }
        _ => Ok(()),
    }
}

fn bad_token(token: &str) -> CcspError {
    CcspError::Adapter {
        message: format!("unparseable token `{token}` in LP file"),
        stdout: String::new(),
        stderr: String::new(),
    }
}

/// Bound line forms: `a <= x <= b`, `x <= b`, `x >= a`, `x = a`, `x free`.
fn parse_bound_line(
    model: &mut LinearModel,
    intern: &mut impl FnMut(&mut LinearModel, &str) -> usize,
    tokens: &[String],
) -> Result<()> {
    let t: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
    match t.as_slice() {
        [name, word] if word.eq_ignore_ascii_case("free") => {
            let j = intern(model, name);
            model.variables[j].lower = f64::NEG_INFINITY;
            model.variables[j].upper = f64::INFINITY;
            Ok(())
        }
        [lo, le1, name, le2, hi]
            if is_sense(le1) == Some(Sense::Le) && is_sense(le2) == Some(Sense::Le) =>
        {
            let j = intern(model, name);
            model.variables[j].lower = parse_number(lo).ok_or_else(|| bad_token(lo))?;
            model.variables[j].upper = parse_number(hi).ok_or_else(|| bad_token(hi))?;
            Ok(())
        }
        [name, sense, value] if is_sense(sense).is_some() => {
            let j = intern(model, name);
            let v = parse_number(value).ok_or_else(|| bad_token(value))?;
            match is_sense(sense).unwrap() {
                Sense::Le => model.variables[j].upper = v,
                Sense::Ge => model.variables[j].lower = v,
                Sense::Eq => {
                    model.variables[j].lower = v;
                    model.variables[j].upper = v;
                }
            }
            Ok(())
        }
        _ => Err(CcspError::Adapter {
            message: format!("unparseable bounds line: {}", tokens.join(" ")),
            stdout: String::new(),
            stderr: String::new(),
        }),
    }
}

/// Serializes a solve outcome for the solution-file contract.
pub fn write_solution(outcome: &SolveOutcome) -> String {
    let mut out = format!("status {}\n", outcome.status);
    if let Some(obj) = outcome.objective {
        let _ = writeln!(out, "objective {obj}");
    }
    if let Some(point) = &outcome.point {
        for (j, v) in point.iter().enumerate() {
            let _ = writeln!(out, "x{j} {v}");
        }
    }
    out
}

/// Parses a solution file against the model that produced the LP file.
/// Variables are matched by `x{index}` name; missing variables default to 0.
/// When a point is present the objective is recomputed from it so adapter
/// results agree numerically with the built-in backend.
pub fn parse_solution(text: &str, model: &LinearModel) -> Result<SolveOutcome> {
    let mut status: Option<SolveStatus> = None;
    let mut objective: Option<f64> = None;
    let mut point = vec![0.0; model.num_vars()];
    let mut saw_var = false;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap();
        let value = parts.next().ok_or_else(|| CcspError::Adapter {
            message: format!("solution line missing value: `{line}`"),
            stdout: String::new(),
            stderr: String::new(),
        })?;
        match key {
            "status" => {
                status = Some(match value {
                    "optimal" => SolveStatus::Optimal,
                    "infeasible" => SolveStatus::Infeasible,
                    "unbounded" => SolveStatus::Unbounded,
                    "time_limit" => SolveStatus::TimeLimit,
                    "node_limit" => SolveStatus::NodeLimit,
                    "gap_limit" => SolveStatus::GapLimit,
                    other => {
                        return Err(CcspError::Adapter {
                            message: format!("unknown solution status `{other}`"),
                            stdout: String::new(),
                            stderr: String::new(),
                        })
                    }
                });
            }
            "objective" => {
                objective = Some(parse_number(value).ok_or_else(|| bad_token(value))?);
            }
            name => {
                let index: usize = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| CcspError::Adapter {
                        message: format!("unknown variable `{name}` in solution file"),
                        stdout: String::new(),
                        stderr: String::new(),
                    })?;
                if index >= point.len() {
                    return Err(CcspError::Adapter {
                        message: format!("variable `{name}` out of range"),
                        stdout: String::new(),
                        stderr: String::new(),
                    });
                }
                point[index] = parse_number(value).ok_or_else(|| bad_token(value))?;
                saw_var = true;
            }
        }
    }

    let status = status.ok_or_else(|| CcspError::Adapter {
        message: "solution file missing status line".into(),
        stdout: String::new(),
        stderr: String::new(),
    })?;
    let has_point = saw_var || (status == SolveStatus::Optimal && model.num_vars() == 0);
    let (point, objective) = if has_point {
        let obj = model.objective_value(&point);
        (Some(point), Some(obj))
    } else {
        (None, objective)
    };
    Ok(SolveOutcome {
        status,
        point,
        objective,
        dual_bound: objective,
        elapsed_s: 0.0,
        nodes: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{solve_model, LinearModel, Sense, SolveStatus, SolverParams};
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_model() -> LinearModel {
        let mut model = LinearModel::new();
        let x = model.add_var(0.0, 10.0, false, -1.5);
        let y = model.add_var(-2.0, f64::INFINITY, false, 2.0);
        let z = model.add_var(0.0, 1.0, true, -1.0);
        model.add_row(vec![(x, 1.0), (y, 2.0)], Sense::Le, 5.5);
        model.add_row(vec![(y, 1.0), (z, -3.0)], Sense::Ge, -4.0);
        model.add_row(vec![(x, 1.0), (y, 1.0), (z, 1.0)], Sense::Eq, 3.0);
        model
    }

    #[test]
    fn lp_round_trip_preserves_solutions() {
        let model = sample_model();
        let text = write_lp(&model).unwrap();
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(parsed.num_vars(), model.num_vars());
        assert_eq!(parsed.rows.len(), model.rows.len());
        let a = solve_model(&model, &SolverParams::exact()).unwrap();
        let b = solve_model(&parsed, &SolverParams::exact()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(
            a.objective.unwrap(),
            b.objective.unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn writer_emits_expected_dialect() {
        let mut model = LinearModel::new();
        let x = model.add_var(0.0, 4.0, false, 1.0);
        let y = model.add_var(0.0, 1.0, true, -2.5);
        model.add_row(vec![(x, 1.0), (y, -1.0)], Sense::Ge, 0.5);
        let text = write_lp(&model).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains("obj: 1 x0 - 2.5 x1"));
        assert!(text.contains("c0: 1 x0 - 1 x1 >= 0.5"));
        assert!(text.contains("0 <= x0 <= 4"));
        assert!(text.contains("Binary"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn parser_tolerates_variations() {
        let text = "\
Minimise
 profit: 2 a + 3 b
Such That
 cap: a + b =< 4
 floor: a => 1
Bounds
 a free
 0 <= b <= 10
Integers
 b
End";
        let model = parse_lp(text).unwrap();
        assert_eq!(model.num_vars(), 2);
        assert_eq!(model.rows.len(), 2);
        assert!(model.variables[1].integral);
        assert_eq!(model.variables[0].lower, f64::NEG_INFINITY);
    }

    #[test]
    fn multi_line_rows_parse() {
        let text = "Minimize\n obj: 1 x0\nSubject To\n c0: 1 x0\n + 2 x1 <= 4\nBounds\n 0 <= x0 <= 9\n 0 <= x1 <= 9\nEnd\n";
        let model = parse_lp(text).unwrap();
        assert_eq!(model.rows.len(), 1);
        assert_eq!(model.rows[0].coeffs.len(), 2);
    }

    #[test]
    fn solution_round_trip_and_objective_recompute() {
        let model = sample_model();
        let out = solve_model(&model, &SolverParams::exact()).unwrap();
        let text = write_solution(&out);
        let parsed = parse_solution(&text, &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(
            parsed.objective.unwrap(),
            out.objective.unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn solution_parser_rejects_garbage() {
        let model = sample_model();
        assert!(parse_solution("status martian\n", &model).is_err());
        assert!(parse_solution("x0 1\n", &model).is_err()); // no status
        assert!(parse_solution("status optimal\nq9 1\n", &model).is_err());
        assert!(parse_solution("status optimal\nx99 1\n", &model).is_err());
    }

    #[test]
    fn fixed_variable_bounds_round_trip() {
        let mut model = LinearModel::new();
        model.add_var(2.5, 2.5, false, 1.0);
        let text = write_lp(&model).unwrap();
        assert!(text.contains("x0 = 2.5"));
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(parsed.variables[0].lower, 2.5);
        assert_eq!(parsed.variables[0].upper, 2.5);
    }
}
