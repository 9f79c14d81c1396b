//! CPLEX LP text format.
//!
//! Only the subset needed to carry a [`LinearProgram`] is produced and accepted:
//! a `Minimize` objective, `Subject To` rows with `<=`, `>=` or `=`, and a `Bounds`
//! section declaring every variable non-negative. Coefficients are printed with
//! Rust's shortest round-trip formatting so a reimport is bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{LinearProgram, Relation, VarId};
use crate::error::LpError;

const TERMS_PER_LINE: usize = 6;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn write_terms(out: &mut String, names: &[String], terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        // An empty expression is spelled as a zero multiple of some variable.
        let _ = write!(out, "0 {}", names[0]);
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        if k == 0 {
            if c < 0.0 {
                let _ = write!(out, "- {} {}", -c, names[v.0]);
            } else {
                let _ = write!(out, "{} {}", c, names[v.0]);
            }
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", -c, names[v.0]);
        } else {
            let _ = write!(out, " + {} {}", c, names[v.0]);
        }
    }
}

pub fn export_lp(lp: &LinearProgram) -> String {
    let names: Vec<String> = lp.variable_names().iter().map(|n| sanitize(n)).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ {} variables, {} constraints, {} nonzeros",
        lp.num_variables(),
        lp.num_constraints(),
        lp.nonzeros()
    );
    out.push_str("Minimize\n obj: ");
    let objective: Vec<(VarId, f64)> =
        lp.objective().iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, &c)| (VarId(j), c)).collect();
    if names.is_empty() {
        out.push('\n');
    } else {
        write_terms(&mut out, &names, &objective);
        out.push('\n');
    }
    out.push_str("Subject To\n");
    for row in lp.constraints() {
        let _ = write!(out, " {}: ", sanitize(&row.name));
        write_terms(&mut out, &names, &row.terms);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for name in &names {
        let _ = writeln!(out, " {name} >= 0");
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Label(String),
    Sign(f64),
    Rel(Relation),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Token>, LpError> {
    let err = |message: String| LpError::Parse { line, message };
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' || c == '-' {
            tokens.push(Token::Sign(if c == '+' { 1.0 } else { -1.0 }));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j] == '<' || chars[j] == '>' || chars[j] == '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let rel = match op.as_str() {
                "<=" | "=<" | "<" => Relation::Le,
                ">=" | "=>" | ">" => Relation::Ge,
                "=" => Relation::Eq,
                _ => return Err(err(format!("unknown operator {op:?}"))),
            };
            tokens.push(Token::Rel(rel));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let lit: String = chars[i..j].iter().collect();
            let v = lit.parse::<f64>().map_err(|_| err(format!("bad number {lit:?}")))?;
            tokens.push(Token::Num(v));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() && !"+-<>=:".contains(chars[j]) {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            if j < chars.len() && chars[j] == ':' {
                tokens.push(Token::Label(name));
                j += 1;
            } else {
                tokens.push(Token::Name(name));
            }
            i = j;
        }
    }
    Ok(tokens)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Builder {
    lp: LinearProgram,
    index: HashMap<String, VarId>,
}

impl Builder {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.lp.add_variable(name);
        self.index.insert(name.to_string(), v);
        v
    }

    /// Parses `[sign] [coef] name` terms until a relation or the end of input.
    fn terms(&mut self, tokens: &[Token], pos: &mut usize, line: usize) -> Result<Vec<(VarId, f64)>, LpError> {
        let mut out = Vec::new();
        while *pos < tokens.len() {
            let mut coef = 1.0;
            let mut saw_any = false;
            while let Some(Token::Sign(s)) = tokens.get(*pos) {
                coef *= s;
                *pos += 1;
                saw_any = true;
            }
            if let Some(Token::Num(v)) = tokens.get(*pos) {
                coef *= v;
                *pos += 1;
                saw_any = true;
            }
            match tokens.get(*pos) {
                Some(Token::Name(n)) => {
                    let n = n.clone();
                    let v = self.var(&n);
                    out.push((v, coef));
                    *pos += 1;
                }
                Some(Token::Rel(_)) | None if !saw_any => break,
                other => return Err(LpError::Parse { line, message: format!("expected a variable, found {other:?}") }),
            }
        }
        Ok(out)
    }
}

pub fn parse_lp(text: &str) -> Result<LinearProgram, LpError> {
    let mut b = Builder { lp: LinearProgram::new(), index: HashMap::new() };
    let mut section = Section::Preamble;
    // Statements may span lines; buffer tokens until a statement is complete.
    let mut pending: Vec<Token> = Vec::new();
    let mut pending_line = 0;
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let mut saw_objective = false;

    let flush_constraint = |b: &mut Builder, toks: &mut Vec<Token>, line: usize| -> Result<(), LpError> {
        if toks.is_empty() {
            return Ok(());
        }
        let mut pos = 0;
        let name = match toks.first() {
            Some(Token::Label(l)) => {
                pos = 1;
                l.clone()
            }
            _ => format!("R{}", b.lp.num_constraints() + 1),
        };
        let terms = b.terms(toks, &mut pos, line)?;
        let Some(Token::Rel(rel)) = toks.get(pos) else {
            return Err(LpError::Parse { line, message: format!("row {name} lacks a relation") });
        };
        pos += 1;
        let mut sign = 1.0;
        while let Some(Token::Sign(s)) = toks.get(pos) {
            sign *= s;
            pos += 1;
        }
        let rhs = match toks.get(pos) {
            Some(Token::Num(v)) => sign * v,
            Some(Token::Name(n)) if n.eq_ignore_ascii_case("inf") || n.eq_ignore_ascii_case("infinity") => {
                return Err(LpError::Parse { line, message: format!("row {name} has infinite rhs") })
            }
            other => {
                return Err(LpError::Parse { line, message: format!("row {name}: expected rhs, found {other:?}") })
            }
        };
        if pos + 1 != toks.len() {
            return Err(LpError::Parse { line, message: format!("row {name}: trailing tokens") });
        }
        b.lp.add_constraint(name, terms, *rel, rhs);
        toks.clear();
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_keyword(content) {
            if section == Section::Constraints {
                flush_constraint(&mut b, &mut pending, pending_line)?;
            }
            if section == Section::Objective {
                let mut pos = 0;
                if let Some(Token::Label(_)) = pending.first() {
                    pos = 1;
                }
                objective = b.terms(&pending, &mut pos, pending_line)?;
                if pos != pending.len() {
                    return Err(LpError::Parse { line: pending_line, message: "objective has a relation".into() });
                }
                pending.clear();
                saw_objective = true;
            }
            section = next;
            if section == Section::End {
                break;
            }
            continue;
        }
        let lower = content.trim().to_ascii_lowercase();
        if lower.starts_with("maximize") || lower.starts_with("maximise") || lower == "max" {
            return Err(LpError::Parse { line, message: "only minimization is supported".into() });
        }
        match section {
            Section::Preamble | Section::End => {
                return Err(LpError::Parse { line, message: "content outside of a section".into() })
            }
            Section::Objective => {
                if pending.is_empty() {
                    pending_line = line;
                }
                pending.extend(tokenize(content, line)?);
            }
            Section::Constraints => {
                let toks = tokenize(content, line)?;
                // A new label starts a new row.
                if matches!(toks.first(), Some(Token::Label(_))) {
                    flush_constraint(&mut b, &mut pending, pending_line)?;
                }
                if pending.is_empty() {
                    pending_line = line;
                }
                pending.extend(toks);
                let has_rel = pending.iter().any(|t| matches!(t, Token::Rel(_)));
                if has_rel && matches!(pending.last(), Some(Token::Num(_))) {
                    flush_constraint(&mut b, &mut pending, pending_line)?;
                }
            }
            Section::Bounds => {
                let toks = tokenize(content, line)?;
                match toks.as_slice() {
                    [Token::Name(n), Token::Rel(Relation::Ge), Token::Num(z)]
                    | [Token::Num(z), Token::Rel(Relation::Le), Token::Name(n)]
                        if *z == 0.0 =>
                    {
                        b.var(n);
                    }
                    [Token::Name(n), Token::Rel(Relation::Le), Token::Num(u)] => {
                        let v = b.var(n);
                        b.lp.add_constraint(format!("ub_{n}"), [(v, 1.0)], Relation::Le, *u);
                    }
                    _ => {
                        return Err(LpError::Parse {
                            line,
                            message: "only non-negativity and finite upper bounds are supported".into(),
                        })
                    }
                }
            }
        }
    }
    if section == Section::Constraints {
        flush_constraint(&mut b, &mut pending, pending_line)?;
    }
    if !saw_objective {
        return Err(LpError::Parse { line: 0, message: "missing Minimize section".into() });
    }
    for (v, c) in objective {
        let cur = b.lp.objective()[v.0];
        b.lp.set_objective(v, cur + c);
    }
    Ok(b.lp)
}
