//! LP text format (the CPLEX/Gurobi `.lp` dialect) for lifted programs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::lift::{LinearConstraint, LinearProgramModel, LpVar, Sense, VarKind};
use super::QuadratizedModel;
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;
const NAMES_PER_LINE: usize = 10;

/// Shortest decimal that parses back to the same `f64`; `-0` prints as `0`.
fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn write_expr(out: &mut String, terms: &[(LpVar, f64)], constant: Option<f64>) {
    let mut first = true;
    let mut count = 0;
    let mut push = |out: &mut String, coef: f64, var: Option<LpVar>| {
        if count > 0 && count % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        count += 1;
        let neg = coef < 0.0 || (coef == 0.0 && coef.is_sign_negative() && var.is_none());
        let mag = coef.abs();
        match (first, neg) {
            (true, true) => out.push_str("- "),
            (true, false) => {}
            (false, true) => out.push_str(" - "),
            (false, false) => out.push_str(" + "),
        }
        first = false;
        match var {
            Some(v) if mag == 1.0 => write!(out, "{v}").unwrap(),
            Some(v) => write!(out, "{} {v}", num(mag)).unwrap(),
            None => out.push_str(&num(mag)),
        }
    };
    for &(v, c) in terms {
        push(out, c, Some(v));
    }
    if let Some(c) = constant {
        push(out, c, None);
    }
    if first {
        out.push('0');
    }
}

/// Render a program as LP text.
pub fn write_lp(lp: &LinearProgramModel) -> String {
    let mut out = String::new();
    out.push_str("\\ lifted heavy-hex Ising program\n");
    out.push_str("Minimize\n obj: ");
    let terms: Vec<(LpVar, f64)> = lp.objective.iter().map(|(&v, &c)| (v, c)).collect();
    let constant = (lp.offset != 0.0).then_some(lp.offset);
    write_expr(&mut out, &terms, constant);
    out.push_str("\nSubject To\n");
    for c in &lp.constraints {
        write!(out, " {}: ", c.name).unwrap();
        write_expr(&mut out, &c.terms, None);
        writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs)).unwrap();
    }
    if !lp.bounds.is_empty() {
        out.push_str("Bounds\n");
        for (v, &(lo, hi)) in &lp.bounds {
            writeln!(out, " {} <= {v} <= {}", num(lo), num(hi)).unwrap();
        }
    }
    let section = |out: &mut String, header: &str, kind: VarKind| {
        let names: Vec<String> = lp
            .var_kinds
            .iter()
            .filter(|(_, &k)| k == kind)
            .map(|(v, _)| v.to_string())
            .collect();
        if names.is_empty() {
            return;
        }
        writeln!(out, "{header}").unwrap();
        for chunk in names.chunks(NAMES_PER_LINE) {
            writeln!(out, " {}", chunk.join(" ")).unwrap();
        }
    };
    section(&mut out, "Binaries", VarKind::Binary);
    section(&mut out, "Generals", VarKind::Integer);
    out.push_str("End\n");
    out
}

/// Render a quadratized program with a quadratic objective. Auxiliaries are
/// named after the originals (`x{n}`, `x{n+1}`, ...); every variable is
/// binary.
pub fn write_qp(q: &QuadratizedModel) -> String {
    let mut out = String::new();
    out.push_str("\\ quadratized heavy-hex Ising program\n");
    out.push_str("Minimize\n obj: ");
    let linear: Vec<(LpVar, f64)> = q
        .base
        .terms
        .iter()
        .filter(|(k, _)| k.len() == 1)
        .map(|(k, &c)| (LpVar::X(k[0]), c))
        .collect();
    let constant = q.base.offset();
    let quadratic: Vec<(usize, usize, f64)> = q
        .base
        .terms
        .iter()
        .filter(|(k, _)| k.len() == 2)
        .map(|(k, &c)| (k[0], k[1], c))
        .collect();
    write_expr(&mut out, &linear, (constant != 0.0 || linear.is_empty()).then_some(constant));
    if !quadratic.is_empty() {
        out.push_str(" + [");
        for (idx, &(i, j, c)) in quadratic.iter().enumerate() {
            if idx > 0 && idx % TERMS_PER_LINE == 0 {
                out.push_str("\n  ");
            }
            let sign = if c < 0.0 { "-" } else if idx == 0 { "" } else { "+" };
            if sign.is_empty() {
                write!(out, " {} x{i} * x{j}", num(2.0 * c.abs())).unwrap();
            } else {
                write!(out, " {sign} {} x{i} * x{j}", num(2.0 * c.abs())).unwrap();
            }
        }
        out.push_str(" ] / 2");
    }
    out.push_str("\nBinaries\n");
    let names: Vec<String> = (0..q.base.n_vars).map(|i| format!("x{i}")).collect();
    for chunk in names.chunks(NAMES_PER_LINE) {
        writeln!(out, " {}", chunk.join(" ")).unwrap();
    }
    out.push_str("End\n");
    out
}

pub fn export_lp_file(lp: &LinearProgramModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_lp(lp))?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn header(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn lp_err(message: impl Into<String>) -> Error {
    Error::parse("LP file", message)
}

fn parse_var(tok: &str) -> Result<LpVar> {
    LpVar::parse(tok).ok_or_else(|| lp_err(format!("unknown variable name {tok:?}")))
}

fn parse_num(tok: &str) -> Result<f64> {
    let lower = tok.to_ascii_lowercase();
    let v = match lower.as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => tok.parse().map_err(|_| lp_err(format!("bad number {tok:?}")))?,
    };
    Ok(v)
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

/// Linear expression from a token run: `[sign] [coef] var | [sign] const`.
fn parse_expr(tokens: &[&str]) -> Result<(Vec<(LpVar, f64)>, f64)> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    while i < tokens.len() {
        let mut sign = 1.0;
        while i < tokens.len() && (tokens[i] == "+" || tokens[i] == "-") {
            if tokens[i] == "-" {
                sign = -sign;
            }
            i += 1;
        }
        let Some(&tok) = tokens.get(i) else {
            return Err(lp_err("dangling sign in expression"));
        };
        if is_number(tok) {
            let coef = sign * parse_num(tok)?;
            match tokens.get(i + 1) {
                Some(&next) if next != "+" && next != "-" => {
                    terms.push((parse_var(next)?, coef));
                    i += 2;
                }
                _ => {
                    constant += coef;
                    i += 1;
                }
            }
        } else {
            terms.push((parse_var(tok)?, sign));
            i += 1;
        }
    }
    Ok((terms, constant))
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Parse LP text produced by [`write_lp`] (whitespace-separated tokens).
pub fn parse_lp(text: &str) -> Result<LinearProgramModel> {
    let mut sections: BTreeMap<u8, Vec<String>> = BTreeMap::new();
    let mut current = Section::Preamble;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = header(line) {
            current = s;
            continue;
        }
        match current {
            Section::Preamble => return Err(lp_err("content before the objective section")),
            Section::End => return Err(lp_err("content after End")),
            s => sections.entry(s as u8).or_default().push(line.to_string()),
        }
    }
    if current != Section::End {
        return Err(lp_err("missing End"));
    }
    let tokens = |s: Section| -> Vec<String> {
        sections
            .get(&(s as u8))
            .map(|lines| lines.iter().flat_map(|l| l.split_whitespace().map(str::to_string)).collect())
            .unwrap_or_default()
    };

    let obj_tokens = tokens(Section::Objective);
    let mut obj: Vec<&str> = obj_tokens.iter().map(String::as_str).collect();
    if obj.first().is_some_and(|t| t.ends_with(':')) {
        obj.remove(0);
    }
    let (obj_terms, offset) = parse_expr(&obj)?;
    let mut objective = BTreeMap::new();
    for (v, c) in obj_terms {
        *objective.entry(v).or_insert(0.0) += c;
    }

    let con_tokens = tokens(Section::Constraints);
    let mut constraints = Vec::new();
    let mut i = 0;
    while i < con_tokens.len() {
        let name = con_tokens[i]
            .strip_suffix(':')
            .ok_or_else(|| lp_err(format!("expected constraint name, found {:?}", con_tokens[i])))?;
        i += 1;
        let start = i;
        while i < con_tokens.len() && parse_sense(&con_tokens[i]).is_none() {
            i += 1;
        }
        let sense = con_tokens
            .get(i)
            .and_then(|t| parse_sense(t))
            .ok_or_else(|| lp_err(format!("constraint {name} has no sense")))?;
        let expr: Vec<&str> = con_tokens[start..i].iter().map(String::as_str).collect();
        let (terms, constant) = parse_expr(&expr)?;
        i += 1;
        let mut rhs_sign = 1.0;
        if con_tokens.get(i).map(String::as_str) == Some("-") {
            rhs_sign = -1.0;
            i += 1;
        }
        let rhs = rhs_sign
            * parse_num(con_tokens.get(i).ok_or_else(|| lp_err(format!("constraint {name} has no rhs")))?)?;
        i += 1;
        constraints.push(LinearConstraint {
            name: name.to_string(),
            terms,
            sense,
            rhs: rhs - constant,
        });
    }

    let mut bounds = BTreeMap::new();
    for line in sections.get(&(Section::Bounds as u8)).into_iter().flatten() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [lo, "<=", v, "<=", hi] => {
                bounds.insert(parse_var(v)?, (parse_num(lo)?, parse_num(hi)?));
            }
            [v, ">=", lo] => {
                let e = bounds.entry(parse_var(v)?).or_insert((0.0, f64::INFINITY));
                e.0 = parse_num(lo)?;
            }
            [v, "<=", hi] => {
                let e = bounds.entry(parse_var(v)?).or_insert((0.0, f64::INFINITY));
                e.1 = parse_num(hi)?;
            }
            _ => return Err(lp_err(format!("unsupported bound line {line:?}"))),
        }
    }

    let mut var_kinds = BTreeMap::new();
    for (section, kind) in [
        (Section::Binaries, VarKind::Binary),
        (Section::Generals, VarKind::Integer),
    ] {
        for tok in tokens(section) {
            var_kinds.insert(parse_var(&tok)?, kind);
        }
    }
    let referenced = objective
        .keys()
        .copied()
        .chain(constraints.iter().flat_map(|c| c.terms.iter().map(|&(v, _)| v)))
        .chain(bounds.keys().copied())
        .collect::<Vec<_>>();
    for v in referenced {
        var_kinds.entry(v).or_insert(VarKind::Continuous);
    }

    let n_vars = var_kinds
        .keys()
        .filter_map(|v| match v {
            LpVar::X(i) => Some(i + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let product_map = var_kinds
        .keys()
        .filter(|v| v.is_product())
        .map(|v| (*v, v.factors()))
        .collect();

    Ok(LinearProgramModel {
        n_vars,
        objective,
        offset,
        constraints,
        var_kinds,
        bounds,
        product_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IsingModel;
    use crate::reduce::{lift_to_lp, lift_to_lp_with, spin_to_binary, BinaryPolynomial};

    fn path_lp() -> LinearProgramModel {
        let mut m = IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0)
            .add_quadratic(1, 2, -1.0)
            .add_cubic(1, 0, 2, 1.0);
        lift_to_lp(&spin_to_binary(&m)).unwrap()
    }

    #[test]
    fn empty_objective() {
        let lp = lift_to_lp(&BinaryPolynomial::new(0)).unwrap();
        let text = write_lp(&lp);
        assert!(text.contains("Minimize\n obj: 0\n"));
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn path_model_file() {
        let lp = path_lp();
        let text = write_lp(&lp);
        let expected = "\\ lifted heavy-hex Ising program
Minimize
 obj: 4 x0 + 6 x1 + 4 x2 - 8 y0_1 - 4 y0_2 - 8 y1_2 + 8 w0_1_2 - 3
Subject To
 c0: y0_1 - x0 <= 0
 c1: y0_1 - x1 <= 0
 c2: y0_1 - x0 - x1 >= -1
 c3: w0_1_2 - x0 <= 0
 c4: w0_1_2 - x1 <= 0
 c5: w0_1_2 - x2 <= 0
 c6: w0_1_2 - x0 - x1 - x2 >= -2
 c7: y0_2 - x0 <= 0
 c8: y0_2 - x2 <= 0
 c9: y0_2 - x0 - x2 >= -1
 c10: y1_2 - x1 <= 0
 c11: y1_2 - x2 <= 0
 c12: y1_2 - x1 - x2 >= -1
Bounds
 0 <= y0_1 <= 1
 0 <= y0_2 <= 1
 0 <= y1_2 <= 1
 0 <= w0_1_2 <= 1
Binaries
 x0 x1 x2
End
";
        assert_eq!(text, expected);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, lp);
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn binary_products_flag() {
        let mut p = BinaryPolynomial::new(2);
        p.add_term(&[0, 1], -1.5);
        let lp = lift_to_lp_with(&p, true).unwrap();
        let text = write_lp(&lp);
        assert!(!text.contains("Bounds"));
        assert!(text.contains("Binaries\n x0 x1 y0_1\n"));
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn tolerant_of_foreign_spacing() {
        let text = "Minimize\n  obj: 3 x0\n   - x1 + 2\nSubject To\n c0: x0 + x1 >= 1\nBinaries\n x0\n x1\nEnd\n";
        let lp = parse_lp(text).unwrap();
        assert_eq!(lp.offset, 2.0);
        assert_eq!(lp.objective[&LpVar::X(1)], -1.0);
        assert_eq!(lp.constraints[0].rhs, 1.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp("Minimize\n obj: 2 q7\nEnd\n").is_err());
        assert!(parse_lp("Minimize\n obj: x0\n").is_err());
        assert!(parse_lp("Minimize\n obj: x0\nSubject To\n x0 >= 1\nEnd\n").is_err());
    }

    #[test]
    fn quadratized_objective_format() {
        let mut m = crate::model::IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0).add_quadratic(1, 2, -1.0).add_cubic(1, 0, 2, 1.0);
        let q = super::super::quadratize(&super::super::spin_to_binary(&m), 9.0).unwrap();
        let text = write_qp(&q);
        assert!(text.starts_with("\\ quadratized heavy-hex Ising program\nMinimize\n obj: "));
        assert!(text.contains(" ] / 2\nBinaries\n x0 x1 x2 x3\nEnd\n"), "{text}");
    }
}
