//! LP-format interchange with external solvers.
//!
//! [`emit_lp`] writes a model as LP text with `Minimize`, `Subject To`,
//! `Bounds`, `Generals`, and `Binaries` sections. Variable and constraint
//! names are mangled to the LP-safe alphabet `[A-Za-z0-9_]` (other
//! characters become `_`, a leading non-letter gains an `x` prefix, and
//! collisions get deterministic numeric suffixes). [`parse_lp`] reads the
//! same dialect back: whitespace-separated tokens, `\` comments, and finite
//! bounds for every variable — this library works on bounded integer
//! programs only. [`import_solution`] reads `name value` lines produced by
//! an external solve of the emitted text, verifies feasibility against the
//! original model, and wraps the assignment as an outcome.

use std::collections::BTreeMap;

use super::{IlpError, IlpModel, Relation, SolveOutcome, SolveStatus, VarId};

/// LP-safe names for all variables, in declaration order: mangled to
/// `[A-Za-z0-9_]`, leading non-letter prefixed with `x`, collisions suffixed
/// `_2`, `_3`, ... in declaration order.
pub(crate) fn mangled_variable_names(model: &IlpModel) -> Vec<String> {
    let mut taken: BTreeMap<String, usize> = BTreeMap::new();
    let mut names = Vec::with_capacity(model.variables().len());
    for var in model.variables() {
        names.push(unique_name(&var.name, &mut taken));
    }
    names
}

fn mangle(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            out.push(ch);
        } else {
            out.push('_');
        }
    }
    if !out.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        out.insert(0, 'x');
    }
    out
}

fn unique_name(raw: &str, taken: &mut BTreeMap<String, usize>) -> String {
    let base = mangle(raw);
    let count = taken.entry(base.clone()).or_insert(0);
    *count += 1;
    if *count == 1 {
        base
    } else {
        format!("{base}_{count}")
    }
}

fn format_terms(terms: &[(i64, VarId)], names: &[String]) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, &(coeff, VarId(id))) in terms.iter().enumerate() {
        let name = &names[id];
        let magnitude = coeff.unsigned_abs();
        if i == 0 {
            if coeff < 0 {
                out.push_str("- ");
            }
        } else if coeff < 0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if magnitude == 1 {
            out.push_str(name);
        } else {
            out.push_str(&format!("{magnitude} {name}"));
        }
    }
    out
}

/// Emits a model as LP text. Deterministic: the same model always yields the
/// same bytes.
pub fn emit_lp(model: &IlpModel) -> String {
    let names = mangled_variable_names(model);
    let mut constraint_names: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = String::new();
    out.push_str("Minimize\n");
    out.push_str(&format!(" obj: {}\n", format_terms(model.objective(), &names)));
    out.push_str("Subject To\n");
    for constraint in model.constraints() {
        let cname = unique_name(&constraint.name, &mut constraint_names);
        let relation = match constraint.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(
            " {cname}: {} {relation} {}\n",
            format_terms(&constraint.terms, &names),
            constraint.rhs
        ));
    }
    out.push_str("Bounds\n");
    for (var, name) in model.variables().iter().zip(&names) {
        out.push_str(&format!(" {} <= {name} <= {}\n", var.lower, var.upper));
    }
    let binaries: Vec<&String> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.is_binary())
        .map(|(_, n)| n)
        .collect();
    let generals: Vec<&String> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| !v.is_binary())
        .map(|(_, n)| n)
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for name in generals {
            out.push_str(&format!(" {name}\n"));
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            out.push_str(&format!(" {name}\n"));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    Done,
}

struct LpBuilder {
    vars: Vec<(String, Option<i64>, Option<i64>, bool)>, // name, lower, upper, is_binary
    index: BTreeMap<String, usize>,
}

impl LpBuilder {
    fn lookup(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.vars.len();
        self.vars.push((name.to_string(), None, None, false));
        self.index.insert(name.to_string(), id);
        id
    }
}

fn parse_i64(token: &str, line: usize) -> Result<i64, IlpError> {
    token.parse().map_err(|_| IlpError::LpParse {
        line,
        message: format!("expected an integer, got `{token}`"),
    })
}

/// Parses a sum expression from whitespace-separated tokens; returns
/// `(coeff, var_index)` pairs.
fn parse_expr(
    tokens: &[&str],
    builder: &mut LpBuilder,
    line: usize,
) -> Result<Vec<(i64, usize)>, IlpError> {
    let mut terms = Vec::new();
    let mut sign = 1i64;
    let mut coeff: Option<i64> = None;
    for &token in tokens {
        match token {
            "+" => {
                if coeff.is_some() {
                    return Err(IlpError::LpParse {
                        line,
                        message: "dangling coefficient before `+`".into(),
                    });
                }
                sign = 1;
            }
            "-" => {
                if coeff.is_some() {
                    return Err(IlpError::LpParse {
                        line,
                        message: "dangling coefficient before `-`".into(),
                    });
                }
                sign = -1;
            }
            _ if token.chars().next().is_some_and(|c| c.is_ascii_digit()) => {
                if coeff.is_some() {
                    return Err(IlpError::LpParse {
                        line,
                        message: format!("two consecutive numbers near `{token}`"),
                    });
                }
                coeff = Some(parse_i64(token, line)?);
            }
            _ => {
                let id = builder.lookup(token);
                terms.push((sign * coeff.unwrap_or(1), id));
                sign = 1;
                coeff = None;
            }
        }
    }
    match coeff {
        // A bare trailing number is a constant term; only `0` is supported
        // (emitted for empty sums).
        Some(0) => Ok(terms),
        Some(n) => Err(IlpError::LpParse {
            line,
            message: format!("unsupported constant term `{n}` in expression"),
        }),
        None => Ok(terms),
    }
}

fn split_relation<'t>(tokens: &[&'t str], line: usize) -> Result<(Vec<&'t str>, Relation, i64), IlpError> {
    let pos = tokens
        .iter()
        .position(|t| matches!(*t, "<=" | ">=" | "=" | "<" | ">"))
        .ok_or_else(|| IlpError::LpParse {
            line,
            message: "constraint has no relation operator".into(),
        })?;
    let relation = match tokens[pos] {
        "<=" | "<" => Relation::Le,
        ">=" | ">" => Relation::Ge,
        _ => Relation::Eq,
    };
    if pos + 2 != tokens.len() {
        return Err(IlpError::LpParse {
            line,
            message: "expected a single integer right-hand side".into(),
        });
    }
    let rhs = parse_i64(tokens[pos + 1], line)?;
    Ok((tokens[..pos].to_vec(), relation, rhs))
}

/// Parses LP text back into a model. Every variable must end up with finite
/// bounds (from `Bounds` lines or a `Binaries` listing).
pub fn parse_lp(text: &str) -> Result<IlpModel, IlpError> {
    let mut section = Section::Preamble;
    let mut builder = LpBuilder {
        vars: Vec::new(),
        index: BTreeMap::new(),
    };
    let mut objective: Vec<(i64, usize)> = Vec::new();
    let mut constraints: Vec<(String, Vec<(i64, usize)>, Relation, i64)> = Vec::new();
    let mut unnamed = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('\\') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lowered = trimmed.to_ascii_lowercase();
        let new_section = match lowered.as_str() {
            "minimize" | "min" => Some(Section::Objective),
            "maximize" | "max" => {
                return Err(IlpError::LpParse {
                    line: line_no,
                    message: "maximization is not supported; minimize the negation".into(),
                })
            }
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" | "bound" => Some(Section::Bounds),
            "generals" | "general" | "gen" => Some(Section::Generals),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(next) = new_section {
            section = next;
            continue;
        }

        match section {
            Section::Preamble => {
                return Err(IlpError::LpParse {
                    line: line_no,
                    message: format!("expected `Minimize` before `{trimmed}`"),
                })
            }
            Section::Done => {
                return Err(IlpError::LpParse {
                    line: line_no,
                    message: format!("content after `End`: `{trimmed}`"),
                })
            }
            Section::Objective => {
                let body = match trimmed.split_once(':') {
                    Some((_, rest)) => rest,
                    None => trimmed,
                };
                let tokens: Vec<&str> = body.split_whitespace().collect();
                objective.extend(parse_expr(&tokens, &mut builder, line_no)?);
            }
            Section::Constraints => {
                let (name, body) = match trimmed.split_once(':') {
                    Some((n, rest)) => (n.trim().to_string(), rest),
                    None => {
                        unnamed += 1;
                        (format!("row{unnamed}"), trimmed)
                    }
                };
                let tokens: Vec<&str> = body.split_whitespace().collect();
                let (lhs, relation, rhs) = split_relation(&tokens, line_no)?;
                let terms = parse_expr(&lhs, &mut builder, line_no)?;
                constraints.push((name, terms, relation, rhs));
            }
            Section::Bounds => {
                let tokens: Vec<&str> = trimmed.split_whitespace().collect();
                parse_bounds_line(&tokens, &mut builder, line_no)?;
            }
            Section::Generals => {
                for token in trimmed.split_whitespace() {
                    builder.lookup(token);
                }
            }
            Section::Binaries => {
                for token in trimmed.split_whitespace() {
                    let id = builder.lookup(token);
                    builder.vars[id].3 = true;
                }
            }
        }
    }

    let mut model = IlpModel::new();
    let mut ids = Vec::with_capacity(builder.vars.len());
    for (name, lower, upper, is_binary) in &builder.vars {
        let (lo, hi) = if *is_binary {
            (lower.unwrap_or(0).max(0), upper.unwrap_or(1).min(1))
        } else {
            match (lower, upper) {
                (Some(lo), Some(hi)) => (*lo, *hi),
                _ => {
                    return Err(IlpError::LpParse {
                        line: 0,
                        message: format!(
                            "variable `{name}` has no finite bounds; bounded integers are required"
                        ),
                    })
                }
            }
        };
        ids.push(model.add_var(name.clone(), lo, hi));
    }
    for (coeff, id) in objective {
        // Preserve term order; merging is the solver's job.
        model.objective.push((coeff, ids[id]));
    }
    for (name, terms, relation, rhs) in constraints {
        let mapped = terms.into_iter().map(|(c, id)| (c, ids[id])).collect();
        model.add_constraint(name, mapped, relation, rhs);
    }
    model.validate()?;
    Ok(model)
}

fn parse_bounds_line(
    tokens: &[&str],
    builder: &mut LpBuilder,
    line: usize,
) -> Result<(), IlpError> {
    let reject_inf = |t: &str| -> Result<(), IlpError> {
        if t.eq_ignore_ascii_case("-inf")
            || t.eq_ignore_ascii_case("+inf")
            || t.eq_ignore_ascii_case("inf")
            || t.eq_ignore_ascii_case("free")
        {
            return Err(IlpError::LpParse {
                line,
                message: "infinite bounds are not supported; every variable needs finite bounds"
                    .into(),
            });
        }
        Ok(())
    };
    for t in tokens {
        reject_inf(t)?;
    }
    match tokens {
        // lo <= x <= hi
        [lo, "<=", name, "<=", hi] => {
            let id = builder.lookup(name);
            builder.vars[id].1 = Some(parse_i64(lo, line)?);
            builder.vars[id].2 = Some(parse_i64(hi, line)?);
        }
        // x <= hi
        [name, "<=", hi] => {
            let id = builder.lookup(name);
            builder.vars[id].2 = Some(parse_i64(hi, line)?);
            if builder.vars[id].1.is_none() {
                builder.vars[id].1 = Some(0); // LP default lower bound
            }
        }
        // x >= lo
        [name, ">=", lo] => {
            let id = builder.lookup(name);
            builder.vars[id].1 = Some(parse_i64(lo, line)?);
        }
        // x = v
        [name, "=", v] => {
            let id = builder.lookup(name);
            let value = parse_i64(v, line)?;
            builder.vars[id].1 = Some(value);
            builder.vars[id].2 = Some(value);
        }
        _ => {
            return Err(IlpError::LpParse {
                line,
                message: format!("unrecognized bounds line `{}`", tokens.join(" ")),
            })
        }
    }
    Ok(())
}

/// Reads `name value` lines (with `#` comments) as produced by an external
/// solver run on [`emit_lp`] output, verifies the assignment is feasible for
/// `model`, and returns it shaped like a solve outcome. Names may be the
/// model's own or their LP-mangled forms. Variables missing from the text
/// default to 0 only when their lower bound is 0. The returned status is
/// `Optimal` in the sense "verified feasible, accepted as the answer" — this
/// library cannot re-prove an external solver's optimality claim.
pub fn import_solution(model: &IlpModel, text: &str) -> Result<SolveOutcome, IlpError> {
    model.validate()?;
    let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, var) in model.variables().iter().enumerate() {
        by_name.insert(var.name.as_str(), i);
    }
    let mangled = mangled_variable_names(model);
    let mut by_mangled: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, name) in mangled.iter().enumerate() {
        by_mangled.insert(name.as_str(), i);
    }

    let mut values: Vec<Option<i64>> = vec![None; model.variables().len()];
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let [name, value] = tokens[..] else {
            return Err(IlpError::SolutionParse {
                line: line_no,
                message: format!("expected `name value`, got `{}`", line.trim()),
            });
        };
        let id = by_name
            .get(name)
            .or_else(|| by_mangled.get(name))
            .copied()
            .ok_or_else(|| IlpError::SolutionParse {
                line: line_no,
                message: format!("unknown variable `{name}`"),
            })?;
        let parsed: i64 = value.parse().map_err(|_| IlpError::SolutionParse {
            line: line_no,
            message: format!("expected an integer value, got `{value}`"),
        })?;
        if values[id].replace(parsed).is_some() {
            return Err(IlpError::SolutionParse {
                line: line_no,
                message: format!("variable `{name}` assigned twice"),
            });
        }
    }

    let mut assignment = Vec::with_capacity(values.len());
    for (value, var) in values.iter().zip(model.variables()) {
        match value {
            Some(v) => assignment.push(*v),
            None if var.lower == 0 => assignment.push(0),
            None => return Err(IlpError::MissingValue(var.name.clone())),
        }
    }
    let objective = model.check_assignment(&assignment)?;
    Ok(SolveOutcome {
        status: SolveStatus::Optimal,
        values: Some(assignment),
        objective: Some(objective),
        nodes: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testgen::{brute_force, random_model};
    use super::super::{IlpModel, Relation, SolverConfig};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model() -> IlpModel {
        let mut model = IlpModel::new();
        let x = model.add_binary("x");
        let y = model.add_binary("y");
        let f = model.add_var("f", -5, 5);
        model.add_constraint("pick", vec![(1, x), (1, y)], Relation::Ge, 1);
        model.add_constraint("tie", vec![(2, x), (-1, f)], Relation::Eq, 0);
        model.set_objective(vec![(1, x), (3, y)]);
        model
    }

    #[test]
    fn emit_is_stable_and_complete() {
        let text = emit_lp(&toy_model());
        let expected = "Minimize\n obj: x + 3 y\nSubject To\n pick: x + y >= 1\n tie: 2 x - f = 0\nBounds\n 0 <= x <= 1\n 0 <= y <= 1\n -5 <= f <= 5\nGenerals\n f\nBinaries\n x\n y\nEnd\n";
        assert_eq!(text, expected);
    }

    /// Structural equivalence by variable name, ignoring declaration order.
    fn assert_equivalent(a: &IlpModel, b: &IlpModel) {
        let vars = |m: &IlpModel| -> Vec<(String, i64, i64)> {
            let mut v: Vec<_> = m
                .variables()
                .iter()
                .map(|v| (v.name.clone(), v.lower, v.upper))
                .collect();
            v.sort();
            v
        };
        assert_eq!(vars(a), vars(b));
        let cons = |m: &IlpModel| -> Vec<(String, Vec<(i64, String)>, String, i64)> {
            m.constraints()
                .iter()
                .map(|c| {
                    (
                        c.name.clone(),
                        c.terms
                            .iter()
                            .map(|&(k, id)| (k, m.var(id).name.clone()))
                            .collect(),
                        format!("{:?}", c.relation),
                        c.rhs,
                    )
                })
                .collect()
        };
        assert_eq!(cons(a), cons(b));
        let obj = |m: &IlpModel| -> Vec<(i64, String)> {
            m.objective()
                .iter()
                .map(|&(k, id)| (k, m.var(id).name.clone()))
                .collect()
        };
        assert_eq!(obj(a), obj(b));
    }

    #[test]
    fn toy_model_round_trips() {
        let model = toy_model();
        let reparsed = parse_lp(&emit_lp(&model)).unwrap();
        assert_equivalent(&model, &reparsed);
    }

    #[test]
    fn random_models_round_trip_and_agree_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..40 {
            let model = random_model(&mut rng);
            let reparsed = parse_lp(&emit_lp(&model)).unwrap();
            assert_equivalent(&model, &reparsed);
            let direct = brute_force(&model);
            let via_text = brute_force(&reparsed);
            assert_eq!(direct, via_text, "case {case}");
        }
    }

    #[test]
    fn mangling_sanitizes_and_deduplicates() {
        let mut model = IlpModel::new();
        model.add_binary("v h(1,2)");
        model.add_binary("v_h_1_2_");
        model.add_binary("0weird");
        let names = mangled_variable_names(&model);
        assert_eq!(names, vec!["v_h_1_2_", "v_h_1_2__2", "x0weird"]);
        let text = emit_lp(&model);
        assert!(parse_lp(&text).is_ok());
    }

    #[test]
    fn parse_rejects_unbounded_and_malformed_text() {
        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x >= 1\nEnd\n").unwrap_err();
        assert!(err.to_string().contains("no finite bounds"), "{err}");

        let err = parse_lp("Minimize\n obj: x\nBounds\n x free\nEnd\n").unwrap_err();
        assert!(err.to_string().contains("finite bounds"), "{err}");

        let err = parse_lp("Maximize\n obj: x\nEnd\n").unwrap_err();
        assert!(err.to_string().contains("not supported"), "{err}");

        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x 1\nBounds\n 0 <= x <= 1\nEnd\n")
            .unwrap_err();
        assert!(err.to_string().contains("relation"), "{err}");
    }

    #[test]
    fn comments_are_stripped() {
        let text = "\\ a model\nMinimize\n obj: x \\ trailing\nSubject To\n c: x >= 1\nBounds\n 0 <= x <= 1\nEnd\n";
        let model = parse_lp(text).unwrap();
        assert_eq!(model.variables().len(), 1);
    }

    #[test]
    fn import_accepts_feasible_solutions() {
        let model = toy_model();
        let outcome = import_solution(&model, "x 1\nf 2\n# y omitted, lower bound 0\n").unwrap();
        assert_eq!(outcome.objective, Some(1));
        assert_eq!(outcome.values.unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn import_rejects_infeasible_unknown_and_missing() {
        let model = toy_model();
        let err = import_solution(&model, "x 0\ny 0\nf 0\n").unwrap_err();
        assert!(
            matches!(&err, IlpError::ConstraintViolated(name) if name == "pick"),
            "{err}"
        );

        let err = import_solution(&model, "x 1\nf 2\nq 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown variable `q`"), "{err}");

        let err = import_solution(&model, "x 1\nf 2\nx 1\n").unwrap_err();
        assert!(err.to_string().contains("assigned twice"), "{err}");

        let mut model = IlpModel::new();
        model.add_var("g", 1, 5);
        let err = import_solution(&model, "").unwrap_err();
        assert!(matches!(&err, IlpError::MissingValue(name) if name == "g"), "{err}");
    }

    #[test]
    fn import_matches_embedded_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let model = random_model(&mut rng);
            let outcome = super::super::solve(&model, &SolverConfig::default()).unwrap();
            if let Some(values) = outcome.values {
                let text: String = model
                    .variables()
                    .iter()
                    .zip(&values)
                    .map(|(v, val)| format!("{} {}\n", v.name, val))
                    .collect();
                let imported = import_solution(&model, &text).unwrap();
                assert_eq!(imported.objective, outcome.objective);
                assert_eq!(imported.values.unwrap(), values);
            }
        }
    }
}
