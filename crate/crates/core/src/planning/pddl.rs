use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Atom, Domain, Literal, PlanError, PlanningAction, Problem, TypedVar};
use crate::ontology::Iri;

fn check_injective<'a>(names: impl Iterator<Item = &'a Iri>) -> Result<(), PlanError> {
    let mut seen: BTreeMap<String, &Iri> = BTreeMap::new();
    for i in names {
        let m = i.mangled();
        if let Some(prev) = seen.insert(m.clone(), i) {
            if prev != i {
                return Err(PlanError::MangleCollision(m));
            }
        }
        if Iri::unmangle(&m).ok().as_ref() != Some(i) {
            return Err(PlanError::MangleCollision(m));
        }
    }
    Ok(())
}

fn type_name(t: Option<&Iri>) -> String {
    t.map_or_else(|| "object".to_string(), Iri::mangled)
}

fn atom_text(a: &Atom, arg: impl Fn(&str) -> String) -> String {
    let mut s = format!("({}", a.pred);
    for x in &a.args {
        s.push(' ');
        s.push_str(&arg(x));
    }
    s.push(')');
    s
}

fn literal_text(l: &Literal, arg: impl Fn(&str) -> String) -> String {
    let a = atom_text(&l.atom, arg);
    if l.positive {
        a
    } else {
        format!("(not {a})")
    }
}

fn conj(parts: Vec<String>) -> String {
    if parts.is_empty() {
        "(and)".to_string()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

fn var(v: &str) -> String {
    format!("?{v}")
}

fn obj(o: &str) -> String {
    Iri::parse(o).map_or_else(|_| o.to_string(), |i| i.mangled())
}

/// Canonical PDDL text for the domain: types, predicates and actions are
/// emitted sorted.
pub fn emit_domain(d: &Domain) -> Result<String, PlanError> {
    check_injective(d.types.keys().chain(d.types.values().flatten()))?;
    let mut s = String::new();
    writeln!(s, "(define (domain {})", d.name).unwrap();
    writeln!(s, "  (:requirements :strips :typing :negative-preconditions)").unwrap();
    writeln!(s, "  (:types").unwrap();
    for (t, parent) in &d.types {
        writeln!(s, "    {} - {}", t.mangled(), type_name(parent.as_ref())).unwrap();
    }
    writeln!(s, "  )").unwrap();
    writeln!(s, "  (:predicates").unwrap();
    for (p, args) in &d.predicates {
        let params: Vec<String> = args
            .iter()
            .enumerate()
            .map(|(i, t)| format!("?a{i} - {}", type_name(t.as_ref())))
            .collect();
        if params.is_empty() {
            writeln!(s, "    ({p})").unwrap();
        } else {
            writeln!(s, "    ({p} {})", params.join(" ")).unwrap();
        }
    }
    writeln!(s, "  )").unwrap();
    let mut actions: Vec<&PlanningAction> = d.actions.iter().collect();
    actions.sort_by(|a, b| a.name.cmp(&b.name));
    for a in actions {
        writeln!(s, "  (:action {}", a.name).unwrap();
        let params: Vec<String> = a.params.iter().map(|p| format!("?{} - {}", p.name, p.ty.mangled())).collect();
        writeln!(s, "    :parameters ({})", params.join(" ")).unwrap();
        let pre = a.pre.iter().map(|l| literal_text(l, var)).collect();
        writeln!(s, "    :precondition {}", conj(pre)).unwrap();
        let mut eff: Vec<String> = a.add.iter().map(|x| atom_text(x, var)).collect();
        eff.extend(a.del.iter().map(|x| format!("(not {})", atom_text(x, var))));
        writeln!(s, "    :effect {}", conj(eff)).unwrap();
        writeln!(s, "  )").unwrap();
    }
    writeln!(s, ")").unwrap();
    Ok(s)
}

pub fn emit_problem(p: &Problem) -> Result<String, PlanError> {
    check_injective(p.objects.keys())?;
    let mut s = String::new();
    writeln!(s, "(define (problem {})", p.name).unwrap();
    writeln!(s, "  (:domain {})", p.domain).unwrap();
    writeln!(s, "  (:objects").unwrap();
    for (o, t) in &p.objects {
        writeln!(s, "    {} - {}", o.mangled(), t.mangled()).unwrap();
    }
    writeln!(s, "  )").unwrap();
    writeln!(s, "  (:init").unwrap();
    for a in &p.init {
        writeln!(s, "    {}", atom_text(a, obj)).unwrap();
    }
    writeln!(s, "  )").unwrap();
    let goal = p.goal.iter().map(|l| literal_text(l, obj)).collect();
    writeln!(s, "  (:goal {})", conj(goal)).unwrap();
    writeln!(s, ")").unwrap();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            Sexp::Atom(..) => None,
        }
    }
}

fn syntax(line: usize, m: impl Into<String>) -> PlanError {
    PlanError::SyntaxError {
        line,
        message: m.into(),
    }
}

fn read_sexp(text: &str) -> Result<Sexp, PlanError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    let mut done: Option<Sexp> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split(';').next().unwrap_or("");
        let spaced = body.replace('(', " ( ").replace(')', " ) ");
        for tok in spaced.split_whitespace() {
            if done.is_some() {
                return Err(syntax(line, format!("unexpected `{tok}` after the closing parenthesis")));
            }
            match tok {
                "(" => stack.push((Vec::new(), line)),
                ")" => {
                    let (items, start) = stack.pop().ok_or_else(|| syntax(line, "unbalanced `)`"))?;
                    let node = Sexp::List(items, start);
                    match stack.last_mut() {
                        Some((parent, _)) => parent.push(node),
                        None => done = Some(node),
                    }
                }
                t => match stack.last_mut() {
                    Some((parent, _)) => parent.push(Sexp::Atom(t.to_string(), line)),
                    None => return Err(syntax(line, format!("`{t}` outside parentheses"))),
                },
            }
        }
    }
    if let Some((_, start)) = stack.last() {
        return Err(syntax(*start, "unclosed `(`"));
    }
    done.ok_or_else(|| syntax(1, "empty input"))
}

fn expect_list(s: &Sexp) -> Result<&[Sexp], PlanError> {
    s.list().ok_or_else(|| syntax(s.line(), "expected a list"))
}

fn expect_sym(s: &Sexp) -> Result<&str, PlanError> {
    s.sym().ok_or_else(|| syntax(s.line(), "expected a name"))
}

fn header<'a>(root: &'a Sexp, kind: &str) -> Result<(String, &'a [Sexp]), PlanError> {
    let items = expect_list(root)?;
    if items.first().and_then(Sexp::sym) != Some("define") || items.len() < 2 {
        return Err(syntax(root.line(), "expected `(define ...)`"));
    }
    let h = expect_list(&items[1])?;
    if h.len() != 2 || h[0].sym() != Some(kind) {
        return Err(syntax(items[1].line(), format!("expected `({kind} <name>)`")));
    }
    Ok((expect_sym(&h[1])?.to_string(), &items[2..]))
}

/// `a b - t c - u` into name/type pairs; untyped names get `object`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, usize)>, PlanError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, usize)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = expect_sym(&items[i])?;
        if s == "-" {
            let t = items
                .get(i + 1)
                .ok_or_else(|| syntax(items[i].line(), "`-` without a type"))?;
            let t = expect_sym(t)?;
            for (n, l) in pending.drain(..) {
                out.push((n, t.to_string(), l));
            }
            i += 2;
        } else {
            pending.push((s.to_string(), items[i].line()));
            i += 1;
        }
    }
    for (n, l) in pending {
        out.push((n, "object".to_string(), l));
    }
    Ok(out)
}

fn iri_of(name: &str, line: usize) -> Result<Iri, PlanError> {
    Iri::unmangle(name).map_err(|e| syntax(line, e.to_string()))
}

fn opt_type(name: &str, line: usize) -> Result<Option<Iri>, PlanError> {
    if name == "object" {
        Ok(None)
    } else {
        iri_of(name, line).map(Some)
    }
}

fn parse_atom(s: &Sexp, arg: &impl Fn(&str, usize) -> Result<String, PlanError>) -> Result<Atom, PlanError> {
    let items = expect_list(s)?;
    let pred = expect_sym(items.first().ok_or_else(|| syntax(s.line(), "empty atom"))?)?;
    let args = items[1..]
        .iter()
        .map(|a| arg(expect_sym(a)?, a.line()))
        .collect::<Result<_, _>>()?;
    Ok(Atom {
        pred: pred.to_string(),
        args,
    })
}

fn parse_literal(s: &Sexp, arg: &impl Fn(&str, usize) -> Result<String, PlanError>) -> Result<Literal, PlanError> {
    let items = expect_list(s)?;
    if items.first().and_then(Sexp::sym) == Some("not") {
        if items.len() != 2 {
            return Err(syntax(s.line(), "`not` takes one atom"));
        }
        return Ok(Literal::neg(parse_atom(&items[1], arg)?));
    }
    Ok(Literal::pos(parse_atom(s, arg)?))
}

fn parse_conj(s: &Sexp, arg: &impl Fn(&str, usize) -> Result<String, PlanError>) -> Result<Vec<Literal>, PlanError> {
    let items = expect_list(s)?;
    if items.first().and_then(Sexp::sym) == Some("and") {
        items[1..].iter().map(|x| parse_literal(x, arg)).collect()
    } else if items.is_empty() {
        Ok(Vec::new())
    } else {
        Ok(vec![parse_literal(s, arg)?])
    }
}

fn parse_var(v: &str, line: usize) -> Result<String, PlanError> {
    v.strip_prefix('?')
        .map(str::to_string)
        .ok_or_else(|| syntax(line, format!("expected a variable, got `{v}`")))
}

fn parse_action(items: &[Sexp], line: usize) -> Result<PlanningAction, PlanError> {
    let name = expect_sym(items.get(1).ok_or_else(|| syntax(line, "action without name"))?)?;
    let mut a = PlanningAction {
        name: name.to_string(),
        params: Vec::new(),
        pre: BTreeSet::new(),
        add: BTreeSet::new(),
        del: BTreeSet::new(),
    };
    let mut i = 2;
    while i < items.len() {
        let key = expect_sym(&items[i])?;
        let val = items
            .get(i + 1)
            .ok_or_else(|| syntax(items[i].line(), format!("{key} without a value")))?;
        match key {
            ":parameters" => {
                for (n, t, l) in typed_list(expect_list(val)?)? {
                    a.params.push(TypedVar {
                        name: parse_var(&n, l)?,
                        ty: iri_of(&t, l)?,
                    });
                }
            }
            ":precondition" => a.pre = parse_conj(val, &parse_var)?.into_iter().collect(),
            ":effect" => {
                for l in parse_conj(val, &parse_var)? {
                    if l.positive {
                        a.add.insert(l.atom);
                    } else {
                        a.del.insert(l.atom);
                    }
                }
            }
            other => return Err(syntax(items[i].line(), format!("unknown action key {other}"))),
        }
        i += 2;
    }
    Ok(a)
}

pub fn parse_domain(text: &str) -> Result<Domain, PlanError> {
    let root = read_sexp(text)?;
    let (name, sections) = header(&root, "domain")?;
    let mut d = Domain {
        name,
        ..Domain::default()
    };
    for sec in sections {
        let items = expect_list(sec)?;
        let key = expect_sym(items.first().ok_or_else(|| syntax(sec.line(), "empty section"))?)?;
        match key {
            ":requirements" => {}
            ":types" => {
                for (n, t, l) in typed_list(&items[1..])? {
                    d.types.insert(iri_of(&n, l)?, opt_type(&t, l)?);
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let pi = expect_list(p)?;
                    let name = expect_sym(pi.first().ok_or_else(|| syntax(p.line(), "empty predicate"))?)?;
                    let args = typed_list(&pi[1..])?
                        .into_iter()
                        .map(|(_, t, l)| opt_type(&t, l))
                        .collect::<Result<_, _>>()?;
                    d.predicates.insert(name.to_string(), args);
                }
            }
            ":action" => d.actions.push(parse_action(items, sec.line())?),
            other => return Err(syntax(sec.line(), format!("unknown section {other}"))),
        }
    }
    Ok(d)
}

pub fn parse_problem(text: &str) -> Result<Problem, PlanError> {
    let root = read_sexp(text)?;
    let (name, sections) = header(&root, "problem")?;
    let mut p = Problem {
        name,
        ..Problem::default()
    };
    let object = |o: &str, line: usize| iri_of(o, line).map(|i| i.to_string());
    for sec in sections {
        let items = expect_list(sec)?;
        let key = expect_sym(items.first().ok_or_else(|| syntax(sec.line(), "empty section"))?)?;
        match key {
            ":domain" => {
                p.domain = expect_sym(items.get(1).ok_or_else(|| syntax(sec.line(), ":domain without name"))?)?
                    .to_string();
            }
            ":objects" => {
                for (n, t, l) in typed_list(&items[1..])? {
                    p.objects.insert(iri_of(&n, l)?, iri_of(&t, l)?);
                }
            }
            ":init" => {
                for a in &items[1..] {
                    p.init.insert(parse_atom(a, &object)?);
                }
            }
            ":goal" => {
                let g = items.get(1).ok_or_else(|| syntax(sec.line(), ":goal without formula"))?;
                p.goal = parse_conj(g, &object)?.into_iter().collect();
            }
            other => return Err(syntax(sec.line(), format!("unknown section {other}"))),
        }
    }
    Ok(p)
}
