//! Reader and sequential executor for the emitted PDDL subset.
//!
//! Supports typed objects, predicates, numeric fluents with `+ - * /`,
//! comparisons, conjunctions, `at start` / `at end` / `over all` annotations and
//! `assign` / `increase` / `decrease` effects. Effects sharing a time point are
//! evaluated against the state before any of them applies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use num_traits::Zero;

use super::sexpr::{parse_all, SExpr};
use crate::error::{Error, Result};

pub type Num = Ratio<i128>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Exact value of a decimal literal such as `12`, `-3.5` or `0.0006`.
pub fn parse_number(s: &str) -> Option<Num> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: i128 = digits.parse().ok()?;
    let d = 10i128.checked_pow(frac.len() as u32)?;
    let v = Num::new(n, d);
    Some(if neg { -v } else { v })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum When {
    Start,
    End,
    OverAll,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Num),
    Fluent(String, Vec<String>),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    And(Vec<Cond>),
    Pred(String, Vec<String>),
    Cmp(String, Expr, Expr),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffOp {
    Assign,
    Increase,
    Decrease,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Effect {
    pub op: EffOp,
    pub fluent: (String, Vec<String>),
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub duration: Expr,
    pub conditions: Vec<(When, Cond)>,
    pub effects: Vec<(When, Effect)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    /// type → parent type
    pub types: BTreeMap<String, String>,
    pub predicates: BTreeMap<String, Vec<String>>,
    pub functions: BTreeMap<String, Vec<String>>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name.eq_ignore_ascii_case(name))
    }

    fn is_subtype(&self, t: &str, of: &str) -> bool {
        let mut cur = t.to_string();
        for _ in 0..=self.types.len() {
            if cur == of {
                return true;
            }
            match self.types.get(&cur) {
                Some(p) => cur = p.clone(),
                None => return false,
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// object → type, in declaration order
    pub objects: Vec<(String, String)>,
    pub facts: BTreeSet<(String, Vec<String>)>,
    pub values: BTreeMap<(String, Vec<String>), Num>,
    pub goal: Cond,
    pub metric: Option<(String, Expr)>,
}

fn atom(e: &SExpr) -> Result<String> {
    e.as_atom().map(str::to_string).ok_or_else(|| Error::Format(format!("expected a name, found {e}")))
}

fn list(e: &SExpr) -> Result<&[SExpr]> {
    e.as_list().ok_or_else(|| Error::Format(format!("expected a list, found {e}")))
}

/// `a b - t c - u` → `[(a, t), (b, t), (c, u)]`; untyped entries get `object`.
fn typed_list(items: &[SExpr]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let a = atom(&items[i])?;
        if a == "-" {
            let t = atom(items.get(i + 1).ok_or_else(|| Error::Format("type expected after `-`".into()))?)?;
            out.extend(pending.drain(..).map(|p| (p, t.clone())));
            i += 2;
        } else {
            pending.push(a);
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|p| (p, "object".to_string())));
    Ok(out)
}

fn parse_expr(e: &SExpr) -> Result<Expr> {
    match e {
        SExpr::Atom(a) => match parse_number(a) {
            Some(n) => Ok(Expr::Num(n)),
            None => err(format!("bare name `{a}` is not a numeric expression")),
        },
        SExpr::List(items) => {
            let head = atom(items.first().ok_or_else(|| Error::Format("empty expression".into()))?)?;
            match (head.as_str(), items.len()) {
                ("-", 2) => Ok(Expr::Neg(Box::new(parse_expr(&items[1])?))),
                (op @ ("+" | "-" | "*" | "/"), 3) => Ok(Expr::Bin(
                    op.chars().next().unwrap(),
                    Box::new(parse_expr(&items[1])?),
                    Box::new(parse_expr(&items[2])?),
                )),
                ("+" | "-" | "*" | "/", _) => err(format!("operator `{head}` takes two operands in {e}")),
                _ => {
                    let args = items[1..].iter().map(atom).collect::<Result<_>>()?;
                    Ok(Expr::Fluent(head.to_ascii_lowercase(), args))
                }
            }
        }
    }
}

fn parse_cond(e: &SExpr) -> Result<Cond> {
    let items = list(e)?;
    let head = e.head().unwrap_or_default();
    match head.as_str() {
        "and" => Ok(Cond::And(items[1..].iter().map(parse_cond).collect::<Result<_>>()?)),
        "<" | ">" | "<=" | ">=" | "=" if items.len() == 3 => {
            Ok(Cond::Cmp(head, parse_expr(&items[1])?, parse_expr(&items[2])?))
        }
        "" => err("empty condition"),
        _ => Ok(Cond::Pred(head, items[1..].iter().map(atom).collect::<Result<_>>()?)),
    }
}

fn parse_timed<T>(e: &SExpr, inner: fn(&SExpr) -> Result<T>, out: &mut Vec<(When, T)>) -> Result<()> {
    let items = list(e)?;
    match e.head().as_deref() {
        Some("and") => {
            for it in &items[1..] {
                parse_timed(it, inner, out)?;
            }
            Ok(())
        }
        Some("at") if items.len() == 3 => {
            let when = match atom(&items[1])?.to_ascii_lowercase().as_str() {
                "start" => When::Start,
                "end" => When::End,
                other => return err(format!("unknown time specifier `at {other}`")),
            };
            out.push((when, inner(&items[2])?));
            Ok(())
        }
        Some("over") if items.len() == 3 && atom(&items[1])?.eq_ignore_ascii_case("all") => {
            out.push((When::OverAll, inner(&items[2])?));
            Ok(())
        }
        _ => err(format!("expected a time-annotated formula, found {e}")),
    }
}

fn parse_effect(e: &SExpr) -> Result<Effect> {
    let items = list(e)?;
    let op = match e.head().as_deref() {
        Some("assign") => EffOp::Assign,
        Some("increase") => EffOp::Increase,
        Some("decrease") => EffOp::Decrease,
        _ => return err(format!("unsupported effect {e}")),
    };
    if items.len() != 3 {
        return err(format!("effect needs a fluent and a value: {e}"));
    }
    let fl = list(&items[1])?;
    let name = atom(&fl[0])?.to_ascii_lowercase();
    let args = fl[1..].iter().map(atom).collect::<Result<_>>()?;
    Ok(Effect { op, fluent: (name, args), value: parse_expr(&items[2])? })
}

fn parse_action(items: &[SExpr]) -> Result<ActionSchema> {
    let name = atom(&items[1])?.to_ascii_lowercase();
    let mut params = Vec::new();
    let mut duration = None;
    let mut conditions = Vec::new();
    let mut effects = Vec::new();
    let mut i = 2;
    while i + 1 < items.len() {
        let key = atom(&items[i])?.to_ascii_lowercase();
        let val = &items[i + 1];
        match key.as_str() {
            ":parameters" => params = typed_list(list(val)?)?,
            ":duration" => {
                let d = list(val)?;
                if d.len() != 3 || d[0].as_atom() != Some("=") || d[1].as_atom() != Some("?duration") {
                    return err(format!("action {name}: duration must be (= ?duration <expr>)"));
                }
                duration = Some(parse_expr(&d[2])?);
            }
            ":condition" => parse_timed(val, parse_cond, &mut conditions)?,
            ":effect" => parse_timed(val, parse_effect, &mut effects)?,
            other => return err(format!("action {name}: unknown section `{other}`")),
        }
        i += 2;
    }
    let duration = duration.ok_or_else(|| Error::Format(format!("action {name}: missing :duration")))?;
    Ok(ActionSchema { name, params, duration, conditions, effects })
}

fn define_body(text: &str, kind: &str) -> Result<Vec<SExpr>> {
    let top = parse_all(text)?;
    let [doc] = top.as_slice() else {
        return err(format!("expected a single (define ...) form, found {}", top.len()));
    };
    let items = list(doc)?;
    if doc.head().as_deref() != Some("define")
        || items.len() < 2
        || list(&items[1])?.first().and_then(SExpr::as_atom) != Some(kind)
    {
        return err(format!("expected (define ({kind} ...) ...)"));
    }
    Ok(items.to_vec())
}

pub fn parse_domain(text: &str) -> Result<Domain> {
    let items = define_body(text, "domain")?;
    let name = atom(&list(&items[1])?[1])?;
    let mut d = Domain {
        name,
        requirements: Vec::new(),
        types: BTreeMap::new(),
        predicates: BTreeMap::new(),
        functions: BTreeMap::new(),
        actions: Vec::new(),
    };
    for section in &items[2..] {
        let body = list(section)?;
        match section.head().as_deref() {
            Some(":requirements") => d.requirements = body[1..].iter().map(atom).collect::<Result<_>>()?,
            Some(":types") => d.types = typed_list(&body[1..])?.into_iter().collect(),
            Some(":predicates") | Some(":functions") => {
                let is_pred = section.head().as_deref() == Some(":predicates");
                let mut k = 1;
                while k < body.len() {
                    let sig = list(&body[k])?;
                    let fname = atom(&sig[0])?.to_ascii_lowercase();
                    let args: Vec<String> = typed_list(&sig[1..])?.into_iter().map(|(_, t)| t).collect();
                    if is_pred {
                        d.predicates.insert(fname, args);
                    } else {
                        d.functions.insert(fname, args);
                    }
                    k += 1;
                    // optional "- number" return type
                    if body.get(k).and_then(SExpr::as_atom) == Some("-") {
                        k += 2;
                    }
                }
            }
            Some(":durative-action") => d.actions.push(parse_action(body)?),
            other => return err(format!("unsupported domain section {other:?}")),
        }
    }
    Ok(d)
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let items = define_body(text, "problem")?;
    let name = atom(&list(&items[1])?[1])?;
    let mut p = Problem {
        name,
        domain: String::new(),
        objects: Vec::new(),
        facts: BTreeSet::new(),
        values: BTreeMap::new(),
        goal: Cond::And(Vec::new()),
        metric: None,
    };
    for section in &items[2..] {
        let body = list(section)?;
        match section.head().as_deref() {
            Some(":domain") => p.domain = atom(&body[1])?,
            Some(":objects") => p.objects = typed_list(&body[1..])?,
            Some(":init") => {
                for fact in &body[1..] {
                    let f = list(fact)?;
                    if fact.head().as_deref() == Some("=") && f.len() == 3 {
                        let fl = list(&f[1])?;
                        let key =
                            (atom(&fl[0])?.to_ascii_lowercase(), fl[1..].iter().map(atom).collect::<Result<_>>()?);
                        let v = parse_number(&atom(&f[2])?)
                            .ok_or_else(|| Error::Format(format!("bad number in {fact}")))?;
                        p.values.insert(key, v);
                    } else {
                        let key = (atom(&f[0])?.to_ascii_lowercase(), f[1..].iter().map(atom).collect::<Result<_>>()?);
                        p.facts.insert(key);
                    }
                }
            }
            Some(":goal") => p.goal = parse_cond(&body[1])?,
            Some(":metric") => {
                let dir = atom(&body[1])?;
                p.metric = Some((dir, parse_metric_expr(&body[2])?));
            }
            other => return err(format!("unsupported problem section {other:?}")),
        }
    }
    Ok(p)
}

fn parse_metric_expr(e: &SExpr) -> Result<Expr> {
    // `total-time` is a bare reserved name inside metrics.
    match e {
        SExpr::List(l) if l.len() == 1 => Ok(Expr::Fluent(atom(&l[0])?.to_ascii_lowercase(), Vec::new())),
        _ => parse_expr(e),
    }
}

/// Structural checks beyond balanced parentheses: every predicate and fluent
/// used by an action is declared with the right arity, every variable is a
/// parameter of its action, and parameter types are declared.
pub fn check_domain(d: &Domain) -> Result<()> {
    let known_type = |t: &str| t == "object" || d.types.contains_key(t) || d.types.values().any(|p| p == t);
    for a in &d.actions {
        let vars: BTreeSet<&str> = a.params.iter().map(|(v, _)| v.as_str()).collect();
        for (v, t) in &a.params {
            if !v.starts_with('?') {
                return err(format!("action {}: parameter `{v}` must start with `?`", a.name));
            }
            if !known_type(t) {
                return err(format!("action {}: undeclared type `{t}`", a.name));
            }
        }
        let check_args = |what: &str, name: &str, args: &[String], decl: Option<&Vec<String>>| -> Result<()> {
            let decl = decl.ok_or_else(|| Error::Format(format!("action {}: undeclared {what} `{name}`", a.name)))?;
            if decl.len() != args.len() {
                return err(format!(
                    "action {}: {what} `{name}` takes {} arguments, got {}",
                    a.name,
                    decl.len(),
                    args.len()
                ));
            }
            for x in args {
                if !x.starts_with('?') || !vars.contains(x.as_str()) {
                    return err(format!("action {}: `{x}` is not a parameter", a.name));
                }
            }
            Ok(())
        };
        let mut exprs: Vec<&Expr> = vec![&a.duration];
        let mut conds: Vec<&Cond> = a.conditions.iter().map(|(_, c)| c).collect();
        while let Some(c) = conds.pop() {
            match c {
                Cond::And(cs) => conds.extend(cs),
                Cond::Pred(p, args) => check_args("predicate", p, args, d.predicates.get(p))?,
                Cond::Cmp(_, l, r) => exprs.extend([l, r]),
            }
        }
        for (_, e) in &a.effects {
            check_args("fluent", &e.fluent.0, &e.fluent.1, d.functions.get(&e.fluent.0))?;
            exprs.push(&e.value);
        }
        while let Some(e) = exprs.pop() {
            match e {
                Expr::Num(_) => {}
                Expr::Fluent(f, args) => check_args("fluent", f, args, d.functions.get(f))?,
                Expr::Neg(x) => exprs.push(x),
                Expr::Bin(_, l, r) => exprs.extend([l.as_ref(), r.as_ref()]),
            }
        }
    }
    Ok(())
}

/// Fluent and fact valuation of a problem during sequential execution.
#[derive(Clone, Debug)]
pub struct World<'a> {
    pub domain: &'a Domain,
    pub types: HashMap<String, String>,
    pub facts: BTreeSet<(String, Vec<String>)>,
    pub values: BTreeMap<(String, Vec<String>), Num>,
}

/// What one executed action observed.
#[derive(Clone, Debug)]
pub struct Step {
    pub action: String,
    pub args: Vec<String>,
    /// Fluent values right before the action started.
    pub before: BTreeMap<(String, Vec<String>), Num>,
    pub duration: Num,
}

impl<'a> World<'a> {
    pub fn new(domain: &'a Domain, problem: &Problem) -> Self {
        World {
            domain,
            types: problem.objects.iter().cloned().collect(),
            facts: problem.facts.clone(),
            values: problem.values.clone(),
        }
    }

    pub fn value(&self, name: &str, args: &[String]) -> Result<Num> {
        self.values
            .get(&(name.to_string(), args.to_vec()))
            .copied()
            .ok_or_else(|| Error::Format(format!("fluent ({name} {}) is undefined", args.join(" "))))
    }

    fn eval(&self, e: &Expr, bind: &HashMap<&str, &str>) -> Result<Num> {
        Ok(match e {
            Expr::Num(n) => *n,
            Expr::Fluent(f, args) => self.value(f, &ground(args, bind))?,
            Expr::Neg(x) => -self.eval(x, bind)?,
            Expr::Bin(op, l, r) => {
                let (a, b) = (self.eval(l, bind)?, self.eval(r, bind)?);
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ => {
                        if b.is_zero() {
                            return err("division by zero");
                        }
                        a / b
                    }
                }
            }
        })
    }

    pub fn holds(&self, c: &Cond, bind: &HashMap<&str, &str>) -> Result<bool> {
        Ok(match c {
            Cond::And(cs) => {
                for c in cs {
                    if !self.holds(c, bind)? {
                        return Ok(false);
                    }
                }
                true
            }
            Cond::Pred(p, args) => self.facts.contains(&(p.clone(), ground(args, bind))),
            Cond::Cmp(op, l, r) => {
                let (a, b) = (self.eval(l, bind)?, self.eval(r, bind)?);
                match op.as_str() {
                    "<" => a < b,
                    ">" => a > b,
                    "<=" => a <= b,
                    ">=" => a >= b,
                    _ => a == b,
                }
            }
        })
    }

    fn apply(&mut self, effects: &[&Effect], bind: &HashMap<&str, &str>) -> Result<()> {
        let mut updates = Vec::with_capacity(effects.len());
        for e in effects {
            let key = (e.fluent.0.clone(), ground(&e.fluent.1, bind));
            let rhs = self.eval(&e.value, bind)?;
            let new = match e.op {
                EffOp::Assign => rhs,
                EffOp::Increase => self.value(&key.0, &key.1)? + rhs,
                EffOp::Decrease => self.value(&key.0, &key.1)? - rhs,
            };
            updates.push((key, new));
        }
        for (k, v) in updates {
            self.values.insert(k, v);
        }
        Ok(())
    }

    /// Runs one action to completion with no other action overlapping it.
    pub fn execute(&mut self, action: &str, args: &[String]) -> Result<Step> {
        let schema = self.domain.action(action).ok_or_else(|| Error::Format(format!("unknown action `{action}`")))?;
        if schema.params.len() != args.len() {
            return err(format!("{action} takes {} arguments, got {}", schema.params.len(), args.len()));
        }
        let mut bind: HashMap<&str, &str> = HashMap::new();
        for ((var, ty), arg) in schema.params.iter().zip(args) {
            let t = self.types.get(arg).ok_or_else(|| Error::Format(format!("unknown object `{arg}`")))?;
            if !self.domain.is_subtype(t, ty) {
                return err(format!("{action}: `{arg}` is a {t}, expected {ty}"));
            }
            bind.insert(var.as_str(), arg.as_str());
        }
        let before = self.values.clone();
        let duration = self.eval(&schema.duration, &bind)?;
        if duration <= Num::zero() {
            return err(format!("{action}: non-positive duration"));
        }
        let at = |w: When| schema.conditions.iter().filter(move |(t, _)| *t == w).map(|(_, c)| c);
        let eff = |w: When| schema.effects.iter().filter(|(t, _)| *t == w).map(|(_, e)| e).collect::<Vec<_>>();
        let call = format!("({action} {})", args.join(" "));
        for c in at(When::Start) {
            if !self.holds(c, &bind)? {
                return err(format!("{call}: start condition {c:?} fails"));
            }
        }
        self.apply(&eff(When::Start), &bind)?;
        for c in at(When::OverAll).chain(at(When::End)) {
            if !self.holds(c, &bind)? {
                return err(format!("{call}: condition {c:?} fails before the end"));
            }
        }
        self.apply(&eff(When::End), &bind)?;
        Ok(Step { action: schema.name.clone(), args: args.to_vec(), before, duration })
    }
}

fn ground(args: &[String], bind: &HashMap<&str, &str>) -> Vec<String> {
    args.iter().map(|a| bind.get(a.as_str()).map_or_else(|| a.clone(), |s| s.to_string())).collect()
}
