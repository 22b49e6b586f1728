//! Typed STRIPS fragment of PPDDL: domains with probabilistic effects,
//! negative preconditions, and equality; problems with universally
//! quantified goals.
//!
//! Outcome probabilities are kept as exact rationals so that implicit
//! no-op completion and nested `probabilistic` products are bit-exact;
//! solvers convert to floating point when they build transition tables.
//! Unsupported PPDDL constructs (conditional effects, axioms, fluents)
//! are rejected by name rather than silently ignored.

pub mod ground;

use crate::sexpr::{self, Pos, Sexpr, SexprError};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Exact outcome probability.
pub type Prob = Ratio<i64>;

/// Root type; always present at index 0 of `DomainDef::types`.
pub const OBJECT_TYPE: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    /// Index of the parent type; `object` is its own parent.
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<Param>,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Atom inside a schema; arguments index the schema's parameter list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LiftedAtom {
    pub pred: usize,
    pub args: Vec<usize>,
}

/// Conjunctive precondition, normalized into literal classes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Precondition {
    pub pos: Vec<LiftedAtom>,
    pub neg: Vec<LiftedAtom>,
    /// Parameter pairs required equal / distinct; resolved at grounding.
    pub eq: Vec<(usize, usize)>,
    pub neq: Vec<(usize, usize)>,
}

/// One outcome of a probabilistic effect. `del` is disjoint from `add`
/// (deletes are applied first, so an atom in both reduces to an add).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectOutcome {
    pub prob: Prob,
    pub add: Vec<LiftedAtom>,
    pub del: Vec<LiftedAtom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: Precondition,
    /// Flattened outcomes; probabilities sum to exactly 1.
    pub outcomes: Vec<EffectOutcome>,
    pub cost: Prob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDef>,
    pub predicates: Vec<PredicateDef>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDef {
    pub name: String,
    pub ty: usize,
}

/// Fully instantiated atom; arguments index the problem's object list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: usize,
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalTerm {
    Object(usize),
    /// Index into the stack of quantifier binders enclosing the atom.
    Var(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    Atom { pred: usize, args: Vec<GoalTerm> },
    And(Vec<Goal>),
    Not(Box<Goal>),
    Imply(Box<Goal>, Box<Goal>),
    Forall { vars: Vec<Param>, body: Box<Goal> },
    Eq(GoalTerm, GoalTerm),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: Vec<ObjectDef>,
    pub init: Vec<GroundAtom>,
    pub goal: Goal,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Read(#[from] SexprError),
    #[error("{pos}: expected {what}")]
    Expected { what: String, pos: Pos },
    #[error("{pos}: unsupported construct: {what}")]
    Unsupported { what: String, pos: Pos },
    #[error("{pos}: unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String, pos: Pos },
    #[error("{pos}: duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String, pos: Pos },
    #[error("{pos}: `{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize, pos: Pos },
    #[error("{pos}: invalid probability `{token}`")]
    BadProbability { token: String, pos: Pos },
    #[error("{pos}: outcome probabilities sum to {sum} > 1")]
    ProbabilitySum { sum: String, pos: Pos },
    #[error("{pos}: object `{object}` is not of type `{expected}`")]
    TypeMismatch { object: String, expected: String, pos: Pos },
    #[error("problem requires domain `{want}`, got `{got}`")]
    DomainMismatch { want: String, got: String },
    #[error("{pos}: invalid cost `{token}`")]
    BadCost { token: String, pos: Pos },
}

impl DomainDef {
    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    /// True when `a` equals `b` or is a descendant of `b`.
    pub fn is_subtype(&self, a: usize, b: usize) -> bool {
        let mut t = a;
        loop {
            if t == b {
                return true;
            }
            let parent = self.types[t].parent;
            if parent == t {
                return false;
            }
            t = parent;
        }
    }

    /// Predicates never added or deleted by any schema.
    pub fn static_predicates(&self) -> Vec<bool> {
        let mut is_static = vec![true; self.predicates.len()];
        for schema in &self.actions {
            for outcome in &schema.outcomes {
                for atom in outcome.add.iter().chain(&outcome.del) {
                    is_static[atom.pred] = false;
                }
            }
        }
        is_static
    }
}

// ---------------------------------------------------------------------------
// parsing

pub fn parse_domain(src: &str) -> Result<DomainDef, ParseError> {
    let expr = sexpr::parse_one(src)?;
    let items = expect_list(&expr, "domain definition")?;
    expect_head(items, expr.pos(), "define")?;

    let name_list = items
        .get(1)
        .and_then(|e| e.as_list())
        .ok_or_else(|| expected("(domain NAME)", expr.pos()))?;
    if name_list.first().and_then(|e| e.as_sym()) != Some("domain") || name_list.len() != 2 {
        return Err(expected("(domain NAME)", items[1].pos()));
    }
    let name = sym(&name_list[1], "domain name")?.0.to_string();

    let mut dom = DomainDef {
        name,
        requirements: Vec::new(),
        types: vec![TypeDef { name: "object".into(), parent: OBJECT_TYPE }],
        predicates: Vec::new(),
        actions: Vec::new(),
    };

    for section in &items[2..] {
        let body = expect_list(section, "domain section")?;
        let (head, head_pos) = sym(
            body.first().ok_or_else(|| expected("domain section", section.pos()))?,
            "section keyword",
        )?;
        match head {
            ":requirements" => {
                for req in &body[1..] {
                    dom.requirements.push(sym(req, "requirement")?.0.to_string());
                }
            }
            ":types" => parse_types(&mut dom, &body[1..], head_pos)?,
            ":predicates" => parse_predicates(&mut dom, &body[1..])?,
            ":action" => {
                let schema = parse_action(&dom, &body[1..], head_pos)?;
                if dom.actions.iter().any(|a| a.name == schema.name) {
                    return Err(ParseError::Duplicate {
                        kind: "action",
                        name: schema.name,
                        pos: head_pos,
                    });
                }
                dom.actions.push(schema);
            }
            ":constants" | ":functions" | ":derived" | ":axiom" => {
                return Err(unsupported(head, head_pos));
            }
            other => return Err(expected(&format!("domain section, got `{other}`"), head_pos)),
        }
    }
    Ok(dom)
}

fn parse_types(dom: &mut DomainDef, items: &[Sexpr], pos: Pos) -> Result<(), ParseError> {
    let entries = parse_typed_list(items, pos)?;
    // first pass declares names so parents can appear in any order
    for (name, _, entry_pos) in &entries {
        if dom.types.iter().any(|t| t.name == *name) {
            return Err(ParseError::Duplicate { kind: "type", name: name.clone(), pos: *entry_pos });
        }
        dom.types.push(TypeDef { name: name.clone(), parent: OBJECT_TYPE });
    }
    for (name, parent_name, entry_pos) in &entries {
        let parent = match parent_name {
            None => OBJECT_TYPE,
            Some(p) => match dom.type_index(p) {
                Some(idx) => idx,
                None => {
                    // undeclared parents are implicitly subtypes of object
                    dom.types.push(TypeDef { name: p.clone(), parent: OBJECT_TYPE });
                    dom.types.len() - 1
                }
            },
        };
        let idx = dom.type_index(name).unwrap();
        if idx == parent {
            return Err(expected("acyclic type hierarchy", *entry_pos));
        }
        dom.types[idx].parent = parent;
    }
    Ok(())
}

fn parse_predicates(dom: &mut DomainDef, items: &[Sexpr]) -> Result<(), ParseError> {
    for item in items {
        let body = expect_list(item, "predicate declaration")?;
        let (name, pos) = sym(
            body.first().ok_or_else(|| expected("predicate name", item.pos()))?,
            "predicate name",
        )?;
        if dom.predicates.iter().any(|p| p.name == name) {
            return Err(ParseError::Duplicate { kind: "predicate", name: name.into(), pos });
        }
        let params = parse_params(dom, &body[1..], pos)?;
        dom.predicates.push(PredicateDef { name: name.into(), params });
    }
    Ok(())
}

/// Typed-list parser: `a b - t c - t2 d` with untyped tail defaulting to object.
fn parse_typed_list(
    items: &[Sexpr],
    pos: Pos,
) -> Result<Vec<(String, Option<String>, Pos)>, ParseError> {
    let mut out: Vec<(String, Option<String>, Pos)> = Vec::new();
    let mut pending = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let (s, item_pos) = sym(item, "name or `-`")?;
        if s == "-" {
            let ty = iter.next().ok_or_else(|| expected("type name after `-`", item_pos))?;
            let (ty_name, ty_pos) = sym(ty, "type name")?;
            if ty_name == "either" || ty.as_list().is_some() {
                return Err(unsupported("either type", ty_pos));
            }
            if pending.is_empty() {
                return Err(expected("names before `-`", item_pos));
            }
            for (name, name_pos) in pending.drain(..) {
                out.push((name, Some(ty_name.to_string()), name_pos));
            }
        } else {
            pending.push((s.to_string(), item_pos));
        }
    }
    for (name, name_pos) in pending {
        out.push((name, None, name_pos));
    }
    let _ = pos;
    Ok(out)
}

fn parse_params(dom: &DomainDef, items: &[Sexpr], pos: Pos) -> Result<Vec<Param>, ParseError> {
    let mut params = Vec::new();
    for (name, ty_name, entry_pos) in parse_typed_list(items, pos)? {
        if !name.starts_with('?') {
            return Err(expected("variable starting with `?`", entry_pos));
        }
        let ty = match ty_name {
            None => OBJECT_TYPE,
            Some(t) => dom
                .type_index(&t)
                .ok_or(ParseError::Unknown { kind: "type", name: t, pos: entry_pos })?,
        };
        params.push(Param { name, ty });
    }
    Ok(params)
}

fn parse_action(dom: &DomainDef, items: &[Sexpr], pos: Pos) -> Result<ActionSchema, ParseError> {
    let (name, _) = sym(items.first().ok_or_else(|| expected("action name", pos))?, "action name")?;
    let mut params = Vec::new();
    let mut precondition = Precondition::default();
    let mut outcomes = None;
    let mut cost = Prob::one();

    let mut iter = items[1..].iter();
    while let Some(key_expr) = iter.next() {
        let (key, key_pos) = sym(key_expr, "action keyword")?;
        let value = iter.next().ok_or_else(|| expected(&format!("value after {key}"), key_pos))?;
        match key {
            ":parameters" => {
                let list = expect_list(value, "parameter list")?;
                params = parse_params(dom, list, value.pos())?;
                let mut seen = BTreeSet::new();
                for p in &params {
                    if !seen.insert(p.name.as_str()) {
                        return Err(ParseError::Duplicate {
                            kind: "parameter",
                            name: p.name.clone(),
                            pos: value.pos(),
                        });
                    }
                }
            }
            ":precondition" => {
                precondition = Precondition::default();
                parse_precondition(dom, &params, value, false, &mut precondition)?;
            }
            ":effect" => {
                let tree = parse_effect(dom, &params, value)?;
                outcomes = Some(flatten_effect(tree, value.pos())?);
            }
            ":cost" => {
                let (token, token_pos) = sym(value, "cost")?;
                cost = parse_number(token).ok_or(ParseError::BadCost {
                    token: token.into(),
                    pos: token_pos,
                })?;
                if cost.is_negative() {
                    return Err(ParseError::BadCost { token: token.into(), pos: token_pos });
                }
            }
            other => return Err(expected(&format!("action keyword, got `{other}`"), key_pos)),
        }
    }

    let outcomes = outcomes.ok_or_else(|| expected(":effect", pos))?;
    Ok(ActionSchema { name: name.into(), params, precondition, outcomes, cost })
}

fn resolve_atom(
    dom: &DomainDef,
    params: &[Param],
    items: &[Sexpr],
    pos: Pos,
) -> Result<LiftedAtom, ParseError> {
    let (pred_name, pred_pos) = sym(&items[0], "predicate name")?;
    let pred = dom.predicate_index(pred_name).ok_or(ParseError::Unknown {
        kind: "predicate",
        name: pred_name.into(),
        pos: pred_pos,
    })?;
    let expected_arity = dom.predicates[pred].arity();
    if items.len() - 1 != expected_arity {
        return Err(ParseError::Arity {
            name: pred_name.into(),
            expected: expected_arity,
            got: items.len() - 1,
            pos,
        });
    }
    let mut args = Vec::with_capacity(expected_arity);
    for arg in &items[1..] {
        args.push(resolve_param(params, arg)?);
    }
    Ok(LiftedAtom { pred, args })
}

fn resolve_param(params: &[Param], expr: &Sexpr) -> Result<usize, ParseError> {
    let (name, pos) = sym(expr, "variable")?;
    params.iter().position(|p| p.name == name).ok_or(ParseError::Unknown {
        kind: "variable",
        name: name.into(),
        pos,
    })
}

fn parse_precondition(
    dom: &DomainDef,
    params: &[Param],
    expr: &Sexpr,
    negated: bool,
    pre: &mut Precondition,
) -> Result<(), ParseError> {
    let items = expect_list(expr, "precondition formula")?;
    let (head, head_pos) =
        sym(items.first().ok_or_else(|| expected("precondition formula", expr.pos()))?, "formula")?;
    match head {
        "and" => {
            if negated {
                return Err(unsupported("negated conjunction in precondition", head_pos));
            }
            for sub in &items[1..] {
                parse_precondition(dom, params, sub, false, pre)?;
            }
        }
        "not" => {
            if items.len() != 2 {
                return Err(expected("(not FORMULA)", head_pos));
            }
            parse_precondition(dom, params, &items[1], !negated, pre)?;
        }
        "=" => {
            if items.len() != 3 {
                return Err(expected("(= TERM TERM)", head_pos));
            }
            let a = resolve_param(params, &items[1])?;
            let b = resolve_param(params, &items[2])?;
            if negated {
                pre.neq.push((a, b));
            } else {
                pre.eq.push((a, b));
            }
        }
        "or" | "imply" | "exists" | "forall" => {
            return Err(unsupported(&format!("{head} in precondition"), head_pos));
        }
        _ => {
            let atom = resolve_atom(dom, params, items, expr.pos())?;
            if negated {
                pre.neg.push(atom);
            } else {
                pre.pos.push(atom);
            }
        }
    }
    Ok(())
}

enum EffTree {
    Add(LiftedAtom),
    Del(LiftedAtom),
    All(Vec<EffTree>),
    Choice(Vec<(Prob, EffTree)>),
    Noop,
}

fn parse_effect(dom: &DomainDef, params: &[Param], expr: &Sexpr) -> Result<EffTree, ParseError> {
    let items = expect_list(expr, "effect")?;
    let Some(first) = items.first() else {
        return Ok(EffTree::Noop); // (and) and () are empty effects
    };
    let (head, head_pos) = sym(first, "effect")?;
    match head {
        "and" => {
            let mut children = Vec::with_capacity(items.len() - 1);
            for sub in &items[1..] {
                children.push(parse_effect(dom, params, sub)?);
            }
            Ok(EffTree::All(children))
        }
        "not" => {
            if items.len() != 2 {
                return Err(expected("(not ATOM)", head_pos));
            }
            let atom_items = expect_list(&items[1], "atom")?;
            Ok(EffTree::Del(resolve_atom(dom, params, atom_items, items[1].pos())?))
        }
        "probabilistic" => {
            let rest = &items[1..];
            if rest.len() % 2 != 0 {
                return Err(expected("probability/effect pairs", head_pos));
            }
            let mut branches = Vec::with_capacity(rest.len() / 2);
            for pair in rest.chunks(2) {
                let (token, token_pos) = sym(&pair[0], "probability")?;
                let p = parse_number(token)
                    .filter(|p| p > &Prob::zero() && p <= &Prob::one())
                    .ok_or(ParseError::BadProbability { token: token.into(), pos: token_pos })?;
                branches.push((p, parse_effect(dom, params, &pair[1])?));
            }
            Ok(EffTree::Choice(branches))
        }
        "when" => Err(unsupported("conditional effect (when)", head_pos)),
        "forall" => Err(unsupported("quantified effect", head_pos)),
        "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => {
            Err(unsupported("fluent effect", head_pos))
        }
        _ => Ok(EffTree::Add(resolve_atom(dom, params, items, expr.pos())?)),
    }
}

/// Distributes conjunctions over probabilistic choices into a flat outcome
/// list, completing any probability deficit with an implicit no-op.
fn flatten_effect(tree: EffTree, pos: Pos) -> Result<Vec<EffectOutcome>, ParseError> {
    struct Partial {
        prob: Prob,
        add: BTreeSet<LiftedAtom>,
        del: BTreeSet<LiftedAtom>,
    }

    fn walk(tree: EffTree, pos: Pos) -> Result<Vec<Partial>, ParseError> {
        Ok(match tree {
            EffTree::Noop => {
                vec![Partial { prob: Prob::one(), add: BTreeSet::new(), del: BTreeSet::new() }]
            }
            EffTree::Add(a) => vec![Partial {
                prob: Prob::one(),
                add: BTreeSet::from([a]),
                del: BTreeSet::new(),
            }],
            EffTree::Del(a) => vec![Partial {
                prob: Prob::one(),
                add: BTreeSet::new(),
                del: BTreeSet::from([a]),
            }],
            EffTree::All(children) => {
                let mut acc =
                    vec![Partial { prob: Prob::one(), add: BTreeSet::new(), del: BTreeSet::new() }];
                for child in children {
                    let branches = walk(child, pos)?;
                    let mut next = Vec::with_capacity(acc.len() * branches.len());
                    for left in &acc {
                        for right in &branches {
                            let mut add = left.add.clone();
                            let mut del = left.del.clone();
                            add.extend(right.add.iter().cloned());
                            del.extend(right.del.iter().cloned());
                            next.push(Partial { prob: left.prob * right.prob, add, del });
                        }
                    }
                    acc = next;
                }
                acc
            }
            EffTree::Choice(branches) => {
                let mut total = Prob::zero();
                let mut out = Vec::new();
                for (p, sub) in branches {
                    total += p;
                    if total > Prob::one() {
                        return Err(ParseError::ProbabilitySum { sum: total.to_string(), pos });
                    }
                    for mut partial in walk(sub, pos)? {
                        partial.prob *= p;
                        out.push(partial);
                    }
                }
                if total < Prob::one() {
                    out.push(Partial {
                        prob: Prob::one() - total,
                        add: BTreeSet::new(),
                        del: BTreeSet::new(),
                    });
                }
                out
            }
        })
    }

    let mut outcomes: Vec<EffectOutcome> = Vec::new();
    for partial in walk(tree, pos)? {
        // deletes lose to adds within one outcome
        let del: Vec<_> = partial.del.difference(&partial.add).cloned().collect();
        let add: Vec<_> = partial.add.into_iter().collect();
        match outcomes.iter_mut().find(|o| o.add == add && o.del == del) {
            Some(existing) => existing.prob += partial.prob,
            None => outcomes.push(EffectOutcome { prob: partial.prob, add, del }),
        }
    }
    debug_assert_eq!(outcomes.iter().map(|o| o.prob).sum::<Prob>(), Prob::one());
    Ok(outcomes)
}

/// Accepts integers, decimals, and `p/q` fractions; exact arithmetic.
fn parse_number(token: &str) -> Option<Prob> {
    if let Some((num, den)) = token.split_once('/') {
        let num: i64 = num.parse().ok()?;
        let den: i64 = den.parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Prob::new(num, den));
    }
    if let Some((int, frac)) = token.split_once('.') {
        let int_part: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        if frac.is_empty() {
            return Some(Prob::from_integer(int_part));
        }
        if frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let frac_part: i64 = frac.parse().ok()?;
        let scale = 10i64.pow(frac.len() as u32);
        return Some(Prob::from_integer(int_part) + Prob::new(frac_part, scale));
    }
    token.parse::<i64>().ok().map(Prob::from_integer)
}

pub fn parse_problem(src: &str, dom: &DomainDef) -> Result<ProblemDef, ParseError> {
    let expr = sexpr::parse_one(src)?;
    let items = expect_list(&expr, "problem definition")?;
    expect_head(items, expr.pos(), "define")?;

    let name_list = items
        .get(1)
        .and_then(|e| e.as_list())
        .ok_or_else(|| expected("(problem NAME)", expr.pos()))?;
    if name_list.first().and_then(|e| e.as_sym()) != Some("problem") || name_list.len() != 2 {
        return Err(expected("(problem NAME)", items[1].pos()));
    }

    let mut problem = ProblemDef {
        name: sym(&name_list[1], "problem name")?.0.to_string(),
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Goal::And(Vec::new()),
    };
    let mut saw_goal = false;

    for section in &items[2..] {
        let body = expect_list(section, "problem section")?;
        let (head, head_pos) = sym(
            body.first().ok_or_else(|| expected("problem section", section.pos()))?,
            "section keyword",
        )?;
        match head {
            ":domain" => {
                problem.domain = sym(&body[1], "domain name")?.0.to_string();
                if problem.domain != dom.name {
                    return Err(ParseError::DomainMismatch {
                        want: problem.domain.clone(),
                        got: dom.name.clone(),
                    });
                }
            }
            ":objects" => {
                for (name, ty_name, entry_pos) in parse_typed_list(&body[1..], head_pos)? {
                    if problem.objects.iter().any(|o| o.name == name) {
                        return Err(ParseError::Duplicate {
                            kind: "object",
                            name,
                            pos: entry_pos,
                        });
                    }
                    let ty = match ty_name {
                        None => OBJECT_TYPE,
                        Some(t) => dom.type_index(&t).ok_or(ParseError::Unknown {
                            kind: "type",
                            name: t,
                            pos: entry_pos,
                        })?,
                    };
                    problem.objects.push(ObjectDef { name, ty });
                }
            }
            ":init" => {
                for atom_expr in &body[1..] {
                    let atom = parse_ground_atom(dom, &problem.objects, atom_expr)?;
                    if !problem.init.contains(&atom) {
                        problem.init.push(atom);
                    }
                }
            }
            ":goal" => {
                if body.len() != 2 {
                    return Err(expected("(:goal FORMULA)", head_pos));
                }
                let mut binders = Vec::new();
                problem.goal = parse_goal(dom, &problem.objects, &body[1], &mut binders)?;
                saw_goal = true;
            }
            ":metric" | ":reward" => return Err(unsupported(head, head_pos)),
            other => return Err(expected(&format!("problem section, got `{other}`"), head_pos)),
        }
    }
    if !saw_goal {
        return Err(expected(":goal section", expr.pos()));
    }
    Ok(problem)
}

fn parse_ground_atom(
    dom: &DomainDef,
    objects: &[ObjectDef],
    expr: &Sexpr,
) -> Result<GroundAtom, ParseError> {
    let items = expect_list(expr, "atom")?;
    let (pred_name, pred_pos) =
        sym(items.first().ok_or_else(|| expected("atom", expr.pos()))?, "predicate name")?;
    let pred = dom.predicate_index(pred_name).ok_or(ParseError::Unknown {
        kind: "predicate",
        name: pred_name.into(),
        pos: pred_pos,
    })?;
    let def = &dom.predicates[pred];
    if items.len() - 1 != def.arity() {
        return Err(ParseError::Arity {
            name: pred_name.into(),
            expected: def.arity(),
            got: items.len() - 1,
            pos: expr.pos(),
        });
    }
    let mut args = Vec::with_capacity(def.arity());
    for (arg, param) in items[1..].iter().zip(&def.params) {
        let (obj_name, obj_pos) = sym(arg, "object name")?;
        let obj = objects.iter().position(|o| o.name == obj_name).ok_or(ParseError::Unknown {
            kind: "object",
            name: obj_name.into(),
            pos: obj_pos,
        })?;
        if !dom.is_subtype(objects[obj].ty, param.ty) {
            return Err(ParseError::TypeMismatch {
                object: obj_name.into(),
                expected: dom.types[param.ty].name.clone(),
                pos: obj_pos,
            });
        }
        args.push(obj);
    }
    Ok(GroundAtom { pred, args })
}

fn parse_goal(
    dom: &DomainDef,
    objects: &[ObjectDef],
    expr: &Sexpr,
    binders: &mut Vec<Param>,
) -> Result<Goal, ParseError> {
    let items = expect_list(expr, "goal formula")?;
    let (head, head_pos) =
        sym(items.first().ok_or_else(|| expected("goal formula", expr.pos()))?, "goal formula")?;
    match head {
        "and" => {
            let mut subs = Vec::with_capacity(items.len() - 1);
            for sub in &items[1..] {
                subs.push(parse_goal(dom, objects, sub, binders)?);
            }
            Ok(Goal::And(subs))
        }
        "not" => {
            if items.len() != 2 {
                return Err(expected("(not FORMULA)", head_pos));
            }
            Ok(Goal::Not(Box::new(parse_goal(dom, objects, &items[1], binders)?)))
        }
        "imply" => {
            if items.len() != 3 {
                return Err(expected("(imply ANTECEDENT CONSEQUENT)", head_pos));
            }
            let a = parse_goal(dom, objects, &items[1], binders)?;
            let b = parse_goal(dom, objects, &items[2], binders)?;
            Ok(Goal::Imply(Box::new(a), Box::new(b)))
        }
        "forall" => {
            if items.len() != 3 {
                return Err(expected("(forall (VARS) FORMULA)", head_pos));
            }
            let var_list = expect_list(&items[1], "quantified variables")?;
            let vars = parse_params(dom, var_list, items[1].pos())?;
            binders.extend(vars.iter().cloned());
            let body = parse_goal(dom, objects, &items[2], binders)?;
            binders.truncate(binders.len() - vars.len());
            Ok(Goal::Forall { vars, body: Box::new(body) })
        }
        "exists" => Err(unsupported("existential goal", head_pos)),
        "=" => {
            if items.len() != 3 {
                return Err(expected("(= TERM TERM)", head_pos));
            }
            let a = parse_goal_term(objects, binders, &items[1])?;
            let b = parse_goal_term(objects, binders, &items[2])?;
            Ok(Goal::Eq(a, b))
        }
        pred_name => {
            let pred = dom.predicate_index(pred_name).ok_or(ParseError::Unknown {
                kind: "predicate",
                name: pred_name.into(),
                pos: head_pos,
            })?;
            let def = &dom.predicates[pred];
            if items.len() - 1 != def.arity() {
                return Err(ParseError::Arity {
                    name: pred_name.into(),
                    expected: def.arity(),
                    got: items.len() - 1,
                    pos: expr.pos(),
                });
            }
            let mut args = Vec::with_capacity(def.arity());
            for (arg, param) in items[1..].iter().zip(&def.params) {
                let term = parse_goal_term(objects, binders, arg)?;
                let term_ty = match term {
                    GoalTerm::Object(o) => objects[o].ty,
                    GoalTerm::Var(v) => binders[v].ty,
                };
                if !dom.is_subtype(term_ty, param.ty) {
                    return Err(ParseError::TypeMismatch {
                        object: sym(arg, "term")?.0.into(),
                        expected: dom.types[param.ty].name.clone(),
                        pos: arg.pos(),
                    });
                }
            }
            for arg in &items[1..] {
                args.push(parse_goal_term(objects, binders, arg)?);
            }
            Ok(Goal::Atom { pred, args })
        }
    }
}

fn parse_goal_term(
    objects: &[ObjectDef],
    binders: &[Param],
    expr: &Sexpr,
) -> Result<GoalTerm, ParseError> {
    let (name, pos) = sym(expr, "term")?;
    if name.starts_with('?') {
        // innermost binder wins on shadowing
        return binders
            .iter()
            .rposition(|p| p.name == name)
            .map(GoalTerm::Var)
            .ok_or(ParseError::Unknown { kind: "variable", name: name.into(), pos });
    }
    objects
        .iter()
        .position(|o| o.name == name)
        .map(GoalTerm::Object)
        .ok_or(ParseError::Unknown { kind: "object", name: name.into(), pos })
}

// ---------------------------------------------------------------------------
// pretty-printing

/// Renders a rational as a decimal when it is exact, else `p/q`.
fn format_number(p: &Prob) -> String {
    let (mut num, mut den) = (*p.numer(), *p.denom());
    if den == 1 {
        return num.to_string();
    }
    let mut digits = 0u32;
    let (mut d2, mut d5) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        d2 += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        d5 += 1;
    }
    if den == 1 {
        digits = d2.max(d5);
        num *= 10i64.pow(digits) / p.denom();
        let int = num / 10i64.pow(digits);
        let frac = (num % 10i64.pow(digits)).abs();
        return format!("{int}.{frac:0width$}", width = digits as usize);
    }
    let _ = digits;
    format!("{}/{}", p.numer(), p.denom())
}

impl DomainDef {
    fn write_typed_names<F: Fn(usize) -> (String, usize)>(
        &self,
        out: &mut String,
        count: usize,
        get: F,
    ) {
        let mut i = 0;
        while i < count {
            let (_, ty) = get(i);
            let mut j = i;
            while j < count && get(j).1 == ty {
                j += 1;
            }
            for k in i..j {
                if k > i || i > 0 {
                    out.push(' ');
                }
                out.push_str(&get(k).0);
            }
            if ty != OBJECT_TYPE {
                write!(out, " - {}", self.types[ty].name).unwrap();
            }
            i = j;
        }
    }

    fn format_params(&self, params: &[Param]) -> String {
        let mut out = String::new();
        self.write_typed_names(&mut out, params.len(), |i| {
            (params[i].name.clone(), params[i].ty)
        });
        out
    }

    fn format_lifted(&self, atom: &LiftedAtom, params: &[Param]) -> String {
        let mut s = format!("({}", self.predicates[atom.pred].name);
        for &a in &atom.args {
            write!(s, " {}", params[a].name).unwrap();
        }
        s.push(')');
        s
    }

    fn format_outcome_effect(&self, outcome: &EffectOutcome, params: &[Param]) -> String {
        let mut parts = Vec::new();
        for atom in &outcome.add {
            parts.push(self.format_lifted(atom, params));
        }
        for atom in &outcome.del {
            parts.push(format!("(not {})", self.format_lifted(atom, params)));
        }
        match parts.len() {
            0 => "(and)".to_string(),
            1 => parts.pop().unwrap(),
            _ => format!("(and {})", parts.join(" ")),
        }
    }

    pub fn to_ppddl(&self) -> String {
        let mut out = String::new();
        writeln!(out, "(define (domain {})", self.name).unwrap();
        if !self.requirements.is_empty() {
            writeln!(out, "  (:requirements {})", self.requirements.join(" ")).unwrap();
        }
        if self.types.len() > 1 {
            let mut types = String::new();
            self.write_typed_names(&mut types, self.types.len() - 1, |i| {
                (self.types[i + 1].name.clone(), self.types[i + 1].parent)
            });
            writeln!(out, "  (:types {types})").unwrap();
        }
        if !self.predicates.is_empty() {
            writeln!(out, "  (:predicates").unwrap();
            for pred in &self.predicates {
                let params = self.format_params(&pred.params);
                if params.is_empty() {
                    writeln!(out, "    ({})", pred.name).unwrap();
                } else {
                    writeln!(out, "    ({} {})", pred.name, params).unwrap();
                }
            }
            writeln!(out, "  )").unwrap();
        }
        for schema in &self.actions {
            writeln!(out, "  (:action {}", schema.name).unwrap();
            writeln!(out, "    :parameters ({})", self.format_params(&schema.params)).unwrap();
            let pre = &schema.precondition;
            let mut parts = Vec::new();
            for atom in &pre.pos {
                parts.push(self.format_lifted(atom, &schema.params));
            }
            for atom in &pre.neg {
                parts.push(format!("(not {})", self.format_lifted(atom, &schema.params)));
            }
            for &(a, b) in &pre.eq {
                parts.push(format!("(= {} {})", schema.params[a].name, schema.params[b].name));
            }
            for &(a, b) in &pre.neq {
                parts.push(format!("(not (= {} {}))", schema.params[a].name, schema.params[b].name));
            }
            if !parts.is_empty() {
                writeln!(out, "    :precondition (and {})", parts.join(" ")).unwrap();
            }
            if schema.cost != Prob::one() {
                writeln!(out, "    :cost {}", format_number(&schema.cost)).unwrap();
            }
            if schema.outcomes.len() == 1 {
                writeln!(
                    out,
                    "    :effect {})",
                    self.format_outcome_effect(&schema.outcomes[0], &schema.params)
                )
                .unwrap();
            } else {
                writeln!(out, "    :effect (probabilistic").unwrap();
                for outcome in &schema.outcomes {
                    // the implicit no-op is reconstructed on parse
                    if outcome.add.is_empty() && outcome.del.is_empty() {
                        continue;
                    }
                    writeln!(
                        out,
                        "      {} {}",
                        format_number(&outcome.prob),
                        self.format_outcome_effect(outcome, &schema.params)
                    )
                    .unwrap();
                }
                writeln!(out, "    ))").unwrap();
            }
        }
        out.push_str(")\n");
        out
    }
}

impl ProblemDef {
    fn format_goal(&self, dom: &DomainDef, goal: &Goal, binders: &mut Vec<Param>) -> String {
        match goal {
            Goal::Atom { pred, args } => {
                let mut s = format!("({}", dom.predicates[*pred].name);
                for arg in args {
                    match arg {
                        GoalTerm::Object(o) => write!(s, " {}", self.objects[*o].name).unwrap(),
                        GoalTerm::Var(v) => write!(s, " {}", binders[*v].name).unwrap(),
                    }
                }
                s.push(')');
                s
            }
            Goal::And(subs) => {
                let parts: Vec<_> =
                    subs.iter().map(|g| self.format_goal(dom, g, binders)).collect();
                format!("(and {})", parts.join(" "))
            }
            Goal::Not(sub) => format!("(not {})", self.format_goal(dom, sub, binders)),
            Goal::Imply(a, b) => format!(
                "(imply {} {})",
                self.format_goal(dom, a, binders),
                self.format_goal(dom, b, binders)
            ),
            Goal::Forall { vars, body } => {
                binders.extend(vars.iter().cloned());
                let inner = self.format_goal(dom, body, binders);
                binders.truncate(binders.len() - vars.len());
                format!("(forall ({}) {})", dom.format_params(vars), inner)
            }
            Goal::Eq(a, b) => {
                let term = |t: &GoalTerm| match t {
                    GoalTerm::Object(o) => self.objects[*o].name.clone(),
                    GoalTerm::Var(v) => binders[*v].name.clone(),
                };
                format!("(= {} {})", term(a), term(b))
            }
        }
    }

    pub fn to_ppddl(&self, dom: &DomainDef) -> String {
        let mut out = String::new();
        writeln!(out, "(define (problem {})", self.name).unwrap();
        writeln!(out, "  (:domain {})", self.domain).unwrap();
        if !self.objects.is_empty() {
            let mut names = String::new();
            dom.write_typed_names(&mut names, self.objects.len(), |i| {
                (self.objects[i].name.clone(), self.objects[i].ty)
            });
            writeln!(out, "  (:objects {names})").unwrap();
        }
        writeln!(out, "  (:init").unwrap();
        for atom in &self.init {
            let mut s = format!("({}", dom.predicates[atom.pred].name);
            for &o in &atom.args {
                write!(s, " {}", self.objects[o].name).unwrap();
            }
            s.push(')');
            writeln!(out, "    {s}").unwrap();
        }
        writeln!(out, "  )").unwrap();
        let mut binders = Vec::new();
        writeln!(out, "  (:goal {}))", self.format_goal(dom, &self.goal, &mut binders)).unwrap();
        out
    }
}

// ---------------------------------------------------------------------------
// sexpr helpers

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], ParseError> {
    e.as_list().ok_or_else(|| expected(what, e.pos()))
}

fn sym<'a>(e: &'a Sexpr, what: &str) -> Result<(&'a str, Pos), ParseError> {
    e.as_sym().map(|s| (s, e.pos())).ok_or_else(|| expected(what, e.pos()))
}

fn expect_head(items: &[Sexpr], pos: Pos, head: &str) -> Result<(), ParseError> {
    if items.first().and_then(|e| e.as_sym()) == Some(head) {
        Ok(())
    } else {
        Err(expected(&format!("({head} ...)"), pos))
    }
}

fn expected(what: &str, pos: Pos) -> ParseError {
    ParseError::Expected { what: what.into(), pos }
}

fn unsupported(what: &str, pos: Pos) -> ParseError {
    ParseError::Unsupported { what: what.into(), pos }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
        (define (domain tiny)
          (:requirements :strips :probabilistic-effects)
          (:predicates (p ?x) (q ?x ?y) (flag))
          (:action set-flag
            :parameters ()
            :effect (flag))
          (:action toss
            :parameters (?a ?b)
            :precondition (and (p ?a) (not (q ?a ?b)) (not (= ?a ?b)))
            :effect (probabilistic 0.8 (and (q ?a ?b) (not (p ?a))))))
    "#;

    #[test]
    fn parses_tiny_domain() {
        let dom = parse_domain(TINY).unwrap();
        assert_eq!(dom.name, "tiny");
        assert_eq!(dom.predicates.len(), 3);
        assert_eq!(dom.actions.len(), 2);
        let set_flag = &dom.actions[0];
        assert!(set_flag.params.is_empty());
        assert_eq!(set_flag.outcomes.len(), 1);
        assert_eq!(set_flag.outcomes[0].prob, Prob::one());
    }

    #[test]
    fn completes_probability_deficit_with_noop() {
        let dom = parse_domain(TINY).unwrap();
        let toss = &dom.actions[1];
        assert_eq!(toss.outcomes.len(), 2);
        assert_eq!(toss.outcomes[0].prob, Prob::new(4, 5));
        assert_eq!(toss.outcomes[1].prob, Prob::new(1, 5));
        assert!(toss.outcomes[1].add.is_empty() && toss.outcomes[1].del.is_empty());
        assert_eq!(toss.outcomes.iter().map(|o| o.prob).sum::<Prob>(), Prob::one());
    }

    #[test]
    fn decimal_probabilities_are_exact() {
        // 0.1 + 0.2 + 0.7 must sum to exactly 1 with no float residue
        let src = r#"
            (define (domain d)
              (:predicates (a) (b) (c))
              (:action act
                :parameters ()
                :effect (probabilistic 0.1 (a) 0.2 (b) 0.7 (c))))
        "#;
        let dom = parse_domain(src).unwrap();
        assert_eq!(dom.actions[0].outcomes.len(), 3);
        assert_eq!(dom.actions[0].outcomes.iter().map(|o| o.prob).sum::<Prob>(), Prob::one());
    }

    #[test]
    fn nested_probabilistic_effects_multiply() {
        let src = r#"
            (define (domain d)
              (:predicates (a) (b))
              (:action act
                :parameters ()
                :effect (probabilistic 0.5 (and (a) (probabilistic 0.5 (b))))))
        "#;
        let dom = parse_domain(src).unwrap();
        let probs: Vec<_> = dom.actions[0].outcomes.iter().map(|o| o.prob).collect();
        assert_eq!(probs, vec![Prob::new(1, 4), Prob::new(1, 4), Prob::new(1, 2)]);
    }

    #[test]
    fn rejects_probability_sum_above_one() {
        let src = r#"
            (define (domain d)
              (:predicates (a) (b))
              (:action act :parameters () :effect (probabilistic 0.8 (a) 0.3 (b))))
        "#;
        assert!(matches!(parse_domain(src), Err(ParseError::ProbabilitySum { .. })));
    }

    #[test]
    fn rejects_conditional_effects_by_name() {
        let src = r#"
            (define (domain d)
              (:predicates (a) (b))
              (:action act :parameters () :effect (when (a) (b))))
        "#;
        match parse_domain(src) {
            Err(ParseError::Unsupported { what, .. }) => assert!(what.contains("conditional")),
            other => panic!("expected unsupported-construct error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_predicates() {
        let src = "(define (domain d) (:predicates (a) (a)))";
        assert!(matches!(parse_domain(src), Err(ParseError::Duplicate { kind: "predicate", .. })));
    }

    #[test]
    fn rejects_unknown_variables() {
        let src = r#"
            (define (domain d)
              (:predicates (p ?x))
              (:action act :parameters (?a) :effect (p ?zz)))
        "#;
        assert!(matches!(
            parse_domain(src),
            Err(ParseError::Unknown { kind: "variable", .. })
        ));
    }

    #[test]
    fn merges_duplicate_outcomes() {
        let src = r#"
            (define (domain d)
              (:predicates (a))
              (:action act :parameters () :effect (probabilistic 0.3 (a) 0.3 (a))))
        "#;
        let dom = parse_domain(src).unwrap();
        let probs: Vec<_> = dom.actions[0].outcomes.iter().map(|o| o.prob).collect();
        assert_eq!(probs, vec![Prob::new(3, 5), Prob::new(2, 5)]);
    }

    fn typed_domain() -> DomainDef {
        parse_domain(
            r#"
            (define (domain depot)
              (:requirements :typing)
              (:types truck box - object depot)
              (:predicates (at ?b - box ?d - depot) (in ?b - box ?t - truck))
              (:action load
                :parameters (?b - box ?t - truck ?d - depot)
                :precondition (and (at ?b ?d))
                :effect (and (in ?b ?t) (not (at ?b ?d)))))
        "#,
        )
        .unwrap()
    }

    #[test]
    fn parses_problem_with_quantified_goal() {
        let dom = typed_domain();
        let src = r#"
            (define (problem depot-1)
              (:domain depot)
              (:objects b1 b2 - box t1 - truck d1 - depot)
              (:init (at b1 d1) (at b2 d1))
              (:goal (forall (?b - box) (imply (at ?b d1) (in ?b t1)))))
        "#;
        let prob = parse_problem(src, &dom).unwrap();
        assert_eq!(prob.objects.len(), 4);
        assert_eq!(prob.init.len(), 2);
        assert!(matches!(prob.goal, Goal::Forall { .. }));
    }

    #[test]
    fn rejects_unknown_objects_in_init() {
        let dom = typed_domain();
        let src = r#"
            (define (problem p) (:domain depot)
              (:objects b1 - box d1 - depot)
              (:init (at b1 d9))
              (:goal (and)))
        "#;
        assert!(matches!(parse_problem(src, &dom), Err(ParseError::Unknown { kind: "object", .. })));
    }

    #[test]
    fn rejects_ill_typed_init_atoms() {
        let dom = typed_domain();
        let src = r#"
            (define (problem p) (:domain depot)
              (:objects b1 - box t1 - truck d1 - depot)
              (:init (at t1 d1))
              (:goal (and)))
        "#;
        assert!(matches!(parse_problem(src, &dom), Err(ParseError::TypeMismatch { .. })));
    }

    #[test]
    fn domain_roundtrips_through_printer() {
        for src in [TINY] {
            let first = parse_domain(src).unwrap();
            let reparsed = parse_domain(&first.to_ppddl()).unwrap();
            assert_eq!(first, reparsed);
        }
        let typed = typed_domain();
        assert_eq!(typed, parse_domain(&typed.to_ppddl()).unwrap());
    }

    #[test]
    fn problem_roundtrips_through_printer() {
        let dom = typed_domain();
        let src = r#"
            (define (problem depot-1)
              (:domain depot)
              (:objects b1 b2 - box t1 - truck d1 - depot)
              (:init (at b1 d1) (at b2 d1))
              (:goal (and (forall (?b - box) (imply (at ?b d1) (in ?b t1))) (in b1 t1))))
        "#;
        let first = parse_problem(src, &dom).unwrap();
        let reparsed = parse_problem(&first.to_ppddl(&dom), &dom).unwrap();
        assert_eq!(first, reparsed);
    }

    #[test]
    fn parse_number_handles_fractions_and_decimals() {
        assert_eq!(parse_number("0.8"), Some(Prob::new(4, 5)));
        assert_eq!(parse_number("4/5"), Some(Prob::new(4, 5)));
        assert_eq!(parse_number("1"), Some(Prob::one()));
        assert_eq!(parse_number(".25"), Some(Prob::new(1, 4)));
        assert_eq!(parse_number("x"), None);
    }

    #[test]
    fn format_number_roundtrips() {
        for p in [Prob::new(4, 5), Prob::new(47, 50), Prob::new(1, 3), Prob::from_integer(2)] {
            assert_eq!(parse_number(&format_number(&p)), Some(p));
        }
    }
}
