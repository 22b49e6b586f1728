//! Grounding: instantiates schemas over typed objects into a dense fact
//! universe and ground-action table.
//!
//! Facts are enumerated predicate-major in lexicographic argument order,
//! so a fact id is a block offset plus a mixed-radix index and lookup
//! needs no hashing. Ill-typed atoms fall outside the universe: a
//! positive precondition or add effect that can never hold skips the
//! instance, a negative precondition or delete that can never hold drops
//! the literal. No reachability-based pruning happens here.

use crate::ppddl::{DomainDef, Goal, GoalTerm, ObjectDef, Prob, ProblemDef};
use crate::ssp::{ActionId, FactId, Ssp, State};
use crate::util::fnv1a64;
use num_traits::{One, ToPrimitive};
use std::fmt::Write as _;

pub type ObjIdx = u16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub pred: usize,
    pub args: Vec<ObjIdx>,
}

#[derive(Debug, Clone)]
pub struct GroundOutcome {
    /// Exact probability; `prob_f` is its float image used by solvers.
    pub prob: Prob,
    pub prob_f: f64,
    pub add: State,
    pub del: State,
}

#[derive(Debug, Clone)]
pub struct GroundAction {
    pub schema: usize,
    pub args: Vec<ObjIdx>,
    pub cost: f64,
    pub pre_pos: State,
    pub pre_neg: State,
    pub outcomes: Vec<GroundOutcome>,
}

#[derive(Debug, Clone, Copy)]
pub struct GroundOptions {
    pub max_facts: usize,
    pub max_actions: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions { max_facts: 2_000_000, max_actions: 2_000_000 }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GroundError {
    #[error("fact universe exceeds the limit of {limit}")]
    TooManyFacts { limit: usize },
    #[error("ground action set exceeds the limit of {limit}")]
    TooManyActions { limit: usize },
    #[error("more than {max} objects")]
    TooManyObjects { max: usize },
    #[error("unsupported goal: {what}")]
    UnsupportedGoal { what: String },
    #[error("goal is statically false: {what}")]
    StaticallyFalseGoal { what: String },
}

#[derive(Debug, Clone)]
pub struct GroundSsp {
    domain: DomainDef,
    problem_name: String,
    objects: Vec<ObjectDef>,
    objects_by_type: Vec<Vec<ObjIdx>>,
    /// position of each object within its type's candidate list, or -1
    pos_in_type: Vec<Vec<i32>>,
    facts: Vec<Fact>,
    offsets: Vec<usize>,
    strides: Vec<Vec<usize>>,
    actions: Vec<GroundAction>,
    init: State,
    goal: State,
    static_preds: Vec<bool>,
}

pub fn ground(dom: &DomainDef, prob: &ProblemDef) -> Result<GroundSsp, GroundError> {
    ground_with(dom, prob, &GroundOptions::default())
}

pub fn ground_with(
    dom: &DomainDef,
    prob: &ProblemDef,
    opts: &GroundOptions,
) -> Result<GroundSsp, GroundError> {
    if prob.objects.len() > ObjIdx::MAX as usize {
        return Err(GroundError::TooManyObjects { max: ObjIdx::MAX as usize });
    }

    let mut objects_by_type: Vec<Vec<ObjIdx>> = vec![Vec::new(); dom.types.len()];
    for (t, _) in dom.types.iter().enumerate() {
        for (o, obj) in prob.objects.iter().enumerate() {
            if dom.is_subtype(obj.ty, t) {
                objects_by_type[t].push(o as ObjIdx);
            }
        }
    }
    let mut pos_in_type = vec![vec![-1i32; prob.objects.len()]; dom.types.len()];
    for (t, members) in objects_by_type.iter().enumerate() {
        for (pos, &o) in members.iter().enumerate() {
            pos_in_type[t][o as usize] = pos as i32;
        }
    }

    // fact universe: one block per predicate over type-consistent tuples
    let mut facts = Vec::new();
    let mut offsets = vec![0usize];
    let mut strides = Vec::with_capacity(dom.predicates.len());
    for def in &dom.predicates {
        let cands: Vec<&[ObjIdx]> =
            def.params.iter().map(|p| objects_by_type[p.ty].as_slice()).collect();
        let block = cands
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .filter(|b| facts.len().saturating_add(*b) <= opts.max_facts)
            .ok_or(GroundError::TooManyFacts { limit: opts.max_facts })?;
        let mut stride = vec![1usize; cands.len()];
        for k in (0..cands.len().saturating_sub(1)).rev() {
            stride[k] = stride[k + 1] * cands[k + 1].len();
        }
        strides.push(stride);
        let pred = offsets.len() - 1;
        for_each_tuple(&cands, |tuple| {
            facts.push(Fact { pred, args: tuple.to_vec() });
        });
        debug_assert_eq!(facts.len() - offsets.last().unwrap(), block);
        offsets.push(facts.len());
    }

    let mut ssp = GroundSsp {
        domain: dom.clone(),
        problem_name: prob.name.clone(),
        objects: prob.objects.clone(),
        objects_by_type,
        pos_in_type,
        facts,
        offsets,
        strides,
        actions: Vec::new(),
        init: State::empty(0),
        goal: State::empty(0),
        static_preds: dom.static_predicates(),
    };

    let mut init = State::empty(ssp.facts.len());
    for atom in &prob.init {
        let args: Vec<ObjIdx> = atom.args.iter().map(|&o| o as ObjIdx).collect();
        let id = ssp
            .fact_id(atom.pred, &args)
            .expect("init atoms are type-checked at parse time");
        init.insert(id);
    }
    ssp.init = init;
    ssp.goal = expand_goal(&ssp, &prob.goal)?;
    ssp.actions = instantiate_actions(&ssp, opts)?;
    Ok(ssp)
}

/// Lexicographic product iteration; calls `f` once with the empty tuple
/// when there are no positions.
fn for_each_tuple(cands: &[&[ObjIdx]], mut f: impl FnMut(&[ObjIdx])) {
    if cands.iter().any(|c| c.is_empty()) {
        return;
    }
    let k = cands.len();
    let mut idx = vec![0usize; k];
    let mut cur: Vec<ObjIdx> = cands.iter().map(|c| c[0]).collect();
    loop {
        f(&cur);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < cands[pos].len() {
                cur[pos] = cands[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            cur[pos] = cands[pos][0];
        }
    }
}

fn expand_goal(ssp: &GroundSsp, goal: &Goal) -> Result<State, GroundError> {
    let mut out = State::empty(ssp.facts.len());
    let mut env = Vec::new();
    expand_into(ssp, goal, &mut env, &mut out)?;
    Ok(out)
}

fn expand_into(
    ssp: &GroundSsp,
    goal: &Goal,
    env: &mut Vec<ObjIdx>,
    out: &mut State,
) -> Result<(), GroundError> {
    match goal {
        Goal::Atom { pred, args } => {
            let resolved: Vec<ObjIdx> = args.iter().map(|t| resolve_term(t, env)).collect();
            let id = ssp.fact_id(*pred, &resolved).ok_or_else(|| {
                GroundError::UnsupportedGoal {
                    what: format!(
                        "atom over predicate `{}` lies outside the typed universe",
                        ssp.domain.predicates[*pred].name
                    ),
                }
            })?;
            out.insert(id);
            Ok(())
        }
        Goal::And(subs) => {
            for sub in subs {
                expand_into(ssp, sub, env, out)?;
            }
            Ok(())
        }
        Goal::Forall { vars, body } => {
            let depth = env.len();
            let cands: Vec<Vec<ObjIdx>> =
                vars.iter().map(|v| ssp.objects_by_type[v.ty].clone()).collect();
            let refs: Vec<&[ObjIdx]> = cands.iter().map(|c| c.as_slice()).collect();
            let mut result = Ok(());
            for_each_tuple(&refs, |tuple| {
                if result.is_err() {
                    return;
                }
                env.truncate(depth);
                env.extend_from_slice(tuple);
                result = expand_into(ssp, body, env, out);
            });
            env.truncate(depth);
            result
        }
        Goal::Imply(ante, cons) => {
            if eval_static(ssp, ante, env)? {
                expand_into(ssp, cons, env, out)?;
            }
            Ok(())
        }
        Goal::Not(inner) => {
            // negation is only admitted over statically evaluable content
            if eval_static(ssp, inner, env)? {
                Err(GroundError::StaticallyFalseGoal {
                    what: "a negated condition holds in every state".into(),
                })
            } else {
                Ok(())
            }
        }
        Goal::Eq(a, b) => {
            if resolve_term(a, env) == resolve_term(b, env) {
                Ok(())
            } else {
                Err(GroundError::StaticallyFalseGoal {
                    what: "equality between distinct constants".into(),
                })
            }
        }
    }
}

/// Truth value of a goal subformula that may not mention dynamic
/// predicates; evaluated against the initial state.
fn eval_static(ssp: &GroundSsp, goal: &Goal, env: &mut Vec<ObjIdx>) -> Result<bool, GroundError> {
    match goal {
        Goal::Atom { pred, args } => {
            if !ssp.static_preds[*pred] {
                return Err(GroundError::UnsupportedGoal {
                    what: format!(
                        "condition over non-static predicate `{}`",
                        ssp.domain.predicates[*pred].name
                    ),
                });
            }
            let resolved: Vec<ObjIdx> = args.iter().map(|t| resolve_term(t, env)).collect();
            Ok(ssp.fact_id(*pred, &resolved).is_some_and(|id| ssp.init.contains(id)))
        }
        Goal::And(subs) => {
            for sub in subs {
                if !eval_static(ssp, sub, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Goal::Not(inner) => Ok(!eval_static(ssp, inner, env)?),
        Goal::Imply(a, b) => Ok(!eval_static(ssp, a, env)? || eval_static(ssp, b, env)?),
        Goal::Eq(a, b) => Ok(resolve_term(a, env) == resolve_term(b, env)),
        Goal::Forall { vars, body } => {
            let depth = env.len();
            let cands: Vec<Vec<ObjIdx>> =
                vars.iter().map(|v| ssp.objects_by_type[v.ty].clone()).collect();
            let refs: Vec<&[ObjIdx]> = cands.iter().map(|c| c.as_slice()).collect();
            let mut all = true;
            let mut result = Ok(());
            for_each_tuple(&refs, |tuple| {
                if result.is_err() || !all {
                    return;
                }
                env.truncate(depth);
                env.extend_from_slice(tuple);
                match eval_static(ssp, body, env) {
                    Ok(v) => all = v,
                    Err(e) => result = Err(e),
                }
            });
            env.truncate(depth);
            result.map(|_| all)
        }
    }
}

fn resolve_term(term: &GoalTerm, env: &[ObjIdx]) -> ObjIdx {
    match term {
        GoalTerm::Object(o) => *o as ObjIdx,
        GoalTerm::Var(v) => env[*v],
    }
}

fn instantiate_actions(
    ssp: &GroundSsp,
    opts: &GroundOptions,
) -> Result<Vec<GroundAction>, GroundError> {
    let n = ssp.facts.len();
    let mut actions = Vec::new();
    for (si, schema) in ssp.domain.actions.iter().enumerate() {
        let cands: Vec<&[ObjIdx]> =
            schema.params.iter().map(|p| ssp.objects_by_type[p.ty].as_slice()).collect();
        let mut overflow = false;
        for_each_tuple(&cands, |binding| {
            if overflow {
                return;
            }
            let pre = &schema.precondition;
            if pre.eq.iter().any(|&(a, b)| binding[a] != binding[b])
                || pre.neq.iter().any(|&(a, b)| binding[a] == binding[b])
            {
                return;
            }

            let mut pre_pos = State::empty(n);
            for atom in &pre.pos {
                match ssp.lifted_fact_id(atom.pred, &atom.args, binding) {
                    Some(id) => pre_pos.insert(id),
                    None => return, // can never hold: instance inapplicable
                }
            }
            let mut pre_neg = State::empty(n);
            for atom in &pre.neg {
                if let Some(id) = ssp.lifted_fact_id(atom.pred, &atom.args, binding) {
                    pre_neg.insert(id);
                }
            }

            let mut outcomes: Vec<GroundOutcome> = Vec::with_capacity(schema.outcomes.len());
            for outcome in &schema.outcomes {
                let mut add = State::empty(n);
                for atom in &outcome.add {
                    match ssp.lifted_fact_id(atom.pred, &atom.args, binding) {
                        Some(id) => add.insert(id),
                        None => return, // would create an ill-typed fact
                    }
                }
                let mut del = State::empty(n);
                for atom in &outcome.del {
                    if let Some(id) = ssp.lifted_fact_id(atom.pred, &atom.args, binding) {
                        del.insert(id);
                    }
                }
                // binding can identify atoms: re-normalize and merge
                let del = del.apply(&State::empty(n), &add);
                match outcomes.iter_mut().find(|o| o.add == add && o.del == del) {
                    Some(o) => o.prob += outcome.prob,
                    None => outcomes.push(GroundOutcome {
                        prob: outcome.prob,
                        prob_f: 0.0,
                        add,
                        del,
                    }),
                }
            }
            debug_assert_eq!(outcomes.iter().map(|o| o.prob).sum::<Prob>(), Prob::one());
            for o in &mut outcomes {
                o.prob_f = o.prob.to_f64().expect("outcome probability fits in f64");
            }

            if actions.len() == opts.max_actions {
                overflow = true;
                return;
            }
            actions.push(GroundAction {
                schema: si,
                args: binding.to_vec(),
                cost: schema.cost.to_f64().expect("action cost fits in f64"),
                pre_pos,
                pre_neg,
                outcomes,
            });
        });
        if overflow {
            return Err(GroundError::TooManyActions { limit: opts.max_actions });
        }
    }
    Ok(actions)
}

impl GroundSsp {
    pub fn domain(&self) -> &DomainDef {
        &self.domain
    }

    pub fn problem_name(&self) -> &str {
        &self.problem_name
    }

    pub fn objects(&self) -> &[ObjectDef] {
        &self.objects
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn fact(&self, id: FactId) -> &Fact {
        &self.facts[id as usize]
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &State {
        &self.goal
    }

    pub fn is_goal_state(&self, s: &State) -> bool {
        s.contains_all(&self.goal)
    }

    pub fn static_predicates(&self) -> &[bool] {
        &self.static_preds
    }

    /// Fact id by offset + mixed-radix index; `None` when any argument is
    /// not an object of the corresponding parameter type.
    pub fn fact_id(&self, pred: usize, args: &[ObjIdx]) -> Option<FactId> {
        let def = &self.domain.predicates[pred];
        debug_assert_eq!(args.len(), def.arity());
        let mut idx = 0usize;
        for (k, (&obj, param)) in args.iter().zip(&def.params).enumerate() {
            let pos = self.pos_in_type[param.ty][obj as usize];
            if pos < 0 {
                return None;
            }
            idx += pos as usize * self.strides[pred][k];
        }
        Some((self.offsets[pred] + idx) as FactId)
    }

    fn lifted_fact_id(&self, pred: usize, args: &[usize], binding: &[ObjIdx]) -> Option<FactId> {
        let resolved: Vec<ObjIdx> = args.iter().map(|&p| binding[p]).collect();
        self.fact_id(pred, &resolved)
    }

    pub fn action_display(&self, a: ActionId) -> String {
        let action = &self.actions[a as usize];
        let mut out = self.domain.actions[action.schema].name.clone();
        out.push('(');
        for (i, &obj) in action.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", self.objects[obj as usize].name);
        }
        out.push(')');
        out
    }

    pub fn fact_display(&self, id: FactId) -> String {
        let fact = &self.facts[id as usize];
        let mut out = self.domain.predicates[fact.pred].name.clone();
        if !fact.args.is_empty() {
            out.push('(');
            for (i, &obj) in fact.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.objects[obj as usize].name);
            }
            out.push(')');
        }
        out
    }

    /// Hash of the predicate and schema signatures. Models learned from one
    /// vocabulary refuse to constrain problems from another.
    pub fn vocab_hash(&self) -> u64 {
        fnv1a64(vocab_signature(&self.domain).bytes())
    }
}

/// Declaration order matters here: abstract models refer to predicates and
/// schemas by index, so a reordered domain is a different vocabulary even
/// when the names coincide.
pub(crate) fn vocab_signature(dom: &DomainDef) -> String {
    let type_name = |t: usize| dom.types[t].name.as_str();
    let preds: Vec<String> = dom
        .predicates
        .iter()
        .map(|p| {
            let tys: Vec<&str> = p.params.iter().map(|prm| type_name(prm.ty)).collect();
            format!("p:{}({})", p.name, tys.join(","))
        })
        .collect();
    let schemas: Vec<String> = dom
        .actions
        .iter()
        .map(|a| {
            let tys: Vec<&str> = a.params.iter().map(|prm| type_name(prm.ty)).collect();
            format!("a:{}({})", a.name, tys.join(","))
        })
        .collect();
    let types: Vec<String> = dom
        .types
        .iter()
        .map(|t| format!("t:{}<{}", t.name, type_name(t.parent)))
        .collect();
    format!("{}|{}|{}", types.join(";"), preds.join(";"), schemas.join(";"))
}

impl Ssp for GroundSsp {
    fn ground(&self) -> &GroundSsp {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppddl::{parse_domain, parse_problem};

    const MINI_GRIPPER: &str = r#"
        (define (domain gripper)
          (:requirements :strips :equality :probabilistic-effects)
          (:predicates (room ?r) (ball ?b) (gripper ?g)
                       (at-robby ?r) (at ?b ?r) (free ?g) (carry ?b ?g))
          (:action move
            :parameters (?from ?to)
            :precondition (and (room ?from) (room ?to) (at-robby ?from) (not (= ?from ?to)))
            :effect (and (at-robby ?to) (not (at-robby ?from))))
          (:action pick
            :parameters (?b ?r ?g)
            :precondition (and (ball ?b) (room ?r) (gripper ?g)
                               (at ?b ?r) (at-robby ?r) (free ?g))
            :effect (probabilistic 0.8 (and (carry ?b ?g) (not (at ?b ?r)) (not (free ?g)))))
          (:action drop
            :parameters (?b ?r ?g)
            :precondition (and (ball ?b) (room ?r) (gripper ?g) (carry ?b ?g) (at-robby ?r))
            :effect (and (at ?b ?r) (free ?g) (not (carry ?b ?g)))))
    "#;

    const MINI_GRIPPER_1: &str = r#"
        (define (problem gripper-1)
          (:domain gripper)
          (:objects roomA roomB ball1 left right)
          (:init (room roomA) (room roomB) (ball ball1) (gripper left) (gripper right)
                 (at-robby roomA) (at ball1 roomA) (free left) (free right))
          (:goal (at ball1 roomB)))
    "#;

    fn gripper1() -> GroundSsp {
        let dom = parse_domain(MINI_GRIPPER).unwrap();
        let prob = parse_problem(MINI_GRIPPER_1, &dom).unwrap();
        ground(&dom, &prob).unwrap()
    }

    /// Brute-force instantiation count: all type-consistent bindings that
    /// satisfy the schema's equality constraints.
    fn oracle_action_count(ssp: &GroundSsp) -> usize {
        let dom = ssp.domain();
        let mut count = 0usize;
        for schema in &dom.actions {
            let cands: Vec<Vec<ObjIdx>> = schema
                .params
                .iter()
                .map(|p| {
                    (0..ssp.objects().len() as ObjIdx)
                        .filter(|&o| dom.is_subtype(ssp.objects()[o as usize].ty, p.ty))
                        .collect()
                })
                .collect();
            let mut stack = vec![Vec::<ObjIdx>::new()];
            for c in &cands {
                let mut next = Vec::new();
                for partial in &stack {
                    for &o in c {
                        let mut ext = partial.clone();
                        ext.push(o);
                        next.push(ext);
                    }
                }
                stack = next;
            }
            for binding in &stack {
                let pre = &schema.precondition;
                let ok = pre.eq.iter().all(|&(a, b)| binding[a] == binding[b])
                    && pre.neq.iter().all(|&(a, b)| binding[a] != binding[b]);
                if ok {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn fact_universe_covers_type_consistent_instantiations() {
        let ssp = gripper1();
        // untyped: 5 objects; three 1-ary dynamic + three 1-ary static
        // predicates contribute 5 facts each, two 2-ary contribute 25 each
        assert_eq!(ssp.num_facts(), 5 * 5 + 2 * 25);
        for (i, fact) in ssp.facts().iter().enumerate() {
            assert_eq!(ssp.fact_id(fact.pred, &fact.args), Some(i as FactId));
        }
    }

    #[test]
    fn ground_action_count_matches_brute_force_oracle() {
        let ssp = gripper1();
        // move: 25 - 5 equal pairs; pick/drop: 125 each
        assert_eq!(ssp.actions().len(), 20 + 125 + 125);
        assert_eq!(ssp.actions().len(), oracle_action_count(&ssp));
    }

    #[test]
    fn equality_constraints_filter_bindings() {
        let ssp = gripper1();
        let move_schema = ssp.domain().action_index("move").unwrap();
        assert!(ssp
            .actions()
            .iter()
            .filter(|a| a.schema == move_schema)
            .all(|a| a.args[0] != a.args[1]));
    }

    #[test]
    fn outcome_probabilities_sum_to_one_exactly() {
        let ssp = gripper1();
        for action in ssp.actions() {
            assert_eq!(action.outcomes.iter().map(|o| o.prob).sum::<Prob>(), Prob::one());
        }
    }

    #[test]
    fn applicable_actions_respect_preconditions() {
        let ssp = gripper1();
        let s0 = ssp.initial_state();
        let names: Vec<String> =
            ssp.applicable_actions(&s0).into_iter().map(|a| ssp.action_display(a)).collect();
        assert_eq!(names, vec!["move(rooma,roomb)", "pick(ball1,rooma,left)", "pick(ball1,rooma,right)"]);
    }

    #[test]
    fn grounding_is_deterministic() {
        let a = gripper1();
        let b = gripper1();
        let names = |s: &GroundSsp| -> Vec<String> {
            (0..s.actions().len() as ActionId).map(|i| s.action_display(i)).collect()
        };
        assert_eq!(names(&a), names(&b));
        assert_eq!(a.facts(), b.facts());
        assert_eq!(a.init(), b.init());
        assert_eq!(a.vocab_hash(), b.vocab_hash());
    }

    #[test]
    fn zero_ary_predicates_occupy_one_fact() {
        let dom = parse_domain(
            r#"(define (domain d) (:predicates (ready) (p ?x))
                 (:action go :parameters () :precondition (and (ready)) :effect (and)))"#,
        )
        .unwrap();
        let prob = parse_problem(
            "(define (problem p1) (:domain d) (:objects a b) (:init (ready)) (:goal (ready)))",
            &dom,
        )
        .unwrap();
        let ssp = ground(&dom, &prob).unwrap();
        assert_eq!(ssp.fact_id(0, &[]), Some(0));
        assert_eq!(ssp.num_facts(), 1 + 2);
        assert!(ssp.is_goal_state(ssp.init()));
    }

    #[test]
    fn forall_imply_goals_expand_over_static_antecedents() {
        let dom = parse_domain(
            r#"(define (domain d) (:predicates (thing ?x) (done ?x)
                 (mark ?x))
                 (:action finish :parameters (?x) :precondition (and (thing ?x))
                   :effect (done ?x)))"#,
        )
        .unwrap();
        let prob = parse_problem(
            r#"(define (problem p1) (:domain d) (:objects a b c)
                 (:init (thing a) (thing c))
                 (:goal (forall (?x) (imply (thing ?x) (done ?x)))))"#,
            &dom,
        )
        .unwrap();
        let ssp = ground(&dom, &prob).unwrap();
        let goal_facts: Vec<String> = ssp.goal().iter().map(|f| ssp.fact_display(f)).collect();
        assert_eq!(goal_facts, vec!["done(a)", "done(c)"]);
    }

    #[test]
    fn dynamic_implication_antecedents_are_rejected() {
        let dom = parse_domain(
            r#"(define (domain d) (:predicates (p ?x) (q ?x))
                 (:action a :parameters (?x) :effect (and (p ?x) (q ?x))))"#,
        )
        .unwrap();
        let prob = parse_problem(
            r#"(define (problem p1) (:domain d) (:objects a)
                 (:init) (:goal (forall (?x) (imply (p ?x) (q ?x)))))"#,
            &dom,
        )
        .unwrap();
        assert!(matches!(ground(&dom, &prob), Err(GroundError::UnsupportedGoal { .. })));
    }

    #[test]
    fn ill_typed_atoms_gate_instantiation() {
        let dom = parse_domain(
            r#"(define (domain d)
                 (:requirements :typing)
                 (:types box)
                 (:predicates (p ?b - box) (q))
                 (:action needs-p :parameters (?x) :precondition (and (p ?x)) :effect (q))
                 (:action adds-p :parameters (?x) :effect (p ?x))
                 (:action dels-p :parameters (?x) :effect (and (q) (not (p ?x)))))"#,
        )
        .unwrap();
        let prob = parse_problem(
            r#"(define (problem p1) (:domain d) (:objects b1 - box t1)
                 (:init) (:goal (q)))"#,
            &dom,
        )
        .unwrap();
        let ssp = ground(&dom, &prob).unwrap();
        let names: Vec<String> =
            (0..ssp.actions().len() as ActionId).map(|a| ssp.action_display(a)).collect();
        // needs-p(t1) and adds-p(t1) reference facts outside the universe;
        // dels-p(t1) merely drops its delete literal
        assert_eq!(
            names,
            vec!["needs-p(b1)", "adds-p(b1)", "dels-p(b1)", "dels-p(t1)"]
        );
    }

    #[test]
    fn fact_limit_is_enforced() {
        let dom = parse_domain(MINI_GRIPPER).unwrap();
        let prob = parse_problem(MINI_GRIPPER_1, &dom).unwrap();
        let opts = GroundOptions { max_facts: 10, max_actions: 1_000_000 };
        assert!(matches!(
            ground_with(&dom, &prob, &opts),
            Err(GroundError::TooManyFacts { limit: 10 })
        ));
    }
}
