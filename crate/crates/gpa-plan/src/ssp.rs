//! Stochastic shortest-path core: bitset states over the interned fact
//! universe, transition dynamics, value tables, Bellman backups, and
//! policy utilities.
//!
//! Dead ends are legal; their value is `f64::INFINITY`, which saturates
//! correctly through backup arithmetic. Goal states are absorbing with
//! zero cost and are treated as terminal instead of materializing the
//! self-loop.

use crate::ppddl::ground::GroundSsp;
use crate::util::{fnv1a64, rng_for};
use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub type FactId = u32;
pub type ActionId = u32;

/// Set of true facts, fixed-width over a problem's fact universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    bits: FixedBitSet,
}

impl State {
    pub fn empty(num_facts: usize) -> Self {
        State { bits: FixedBitSet::with_capacity(num_facts) }
    }

    pub fn insert(&mut self, fact: FactId) {
        self.bits.insert(fact as usize);
    }

    pub fn remove(&mut self, fact: FactId) {
        self.bits.remove(fact as usize);
    }

    pub fn contains(&self, fact: FactId) -> bool {
        self.bits.contains(fact as usize)
    }

    /// True when every fact in `other` is in `self`.
    pub fn contains_all(&self, other: &State) -> bool {
        other.bits.is_subset(&self.bits)
    }

    pub fn is_disjoint(&self, other: &State) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    /// Applies delete-then-add effect sets.
    pub fn apply(&self, add: &State, del: &State) -> State {
        let mut out = self.clone();
        out.bits.difference_with(&del.bits);
        out.bits.union_with(&add.bits);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = FactId> + '_ {
        self.bits.ones().map(|i| i as FactId)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// FNV-1a over the sorted fact ids; stable across runs and platforms,
    /// used to key policy files.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.iter().flat_map(|f| f.to_le_bytes()))
    }
}

/// One weighted transition of an action from a concrete state.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub state: State,
    pub prob: f64,
    pub cost: f64,
}

/// Problem interface shared by the base model and constrained wrappers.
/// Wrappers may only reweight transition costs; the reachable dynamics
/// are always those of the underlying ground problem.
pub trait Ssp {
    fn ground(&self) -> &GroundSsp;

    fn initial_state(&self) -> State {
        self.ground().init().clone()
    }

    fn is_goal(&self, s: &State) -> bool {
        s.contains_all(self.ground().goal())
    }

    /// Ids of actions whose preconditions hold in `s`, ascending.
    fn applicable_actions(&self, s: &State) -> Vec<ActionId> {
        self.ground()
            .actions()
            .iter()
            .enumerate()
            .filter(|(_, a)| s.contains_all(&a.pre_pos) && s.is_disjoint(&a.pre_neg))
            .map(|(i, _)| i as ActionId)
            .collect()
    }

    /// Outcome distribution of `a` applied in `s`; outcomes reaching the
    /// same state are merged, first occurrence order preserved.
    /// Goal states are absorbing: every action self-loops at zero cost.
    fn successors(&self, s: &State, a: ActionId) -> Vec<Successor> {
        if self.is_goal(s) {
            return vec![Successor { state: s.clone(), prob: 1.0, cost: 0.0 }];
        }
        let action = &self.ground().actions()[a as usize];
        let mut out: Vec<Successor> = Vec::with_capacity(action.outcomes.len());
        for outcome in &action.outcomes {
            let state = s.apply(&outcome.add, &outcome.del);
            match out.iter_mut().find(|x| x.state == state) {
                Some(x) => x.prob += outcome.prob_f,
                None => out.push(Successor { state, prob: outcome.prob_f, cost: action.cost }),
            }
        }
        out
    }
}

/// Value-function default for states not yet in a table.
pub enum Seed {
    Zero,
    Heuristic(Box<dyn Evaluate>),
    /// Finite values carried over from an earlier solve; everything else
    /// falls through. Infinite entries are never stored in `prior`, so a
    /// prior dead-end label cannot poison a fresh solve.
    Bootstrap { prior: HashMap<State, f64>, fallback: Box<Seed> },
}

pub trait Evaluate {
    fn evaluate(&mut self, s: &State) -> f64;
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Seed::Zero => write!(f, "Zero"),
            Seed::Heuristic(_) => write!(f, "Heuristic"),
            Seed::Bootstrap { prior, .. } => write!(f, "Bootstrap({} states)", prior.len()),
        }
    }
}

/// State-value map with a seeding hook and solver labels.
#[derive(Debug)]
pub struct ValueTable {
    values: HashMap<State, f64>,
    solved: HashSet<State>,
    seed: Seed,
}

impl ValueTable {
    pub fn zeroed() -> Self {
        ValueTable::with_seed(Seed::Zero)
    }

    pub fn with_seed(seed: Seed) -> Self {
        ValueTable { values: HashMap::new(), solved: HashSet::new(), seed }
    }

    /// Current value, seeding (and recording) the default on first touch.
    pub fn value(&mut self, s: &State) -> f64 {
        if let Some(&v) = self.values.get(s) {
            return v;
        }
        let v = eval_seed(&mut self.seed, s);
        self.values.insert(s.clone(), v);
        v
    }

    pub fn peek(&self, s: &State) -> Option<f64> {
        self.values.get(s).copied()
    }

    pub fn set(&mut self, s: &State, v: f64) {
        self.values.insert(s.clone(), v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mark_solved(&mut self, s: &State) {
        self.solved.insert(s.clone());
    }

    pub fn unmark_solved(&mut self, s: &State) {
        self.solved.remove(s);
    }

    pub fn is_solved(&self, s: &State) -> bool {
        self.solved.contains(s)
    }

    pub fn num_solved(&self) -> usize {
        self.solved.len()
    }

    /// Finite entries, e.g. to bootstrap a later solve.
    pub fn finite_values(&self) -> impl Iterator<Item = (&State, f64)> + '_ {
        self.values.iter().filter(|(_, v)| v.is_finite()).map(|(s, &v)| (s, v))
    }
}

fn eval_seed(seed: &mut Seed, s: &State) -> f64 {
    match seed {
        Seed::Zero => 0.0,
        Seed::Heuristic(h) => h.evaluate(s),
        Seed::Bootstrap { prior, fallback } => match prior.get(s) {
            Some(&v) => v,
            None => eval_seed(fallback, s),
        },
    }
}

/// Residual between successive values; two infinities agree.
pub fn residual(old: f64, new: f64) -> f64 {
    if old.is_infinite() && new.is_infinite() {
        0.0
    } else {
        (old - new).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub value: f64,
    pub action: Option<ActionId>,
    pub residual: f64,
}

/// Greedy value and action without writing to the table (successor seeding
/// aside). Ties break toward the lowest action id.
pub fn greedy_eval<M: Ssp>(m: &M, s: &State, table: &mut ValueTable) -> (f64, Option<ActionId>) {
    if m.is_goal(s) {
        return (0.0, None);
    }
    let mut best = f64::INFINITY;
    let mut best_action = None;
    for a in m.applicable_actions(s) {
        let mut q = 0.0;
        for succ in m.successors(s, a) {
            if succ.prob == 0.0 {
                continue;
            }
            let v = if m.is_goal(&succ.state) { 0.0 } else { table.value(&succ.state) };
            q += succ.prob * (succ.cost + v);
            if q.is_infinite() {
                break;
            }
        }
        if q < best {
            best = q;
            best_action = Some(a);
        }
    }
    (best, best_action)
}

/// One Bellman backup of `s`, written through to the table.
pub fn bellman_backup<M: Ssp>(m: &M, s: &State, table: &mut ValueTable) -> Backup {
    backup_with_cap(m, s, table, f64::INFINITY)
}

/// Backup with dead-end saturation: values at or above `cap` collapse to
/// INFINITY so cost-creep in unrecognized dead ends terminates.
pub(crate) fn backup_with_cap<M: Ssp>(
    m: &M,
    s: &State,
    table: &mut ValueTable,
    cap: f64,
) -> Backup {
    let (mut value, mut action) = greedy_eval(m, s, table);
    if value >= cap {
        value = f64::INFINITY;
        action = None;
    }
    let old = table.value(s);
    table.set(s, value);
    Backup { value, action, residual: residual(old, value) }
}

// ---------------------------------------------------------------------------
// policies

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Policy {
    map: HashMap<State, ActionId>,
}

impl Policy {
    pub fn action(&self, s: &State) -> Option<ActionId> {
        self.map.get(s).copied()
    }

    pub fn insert(&mut self, s: State, a: ActionId) {
        self.map.insert(s, a);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, ActionId)> + '_ {
        self.map.iter().map(|(s, &a)| (s, a))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("no finite-value action at the initial state (fingerprint {fingerprint:016x})")]
    UndefinedValue { fingerprint: u64 },
    #[error("policy file references unknown action `{name}`")]
    UnknownAction { name: String },
    #[error("distinct states share fingerprint {fingerprint:016x}; cannot serialize")]
    HashCollision { fingerprint: u64 },
    #[error("policy was saved for problem `{want}`, loaded against `{got}`")]
    ProblemMismatch { want: String, got: String },
    #[error("malformed policy file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Greedy policy closure from `s0` under `table`. States whose greedy value
/// is infinite are left unmapped (their ancestors keep their entries); an
/// infinite value at `s0` itself is an error.
pub fn extract_policy<M: Ssp>(
    m: &M,
    table: &mut ValueTable,
    s0: &State,
) -> Result<Policy, PolicyError> {
    let mut pi = Policy::default();
    let mut seen = HashSet::from([s0.clone()]);
    let mut queue = VecDeque::from([s0.clone()]);
    while let Some(s) = queue.pop_front() {
        if m.is_goal(&s) {
            continue;
        }
        let (value, action) = greedy_eval(m, &s, table);
        let Some(a) = action.filter(|_| value.is_finite()) else {
            if s == *s0 {
                return Err(PolicyError::UndefinedValue { fingerprint: s0.fingerprint() });
            }
            continue;
        };
        pi.insert(s.clone(), a);
        for succ in m.successors(&s, a) {
            if succ.prob > 0.0 && seen.insert(succ.state.clone()) {
                queue.push_back(succ.state);
            }
        }
    }
    Ok(pi)
}

/// Closure of states reachable from `s0` under `pi`, in BFS order, with the
/// policy edges. `None` in the action slot marks goal states.
fn policy_closure<M: Ssp>(
    m: &M,
    pi: &Policy,
    s0: &State,
) -> Option<(Vec<State>, Vec<Option<(ActionId, Vec<(usize, f64, f64)>)>>)> {
    let mut order = vec![s0.clone()];
    let mut index = HashMap::from([(s0.clone(), 0usize)]);
    let mut edges = Vec::new();
    let mut at = 0;
    while at < order.len() {
        let s = order[at].clone();
        if m.is_goal(&s) {
            edges.push(None);
            at += 1;
            continue;
        }
        let a = pi.action(&s)?;
        let mut out = Vec::new();
        for succ in m.successors(&s, a) {
            if succ.prob == 0.0 {
                continue;
            }
            let next = index.len();
            let idx = *index.entry(succ.state.clone()).or_insert(next);
            if idx == order.len() {
                order.push(succ.state);
            }
            out.push((idx, succ.prob, succ.cost));
        }
        edges.push(Some((a, out)));
        at += 1;
    }
    Some((order, edges))
}

/// True when `pi` covers every state it can reach from `s0` and the goal is
/// reachable from each of them, i.e. the goal is hit with probability one.
pub fn is_partial_proper<M: Ssp>(m: &M, pi: &Policy, s0: &State) -> bool {
    let Some((order, edges)) = policy_closure(m, pi, s0) else {
        return false;
    };
    let mut reverse = vec![Vec::new(); order.len()];
    let mut good = vec![false; order.len()];
    let mut queue = VecDeque::new();
    for (i, edge) in edges.iter().enumerate() {
        match edge {
            None => {
                good[i] = true;
                queue.push_back(i);
            }
            Some((_, out)) => {
                for &(j, _, _) in out {
                    reverse[j].push(i);
                }
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        for &p in &reverse[i] {
            if !good[p] {
                good[p] = true;
                queue.push_back(p);
            }
        }
    }
    good.iter().all(|&g| g)
}

/// Exact expected cost of `pi` from `s0`: iterated policy evaluation to a
/// 1e-12 residual. INFINITY when `pi` is not partial proper or crosses an
/// infinite-cost transition.
pub fn policy_value<M: Ssp>(m: &M, pi: &Policy, s0: &State) -> f64 {
    if !is_partial_proper(m, pi, s0) {
        return f64::INFINITY;
    }
    let (order, edges) = policy_closure(m, pi, s0).expect("proper policy has a closure");
    let mut values = vec![0.0f64; order.len()];
    for _ in 0..1_000_000 {
        let mut worst = 0.0f64;
        for i in (0..order.len()).rev() {
            let Some((_, out)) = &edges[i] else {
                continue;
            };
            let mut q = 0.0;
            for &(j, p, c) in out {
                q += p * (c + values[j]);
            }
            worst = worst.max(residual(values[i], q));
            values[i] = q;
        }
        if worst < 1e-12 {
            break;
        }
    }
    values[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalStats {
    pub trials: u32,
    pub mean: f64,
    /// Sample standard deviation of per-trial costs.
    pub std_dev: f64,
    pub goal_rate: f64,
}

/// Monte Carlo execution of `pi` for `trials` episodes of at most `horizon`
/// steps. A state where the policy is undefined aborts the episode and is
/// charged the remaining steps at unit rate, the same accounting a
/// goal-less horizon timeout gets.
pub fn evaluate_policy<M: Ssp>(
    m: &M,
    pi: &Policy,
    trials: u32,
    horizon: u32,
    seed: u64,
) -> EvalStats {
    let s0 = m.initial_state();
    let mut costs = Vec::with_capacity(trials as usize);
    let mut goals = 0u32;
    for trial in 0..trials {
        let mut rng = rng_for(seed, trial as u64, 0);
        let mut s = s0.clone();
        let mut cost = 0.0;
        let mut step = 0;
        loop {
            if m.is_goal(&s) {
                goals += 1;
                break;
            }
            if step == horizon {
                break;
            }
            let Some(a) = pi.action(&s) else {
                cost += (horizon - step) as f64;
                break;
            };
            let succs = m.successors(&s, a);
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = succs.len() - 1;
            for (i, succ) in succs.iter().enumerate() {
                acc += succ.prob;
                if draw < acc {
                    chosen = i;
                    break;
                }
            }
            cost += succs[chosen].cost;
            s = succs[chosen].state.clone();
            step += 1;
        }
        costs.push(cost);
    }
    let n = trials.max(1) as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = if trials > 1 {
        costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    EvalStats { trials, mean, std_dev: var.sqrt(), goal_rate: goals as f64 / n }
}

// ---------------------------------------------------------------------------
// policy files

/// JSON header on the first line of a policy file; the remaining lines are
/// `fingerprint<TAB>action-name(args)`, sorted by fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyHeader {
    pub format: String,
    pub version: u32,
    pub problem: String,
    pub domain_file: String,
    pub problem_file: String,
    pub solver: String,
    pub heuristic: String,
    pub seed: u64,
    pub epsilon: f64,
    pub converged: bool,
    pub v_s0: f64,
}

pub const POLICY_FORMAT: &str = "gpa-plan-policy";
pub const POLICY_VERSION: u32 = 1;

pub fn write_policy<W: Write>(
    out: &mut W,
    ssp: &GroundSsp,
    pi: &Policy,
    header: &PolicyHeader,
) -> Result<(), PolicyError> {
    writeln!(out, "{}", serde_json::to_string(header)?)?;
    let mut lines: Vec<(u64, String)> = Vec::with_capacity(pi.len());
    let mut seen: HashMap<u64, &State> = HashMap::with_capacity(pi.len());
    for (s, a) in pi.iter() {
        let fp = s.fingerprint();
        if let Some(prev) = seen.insert(fp, s) {
            if prev != s {
                return Err(PolicyError::HashCollision { fingerprint: fp });
            }
        }
        lines.push((fp, ssp.action_display(a)));
    }
    lines.sort();
    for (fp, name) in lines {
        writeln!(out, "{fp:016x}\t{name}")?;
    }
    Ok(())
}

pub fn save_policy(
    path: &Path,
    ssp: &GroundSsp,
    pi: &Policy,
    header: &PolicyHeader,
) -> Result<(), PolicyError> {
    let mut buf = Vec::new();
    write_policy(&mut buf, ssp, pi, header)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a policy file and rebinds it to concrete states by walking the
/// policy closure from the initial state. Entries for states the closure
/// never visits are ignored; an entry naming an unknown action is an error.
pub fn load_policy(path: &Path, ssp: &GroundSsp) -> Result<(PolicyHeader, Policy), PolicyError> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header: PolicyHeader = serde_json::from_str(first.trim_end())?;
    if header.format != POLICY_FORMAT {
        return Err(PolicyError::BadFormat(format!("unknown format `{}`", header.format)));
    }
    if header.problem != ssp.problem_name() {
        return Err(PolicyError::ProblemMismatch {
            want: header.problem.clone(),
            got: ssp.problem_name().to_string(),
        });
    }

    let mut entries: HashMap<u64, String> = HashMap::new();
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (fp_hex, name) = line
            .split_once('\t')
            .ok_or_else(|| PolicyError::BadFormat(format!("missing tab in `{line}`")))?;
        let fp = u64::from_str_radix(fp_hex, 16)
            .map_err(|_| PolicyError::BadFormat(format!("bad fingerprint `{fp_hex}`")))?;
        entries.insert(fp, name.to_string());
    }

    let mut by_name: HashMap<String, ActionId> = HashMap::new();
    for a in 0..ssp.actions().len() as ActionId {
        by_name.insert(ssp.action_display(a), a);
    }

    let mut pi = Policy::default();
    let s0 = ssp.init().clone();
    let mut seen = HashSet::from([s0.clone()]);
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        if ssp.is_goal_state(&s) {
            continue;
        }
        let Some(name) = entries.get(&s.fingerprint()) else {
            continue;
        };
        let &a = by_name
            .get(name)
            .ok_or_else(|| PolicyError::UnknownAction { name: name.clone() })?;
        pi.insert(s.clone(), a);
        let action = &ssp.actions()[a as usize];
        for outcome in &action.outcomes {
            let next = s.apply(&outcome.add, &outcome.del);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok((header, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppddl::{parse_domain, parse_problem};

    /// Two-step chain: a deterministic step then a 0.5-success step.
    /// V(s1) = 1/0.5 = 2, V(s0) = 3.
    fn chain() -> GroundSsp {
        let dom = parse_domain(
            r#"
            (define (domain chain)
              (:predicates (at0) (at1) (done))
              (:action step1
                :parameters ()
                :precondition (and (at0))
                :effect (and (at1) (not (at0))))
              (:action step2
                :parameters ()
                :precondition (and (at1))
                :effect (probabilistic 0.5 (and (done) (not (at1))))))
        "#,
        )
        .unwrap();
        let prob = parse_problem(
            "(define (problem chain-1) (:domain chain) (:init (at0)) (:goal (done)))",
            &dom,
        )
        .unwrap();
        crate::ppddl::ground::ground(&dom, &prob).unwrap()
    }

    fn converge(ssp: &GroundSsp, table: &mut ValueTable) {
        let s0 = ssp.initial_state();
        let s1 = {
            let succ = ssp.successors(&s0, ssp.applicable_actions(&s0)[0]);
            succ[0].state.clone()
        };
        for _ in 0..200 {
            bellman_backup(ssp, &s1, table);
            bellman_backup(ssp, &s0, table);
        }
    }

    #[test]
    fn backups_converge_to_hand_computed_values() {
        let ssp = chain();
        let mut table = ValueTable::zeroed();
        converge(&ssp, &mut table);
        let s0 = ssp.initial_state();
        assert!((table.value(&s0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn residual_of_two_infinities_is_zero() {
        assert_eq!(residual(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(residual(1.0, 3.0), 2.0);
        assert!(residual(1.0, f64::INFINITY).is_infinite());
    }

    #[test]
    fn greedy_extraction_yields_partial_proper_policy() {
        let ssp = chain();
        let mut table = ValueTable::zeroed();
        converge(&ssp, &mut table);
        let s0 = ssp.initial_state();
        let pi = extract_policy(&ssp, &mut table, &s0).unwrap();
        assert_eq!(pi.len(), 2);
        assert!(is_partial_proper(&ssp, &pi, &s0));
        assert!((policy_value(&ssp, &pi, &s0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_policy_is_not_partial_proper() {
        let ssp = chain();
        let pi = Policy::default();
        assert!(!is_partial_proper(&ssp, &pi, &ssp.initial_state()));
    }

    #[test]
    fn backup_cap_saturates_to_infinity() {
        let ssp = chain();
        let mut table = ValueTable::zeroed();
        let s0 = ssp.initial_state();
        table.set(&s0, 0.0);
        // force a huge successor value so the Q-value crosses the cap
        let s1 = ssp.successors(&s0, 0)[0].state.clone();
        table.set(&s1, 1e9);
        let b = backup_with_cap(&ssp, &s0, &mut table, 1e6);
        assert!(b.value.is_infinite());
        assert_eq!(b.action, None);
    }

    #[test]
    fn evaluation_is_deterministic_and_reaches_goal() {
        let ssp = chain();
        let mut table = ValueTable::zeroed();
        converge(&ssp, &mut table);
        let s0 = ssp.initial_state();
        let pi = extract_policy(&ssp, &mut table, &s0).unwrap();
        let a = evaluate_policy(&ssp, &pi, 500, 100, 42);
        let b = evaluate_policy(&ssp, &pi, 500, 100, 42);
        assert_eq!(a, b);
        assert_eq!(a.goal_rate, 1.0);
        assert!((a.mean - 3.0).abs() < 0.5);
    }

    #[test]
    fn undefined_policy_is_charged_the_horizon() {
        let ssp = chain();
        let stats = evaluate_policy(&ssp, &Policy::default(), 10, 25, 7);
        assert_eq!(stats.mean, 25.0);
        assert_eq!(stats.goal_rate, 0.0);
    }

    #[test]
    fn policy_file_roundtrip_is_deterministic() {
        let ssp = chain();
        let mut table = ValueTable::zeroed();
        converge(&ssp, &mut table);
        let s0 = ssp.initial_state();
        let pi = extract_policy(&ssp, &mut table, &s0).unwrap();
        let header = PolicyHeader {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            problem: "chain-1".into(),
            domain_file: "chain-domain.ppddl".into(),
            problem_file: "chain-1.ppddl".into(),
            solver: "vi".into(),
            heuristic: "zero".into(),
            seed: 0,
            epsilon: 1e-5,
            converged: true,
            v_s0: 3.0,
        };
        let mut one = Vec::new();
        let mut two = Vec::new();
        write_policy(&mut one, &ssp, &pi, &header).unwrap();
        write_policy(&mut two, &ssp, &pi, &header).unwrap();
        assert_eq!(one, two);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.policy");
        save_policy(&path, &ssp, &pi, &header).unwrap();
        let (loaded_header, loaded) = load_policy(&path, &ssp).unwrap();
        assert_eq!(loaded_header, header);
        assert_eq!(loaded, pi);
    }

    #[test]
    fn fingerprints_are_stable() {
        let ssp = chain();
        let mut s = State::empty(ssp.num_facts());
        s.insert(0);
        s.insert(2);
        // pinned: FNV-1a over the little-endian bytes of [0u32, 2u32]
        assert_eq!(s.fingerprint(), fnv1a64([0, 0, 0, 0, 2, 0, 0, 0]));
    }
}
