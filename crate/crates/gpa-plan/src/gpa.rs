//! Generalized policy automata. A GPA is a nondeterministic automaton over
//! abstract states: its edges record which abstract transitions some good
//! policy was ever seen to take. Learned from solved training instances, it
//! constrains planning on new instances of the same domain by pricing every
//! transition that leaves the automaton at infinity; if the constrained
//! problem turns out unsolvable from s0, the planner falls back to the
//! unconstrained problem, reusing the finite values it already computed.

use crate::abstraction::{
    alpha_with, beta_with, member_index, member_name, role_map, AbstractAction, AbstractState,
    Role, RoleMap, Tv,
};
use crate::ppddl::ground::GroundSsp;
use crate::ppddl::DomainDef;
use crate::solvers::{
    default_seed, solve_seeded, SolveError, SolveResult, SolverConfig, SolverId,
};
use crate::ssp::{is_partial_proper, ActionId, Policy, Seed, Ssp, State, Successor};
use crate::util::fnv1a64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpaError {
    #[error("model was built for a different vocabulary (expected {expect:016x}, got {got:016x})")]
    VocabularyMismatch { expect: u64, got: u64 },
    #[error("policy leaves reachable state {fingerprint:016x} unmapped")]
    PolicyIncomplete { fingerprint: u64 },
    #[error("malformed model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

const GPA_FORMAT: &str = "gpa-model";
const GPA_VERSION: u32 = 1;

/// The automaton: interned abstract states and actions, with the edge map
/// keyed by (source, action) and valued by the set of permitted targets.
/// Merging more evidence only ever unions target sets, so learning is
/// idempotent and order-independent.
#[derive(Debug, Clone)]
pub struct Gpa {
    vocab_hash: u64,
    vertices: Vec<AbstractState>,
    vertex_index: HashMap<AbstractState, u32>,
    actions: Vec<AbstractAction>,
    action_index: HashMap<AbstractAction, u32>,
    edges: BTreeMap<(u32, u32), BTreeSet<u32>>,
}

impl Gpa {
    pub fn new(vocab_hash: u64) -> Self {
        Gpa {
            vocab_hash,
            vertices: Vec::new(),
            vertex_index: HashMap::new(),
            actions: Vec::new(),
            action_index: HashMap::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn vocab_hash(&self) -> u64 {
        self.vocab_hash
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_targets(&self) -> usize {
        self.edges.values().map(|d| d.len()).sum()
    }

    fn intern_vertex(&mut self, s: AbstractState) -> u32 {
        if let Some(&id) = self.vertex_index.get(&s) {
            return id;
        }
        let id = self.vertices.len() as u32;
        self.vertices.push(s.clone());
        self.vertex_index.insert(s, id);
        id
    }

    fn intern_action(&mut self, a: AbstractAction) -> u32 {
        if let Some(&id) = self.action_index.get(&a) {
            return id;
        }
        let id = self.actions.len() as u32;
        self.actions.push(a.clone());
        self.action_index.insert(a, id);
        id
    }

    pub fn insert_transition(
        &mut self,
        src: AbstractState,
        act: AbstractAction,
        dst: AbstractState,
    ) {
        let s = self.intern_vertex(src);
        let a = self.intern_action(act);
        let d = self.intern_vertex(dst);
        self.edges.entry((s, a)).or_default().insert(d);
    }

    /// Does the automaton allow this abstract transition?
    pub fn is_consistent(
        &self,
        src: &AbstractState,
        act: &AbstractAction,
        dst: &AbstractState,
    ) -> bool {
        let (Some(&s), Some(&a), Some(&d)) = (
            self.vertex_index.get(src),
            self.action_index.get(act),
            self.vertex_index.get(dst),
        ) else {
            return false;
        };
        self.edges.get(&(s, a)).is_some_and(|dests| dests.contains(&d))
    }

    /// Structure up to vertex numbering; two automata learned from the same
    /// evidence in different orders compare equal through this.
    pub fn canonical_form(
        &self,
    ) -> BTreeMap<(AbstractState, AbstractAction), BTreeSet<AbstractState>> {
        self.edges
            .iter()
            .map(|(&(s, a), dests)| {
                (
                    (self.vertices[s as usize].clone(), self.actions[a as usize].clone()),
                    dests.iter().map(|&d| self.vertices[d as usize].clone()).collect(),
                )
            })
            .collect()
    }
}

impl PartialEq for Gpa {
    fn eq(&self, other: &Self) -> bool {
        self.vocab_hash == other.vocab_hash && self.canonical_form() == other.canonical_form()
    }
}

impl Eq for Gpa {}

/// Every transition the policy can take from its closure: one triple per
/// positive-probability outcome, in BFS order from the initial state.
pub fn policy_to_transitions(
    ssp: &GroundSsp,
    pi: &Policy,
) -> Result<Vec<(State, ActionId, State)>, GpaError> {
    let s0 = ssp.initial_state();
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::from([s0.clone()]);
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        if ssp.is_goal(&s) {
            continue;
        }
        let Some(a) = pi.action(&s) else {
            return Err(GpaError::PolicyIncomplete { fingerprint: s.fingerprint() });
        };
        for succ in ssp.successors(&s, a) {
            if succ.prob == 0.0 {
                continue;
            }
            out.push((s.clone(), a, succ.state.clone()));
            if seen.insert(succ.state.clone()) {
                queue.push_back(succ.state);
            }
        }
    }
    Ok(out)
}

/// Folds one solved instance into the automaton.
pub fn merge_into(gpa: &mut Gpa, ssp: &GroundSsp, pi: &Policy) -> Result<(), GpaError> {
    if ssp.vocab_hash() != gpa.vocab_hash {
        return Err(GpaError::VocabularyMismatch {
            expect: gpa.vocab_hash,
            got: ssp.vocab_hash(),
        });
    }
    let mut memo: HashMap<State, (RoleMap, AbstractState)> = HashMap::new();
    let mut abstract_of = |s: &State| -> (RoleMap, AbstractState) {
        memo.entry(s.clone())
            .or_insert_with(|| {
                let rm = role_map(ssp, s);
                let a = alpha_with(&rm, ssp, s);
                (rm, a)
            })
            .clone()
    };
    for (s, a, t) in policy_to_transitions(ssp, pi)? {
        let (rm, src) = abstract_of(&s);
        let (_, dst) = abstract_of(&t);
        let act = beta_with(&rm, ssp, a);
        gpa.insert_transition(src, act, dst);
    }
    Ok(())
}

/// Learns an automaton from already-solved instances of one domain.
pub fn learn_gpa(items: &[(&GroundSsp, &Policy)]) -> Result<Gpa, GpaError> {
    let hash = items.first().map(|(ssp, _)| ssp.vocab_hash()).unwrap_or(0);
    let mut gpa = Gpa::new(hash);
    for (ssp, pi) in items {
        merge_into(&mut gpa, ssp, pi)?;
    }
    Ok(gpa)
}

// ---------------------------------------------------------------------------
// constrained planning

/// The base problem with automaton-inconsistent transitions priced at
/// INFINITY. Dynamics and applicability are untouched; only costs move.
pub struct ConstrainedSsp<'a> {
    base: &'a GroundSsp,
    gpa: &'a Gpa,
    memo: RefCell<HashMap<State, (Option<u32>, RoleMap)>>,
}

pub fn constrain<'a>(base: &'a GroundSsp, gpa: &'a Gpa) -> Result<ConstrainedSsp<'a>, GpaError> {
    if base.vocab_hash() != gpa.vocab_hash() {
        return Err(GpaError::VocabularyMismatch {
            expect: gpa.vocab_hash(),
            got: base.vocab_hash(),
        });
    }
    Ok(ConstrainedSsp { base, gpa, memo: RefCell::new(HashMap::new()) })
}

impl ConstrainedSsp<'_> {
    fn vertex_of(
        &self,
        memo: &mut HashMap<State, (Option<u32>, RoleMap)>,
        s: &State,
    ) -> Option<u32> {
        if let Some((v, _)) = memo.get(s) {
            return *v;
        }
        let rm = role_map(self.base, s);
        let abs = alpha_with(&rm, self.base, s);
        let v = self.gpa.vertex_index.get(&abs).copied();
        memo.insert(s.clone(), (v, rm));
        v
    }
}

impl Ssp for ConstrainedSsp<'_> {
    fn ground(&self) -> &GroundSsp {
        self.base
    }

    fn successors(&self, s: &State, a: ActionId) -> Vec<Successor> {
        if self.is_goal(s) {
            return vec![Successor { state: s.clone(), prob: 1.0, cost: 0.0 }];
        }
        let mut out = self.base.successors(s, a);
        let mut memo = self.memo.borrow_mut();
        let allowed = self.vertex_of(&mut memo, s).and_then(|src| {
            let (_, rm) = &memo[s];
            let act = self.gpa.action_index.get(&beta_with(rm, self.base, a))?;
            self.gpa.edges.get(&(src, *act))
        });
        match allowed {
            None => {
                for succ in &mut out {
                    succ.cost = f64::INFINITY;
                }
            }
            Some(dests) => {
                let dests = dests.clone(); // unborrow gpa before touching memo
                for succ in &mut out {
                    let ok = self
                        .vertex_of(&mut memo, &succ.state)
                        .is_some_and(|d| dests.contains(&d));
                    if !ok {
                        succ.cost = f64::INFINITY;
                    }
                }
            }
        }
        out
    }
}

/// Outcome of `solve_with_gpa`, flagging which phase produced the result.
#[derive(Debug)]
pub struct AcceleratedSolve {
    pub result: SolveResult,
    /// true if the constrained problem already yielded a proper policy
    pub used_constrained: bool,
}

/// Planning with an automaton in the loop: solve the constrained problem
/// first; accept its policy if it is partial proper on the real problem,
/// otherwise solve the real problem seeded with the finite values the
/// constrained phase produced. Work counters accumulate across both phases.
pub fn solve_with_gpa(
    base: &GroundSsp,
    gpa: &Gpa,
    solver: SolverId,
    cfg: &SolverConfig,
) -> Result<AcceleratedSolve, GpaError> {
    let constrained = constrain(base, gpa)?;
    let phase1 = solve_seeded(&constrained, solver, cfg, None)?;
    let s0 = base.initial_state();
    let proper = !phase1.policy.is_empty() && is_partial_proper(base, &phase1.policy, &s0);
    if phase1.converged {
        // At convergence the two properness signals must coincide.
        debug_assert_eq!(proper, phase1.v_s0.is_finite());
    }
    if phase1.converged && proper {
        return Ok(AcceleratedSolve { result: phase1, used_constrained: true });
    }
    let prior: HashMap<State, f64> =
        phase1.table.finite_values().map(|(s, v)| (s.clone(), v)).collect();
    let seed = Seed::Bootstrap { prior, fallback: Box::new(default_seed(base, cfg)) };
    let mut phase2 = solve_seeded(base, solver, cfg, Some(seed))?;
    phase2.stats.backups += phase1.stats.backups;
    phase2.stats.trials += phase1.stats.trials;
    phase2.stats.states_expanded += phase1.stats.states_expanded;
    phase2.stats.wall_time += phase1.stats.wall_time;
    Ok(AcceleratedSolve { result: phase2, used_constrained: false })
}

// ---------------------------------------------------------------------------
// persistence

#[derive(Serialize, Deserialize)]
struct GpaFile {
    format: String,
    version: u32,
    vocab_hash: String,
    /// each role is the list of its member names (unary predicates or types)
    roles: Vec<Vec<String>>,
    /// abstract states as `r0=2;pred(r1,r2)=0.5` strings over the role table
    states: Vec<String>,
    /// (source state id, action string, sorted target state ids)
    edges: Vec<(u32, String, Vec<u32>)>,
}

fn role_ref(idx: usize) -> String {
    format!("r{idx}")
}

fn dump_role_table(gpa: &Gpa) -> (Vec<Role>, BTreeMap<Role, usize>) {
    let mut set: BTreeSet<Role> = BTreeSet::new();
    for v in &gpa.vertices {
        for (r, _) in v.roles.iter() {
            set.insert(r.clone());
        }
        for ((_, rs), _) in v.relations.iter() {
            for r in rs.iter() {
                set.insert(r.clone());
            }
        }
    }
    for a in &gpa.actions {
        for r in a.roles.iter() {
            set.insert(r.clone());
        }
    }
    let table: Vec<Role> = set.into_iter().collect();
    let index = table.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
    (table, index)
}

fn dump_state(s: &AbstractState, dom: &DomainDef, roles: &BTreeMap<Role, usize>) -> String {
    let mut parts = Vec::new();
    for (r, n) in s.roles.iter() {
        parts.push(format!("{}={}", role_ref(roles[r]), n));
    }
    for ((pred, rs), tv) in s.relations.iter() {
        let args: Vec<String> = rs.iter().map(|r| role_ref(roles[r])).collect();
        let v = match tv {
            Tv::One => "1",
            _ => "0.5",
        };
        parts.push(format!("{}({})={}", dom.predicates[*pred].name, args.join(","), v));
    }
    parts.join(";")
}

fn dump_action(a: &AbstractAction, dom: &DomainDef, roles: &BTreeMap<Role, usize>) -> String {
    let args: Vec<String> = a.roles.iter().map(|r| role_ref(roles[r])).collect();
    format!("{}({})", dom.actions[a.schema].name, args.join(","))
}

pub fn gpa_to_json(gpa: &Gpa, dom: &DomainDef) -> Result<String, GpaError> {
    let (table, role_idx) = dump_role_table(gpa);
    let mut order: Vec<u32> = (0..gpa.vertices.len() as u32).collect();
    order.sort_by(|&a, &b| gpa.vertices[a as usize].cmp(&gpa.vertices[b as usize]));
    let mut new_id = vec![0u32; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_id[old as usize] = new as u32;
    }
    let states: Vec<String> =
        order.iter().map(|&old| dump_state(&gpa.vertices[old as usize], dom, &role_idx)).collect();
    let mut edges: Vec<(u32, String, Vec<u32>)> = gpa
        .edges
        .iter()
        .map(|(&(s, a), dests)| {
            let mut ds: Vec<u32> = dests.iter().map(|&d| new_id[d as usize]).collect();
            ds.sort_unstable();
            (new_id[s as usize], dump_action(&gpa.actions[a as usize], dom, &role_idx), ds)
        })
        .collect();
    edges.sort();
    let file = GpaFile {
        format: GPA_FORMAT.to_string(),
        version: GPA_VERSION,
        vocab_hash: format!("{:016x}", gpa.vocab_hash),
        roles: table
            .iter()
            .map(|r| r.0.iter().map(|&p| member_name(dom, p).to_string()).collect())
            .collect(),
        states,
        edges,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save_gpa(path: &Path, gpa: &Gpa, dom: &DomainDef) -> Result<(), GpaError> {
    let mut text = gpa_to_json(gpa, dom)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_role_ref(s: &str, table: &[Role]) -> Result<Role, GpaError> {
    let idx: usize = s
        .strip_prefix('r')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| GpaError::BadModel(format!("bad role reference `{s}`")))?;
    table
        .get(idx)
        .cloned()
        .ok_or_else(|| GpaError::BadModel(format!("role reference `{s}` out of range")))
}

fn parse_state(text: &str, dom: &DomainDef, table: &[Role]) -> Result<AbstractState, GpaError> {
    let mut roles: BTreeMap<Role, u8> = BTreeMap::new();
    let mut relations: BTreeMap<(usize, Box<[Role]>), Tv> = BTreeMap::new();
    for part in text.split(';').filter(|p| !p.is_empty()) {
        let (lhs, rhs) = part
            .rsplit_once('=')
            .ok_or_else(|| GpaError::BadModel(format!("missing `=` in `{part}`")))?;
        match lhs.split_once('(') {
            None => {
                let n: u8 = rhs
                    .parse()
                    .ok()
                    .filter(|n| (1..=2).contains(n))
                    .ok_or_else(|| GpaError::BadModel(format!("bad role count in `{part}`")))?;
                roles.insert(parse_role_ref(lhs, table)?, n);
            }
            Some((name, args)) => {
                let args = args
                    .strip_suffix(')')
                    .ok_or_else(|| GpaError::BadModel(format!("missing `)` in `{part}`")))?;
                let pred = dom
                    .predicate_index(name)
                    .ok_or_else(|| GpaError::BadModel(format!("unknown predicate `{name}`")))?;
                let rs: Result<Vec<Role>, GpaError> =
                    args.split(',').map(|a| parse_role_ref(a, table)).collect();
                let tv = match rhs {
                    "1" => Tv::One,
                    "0.5" => Tv::Half,
                    other => {
                        return Err(GpaError::BadModel(format!("bad relation value `{other}`")))
                    }
                };
                relations.insert((pred, rs?.into_boxed_slice()), tv);
            }
        }
    }
    Ok(AbstractState {
        roles: roles.into_iter().collect(),
        relations: relations.into_iter().collect(),
    })
}

fn parse_action(text: &str, dom: &DomainDef, table: &[Role]) -> Result<AbstractAction, GpaError> {
    let (name, args) = text
        .split_once('(')
        .and_then(|(n, a)| Some((n, a.strip_suffix(')')?)))
        .ok_or_else(|| GpaError::BadModel(format!("bad action `{text}`")))?;
    let schema = dom
        .action_index(name)
        .ok_or_else(|| GpaError::BadModel(format!("unknown action `{name}`")))?;
    let roles: Result<Vec<Role>, GpaError> = if args.is_empty() {
        Ok(Vec::new())
    } else {
        args.split(',').map(|a| parse_role_ref(a, table)).collect()
    };
    Ok(AbstractAction { schema, roles: roles?.into_boxed_slice() })
}

pub fn load_gpa(path: &Path, dom: &DomainDef) -> Result<Gpa, GpaError> {
    let file: GpaFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.format != GPA_FORMAT {
        return Err(GpaError::BadModel(format!("unknown format `{}`", file.format)));
    }
    if file.version != GPA_VERSION {
        return Err(GpaError::BadModel(format!("unsupported version {}", file.version)));
    }
    let hash = u64::from_str_radix(&file.vocab_hash, 16)
        .map_err(|_| GpaError::BadModel("bad vocabulary hash".to_string()))?;
    let here = fnv1a64(crate::ppddl::ground::vocab_signature(dom).bytes());
    if hash != here {
        return Err(GpaError::VocabularyMismatch { expect: hash, got: here });
    }
    let table: Result<Vec<Role>, GpaError> = file
        .roles
        .iter()
        .map(|names| {
            let mut ids = Vec::with_capacity(names.len());
            for n in names {
                let p = member_index(dom, n)
                    .ok_or_else(|| GpaError::BadModel(format!("`{n}` is not usable in a role")))?;
                ids.push(p);
            }
            ids.sort_unstable();
            Ok(Role(ids.into_boxed_slice()))
        })
        .collect();
    let table = table?;
    let states: Result<Vec<AbstractState>, GpaError> =
        file.states.iter().map(|s| parse_state(s, dom, &table)).collect();
    let states = states?;
    let mut gpa = Gpa::new(hash);
    for (src, act, dests) in &file.edges {
        let src = states
            .get(*src as usize)
            .ok_or_else(|| GpaError::BadModel(format!("state id {src} out of range")))?;
        let act = parse_action(act, dom, &table)?;
        for d in dests {
            let dst = states
                .get(*d as usize)
                .ok_or_else(|| GpaError::BadModel(format!("state id {d} out of range")))?;
            gpa.insert_transition(src.clone(), act.clone(), dst.clone());
        }
    }
    Ok(gpa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn role(ids: &[usize]) -> Role {
        Role(ids.to_vec().into_boxed_slice())
    }

    fn astate(counts: &[(&[usize], u8)]) -> AbstractState {
        AbstractState {
            roles: counts.iter().map(|(ids, n)| (role(ids), *n)).collect(),
            relations: Box::new([]),
        }
    }

    fn act(schema: usize, args: &[&[usize]]) -> AbstractAction {
        AbstractAction { schema, roles: args.iter().map(|ids| role(ids)).collect() }
    }

    #[test]
    fn merging_is_idempotent_and_order_independent() {
        let s1 = astate(&[(&[0], 2)]);
        let s2 = astate(&[(&[0], 1), (&[1], 1)]);
        let s3 = astate(&[(&[1], 2)]);
        let a = act(0, &[&[0]]);
        let b = act(1, &[&[1]]);
        let triples =
            [(s1.clone(), a.clone(), s2.clone()), (s2.clone(), b.clone(), s3.clone()), (s1.clone(), a.clone(), s3.clone())];
        let mut fwd = Gpa::new(7);
        for (s, x, d) in &triples {
            fwd.insert_transition(s.clone(), x.clone(), d.clone());
            fwd.insert_transition(s.clone(), x.clone(), d.clone());
        }
        let mut rev = Gpa::new(7);
        for (s, x, d) in triples.iter().rev() {
            rev.insert_transition(s.clone(), x.clone(), d.clone());
        }
        assert_eq!(fwd, rev);
        assert_eq!(fwd.num_vertices(), 3);
        assert_eq!(fwd.num_edges(), 2);
        assert_eq!(fwd.num_targets(), 3);
        assert!(fwd.is_consistent(&s1, &a, &s3));
        assert!(!fwd.is_consistent(&s1, &b, &s3));
        assert!(!fwd.is_consistent(&s3, &a, &s1));
    }

    #[test]
    fn consistency_requires_known_endpoints() {
        let s1 = astate(&[(&[0], 1)]);
        let s2 = astate(&[(&[1], 1)]);
        let unknown = astate(&[(&[2], 2)]);
        let a = act(0, &[]);
        let mut gpa = Gpa::new(1);
        gpa.insert_transition(s1.clone(), a.clone(), s2.clone());
        assert!(gpa.is_consistent(&s1, &a, &s2));
        assert!(!gpa.is_consistent(&unknown, &a, &s2));
        assert!(!gpa.is_consistent(&s1, &a, &unknown));
    }
}
