//! SSP solvers: exhaustive value iteration, LRTDP, improved LAO*, and
//! Soft-FLARES. All of them share the `SolverConfig` knobs, count work the
//! same way (one backup = one write of a state's value), and return a
//! `SolveResult` whose policy is extracted greedily from the final table.

pub mod lao;
pub mod lrtdp;
pub mod soft_flares;
pub mod vi;

use crate::heuristics::{evaluator, HeuristicKind};
use crate::ssp::{
    extract_policy, is_partial_proper, residual, ActionId, Backup, Policy, PolicyError, Seed,
    Ssp, State, ValueTable,
};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverId {
    Vi,
    Lao,
    Lrtdp,
    SoftFlares,
}

impl FromStr for SolverId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vi" => Ok(SolverId::Vi),
            "lao" => Ok(SolverId::Lao),
            "lrtdp" => Ok(SolverId::Lrtdp),
            "soft-flares" => Ok(SolverId::SoftFlares),
            other => Err(format!(
                "unknown solver `{other}` (expected vi, lao, lrtdp, or soft-flares)"
            )),
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverId::Vi => "vi",
            SolverId::Lao => "lao",
            SolverId::Lrtdp => "lrtdp",
            SolverId::SoftFlares => "soft-flares",
        })
    }
}

/// Labeling schedule for Soft-FLARES: residual checks run to depth
/// `t_horizon`, and a state verified consistent to distance `d` is labeled
/// solved with a probability that climbs from just above `alpha` at `d = 0`
/// to just below `beta` at `d = t_horizon`.
#[derive(Debug, Clone, Copy)]
pub struct SoftFlaresParams {
    pub t_horizon: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SoftFlaresParams {
    fn default() -> Self {
        SoftFlaresParams { t_horizon: 4, alpha: 0.1, beta: 0.9 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub heuristic: HeuristicKind,
    pub max_trials: Option<u64>,
    pub time_limit: Option<Duration>,
    pub state_limit: usize,
    /// Saturation cap for the trial-based solvers: a state whose backup
    /// reaches this value is treated as a dead end and pinned to INFINITY.
    pub dead_end_value: f64,
    pub soft_flares: SoftFlaresParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-5,
            seed: 0,
            heuristic: HeuristicKind::Ff,
            max_trials: None,
            time_limit: None,
            state_limit: 2_000_000,
            dead_end_value: 1e4,
            soft_flares: SoftFlaresParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |what: &str| Err(SolveError::InvalidConfig { what: what.to_string() });
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive and finite");
        }
        if !(self.dead_end_value.is_finite() && self.dead_end_value > 0.0) {
            return bad("dead_end_value must be positive and finite");
        }
        let sf = &self.soft_flares;
        if !(0.0..=1.0).contains(&sf.alpha) || !(0.0..=1.0).contains(&sf.beta) || sf.alpha > sf.beta
        {
            return bad("soft-flares labeling probabilities need 0 <= alpha <= beta <= 1");
        }
        if self.state_limit == 0 {
            return bad("state_limit must be nonzero");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub backups: u64,
    pub states_expanded: u64,
    pub trials: u64,
    pub wall_time: Duration,
}

#[derive(Debug)]
pub struct SolveResult {
    pub policy: Policy,
    pub table: ValueTable,
    pub v_s0: f64,
    pub converged: bool,
    pub stats: SolveStats,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("state limit of {limit} reached while expanding the problem")]
    StateLimit { limit: usize },
    #[error("invalid solver configuration: {what}")]
    InvalidConfig { what: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

pub fn solve<M: Ssp>(m: &M, solver: SolverId, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_seeded(m, solver, cfg, None)
}

/// Like `solve`, but with an explicit seeding strategy for the value table
/// (used to bootstrap a solve from another solve's finite values).
pub(crate) fn solve_seeded<M: Ssp>(
    m: &M,
    solver: SolverId,
    cfg: &SolverConfig,
    seed: Option<Seed>,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    if solver == SolverId::Vi {
        return vi::solve(m, cfg);
    }
    let table = ValueTable::with_seed(match seed {
        Some(seed) => seed,
        None => default_seed(m, cfg),
    });
    match solver {
        SolverId::Lao => lao::solve(m, cfg, table),
        SolverId::Lrtdp => lrtdp::solve(m, cfg, table),
        SolverId::SoftFlares => soft_flares::solve(m, cfg, table),
        SolverId::Vi => unreachable!(),
    }
}

pub(crate) fn default_seed<M: Ssp>(m: &M, cfg: &SolverConfig) -> Seed {
    match cfg.heuristic {
        HeuristicKind::Zero => Seed::Zero,
        kind => Seed::Heuristic(evaluator(kind, m.ground())),
    }
}

pub(crate) struct SuccEntry {
    pub state: State,
    pub prob: f64,
    pub cost: f64,
    pub goal: bool,
}

pub(crate) struct CacheEntry {
    pub goal: bool,
    /// (action, successors); successor probs sum to 1 per action
    pub acts: Vec<(ActionId, Vec<SuccEntry>)>,
}

/// Per-solve cache of goal flags and applicable-action successor lists so
/// repeated backups of a state do not re-ground it.
pub(crate) struct Expander<'m, M: Ssp> {
    pub m: &'m M,
    cache: HashMap<State, CacheEntry>,
    /// States classified by `goal_reachable`; membership is permanent for the
    /// solve because reachability is a property of the transition graph, not
    /// of the evolving value table.
    reach_yes: HashSet<State>,
    reach_no: HashSet<State>,
}

impl<'m, M: Ssp> Expander<'m, M> {
    pub fn new(m: &'m M) -> Self {
        Expander {
            m,
            cache: HashMap::new(),
            reach_yes: HashSet::new(),
            reach_no: HashSet::new(),
        }
    }

    pub fn expanded(&self) -> usize {
        self.cache.len()
    }

    pub fn entry(&mut self, s: &State) -> &CacheEntry {
        if !self.cache.contains_key(s) {
            let goal = self.m.is_goal(s);
            let acts = if goal {
                Vec::new()
            } else {
                self.m
                    .applicable_actions(s)
                    .into_iter()
                    .map(|a| {
                        let succ = self
                            .m
                            .successors(s, a)
                            .into_iter()
                            .filter(|sc| sc.prob > 0.0)
                            .map(|sc| SuccEntry {
                                goal: self.m.is_goal(&sc.state),
                                state: sc.state,
                                prob: sc.prob,
                                cost: sc.cost,
                            })
                            .collect();
                        (a, succ)
                    })
                    .collect()
            };
            self.cache.insert(s.clone(), CacheEntry { goal, acts });
        }
        &self.cache[s]
    }

    pub fn is_goal(&mut self, s: &State) -> bool {
        self.entry(s).goal
    }
}

/// Greedy Q-minimization over the cache, without writing `s` itself.
///
/// Dead-end collapse happens here, not in the backup: values at or above
/// `cfg.dead_end_value` become INFINITY, and values approaching it trigger
/// a goal-reachability check so confirmed dead ends pin at once instead of
/// escalating one backup at a time. Putting the collapse in the greedy
/// evaluation keeps every residual and labeling check consistent with what
/// backups write; otherwise a pinned state reads as eternally inconsistent
/// and trial-based solvers never terminate on it.
pub(crate) fn greedy_cached<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    s: &State,
    cfg: &SolverConfig,
) -> (f64, Option<ActionId>) {
    let entry = exp.entry(s);
    if entry.goal {
        return (0.0, None);
    }
    let mut best = f64::INFINITY;
    let mut best_a = None;
    for (a, succ) in &entry.acts {
        let mut q = 0.0;
        for sc in succ {
            q += sc.prob * sc.cost;
            if !sc.goal {
                q += sc.prob * table.value(&sc.state);
            }
            if q.is_infinite() {
                break;
            }
        }
        if q < best {
            best = q;
            best_a = Some(*a);
        }
    }
    if best >= cfg.dead_end_value
        || (best >= REACH_CHECK_FRACTION * cfg.dead_end_value
            && !goal_reachable(exp, s, cfg.state_limit))
    {
        return (f64::INFINITY, None);
    }
    (best, best_a)
}

/// Can any goal be reached from `start` through positive-probability,
/// finite-cost edges? In a finite SSP the optimal value of a state is finite
/// exactly when this holds, so a negative answer certifies a dead end
/// outright instead of waiting for its value to creep up to the saturation
/// cap one backup at a time (cycles whose only exits are dead ends do that).
///
/// Results are cached in the expander. A hit in `reach_yes` or `reach_no`
/// is O(1); otherwise one DFS runs and classifies every state it settles:
/// finding a goal marks the discovery path yes, exhausting the search marks
/// the whole visited component no. If the search would exceed `limit`
/// states it gives up and reports reachable, leaving the cap as backstop.
pub(crate) fn goal_reachable<M: Ssp>(
    exp: &mut Expander<'_, M>,
    start: &State,
    limit: usize,
) -> bool {
    if exp.reach_yes.contains(start) {
        return true;
    }
    if exp.reach_no.contains(start) {
        return false;
    }
    let mut parent: HashMap<State, State> = HashMap::new();
    let mut visited: HashSet<State> = HashSet::new();
    let mut stack = vec![start.clone()];
    visited.insert(start.clone());
    while let Some(s) = stack.pop() {
        if exp.is_goal(&s) || exp.reach_yes.contains(&s) {
            // Everything on the discovery path reaches s, hence a goal.
            let mut cur = s;
            loop {
                exp.reach_yes.insert(cur.clone());
                match parent.get(&cur) {
                    Some(p) => cur = p.clone(),
                    None => return true,
                }
            }
        }
        let next: Vec<State> = exp
            .entry(&s)
            .acts
            .iter()
            .flat_map(|(_, succ)| succ)
            .filter(|sc| sc.cost.is_finite())
            .map(|sc| sc.state.clone())
            .collect();
        for t in next {
            if exp.reach_no.contains(&t) || !visited.insert(t.clone()) {
                continue;
            }
            if visited.len() > limit {
                return true;
            }
            parent.insert(t.clone(), s.clone());
            stack.push(t);
        }
    }
    // No goal anywhere in the component: every visited state has all of its
    // successors visited too (or already known dead), so all of them are dead.
    exp.reach_no.extend(visited);
    false
}

/// How close to `dead_end_value` a state's value may climb before the
/// greedy evaluation stops trusting cost-creep and settles reachability
/// explicitly.
const REACH_CHECK_FRACTION: f64 = 0.01;

/// One Bellman backup through the cache: write the greedy value into the
/// table and report how far it moved.
pub(crate) fn backup_cached<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    s: &State,
    cfg: &SolverConfig,
    stats: &mut SolveStats,
) -> Backup {
    let (value, action) = greedy_cached(exp, table, s, cfg);
    let old = table.value(s);
    table.set(s, value);
    stats.backups += 1;
    Backup { value, action, residual: residual(old, value) }
}

/// Wraps up a finished solve: pulls V(s0), extracts the greedy policy when
/// that value is finite, and downgrades `converged` if extraction cannot
/// produce a partial proper policy (which would break the result contract).
pub(crate) fn finish<M: Ssp>(
    m: &M,
    mut table: ValueTable,
    converged: bool,
    mut stats: SolveStats,
    started: Instant,
) -> SolveResult {
    let s0 = m.initial_state();
    let v_s0 = table.value(&s0);
    let (policy, converged) = if v_s0.is_finite() {
        match extract_policy(m, &mut table, &s0) {
            Ok(pi) => {
                let ok = !converged || is_partial_proper(m, &pi, &s0);
                (pi, converged && ok)
            }
            Err(_) => (Policy::default(), false),
        }
    } else {
        (Policy::default(), converged)
    };
    stats.states_expanded = table.len() as u64;
    stats.wall_time = started.elapsed();
    SolveResult { policy, table, v_s0, converged, stats }
}

pub(crate) fn out_of_time(started: Instant, cfg: &SolverConfig) -> bool {
    cfg.time_limit.is_some_and(|lim| started.elapsed() >= lim)
}

/// Trial cutoff guarding against non-terminating greedy cycles.
pub(crate) fn depth_cap(table: &ValueTable) -> usize {
    10 * table.len().max(10_000)
}
