//! Exhaustive value iteration. Enumerates every state reachable from s0,
//! classifies dead ends exactly (states with no policy reaching the goal
//! almost surely over finite-cost actions), pins those to INFINITY, and
//! runs synchronous Bellman sweeps over the rest. The heuristic and
//! dead-end cap settings are not consulted; this solver is the reference
//! the others are checked against.

use super::{finish, out_of_time, SolveError, SolveResult, SolveStats, SolverConfig};
use crate::ssp::{Ssp, State, ValueTable};
use std::collections::HashMap;
use std::time::Instant;

struct Space {
    states: Vec<State>,
    goal: Vec<bool>,
    /// per state: (action, successors as (state index, prob, cost))
    acts: Vec<Vec<(u32, Vec<(usize, f64, f64)>)>>,
}

fn enumerate<M: Ssp>(m: &M, cfg: &SolverConfig) -> Result<Space, SolveError> {
    let s0 = m.initial_state();
    let mut states = vec![s0.clone()];
    let mut index = HashMap::from([(s0, 0usize)]);
    let mut goal = Vec::new();
    let mut acts = Vec::new();
    let mut at = 0;
    while at < states.len() {
        let s = states[at].clone();
        let g = m.is_goal(&s);
        goal.push(g);
        let mut out = Vec::new();
        if !g {
            for a in m.applicable_actions(&s) {
                let mut succ = Vec::new();
                for sc in m.successors(&s, a) {
                    if sc.prob == 0.0 {
                        continue;
                    }
                    let fresh = index.len();
                    let idx = *index.entry(sc.state.clone()).or_insert(fresh);
                    if idx == states.len() {
                        states.push(sc.state);
                        if states.len() > cfg.state_limit {
                            return Err(SolveError::StateLimit { limit: cfg.state_limit });
                        }
                    }
                    succ.push((idx, sc.prob, sc.cost));
                }
                out.push((a, succ));
            }
        }
        acts.push(out);
        at += 1;
    }
    Ok(Space { states, goal, acts })
}

/// States from which some policy reaches the goal with probability one
/// using only finite-cost transitions. Standard two-level fixpoint: keep
/// shrinking the candidate set to states that can reach the goal without
/// any chance of leaving the candidate set.
fn proper_states(space: &Space) -> Vec<bool> {
    let n = space.states.len();
    let finite_act =
        |s: usize, a: usize| space.acts[s][a].1.iter().all(|&(_, _, c)| c.is_finite());
    let mut candidate = vec![true; n];
    loop {
        // positive reachability of the goal, restricted to actions that
        // stay inside `candidate`
        let mut reach = space.goal.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !candidate[s] {
                    continue;
                }
                let ok = space.acts[s].iter().enumerate().any(|(a, (_, succ))| {
                    finite_act(s, a)
                        && succ.iter().all(|&(j, _, _)| candidate[j])
                        && succ.iter().any(|&(j, _, _)| reach[j])
                });
                if ok {
                    reach[s] = true;
                    changed = true;
                }
            }
        }
        if reach == candidate {
            return candidate;
        }
        candidate = reach;
    }
}

pub(crate) fn solve<M: Ssp>(m: &M, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let mut stats = SolveStats::default();
    let space = enumerate(m, cfg)?;
    let proper = proper_states(&space);
    let n = space.states.len();

    let mut values: Vec<f64> =
        (0..n).map(|i| if proper[i] { 0.0 } else { f64::INFINITY }).collect();
    let mut next = values.clone();
    let mut converged = false;
    for _ in 0..1_000_000u64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            if space.goal[i] || !proper[i] {
                continue;
            }
            let mut best = f64::INFINITY;
            for (_, succ) in &space.acts[i] {
                let mut q = 0.0;
                for &(j, p, c) in succ {
                    q += p * (c + values[j]);
                    if q.is_infinite() {
                        break;
                    }
                }
                if q < best {
                    best = q;
                }
            }
            next[i] = best;
            stats.backups += 1;
            worst = worst.max((best - values[i]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if worst < cfg.epsilon {
            converged = true;
            break;
        }
        if out_of_time(started, cfg) {
            break;
        }
    }

    let mut table = ValueTable::zeroed();
    for (i, s) in space.states.iter().enumerate() {
        table.set(s, values[i]);
        if converged {
            table.mark_solved(s);
        }
    }
    Ok(finish(m, table, converged, stats, started))
}
