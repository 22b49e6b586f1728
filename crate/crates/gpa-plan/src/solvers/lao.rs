//! Improved LAO*. Grows the explicit graph by expanding the frontier of the
//! current greedy partial graph rooted at s0, then sweeps Bellman backups
//! over that graph. Convergence is certified only when a frontier-free
//! greedy graph survives a sweep unchanged with worst residual below
//! epsilon, so the bound always refers to the graph actually returned. The
//! expansion is heuristic driven, so the solved region can stay far smaller
//! than the full space.

use super::{
    backup_cached, finish, greedy_cached, out_of_time, Expander, SolveError, SolveResult,
    SolveStats, SolverConfig,
};
use crate::ssp::{Ssp, State, ValueTable};
use std::collections::HashSet;
use std::time::Instant;

pub(crate) fn solve<M: Ssp>(
    m: &M,
    cfg: &SolverConfig,
    mut table: ValueTable,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let mut stats = SolveStats::default();
    let mut exp = Expander::new(m);
    let s0 = m.initial_state();
    let mut expanded: HashSet<State> = HashSet::new();

    let mut converged = false;
    loop {
        if out_of_time(started, cfg) {
            break;
        }
        if expanded.len() > cfg.state_limit {
            return Err(SolveError::StateLimit { limit: cfg.state_limit });
        }
        let (graph, tips) = greedy_graph(&mut exp, &mut table, &s0, &expanded, cfg);
        if tips.is_empty() {
            // Convergence test: the envelope is closed; sweep it and accept
            // only if the greedy graph is a fixed point of that sweep.
            let worst = sweep(&mut exp, &mut table, &graph, cfg, &mut stats);
            if worst < cfg.epsilon {
                let (after, tips_after) = greedy_graph(&mut exp, &mut table, &s0, &expanded, cfg);
                if tips_after.is_empty() && after == graph {
                    converged = true;
                    break;
                }
            }
            continue;
        }
        for tip in &tips {
            expanded.insert(tip.clone());
            backup_cached(&mut exp, &mut table, tip, cfg, &mut stats);
        }
        sweep(&mut exp, &mut table, &graph, cfg, &mut stats);
    }
    Ok(finish(m, table, converged, stats, started))
}

/// One pass of Bellman backups over the graph, leaves first; returns the
/// worst residual seen.
fn sweep<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    graph: &[State],
    cfg: &SolverConfig,
    stats: &mut SolveStats,
) -> f64 {
    let mut worst = 0.0f64;
    for s in graph.iter().rev() {
        if exp.is_goal(s) {
            continue;
        }
        let b = backup_cached(exp, table, s, cfg, stats);
        worst = worst.max(b.residual);
    }
    worst
}

/// The greedy partial graph: states reached from s0 by following only the
/// current greedy action of already-expanded states, in BFS order. States
/// not yet expanded are the frontier and are not followed through.
fn greedy_graph<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    s0: &State,
    expanded: &HashSet<State>,
    cfg: &SolverConfig,
) -> (Vec<State>, Vec<State>) {
    let mut order = vec![s0.clone()];
    let mut seen = HashSet::from([s0.clone()]);
    let mut tips = Vec::new();
    let mut at = 0;
    while at < order.len() {
        let s = order[at].clone();
        at += 1;
        if exp.is_goal(&s) {
            continue;
        }
        if !expanded.contains(&s) {
            tips.push(s);
            continue;
        }
        let (value, action) = greedy_cached(exp, table, &s, cfg);
        let Some(a) = action.filter(|_| value.is_finite()) else {
            continue; // recognized dead end, nothing to follow
        };
        let entry = exp.entry(&s);
        let succ = &entry.acts.iter().find(|(x, _)| *x == a).expect("greedy is applicable").1;
        let next: Vec<State> =
            succ.iter().filter(|sc| !sc.goal).map(|sc| sc.state.clone()).collect();
        for t in next {
            if seen.insert(t.clone()) {
                order.push(t);
            }
        }
    }
    (order, tips)
}
