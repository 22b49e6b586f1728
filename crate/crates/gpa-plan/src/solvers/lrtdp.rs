//! Labeled RTDP. Greedy trials from s0 with Bellman backups along the way,
//! then a backward labeling pass that marks states solved once their whole
//! greedy envelope is residual-consistent. Solved states stop trials early,
//! and the run converges when s0 itself is labeled.

use super::{
    backup_cached, depth_cap, finish, greedy_cached, out_of_time, Expander, SolveError,
    SolveResult, SolveStats, SolverConfig,
};
use crate::ssp::{Ssp, State, ValueTable};
use crate::util::rng_for;
use rand::Rng;
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

    let mut converged = true;
    while !table.is_solved(&s0) {
        if out_of_time(started, cfg)
            || cfg.max_trials.is_some_and(|t| stats.trials >= t)
            || exp.expanded() > cfg.state_limit
        {
            converged = false;
            break;
        }
        run_trial(&mut exp, &mut table, cfg, &s0, &mut stats);
        stats.trials += 1;
    }
    Ok(finish(m, table, converged, stats, started))
}

pub(crate) fn run_trial<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    cfg: &SolverConfig,
    s0: &State,
    stats: &mut SolveStats,
) {
    let cap = depth_cap(table);
    let mut visited = Vec::new();
    let mut s = s0.clone();
    let mut depth = 0u64;
    loop {
        if exp.is_goal(&s) || table.is_solved(&s) || depth as usize >= cap {
            break;
        }
        visited.push(s.clone());
        let b = backup_cached(exp, table, &s, cfg, stats);
        let Some(a) = b.action else {
            break; // dead end
        };
        s = sample_next(exp, &s, a, rng_for(cfg.seed, stats.trials, depth).gen::<f64>());
        depth += 1;
    }
    while let Some(s) = visited.pop() {
        if !check_solved(exp, table, cfg, &s, stats) {
            break;
        }
    }
}

pub(crate) fn sample_next<M: Ssp>(
    exp: &mut Expander<'_, M>,
    s: &State,
    a: crate::ssp::ActionId,
    draw: f64,
) -> State {
    let entry = exp.entry(s);
    let succ = &entry.acts.iter().find(|(x, _)| *x == a).expect("greedy action is applicable").1;
    let mut acc = 0.0;
    for sc in succ {
        acc += sc.prob;
        if draw < acc {
            return sc.state.clone();
        }
    }
    succ.last().expect("actions have at least one outcome").state.clone()
}

/// Bonet-Geffner CheckSolved: expand the greedy envelope below `s`; if every
/// state in it has residual below epsilon, label the whole envelope solved,
/// otherwise re-back up the visited states deepest-first.
pub(crate) fn check_solved<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    cfg: &SolverConfig,
    s: &State,
    stats: &mut SolveStats,
) -> bool {
    let mut consistent = true;
    let mut open = Vec::new();
    let mut closed = Vec::new();
    let mut seen = HashSet::new();
    if !table.is_solved(s) {
        open.push(s.clone());
        seen.insert(s.clone());
    }
    while let Some(x) = open.pop() {
        closed.push(x.clone());
        let (value, action) = greedy_cached(exp, table, &x, cfg);
        if crate::ssp::residual(table.value(&x), value) > cfg.epsilon {
            consistent = false;
            continue; // inconsistent: don't expand below
        }
        let Some(a) = action else {
            continue; // goal or dead end, nothing below
        };
        let entry = exp.entry(&x);
        let succ = &entry.acts.iter().find(|(y, _)| *y == a).expect("greedy is applicable").1;
        let next: Vec<State> = succ
            .iter()
            .filter(|sc| !sc.goal)
            .map(|sc| sc.state.clone())
            .collect();
        for t in next {
            if !table.is_solved(&t) && seen.insert(t.clone()) {
                open.push(t);
            }
        }
    }
    if consistent {
        for x in &closed {
            table.mark_solved(x);
        }
    } else {
        while let Some(x) = closed.pop() {
            backup_cached(exp, table, &x, cfg, stats);
        }
    }
    consistent
}
