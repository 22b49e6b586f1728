//! Soft-FLARES: labeled RTDP with depth-limited residual checks and
//! probabilistic labeling. A state whose greedy envelope is consistent down
//! to depth `t` is labeled solved with a probability that grows with the
//! verified distance; envelopes that close entirely within the horizon are
//! labeled outright, which makes the labeling exact on small problems. With
//! `t = 0` a state is labeled as soon as its own residual clears epsilon.
//!
//! Because labels can be optimistic, a run only reports convergence after
//! the greedy policy at s0 verifies as partial proper; failed verification
//! clears the labels along the policy and sends the solver back to trials.

use super::{
    backup_cached, depth_cap, finish, greedy_cached, out_of_time, Expander, SolveError,
    SolveResult, SolveStats, SolverConfig,
};
use crate::ssp::{extract_policy, is_partial_proper, residual, Ssp, State, ValueTable};
use crate::util::rng_for;
use rand::Rng;
use std::collections::{HashSet, VecDeque};
use std::time::Instant;

const LABEL_SALT: u64 = 0x51ab_e1e5_0f1a_4e55;
const REPAIR_ROUNDS: u32 = 32;

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
    let mut rounds = 0;
    'solve: loop {
        while !table.is_solved(&s0) {
            if out_of_time(started, cfg)
                || cfg.max_trials.is_some_and(|t| stats.trials >= t)
                || exp.expanded() > cfg.state_limit
            {
                converged = false;
                break 'solve;
            }
            run_trial(&mut exp, &mut table, cfg, &s0, &mut stats);
            stats.trials += 1;
        }
        // the labels were sampled; trust them only if the greedy policy
        // actually closes on the goal
        if !table.value(&s0).is_finite() {
            break;
        }
        let proper = extract_policy(m, &mut table, &s0)
            .map(|pi| is_partial_proper(m, &pi, &s0))
            .unwrap_or(false);
        if proper {
            break;
        }
        rounds += 1;
        if rounds > REPAIR_ROUNDS {
            converged = false;
            break;
        }
        unlabel_closure(&mut exp, &mut table, &s0, cfg);
    }
    Ok(finish(m, table, converged, stats, started))
}

fn run_trial<M: Ssp>(
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
            break;
        };
        s = super::lrtdp::sample_next(exp, &s, a, rng_for(cfg.seed, stats.trials, depth).gen());
        depth += 1;
    }
    let mut unwound = 0u64;
    while let Some(s) = visited.pop() {
        let mut label_rng = rng_for(cfg.seed ^ LABEL_SALT, stats.trials, unwound);
        unwound += 1;
        if !check_labeled(exp, table, cfg, &s, stats, &mut |p| label_rng.gen::<f64>() < p) {
            break;
        }
    }
}

/// Depth-limited residual check below `s`. Returns whether `s` itself came
/// out labeled; inconsistent envelopes are repaired with backups instead.
fn check_labeled<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    cfg: &SolverConfig,
    s: &State,
    stats: &mut SolveStats,
    draw: &mut dyn FnMut(f64) -> bool,
) -> bool {
    if table.is_solved(s) {
        return true;
    }
    let t = cfg.soft_flares.t_horizon;
    let mut consistent = true;
    let mut fully_closed = true;
    let mut closed: Vec<(State, u32)> = Vec::new();
    let mut open = VecDeque::from([(s.clone(), 0u32)]);
    let mut seen = HashSet::from([s.clone()]);
    while let Some((x, d)) = open.pop_front() {
        let (value, action) = greedy_cached(exp, table, &x, cfg);
        if residual(table.value(&x), value) > cfg.epsilon {
            consistent = false;
            closed.push((x, d));
            continue;
        }
        closed.push((x.clone(), d));
        let Some(a) = action else {
            continue; // goal below, or a recognized dead end
        };
        let entry = exp.entry(&x);
        let succ = &entry.acts.iter().find(|(y, _)| *y == a).expect("greedy is applicable").1;
        let next: Vec<State> =
            succ.iter().filter(|sc| !sc.goal).map(|sc| sc.state.clone()).collect();
        if d == t {
            if next.iter().any(|n| !table.is_solved(n)) {
                fully_closed = false;
            }
            continue;
        }
        for n in next {
            if !table.is_solved(&n) && seen.insert(n.clone()) {
                open.push_back((n, d + 1));
            }
        }
    }
    if !consistent {
        while let Some((x, _)) = closed.pop() {
            backup_cached(exp, table, &x, cfg, stats);
        }
        return false;
    }
    if fully_closed || t == 0 {
        // the whole greedy envelope verified (or the degenerate horizon,
        // which labels on the state's own residual alone)
        for (x, _) in &closed {
            table.mark_solved(x);
        }
        return true;
    }
    let mut s_labeled = false;
    for (x, d) in &closed {
        let p = label_probability(t - d, t, cfg.soft_flares.alpha, cfg.soft_flares.beta);
        if draw(p) {
            table.mark_solved(x);
            if x == s {
                s_labeled = true;
            }
        }
    }
    s_labeled
}

/// Labeling probability for a state verified consistent to distance `d` out
/// of horizon `t`: a logistic ramp pinned to alpha + 1e-3 at d = 0 and
/// beta - 1e-3 at d = t.
fn label_probability(d: u32, t: u32, alpha: f64, beta: f64) -> f64 {
    debug_assert!(t > 0);
    let band = beta - alpha;
    if band < 2e-3 {
        return (alpha + beta) / 2.0;
    }
    let k = (band / 1e-3 - 1.0).ln();
    let x = k * (2.0 * d as f64 - t as f64) / t as f64;
    alpha + band / (1.0 + (-x).exp())
}

/// Clears solved labels across the greedy closure from s0 so trials revisit
/// and re-verify it.
fn unlabel_closure<M: Ssp>(
    exp: &mut Expander<'_, M>,
    table: &mut ValueTable,
    s0: &State,
    cfg: &SolverConfig,
) {
    let mut queue = VecDeque::from([s0.clone()]);
    let mut seen = HashSet::from([s0.clone()]);
    while let Some(s) = queue.pop_front() {
        table.unmark_solved(&s);
        if exp.is_goal(&s) {
            continue;
        }
        let (value, action) = greedy_cached(exp, table, &s, cfg);
        let Some(a) = action.filter(|_| value.is_finite()) else {
            continue;
        };
        let entry = exp.entry(&s);
        let succ = &entry.acts.iter().find(|(y, _)| *y == a).expect("greedy is applicable").1;
        let next: Vec<State> =
            succ.iter().filter(|sc| !sc.goal).map(|sc| sc.state.clone()).collect();
        for n in next {
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::label_probability;

    #[test]
    fn labeling_ramp_is_pinned_and_increasing() {
        let (a, b) = (0.1, 0.9);
        let t = 4;
        assert!((label_probability(0, t, a, b) - (a + 1e-3)).abs() < 1e-12);
        assert!((label_probability(t, t, a, b) - (b - 1e-3)).abs() < 1e-12);
        let probs: Vec<f64> = (0..=t).map(|d| label_probability(d, t, a, b)).collect();
        assert!(probs.windows(2).all(|w| w[0] < w[1]));
        assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
