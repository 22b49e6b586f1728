//! Helpers shared by the integration suites.
//!
//! The value-iteration oracle here is deliberately written from scratch on
//! top of the public `Ssp` trait: no `ValueTable`, no `Expander`, no solver
//! reuse. If the library's solvers and this oracle agree on a problem, the
//! agreement means something.

#![allow(dead_code)] // not every suite uses every helper

use std::collections::HashMap;
use std::path::PathBuf;

use gpa_plan::bench::gen::{gen_gripper, gen_rover};
use gpa_plan::gpa::Gpa;
use gpa_plan::ppddl::ground::{ground, GroundSsp};
use gpa_plan::ppddl::{parse_domain, parse_problem};
use gpa_plan::ssp::{Ssp, State};
use gpa_plan::util::rng_for;
use rand::Rng;

pub fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Parse and ground `fixtures/<dir>/domain.ppddl` + `fixtures/<dir>/<problem>`.
pub fn load_fixture(dir: &str, problem: &str) -> GroundSsp {
    let root = fixture_root().join(dir);
    let dom_text = std::fs::read_to_string(root.join("domain.ppddl"))
        .unwrap_or_else(|e| panic!("read {dir}/domain.ppddl: {e}"));
    let prob_text = std::fs::read_to_string(root.join(problem))
        .unwrap_or_else(|e| panic!("read {dir}/{problem}: {e}"));
    let dom = parse_domain(&dom_text).unwrap_or_else(|e| panic!("parse {dir}/domain.ppddl: {e}"));
    let prob = parse_problem(&prob_text, &dom).unwrap_or_else(|e| panic!("parse {dir}/{problem}: {e}"));
    ground(&dom, &prob).unwrap_or_else(|e| panic!("ground {dir}/{problem}: {e}"))
}

pub fn gripper(balls: u32) -> GroundSsp {
    let (dom, prob) = gen_gripper(balls).expect("gripper generator");
    ground(&dom, &prob).expect("ground gripper")
}

/// Rover instance with the generator's default placement seed.
pub fn rover(rovers: u32, waypoints: u32, samples: u32, objectives: u32) -> GroundSsp {
    let (dom, prob) = gen_rover(rovers, waypoints, samples, objectives, 8).expect("rover generator");
    ground(&dom, &prob).expect("ground rover")
}

pub struct Oracle {
    pub v0: f64,
    pub values: HashMap<State, f64>,
}

impl Oracle {
    pub fn value(&self, s: &State) -> f64 {
        self.values.get(s).copied().unwrap_or(f64::INFINITY)
    }
}

/// Exhaustive optimal values for every state reachable from the initial
/// state, or `None` if more than `cap` states are reachable.
///
/// A state's value is finite only if the goal is reachable with probability
/// one from it. That set is the greatest fixpoint of "keep the states that
/// can reach the goal without ever being forced outside the kept set":
/// starting from all reachable states, repeatedly recompute which states
/// have a path to the goal through actions whose entire outcome
/// distribution stays inside the current set, and shrink to those. Values
/// on the surviving set come from Gauss-Seidel sweeps run to `tol`;
/// everything else is infinite.
pub fn oracle_vi<M: Ssp>(m: &M, tol: f64, cap: usize) -> Option<Oracle> {
    // Enumerate the reachable fragment, indexing states densely.
    let s0 = m.initial_state();
    let mut states = vec![s0.clone()];
    let mut index: HashMap<State, usize> = HashMap::from([(s0, 0)]);
    let mut goal: Vec<bool> = Vec::new();
    // acts[i][k] lists outcome (state index, probability, cost) triples.
    let mut acts: Vec<Vec<Vec<(usize, f64, f64)>>> = Vec::new();
    let mut at = 0;
    while at < states.len() {
        let s = states[at].clone();
        let g = m.is_goal(&s);
        goal.push(g);
        let mut rows = Vec::new();
        if !g {
            for a in m.applicable_actions(&s) {
                let mut row = Vec::new();
                for sc in m.successors(&s, a) {
                    if sc.prob <= 0.0 {
                        continue;
                    }
                    let j = match index.get(&sc.state) {
                        Some(&j) => j,
                        None => {
                            let j = states.len();
                            if j >= cap {
                                return None;
                            }
                            states.push(sc.state.clone());
                            index.insert(sc.state.clone(), j);
                            j
                        }
                    };
                    row.push((j, sc.prob, sc.cost));
                }
                rows.push(row);
            }
        }
        acts.push(rows);
        at += 1;
    }
    let n = states.len();

    // Greatest fixpoint: w = states from which the goal is reached with
    // probability one. Inner pass is a least fixpoint (reach-within-w).
    let mut w = vec![true; n];
    loop {
        let mut r = goal.clone();
        loop {
            let mut grew = false;
            for i in 0..n {
                if r[i] {
                    continue;
                }
                for row in &acts[i] {
                    let closed = row.iter().all(|&(j, _, c)| c.is_finite() && w[j]);
                    if closed && row.iter().any(|&(j, _, _)| r[j]) {
                        r[i] = true;
                        grew = true;
                        break;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        if r == w {
            break;
        }
        w = r;
    }

    let mut v: Vec<f64> = (0..n).map(|i| if w[i] { 0.0 } else { f64::INFINITY }).collect();
    loop {
        let mut worst = 0.0f64;
        for i in 0..n {
            if goal[i] || !w[i] {
                continue;
            }
            let mut best = f64::INFINITY;
            for row in &acts[i] {
                let mut q = 0.0;
                for &(j, p, c) in row {
                    q += p * (c + v[j]);
                    if !q.is_finite() {
                        break;
                    }
                }
                if q < best {
                    best = q;
                }
            }
            let delta = (best - v[i]).abs();
            if delta > worst {
                worst = delta;
            }
            v[i] = best;
        }
        if worst < tol {
            break;
        }
    }
    Some(Oracle { v0: v[0], values: states.into_iter().zip(v).collect() })
}

/// Damage an automaton deterministically: drop roughly a quarter of its
/// transitions and rewire some of the rest to destinations stolen from
/// other edges. The result is usually inconsistent with any real policy,
/// which is exactly what the robustness tests want.
pub fn corrupt_gpa(gpa: &Gpa, seed: u64) -> Gpa {
    let entries: Vec<_> = gpa.canonical_form().into_iter().collect();
    let mut rng = rng_for(seed, 0xC088, 0);
    let mut out = Gpa::new(gpa.vocab_hash());
    let n = entries.len();
    for ((src, act), dests) in &entries {
        for dst in dests {
            let roll: f64 = rng.gen();
            if roll < 0.25 {
                continue;
            }
            if roll < 0.40 && n > 1 {
                let k = rng.gen_range(0..n);
                if let Some(alt) = entries[k].1.iter().next() {
                    out.insert_transition(src.clone(), act.clone(), alt.clone());
                    continue;
                }
            }
            out.insert_transition(src.clone(), act.clone(), dst.clone());
        }
    }
    out
}
