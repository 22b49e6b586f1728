//! Delete-relaxation heuristics over the all-outcomes determinization.
//!
//! Each probabilistic outcome with a nonempty add set becomes one
//! deterministic action at its parent's cost; delete lists and negative
//! preconditions are ignored. Evaluators copy what they need from the
//! ground problem at construction and hold their own scratch buffers, so
//! one evaluator per solver is cheap and self-contained.

use crate::ppddl::ground::GroundSsp;
use crate::ssp::{Evaluate, FactId, State};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    Ff,
    HAdd,
    Zero,
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ff" => Ok(HeuristicKind::Ff),
            "hadd" => Ok(HeuristicKind::HAdd),
            "zero" => Ok(HeuristicKind::Zero),
            other => Err(format!("unknown heuristic `{other}` (expected ff, hadd, or zero)")),
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::Ff => "ff",
            HeuristicKind::HAdd => "hadd",
            HeuristicKind::Zero => "zero",
        })
    }
}

/// Builds a fresh evaluator of the requested kind.
pub fn evaluator(kind: HeuristicKind, ssp: &GroundSsp) -> Box<dyn Evaluate> {
    match kind {
        HeuristicKind::Ff => Box::new(FfEvaluator::new(ssp)),
        HeuristicKind::HAdd => Box::new(AddEvaluator::new(ssp)),
        HeuristicKind::Zero => Box::new(ZeroEvaluator),
    }
}

pub struct ZeroEvaluator;

impl Evaluate for ZeroEvaluator {
    fn evaluate(&mut self, _s: &State) -> f64 {
        0.0
    }
}

pub fn h_zero(_ssp: &GroundSsp, _s: &State) -> f64 {
    0.0
}

/// One deterministic action per probabilistic outcome, delete-free.
struct Determinization {
    pre: Vec<Vec<FactId>>,
    add: Vec<Vec<FactId>>,
    cost: Vec<f64>,
    /// det-actions having a fact as precondition
    consumers: Vec<Vec<u32>>,
    /// det-actions adding a fact
    achievers: Vec<Vec<u32>>,
    goal: Vec<FactId>,
    num_facts: usize,
}

impl Determinization {
    fn new(ssp: &GroundSsp) -> Self {
        let num_facts = ssp.num_facts();
        let mut det = Determinization {
            pre: Vec::new(),
            add: Vec::new(),
            cost: Vec::new(),
            consumers: vec![Vec::new(); num_facts],
            achievers: vec![Vec::new(); num_facts],
            goal: ssp.goal().iter().collect(),
            num_facts,
        };
        for action in ssp.actions() {
            let pre: Vec<FactId> = action.pre_pos.iter().collect();
            for outcome in &action.outcomes {
                if outcome.add.is_empty() {
                    continue;
                }
                let id = det.pre.len() as u32;
                for &f in &pre {
                    det.consumers[f as usize].push(id);
                }
                let add: Vec<FactId> = outcome.add.iter().collect();
                for &f in &add {
                    det.achievers[f as usize].push(id);
                }
                det.pre.push(pre.clone());
                det.add.push(add);
                det.cost.push(action.cost);
            }
        }
        det
    }

    fn num_actions(&self) -> usize {
        self.pre.len()
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    fact: FactId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then fact id for determinism
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.fact.cmp(&self.fact))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shared fixpoint machinery for the additive heuristic and the relaxed
/// planning graph used by plan extraction.
struct Relaxation {
    det: Determinization,
    fact_cost: Vec<f64>,
    act_slack: Vec<u32>,
    act_acc: Vec<f64>,
    act_cost: Vec<f64>,
    fact_layer: Vec<i32>,
    act_layer: Vec<i32>,
}

impl Relaxation {
    fn new(ssp: &GroundSsp) -> Self {
        let det = Determinization::new(ssp);
        let (nf, na) = (det.num_facts, det.num_actions());
        Relaxation {
            det,
            fact_cost: vec![0.0; nf],
            act_slack: vec![0; na],
            act_acc: vec![0.0; na],
            act_cost: vec![0.0; na],
            fact_layer: vec![-1; nf],
            act_layer: vec![-1; na],
        }
    }

    /// Dijkstra-style additive costs from `s`; fills `fact_cost` and
    /// `act_cost` (action cost plus the sum of its preconditions').
    fn hadd_fixpoint(&mut self, s: &State) {
        let det = &self.det;
        self.fact_cost.fill(f64::INFINITY);
        self.act_acc.fill(0.0);
        self.act_cost.fill(f64::INFINITY);
        for (a, pre) in det.pre.iter().enumerate() {
            self.act_slack[a] = pre.len() as u32;
        }
        let mut heap = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<HeapEntry>, fact_cost: &mut Vec<f64>, f: FactId, c: f64| {
            if c < fact_cost[f as usize] {
                fact_cost[f as usize] = c;
                heap.push(HeapEntry { cost: c, fact: f });
            }
        };
        for f in s.iter() {
            push(&mut heap, &mut self.fact_cost, f, 0.0);
        }
        let mut triggered: Vec<u32> = (0..det.num_actions() as u32)
            .filter(|&a| self.act_slack[a as usize] == 0)
            .collect();
        loop {
            for a in triggered.drain(..) {
                let total = det.cost[a as usize] + self.act_acc[a as usize];
                self.act_cost[a as usize] = total;
                for &f in &det.add[a as usize] {
                    push(&mut heap, &mut self.fact_cost, f, total);
                }
            }
            let Some(HeapEntry { cost, fact }) = heap.pop() else {
                break;
            };
            if cost > self.fact_cost[fact as usize] {
                continue; // stale entry
            }
            for &a in &det.consumers[fact as usize] {
                let slack = &mut self.act_slack[a as usize];
                if *slack == 0 {
                    continue; // fact reachable twice, already counted
                }
                *slack -= 1;
                self.act_acc[a as usize] += cost;
                if *slack == 0 {
                    triggered.push(a);
                }
            }
        }
    }

    /// Unit-depth reachability layers from `s`.
    fn build_layers(&mut self, s: &State) {
        let det = &self.det;
        self.fact_layer.fill(-1);
        self.act_layer.fill(-1);
        for (a, pre) in det.pre.iter().enumerate() {
            self.act_slack[a] = pre.len() as u32;
        }
        let mut frontier: Vec<FactId> = s.iter().collect();
        for &f in &frontier {
            self.fact_layer[f as usize] = 0;
        }
        let mut ready: Vec<u32> = (0..det.num_actions() as u32)
            .filter(|&a| self.act_slack[a as usize] == 0)
            .collect();
        let mut layer = 0;
        while !frontier.is_empty() || !ready.is_empty() {
            for f in frontier.drain(..) {
                for &a in &det.consumers[f as usize] {
                    let slack = &mut self.act_slack[a as usize];
                    if *slack > 0 {
                        *slack -= 1;
                        if *slack == 0 {
                            ready.push(a);
                        }
                    }
                }
            }
            let mut next = Vec::new();
            for a in ready.drain(..) {
                self.act_layer[a as usize] = layer;
                for &f in &self.det.add[a as usize] {
                    if self.fact_layer[f as usize] < 0 {
                        self.fact_layer[f as usize] = layer + 1;
                        next.push(f);
                    }
                }
            }
            frontier = next;
            layer += 1;
        }
    }

    fn hadd(&mut self, s: &State) -> f64 {
        self.hadd_fixpoint(s);
        let mut total = 0.0;
        for &g in &self.det.goal {
            total += self.fact_cost[g as usize];
            if total.is_infinite() {
                return f64::INFINITY;
            }
        }
        total
    }

    /// Relaxed-plan cost: backward support chaining from the goal layer.
    /// Supporters must lie one layer below the subgoal and are chosen by
    /// minimal additive cost, ties toward the lowest action id.
    fn ff(&mut self, s: &State) -> f64 {
        self.hadd_fixpoint(s);
        if self.det.goal.iter().any(|&g| self.fact_cost[g as usize].is_infinite()) {
            return f64::INFINITY;
        }
        self.build_layers(s);
        let max_layer = self
            .det
            .goal
            .iter()
            .map(|&g| self.fact_layer[g as usize])
            .max()
            .unwrap_or(0)
            .max(0) as usize;
        let mut subgoals: Vec<Vec<FactId>> = vec![Vec::new(); max_layer + 1];
        let mut marked = vec![false; self.det.num_facts];
        for &g in &self.det.goal {
            let layer = self.fact_layer[g as usize] as usize;
            if layer > 0 && !marked[g as usize] {
                marked[g as usize] = true;
                subgoals[layer].push(g);
            }
        }
        let mut chosen = vec![false; self.det.num_actions()];
        let mut total = 0.0;
        for layer in (1..=max_layer).rev() {
            let goals_here = std::mem::take(&mut subgoals[layer]);
            for g in goals_here {
                let mut best: Option<u32> = None;
                for &a in &self.det.achievers[g as usize] {
                    if self.act_layer[a as usize] != layer as i32 - 1 {
                        continue;
                    }
                    best = match best {
                        None => Some(a),
                        Some(b) => {
                            let (ca, cb) = (self.act_cost[a as usize], self.act_cost[b as usize]);
                            if ca < cb || (ca == cb && a < b) {
                                Some(a)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
                let a = best.expect("layered fact has a supporter in the previous layer");
                if !chosen[a as usize] {
                    chosen[a as usize] = true;
                    total += self.det.cost[a as usize];
                }
                for &p in &self.det.pre[a as usize] {
                    let pl = self.fact_layer[p as usize] as usize;
                    if pl > 0 && !marked[p as usize] {
                        marked[p as usize] = true;
                        subgoals[pl.min(layer - 1)].push(p);
                    }
                }
            }
        }
        total
    }
}

pub struct FfEvaluator {
    relax: Relaxation,
}

impl FfEvaluator {
    pub fn new(ssp: &GroundSsp) -> Self {
        FfEvaluator { relax: Relaxation::new(ssp) }
    }
}

impl Evaluate for FfEvaluator {
    fn evaluate(&mut self, s: &State) -> f64 {
        self.relax.ff(s)
    }
}

pub struct AddEvaluator {
    relax: Relaxation,
}

impl AddEvaluator {
    pub fn new(ssp: &GroundSsp) -> Self {
        AddEvaluator { relax: Relaxation::new(ssp) }
    }
}

impl Evaluate for AddEvaluator {
    fn evaluate(&mut self, s: &State) -> f64 {
        self.relax.hadd(s)
    }
}

/// One-shot relaxed-plan heuristic; solvers should hold an evaluator.
pub fn h_ff(ssp: &GroundSsp, s: &State) -> f64 {
    Relaxation::new(ssp).ff(s)
}

/// One-shot additive heuristic.
pub fn h_add(ssp: &GroundSsp, s: &State) -> f64 {
    Relaxation::new(ssp).hadd(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppddl::ground::ground;
    use crate::ppddl::{parse_domain, parse_problem};
    use crate::ssp::Ssp;

    const GRIPPER: &str = r#"
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

    fn gripper1() -> GroundSsp {
        let dom = parse_domain(GRIPPER).unwrap();
        let prob = parse_problem(
            r#"(define (problem gripper-1)
                 (:domain gripper)
                 (:objects rooma roomb ball1 left right)
                 (:init (room rooma) (room roomb) (ball ball1) (gripper left) (gripper right)
                        (at-robby rooma) (at ball1 rooma) (free left) (free right))
                 (:goal (at ball1 roomb)))"#,
            &dom,
        )
        .unwrap();
        ground(&dom, &prob).unwrap()
    }

    #[test]
    fn ff_counts_pick_move_drop() {
        let ssp = gripper1();
        assert_eq!(h_ff(&ssp, ssp.init()), 3.0);
    }

    #[test]
    fn hadd_sums_subgoal_costs() {
        let ssp = gripper1();
        // at(ball1,roomb) <- drop: 1 + carry (1) + at-robby(roomb) (1)
        assert_eq!(h_add(&ssp, ssp.init()), 3.0);
    }

    #[test]
    fn heuristics_are_zero_exactly_at_goal_states() {
        let ssp = gripper1();
        let mut ff = FfEvaluator::new(&ssp);
        let s0 = ssp.initial_state();
        assert!(ff.evaluate(&s0) > 0.0);
        // walk a plan: pick(ball1, rooma, left), move, drop
        let find = |name: &str| {
            (0..ssp.actions().len() as u32).find(|&a| ssp.action_display(a) == name).unwrap()
        };
        let s1 = ssp.successors(&s0, find("pick(ball1,rooma,left)"))[0].state.clone();
        let s2 = ssp.successors(&s1, find("move(rooma,roomb)"))[0].state.clone();
        let s3 = ssp.successors(&s2, find("drop(ball1,roomb,left)"))[0].state.clone();
        assert!(ssp.is_goal(&s3));
        assert!(ff.evaluate(&s1) > 0.0);
        assert!(ff.evaluate(&s2) > 0.0);
        assert_eq!(ff.evaluate(&s3), 0.0);
    }

    #[test]
    fn unreachable_goals_get_infinite_estimates() {
        let dom = parse_domain(
            r#"(define (domain d) (:predicates (a) (b))
                 (:action go :parameters () :precondition (and (a)) :effect (a)))"#,
        )
        .unwrap();
        let prob = parse_problem(
            "(define (problem p) (:domain d) (:init (a)) (:goal (b)))",
            &dom,
        )
        .unwrap();
        let ssp = ground(&dom, &prob).unwrap();
        assert!(h_ff(&ssp, ssp.init()).is_infinite());
        assert!(h_add(&ssp, ssp.init()).is_infinite());
        assert_eq!(h_zero(&ssp, ssp.init()), 0.0);
    }

    #[test]
    fn evaluator_reuse_matches_one_shot() {
        let ssp = gripper1();
        let mut ff = FfEvaluator::new(&ssp);
        let mut hadd = AddEvaluator::new(&ssp);
        let s0 = ssp.initial_state();
        for _ in 0..3 {
            assert_eq!(ff.evaluate(&s0), h_ff(&ssp, &s0));
            assert_eq!(hadd.evaluate(&s0), h_add(&ssp, &s0));
        }
    }
}
