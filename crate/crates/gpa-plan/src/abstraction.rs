//! Canonical abstraction of ground states. Objects collapse into roles (the
//! set of unary predicates they satisfy), role populations are counted up to
//! 2, and facts of arity two or more become three-valued relations between
//! roles: absent, definite (the relation holds between every pair drawn from
//! the roles' extents), or indefinite. Zero-ary predicates ride on a phantom
//! object so they participate in roles like everything else.
//!
//! Two ground states with the same abstraction are indistinguishable to the
//! generalized policies built on top of this module, which is what lets a
//! policy learned on two balls speak about twenty.

use crate::ppddl::ground::{GroundSsp, ObjIdx};
use crate::ppddl::{DomainDef, OBJECT_TYPE};
use crate::ssp::{ActionId, State};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Ascending set of role member ids. Members below `predicates.len()` are
/// unary predicate ids; the rest encode object types shifted past the
/// predicate range, since a type is just a static unary predicate. The root
/// type is never a member (every object has it).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Role(pub Box<[usize]>);

/// Encode type `t` as a role member of `dom`.
pub fn type_member(dom: &DomainDef, t: usize) -> usize {
    dom.predicates.len() + t
}

/// Resolve a role member name; predicates shadow types on a name clash.
pub fn member_index(dom: &DomainDef, name: &str) -> Option<usize> {
    if let Some(p) = dom.predicates.iter().position(|p| p.name == name) {
        return (dom.predicates[p].arity() <= 1).then_some(p);
    }
    dom.type_index(name).map(|t| type_member(dom, t))
}

/// Display name of a role member.
pub fn member_name(dom: &DomainDef, id: usize) -> &str {
    match dom.predicates.get(id) {
        Some(p) => &p.name,
        None => &dom.types[id - dom.predicates.len()].name,
    }
}

impl Role {
    pub fn dump(&self, dom: &DomainDef) -> String {
        let names: Vec<&str> = self.0.iter().map(|&p| member_name(dom, p)).collect();
        format!("{{{}}}", names.join(","))
    }
}

/// Three-valued truth of a relation between roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tv {
    Zero,
    Half,
    One,
}

impl Tv {
    fn dump(self) -> &'static str {
        match self {
            Tv::Zero => "0",
            Tv::Half => "0.5",
            Tv::One => "1",
        }
    }
}

/// Role assignment of every object in a state, plus the phantom object that
/// carries the zero-ary predicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleMap {
    pub per_object: Vec<Role>,
    pub phantom: Role,
}

impl RoleMap {
    /// Extent size of `role` counting real objects only.
    fn extent(&self, role: &Role) -> u64 {
        self.per_object.iter().filter(|r| *r == role).count() as u64
    }
}

/// Canonical abstract state: capped role counts plus three-valued relations.
/// Relations that are absent are not stored, so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractState {
    /// realized roles with populations capped at 2, ascending
    pub roles: Box<[(Role, u8)]>,
    /// (predicate, argument roles) -> Half | One, ascending
    pub relations: Box<[((usize, Box<[Role]>), Tv)]>,
}

/// Action schema applied to the roles its arguments had in the source state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractAction {
    pub schema: usize,
    pub roles: Box<[Role]>,
}

/// Role of every object under `s`, in one pass over the state's facts.
/// Facts iterate in predicate-major order, so each accumulated set is
/// already ascending; declared types join at the end of each set as encoded
/// members (root type excluded), keeping the order.
pub fn role_map(ssp: &GroundSsp, s: &State) -> RoleMap {
    let dom = ssp.domain();
    let mut per_object: Vec<Vec<usize>> = vec![Vec::new(); ssp.objects().len()];
    let mut phantom = Vec::new();
    for f in s.iter() {
        let fact = ssp.fact(f);
        match fact.args.len() {
            0 => phantom.push(fact.pred),
            1 => per_object[fact.args[0] as usize].push(fact.pred),
            _ => {}
        }
    }
    for (o, role) in per_object.iter_mut().enumerate() {
        let mut chain = Vec::new();
        let mut t = ssp.objects()[o].ty;
        while t != OBJECT_TYPE {
            chain.push(type_member(dom, t));
            t = dom.types[t].parent;
        }
        chain.sort_unstable();
        role.extend(chain);
    }
    RoleMap {
        per_object: per_object.into_iter().map(|v| Role(v.into_boxed_slice())).collect(),
        phantom: Role(phantom.into_boxed_slice()),
    }
}

/// Role of a single object in `s`.
pub fn role_of(ssp: &GroundSsp, s: &State, obj: ObjIdx) -> Role {
    role_map(ssp, s).per_object[obj as usize].clone()
}

/// Extent of a role: the objects inhabiting it, with `objects().len()`
/// standing in for the phantom object when it matches.
pub fn phi_role(ssp: &GroundSsp, s: &State, role: &Role) -> Vec<usize> {
    let rm = role_map(ssp, s);
    let mut out: Vec<usize> =
        (0..rm.per_object.len()).filter(|&o| rm.per_object[o] == *role).collect();
    if rm.phantom == *role {
        out.push(rm.per_object.len());
    }
    out
}

/// Three-valued truth of `pred` between the given roles in `s`.
pub fn phi_relation(ssp: &GroundSsp, s: &State, pred: usize, roles: &[Role]) -> Tv {
    let a = alpha(ssp, s);
    let key = (pred, roles.to_vec().into_boxed_slice());
    a.relations
        .iter()
        .find(|(k, _)| *k == key)
        .map(|&(_, tv)| tv)
        .unwrap_or(Tv::Zero)
}

pub fn alpha(ssp: &GroundSsp, s: &State) -> AbstractState {
    alpha_with(&role_map(ssp, s), ssp, s)
}

/// `alpha` with a precomputed role map, for callers abstracting one state
/// many times.
pub fn alpha_with(rm: &RoleMap, ssp: &GroundSsp, s: &State) -> AbstractState {
    let mut counts: BTreeMap<&Role, u64> = BTreeMap::new();
    for role in &rm.per_object {
        *counts.entry(role).or_insert(0) += 1;
    }
    *counts.entry(&rm.phantom).or_insert(0) += 1;
    let roles: Box<[(Role, u8)]> =
        counts.iter().map(|(role, &n)| ((*role).clone(), n.min(2) as u8)).collect();

    // group facts of arity >= 2 by (predicate, argument roles)
    let mut groups: BTreeMap<(usize, Box<[Role]>), u64> = BTreeMap::new();
    for f in s.iter() {
        let fact = ssp.fact(f);
        if fact.args.len() < 2 {
            continue;
        }
        let arg_roles: Box<[Role]> =
            fact.args.iter().map(|&o| rm.per_object[o as usize].clone()).collect();
        *groups.entry((fact.pred, arg_roles)).or_insert(0) += 1;
    }
    let relations: Box<[((usize, Box<[Role]>), Tv)]> = groups
        .into_iter()
        .map(|(key, n)| {
            // phantom never appears in a relation's arguments, so extents
            // here count real objects only
            let full: u64 = key.1.iter().map(|r| rm.extent(r)).product();
            let tv = if n == full { Tv::One } else { Tv::Half };
            (key, tv)
        })
        .collect();
    AbstractState { roles, relations }
}

/// Abstract image of applying `a` in `s`: the schema plus the roles its
/// arguments currently hold.
pub fn beta(ssp: &GroundSsp, s: &State, a: ActionId) -> AbstractAction {
    beta_with(&role_map(ssp, s), ssp, a)
}

pub fn beta_with(rm: &RoleMap, ssp: &GroundSsp, a: ActionId) -> AbstractAction {
    let action = &ssp.actions()[a as usize];
    AbstractAction {
        schema: action.schema,
        roles: action.args.iter().map(|&o| rm.per_object[o as usize].clone()).collect(),
    }
}

impl AbstractState {
    /// Stable text form, e.g. `{ball}=2;{free,gripper}=2;at({ball},{room})=0.5`.
    pub fn dump(&self, dom: &DomainDef) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (role, n) in self.roles.iter() {
            parts.push(format!("{}={}", role.dump(dom), n));
        }
        for ((pred, roles), tv) in self.relations.iter() {
            let mut s = String::new();
            let args: Vec<String> = roles.iter().map(|r| r.dump(dom)).collect();
            let _ = write!(s, "{}({})={}", dom.predicates[*pred].name, args.join(","), tv.dump());
            parts.push(s);
        }
        parts.join(";")
    }
}

impl AbstractAction {
    pub fn dump(&self, dom: &DomainDef) -> String {
        let args: Vec<String> = self.roles.iter().map(|r| r.dump(dom)).collect();
        format!("{}({})", dom.actions[self.schema].name, args.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppddl::ground::ground;
    use crate::ppddl::{parse_domain, parse_problem};
    use crate::ssp::Ssp;

    const ROVER: &str = r#"
        (define (domain rover-simple)
          (:requirements :strips :equality :probabilistic-effects)
          (:predicates (rock ?x) (location ?l) (base ?l) (rover-free)
                       (rock-at ?x ?l) (in-rover ?x) (rover-at ?l))
          (:action move
            :parameters (?from ?to)
            :precondition (and (location ?from) (location ?to) (rover-at ?from)
                               (not (= ?from ?to)))
            :effect (and (rover-at ?to) (not (rover-at ?from))))
          (:action load
            :parameters (?x ?l)
            :precondition (and (rock ?x) (location ?l) (rock-at ?x ?l)
                               (rover-at ?l) (rover-free))
            :effect (probabilistic 0.8 (and (in-rover ?x) (not (rock-at ?x ?l))
                                            (not (rover-free)))))
          (:action unload
            :parameters (?x ?l)
            :precondition (and (rock ?x) (location ?l) (in-rover ?x) (rover-at ?l))
            :effect (and (rock-at ?x ?l) (rover-free) (not (in-rover ?x)))))
    "#;

    fn rover(init: &str, objects: &str) -> GroundSsp {
        let dom = parse_domain(ROVER).unwrap();
        let prob = parse_problem(
            &format!(
                r#"(define (problem rs) (:domain rover-simple)
                     (:objects {objects})
                     (:init {init})
                     (:goal (forall (?x) (imply (rock ?x) (rock-at ?x base)))))"#
            ),
            &dom,
        )
        .unwrap();
        ground(&dom, &prob).unwrap()
    }

    const SPLIT: &str = "(rock r1) (rock r2) (location l1) (location l2) (location base) \
                         (base base) (rover-at base) (rover-free) \
                         (rock-at r1 l1) (rock-at r2 l2)";

    #[test]
    fn roles_partition_objects_plus_phantom() {
        let ssp = rover(SPLIT, "r1 r2 l1 l2 base");
        let s = ssp.init();
        let rm = role_map(&ssp, s);
        let a = alpha(&ssp, s);
        let total: u64 = a.roles.iter().map(|(r, _)| rm.extent(r)).sum::<u64>()
            + u64::from(a.roles.iter().any(|(r, _)| *r == rm.phantom));
        assert_eq!(total, ssp.objects().len() as u64 + 1);
        // two rocks share a role and cap at 2; the base is its own role;
        // within a role predicate names print in declaration order
        let dom = ssp.domain();
        assert_eq!(
            a.dump(dom),
            "{rock}=2;{location}=2;{location,base,rover-at}=1;{rover-free}=1;\
             rock-at({rock},{location})=0.5"
        );
    }

    #[test]
    fn relation_is_definite_when_it_covers_the_extents() {
        let both_at_base = "(rock r1) (rock r2) (location l1) (location l2) (location base) \
                            (base base) (rover-at l1) (rover-free) \
                            (rock-at r1 base) (rock-at r2 base)";
        let ssp = rover(both_at_base, "r1 r2 l1 l2 base");
        let s = ssp.init();
        let dom = ssp.domain();
        let rock = dom.predicate_index("rock").unwrap();
        let location = dom.predicate_index("location").unwrap();
        let base = dom.predicate_index("base").unwrap();
        let rock_at = dom.predicate_index("rock-at").unwrap();
        let rock_role = Role(Box::new([rock]));
        let base_role = Role(Box::new([location, base]));
        assert_eq!(phi_relation(&ssp, s, rock_at, &[rock_role.clone(), base_role.clone()]), Tv::One);
        // an unrelated pair of roles stays absent
        let loc_role = Role(Box::new([location]));
        assert_eq!(phi_relation(&ssp, s, rock_at, &[rock_role, loc_role]), Tv::Zero);
    }

    #[test]
    fn population_beyond_two_is_invisible() {
        let two = rover(SPLIT, "r1 r2 l1 l2 base");
        let three = rover(
            "(rock r1) (rock r2) (rock r3) (location l1) (location l2) (location base) \
             (base base) (rover-at base) (rover-free) \
             (rock-at r1 l1) (rock-at r2 l2) (rock-at r3 l1)",
            "r1 r2 r3 l1 l2 base",
        );
        assert_eq!(alpha(&two, two.init()), alpha(&three, three.init()));
    }

    #[test]
    fn object_names_and_declaration_order_do_not_matter() {
        let a = rover(SPLIT, "r1 r2 l1 l2 base");
        let b = rover(
            "(rock q9) (rock q8) (location west) (location east) (location base) \
             (base base) (rover-at base) (rover-free) \
             (rock-at q9 west) (rock-at q8 east)",
            "base east west q8 q9",
        );
        assert_eq!(alpha(&a, a.init()), alpha(&b, b.init()));
    }

    #[test]
    fn beta_captures_argument_roles() {
        let ssp = rover(SPLIT, "r1 r2 l1 l2 base");
        let s = ssp.init();
        let dom = ssp.domain();
        let move_to_l1 = (0..ssp.actions().len() as u32)
            .find(|&a| ssp.action_display(a) == "move(base,l1)")
            .unwrap();
        let ab = beta(&ssp, s, move_to_l1);
        assert_eq!(ab.dump(dom), "move({location,base,rover-at},{location})");
        // the same schema aimed at l2 looks identical in the abstraction
        let move_to_l2 = (0..ssp.actions().len() as u32)
            .find(|&a| ssp.action_display(a) == "move(base,l2)")
            .unwrap();
        assert_eq!(ab, beta(&ssp, s, move_to_l2));
    }

    #[test]
    fn phantom_carries_zero_ary_predicates() {
        let ssp = rover(SPLIT, "r1 r2 l1 l2 base");
        let s0 = ssp.init();
        let rm = role_map(&ssp, s0);
        let dom = ssp.domain();
        assert_eq!(rm.phantom.dump(dom), "{rover-free}");
        // load a rock: rover-free disappears, the phantom role goes empty
        let load = (0..ssp.actions().len() as u32)
            .find(|&a| ssp.action_display(a) == "load(r1,l1)")
            .unwrap();
        let moved = (0..ssp.actions().len() as u32)
            .find(|&a| ssp.action_display(a) == "move(base,l1)")
            .unwrap();
        let s1 = ssp.successors(s0, moved)[0].state.clone();
        let s2 = ssp.successors(&s1, load)[0].state.clone();
        let rm2 = role_map(&ssp, &s2);
        assert_eq!(rm2.phantom.dump(dom), "{}");
        let a2 = alpha(&ssp, &s2);
        assert!(a2.roles.iter().any(|(r, n)| r.0.is_empty() && *n == 1));
    }

    #[test]
    fn declared_types_join_roles_as_static_members() {
        let dom = parse_domain(
            r#"(define (domain stacker)
                 (:requirements :strips :typing)
                 (:types plank - object heavy - plank)
                 (:predicates (placed ?p - plank) (table-clear))
                 (:action place
                   :parameters (?p - plank)
                   :precondition (and (table-clear))
                   :effect (and (placed ?p) (not (table-clear)))))"#,
        )
        .unwrap();
        let prob = parse_problem(
            r#"(define (problem st) (:domain stacker)
                 (:objects a - plank b - heavy)
                 (:init (table-clear) (placed b))
                 (:goal (and (placed a) (placed b))))"#,
            &dom,
        )
        .unwrap();
        let ssp = ground(&dom, &prob).unwrap();
        let rm = role_map(&ssp, ssp.init());
        assert_eq!(rm.per_object[0].dump(ssp.domain()), "{plank}");
        assert_eq!(rm.per_object[1].dump(ssp.domain()), "{placed,plank,heavy}");
        // the subtype's role carries the whole ancestor chain, so planks of
        // different concrete types never collapse into one role
        assert_ne!(rm.per_object[0], rm.per_object[1]);
    }

    #[test]
    fn extent_lookup_reports_phantom_slot() {
        let ssp = rover(SPLIT, "r1 r2 l1 l2 base");
        let s = ssp.init();
        let dom = ssp.domain();
        let rover_free = dom.predicate_index("rover-free").unwrap();
        let ext = phi_role(&ssp, s, &Role(Box::new([rover_free])));
        assert_eq!(ext, vec![ssp.objects().len()]);
        let rock = dom.predicate_index("rock").unwrap();
        assert_eq!(phi_role(&ssp, s, &Role(Box::new([rock]))).len(), 2);
    }
}
