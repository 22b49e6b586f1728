mod common;

use common::rover;
use gpa_plan::gpa::{constrain, learn_gpa, solve_with_gpa};
use gpa_plan::ppddl::ground::GroundSsp;
use gpa_plan::solvers::{solve, SolverConfig, SolverId};
use gpa_plan::ssp::{Policy, Ssp};

#[test]
fn probe_rover_accel() {
    let train: Vec<(GroundSsp, Policy)> = [(1, 3, 1, 2), (1, 3, 2, 2), (1, 3, 3, 2)]
        .into_iter()
        .map(|(r, w, s, o)| {
            let m = rover(r, w, s, o);
            let p = solve(&m, SolverId::Lao, &SolverConfig::default()).unwrap().policy;
            (m, p)
        })
        .collect();
    let items: Vec<(&GroundSsp, &Policy)> = train.iter().map(|(s, p)| (s, p)).collect();
    let g = learn_gpa(&items).unwrap();
    eprintln!("gpa: {} vertices, {} edges", g.num_vertices(), g.num_edges());

    for (r, w, s, o) in [(1u32, 3u32, 4u32, 2u32), (1, 4, 4, 2), (1, 3, 5, 2)] {
        let ssp = rover(r, w, s, o);
        let constrained = constrain(&ssp, &g).unwrap();
        let oc = common::oracle_vi(&constrained, 1e-9, 500_000).expect("cap");
        let ob = common::oracle_vi(&ssp, 1e-9, 500_000).expect("cap");
        eprintln!(
            "rover-{r}{w}{s}{o}: base v0 = {:.4} over {} states; constrained v0 = {:.4}, inf {}/{}",
            ob.v0,
            ob.values.len(),
            oc.v0,
            oc.values.values().filter(|v| !v.is_finite()).count(),
            oc.values.len()
        );
        for seed in 0..4u64 {
            let cfg = SolverConfig { seed, ..SolverConfig::default() };
            let plain = solve(&ssp, SolverId::Lrtdp, &cfg).unwrap();
            let acc = solve_with_gpa(&ssp, &g, SolverId::Lrtdp, &cfg).unwrap();
            eprintln!(
                "  seed {seed}: plain = {}, acc = {}, used_constrained = {}, v {:.4} vs {:.4}",
                plain.stats.backups,
                acc.result.stats.backups,
                acc.used_constrained,
                plain.v_s0,
                acc.result.v_s0
            );
        }
    }
}
