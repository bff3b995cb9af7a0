//! Values first produced by the independent oracles in `acceptance.rs`
//! (hand-rolled loads, backtracking SAT) and pinned here so that any change
//! to the constructions shows up as a diff.

use gadget_forge::exact::{rat, Rational};
use gadget_forge::lrs::makespan;
use gadget_forge::pipeline::{self, certify, CertifyOptions, Family};
use gadget_forge::reduce3::schedule_from_assignment;
use gadget_forge::reduce4::{certify_inequalities4, schedule_from_matching};
use gadget_forge::sat::{brute_force_one_in_three, brute_force_sat, Cnf};
use gadget_forge::solver::{decide, SearchMode, SolveBudget, Status};
use gadget_forge::tdm::matching_from_assignment;

fn cnf(vars: usize, clauses: &[&[i64]]) -> Cnf {
    Cnf::from_signed(vars, &clauses.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn rank4_completeness(eps: Rational) -> Rational {
    let seed = cnf(2, &[&[1, 2]]);
    let (g, red, s, rep) = pipeline::build_rank4(&seed, &eps).unwrap();
    let a = brute_force_sat(&seed).unwrap().unwrap();
    let za = pipeline::structured_assignment(&s, &rep.push(&a));
    let m = matching_from_assignment(&red.inst, &za).unwrap();
    makespan(&g.lrs, &schedule_from_matching(&g, &m).unwrap()).unwrap()
}

#[test]
fn rank4_completeness_makespans() {
    assert_eq!(rank4_completeness(rat(1, 8).unwrap()).to_string(), "155155693577/68719476736");
    assert_eq!(
        rank4_completeness(rat(1, 64).unwrap()).to_string(),
        "2342997706139500609/1152921504606846976"
    );
}

#[test]
fn rank4_gadget_sizes_and_blocked_minimum() {
    let eps = rat(1, 8).unwrap();
    let (sat, red, ..) = pipeline::build_rank4(&cnf(2, &[&[1, 2]]), &eps).unwrap();
    assert_eq!((sat.lrs.machines.len(), sat.lrs.jobs.len()), (54, 66));
    let (unsat, ..) = pipeline::build_rank4(&cnf(1, &[&[1], &[-1]]), &eps).unwrap();
    assert_eq!((unsat.lrs.machines.len(), unsat.lrs.jobs.len()), (42, 54));
    let ineq = certify_inequalities4(&sat.params, red.inst.n);
    assert!(ineq.passed());
    assert_eq!(
        ineq.min_blocked.to_string(),
        "77394864287750615407263745/19342813113834066795298816"
    );
}

#[test]
fn rank3_seed_gadget() {
    let seed = cnf(3, &[&[1, 2, 3]]);
    let (g, _) = pipeline::build_rank3(&seed, &rat(1, 64).unwrap()).unwrap();
    assert_eq!((g.lrs.machines.len(), g.lrs.jobs.len()), (24, 84));
    assert_eq!(g.total_third(), Rational::from(196608));
    let a = brute_force_one_in_three(&g.cnf).unwrap().unwrap();
    let s = schedule_from_assignment(&g, &a).unwrap();
    assert_eq!(makespan(&g.lrs, &s).unwrap().to_string(), "524293/64");

    // both modes find a schedule below r+1 and agree
    let t = g.params.threshold();
    for mode in [SearchMode::StructureAware, SearchMode::Generic] {
        let out = decide(&g.lrs, &t, mode, &SolveBudget::default(), 1).unwrap();
        assert_eq!(out.status, Status::Feasible, "{mode:?}");
        assert!(makespan(&g.lrs, out.schedule.as_ref().unwrap()).unwrap() < t);
    }
}

#[test]
fn certificate_fields() {
    let seed = cnf(3, &[&[1, 2, 3]]);
    let text = seed.to_dimacs_string();
    let opts = CertifyOptions {
        family: Family::Rank3,
        epsilon: None,
        budget: SolveBudget::default(),
        workers: 1,
    };
    let rep = certify(text.as_bytes(), &seed, &opts).unwrap();
    assert_eq!(rep.completeness_makespan.unwrap().to_string(), "524293/64");
    assert_eq!(rep.soundness.threshold, Rational::from(8193));
    assert_eq!(rep.witness_round_trip, Some(true));
    assert_eq!(rep.verdict.exit_code(), 0);
}
