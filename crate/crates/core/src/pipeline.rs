//! End-to-end certification: normalise a seed, build the gadget, check its
//! rank and inequalities, build the completeness witness when the seed is
//! satisfiable, and decide soundness at the family threshold otherwise.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::lrs::{makespan, verify_rank, LrsInstance, Schedule};
use crate::reduce3::{self, build_lrs3, Reduce3Params};
use crate::reduce4::{self, build_lrs4, Reduce4Params};
use crate::sat::{
    brute_force_one_in_three, brute_force_sat, check_one_in_three, tovey_exact3, tovey_one_in_three, tovey_structured,
    Assignment, Cnf, StructuredCnf,
};
use crate::solver::{decide, SearchMode, SolveBudget, Status};
use crate::tdm::{assignment_from_matching, matching_from_assignment, reduce_sat_to_3dm, MatchOrigin, TdmReduction};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Family {
    Rank4,
    Rank3,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rank4 => "rank4",
            Family::Rank3 => "rank3",
        }
    }

    pub fn default_epsilon(self) -> Rational {
        match self {
            Family::Rank4 => Rational::new(1, 8).expect("nonzero"),
            Family::Rank3 => Rational::new(1, 64).expect("nonzero"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank4" => Ok(Family::Rank4),
            "rank3" => Ok(Family::Rank3),
            _ => Err(Error::Parse {
                line: 0,
                msg: format!("unknown family `{s}`, expected rank4 or rank3"),
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub family: Family,
    pub epsilon: Option<Rational>,
    pub budget: SolveBudget,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankCheck {
    pub rank: usize,
    pub bound: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Soundness {
    /// `REFUTED`, `FEASIBLE` or `BUDGET_EXCEEDED`.
    pub status: String,
    pub threshold: Rational,
    /// How the status was established.
    pub method: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refuted,
    OperationalFailure,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 1,
            Verdict::OperationalFailure => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub family: String,
    pub seed_sha256: String,
    pub parameters: Value,
    pub seed_satisfiable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness_makespan: Option<Rational>,
    pub soundness: Soundness,
    pub rank_check: RankCheck,
    pub inequality_suite: Vec<CheckLine>,
    pub witness_round_trip: Option<bool>,
    pub verdict: Verdict,
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Each variable's three hatted copies take its value.
pub fn structured_assignment(s: &StructuredCnf, exact3: &Assignment) -> Assignment {
    let mut out = Assignment::all_false(s.base.vars());
    for v in 1..=exact3.len() {
        for k in 0..3 {
            out.set(3 * (v - 1) + k + 1, exact3.value(v));
        }
    }
    out
}

/// Seed → exact-3 occurrences → structured form.
pub fn normalize_sat(seed: &Cnf) -> Result<(crate::sat::Replicated, StructuredCnf)> {
    let rep = tovey_exact3(seed)?;
    let s = tovey_structured(&rep.cnf)?;
    Ok((rep, s))
}

pub fn provenance_json(red: &TdmReduction) -> Value {
    Value::Array(
        red.provenance
            .iter()
            .map(|o| match o {
                MatchOrigin::Literal { clause, lit } => json!({"clause": clause, "literal": lit.to_dimacs()}),
                MatchOrigin::Dummy => json!("dummy"),
            })
            .collect(),
    )
}

pub fn build_rank4(seed: &Cnf, epsilon: &Rational) -> Result<(reduce4::GadgetInstance4, TdmReduction, StructuredCnf, crate::sat::Replicated)> {
    let (rep, s) = normalize_sat(seed)?;
    let red = reduce_sat_to_3dm(&s)?;
    let p = Reduce4Params::for_size(epsilon.clone(), red.inst.n)?;
    let g = build_lrs4(&red.inst, &p)?;
    Ok((g, red, s, rep))
}

pub fn build_rank3(seed: &Cnf, epsilon: &Rational) -> Result<(reduce3::GadgetInstance3, crate::sat::Replicated)> {
    let rep = tovey_one_in_three(seed)?;
    let p = Reduce3Params::for_size(epsilon.clone(), rep.cnf.vars())?;
    Ok((build_lrs3(&rep.cnf, &p)?, rep))
}

struct Stages {
    failures: Vec<String>,
    operational: bool,
}

impl Stages {
    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }
}

fn soundness_from_status(status: Status, threshold: &Rational, method: &str, st: &mut Stages) -> Soundness {
    let s = match status {
        Status::Infeasible => "REFUTED",
        Status::Feasible => {
            st.fail(format!("unsatisfiable seed admits a schedule below {threshold}"));
            "FEASIBLE"
        }
        Status::BudgetExceeded => {
            st.operational = true;
            st.fail("solver budget exceeded before soundness was decided");
            "BUDGET_EXCEEDED"
        }
    };
    Soundness {
        status: s.into(),
        threshold: threshold.clone(),
        method: method.into(),
    }
}

/// Runs every stage and reports each one. Operational errors in the
/// construction itself are returned as `Err`.
pub fn certify(seed_bytes: &[u8], seed: &Cnf, opts: &CertifyOptions) -> Result<CertificateReport> {
    let eps = opts.epsilon.clone().unwrap_or_else(|| opts.family.default_epsilon());
    let mut st = Stages {
        failures: Vec::new(),
        operational: false,
    };
    let report = match opts.family {
        Family::Rank4 => certify4(seed, &eps, opts, &mut st)?,
        Family::Rank3 => certify3(seed, &eps, opts, &mut st)?,
    };
    let (parameters, satisfiable, completeness, soundness, rank_check, suite, round_trip) = report;
    if !rank_check.ok {
        st.fail(format!("rank {} exceeds {}", rank_check.rank, rank_check.bound));
    }
    for line in suite.iter().filter(|l| !l.holds) {
        st.fail(format!("inequality `{}` fails: {}", line.name, line.detail));
    }
    if let Some(m) = &completeness {
        if m >= &soundness.threshold {
            st.fail(format!("completeness makespan {m} is not below {}", soundness.threshold));
        }
    }
    let verdict = if st.operational {
        Verdict::OperationalFailure
    } else if st.failures.is_empty() {
        Verdict::Certified
    } else {
        Verdict::Refuted
    };
    Ok(CertificateReport {
        family: opts.family.name().into(),
        seed_sha256: sha256_hex(seed_bytes),
        parameters,
        seed_satisfiable: satisfiable,
        completeness_makespan: completeness,
        soundness,
        rank_check,
        inequality_suite: suite,
        witness_round_trip: round_trip,
        verdict,
        failures: st.failures,
    })
}

type Parts = (Value, bool, Option<Rational>, Soundness, RankCheck, Vec<CheckLine>, Option<bool>);

fn rank_check(lrs: &LrsInstance) -> RankCheck {
    let (rank, ok) = verify_rank(lrs);
    RankCheck { rank, bound: lrs.d, ok }
}

fn certify4(seed: &Cnf, eps: &Rational, opts: &CertifyOptions, st: &mut Stages) -> Result<Parts> {
    let (g, red, s, rep) = build_rank4(seed, eps)?;
    let threshold = Rational::from(3);
    let n = red.inst.n;
    let parameters = json!({
        "epsilon": eps.to_string(),
        "N": g.params.n_scale.to_string(),
        "seed_variables": seed.vars(),
        "seed_clauses": seed.clauses().len(),
        "triples": n,
        "machines": g.lrs.machines.len(),
        "jobs": g.lrs.jobs.len(),
        "threshold": threshold.to_string(),
        "completeness_bound": (&Rational::from(2) + &(&Rational::from(6) * eps)).to_string(),
    });
    let rank = rank_check(&g.lrs);
    let ineq = reduce4::certify_inequalities4(&g.params, n);
    let one = &Rational::one() + &(&Rational::from(6) * eps);
    let mut suite = vec![
        CheckLine {
            name: "matched times <= 1+6eps".into(),
            holds: ineq.max_matched <= one,
            detail: format!("max {} over {} pairs", ineq.max_matched, ineq.pairs_checked),
        },
        CheckLine {
            name: "blocked times >= 3".into(),
            holds: ineq.min_blocked >= 3,
            detail: format!("min {}", ineq.min_blocked),
        },
    ];
    suite.extend(ineq.failures.iter().map(|f| CheckLine {
        name: "pair".into(),
        holds: false,
        detail: f.clone(),
    }));

    let sat = brute_force_sat(seed)?;
    let (completeness, soundness, round_trip) = match sat {
        Some(a) => {
            let za = structured_assignment(&s, &rep.push(&a));
            if !s.base.is_satisfied_by(&za) {
                return Err(Error::Witness("pushed assignment does not satisfy the structured CNF".into()));
            }
            let matching = matching_from_assignment(&red.inst, &za)?;
            let sched = reduce4::schedule_from_matching(&g, &matching)?;
            let ms = makespan(&g.lrs, &sched)?;
            let bound = &Rational::from(2) + &(&Rational::from(6) * eps);
            if ms > bound {
                st.fail(format!("completeness makespan {ms} exceeds {bound}"));
            }
            let back = reduce4::matching_from_schedule(&g, &sched)
                .and_then(|m| assignment_from_matching(&red.inst, &m))
                .map(|b| s.base.is_satisfied_by(&b) && seed.is_satisfied_by(&rep.lift(&lift_structured(&b))));
            let ok = matches!(back, Ok(true));
            if !ok {
                st.fail(format!("witness round trip failed: {back:?}"));
            }
            (
                Some(ms),
                Soundness {
                    status: "FEASIBLE".into(),
                    threshold,
                    method: "completeness witness".into(),
                },
                Some(ok),
            )
        }
        None => {
            let out = decide(&g.lrs, &threshold, SearchMode::Generic, &opts.budget, opts.workers)?;
            (None, soundness_from_status(out.status, &threshold, "solver:generic", st), None)
        }
    };
    Ok((parameters, completeness.is_some(), completeness, soundness, rank, suite, round_trip))
}

/// Reads each exact-3 variable off its first hatted copy.
fn lift_structured(b: &Assignment) -> Assignment {
    Assignment::new((0..b.len() / 3).map(|v| b.value(3 * v + 1)).collect())
}

fn certify3(seed: &Cnf, eps: &Rational, opts: &CertifyOptions, st: &mut Stages) -> Result<Parts> {
    let (g, rep) = build_rank3(seed, eps)?;
    let (n, m) = (g.cnf.vars(), g.cnf.clauses().len());
    let threshold = g.params.threshold();
    let parameters = json!({
        "epsilon": eps.to_string(),
        "N": g.params.n_scale.to_string(),
        "xi": g.params.xi,
        "r": g.params.r,
        "seed_variables": seed.vars(),
        "seed_clauses": seed.clauses().len(),
        "variables": n,
        "clauses": m,
        "machines": g.lrs.machines.len(),
        "jobs": g.lrs.jobs.len(),
        "threshold": threshold.to_string(),
        "total_third_work": g.total_third().to_string(),
    });
    let rank = rank_check(&g.lrs);
    let suite: Vec<CheckLine> = reduce3::certify_inequalities3(&g.params, n, m)
        .into_iter()
        .map(|c| CheckLine {
            detail: format!("{} {} {}", c.lhs, c.relation, c.rhs),
            name: c.name,
            holds: c.holds,
        })
        .collect();
    if g.total_third() != reduce3::total_third_work(n, m) {
        st.fail("instance third-coordinate total disagrees with the closed form");
    }

    let sat = brute_force_one_in_three(seed)?;
    let (completeness, soundness, round_trip) = match sat {
        Some(a) => {
            let za = rep.push(&a);
            let sched: Schedule = reduce3::schedule_from_assignment(&g, &za)?;
            let ms = makespan(&g.lrs, &sched)?;
            let half = &Rational::from(g.params.r) + &Rational::new(1, 2)?;
            if ms >= half {
                st.fail(format!("completeness makespan {ms} is not below r+1/2"));
            }
            let back = reduce3::assignment_from_schedule(&g, &sched)
                .map(|b| check_one_in_three(&g.cnf, &b) && check_one_in_three(seed, &rep.lift(&b)));
            let ok = matches!(back, Ok(true));
            if !ok {
                st.fail(format!("witness round trip failed: {back:?}"));
            }
            (
                Some(ms),
                Soundness {
                    status: "FEASIBLE".into(),
                    threshold,
                    method: "completeness witness".into(),
                },
                Some(ok),
            )
        }
        None => {
            let out = decide(&g.lrs, &threshold, SearchMode::StructureAware, &opts.budget, opts.workers)?;
            let method = format!("solver:structure-aware/{}", out.strategy);
            (None, soundness_from_status(out.status, &threshold, &method, st), None)
        }
    };
    Ok((parameters, completeness.is_some(), completeness, soundness, rank, suite, round_trip))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(family: Family) -> CertifyOptions {
        CertifyOptions {
            family,
            epsilon: None,
            budget: SolveBudget::default(),
            workers: 1,
        }
    }

    #[test]
    fn rank4_satisfiable_seed_certifies() {
        let seed = Cnf::from_signed(2, &[vec![1, 2]]).unwrap();
        let r = certify(b"p cnf 2 1\n1 2 0\n", &seed, &opts(Family::Rank4)).unwrap();
        assert_eq!(r.verdict, Verdict::Certified, "{:?}", r.failures);
        assert!(r.completeness_makespan.unwrap() <= Rational::new(11, 4).unwrap());
        assert_eq!(r.soundness.status, "FEASIBLE");
        assert_eq!(r.witness_round_trip, Some(true));
        assert_eq!((r.rank_check.rank, r.rank_check.bound), (4, 4));
    }

    #[test]
    fn rank4_unsatisfiable_seed_is_refuted_at_three() {
        let seed = Cnf::from_signed(1, &[vec![1], vec![-1]]).unwrap();
        let r = certify(b"x", &seed, &opts(Family::Rank4)).unwrap();
        assert_eq!(r.verdict, Verdict::Certified, "{:?}", r.failures);
        assert_eq!(r.soundness.status, "REFUTED");
        assert_eq!(r.soundness.threshold, Rational::from(3));
        assert!(r.completeness_makespan.is_none());
        assert!(!r.to_json_pretty().contains("completeness_makespan"));
    }

    #[test]
    fn rank3_unsatisfiable_seed_is_refuted() {
        let seed = Cnf::from_signed(1, &[vec![1, 1, 1]]).unwrap();
        let r = certify(b"x", &seed, &opts(Family::Rank3)).unwrap();
        assert_eq!(r.verdict, Verdict::Certified, "{:?}", r.failures);
        assert_eq!(r.soundness.status, "REFUTED");
        assert!(r.soundness.method.contains("exact-fill"));
        assert!(r.inequality_suite.iter().any(|l| l.name == "total >= 8nr" && l.holds));
    }

    #[test]
    fn budget_exhaustion_is_operational() {
        let seed = Cnf::from_signed(1, &[vec![1], vec![-1]]).unwrap();
        let mut o = opts(Family::Rank4);
        o.budget.max_nodes = 5;
        let r = certify(b"x", &seed, &o).unwrap();
        assert_eq!(r.soundness.status, "BUDGET_EXCEEDED");
        assert_eq!(r.verdict.exit_code(), 2);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
