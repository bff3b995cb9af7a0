//! Rank-4 gadget: one machine per match, one job per `X ∪ Y` element and
//! `d(w) − 1` dummy jobs per `W` element that lies in `d(w)` matches.
//!
//! Indices follow the tdm module: variable triples are `3k+1, 3k+2, 3k+3`, and
//! the position of an index inside its triple selects which of the three
//! speed/size families applies. Clause-padding elements `u_k` use the same
//! vectors as `s_{c1+k}`.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use crate::error::{structural, Error, Result};
use crate::exact::Rational;
use crate::lrs::{makespan, Job, LrsInstance, Machine, Schedule};
use crate::tdm::{show, t2_pair, verify_matching, Element, Match, Matching, TdmInstance};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Reduce4Params {
    pub epsilon: Rational,
    pub n_scale: u64,
}

impl Reduce4Params {
    /// Requires `0 < ε < 1/6`, `N ≥ 1/ε²` and `εN ≥ 4`.
    pub fn new(epsilon: Rational, n_scale: u64) -> Result<Self> {
        let sixth = Rational::new(1, 6)?;
        if epsilon <= Rational::zero() || epsilon >= sixth {
            return Err(structural(format!("epsilon {epsilon} outside (0, 1/6)")));
        }
        let n = Rational::from(n_scale as i64);
        if n < (&epsilon * &epsilon).recip()? {
            return Err(structural(format!("N = {n_scale} is below 1/epsilon^2")));
        }
        if &epsilon * &n < 4 {
            return Err(structural(format!("epsilon·N = {} is below 4", &epsilon * &n)));
        }
        Ok(Reduce4Params { epsilon, n_scale })
    }

    /// `N = max(64, ⌈3n/ε²⌉)` rounded up to a power of two.
    pub fn for_size(epsilon: Rational, n: usize) -> Result<Self> {
        let bound = (&Rational::from(3 * n as i64) / &(&epsilon * &epsilon)).ceil();
        let bound: u64 = bound
            .try_into()
            .map_err(|_| structural("N does not fit in 64 bits"))?;
        Self::new(epsilon, bound.max(64).next_power_of_two())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TimeClass {
    Matched,
    WMatched,
    Blocked,
}

#[derive(Clone, Debug)]
pub struct GadgetInstance4 {
    pub lrs: LrsInstance,
    pub params: Reduce4Params,
    pub tdm: TdmInstance,
    /// Machine `k` is built from match `k` of `tdm` (`t1` first, then `t2`).
    pub match_of_machine: Vec<Match>,
    /// Real jobs map to their element, dummy jobs to their `W` element.
    pub element_of_job: Vec<Element>,
}

struct Vectors {
    big_n: Rational,
    eps: Rational,
    half: Rational,
    /// Offset added to `u_k` indices so they reuse the `s` vectors.
    c1: usize,
    cache: HashMap<i64, Rational>,
}

impl Vectors {
    fn new(p: &Reduce4Params, c1: usize) -> Self {
        Vectors {
            big_n: Rational::from(p.n_scale as i64),
            eps: p.epsilon.clone(),
            half: Rational::new(1, 2).expect("nonzero"),
            c1,
            cache: HashMap::new(),
        }
    }

    fn pw(&mut self, e: i64) -> Rational {
        let n = &self.big_n;
        self.cache
            .entry(e)
            .or_insert_with(|| n.pow_int(e).expect("N > 0"))
            .clone()
    }

    fn s_exp(&self, e: Element) -> i64 {
        let j = match e {
            Element::S(j) | Element::SP(j) => j,
            Element::U(k) | Element::UP(k) => self.c1 + k,
            _ => unreachable!("not an s/u element"),
        };
        j as i64 + self.big_n.to_i64().expect("N fits")
    }

    fn machine(&mut self, m: &Match) -> Vec<Rational> {
        let eps = self.eps.clone();
        let inv = eps.recip().expect("eps > 0");
        let two = Rational::from(2);
        match (m[0], m[1]) {
            (w, Element::S(_) | Element::U(_)) => {
                let i = w.index() as i64;
                let e = self.s_exp(m[1]);
                let (x, y) = match w {
                    Element::W(_) => (self.pw(i), self.pw(-i)),
                    _ => (self.pw(-i), self.pw(i)),
                };
                vec![x, y, self.pw(e), self.pw(-e)]
            }
            (Element::W(t), Element::A(_)) => {
                let x = t as i64;
                let last = match (t - 1) % 3 {
                    0 => self.pw(-x - 1),
                    1 => &two * &self.pw(-x + 1),
                    _ => &(&two * &inv) * &self.pw(-x + 1),
                };
                vec![self.pw(x), self.pw(-x), self.pw(-x), last]
            }
            (Element::WBar(t), Element::A(_)) => {
                let x = t as i64;
                let (third, last) = match (t - 1) % 3 {
                    0 => (&eps * &self.pw(-x), self.pw(-x)),
                    1 => (self.pw(-x), &inv * &self.pw(-x)),
                    _ => (self.pw(-x), &two * &self.pw(-x + 1)),
                };
                vec![self.pw(-x), self.pw(x), third, last]
            }
            _ => unreachable!("malformed match {}", show(m)),
        }
    }

    fn job(&mut self, e: Element) -> Vec<Rational> {
        let eps = self.eps.clone();
        let inv = eps.recip().expect("eps > 0");
        let half = self.half.clone();
        let zero = Rational::zero();
        match e {
            Element::W(i) => {
                let i = i as i64;
                vec![self.pw(-i), self.pw(i), zero.clone(), zero]
            }
            Element::WBar(i) => {
                let i = i as i64;
                vec![self.pw(i), self.pw(-i), zero.clone(), zero]
            }
            Element::S(_) | Element::SP(_) | Element::U(_) | Element::UP(_) => {
                let j = self.s_exp(e);
                vec![zero.clone(), zero, &half * &self.pw(-j), &half * &self.pw(j)]
            }
            Element::A(i) => {
                let i = i as i64;
                vec![self.pw(-i), self.pw(-i), &eps * &self.pw(i), zero]
            }
            Element::B(t) => {
                let x = t as i64;
                match (t - 1) % 3 {
                    0 => vec![
                        &eps * &self.pw(-x),
                        &eps * &self.pw(-x - 2),
                        &half * &self.pw(x),
                        &half * &self.pw(x + 1),
                    ],
                    1 => vec![
                        &eps * &self.pw(-x),
                        &inv * &self.pw(-x),
                        &(&half * &inv) * &self.pw(x - 1),
                        &half * &self.pw(x - 1),
                    ],
                    _ => vec![
                        &eps * &self.pw(-x),
                        &eps * &self.pw(-x + 1),
                        &half * &self.pw(x - 1),
                        &(&half * &eps) * &self.pw(x - 1),
                    ],
                }
            }
        }
    }
}

pub fn machine_id(m: &Match) -> String {
    format!("{}-{}-{}", m[0], m[1], m[2])
}

fn matched_bound(p: &Reduce4Params) -> Rational {
    Rational::one() + Rational::from(6) * p.epsilon.clone()
}

pub fn build_lrs4(tdm: &TdmInstance, p: &Reduce4Params) -> Result<GadgetInstance4> {
    tdm.check_invariants()?;
    let mut vec = Vectors::new(p, tdm.c1);
    let match_of_machine: Vec<Match> = tdm.all_matches().copied().collect();
    let machines: Vec<Machine> = match_of_machine
        .iter()
        .map(|m| Machine {
            id: machine_id(m),
            speed: vec.machine(m),
        })
        .collect();

    let elements = tdm.elements();
    let mut jobs = Vec::new();
    let mut element_of_job = Vec::new();
    for &e in elements.iter().filter(|e| !e.is_w()) {
        jobs.push(Job {
            id: e.to_string(),
            size: vec.job(e),
        });
        element_of_job.push(e);
    }
    for &w in elements.iter().filter(|e| e.is_w()) {
        let degree = match_of_machine.iter().filter(|m| m[0] == w).count();
        for k in 1..degree {
            jobs.push(Job {
                id: format!("{w}#{k}"),
                size: vec.job(w),
            });
            element_of_job.push(w);
        }
    }

    let mut mom = Map::new();
    for (mach, m) in machines.iter().zip(&match_of_machine) {
        mom.insert(mach.id.clone(), json!([m[0].to_string(), m[1].to_string(), m[2].to_string()]));
    }
    let mut meta = Map::new();
    meta.insert("family".into(), json!("rank4"));
    meta.insert("epsilon".into(), json!(p.epsilon.to_string()));
    meta.insert("N".into(), json!(p.n_scale.to_string()));
    meta.insert("match_of_machine".into(), Value::Object(mom));

    Ok(GadgetInstance4 {
        lrs: LrsInstance::new(4, machines, jobs, meta)?,
        params: p.clone(),
        tdm: tdm.clone(),
        match_of_machine,
        element_of_job,
    })
}

fn classify_value(
    p: &Reduce4Params,
    m: &Match,
    e: Element,
    t: &Rational,
) -> Option<TimeClass> {
    let contains = m.contains(&e);
    if e.is_w() && contains && *t == 2 {
        Some(TimeClass::WMatched)
    } else if !e.is_w() && contains && *t <= matched_bound(p) {
        Some(TimeClass::Matched)
    } else if *t >= 3 {
        Some(TimeClass::Blocked)
    } else {
        None
    }
}

pub fn classify_time(g: &GadgetInstance4, machine: usize, job: usize) -> Result<TimeClass> {
    let t = g.lrs.time(machine, job);
    let m = &g.match_of_machine[machine];
    let e = g.element_of_job[job];
    classify_value(&g.params, m, e, &t).ok_or_else(|| {
        structural(format!(
            "job {} on machine {} has unclassifiable time {t}",
            g.lrs.jobs[job].id, g.lrs.machines[machine].id
        ))
    })
}

/// Real jobs go to the machines of the matching; every other machine takes one
/// dummy job of its `W` element.
pub fn schedule_from_matching(g: &GadgetInstance4, m: &Matching) -> Result<Schedule> {
    if !verify_matching(&g.tdm, m)? {
        return Err(Error::Witness("not a perfect matching".into()));
    }
    let in_m1: Vec<bool> = {
        let mut v = vec![false; g.match_of_machine.len()];
        for &k in &m.0 {
            v[k] = true;
        }
        v
    };
    let mut machine_of = vec![usize::MAX; g.lrs.jobs.len()];
    let mut spare: HashMap<Element, Vec<usize>> = HashMap::new();
    for (k, mt) in g.match_of_machine.iter().enumerate() {
        if !in_m1[k] {
            spare.entry(mt[0]).or_default().push(k);
        }
    }
    for (j, &e) in g.element_of_job.iter().enumerate() {
        if e.is_w() {
            let list = spare.get_mut(&e).expect("dummy jobs exist only for repeated elements");
            machine_of[j] = list.remove(0);
        } else {
            machine_of[j] = m
                .0
                .iter()
                .copied()
                .find(|&k| g.match_of_machine[k].contains(&e))
                .expect("perfect matching covers every element");
        }
    }
    assert!(spare.values().all(Vec::is_empty), "every spare machine receives a dummy job");
    let s = Schedule::from_indices(&g.lrs, &machine_of);
    let bound = Rational::from(2) + Rational::from(6) * g.params.epsilon.clone();
    let ms = makespan(&g.lrs, &s)?;
    assert!(ms <= bound, "completeness makespan {ms} exceeds {bound}");
    Ok(s)
}

/// Reads a perfect matching off any schedule whose makespan is below 3.
pub fn matching_from_schedule(g: &GadgetInstance4, s: &Schedule) -> Result<Matching> {
    let idx = s.indices(&g.lrs)?;
    let mut jobs_on: Vec<Vec<usize>> = vec![Vec::new(); g.lrs.machines.len()];
    for (j, &k) in idx.iter().enumerate() {
        if classify_time(g, k, j)? == TimeClass::Blocked {
            return Err(Error::Soundness(format!(
                "job {} sits on blocked machine {}",
                g.lrs.jobs[j].id, g.lrs.machines[k].id
            )));
        }
        jobs_on[k].push(j);
    }
    let mut m1 = Vec::new();
    for (k, list) in jobs_on.iter().enumerate() {
        let has_w = list.iter().any(|&j| g.element_of_job[j].is_w());
        if has_w && list.len() > 1 {
            return Err(Error::Soundness(format!(
                "machine {} carries a dummy job and {} other jobs",
                g.lrs.machines[k].id,
                list.len() - 1
            )));
        }
        if !has_w {
            m1.push(k);
        }
    }
    if m1.len() != 6 * g.tdm.n {
        return Err(Error::Soundness(format!(
            "{} machines without dummy jobs, expected {}",
            m1.len(),
            6 * g.tdm.n
        )));
    }
    let out = Matching(m1);
    if !verify_matching(&g.tdm, &out)? {
        return Err(Error::Soundness("machines without dummy jobs do not form a perfect matching".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality4Report {
    pub pairs_checked: usize,
    pub max_matched: Rational,
    pub min_blocked: Rational,
    pub failures: Vec<String>,
}

impl Inequality4Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Classifies every (machine family, job family, index) combination for `n`
/// triples: all `w`/`w̄` against all `s` indices `1..=3n` (which also covers
/// every `u`) plus the fixed `a/b` matches, against one job per element.
pub fn certify_inequalities4(p: &Reduce4Params, n: usize) -> Inequality4Report {
    let n3 = 3 * n;
    let mut machines: Vec<Match> = Vec::new();
    for i in 1..=n3 {
        for j in 1..=n3 {
            machines.push([Element::W(i), Element::S(j), Element::SP(j)]);
            machines.push([Element::WBar(i), Element::S(j), Element::SP(j)]);
        }
    }
    machines.extend((1..=n3).flat_map(t2_pair));
    let mut elements = Vec::new();
    for i in 1..=n3 {
        elements.extend([
            Element::W(i),
            Element::WBar(i),
            Element::S(i),
            Element::SP(i),
            Element::A(i),
            Element::B(i),
        ]);
    }
    let mut vec = Vectors::new(p, n3);
    let speeds: Vec<Vec<Rational>> = machines.iter().map(|m| vec.machine(m)).collect();
    let sizes: Vec<Vec<Rational>> = elements.iter().map(|&e| vec.job(e)).collect();

    let mut max_matched = Rational::zero();
    let mut min_blocked: Option<Rational> = None;
    let mut failures = Vec::new();
    for (m, speed) in machines.iter().zip(&speeds) {
        for (&e, size) in elements.iter().zip(&sizes) {
            let t = crate::exact::dot(speed, size).expect("length 4");
            match classify_value(p, m, e, &t) {
                Some(TimeClass::Matched) => {
                    if t > max_matched {
                        max_matched = t;
                    }
                }
                Some(TimeClass::WMatched) => {}
                Some(TimeClass::Blocked) => {
                    if min_blocked.as_ref().is_none_or(|b| &t < b) {
                        min_blocked = Some(t);
                    }
                }
                None => failures.push(format!("{e} on {} has time {t}", show(m))),
            }
        }
    }
    Inequality4Report {
        pairs_checked: machines.len() * elements.len(),
        max_matched,
        min_blocked: min_blocked.unwrap_or_else(Rational::zero),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::lrs::{load, processing_time};
    use crate::sat::{brute_force_sat, tovey_exact3, tovey_structured, Cnf};
    use crate::tdm::{brute_force_perfect_matching, matching_from_assignment, reduce_sat_to_3dm};

    fn seed_tdm(vars: usize, clauses: &[&[i64]]) -> (crate::sat::StructuredCnf, TdmInstance) {
        let cnf = Cnf::from_signed(vars, &clauses.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        let s = tovey_structured(&tovey_exact3(&cnf).unwrap().cnf).unwrap();
        let t = reduce_sat_to_3dm(&s).unwrap().inst;
        (s, t)
    }

    fn eighth() -> Reduce4Params {
        Reduce4Params::for_size(rat(1, 8).unwrap(), 2).unwrap()
    }

    #[test]
    fn parameter_guards() {
        assert!(Reduce4Params::new(rat(1, 4).unwrap(), 1 << 20).is_err());
        assert!(Reduce4Params::new(rat(1, 8).unwrap(), 32).is_err());
        assert!(Reduce4Params::new(rat(1, 8).unwrap(), 64).is_ok());
        assert_eq!(eighth().n_scale, 512);
        assert_eq!(Reduce4Params::for_size(rat(1, 64).unwrap(), 2).unwrap().n_scale, 32768);
    }

    #[test]
    fn table_rows() {
        let p = eighth();
        let mut v = Vectors::new(&p, 0);
        let n = Rational::from(512);
        let pw = |e: i64| n.pow_int(e).unwrap();
        let eps = rat(1, 8).unwrap();
        // (w̄_x, a_x, b_{x+1}) for the first index of a triple
        let s = v.machine(&[Element::WBar(4), Element::A(4), Element::B(5)]);
        assert_eq!(s, vec![pw(-4), pw(4), &eps * &pw(-4), pw(-4)]);
        let a = v.job(Element::A(5));
        assert_eq!(a, vec![pw(-5), pw(-5), &eps * &pw(5), Rational::zero()]);
    }

    #[test]
    fn counts_and_key_times() {
        let (_, tdm) = seed_tdm(1, &[&[1], &[-1]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        assert_eq!(g.lrs.machines.len(), 42);
        assert_eq!(g.lrs.jobs.len(), 54);
        assert_eq!(processing_time(&g.lrs, "w1-s1-sp1", "w1#1").unwrap(), Rational::from(2));
        assert_eq!(processing_time(&g.lrs, "w1-s1-sp1", "s1").unwrap(), Rational::one());
        // b at the first position of triple k=0 on its straight machine: 1 + ε + ε·N^{-2x-2}
        let eps = rat(1, 8).unwrap();
        let expected = Rational::one() + eps.clone() + &eps * &Rational::from(512).pow_int(-4).unwrap();
        assert_eq!(processing_time(&g.lrs, "w1-a1-b1", "b1").unwrap(), expected);
    }

    #[test]
    fn table_three_spot_checks() {
        let (_, tdm) = seed_tdm(1, &[&[1], &[-1]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        let class = |m: &str, j: &str| classify_time(&g, g.lrs.machine_idx(m).unwrap(), g.lrs.job_idx(j).unwrap()).unwrap();
        assert_eq!(class("wbar1-a1-b2", "b2"), TimeClass::Matched);
        assert_eq!(class("w2-a2-b2", "b1"), TimeClass::Blocked);
        assert_eq!(class("w1-a1-b1", "b2"), TimeClass::Blocked);
        let t = processing_time(&g.lrs, "w1-a1-b1", "b2").unwrap();
        assert!(t >= 4);
        // the middle entry of the cyclic row evaluates to about 1/ε, not 1/(2ε)
        let t = processing_time(&g.lrs, "wbar2-a2-b3", "b2").unwrap();
        assert!(t >= 8 && t < 9);
    }

    #[test]
    fn classification_is_total() {
        let (_, tdm) = seed_tdm(1, &[&[1], &[-1]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        for k in 0..g.lrs.machines.len() {
            for j in 0..g.lrs.jobs.len() {
                classify_time(&g, k, j).unwrap();
            }
        }
    }

    #[test]
    fn witness_round_trip() {
        let (s, tdm) = seed_tdm(2, &[&[1, 2]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        let a = brute_force_sat(&s.base).unwrap().unwrap();
        let m = matching_from_assignment(&tdm, &a).unwrap();
        let sched = schedule_from_matching(&g, &m).unwrap();
        let ms = makespan(&g.lrs, &sched).unwrap();
        assert!(ms <= Rational::from(2) + Rational::from(3) * rat(1, 8).unwrap());
        let back = matching_from_schedule(&g, &sched).unwrap();
        let mut x = back.0.clone();
        let mut y = m.0.clone();
        x.sort();
        y.sort();
        assert_eq!(x, y);

        let s_machine = g.match_of_machine.iter().position(|mt| mt[1] == Element::S(1) && m.0.contains(&g.match_of_machine.iter().position(|q| q == mt).unwrap())).unwrap();
        assert_eq!(load(&g.lrs, &sched, &g.lrs.machines[s_machine].id).unwrap(), Rational::from(2));

        let oracle = brute_force_perfect_matching(&tdm).unwrap().unwrap();
        let sched2 = schedule_from_matching(&g, &oracle).unwrap();
        assert!(matching_from_schedule(&g, &sched2).is_ok());
    }

    #[test]
    fn bad_schedules_rejected() {
        let (s, tdm) = seed_tdm(2, &[&[1, 2]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        let a = brute_force_sat(&s.base).unwrap().unwrap();
        let m = matching_from_assignment(&tdm, &a).unwrap();
        let mut sched = schedule_from_matching(&g, &m).unwrap();
        // put s1 onto the machine holding w1's first dummy job
        let host = sched.assignment["w1#1"].clone();
        let before = sched.assignment.insert("s1".into(), host).unwrap();
        assert!(matching_from_schedule(&g, &sched).is_err());
        sched.assignment.insert("s1".into(), before);
        let mut blocked = sched.clone();
        blocked.assignment.insert("a1".into(), "w2-a2-b2".into());
        assert!(matches!(matching_from_schedule(&g, &blocked), Err(Error::Soundness(_))));
    }

    #[test]
    fn certificate_needs_eps_squared_n_at_least_three() {
        // a-jobs on a neighbouring cyclic machine cost about ε²N, so N = 1/ε² is too small
        let p = Reduce4Params::new(rat(1, 8).unwrap(), 64).unwrap();
        let rep = certify_inequalities4(&p, 2);
        assert!(!rep.passed());
        assert!(rep.failures[0].starts_with("a2 on (wbar1,a1,b2)"), "{:?}", rep.failures);

        let p = Reduce4Params::new(rat(1, 8).unwrap(), 256).unwrap();
        assert!(certify_inequalities4(&p, 2).passed());

        let rep = certify_inequalities4(&eighth(), 2);
        assert!(rep.passed(), "{:?}", rep.failures);
        assert!(rep.min_blocked >= 3);
        assert!(rep.max_matched <= Rational::one() + Rational::from(6) * rat(1, 8).unwrap());
        assert_eq!(rep.pairs_checked, 84 * 36);
    }

    #[test]
    fn rank_at_most_four() {
        let (_, tdm) = seed_tdm(1, &[&[1], &[-1]]);
        let g = build_lrs4(&tdm, &eighth()).unwrap();
        assert_eq!(crate::lrs::verify_rank(&g.lrs), (4, true));
    }
}
