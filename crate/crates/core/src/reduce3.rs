//! Rank-3 gadget for one-in-three satisfiability.
//!
//! Per variable `z_i`: eight variable jobs `v_{i,k}^{T/F}`, eight
//! truth-assignment jobs `a_i..d_i^{T/F}`, four truth-assignment machines, one
//! clause machine per literal occurrence and one dummy machine. Every machine
//! has a huge job of its own. All third speed coordinates are 1 and all
//! third size coordinates are integers; an intended schedule fills the third
//! coordinate of every machine to exactly `r`.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{structural, Error, Result};
use crate::exact::Rational;
use crate::lrs::{loads, makespan, Job, LrsInstance, Machine, Schedule};
use crate::sat::{check_one_in_three, Assignment, Cnf};

pub const XI: i64 = 8;
pub const R: i64 = 1024 * XI;

/// `ξ`-multiples of the variable jobs and of the clause huge jobs, by `k`.
const V_XI: [i64; 4] = [10, 20, 18, 12];
/// `ξ`-multiples of the truth-assignment jobs `a, b, c, d`.
const LETTER_XI: [i64; 4] = [2, 4, 8, 16];

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Reduce3Params {
    pub xi: i64,
    pub r: i64,
    pub epsilon: Rational,
    pub n_scale: u64,
}

impl Reduce3Params {
    /// Requires `0 < ε ≤ 1/64` and `N ≥ n/ε²` for `n` variables.
    pub fn new(epsilon: Rational, n_scale: u64, n: usize) -> Result<Self> {
        if epsilon <= Rational::zero() || epsilon > Rational::new(1, 64)? {
            return Err(structural(format!("epsilon {epsilon} outside (0, 1/64]")));
        }
        let need = &Rational::from(n as i64) / &(&epsilon * &epsilon);
        if need > n_scale as i64 {
            return Err(structural(format!("N = {n_scale} is below n/epsilon^2 = {need}")));
        }
        Ok(Reduce3Params {
            xi: XI,
            r: R,
            epsilon,
            n_scale,
        })
    }

    /// Smallest power of two `N ≥ n/ε²`.
    pub fn for_size(epsilon: Rational, n: usize) -> Result<Self> {
        if epsilon <= Rational::zero() {
            return Err(structural(format!("epsilon {epsilon} must be positive")));
        }
        let need: u64 = (&Rational::from(n as i64) / &(&epsilon * &epsilon))
            .ceil()
            .try_into()
            .map_err(|_| structural("N does not fit in 64 bits"))?;
        Self::new(epsilon, need.max(1).next_power_of_two(), n)
    }

    pub fn threshold(&self) -> Rational {
        Rational::from(self.r + 1)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Letter {
    A,
    B,
    C,
    D,
}

impl Letter {
    const ALL: [Letter; 4] = [Letter::A, Letter::B, Letter::C, Letter::D];

    fn name(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
            Letter::C => 'c',
            Letter::D => 'd',
        }
    }

    /// The two letters sharing a truth-assignment machine with `v_{i,k}`.
    pub fn pair_of(k: usize) -> [Letter; 2] {
        match k {
            1 => [Letter::A, Letter::C],
            2 => [Letter::B, Letter::D],
            3 => [Letter::A, Letter::D],
            4 => [Letter::B, Letter::C],
            _ => unreachable!("k in 1..=4"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum MachineClass {
    Truth,
    Clause,
    Dummy,
}

impl MachineClass {
    pub fn name(self) -> &'static str {
        match self {
            MachineClass::Truth => "truth-assignment",
            MachineClass::Clause => "clause",
            MachineClass::Dummy => "dummy",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum MachineLabel {
    Truth { i: usize, k: usize },
    Clause { i: usize, k: usize, j: usize },
    Dummy { i: usize, k: usize },
}

impl MachineLabel {
    pub fn class(self) -> MachineClass {
        match self {
            MachineLabel::Truth { .. } => MachineClass::Truth,
            MachineLabel::Clause { .. } => MachineClass::Clause,
            MachineLabel::Dummy { .. } => MachineClass::Dummy,
        }
    }

    /// The `(i, k)` of the variable job this machine is meant to carry.
    pub fn slot(self) -> (usize, usize) {
        match self {
            MachineLabel::Truth { i, k } | MachineLabel::Clause { i, k, .. } | MachineLabel::Dummy { i, k } => (i, k),
        }
    }
}

impl fmt::Display for MachineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MachineLabel::Truth { i, k } => {
                let [x, y] = Letter::pair_of(k);
                write!(f, "(v{i}.{k},{}{i},{}{i})", x.name(), y.name())
            }
            MachineLabel::Clause { i, k, j } => write!(f, "(v{i}.{k},u{j})"),
            MachineLabel::Dummy { i, k } => write!(f, "(v{i}.{k},phi)"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum JobKind {
    Variable { i: usize, k: usize, truth: bool },
    TruthAssignment { letter: Letter, i: usize, truth: bool },
    Clause { j: usize, truth: bool },
    Dummy { truth: bool },
    /// The anchor job of machine number `machine`.
    Huge { machine: usize },
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Variable { .. } => "variable",
            JobKind::TruthAssignment { .. } => "truth-assignment",
            JobKind::Clause { .. } => "clause",
            JobKind::Dummy { .. } => "dummy",
            JobKind::Huge { .. } => "huge",
        }
    }

    pub fn truth(self) -> Option<bool> {
        match self {
            JobKind::Variable { truth, .. }
            | JobKind::TruthAssignment { truth, .. }
            | JobKind::Clause { truth, .. }
            | JobKind::Dummy { truth } => Some(truth),
            JobKind::Huge { .. } => None,
        }
    }
}

fn tag(truth: bool) -> char {
    if truth {
        'T'
    } else {
        'F'
    }
}

#[derive(Clone, Debug)]
pub struct GadgetInstance3 {
    pub lrs: LrsInstance,
    pub params: Reduce3Params,
    pub cnf: Cnf,
    pub kind_of_job: Vec<JobKind>,
    pub label_of_machine: Vec<MachineLabel>,
}

/// Third size coordinates, shared by the builder and the certificate.
pub fn third_variable(k: usize, truth: bool) -> i64 {
    R / 8 - V_XI[k - 1] * XI - if truth { 2 } else { 4 }
}

pub fn third_letter(l: Letter, truth: bool) -> i64 {
    LETTER_XI[l as usize] * XI + if truth { 1 } else { 2 }
}

pub fn third_clause(truth: bool) -> i64 {
    R / 4 + if truth { 2 } else { 4 }
}

pub fn third_dummy(truth: bool) -> i64 {
    R / 16 + if truth { 2 } else { 4 }
}

pub fn third_huge(label: MachineLabel) -> i64 {
    match label {
        MachineLabel::Truth { .. } => 7 * R / 8,
        MachineLabel::Clause { k, .. } => 5 * R / 8 + V_XI[k - 1] * XI,
        MachineLabel::Dummy { k, .. } => 13 * R / 16 + if k == 2 { 20 * XI } else { 12 * XI },
    }
}

struct Powers {
    n: Rational,
    eps: Rational,
    big: i64,
}

impl Powers {
    fn pw(&self, e: i64) -> Rational {
        self.n.pow_int(e).expect("N > 0")
    }

    fn eps_pw(&self, e: i64) -> Rational {
        &self.eps * &self.pw(e)
    }
}

/// Per-variable occurrence data: clause machine `k` for each occurrence, in
/// clause order, plus the dummy slot.
fn clause_slots(cnf: &Cnf) -> Result<(Vec<(usize, usize, usize)>, Vec<usize>)> {
    let n = cnf.vars();
    let mut pos = vec![0usize; n];
    let mut neg = vec![0usize; n];
    for l in cnf.clauses().iter().flatten() {
        if l.positive {
            pos[l.var - 1] += 1;
        } else {
            neg[l.var - 1] += 1;
        }
    }
    for v in 0..n {
        if !matches!((pos[v], neg[v]), (2, 1) | (1, 2)) {
            return Err(structural(format!(
                "variable {} has polarity profile {}+{}, expected 2+1 or 1+2",
                v + 1,
                pos[v],
                neg[v]
            )));
        }
    }
    let mut seen_pos = vec![0usize; n];
    let mut seen_neg = vec![0usize; n];
    let mut slots = Vec::new();
    for (j, clause) in cnf.clauses().iter().enumerate() {
        for l in clause {
            let i = l.var;
            let k = if l.positive {
                seen_pos[i - 1] += 1;
                seen_pos[i - 1]
            } else {
                seen_neg[i - 1] += 1;
                2 + seen_neg[i - 1]
            };
            slots.push((i, k, j + 1));
        }
    }
    let dummy = (0..n).map(|v| if pos[v] == 1 { 2 } else { 4 }).collect();
    Ok((slots, dummy))
}

pub fn build_lrs3(cnf: &Cnf, p: &Reduce3Params) -> Result<GadgetInstance3> {
    let n = cnf.vars();
    let m = cnf.clauses().len();
    if m < n || m > 2 * n {
        return Err(structural(format!("dummy counts 2n-m = {}, m-n = {} must be nonnegative", 2 * n as i64 - m as i64, m as i64 - n as i64)));
    }
    if let Some(j) = cnf.clauses().iter().position(|c| !(2..=3).contains(&c.len())) {
        return Err(structural(format!("clause {} has {} literals, expected 2 or 3", j + 1, cnf.clauses()[j].len())));
    }
    Reduce3Params::new(p.epsilon.clone(), p.n_scale, n)?;
    let (slots, dummy_k) = clause_slots(cnf)?;

    let pw = Powers {
        n: Rational::from(p.n_scale as i64),
        eps: p.epsilon.clone(),
        big: p.n_scale as i64,
    };
    let zero = Rational::zero;
    let int = |x: i64| Rational::from(x);

    let mut labels = Vec::new();
    for i in 1..=n {
        for k in 1..=4 {
            labels.push(MachineLabel::Truth { i, k });
        }
    }
    labels.extend(slots.iter().map(|&(i, k, j)| MachineLabel::Clause { i, k, j }));
    labels.extend((1..=n).map(|i| MachineLabel::Dummy { i, k: dummy_k[i - 1] }));

    let machines: Vec<Machine> = labels
        .iter()
        .map(|&label| {
            let (i, k) = label.slot();
            let first = pw.pw(-(4 * i as i64 + k as i64));
            let second = match label {
                MachineLabel::Truth { .. } => pw.pw(-(i as i64)),
                MachineLabel::Clause { j, .. } => pw.pw(-(pw.big + j as i64)),
                MachineLabel::Dummy { .. } => zero(),
            };
            Machine {
                id: label.to_string(),
                speed: vec![first, second, Rational::one()],
            }
        })
        .collect();

    let mut jobs = Vec::new();
    let mut kinds = Vec::new();
    let mut push = |id: String, size: Vec<Rational>, kind: JobKind| {
        jobs.push(Job { id, size });
        kinds.push(kind);
    };
    for i in 1..=n {
        for k in 1..=4 {
            for truth in [true, false] {
                push(
                    format!("v{i}.{k}.{}", tag(truth)),
                    vec![pw.eps_pw(4 * i as i64 + k as i64), zero(), int(third_variable(k, truth))],
                    JobKind::Variable { i, k, truth },
                );
            }
        }
    }
    for i in 1..=n {
        for letter in Letter::ALL {
            for truth in [true, false] {
                push(
                    format!("{}{i}.{}", letter.name(), tag(truth)),
                    vec![zero(), pw.eps_pw(i as i64), int(third_letter(letter, truth))],
                    JobKind::TruthAssignment { letter, i, truth },
                );
            }
        }
    }
    for (j, clause) in cnf.clauses().iter().enumerate() {
        let j = j + 1;
        let second = pw.eps_pw(pw.big + j as i64);
        push(format!("u{j}.T"), vec![zero(), second.clone(), int(third_clause(true))], JobKind::Clause { j, truth: true });
        for q in 1..clause.len() {
            push(format!("u{j}.F{q}"), vec![zero(), second.clone(), int(third_clause(false))], JobKind::Clause { j, truth: false });
        }
    }
    for q in 1..=2 * n - m {
        push(format!("phi.T{q}"), vec![zero(), zero(), int(third_dummy(true))], JobKind::Dummy { truth: true });
    }
    for q in 1..=m - n {
        push(format!("phi.F{q}"), vec![zero(), zero(), int(third_dummy(false))], JobKind::Dummy { truth: false });
    }
    let huge_second = pw.pw(2 * pw.big);
    for (idx, &label) in labels.iter().enumerate() {
        let (i, k) = label.slot();
        let size = match label {
            MachineLabel::Truth { .. } => vec![pw.eps_pw(4 * i as i64 + k as i64), pw.eps_pw(i as i64), int(third_huge(label))],
            MachineLabel::Clause { j, .. } => vec![zero(), pw.eps_pw(pw.big + j as i64), int(third_huge(label))],
            MachineLabel::Dummy { .. } => vec![zero(), huge_second.clone(), int(third_huge(label))],
        };
        push(format!("H{label}"), size, JobKind::Huge { machine: idx });
    }

    let mut kind_meta = Map::new();
    let mut home_meta = Map::new();
    for (job, kind) in jobs.iter().zip(&kinds) {
        kind_meta.insert(job.id.clone(), json!(kind.name()));
        if let JobKind::Huge { machine } = kind {
            home_meta.insert(job.id.clone(), json!(machines[*machine].id));
        }
    }
    let mut label_meta = Map::new();
    let mut class_meta = Map::new();
    for (mach, label) in machines.iter().zip(&labels) {
        label_meta.insert(mach.id.clone(), json!(label.to_string()));
        class_meta.insert(mach.id.clone(), json!(label.class().name()));
    }
    let mut meta = Map::new();
    meta.insert("family".into(), json!("rank3"));
    meta.insert("xi".into(), json!(p.xi));
    meta.insert("r".into(), json!(p.r));
    meta.insert("epsilon".into(), json!(p.epsilon.to_string()));
    meta.insert("N".into(), json!(p.n_scale.to_string()));
    meta.insert("kind_of_job".into(), Value::Object(kind_meta));
    meta.insert("label_of_machine".into(), Value::Object(label_meta));
    meta.insert("class_of_machine".into(), Value::Object(class_meta));
    meta.insert("home_of_huge".into(), Value::Object(home_meta));

    let lrs = LrsInstance::new(3, machines, jobs, meta)?;
    assert!(lrs.all_nonnegative(), "rank-3 gadget entries are nonnegative");
    assert!(
        lrs.machines.iter().all(|m| m.speed[2] == 1),
        "third speed coordinates are 1, so every time is at least the job's third size"
    );
    assert_eq!(lrs.machines.len(), 8 * n);
    assert_eq!(lrs.jobs.len(), 28 * n);
    Ok(GadgetInstance3 {
        lrs,
        params: p.clone(),
        cnf: cnf.clone(),
        kind_of_job: kinds,
        label_of_machine: labels,
    })
}

impl GadgetInstance3 {
    /// Sum of third size coordinates of the jobs in `jobs`.
    pub fn third_sum(&self, jobs: &[usize]) -> Rational {
        jobs.iter().map(|&j| self.lrs.jobs[j].size[2].clone()).sum()
    }

    pub fn total_third(&self) -> Rational {
        self.lrs.jobs.iter().map(|j| j.size[2].clone()).sum()
    }
}

/// The intended schedule for a one-in-three assignment.
pub fn schedule_from_assignment(g: &GadgetInstance3, a: &Assignment) -> Result<Schedule> {
    if a.len() != g.cnf.vars() || !check_one_in_three(&g.cnf, a) {
        return Err(Error::Witness("assignment is not one-in-three satisfying".into()));
    }
    let mut free: BTreeMap<(u8, usize, usize, bool), Vec<usize>> = BTreeMap::new();
    for (j, kind) in g.kind_of_job.iter().enumerate() {
        let key = match *kind {
            JobKind::Variable { i, k, truth } => (0, i, k, truth),
            JobKind::TruthAssignment { letter, i, truth } => (1, i, letter as usize, truth),
            JobKind::Clause { j: c, truth } => (2, c, 0, truth),
            JobKind::Dummy { truth } => (3, 0, 0, truth),
            JobKind::Huge { .. } => continue,
        };
        free.entry(key).or_default().push(j);
    }
    let mut take = |key: (u8, usize, usize, bool)| -> Result<usize> {
        free.get_mut(&key)
            .and_then(|v| (!v.is_empty()).then(|| v.remove(0)))
            .ok_or_else(|| Error::Witness(format!("no free job for {key:?}")))
    };

    let mut machine_of = vec![usize::MAX; g.lrs.jobs.len()];
    for (mi, &label) in g.label_of_machine.iter().enumerate() {
        match label {
            MachineLabel::Truth { i, k } => {
                // false: machines 1,2 take true jobs; true: machines 3,4 do
                let truth = (k <= 2) != a.value(i);
                machine_of[take((0, i, k, truth))?] = mi;
                for l in Letter::pair_of(k) {
                    machine_of[take((1, i, l as usize, truth))?] = mi;
                }
            }
            MachineLabel::Clause { i, k, j } => {
                let lit_true = (k <= 2) == a.value(i);
                machine_of[take((0, i, k, lit_true))?] = mi;
                machine_of[take((2, j, 0, lit_true))?] = mi;
            }
            MachineLabel::Dummy { i, k } => {
                let truth = (k <= 2) == a.value(i);
                machine_of[take((0, i, k, truth))?] = mi;
                machine_of[take((3, 0, 0, truth))?] = mi;
            }
        }
    }
    for (j, kind) in g.kind_of_job.iter().enumerate() {
        if let JobKind::Huge { machine } = kind {
            machine_of[j] = *machine;
        }
    }
    if let Some(j) = machine_of.iter().position(|&m| m == usize::MAX) {
        return Err(Error::Witness(format!("job {} left unscheduled", g.lrs.jobs[j].id)));
    }
    let s = Schedule::from_indices(&g.lrs, &machine_of);

    let r = Rational::from(g.params.r);
    let mut third = vec![Rational::zero(); g.lrs.machines.len()];
    for (j, &mi) in machine_of.iter().enumerate() {
        third[mi] += &g.lrs.jobs[j].size[2];
    }
    for (mi, t) in third.iter().enumerate() {
        assert_eq!(t, &r, "third-coordinate load of {} is {t}", g.lrs.machines[mi].id);
    }
    let half = &r + &Rational::new(1, 2)?;
    for (mi, l) in loads(&g.lrs, &s)?.iter().enumerate() {
        assert!(l > &r && l < &half, "load of {} is {l}", g.lrs.machines[mi].id);
    }
    Ok(s)
}

fn lemma(name: &str, machine: &str, msg: impl fmt::Display) -> Error {
    Error::Soundness(format!("{name} fails on {machine}: {msg}"))
}

/// Replays the soundness argument on a schedule of makespan below `r + 1` and
/// reads the assignment off the truth-assignment machines.
pub fn assignment_from_schedule(g: &GadgetInstance3, s: &Schedule) -> Result<Assignment> {
    let ms = makespan(&g.lrs, s)?;
    if ms >= g.params.threshold() {
        return Err(Error::Soundness(format!("makespan {ms} is not below r+1")));
    }
    let idx = s.indices(&g.lrs)?;
    let mut on: Vec<Vec<JobKind>> = vec![Vec::new(); g.lrs.machines.len()];
    for (j, &mi) in idx.iter().enumerate() {
        on[mi].push(g.kind_of_job[j]);
    }

    for (mi, jobs) in on.iter().enumerate() {
        let id = &g.lrs.machines[mi].id;
        let label = g.label_of_machine[mi];
        let huge: Vec<usize> = jobs
            .iter()
            .filter_map(|k| match k {
                JobKind::Huge { machine } => Some(*machine),
                _ => None,
            })
            .collect();
        if huge.len() != 1 {
            return Err(lemma("one huge job per machine", id, format!("{} huge jobs", huge.len())));
        }
        if g.label_of_machine[huge[0]].class() != label.class() {
            return Err(lemma("huge-job routing", id, format!("carries the huge job of {}", g.lrs.machines[huge[0]].id)));
        }
        let count = |f: fn(&JobKind) -> bool| jobs.iter().filter(|k| f(k)).count();
        let vars = count(|k| matches!(k, JobKind::Variable { .. }));
        if vars != 1 {
            return Err(lemma("one variable job per machine", id, format!("{vars} variable jobs")));
        }
        let clause_jobs = count(|k| matches!(k, JobKind::Clause { .. }));
        let dummy_jobs = count(|k| matches!(k, JobKind::Dummy { .. }));
        let want = match label.class() {
            MachineClass::Clause => (1, 0),
            MachineClass::Dummy => (0, 1),
            MachineClass::Truth => (0, 0),
        };
        if (clause_jobs, dummy_jobs) != want {
            return Err(lemma(
                "clause/dummy placement",
                id,
                format!("{clause_jobs} clause and {dummy_jobs} dummy jobs"),
            ));
        }
        let (i, k) = label.slot();
        if huge[0] != mi {
            return Err(lemma("variable-satisfied", id, "huge job belongs to another machine"));
        }
        if !jobs.iter().any(|kd| matches!(kd, JobKind::Variable { i: a, k: b, .. } if (*a, *b) == (i, k))) {
            return Err(lemma("variable-satisfied", id, format!("variable job is not v{i}.{k}")));
        }
        let satisfied = match label {
            MachineLabel::Truth { i, k } => {
                let mut letters: Vec<Letter> = jobs
                    .iter()
                    .filter_map(|kd| match kd {
                        JobKind::TruthAssignment { letter, i: li, .. } if *li == i => Some(*letter),
                        _ => None,
                    })
                    .collect();
                letters.sort();
                jobs.len() == 4 && letters == Letter::pair_of(k)
            }
            MachineLabel::Clause { j, .. } => {
                jobs.len() == 3 && jobs.iter().any(|kd| matches!(kd, JobKind::Clause { j: c, .. } if *c == j))
            }
            MachineLabel::Dummy { .. } => jobs.len() == 3,
        };
        if !satisfied {
            return Err(lemma("satisfied", id, "jobs do not match the machine label"));
        }
        let tags: Vec<bool> = jobs.iter().filter_map(|kd| kd.truth()).collect();
        if tags.iter().any(|&t| t != tags[0]) {
            return Err(lemma("truth-benevolent", id, "mixed truth tags"));
        }
    }

    let n = g.cnf.vars();
    let mut a = Assignment::all_false(n);
    for i in 1..=n {
        let tag_on = |k: usize| -> bool {
            let mi = g
                .label_of_machine
                .iter()
                .position(|&l| l == MachineLabel::Truth { i, k })
                .expect("truth machine exists");
            on[mi].iter().find_map(|kd| kd.truth()).expect("machine carries tagged jobs")
        };
        let pattern = [tag_on(1), tag_on(2), tag_on(3), tag_on(4)];
        let value = match pattern {
            [true, true, false, false] => false,
            [false, false, true, true] => true,
            _ => {
                return Err(Error::Soundness(format!(
                    "truth-assignment machines of variable {i} show pattern {pattern:?}"
                )))
            }
        };
        a.set(i, value);
    }
    if !check_one_in_three(&g.cnf, &a) {
        return Err(Error::Soundness("extracted assignment is not one-in-three satisfying".into()));
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: Rational,
    pub relation: &'static str,
    pub rhs: Rational,
    pub holds: bool,
}

impl fmt::Display for InequalityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} {} [{}]",
            self.name,
            self.lhs,
            self.relation,
            self.rhs,
            if self.holds { "ok" } else { "FAIL" }
        )
    }
}

fn check(name: &str, lhs: i64, relation: &'static str, rhs: i64) -> InequalityCheck {
    check_q(name, Rational::from(lhs), relation, Rational::from(rhs))
}

fn check_q(name: &str, lhs: Rational, relation: &'static str, rhs: Rational) -> InequalityCheck {
    let holds = match relation {
        ">" => lhs > rhs,
        ">=" => lhs >= rhs,
        "<" => lhs < rhs,
        "=" => lhs == rhs,
        "!=" => lhs != rhs,
        _ => unreachable!("relation {relation}"),
    };
    InequalityCheck {
        name: name.to_string(),
        lhs,
        relation,
        rhs,
        holds,
    }
}

/// Total third-coordinate work for `n` variables and `m` clauses. It does not
/// depend on the polarity profiles: both dummy slots give the same huge-job sum.
pub fn total_third_work(n: usize, m: usize) -> i64 {
    let (n, m) = (n as i64, m as i64);
    let per_var_vars: i64 = (1..=4).map(|k| third_variable(k, true) + third_variable(k, false)).sum();
    let per_var_letters: i64 = Letter::ALL.iter().map(|&l| third_letter(l, true) + third_letter(l, false)).sum();
    let truth_huge = 4 * third_huge(MachineLabel::Truth { i: 1, k: 1 });
    let clause_huge = |k: usize| third_huge(MachineLabel::Clause { i: 1, k, j: 1 });
    let dummy_huge = |k: usize| third_huge(MachineLabel::Dummy { i: 1, k });
    let profile_a = clause_huge(1) + clause_huge(2) + clause_huge(3) + dummy_huge(4);
    let profile_b = clause_huge(1) + clause_huge(3) + clause_huge(4) + dummy_huge(2);
    assert_eq!(profile_a, profile_b, "huge-job sum is profile independent");
    n * (per_var_vars + per_var_letters + truth_huge + profile_a)
        + m * third_clause(true)
        + (3 * n - m) * third_clause(false)
        + (2 * n - m) * third_dummy(true)
        + (m - n) * third_dummy(false)
}

/// Every numeric fact the soundness argument relies on, evaluated exactly.
pub fn certify_inequalities3(p: &Reduce3Params, n: usize, m: usize) -> Vec<InequalityCheck> {
    let (xi, r) = (p.xi, p.r);
    let mut out = vec![
        check("xi = 8 and r = 1024 xi", r, "=", 1024 * xi),
        check("huge lower bound: 5/8r-20xi > 1/2r+1", 5 * r / 8 - 20 * xi, ">", r / 2 + 1),
    ];
    let min_huge = [
        third_huge(MachineLabel::Truth { i: 1, k: 1 }),
        (1..=4).map(|k| third_huge(MachineLabel::Clause { i: 1, k, j: 1 })).min().unwrap(),
        third_huge(MachineLabel::Dummy { i: 1, k: 4 }).min(third_huge(MachineLabel::Dummy { i: 1, k: 2 })),
    ]
    .into_iter()
    .min()
    .unwrap();
    out.push(check("smallest huge third coordinate >= 5/8r-20xi", min_huge, ">=", 5 * r / 8 - 20 * xi));
    out.push(check("two huge jobs exceed r+1", 2 * min_huge, ">", r + 1));
    out.push(check("clause on truth machine: 1/4r+7/8r > r+1", r / 4 + 7 * r / 8, ">", r + 1));
    out.push(check("clause on dummy machine: 1/4r+13/16r+20xi > r+1", r / 4 + 13 * r / 16 + 20 * xi, ">", r + 1));
    out.push(check(
        "clause on dummy machine (smaller dummy huge job): 1/4r+13/16r+12xi > r+1",
        third_clause(true) + third_huge(MachineLabel::Dummy { i: 1, k: 4 }),
        ">",
        r + 1,
    ));
    out.push(check("two clause jobs: 5/8r+20xi+1/2r > r+1", 5 * r / 8 + 20 * xi + r / 2, ">", r + 1));
    out.push(check(
        "two clause jobs with the smallest clause huge job",
        third_huge(MachineLabel::Clause { i: 1, k: 1, j: 1 }) + 2 * third_clause(true),
        ">",
        r + 1,
    ));
    out.push(check("two variable jobs: 1/4r-40xi-8 > 3/16r", r / 4 - 40 * xi - 8, ">", 3 * r / 16));
    let min_two_vars = 2 * (1..=4).map(|k| third_variable(k, false)).min().unwrap();
    out.push(check("two smallest variable jobs >= 1/4r-40xi-8", min_two_vars, ">=", r / 4 - 40 * xi - 8));
    let eight: i64 = Letter::ALL.iter().map(|&l| third_letter(l, true) + third_letter(l, false)).sum();
    out.push(check("truth-assignment total: eight jobs = 60xi+12", eight, "=", 60 * xi + 12));
    out.push(check("truth-assignment window lower: 60xi+12 >= 60xi+8", eight, ">=", 60 * xi + 8));
    out.push(check("truth-assignment window upper: 60xi+20 >= 60xi+12", 60 * xi + 20, ">=", eight));
    let base_hi: i64 = 4 * 7 * r / 8 + (1..=4).map(|k| third_variable(k, true)).sum::<i64>();
    let base_lo: i64 = 4 * 7 * r / 8 + (1..=4).map(|k| third_variable(k, false)).sum::<i64>();
    out.push(check("variable+huge on truth machines >= 4r-60xi-16", base_lo, ">=", 4 * r - 60 * xi - 16));
    out.push(check("variable+huge on truth machines <= 4r-60xi-8", 4 * r - 60 * xi - 8, ">=", base_hi));
    out.push(check("smallest truth-assignment job >= 2xi+1", third_letter(Letter::A, true), ">=", 2 * xi + 1));
    out.push(check("d-jobs exceed 16xi", third_letter(Letter::D, true), ">", 16 * xi));
    out.push(check(
        "total >= 8nr",
        total_third_work(n, m),
        ">=",
        8 * n as i64 * r,
    ));

    // Intended loads and the ±1 / ±2 truth-benevolence margins.
    for k in 1..=4 {
        let [x, y] = Letter::pair_of(k);
        let huge = third_huge(MachineLabel::Truth { i: 1, k });
        for tv in [true, false] {
            for tx in [true, false] {
                for ty in [true, false] {
                    let sum = huge + third_variable(k, tv) + third_letter(x, tx) + third_letter(y, ty);
                    let uniform = tv == tx && tx == ty;
                    let name = format!("truth machine k={k} tags {}{}{}", tag(tv), tag(tx), tag(ty));
                    out.push(check(&name, sum, if uniform { "=" } else { "!=" }, r));
                }
            }
        }
        let huge = third_huge(MachineLabel::Clause { i: 1, k, j: 1 });
        for tv in [true, false] {
            for tu in [true, false] {
                let sum = huge + third_variable(k, tv) + third_clause(tu);
                let name = format!("clause machine k={k} tags {}{}", tag(tv), tag(tu));
                out.push(check(&name, sum, if tv == tu { "=" } else { "!=" }, r));
            }
        }
    }
    for k in [2, 4] {
        let huge = third_huge(MachineLabel::Dummy { i: 1, k });
        for tv in [true, false] {
            for tp in [true, false] {
                let sum = huge + third_variable(k, tv) + third_dummy(tp);
                let name = format!("dummy machine k={k} tags {}{}", tag(tv), tag(tp));
                out.push(check(&name, sum, if tv == tp { "=" } else { "!=" }, r));
            }
        }
    }
    let five_eps = Rational::from(5) * p.epsilon.clone();
    out.push(check_q("intended excess 5 eps < 1/2", five_eps, "<", Rational::new(1, 2).expect("nonzero")));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::lrs::{load, processing_time};
    use crate::sat::{brute_force_one_in_three, tovey_one_in_three};

    fn seed(clauses: &[&[i64]], vars: usize) -> Cnf {
        let raw = Cnf::from_signed(vars, &clauses.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        tovey_one_in_three(&raw).unwrap().cnf
    }

    fn gadget(cnf: &Cnf) -> GadgetInstance3 {
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), cnf.vars()).unwrap();
        build_lrs3(cnf, &p).unwrap()
    }

    #[test]
    fn params() {
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), 3).unwrap();
        assert_eq!((p.xi, p.r, p.n_scale), (8, 8192, 16384));
        assert!(Reduce3Params::new(rat(1, 32).unwrap(), 1 << 20, 3).is_err());
        assert!(Reduce3Params::new(rat(1, 64).unwrap(), 4096, 3).is_err());
    }

    #[test]
    fn constants() {
        assert_eq!(third_letter(Letter::A, true), 17);
        assert_eq!(third_huge(MachineLabel::Dummy { i: 1, k: 2 }), 6816);
        assert_eq!(third_huge(MachineLabel::Clause { i: 1, k: 4, j: 1 }), 5216);
        assert_eq!(
            third_variable(1, true) + third_letter(Letter::A, true) + third_letter(Letter::C, true) + 7 * R / 8,
            R
        );
        assert_eq!(third_variable(3, true) + third_clause(true) + third_huge(MachineLabel::Clause { i: 1, k: 3, j: 1 }), R);
        assert_eq!(third_dummy(false) + third_variable(2, false) + third_huge(MachineLabel::Dummy { i: 1, k: 2 }), R);
    }

    #[test]
    fn tiny_seed_counts_and_vectors() {
        let g = gadget(&seed(&[&[1, 2, 3]], 3));
        assert_eq!(g.lrs.machines.len(), 24);
        assert_eq!(g.lrs.jobs.len(), 84);
        let count = |name: &str| g.kind_of_job.iter().filter(|k| k.name() == name).count();
        assert_eq!(
            [count("variable"), count("truth-assignment"), count("clause"), count("dummy"), count("huge")],
            [24, 24, 9, 3, 24]
        );
        let a = &g.lrs.jobs[g.lrs.job_idx("a2.T").unwrap()];
        let n = Rational::from(16384);
        assert_eq!(a.size, vec![Rational::zero(), &rat(1, 64).unwrap() * &n.pow_int(2).unwrap(), Rational::from(17)]);
        assert_eq!(g.total_third(), Rational::from(8 * 3 * R));
        assert_eq!(total_third_work(3, 4), 8 * 3 * R);
    }

    #[test]
    fn intended_schedule_round_trip() {
        let cnf = seed(&[&[1, 2, 3]], 3);
        let g = gadget(&cnf);
        let a = brute_force_one_in_three(&cnf).unwrap().unwrap();
        let s = schedule_from_assignment(&g, &a).unwrap();
        let t = load(&g.lrs, &s, "(v1.1,a1,c1)").unwrap();
        assert_eq!(t, Rational::from(R) + Rational::from(5) * rat(1, 64).unwrap());
        let back = assignment_from_schedule(&g, &s).unwrap();
        assert!(check_one_in_three(&cnf, &back));
        assert_eq!(back, a);
    }

    #[test]
    fn bad_assignment_rejected() {
        let cnf = seed(&[&[1, 2, 3]], 3);
        let g = gadget(&cnf);
        assert!(matches!(schedule_from_assignment(&g, &Assignment::all_false(3)), Err(Error::Witness(_))));
    }

    #[test]
    fn broken_schedules_rejected() {
        let cnf = seed(&[&[1, 2, 3]], 3);
        let g = gadget(&cnf);
        let a = brute_force_one_in_three(&cnf).unwrap().unwrap();
        let s = schedule_from_assignment(&g, &a).unwrap();
        // two clause jobs on one clause machine
        let mut two = s.clone();
        let host = two.assignment["u1.T"].clone();
        two.assignment.insert("u1.F1".into(), host);
        assert!(assignment_from_schedule(&g, &two).is_err());
        // swapping a true and a false variable job keeps job counts but breaks loads
        let mut mixed = s.clone();
        let (x, y) = (mixed.assignment["v1.1.T"].clone(), mixed.assignment["v1.1.F"].clone());
        mixed.assignment.insert("v1.1.T".into(), y);
        mixed.assignment.insert("v1.1.F".into(), x);
        assert!(matches!(assignment_from_schedule(&g, &mixed), Err(Error::Soundness(_))));
    }

    #[test]
    fn observation_holds_on_every_pair() {
        let g = gadget(&seed(&[&[1, 2, 3]], 3));
        for m in &g.lrs.machines {
            for j in &g.lrs.jobs {
                let t = processing_time(&g.lrs, &m.id, &j.id).unwrap();
                assert!(t >= j.size[2]);
            }
        }
    }

    #[test]
    fn inequality_suite_passes() {
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), 3).unwrap();
        let rep = certify_inequalities3(&p, 3, 4);
        for c in &rep {
            assert!(c.holds, "{c}");
        }
        let find = |name: &str| rep.iter().find(|c| c.name.starts_with(name)).unwrap().clone();
        assert_eq!(find("huge lower bound").lhs, Rational::from(4960));
        assert_eq!(find("huge lower bound").rhs, Rational::from(4097));
        assert_eq!(find("truth-assignment total").lhs, Rational::from(492));
        assert_eq!(find("total >= 8nr").rhs, Rational::from(196608));
    }

    #[test]
    fn profile_violation_rejected() {
        let raw = Cnf::from_signed(1, &[vec![1, 1, 1]]).unwrap();
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), 1).unwrap();
        assert!(build_lrs3(&raw, &p).is_err());
    }
}
