//! Exact makespan decision and optimisation.
//!
//! `decide(inst, T)` asks whether some schedule has makespan strictly below
//! `T`. Both search strategies share a driver that expands the tree to a fixed
//! frontier, independent of the worker count, and then explores the frontier
//! in parallel. Each frontier node gets an equal slice of the node budget and
//! the lowest-index feasible node wins, so the answer does not depend on
//! `workers` unless the wall-clock limit is hit.

mod bnb;
mod fill;
mod structure;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{structural, Error, Result};
use crate::exact::Rational;
use crate::lrs::{makespan, LrsInstance, Schedule};

pub use fill::FillGuard;
pub use structure::Deductions;

/// Fractional bits of the fixed-point pre-filter.
pub(crate) const FRAC_BITS: u32 = 64;

/// Frontier size the driver expands to before going parallel.
const FRONTIER: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SearchMode {
    Generic,
    StructureAware,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Feasible,
    Infeasible,
    BudgetExceeded,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Feasible => "FEASIBLE",
            Status::Infeasible => "INFEASIBLE",
            Status::BudgetExceeded => "BUDGET_EXCEEDED",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveBudget {
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for SolveBudget {
    fn default() -> Self {
        SolveBudget {
            max_nodes: 10_000_000,
            max_time: Duration::from_secs(600),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: Status,
    pub schedule: Option<Schedule>,
    /// Nodes expanded. Varies with `workers` because of early cancellation.
    pub nodes: u64,
    /// Which strategy actually ran; structure-aware mode falls back to the
    /// generic search when its guard does not hold.
    pub strategy: &'static str,
    /// Structure-aware deductions that passed their guards.
    pub deductions: Vec<String>,
}

pub(crate) enum Step<S> {
    Done(Vec<usize>),
    Branch(Vec<S>),
}

pub(crate) trait Search: Sync {
    type State: Clone + Send + Sync;
    fn root(&self) -> Option<Self::State>;
    fn step(&self, s: &Self::State) -> Step<Self::State>;
}

enum Leaf {
    Found(Vec<usize>),
    Dead,
    OutOfBudget,
}

struct Counter {
    nodes: u64,
    limit: u64,
    deadline: Instant,
}

impl Counter {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.nodes <= self.limit && (!self.nodes.is_multiple_of(256) || Instant::now() < self.deadline)
    }
}

fn dfs<S: Search>(search: &S, start: S::State, counter: &mut Counter, cancel: impl Fn() -> bool) -> Leaf {
    let mut stack = vec![start];
    while let Some(state) = stack.pop() {
        if !counter.tick() || (counter.nodes.is_multiple_of(256) && cancel()) {
            return Leaf::OutOfBudget;
        }
        match search.step(&state) {
            Step::Done(a) => return Leaf::Found(a),
            Step::Branch(children) => stack.extend(children.into_iter().rev()),
        }
    }
    Leaf::Dead
}

/// Runs `search` and returns `(status, machine_of, nodes)`.
pub(crate) fn drive<S: Search>(search: &S, budget: &SolveBudget, workers: usize) -> Result<(Status, Option<Vec<usize>>, u64)> {
    let deadline = Instant::now() + budget.max_time;
    let Some(root) = search.root() else {
        return Ok((Status::Infeasible, None, 1));
    };
    let mut nodes = 0u64;
    let mut frontier = vec![root];
    while frontier.len() < FRONTIER && !frontier.is_empty() {
        let mut next = Vec::new();
        for s in &frontier {
            nodes += 1;
            match search.step(s) {
                Step::Done(a) => return Ok((Status::Feasible, Some(a), nodes)),
                Step::Branch(children) => next.extend(children),
            }
        }
        if nodes >= budget.max_nodes {
            return Ok((Status::BudgetExceeded, None, nodes));
        }
        frontier = next;
    }
    if frontier.is_empty() {
        return Ok((Status::Infeasible, None, nodes));
    }

    let slice = (budget.max_nodes.saturating_sub(nodes) / frontier.len() as u64).max(1);
    let best = AtomicUsize::new(usize::MAX);
    let run = |(idx, state): (usize, &S::State)| -> (Leaf, u64) {
        if best.load(Ordering::Relaxed) < idx {
            return (Leaf::OutOfBudget, 0);
        }
        let mut counter = Counter {
            nodes: 0,
            limit: slice,
            deadline,
        };
        let leaf = dfs(search, state.clone(), &mut counter, || best.load(Ordering::Relaxed) < idx);
        if matches!(leaf, Leaf::Found(_)) {
            best.fetch_min(idx, Ordering::Relaxed);
        }
        (leaf, counter.nodes)
    };
    let results: Vec<(Leaf, u64)> = if workers <= 1 {
        let mut out = Vec::with_capacity(frontier.len());
        for item in frontier.iter().enumerate() {
            let r = run(item);
            let found = matches!(r.0, Leaf::Found(_));
            out.push(r);
            if found {
                break;
            }
        }
        out
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Budget(format!("thread pool: {e}")))?;
        pool.install(|| frontier.par_iter().enumerate().map(run).collect())
    };

    nodes += results.iter().map(|r| r.1).sum::<u64>();
    let mut exhausted = false;
    for (leaf, _) in results {
        match leaf {
            Leaf::Found(a) => return Ok((Status::Feasible, Some(a), nodes)),
            Leaf::OutOfBudget => exhausted = true,
            Leaf::Dead => {}
        }
    }
    let status = if exhausted { Status::BudgetExceeded } else { Status::Infeasible };
    Ok((status, None, nodes))
}

/// Is there a schedule with makespan strictly below `threshold`?
pub fn decide(
    inst: &LrsInstance,
    threshold: &Rational,
    mode: SearchMode,
    budget: &SolveBudget,
    workers: usize,
) -> Result<SolveOutcome> {
    if inst.machines.is_empty() {
        if inst.jobs.is_empty() && threshold > &Rational::zero() {
            return Ok(SolveOutcome {
                status: Status::Feasible,
                schedule: Some(Schedule::default()),
                nodes: 0,
                strategy: "generic",
                deductions: Vec::new(),
            });
        }
        return Ok(SolveOutcome {
            status: Status::Infeasible,
            schedule: None,
            nodes: 0,
            strategy: "generic",
            deductions: Vec::new(),
        });
    }
    if !inst.all_nonnegative() {
        return Err(structural("the solver needs nonnegative speeds and sizes"));
    }
    let workers = workers.max(1);
    let ded = match mode {
        SearchMode::Generic => Deductions::none(inst.jobs.len()),
        SearchMode::StructureAware => Deductions::derive(inst, threshold),
    };
    let guard = match mode {
        SearchMode::Generic => None,
        SearchMode::StructureAware => FillGuard::check(inst, threshold),
    };
    let (strategy, (status, machine_of, nodes)) = if ded.infeasible {
        ("deduction", (Status::Infeasible, None, 0))
    } else if let Some(guard) = guard {
        ("exact-fill", drive(&fill::FillSearch::new(inst, guard, &ded), budget, workers)?)
    } else {
        ("generic", drive(&bnb::BnbSearch::new(inst, threshold, &ded), budget, workers)?)
    };
    let schedule = machine_of.map(|m| Schedule::from_indices(inst, &m));
    if let Some(s) = &schedule {
        let ms = makespan(inst, s)?;
        assert!(&ms < threshold, "solver returned makespan {ms} >= {threshold}");
    }
    Ok(SolveOutcome {
        status,
        schedule,
        nodes,
        strategy,
        deductions: ded.fired,
    })
}

/// Each job in input order goes to the machine minimising its resulting load,
/// ties to the lowest machine index.
pub fn greedy(inst: &LrsInstance) -> Result<Schedule> {
    if inst.machines.is_empty() && !inst.jobs.is_empty() {
        return Err(structural("no machines to schedule on"));
    }
    let mut loads = vec![Rational::zero(); inst.machines.len()];
    let mut machine_of = Vec::with_capacity(inst.jobs.len());
    for j in 0..inst.jobs.len() {
        let mut best: Option<(usize, Rational)> = None;
        for (m, l) in loads.iter().enumerate() {
            let after = l + &inst.time(m, j);
            if best.as_ref().is_none_or(|(_, b)| &after < b) {
                best = Some((m, after));
            }
        }
        let (m, after) = best.expect("at least one machine");
        loads[m] = after;
        machine_of.push(m);
    }
    Ok(Schedule::from_indices(inst, &machine_of))
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub schedule: Schedule,
    pub makespan: Rational,
    /// False when the budget ran out before optimality was proved.
    pub optimal: bool,
    pub nodes: u64,
}

/// Minimum makespan by repeated strict decision below the incumbent, seeded
/// with the greedy schedule.
pub fn optimize(inst: &LrsInstance, budget: &SolveBudget, workers: usize) -> Result<OptimizeOutcome> {
    let start = Instant::now();
    let mut schedule = greedy(inst)?;
    let mut best = makespan(inst, &schedule)?;
    let mut nodes = 0;
    loop {
        let left = SolveBudget {
            max_nodes: budget.max_nodes.saturating_sub(nodes),
            max_time: budget.max_time.saturating_sub(start.elapsed()),
        };
        if left.max_nodes == 0 || left.max_time.is_zero() {
            return Ok(OptimizeOutcome {
                schedule,
                makespan: best,
                optimal: false,
                nodes,
            });
        }
        let out = decide(inst, &best, SearchMode::Generic, &left, workers)?;
        nodes += out.nodes;
        match out.status {
            Status::Feasible => {
                schedule = out.schedule.expect("feasible outcome has a schedule");
                best = makespan(inst, &schedule)?;
            }
            status => {
                return Ok(OptimizeOutcome {
                    schedule,
                    makespan: best,
                    optimal: status == Status::Infeasible,
                    nodes,
                })
            }
        }
    }
}

/// Interval `[lo, hi]` around `x` at `2^-FRAC_BITS` resolution.
pub(crate) fn bounds(x: &Rational) -> Option<(i128, i128)> {
    x.fixed_bounds(FRAC_BITS)
}
