//! Exact-fill search.
//!
//! Guard: every entry is nonnegative, the threshold `T` is an integer, and
//! some coordinate `c` has speed 1 on every machine and integer sizes. Then
//! the `c`-part of a machine's load is an integer at most its load, so below
//! `T` it is at most `R = T - 1`. If the `c`-parts of all jobs sum to at least
//! `#machines · R`, every machine must carry exactly `R` of it (or nothing
//! works), and the rest of its load, the excess, must stay below 1.
//!
//! The search fills one machine at a time, the one with the fewest eligible
//! jobs first, enumerating every multiset of job classes that hits `R`
//! exactly. After each fill every other machine must still be able to reach
//! `R` with what is left.

use super::bnb::job_classes;
use super::structure::Deductions;
use super::{bounds, Search, Step};
use crate::exact::Rational;
use crate::lrs::LrsInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FillGuard {
    pub coord: usize,
    pub target: usize,
    /// Total `c`-work exceeds `#machines · R`: trivially infeasible.
    pub overfull: bool,
}

/// Target sums above this are left to the generic search.
const MAX_TARGET: usize = 1 << 20;

impl FillGuard {
    pub fn check(inst: &LrsInstance, threshold: &Rational) -> Option<FillGuard> {
        if !threshold.is_integer() || !inst.all_nonnegative() || inst.machines.is_empty() {
            return None;
        }
        let target = usize::try_from(threshold.to_i64()? - 1).ok().filter(|&r| r <= MAX_TARGET)?;
        let coord = (0..inst.d).find(|&c| {
            inst.machines.iter().all(|m| m.speed[c] == 1) && inst.jobs.iter().all(|j| j.size[c].is_integer())
        })?;
        let total: Rational = inst.jobs.iter().map(|j| j.size[coord].clone()).sum();
        let need = Rational::from((inst.machines.len() * target) as i64);
        (total >= need).then_some(FillGuard {
            coord,
            target,
            overfull: total > need,
        })
    }
}

const ONE: i128 = 1 << super::FRAC_BITS;

pub(crate) struct FillSearch {
    guard: FillGuard,
    machines: usize,
    classes: Vec<Vec<usize>>,
    weight: Vec<usize>,
    eligible: Vec<Vec<bool>>,
    /// `excess[m][c]`, exact, and its fixed-point bounds.
    excess: Vec<Vec<Rational>>,
    excess_fixed: Vec<Vec<(i128, i128)>>,
    group: Vec<Option<usize>>,
    capped: Vec<Vec<bool>>,
}

#[derive(Clone)]
pub(crate) struct FState {
    left: Vec<usize>,
    filled: Vec<bool>,
    machine_of: Vec<usize>,
}

type Bits = Vec<u64>;

fn shifted_or(acc: &mut Bits, src: &Bits, by: usize, len: usize) {
    let (words, bits) = (by / 64, by % 64);
    for i in (words..acc.len()).rev() {
        let lo = src[i - words] << bits;
        let hi = if bits > 0 && i > words { src[i - words - 1] >> (64 - bits) } else { 0 };
        acc[i] |= lo | hi;
    }
    let extra = acc.len() * 64 - len;
    if extra > 0 {
        let last = acc.len() - 1;
        acc[last] &= u64::MAX >> extra;
    }
}

fn has(bits: &Bits, x: usize) -> bool {
    bits[x / 64] >> (x % 64) & 1 == 1
}

impl FillSearch {
    pub(crate) fn new(inst: &LrsInstance, guard: FillGuard, ded: &Deductions) -> Self {
        let c = guard.coord;
        let machines = inst.machines.len();
        let classes = job_classes(inst, |j| {
            (
                inst.jobs[j].size[c].clone(),
                ded.group_of[j],
                (0..machines).map(|m| ded.allows(m, j)).collect::<Vec<bool>>(),
            )
        });
        let weight: Vec<usize> = classes
            .iter()
            .map(|jobs| {
                inst.jobs[jobs[0]].size[c]
                    .to_i64()
                    .and_then(|w| usize::try_from(w).ok())
                    .unwrap_or(usize::MAX)
            })
            .collect();
        let mut excess = Vec::with_capacity(machines);
        let mut excess_fixed = Vec::with_capacity(machines);
        let mut eligible = Vec::with_capacity(machines);
        for m in 0..machines {
            let row: Vec<Rational> = classes.iter().map(|jobs| inst.time(m, jobs[0])).collect();
            let ex: Vec<Rational> = row
                .iter()
                .zip(&classes)
                .map(|(t, jobs)| t - &inst.jobs[jobs[0]].size[c])
                .collect();
            let el: Vec<bool> = ex
                .iter()
                .zip(&weight)
                .zip(&classes)
                .map(|((e, &w), jobs)| w <= guard.target && e < &Rational::one() && ded.allows(m, jobs[0]))
                .collect();
            excess_fixed.push(
                ex.iter()
                    .zip(&el)
                    .map(|(e, &ok)| if ok { bounds(e).expect("excess below 1") } else { (ONE, ONE) })
                    .collect(),
            );
            excess.push(ex);
            eligible.push(el);
        }
        FillSearch {
            group: classes.iter().map(|jobs| ded.group_of[jobs[0]]).collect(),
            capped: ded.capped.clone(),
            guard,
            machines,
            classes,
            weight,
            eligible,
            excess,
            excess_fixed,
        }
    }

    fn words(&self) -> usize {
        self.guard.target / 64 + 1
    }

    /// Sums reachable on `m` from the classes `cs` with the multiplicities in `left`.
    fn reach(&self, cs: &[usize], left: &[usize]) -> Bits {
        let len = self.guard.target + 1;
        let mut acc = vec![0u64; self.words()];
        acc[0] = 1;
        for &c in cs {
            let w = self.weight[c];
            if w == 0 {
                continue;
            }
            let base = acc.clone();
            let mut k = 1;
            while k <= left[c] && k * w <= self.guard.target {
                shifted_or(&mut acc, &base, k * w, len);
                k += 1;
            }
        }
        acc
    }

    fn can_reach(&self, s: &FState, m: usize) -> bool {
        let cs: Vec<usize> = (0..self.classes.len()).filter(|&c| s.left[c] > 0 && self.eligible[m][c]).collect();
        has(&self.reach(&cs, &s.left), self.guard.target)
    }

    fn excess_ok(&self, m: usize, chosen: &[(usize, usize)], lo: i128, hi: i128) -> bool {
        if hi < ONE {
            return true;
        }
        if lo >= ONE {
            return false;
        }
        let mut total = Rational::zero();
        for &(c, k) in chosen {
            for _ in 0..k {
                total += &self.excess[m][c];
            }
        }
        total < Rational::one()
    }

    /// All multisets of classes on `m` with weight exactly `R` and excess below 1.
    fn fillings(&self, s: &FState, m: usize) -> Vec<Vec<(usize, usize)>> {
        let mut cs: Vec<usize> = (0..self.classes.len()).filter(|&c| s.left[c] > 0 && self.eligible[m][c]).collect();
        cs.sort_by(|&a, &b| self.weight[b].cmp(&self.weight[a]).then(a.cmp(&b)));
        // suffix[i]: sums reachable with cs[i..]
        let mut suffix: Vec<Bits> = Vec::with_capacity(cs.len() + 1);
        for i in (0..=cs.len()).rev() {
            suffix.push(self.reach(&cs[i..], &s.left));
        }
        suffix.reverse();
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        let mut used = vec![0usize; self.capped.len()];
        self.enumerate(m, &cs, &suffix, &s.left, 0, self.guard.target, (0, 0), &mut used, &mut chosen, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        m: usize,
        cs: &[usize],
        suffix: &[Bits],
        left: &[usize],
        i: usize,
        need: usize,
        ex: (i128, i128),
        used: &mut Vec<usize>,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == cs.len() {
            if need == 0 {
                out.push(chosen.clone());
            }
            return;
        }
        let c = cs[i];
        let w = self.weight[c];
        let (elo, ehi) = self.excess_fixed[m][c];
        let mut max_k = need.checked_div(w).map_or(left[c], |k| left[c].min(k));
        let capped = self.group[c].filter(|&g| self.capped[g][m]);
        if let Some(g) = capped {
            max_k = max_k.min(1 - used[g].min(1));
        }
        for k in (0..=max_k).rev() {
            let rest = need - k * w;
            if !has(&suffix[i + 1], rest) {
                continue;
            }
            let kk = k as i128;
            let next = (ex.0.saturating_add(elo.saturating_mul(kk)), ex.1.saturating_add(ehi.saturating_mul(kk)));
            if k > 0 {
                chosen.push((c, k));
                if let Some(g) = capped {
                    used[g] += k;
                }
            }
            if k == 0 || self.excess_ok(m, chosen, next.0, next.1) {
                self.enumerate(m, cs, suffix, left, i + 1, rest, next, used, chosen, out);
            }
            if k > 0 {
                chosen.pop();
                if let Some(g) = capped {
                    used[g] -= k;
                }
            }
        }
    }
}

impl Search for FillSearch {
    type State = FState;

    fn root(&self) -> Option<FState> {
        if self.guard.overfull {
            return None;
        }
        let jobs: usize = self.classes.iter().map(Vec::len).sum();
        let s = FState {
            left: self.classes.iter().map(Vec::len).collect(),
            filled: vec![false; self.machines],
            machine_of: vec![usize::MAX; jobs],
        };
        (0..self.machines).all(|m| self.can_reach(&s, m)).then_some(s)
    }

    fn step(&self, s: &FState) -> Step<FState> {
        let open: Vec<usize> = (0..self.machines).filter(|&m| !s.filled[m]).collect();
        if open.is_empty() {
            assert!(s.left.iter().all(|&k| k == 0), "exact fill leaves no job behind");
            return Step::Done(s.machine_of.clone());
        }
        let eligible_count = |m: usize| -> usize {
            (0..self.classes.len()).filter(|&c| self.eligible[m][c]).map(|c| s.left[c]).sum()
        };
        let m = *open.iter().min_by_key(|&&m| (eligible_count(m), m)).expect("open is nonempty");
        let mut children = Vec::new();
        for filling in self.fillings(s, m) {
            let mut t = s.clone();
            t.filled[m] = true;
            for &(c, k) in &filling {
                let start = self.classes[c].len() - t.left[c];
                for &j in &self.classes[c][start..start + k] {
                    t.machine_of[j] = m;
                }
                t.left[c] -= k;
            }
            if open.iter().all(|&k| k == m || self.can_reach(&t, k)) {
                children.push(t);
            }
        }
        Step::Branch(children)
    }
}
