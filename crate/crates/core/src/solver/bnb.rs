//! Generic branch-and-bound: jobs with identical time columns form classes,
//! copies of a class go to nondecreasing machine indices, empty machines with
//! identical rows are interchangeable, and the next class is the one with the
//! fewest machines it still fits on.

use super::structure::Deductions;
use super::{bounds, Search, Step};
use crate::exact::Rational;
use crate::lrs::LrsInstance;

pub(crate) struct BnbSearch {
    machines: usize,
    classes: Vec<Vec<usize>>,
    /// `times[m][c]`.
    times: Vec<Vec<Rational>>,
    eligible: Vec<Vec<bool>>,
    /// Capped group of each class and `capped[g][m]`.
    group: Vec<Option<usize>>,
    capped: Vec<Vec<bool>>,
    /// Fixed-point bounds of `times`, present when the threshold is representable.
    fixed: Option<Fixed>,
    threshold: Rational,
    row_group: Vec<usize>,
    /// Static tie-break: larger minimum time first.
    rank: Vec<usize>,
}

struct Fixed {
    t: (i128, i128),
    times: Vec<Vec<(i128, i128)>>,
    min_lo: Vec<i128>,
}

#[derive(Clone)]
pub(crate) struct BState {
    machine_of: Vec<usize>,
    lo: Vec<i128>,
    hi: Vec<i128>,
    used: Vec<usize>,
    last: Vec<usize>,
    count: Vec<u32>,
    /// `in_group[g * machines + m]`.
    in_group: Vec<u32>,
}

/// Jobs with identical time columns and identical `extra` keys.
pub(crate) fn job_classes<K: PartialEq>(inst: &LrsInstance, extra: impl Fn(usize) -> K) -> Vec<Vec<usize>> {
    let m = inst.machines.len();
    let mut classes: Vec<(Vec<Rational>, K, Vec<usize>)> = Vec::new();
    for j in 0..inst.jobs.len() {
        let col: Vec<Rational> = (0..m).map(|i| inst.time(i, j)).collect();
        let key = extra(j);
        match classes.iter_mut().find(|(c, k, _)| c == &col && k == &key) {
            Some((_, _, jobs)) => jobs.push(j),
            None => classes.push((col, key, vec![j])),
        }
    }
    classes.into_iter().map(|(_, _, jobs)| jobs).collect()
}

/// Machines that are interchangeable while empty: same times, same
/// eligibility, same caps. Each maps to the lowest such index.
fn row_groups(times: &[Vec<Rational>], eligible: &[Vec<bool>], capped: &[Vec<bool>]) -> Vec<usize> {
    let same = |a: usize, b: usize| {
        times[a] == times[b] && eligible[a] == eligible[b] && capped.iter().all(|g| g[a] == g[b])
    };
    (0..times.len())
        .map(|m| (0..=m).find(|&k| same(k, m)).expect("m matches itself"))
        .collect()
}

impl BnbSearch {
    pub(crate) fn new(inst: &LrsInstance, threshold: &Rational, ded: &Deductions) -> Self {
        let machines = inst.machines.len();
        let classes = job_classes(inst, |j| {
            (ded.group_of[j], (0..machines).map(|m| ded.allows(m, j)).collect::<Vec<bool>>())
        });
        let times: Vec<Vec<Rational>> = (0..machines)
            .map(|m| classes.iter().map(|c| inst.time(m, c[0])).collect())
            .collect();
        let eligible: Vec<Vec<bool>> = times
            .iter()
            .enumerate()
            .map(|(m, row)| row.iter().zip(&classes).map(|(t, jobs)| t < threshold && ded.allows(m, jobs[0])).collect())
            .collect();
        let group = classes.iter().map(|jobs| ded.group_of[jobs[0]]).collect();
        let fixed = bounds(threshold).map(|t| {
            let tb: Vec<Vec<(i128, i128)>> = times
                .iter()
                .zip(&eligible)
                .map(|(row, el)| {
                    row.iter()
                        .zip(el)
                        .map(|(x, &ok)| if ok { bounds(x).expect("below a representable threshold") } else { (0, 0) })
                        .collect()
                })
                .collect();
            let min_lo = (0..classes.len())
                .map(|c| (0..machines).filter(|&m| eligible[m][c]).map(|m| tb[m][c].0).min().unwrap_or(i128::MAX))
                .collect();
            Fixed { t, times: tb, min_lo }
        });
        let row_group = row_groups(&times, &eligible, &ded.capped);
        let min_time = |c: usize| (0..machines).map(|m| &times[m][c]).min().cloned().unwrap_or_else(Rational::zero);
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| min_time(b).cmp(&min_time(a)).then(a.cmp(&b)));
        let mut rank = vec![0; classes.len()];
        for (r, &c) in order.iter().enumerate() {
            rank[c] = r;
        }
        BnbSearch {
            machines,
            classes,
            times,
            eligible,
            group,
            capped: ded.capped.clone(),
            fixed,
            threshold: threshold.clone(),
            row_group,
            rank,
        }
    }

    fn exact_load(&self, s: &BState, m: usize) -> Rational {
        let mut total = Rational::zero();
        for (c, jobs) in self.classes.iter().enumerate() {
            for &j in &jobs[..s.used[c]] {
                if s.machine_of[j] == m {
                    total += &self.times[m][c];
                }
            }
        }
        total
    }

    /// New fixed-point load interval if class `c` fits strictly on `m`.
    fn fits(&self, s: &BState, m: usize, c: usize) -> Option<(i128, i128)> {
        if !self.eligible[m][c] {
            return None;
        }
        if let Some(g) = self.group[c] {
            if self.capped[g][m] && s.in_group[g * self.machines + m] > 0 {
                return None;
            }
        }
        if let Some(f) = &self.fixed {
            let (tlo, thi) = f.times[m][c];
            let (lo, hi) = (s.lo[m].saturating_add(tlo), s.hi[m].saturating_add(thi));
            if hi < f.t.0 {
                return Some((lo, hi));
            }
            if lo >= f.t.1 {
                return None;
            }
            return (&self.exact_load(s, m) + &self.times[m][c] < self.threshold).then_some((lo, hi));
        }
        (&self.exact_load(s, m) + &self.times[m][c] < self.threshold).then_some((0, 0))
    }

    fn bound_prunes(&self, s: &BState) -> bool {
        let Some(f) = &self.fixed else { return false };
        let mut need: i128 = s.lo.iter().fold(0i128, |a, &x| a.saturating_add(x));
        for (c, jobs) in self.classes.iter().enumerate() {
            let left = (jobs.len() - s.used[c]) as i128;
            need = need.saturating_add(f.min_lo[c].saturating_mul(left));
        }
        need >= f.t.1.saturating_mul(self.machines as i128)
    }
}

impl Search for BnbSearch {
    type State = BState;

    fn root(&self) -> Option<BState> {
        let jobs: usize = self.classes.iter().map(Vec::len).sum();
        let s = BState {
            machine_of: vec![usize::MAX; jobs],
            lo: vec![0; self.machines],
            hi: vec![0; self.machines],
            used: vec![0; self.classes.len()],
            last: vec![0; self.classes.len()],
            count: vec![0; self.machines],
            in_group: vec![0; self.capped.len() * self.machines],
        };
        (!self.bound_prunes(&s)).then_some(s)
    }

    fn step(&self, s: &BState) -> Step<BState> {
        let mut pick: Option<(usize, Vec<(usize, i128, i128)>)> = None;
        for c in 0..self.classes.len() {
            if s.used[c] == self.classes[c].len() {
                continue;
            }
            let mut cands: Vec<(usize, i128, i128)> = Vec::new();
            for m in s.last[c]..self.machines {
                if s.count[m] == 0
                    && cands
                        .iter()
                        .any(|&(k, _, _)| s.count[k] == 0 && self.row_group[k] == self.row_group[m])
                {
                    continue;
                }
                if let Some((lo, hi)) = self.fits(s, m, c) {
                    cands.push((m, lo, hi));
                }
            }
            if cands.is_empty() {
                return Step::Branch(Vec::new());
            }
            let better = match &pick {
                None => true,
                Some((pc, pv)) => {
                    cands.len() < pv.len() || (cands.len() == pv.len() && self.rank[c] < self.rank[*pc])
                }
            };
            if better {
                pick = Some((c, cands));
            }
        }
        let Some((c, mut cands)) = pick else {
            return Step::Done(s.machine_of.clone());
        };
        cands.sort_by_key(|&(m, _, hi)| (hi, m));
        let job = self.classes[c][s.used[c]];
        let children = cands
            .into_iter()
            .filter_map(|(m, lo, hi)| {
                let mut t = s.clone();
                t.machine_of[job] = m;
                t.lo[m] = lo;
                t.hi[m] = hi;
                t.used[c] += 1;
                t.last[c] = m;
                t.count[m] += 1;
                if let Some(g) = self.group[c] {
                    t.in_group[g * self.machines + m] += 1;
                }
                (!self.bound_prunes(&t)).then_some(t)
            })
            .collect();
        Step::Branch(children)
    }
}
