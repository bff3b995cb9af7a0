//! Deductions for rank-3 gadgets, read off the instance's `meta` and each
//! justified by an exact check on the instance itself before it prunes.
//!
//! The checks need a coordinate `c` with speed 1 on every machine and all
//! entries nonnegative, so `size_c(j)` is a lower bound on the time of `j`
//! anywhere. Rules, in order:
//!
//! 1. one huge job per machine: `2 · min size_c(huge) ≥ T`;
//! 2. huge-class routing: per machine class (dummy, clause, truth-assignment)
//!    the huge jobs homed there are eligible on exactly as many free machines
//!    as there are of them, so they take those machines;
//! 3. clause jobs stay off machines where the routed huge job plus a clause
//!    job already reach `T`, and at most one sits on a clause machine;
//! 4. at most one variable job per machine where the forced huge (and clause)
//!    jobs plus two variable jobs reach `T`.

use serde_json::Value;

use crate::exact::Rational;
use crate::lrs::LrsInstance;

#[derive(Clone, Debug, Default)]
pub struct Deductions {
    /// `allowed[m][j]`; empty when no rule fired.
    pub(crate) allowed: Vec<Vec<bool>>,
    /// Per job, the capped group it belongs to.
    pub(crate) group_of: Vec<Option<usize>>,
    /// `capped[g][m]`: at most one job of group `g` on machine `m`.
    pub(crate) capped: Vec<Vec<bool>>,
    /// A pigeonhole count already shows infeasibility.
    pub(crate) infeasible: bool,
    pub fired: Vec<String>,
}

const CLASSES: [&str; 3] = ["dummy", "clause", "truth-assignment"];

fn str_map<'a>(inst: &'a LrsInstance, key: &str) -> Option<&'a serde_json::Map<String, Value>> {
    inst.meta.get(key)?.as_object()
}

fn class_from_label(label: &str) -> &'static str {
    if label.contains("phi") {
        "dummy"
    } else if label.matches(',').count() == 1 {
        "clause"
    } else {
        "truth-assignment"
    }
}

impl Deductions {
    pub(crate) fn allows(&self, m: usize, j: usize) -> bool {
        self.allowed.is_empty() || self.allowed[m][j]
    }

    pub fn derive(inst: &LrsInstance, threshold: &Rational) -> Deductions {
        let (mcount, jcount) = (inst.machines.len(), inst.jobs.len());
        let mut d = Deductions {
            group_of: vec![None; jcount],
            ..Deductions::default()
        };
        let Some(kinds) = str_map(inst, "kind_of_job") else { return d };
        let kind: Vec<&str> = inst
            .jobs
            .iter()
            .map(|j| kinds.get(&j.id).and_then(Value::as_str).unwrap_or(""))
            .collect();
        let class: Vec<&str> = match (str_map(inst, "class_of_machine"), str_map(inst, "label_of_machine")) {
            (Some(cm), _) => inst.machines.iter().map(|m| cm.get(&m.id).and_then(Value::as_str).unwrap_or("")).collect(),
            (None, Some(lm)) => inst
                .machines
                .iter()
                .map(|m| lm.get(&m.id).and_then(Value::as_str).map(class_from_label).unwrap_or(""))
                .collect(),
            _ => return d,
        };
        if !inst.all_nonnegative() {
            return d;
        }
        let Some(c) = (0..inst.d).find(|&c| inst.machines.iter().all(|m| m.speed[c] == 1)) else {
            return d;
        };
        let lb = |j: usize| &inst.jobs[j].size[c];
        let of_kind = |k: &str| -> Vec<usize> { (0..jcount).filter(|&j| kind[j] == k).collect() };
        let min_lb = |js: &[usize]| js.iter().map(|&j| lb(j)).min().cloned();
        let eligible = |m: usize, j: usize| &inst.time(m, j) < threshold;
        d.allowed = vec![vec![true; jcount]; mcount];

        // 1. one huge job per machine
        let huge = of_kind("huge");
        let Some(huge_min) = min_lb(&huge) else { return d };
        let two = &huge_min + &huge_min;
        if &two < threshold {
            return d;
        }
        d.fired.push(format!("one-huge-per-machine: 2*{huge_min} >= {threshold}"));
        d.add_group(&huge, vec![true; mcount]);
        if huge.len() > mcount {
            d.infeasible = true;
            d.fired.push(format!("{} huge jobs on {mcount} machines", huge.len()));
            return d;
        }
        if huge.len() < mcount {
            return d;
        }

        // 2. huge-class routing
        let Some(home) = str_map(inst, "home_of_huge") else { return d };
        let home_class = |j: usize| -> &str {
            home.get(&inst.jobs[j].id)
                .and_then(Value::as_str)
                .and_then(|mid| inst.machine_idx(mid).ok())
                .map(|mi| class[mi])
                .unwrap_or("")
        };
        let mut reserved = vec![false; mcount];
        let mut routed = 0;
        for cls in CLASSES {
            let set: Vec<usize> = huge.iter().copied().filter(|&j| home_class(j) == cls).collect();
            let reach: Vec<usize> = (0..mcount)
                .filter(|&m| !reserved[m] && set.iter().any(|&j| eligible(m, j)))
                .collect();
            if reach.len() < set.len() {
                d.infeasible = true;
                d.fired.push(format!("huge-class routing: {} {cls} huge jobs fit on {} machines", set.len(), reach.len()));
                return d;
            }
            if reach.len() > set.len() {
                break;
            }
            for &m in &reach {
                reserved[m] = true;
                for &j in &huge {
                    if !set.contains(&j) {
                        d.allowed[m][j] = false;
                    }
                }
            }
            for &j in &set {
                for m in 0..mcount {
                    if !reach.contains(&m) {
                        d.allowed[m][j] = false;
                    }
                }
            }
            routed += set.len();
            d.fired.push(format!("huge-class routing: {} {cls} huge jobs take {} machines", set.len(), reach.len()));
        }
        if routed != mcount {
            return d;
        }
        // smallest huge job each machine can still receive
        let min_huge: Vec<Rational> = (0..mcount)
            .map(|m| {
                huge.iter()
                    .filter(|&&j| d.allowed[m][j] && eligible(m, j))
                    .map(|&j| lb(j).clone())
                    .min()
                    .unwrap_or_else(|| threshold.clone())
            })
            .collect();

        // 3. clause jobs
        let clause = of_kind("clause");
        let mut clause_floor = vec![Rational::zero(); mcount];
        if let Some(cmin) = min_lb(&clause) {
            let mut off = 0;
            for m in 0..mcount {
                if class[m] != "clause" && &(&min_huge[m] + &cmin) >= threshold {
                    for &j in &clause {
                        d.allowed[m][j] = false;
                    }
                    off += 1;
                }
            }
            if off > 0 {
                d.fired.push(format!("clause jobs barred from {off} non-clause machines"));
            }
            let cm: Vec<usize> = (0..mcount).filter(|&m| class[m] == "clause").collect();
            let capped: Vec<bool> = (0..mcount)
                .map(|m| class[m] == "clause" && &(&min_huge[m] + &(&cmin + &cmin)) >= threshold)
                .collect();
            let all_capped = cm.iter().all(|&m| capped[m]);
            if cm.iter().any(|&m| capped[m]) {
                d.fired.push(format!(
                    "at-most-one-clause-job on {} clause machines",
                    cm.iter().filter(|&&m| capped[m]).count()
                ));
                d.add_group(&clause, capped);
            }
            // every clause job confined to clause machines, one each, and as
            // many jobs as machines: each clause machine carries exactly one
            let confined = clause.iter().all(|&j| (0..mcount).all(|m| class[m] == "clause" || !d.allowed[m][j]));
            if all_capped && confined {
                if clause.len() > cm.len() {
                    d.infeasible = true;
                    return d;
                }
                if clause.len() == cm.len() {
                    for &m in &cm {
                        clause_floor[m] = cmin.clone();
                    }
                }
            }
        }

        // 4. variable jobs
        let var = of_kind("variable");
        if let Some(vmin) = min_lb(&var) {
            let capped: Vec<bool> = (0..mcount)
                .map(|m| &(&(&min_huge[m] + &clause_floor[m]) + &(&vmin + &vmin)) >= threshold)
                .collect();
            let n = capped.iter().filter(|&&x| x).count();
            if n > 0 {
                d.fired.push(format!("one-variable-job-per-machine on {n} machines"));
                d.add_group(&var, capped);
            }
        }
        d
    }

    fn add_group(&mut self, jobs: &[usize], capped: Vec<bool>) {
        let g = self.capped.len();
        for &j in jobs {
            self.group_of[j] = Some(g);
        }
        self.capped.push(capped);
    }

    pub(crate) fn none(jobs: usize) -> Deductions {
        Deductions {
            group_of: vec![None; jobs],
            ..Deductions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::reduce3::{build_lrs3, Reduce3Params};
    use crate::sat::{tovey_one_in_three, Cnf};

    #[test]
    fn all_rules_fire_on_rank3_gadget() {
        let raw = Cnf::from_signed(3, &[vec![1, 2, 3]]).unwrap();
        let cnf = tovey_one_in_three(&raw).unwrap().cnf;
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), cnf.vars()).unwrap();
        let g = build_lrs3(&cnf, &p).unwrap();
        let d = Deductions::derive(&g.lrs, &Rational::from(8193));
        assert!(!d.infeasible);
        let text = d.fired.join("\n");
        for needle in [
            "one-huge-per-machine",
            "3 dummy huge jobs take 3 machines",
            "9 clause huge jobs take 9 machines",
            "12 truth-assignment huge jobs take 12 machines",
            "clause jobs barred from 15",
            "at-most-one-clause-job on 9",
            "one-variable-job-per-machine on 24",
        ] {
            assert!(text.contains(needle), "{needle} missing from\n{text}");
        }
        // every huge job is routed to its own class
        let h = g.lrs.job_idx("H(v1.1,a1,c1)").unwrap();
        let dummy = g.lrs.machines.iter().position(|m| m.id.contains("phi")).unwrap();
        assert!(!d.allows(dummy, h));
    }

    #[test]
    fn rules_stay_silent_without_meta_or_at_large_thresholds() {
        let raw = Cnf::from_signed(3, &[vec![1, 2, 3]]).unwrap();
        let cnf = tovey_one_in_three(&raw).unwrap().cnf;
        let p = Reduce3Params::for_size(rat(1, 64).unwrap(), cnf.vars()).unwrap();
        let mut g = build_lrs3(&cnf, &p).unwrap();
        // at a huge threshold two huge jobs fit together: nothing may fire
        let d = Deductions::derive(&g.lrs, &Rational::from(20000));
        assert!(d.fired.is_empty());
        g.lrs.meta.clear();
        assert!(Deductions::derive(&g.lrs, &Rational::from(8193)).fired.is_empty());
    }
}
