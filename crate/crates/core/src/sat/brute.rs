//! Exhaustive oracles. Assignments are enumerated with variable 1 as the most
//! significant bit and false before true, so the first hit is the
//! lexicographically smallest one. Subtrees below a partial assignment that
//! already violates a fully assigned clause are skipped; this never changes
//! the answer, only how many leaves are visited.

use super::{Assignment, Cnf, Lit};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_VAR_LIMIT: usize = 24;

pub fn brute_force_sat(cnf: &Cnf) -> Result<Option<Assignment>> {
    brute_force_sat_limited(cnf, BRUTE_FORCE_VAR_LIMIT)
}

pub fn brute_force_sat_limited(cnf: &Cnf, max_vars: usize) -> Result<Option<Assignment>> {
    enumerate(cnf, max_vars, |c, v| c.iter().any(|l| l.eval_raw(v)))
}

/// Every clause must contain exactly one true literal occurrence.
pub fn brute_force_one_in_three(cnf: &Cnf) -> Result<Option<Assignment>> {
    brute_force_one_in_three_limited(cnf, BRUTE_FORCE_VAR_LIMIT)
}

pub fn brute_force_one_in_three_limited(cnf: &Cnf, max_vars: usize) -> Result<Option<Assignment>> {
    enumerate(cnf, max_vars, exactly_one)
}

pub fn check_one_in_three(cnf: &Cnf, a: &Assignment) -> bool {
    cnf.clauses().iter().all(|c| exactly_one(c, a.values()))
}

fn exactly_one(clause: &[Lit], values: &[bool]) -> bool {
    clause.iter().filter(|l| l.eval_raw(values)).count() == 1
}

impl Lit {
    fn eval_raw(self, values: &[bool]) -> bool {
        values[self.var - 1] == self.positive
    }
}

fn enumerate(
    cnf: &Cnf,
    max_vars: usize,
    ok: impl Fn(&[Lit], &[bool]) -> bool,
) -> Result<Option<Assignment>> {
    let vars = cnf.vars();
    if vars > max_vars {
        return Err(Error::Budget(format!(
            "{vars} variables exceeds the enumeration limit of {max_vars}"
        )));
    }
    // closing[v] holds the clauses whose largest variable is v.
    let mut closing: Vec<Vec<&[Lit]>> = vec![Vec::new(); vars + 1];
    for c in cnf.clauses() {
        let top = c.iter().map(|l| l.var).max().unwrap_or(0);
        closing[top].push(c);
    }
    let mut values = vec![false; vars];
    let found = descend(1, &mut values, &closing, &ok);
    Ok(found.then(|| Assignment::new(values)))
}

fn descend(
    v: usize,
    values: &mut [bool],
    closing: &[Vec<&[Lit]>],
    ok: &impl Fn(&[Lit], &[bool]) -> bool,
) -> bool {
    if v > values.len() {
        return true;
    }
    for val in [false, true] {
        values[v - 1] = val;
        if closing[v].iter().all(|c| ok(c, values)) && descend(v + 1, values, closing, ok) {
            return true;
        }
    }
    values[v - 1] = false;
    false
}
