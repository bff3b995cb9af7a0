//! CNF formulas, DIMACS input, Tovey-style normalizations and brute-force oracles.

mod brute;
mod dimacs;
mod tovey;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{structural, Result};

pub use brute::{
    brute_force_one_in_three, brute_force_one_in_three_limited, brute_force_sat,
    brute_force_sat_limited, check_one_in_three, BRUTE_FORCE_VAR_LIMIT,
};
pub use dimacs::parse_dimacs;
pub use tovey::{tovey_exact3, tovey_one_in_three, tovey_structured, Replicated};

/// A literal over a 1-based variable index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Lit {
        Lit {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Lit {
        Lit {
            var,
            positive: false,
        }
    }

    pub fn from_dimacs(x: i64) -> Option<Lit> {
        if x == 0 {
            return None;
        }
        let var = usize::try_from(x.unsigned_abs()).ok()?;
        Some(Lit {
            var,
            positive: x > 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn eval(self, a: &Assignment) -> bool {
        a.value(self.var) == self.positive
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A CNF formula. Literals may repeat inside a clause; the dummy clause
/// `(z ∨ ¬z)` relies on that.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cnf {
    vars: usize,
    clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Cnf> {
        for (j, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(structural(format!("clause {} is empty", j + 1)));
            }
            if let Some(l) = clause.iter().find(|l| l.var == 0 || l.var > vars) {
                return Err(structural(format!(
                    "clause {} references variable {} outside 1..={}",
                    j + 1,
                    l.var,
                    vars
                )));
            }
        }
        Ok(Cnf { vars, clauses })
    }

    /// Convenience constructor from signed DIMACS-style integers.
    pub fn from_signed(vars: usize, clauses: &[Vec<i64>]) -> Result<Cnf> {
        let clauses = clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&x| Lit::from_dimacs(x).ok_or_else(|| structural("literal 0 inside a clause")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Cnf::new(vars, clauses)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Literal occurrences per variable, index 0 standing for variable 1.
    pub fn occurrences(&self) -> Vec<usize> {
        let mut occ = vec![0; self.vars];
        for l in self.clauses.iter().flatten() {
            occ[l.var - 1] += 1;
        }
        occ
    }

    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        self.first_falsified(a).is_none()
    }

    /// Index of the first clause with no true literal.
    pub fn first_falsified(&self, a: &Assignment) -> Option<usize> {
        self.clauses
            .iter()
            .position(|c| !c.iter().any(|l| l.eval(a)))
    }

    pub fn to_signed(&self) -> Vec<Vec<i64>> {
        self.clauses
            .iter()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }

    pub fn to_dimacs_string(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                s.push_str(&l.to_dimacs().to_string());
                s.push(' ');
            }
            s.push_str("0\n");
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CnfJson {
    vars: usize,
    clauses: Vec<Vec<i64>>,
}

impl Serialize for Cnf {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CnfJson {
            vars: self.vars,
            clauses: self.to_signed(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Cnf {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = CnfJson::deserialize(deserializer)?;
        Cnf::from_signed(raw.vars, &raw.clauses).map_err(serde::de::Error::custom)
    }
}

/// A total truth assignment; `values[0]` belongs to variable 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Assignment {
        Assignment { values }
    }

    pub fn all_false(vars: usize) -> Assignment {
        Assignment {
            values: vec![false; vars],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Panics if `var` is 0 or out of range.
    pub fn value(&self, var: usize) -> bool {
        self.values[var - 1]
    }

    pub fn set(&mut self, var: usize, value: bool) {
        self.values[var - 1] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }
}

/// A formula split into the literal clauses `c1` and the cycle clauses `c2`
/// produced by the second Tovey pass. Variables come in `triple_count` blocks
/// of three consecutive indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StructuredCnf {
    pub base: Cnf,
    pub c1: Vec<usize>,
    pub c2: Vec<usize>,
    pub triple_count: usize,
}

impl StructuredCnf {
    pub fn c1_clauses(&self) -> impl Iterator<Item = &Vec<Lit>> + '_ {
        self.c1.iter().map(move |&j| &self.base.clauses[j])
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.triple_count;
        let m = self.base.clauses.len();
        if self.base.vars != 3 * n {
            return Err(structural(format!(
                "{} variables, expected 3·{} = {}",
                self.base.vars,
                n,
                3 * n
            )));
        }
        let mut seen = vec![false; m];
        for &j in self.c1.iter().chain(&self.c2) {
            if j >= m || std::mem::replace(&mut seen[j], true) {
                return Err(structural(format!("clause index {j} is repeated or out of range")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(structural("c1 and c2 do not cover every clause"));
        }
        let mut once = vec![0usize; 3 * n];
        for l in self.c1_clauses().flatten() {
            once[l.var - 1] += 1;
        }
        if let Some(v) = once.iter().position(|&c| c != 1) {
            return Err(structural(format!(
                "variable {} occurs {} times in c1, expected once",
                v + 1,
                once[v]
            )));
        }
        if self.c2.len() != 3 * n {
            return Err(structural(format!("c2 has {} clauses, expected {}", self.c2.len(), 3 * n)));
        }
        for i in 0..n {
            let z = |k: usize| 3 * i + k;
            let expected = [
                vec![Lit::pos(z(1)), Lit::neg(z(2))],
                vec![Lit::pos(z(2)), Lit::neg(z(3))],
                vec![Lit::pos(z(3)), Lit::neg(z(1))],
            ];
            for (k, want) in expected.iter().enumerate() {
                if &self.base.clauses[self.c2[3 * i + k]] != want {
                    return Err(structural(format!(
                        "cycle clause {} of triple {} is malformed",
                        k + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}
