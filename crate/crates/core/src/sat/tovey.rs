use super::{Assignment, Cnf, Lit, StructuredCnf};
use crate::error::{structural, Result};

/// Output of an occurrence-splitting pass together with the map from each
/// input variable to the output variables that replicate it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Replicated {
    pub cnf: Cnf,
    /// `replicas[v-1]` lists the output variables standing for input variable `v`.
    pub replicas: Vec<Vec<usize>>,
}

impl Replicated {
    /// Reads each input variable off its first replica.
    pub fn lift(&self, out: &Assignment) -> Assignment {
        Assignment::new(self.replicas.iter().map(|r| out.value(r[0])).collect())
    }

    /// Copies each input value onto all of its replicas.
    pub fn push(&self, input: &Assignment) -> Assignment {
        let mut out = Assignment::all_false(self.cnf.vars());
        for (v, reps) in self.replicas.iter().enumerate() {
            for &z in reps {
                out.set(z, input.value(v + 1));
            }
        }
        out
    }
}

/// Rewrites every variable to occur exactly three times.
///
/// A variable occurring once gains the clause `(z ∨ ¬z)`. A variable with
/// `d ≥ 2` occurrences is split into `z_1..z_d`, one per occurrence in clause
/// order, tied together by `(z_1 ∨ ¬z_2) … (z_d ∨ ¬z_1)`. Rewritten input
/// clauses come first, then the added clauses variable by variable.
pub fn tovey_exact3(input: &Cnf) -> Result<Replicated> {
    let out = split_occurrences(input)?;
    assert!(
        out.cnf.occurrences().iter().all(|&c| c == 3),
        "occurrence splitting must leave every variable with three occurrences"
    );
    Ok(out)
}

/// One-in-three variant of [`tovey_exact3`]. Input clauses must have exactly
/// three literals; the output has clauses of two or three literals and every
/// variable occurs positively twice and negatively once, or the reverse.
pub fn tovey_one_in_three(input: &Cnf) -> Result<Replicated> {
    if let Some(j) = input.clauses().iter().position(|c| c.len() != 3) {
        return Err(structural(format!(
            "clause {} has {} literals; one-in-three input needs exactly 3",
            j + 1,
            input.clauses()[j].len()
        )));
    }
    let out = split_occurrences(input)?;
    let mut pos = vec![0usize; out.cnf.vars()];
    let mut neg = vec![0usize; out.cnf.vars()];
    for l in out.cnf.clauses().iter().flatten() {
        if l.positive {
            pos[l.var - 1] += 1;
        } else {
            neg[l.var - 1] += 1;
        }
    }
    for v in 0..out.cnf.vars() {
        assert!(
            matches!((pos[v], neg[v]), (2, 1) | (1, 2)),
            "variable {} has polarity profile {}+{}",
            v + 1,
            pos[v],
            neg[v]
        );
    }
    let (n, m) = (out.cnf.vars(), out.cnf.clauses().len());
    assert!(n <= m && m <= 2 * n, "clause count {m} outside [{n}, {}]", 2 * n);
    Ok(out)
}

fn split_occurrences(input: &Cnf) -> Result<Replicated> {
    let occ = input.occurrences();
    if let Some(v) = occ.iter().position(|&d| d == 0) {
        return Err(structural(format!("variable {} has no occurrences", v + 1)));
    }
    let mut replicas = Vec::with_capacity(occ.len());
    let mut next = 1;
    for &d in &occ {
        replicas.push((next..next + d).collect::<Vec<_>>());
        next += d;
    }
    let mut used = vec![0usize; occ.len()];
    let mut clauses: Vec<Vec<Lit>> = input
        .clauses()
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| {
                    let k = used[l.var - 1];
                    used[l.var - 1] += 1;
                    Lit {
                        var: replicas[l.var - 1][k],
                        positive: l.positive,
                    }
                })
                .collect()
        })
        .collect();
    for reps in &replicas {
        let d = reps.len();
        if d == 1 {
            clauses.push(vec![Lit::pos(reps[0]), Lit::neg(reps[0])]);
        } else {
            for k in 0..d {
                clauses.push(vec![Lit::pos(reps[k]), Lit::neg(reps[(k + 1) % d])]);
            }
        }
    }
    Ok(Replicated {
        cnf: Cnf::new(next - 1, clauses)?,
        replicas,
    })
}

/// Second pass: the three occurrences of variable `i` become `ẑ_{3i-2}`,
/// `ẑ_{3i-1}`, `ẑ_{3i}` in clause order. The rewritten input clauses form
/// `c1`; the cycle clauses of each triple form `c2`.
pub fn tovey_structured(input: &Cnf) -> Result<StructuredCnf> {
    let occ = input.occurrences();
    if let Some(v) = occ.iter().position(|&d| d != 3) {
        return Err(structural(format!(
            "variable {} occurs {} times; exactly 3 required",
            v + 1,
            occ[v]
        )));
    }
    let n = input.vars();
    let mut used = vec![0usize; n];
    let mut clauses: Vec<Vec<Lit>> = input
        .clauses()
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| {
                    let k = used[l.var - 1];
                    used[l.var - 1] += 1;
                    Lit {
                        var: 3 * (l.var - 1) + k + 1,
                        positive: l.positive,
                    }
                })
                .collect()
        })
        .collect();
    let c1: Vec<usize> = (0..clauses.len()).collect();
    let mut c2 = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = |k: usize| 3 * i + k;
        for (a, b) in [(1, 2), (2, 3), (3, 1)] {
            c2.push(clauses.len());
            clauses.push(vec![Lit::pos(z(a)), Lit::neg(z(b))]);
        }
    }
    let out = StructuredCnf {
        base: Cnf::new(3 * n, clauses)?,
        c1,
        c2,
        triple_count: n,
    };
    out.check_invariants()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{brute_force_one_in_three, brute_force_sat};

    fn cnf(vars: usize, clauses: &[&[i64]]) -> Cnf {
        Cnf::from_signed(vars, &clauses.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_clause_gets_dummies() {
        let out = tovey_exact3(&cnf(3, &[&[1, 2, 3]])).unwrap();
        assert_eq!(out.cnf.vars(), 3);
        assert_eq!(out.cnf.clauses().len(), 4);
        assert_eq!(out.cnf.occurrences(), vec![3, 3, 3]);
        assert_eq!(out.cnf.to_signed()[1], vec![1, -1]);
    }

    #[test]
    fn contradiction_trace() {
        let out = tovey_exact3(&cnf(1, &[&[1], &[-1]])).unwrap();
        assert_eq!(out.cnf.vars(), 2);
        assert_eq!(
            out.cnf.to_signed(),
            vec![vec![1], vec![-2], vec![1, -2], vec![2, -1]]
        );
        assert_eq!(out.replicas, vec![vec![1, 2]]);
        assert!(brute_force_sat(&out.cnf).unwrap().is_none());
    }

    #[test]
    fn zero_occurrence_rejected() {
        assert!(tovey_exact3(&cnf(2, &[&[1]])).is_err());
    }

    #[test]
    fn lift_and_push() {
        let seed = cnf(2, &[&[1, 2], &[-1, 2]]);
        let out = tovey_exact3(&seed).unwrap();
        let a = Assignment::new(vec![true, true]);
        let pushed = out.push(&a);
        assert!(out.cnf.is_satisfied_by(&pushed));
        assert_eq!(out.lift(&pushed), a);
    }

    #[test]
    fn structured_shape() {
        let e3 = tovey_exact3(&cnf(1, &[&[1], &[-1]])).unwrap();
        let s = tovey_structured(&e3.cnf).unwrap();
        assert_eq!(s.triple_count, 2);
        assert_eq!(s.base.vars(), 6);
        assert_eq!(s.c2.len(), 6);
        assert_eq!(s.c1.len(), 4);
        assert_eq!(
            s.c1_clauses().map(|c| c.iter().map(|l| l.to_dimacs()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            vec![vec![1], vec![-4], vec![2, -5], vec![6, -3]]
        );
        assert!(brute_force_sat(&s.base).unwrap().is_none());
    }

    #[test]
    fn structured_rejects_wrong_occurrence() {
        let e = tovey_structured(&cnf(1, &[&[1]])).unwrap_err();
        assert!(e.to_string().contains("variable 1"));
    }

    #[test]
    fn one_in_three_profiles() {
        let out = tovey_one_in_three(&cnf(3, &[&[1, 2, 3]])).unwrap();
        assert_eq!(out.cnf.vars(), 3);
        assert_eq!(out.cnf.clauses().len(), 4);
        assert!(brute_force_one_in_three(&out.cnf).unwrap().is_some());

        let bad = tovey_one_in_three(&cnf(1, &[&[1, 1, 1]])).unwrap();
        assert_eq!((bad.cnf.vars(), bad.cnf.clauses().len()), (3, 4));
        assert!(brute_force_one_in_three(&bad.cnf).unwrap().is_none());

        assert!(tovey_one_in_three(&cnf(2, &[&[1, 2]])).is_err());
    }
}
