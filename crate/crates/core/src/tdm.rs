//! Restricted three-dimensional matching: elements `W = {w_i, w̄_i}`,
//! `X = {s_j, a_i, u_k}`, `Y = {s'_j, b_i, u'_k}` with the fixed family `t2`
//! of `a/b` matches and a free family `t1` of `s`/`u` matches.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{structural, Error, Result};
use crate::sat::{Assignment, Lit, StructuredCnf};

/// Largest `6n` the perfect-matching oracle accepts.
pub const MATCHING_ORACLE_LIMIT: usize = 24;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Element {
    W(usize),
    WBar(usize),
    S(usize),
    SP(usize),
    A(usize),
    B(usize),
    U(usize),
    UP(usize),
}

impl Element {
    pub fn index(self) -> usize {
        match self {
            Element::W(i)
            | Element::WBar(i)
            | Element::S(i)
            | Element::SP(i)
            | Element::A(i)
            | Element::B(i)
            | Element::U(i)
            | Element::UP(i) => i,
        }
    }

    pub fn is_w(self) -> bool {
        matches!(self, Element::W(_) | Element::WBar(_))
    }

    fn prefix(self) -> &'static str {
        match self {
            Element::W(_) => "w",
            Element::WBar(_) => "wbar",
            Element::S(_) => "s",
            Element::SP(_) => "sp",
            Element::A(_) => "a",
            Element::B(_) => "b",
            Element::U(_) => "u",
            Element::UP(_) => "up",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.prefix(), self.index())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (head, digits) = s.split_at(split);
        let i: usize = digits
            .parse()
            .ok()
            .filter(|&i| i >= 1 && !digits.starts_with('0'))
            .ok_or_else(|| structural(format!("bad element id `{s}`")))?;
        Ok(match head {
            "w" => Element::W(i),
            "wbar" => Element::WBar(i),
            "s" => Element::S(i),
            "sp" => Element::SP(i),
            "a" => Element::A(i),
            "b" => Element::B(i),
            "u" => Element::U(i),
            "up" => Element::UP(i),
            _ => return Err(structural(format!("bad element id `{s}`"))),
        })
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// `(W element, X element, Y element)`.
pub type Match = [Element; 3];

/// The cyclic successor inside each block of three 1-based indices.
pub fn zeta(i: usize) -> usize {
    let base = 3 * ((i - 1) / 3);
    base + (i - base) % 3 + 1
}

/// The pair `(w_i, a_i, b_i)`, `(w̄_i, a_i, b_ζ(i))`.
pub fn t2_pair(i: usize) -> [Match; 2] {
    [
        [Element::W(i), Element::A(i), Element::B(i)],
        [Element::WBar(i), Element::A(i), Element::B(zeta(i))],
    ]
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TdmInstance {
    /// Number of variable triples; every side has `6n` elements.
    pub n: usize,
    /// Number of `s_j` elements.
    pub c1: usize,
    pub t1: Vec<Match>,
    pub t2: Vec<Match>,
}

/// Indices into `t1` followed by `t2` (index `t1.len() + k` is `t2[k]`).
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching(pub Vec<usize>);

/// Where a `t1` match came from.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MatchOrigin {
    /// Literal `lit` of C1 clause number `clause` (1-based).
    Literal { clause: usize, lit: Lit },
    Dummy,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TdmReduction {
    pub inst: TdmInstance,
    /// Parallel to `inst.t1`.
    pub provenance: Vec<MatchOrigin>,
}

impl TdmInstance {
    pub fn match_count(&self) -> usize {
        self.t1.len() + self.t2.len()
    }

    pub fn get(&self, idx: usize) -> Option<&Match> {
        if idx < self.t1.len() {
            self.t1.get(idx)
        } else {
            self.t2.get(idx - self.t1.len())
        }
    }

    pub fn all_matches(&self) -> impl Iterator<Item = &Match> + '_ {
        self.t1.iter().chain(&self.t2)
    }

    /// Dense index of an element in `0..18n`, or `None` if it is not part of
    /// this instance.
    pub fn element_slot(&self, e: Element) -> Option<usize> {
        let n3 = 3 * self.n;
        let u = n3.saturating_sub(self.c1);
        let within = |i: usize, hi: usize| (1..=hi).contains(&i);
        let (offset, i, hi) = match e {
            Element::W(i) => (0, i, n3),
            Element::WBar(i) => (n3, i, n3),
            Element::S(j) => (2 * n3, j, self.c1),
            Element::A(i) => (2 * n3 + self.c1, i, n3),
            Element::U(k) => (3 * n3 + self.c1, k, u),
            Element::SP(j) => (4 * n3, j, self.c1),
            Element::B(i) => (4 * n3 + self.c1, i, n3),
            Element::UP(k) => (5 * n3 + self.c1, k, u),
        };
        within(i, hi).then(|| offset + i - 1)
    }

    pub fn elements(&self) -> Vec<Element> {
        let n3 = 3 * self.n;
        let u = n3.saturating_sub(self.c1);
        let mut out = Vec::with_capacity(6 * n3);
        out.extend((1..=n3).map(Element::W));
        out.extend((1..=n3).map(Element::WBar));
        out.extend((1..=self.c1).map(Element::S));
        out.extend((1..=n3).map(Element::A));
        out.extend((1..=u).map(Element::U));
        out.extend((1..=self.c1).map(Element::SP));
        out.extend((1..=n3).map(Element::B));
        out.extend((1..=u).map(Element::UP));
        out
    }

    /// Literal lists of the C1 clauses, read back from the literal matches of `t1`.
    pub fn clause_literals(&self) -> Vec<Vec<Lit>> {
        let mut clauses = vec![Vec::new(); self.c1];
        for m in &self.t1 {
            if let Element::S(j) = m[1] {
                let lit = match m[0] {
                    Element::W(i) => Lit::pos(i),
                    _ => Lit::neg(m[0].index()),
                };
                clauses[j - 1].push(lit);
            }
        }
        clauses
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n3 = 3 * self.n;
        if self.c1 > n3 {
            return Err(structural(format!("{} s-elements exceed 3n = {n3}", self.c1)));
        }
        let expected: HashSet<Match> = (1..=n3).flat_map(t2_pair).collect();
        let got: HashSet<Match> = self.t2.iter().copied().collect();
        if self.t2.len() != 2 * n3 || got != expected {
            return Err(structural("t2 is not the fixed a/b pattern"));
        }
        let mut seen = HashSet::new();
        let mut s_hit = vec![false; self.c1];
        for m in &self.t1 {
            let ok = m[0].is_w()
                && self.element_slot(m[0]).is_some()
                && match (m[1], m[2]) {
                    (Element::S(j), Element::SP(k)) if j == k && (1..=self.c1).contains(&j) => {
                        s_hit[j - 1] = true;
                        true
                    }
                    (Element::U(j), Element::UP(k)) => j == k && self.element_slot(m[1]).is_some(),
                    _ => false,
                };
            if !ok {
                return Err(structural(format!("malformed t1 match {}", show(m))));
            }
            if !seen.insert(*m) {
                return Err(structural(format!("duplicate t1 match {}", show(m))));
            }
        }
        if let Some(j) = s_hit.iter().position(|h| !h) {
            return Err(structural(format!("s{} appears in no t1 match", j + 1)));
        }
        Ok(())
    }
}

pub fn show(m: &Match) -> String {
    format!("({},{},{})", m[0], m[1], m[2])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TdmJson {
    n: usize,
    t1: Vec<Match>,
    t2: Vec<Match>,
}

impl Serialize for TdmInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TdmJson {
            n: self.n,
            t1: self.t1.clone(),
            t2: self.t2.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TdmInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = TdmJson::deserialize(deserializer)?;
        let c1 = raw
            .t1
            .iter()
            .filter_map(|m| match m[1] {
                Element::S(j) => Some(j),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let inst = TdmInstance {
            n: raw.n,
            c1,
            t1: raw.t1,
            t2: raw.t2,
        };
        inst.check_invariants().map_err(serde::de::Error::custom)?;
        Ok(inst)
    }
}

/// Literal-in-clause matches for every C1 clause, then `(w_i,u_k,u'_k)` and
/// `(w̄_i,u_k,u'_k)` for every `i` and `k`, then the fixed `t2`.
pub fn reduce_sat_to_3dm(s: &StructuredCnf) -> Result<TdmReduction> {
    s.check_invariants()?;
    let n = s.triple_count;
    let n3 = 3 * n;
    let c1 = s.c1.len();
    if c1 > n3 {
        return Err(structural(format!("|C1| = {c1} exceeds 3n = {n3}")));
    }
    let mut t1 = Vec::new();
    let mut provenance = Vec::new();
    for (j, clause) in s.c1_clauses().enumerate() {
        for &lit in clause {
            let w = if lit.positive {
                Element::W(lit.var)
            } else {
                Element::WBar(lit.var)
            };
            t1.push([w, Element::S(j + 1), Element::SP(j + 1)]);
            provenance.push(MatchOrigin::Literal { clause: j + 1, lit });
        }
    }
    for k in 1..=n3 - c1 {
        for i in 1..=n3 {
            for w in [Element::W(i), Element::WBar(i)] {
                t1.push([w, Element::U(k), Element::UP(k)]);
                provenance.push(MatchOrigin::Dummy);
            }
        }
    }
    let t2 = (1..=n3).flat_map(t2_pair).collect();
    let inst = TdmInstance { n, c1, t1, t2 };
    inst.check_invariants()?;
    Ok(TdmReduction { inst, provenance })
}

pub fn verify_matching(inst: &TdmInstance, m: &Matching) -> Result<bool> {
    let mut count = vec![0u32; 18 * inst.n];
    for &idx in &m.0 {
        let mt = inst
            .get(idx)
            .ok_or_else(|| structural(format!("match index {idx} out of range")))?;
        for &e in mt {
            let slot = inst
                .element_slot(e)
                .ok_or_else(|| structural(format!("element {e} not in instance")))?;
            count[slot] += 1;
        }
    }
    Ok(m.0.len() == 6 * inst.n && count.iter().all(|&c| c == 1))
}

/// Exact-cover backtracking. Branches on the uncovered element with the
/// fewest still-usable matches (lowest slot on ties), trying matches in index
/// order, so the answer is deterministic.
pub fn brute_force_perfect_matching(inst: &TdmInstance) -> Result<Option<Matching>> {
    if 6 * inst.n > MATCHING_ORACLE_LIMIT {
        return Err(Error::Budget(format!(
            "6n = {} exceeds the matching oracle limit of {MATCHING_ORACLE_LIMIT}",
            6 * inst.n
        )));
    }
    let universe = 18 * inst.n;
    let mut masks = Vec::with_capacity(inst.match_count());
    for mt in inst.all_matches() {
        let mut mask = 0u128;
        for &e in mt {
            let slot = inst
                .element_slot(e)
                .ok_or_else(|| structural(format!("element {e} not in instance")))?;
            mask |= 1 << slot;
        }
        masks.push(mask);
    }
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); universe];
    for (idx, &mask) in masks.iter().enumerate() {
        for (slot, list) in containing.iter_mut().enumerate() {
            if mask >> slot & 1 == 1 {
                list.push(idx);
            }
        }
    }
    let full: u128 = if universe == 128 { u128::MAX } else { (1u128 << universe) - 1 };
    let mut chosen = Vec::new();
    let found = cover(0, full, &masks, &containing, &mut chosen);
    Ok(found.then_some(Matching(chosen)))
}

fn cover(
    covered: u128,
    full: u128,
    masks: &[u128],
    containing: &[Vec<usize>],
    chosen: &mut Vec<usize>,
) -> bool {
    if covered == full {
        return true;
    }
    let mut best: Option<(usize, usize)> = None;
    for (slot, list) in containing.iter().enumerate() {
        if covered >> slot & 1 == 1 {
            continue;
        }
        let options = list.iter().filter(|&&i| masks[i] & covered == 0).count();
        if best.is_none_or(|(_, b)| options < b) {
            best = Some((slot, options));
            if options == 0 {
                return false;
            }
        }
    }
    let (slot, _) = best.expect("an uncovered element exists");
    for &i in &containing[slot] {
        if masks[i] & covered == 0 {
            chosen.push(i);
            if cover(covered | masks[i], full, masks, containing, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

fn find(inst: &TdmInstance, target: &Match) -> Option<usize> {
    (0..inst.match_count()).find(|&i| inst.get(i) == Some(target))
}

/// Completeness witness. Each triple takes its three `w` matches of `t2` when
/// false and its three `w̄` matches when true; each C1 clause takes the match
/// of its true literal with the smallest variable index; leftover `W`
/// elements, in order `w_1, w̄_1, w_2, …`, take `u_1, u_2, …`.
pub fn matching_from_assignment(inst: &TdmInstance, a: &Assignment) -> Result<Matching> {
    let n3 = 3 * inst.n;
    if a.len() != n3 {
        return Err(Error::Witness(format!("assignment has {} values, expected {n3}", a.len())));
    }
    for g in 0..inst.n {
        let v = a.value(3 * g + 1);
        if a.value(3 * g + 2) != v || a.value(3 * g + 3) != v {
            return Err(Error::Witness(format!("cycle clauses of triple {} are violated", g + 1)));
        }
    }
    let missing = |m: &Match| Error::Witness(format!("match {} missing from instance", show(m)));
    let mut chosen = Vec::new();
    let mut used_w = HashSet::new();
    for i in 1..=n3 {
        let [straight, cyclic] = t2_pair(i);
        let m = if a.value(i) { cyclic } else { straight };
        chosen.push(find(inst, &m).ok_or_else(|| missing(&m))?);
        used_w.insert(m[0]);
    }
    for (j, lits) in inst.clause_literals().iter().enumerate() {
        let lit = lits
            .iter()
            .filter(|l| l.eval(a))
            .min_by_key(|l| l.var)
            .ok_or_else(|| Error::Witness(format!("C1 clause {} is not satisfied", j + 1)))?;
        let w = if lit.positive {
            Element::W(lit.var)
        } else {
            Element::WBar(lit.var)
        };
        let m = [w, Element::S(j + 1), Element::SP(j + 1)];
        chosen.push(find(inst, &m).ok_or_else(|| missing(&m))?);
        used_w.insert(w);
    }
    assert_eq!(chosen.len(), n3 + inst.c1, "selected matches before the u-completion");
    let leftover = (1..=n3)
        .flat_map(|i| [Element::W(i), Element::WBar(i)])
        .filter(|w| !used_w.contains(w));
    for (k, w) in leftover.enumerate() {
        let m = [w, Element::U(k + 1), Element::UP(k + 1)];
        chosen.push(find(inst, &m).ok_or_else(|| missing(&m))?);
    }
    let out = Matching(chosen);
    if !verify_matching(inst, &out)? {
        return Err(Error::Witness("completion is not a perfect matching".into()));
    }
    Ok(out)
}

/// Soundness witness: a triple is true exactly when its cyclic `w̄` matches
/// are used. The result is checked against the clauses encoded in `t1`.
pub fn assignment_from_matching(inst: &TdmInstance, m: &Matching) -> Result<Assignment> {
    if !verify_matching(inst, m)? {
        return Err(Error::Soundness("not a perfect matching".into()));
    }
    let used: HashSet<Match> = m.0.iter().filter_map(|&i| inst.get(i).copied()).collect();
    let mut a = Assignment::all_false(3 * inst.n);
    for g in 0..inst.n {
        let idx = [3 * g + 1, 3 * g + 2, 3 * g + 3];
        let straight = idx.iter().filter(|&&i| used.contains(&t2_pair(i)[0])).count();
        let cyclic = idx.iter().filter(|&&i| used.contains(&t2_pair(i)[1])).count();
        let value = match (straight, cyclic) {
            (3, 0) => false,
            (0, 3) => true,
            _ => {
                return Err(Error::Soundness(format!(
                    "triple {} mixes straight and cyclic matches ({straight}+{cyclic})",
                    g + 1
                )))
            }
        };
        for i in idx {
            a.set(i, value);
        }
    }
    for (j, lits) in inst.clause_literals().iter().enumerate() {
        if !lits.iter().any(|l| l.eval(&a)) {
            return Err(Error::Soundness(format!("C1 clause {} is unsatisfied", j + 1)));
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{brute_force_sat, tovey_exact3, tovey_structured, Cnf};

    fn structured(vars: usize, clauses: &[&[i64]]) -> StructuredCnf {
        let cnf = Cnf::from_signed(vars, &clauses.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        tovey_structured(&tovey_exact3(&cnf).unwrap().cnf).unwrap()
    }

    #[test]
    fn zeta_cycles_within_triples() {
        assert_eq!([zeta(1), zeta(2), zeta(3)], [2, 3, 1]);
        assert_eq!([zeta(4), zeta(5), zeta(6)], [5, 6, 4]);
    }

    #[test]
    fn element_ids() {
        for id in ["w3", "wbar3", "s1", "sp1", "a2", "b2", "u1", "up1"] {
            assert_eq!(id.parse::<Element>().unwrap().to_string(), id);
        }
        for bad in ["w0", "x1", "w", "w01", "wbar"] {
            assert!(bad.parse::<Element>().is_err(), "{bad}");
        }
    }

    #[test]
    fn counts_for_contradiction_seed() {
        let s = structured(1, &[&[1], &[-1]]);
        assert_eq!((s.triple_count, s.c1.len()), (2, 4));
        let red = reduce_sat_to_3dm(&s).unwrap();
        assert_eq!(red.inst.elements().len(), 36);
        assert_eq!(red.inst.t2.len(), 12);
        assert_eq!(red.inst.t1.len(), 30);
        assert_eq!(
            red.provenance.iter().filter(|o| matches!(o, MatchOrigin::Literal { .. })).count(),
            6
        );
        assert_eq!(brute_force_perfect_matching(&red.inst).unwrap(), None);
    }

    #[test]
    fn satisfiable_seed_round_trip() {
        let s = structured(2, &[&[1, 2]]);
        let red = reduce_sat_to_3dm(&s).unwrap();
        let a = brute_force_sat(&s.base).unwrap().unwrap();
        let m = matching_from_assignment(&red.inst, &a).unwrap();
        assert!(verify_matching(&red.inst, &m).unwrap());
        let back = assignment_from_matching(&red.inst, &m).unwrap();
        assert!(s.base.is_satisfied_by(&back));

        let oracle = brute_force_perfect_matching(&red.inst).unwrap().unwrap();
        assert!(verify_matching(&red.inst, &oracle).unwrap());
        assert!(s.base.is_satisfied_by(&assignment_from_matching(&red.inst, &oracle).unwrap()));
    }

    #[test]
    fn group_truth_selects_t2_pattern() {
        let s = structured(2, &[&[1, 2]]);
        let inst = reduce_sat_to_3dm(&s).unwrap().inst;
        let mut a = Assignment::all_false(6);
        for i in 1..=3 {
            a.set(i, true);
        }
        assert!(s.base.is_satisfied_by(&a));
        let m = matching_from_assignment(&inst, &a).unwrap();
        let chosen: Vec<Match> = m.0.iter().map(|&i| *inst.get(i).unwrap()).collect();
        for i in 1..=3 {
            assert!(chosen.contains(&t2_pair(i)[1]));
        }
        for i in 4..=6 {
            assert!(chosen.contains(&t2_pair(i)[0]));
        }
    }

    #[test]
    fn non_satisfying_assignment_rejected() {
        let s = structured(2, &[&[1, 2]]);
        let inst = reduce_sat_to_3dm(&s).unwrap().inst;
        let e = matching_from_assignment(&inst, &Assignment::all_false(6)).unwrap_err();
        assert!(e.to_string().contains("C1 clause 1"), "{e}");
    }

    #[test]
    fn verify_matching_edge_cases() {
        let s = structured(2, &[&[1, 2]]);
        let inst = reduce_sat_to_3dm(&s).unwrap().inst;
        assert!(!verify_matching(&inst, &Matching::default()).unwrap());
        let m = brute_force_perfect_matching(&inst).unwrap().unwrap();
        let mut dup = m.clone();
        dup.0[1] = dup.0[0];
        assert!(!verify_matching(&inst, &dup).unwrap());
        assert!(verify_matching(&inst, &Matching(vec![10_000])).is_err());
    }

    #[test]
    fn uncoverable_element() {
        let s = structured(2, &[&[1, 2]]);
        let mut inst = reduce_sat_to_3dm(&s).unwrap().inst;
        inst.t1.retain(|m| m[1] != Element::S(1));
        assert_eq!(brute_force_perfect_matching(&inst).unwrap(), None);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let inst = reduce_sat_to_3dm(&structured(2, &[&[1, 2]])).unwrap().inst;
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.starts_with(r#"{"n":2,"t1":[["w1","s1","sp1"]"#));
        let back: TdmInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
        let broken = text.replacen(r#"["w1","a1","b1"]"#, r#"["w1","a1","b2"]"#, 1);
        assert!(serde_json::from_str::<TdmInstance>(&broken).is_err());
    }

    #[test]
    fn oracle_budget_guard() {
        let s = structured(3, &[&[1, 2, 3], &[-1, -2]]);
        let inst = reduce_sat_to_3dm(&s).unwrap().inst;
        assert!(inst.n * 6 > MATCHING_ORACLE_LIMIT);
        assert!(matches!(brute_force_perfect_matching(&inst), Err(Error::Budget(_))));
    }
}
