//! Factored scheduling instances `P = M·J`: machines carry speed vectors, jobs
//! carry size vectors, and the processing time is their inner product.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::{structural, Error, Result};
use crate::exact::{dot, ExactMatrix, Rational};

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Machine {
    pub id: String,
    pub speed: Vec<Rational>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub id: String,
    pub size: Vec<Rational>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct LrsInstance {
    pub d: usize,
    pub machines: Vec<Machine>,
    pub jobs: Vec<Job>,
    pub meta: Map<String, Value>,
    #[serde(skip)]
    machine_index: HashMap<String, usize>,
    #[serde(skip)]
    job_index: HashMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    d: usize,
    machines: Vec<Machine>,
    jobs: Vec<Job>,
    #[serde(default)]
    meta: Map<String, Value>,
}

impl<'de> Deserialize<'de> for LrsInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawInstance::deserialize(deserializer)?;
        LrsInstance::new(raw.d, raw.machines, raw.jobs, raw.meta).map_err(serde::de::Error::custom)
    }
}

fn index_of<'a>(ids: impl Iterator<Item = &'a String>, what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(structural(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(map)
}

impl LrsInstance {
    pub fn new(d: usize, machines: Vec<Machine>, jobs: Vec<Job>, meta: Map<String, Value>) -> Result<Self> {
        if let Some(m) = machines.iter().find(|m| m.speed.len() != d) {
            return Err(structural(format!("machine `{}` has {} coordinates, d = {d}", m.id, m.speed.len())));
        }
        if let Some(j) = jobs.iter().find(|j| j.size.len() != d) {
            return Err(structural(format!("job `{}` has {} coordinates, d = {d}", j.id, j.size.len())));
        }
        let machine_index = index_of(machines.iter().map(|m| &m.id), "machine")?;
        let job_index = index_of(jobs.iter().map(|j| &j.id), "job")?;
        Ok(LrsInstance {
            d,
            machines,
            jobs,
            meta,
            machine_index,
            job_index,
        })
    }

    pub fn machine_idx(&self, id: &str) -> Result<usize> {
        self.machine_index
            .get(id)
            .copied()
            .ok_or_else(|| structural(format!("unknown machine `{id}`")))
    }

    pub fn job_idx(&self, id: &str) -> Result<usize> {
        self.job_index
            .get(id)
            .copied()
            .ok_or_else(|| structural(format!("unknown job `{id}`")))
    }

    /// Processing time by position.
    pub fn time(&self, machine: usize, job: usize) -> Rational {
        dot(&self.machines[machine].speed, &self.jobs[job].size).expect("lengths validated at construction")
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn all_nonnegative(&self) -> bool {
        self.machines
            .iter()
            .flat_map(|m| &m.speed)
            .chain(self.jobs.iter().flat_map(|j| &j.size))
            .all(|x| !x.is_negative())
    }
}

pub fn processing_time(inst: &LrsInstance, machine: &str, job: &str) -> Result<Rational> {
    Ok(inst.time(inst.machine_idx(machine)?, inst.job_idx(job)?))
}

/// A total map from job id to machine id.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub assignment: BTreeMap<String, String>,
}

impl Schedule {
    /// `machine_of[j]` is the machine index of job `j`.
    pub fn from_indices(inst: &LrsInstance, machine_of: &[usize]) -> Schedule {
        Schedule {
            assignment: machine_of
                .iter()
                .enumerate()
                .map(|(j, &m)| (inst.jobs[j].id.clone(), inst.machines[m].id.clone()))
                .collect(),
        }
    }

    /// Machine index per job, validating totality against `inst`.
    pub fn indices(&self, inst: &LrsInstance) -> Result<Vec<usize>> {
        if self.assignment.len() != inst.jobs.len() {
            for j in &inst.jobs {
                if !self.assignment.contains_key(&j.id) {
                    return Err(Error::Witness(format!("job `{}` is unassigned", j.id)));
                }
            }
        }
        let mut out = vec![usize::MAX; inst.jobs.len()];
        for (job, machine) in &self.assignment {
            out[inst.job_idx(job)?] = inst.machine_idx(machine)?;
        }
        Ok(out)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schedule serializes");
        s.push('\n');
        s
    }
}

/// Exact per-machine loads, in machine order.
pub fn loads(inst: &LrsInstance, s: &Schedule) -> Result<Vec<Rational>> {
    let idx = s.indices(inst)?;
    let mut out = vec![Rational::zero(); inst.machines.len()];
    for (j, &m) in idx.iter().enumerate() {
        out[m] += &inst.time(m, j);
    }
    Ok(out)
}

pub fn load(inst: &LrsInstance, s: &Schedule, machine: &str) -> Result<Rational> {
    let mi = inst.machine_idx(machine)?;
    let idx = s.indices(inst)?;
    Ok(idx
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m == mi)
        .map(|(j, _)| inst.time(mi, j))
        .sum())
}

pub fn makespan(inst: &LrsInstance, s: &Schedule) -> Result<Rational> {
    Ok(loads(inst, s)?.into_iter().max().unwrap_or_else(Rational::zero))
}

/// The dense `m × n` processing-time matrix.
pub fn full_matrix(inst: &LrsInstance) -> ExactMatrix {
    let (m, n) = (inst.machines.len(), inst.jobs.len());
    let entries = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.time(i, j))
        .collect();
    ExactMatrix::new(m, n, entries).expect("dimensions match")
}

/// `(rank, rank ≤ d)`.
pub fn verify_rank(inst: &LrsInstance) -> (usize, bool) {
    let rank = full_matrix(inst).rank();
    (rank, rank <= inst.d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn q(n: i64) -> Rational {
        Rational::from(n)
    }

    fn tiny() -> LrsInstance {
        LrsInstance::new(
            2,
            vec![
                Machine { id: "m1".into(), speed: vec![q(1), q(0)] },
                Machine { id: "m2".into(), speed: vec![q(0), q(2)] },
            ],
            vec![
                Job { id: "j1".into(), size: vec![q(3), q(1)] },
                Job { id: "j2".into(), size: vec![rat(1, 2).unwrap(), q(5)] },
            ],
            Map::new(),
        )
        .unwrap()
    }

    #[test]
    fn times_loads_makespan() {
        let inst = tiny();
        assert_eq!(processing_time(&inst, "m1", "j1").unwrap(), q(3));
        assert_eq!(processing_time(&inst, "m2", "j1").unwrap(), q(2));
        assert!(processing_time(&inst, "m3", "j1").is_err());

        let s = Schedule::from_indices(&inst, &[1, 0]);
        assert_eq!(load(&inst, &s, "m1").unwrap(), rat(1, 2).unwrap());
        assert_eq!(load(&inst, &s, "m2").unwrap(), q(2));
        assert_eq!(makespan(&inst, &s).unwrap(), q(2));

        let idle = Schedule::from_indices(&inst, &[0, 0]);
        assert_eq!(load(&inst, &idle, "m2").unwrap(), q(0));
    }

    #[test]
    fn empty_job_set_has_zero_makespan() {
        let inst = LrsInstance::new(1, vec![Machine { id: "m".into(), speed: vec![q(1)] }], vec![], Map::new()).unwrap();
        assert_eq!(makespan(&inst, &Schedule::default()).unwrap(), q(0));
    }

    #[test]
    fn partial_schedule_rejected() {
        let inst = tiny();
        let mut s = Schedule::from_indices(&inst, &[0, 0]);
        s.assignment.remove("j2");
        assert!(makespan(&inst, &s).is_err());
        s.assignment.insert("j2".into(), "nowhere".into());
        assert!(makespan(&inst, &s).is_err());
    }

    #[test]
    fn validation() {
        let bad_len = LrsInstance::new(2, vec![Machine { id: "m".into(), speed: vec![q(1)] }], vec![], Map::new());
        assert!(bad_len.is_err());
        let dup = LrsInstance::new(
            1,
            vec![
                Machine { id: "m".into(), speed: vec![q(1)] },
                Machine { id: "m".into(), speed: vec![q(2)] },
            ],
            vec![],
            Map::new(),
        );
        assert!(dup.is_err());
    }

    #[test]
    fn rank_of_factored_instance() {
        let inst = tiny();
        assert_eq!(verify_rank(&inst), (2, true));
        assert_eq!(full_matrix(&inst).get(1, 1), &q(10));
    }

    #[test]
    fn json_is_canonical() {
        let inst = tiny();
        let text = inst.to_json_pretty();
        assert!(text.contains("\"1/2\""));
        let back = LrsInstance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json_pretty(), text);

        let s = Schedule::from_indices(&inst, &[1, 0]);
        let st = serde_json::to_string(&s).unwrap();
        assert_eq!(st, r#"{"assignment":{"j1":"m2","j2":"m1"}}"#);
    }
}
