//! `gadget-forge`: build, certify and solve low-rank scheduling gadgets.
//!
//! Exit codes: 0 certified or done, 1 a certificate stage refuted, 2 I/O,
//! parse, validation or budget failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gadget_forge::exact::Rational;
use gadget_forge::lrs::{loads, makespan, verify_rank, LrsInstance, Schedule};
use gadget_forge::pipeline::{self, certify, CertifyOptions, Family};
use gadget_forge::reduce3::{self, Reduce3Params};
use gadget_forge::reduce4::{self, build_lrs4, Reduce4Params};
use gadget_forge::sat::{parse_dimacs, tovey_one_in_three, Cnf};
use gadget_forge::solver::{decide, greedy, optimize, SearchMode, SolveBudget, Status};
use gadget_forge::tdm::{reduce_sat_to_3dm, TdmInstance};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] gadget_forge::Error),
    #[error("{0}")]
    Usage(String),
}

type Res<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "gadget-forge", version, about = "Exact hardness gadgets for low-rank scheduling")]
struct Cli {
    /// Solver threads; results do not depend on it.
    #[arg(long, global = true, env = "GADGET_FORGE_WORKERS", default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Node limit of the search.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 600)]
    time_limit: u64,
}

impl BudgetArgs {
    fn budget(&self) -> Res<SolveBudget> {
        if self.budget == 0 || self.time_limit == 0 {
            return Err(CliError::Usage("budgets must be positive".into()));
        }
        Ok(SolveBudget {
            max_nodes: self.budget,
            max_time: Duration::from_secs(self.time_limit),
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one reduction and write its output.
    Reduce {
        #[command(subcommand)]
        which: ReduceCmd,
    },
    /// Run the whole pipeline on a seed and emit a certificate.
    Certify {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// DIMACS seed.
        #[arg(long)]
        seed: PathBuf,
        #[arg(long)]
        eps: Option<String>,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Certificate path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide or optimise the makespan of an instance.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        /// Is there a schedule with makespan strictly below this value?
        #[arg(long, conflicts_with_all = ["optimize", "greedy"])]
        decide: Option<String>,
        #[arg(long)]
        optimize: bool,
        #[arg(long)]
        greedy: bool,
        #[arg(long, value_enum, default_value_t = ModeArg::Generic)]
        mode: ModeArg,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Where to write the schedule found, if any.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact rank of the processing-time matrix.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Exact per-machine loads and makespan of a schedule.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Evaluate a family's inequality suite.
    Inequalities {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        eps: Option<String>,
        /// Triples (rank4) or variables (rank3).
        #[arg(long)]
        n: usize,
        /// Clauses (rank3 only).
        #[arg(long)]
        m: Option<usize>,
        /// Override N.
        #[arg(long = "big-n")]
        big_n: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ReduceCmd {
    /// DIMACS seed to a 3DM' instance with provenance.
    #[command(name = "sat-to-3dm")]
    SatTo3dm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 3DM' instance to the rank-4 gadget.
    #[command(name = "3dm-to-lrs4")]
    TdmToLrs4 {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "1/8")]
        eps: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-in-three seed to the rank-3 gadget.
    OitToLrs3 {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "1/64")]
        eps: String,
        /// The input already has the normalised occurrence structure.
        #[arg(long)]
        normalized: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rank4,
    Rank3,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Rank4 => Family::Rank4,
            FamilyArg::Rank3 => Family::Rank3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Generic,
    StructureAware,
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn rational(s: &str) -> Res<Rational> {
    s.parse::<Rational>()
        .map_err(|e| CliError::Usage(format!("`{s}` is not a rational: {e}")))
}

fn seed(path: &Path) -> Res<(String, Cnf)> {
    let text = read(path)?;
    let cnf = parse_dimacs(&text)?;
    Ok((text, cnf))
}

/// Accepts a bare 3DM' instance or the `{"instance", "provenance"}` wrapper.
fn tdm_from(text: &str) -> Res<TdmInstance> {
    let v: Value = serde_json::from_str(text).map_err(gadget_forge::Error::from)?;
    let inner = match v.get("instance") {
        Some(i) => i.clone(),
        None => v,
    };
    Ok(serde_json::from_value(inner).map_err(gadget_forge::Error::from)?)
}

fn instance(path: &Path) -> Res<LrsInstance> {
    Ok(LrsInstance::from_json(&read(path)?)?)
}

fn run(cli: Cli) -> Res<i32> {
    let workers = cli.workers.max(1);
    match cli.cmd {
        Cmd::Reduce { which } => reduce(which).map(|()| 0),
        Cmd::Certify {
            family,
            seed: path,
            eps,
            budget,
            out,
        } => {
            let (text, cnf) = seed(&path)?;
            let opts = CertifyOptions {
                family: family.into(),
                epsilon: eps.as_deref().map(rational).transpose()?,
                budget: budget.budget()?,
                workers,
            };
            let report = certify(text.as_bytes(), &cnf, &opts)?;
            let json = report.to_json_pretty();
            match out {
                Some(p) => write(&p, &json)?,
                None => print!("{json}"),
            }
            eprintln!(
                "{} soundness={} verdict={:?}",
                report.family, report.soundness.status, report.verdict
            );
            for f in &report.failures {
                eprintln!("failure: {f}");
            }
            Ok(report.verdict.exit_code())
        }
        Cmd::Solve {
            input,
            decide: threshold,
            optimize: opt,
            greedy: gr,
            mode,
            budget,
            out,
        } => {
            let inst = instance(&input)?;
            let budget = budget.budget()?;
            let schedule = if let Some(t) = threshold {
                let t = rational(&t)?;
                if t <= Rational::zero() {
                    return Err(CliError::Usage("threshold must be positive".into()));
                }
                let mode = match mode {
                    ModeArg::Generic => SearchMode::Generic,
                    ModeArg::StructureAware => SearchMode::StructureAware,
                };
                let res = decide(&inst, &t, mode, &budget, workers)?;
                for d in &res.deductions {
                    eprintln!("deduction: {d}");
                }
                match &res.schedule {
                    Some(s) => println!("{} makespan={} threshold={t}", res.status.name(), makespan(&inst, s)?),
                    None => println!("{} threshold={t}", res.status.name()),
                }
                if res.status == Status::BudgetExceeded {
                    return Ok(2);
                }
                res.schedule
            } else if opt {
                let res = optimize(&inst, &budget, workers)?;
                println!("makespan={} optimal={}", res.makespan, res.optimal);
                if !res.optimal {
                    if let Some(p) = &out {
                        write(p, &res.schedule.to_json_pretty())?;
                    }
                    return Ok(2);
                }
                Some(res.schedule)
            } else if gr {
                let s = greedy(&inst)?;
                println!("makespan={}", makespan(&inst, &s)?);
                Some(s)
            } else {
                return Err(CliError::Usage("pass one of --decide, --optimize, --greedy".into()));
            };
            if let (Some(p), Some(s)) = (out, schedule) {
                write(&p, &s.to_json_pretty())?;
            }
            Ok(0)
        }
        Cmd::Rank { input } => {
            let inst = instance(&input)?;
            let (rank, ok) = verify_rank(&inst);
            println!("rank={rank} bound={} {}", inst.d, if ok { "ok" } else { "exceeded" });
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Verify { input, schedule } => {
            let inst = instance(&input)?;
            let s: Schedule = serde_json::from_str(&read(&schedule)?).map_err(gadget_forge::Error::from)?;
            let ls = loads(&inst, &s)?;
            for (m, l) in inst.machines.iter().zip(&ls) {
                println!("{} {l}", m.id);
            }
            println!("makespan={}", makespan(&inst, &s)?);
            Ok(0)
        }
        Cmd::Inequalities {
            family,
            eps,
            n,
            m,
            big_n,
        } => {
            let family: Family = family.into();
            let eps = eps.as_deref().map(rational).transpose()?.unwrap_or_else(|| family.default_epsilon());
            let ok = match family {
                Family::Rank4 => {
                    let p = match big_n {
                        Some(big) => Reduce4Params::new(eps, big)?,
                        None => Reduce4Params::for_size(eps, n)?,
                    };
                    let r = reduce4::certify_inequalities4(&p, n);
                    println!("N={} pairs={}", p.n_scale, r.pairs_checked);
                    println!("max_matched={}", r.max_matched);
                    println!("min_blocked={}", r.min_blocked);
                    for f in &r.failures {
                        println!("FAIL {f}");
                    }
                    r.passed()
                }
                Family::Rank3 => {
                    let m = m.ok_or_else(|| CliError::Usage("rank3 needs --m".into()))?;
                    let p = match big_n {
                        Some(big) => Reduce3Params::new(eps, big, n)?,
                        None => Reduce3Params::for_size(eps, n)?,
                    };
                    let checks = reduce3::certify_inequalities3(&p, n, m);
                    for c in &checks {
                        println!("{c}");
                    }
                    checks.iter().all(|c| c.holds)
                }
            };
            println!("{}", if ok { "all inequalities hold" } else { "some inequalities fail" });
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn reduce(which: ReduceCmd) -> Res<()> {
    match which {
        ReduceCmd::SatTo3dm { input, out } => {
            let (_, cnf) = seed(&input)?;
            let (_, s) = pipeline::normalize_sat(&cnf)?;
            let red = reduce_sat_to_3dm(&s)?;
            let v = json!({
                "instance": serde_json::to_value(&red.inst).map_err(gadget_forge::Error::from)?,
                "provenance": pipeline::provenance_json(&red),
            });
            write(&out, &pretty(&v))
        }
        ReduceCmd::TdmToLrs4 { input, eps, out } => {
            let tdm = tdm_from(&read(&input)?)?;
            let p = Reduce4Params::for_size(rational(&eps)?, tdm.n)?;
            let g = build_lrs4(&tdm, &p)?;
            write(&out, &g.lrs.to_json_pretty())
        }
        ReduceCmd::OitToLrs3 {
            input,
            eps,
            normalized,
            out,
        } => {
            let (_, cnf) = seed(&input)?;
            let cnf = if normalized { cnf } else { tovey_one_in_three(&cnf)?.cnf };
            let p = Reduce3Params::for_size(rational(&eps)?, cnf.vars())?;
            let g = reduce3::build_lrs3(&cnf, &p)?;
            write(&out, &g.lrs.to_json_pretty())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
