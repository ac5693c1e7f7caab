//! `relcorr`: check refinement, correctness and relative correctness of
//! small programs against relational specifications.

mod operand;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relcorr::corpus::{self, ReplayOptions};
use relcorr::reliability::Candidate;
use relcorr::{
    chain_report, competence_domain, hasse, is_correct, more_correct, projection, refines,
    ExactDistribution, NamedRelation, Relation, Verdict, DEFAULT_FUEL,
};
use serde_json::{json, Value};

use operand::{extract, Item, Loader};

#[derive(Parser)]
#[command(name = "relcorr", version, about = "Relational correctness checks on finite state spaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// File declaring spaces used by the other operands (repeatable).
    #[arg(long = "space", global = true, value_name = "FILE")]
    spaces: Vec<PathBuf>,
    /// Step limit for each execution path.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL)]
    fuel: u64,
    /// Row budget for checking domain claims.
    #[arg(long, global = true, default_value_t = 1 << 24)]
    budget: u64,
    /// Write a JSON report of the result to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a refinement, correctness or relative-correctness claim.
    #[command(subcommand)]
    Check(Check),
    /// Competence domain of a program with respect to a specification.
    Cd {
        program: String,
        #[arg(long)]
        spec: String,
        /// Print every state of the domain.
        #[arg(long)]
        list: bool,
    },
    /// Projection of a program onto a specification.
    Project {
        program: String,
        #[arg(long)]
        spec: String,
        /// Print every pair of the projection.
        #[arg(long)]
        list: bool,
    },
    /// Order programs by relative correctness.
    Order {
        #[arg(required = true)]
        programs: Vec<String>,
        #[arg(long)]
        spec: String,
        /// Emit the Hasse diagram in DOT, to FILE or standard output.
        #[arg(long, value_name = "FILE", num_args = 0..=1)]
        dot: Option<Option<PathBuf>>,
    },
    /// Relation utilities.
    #[command(subcommand)]
    Rel(Rel),
    /// Exact and sampled reliability of a chain of programs.
    Reliability {
        #[arg(required = true)]
        programs: Vec<String>,
        #[arg(long)]
        spec: String,
        /// Weights file with `state-index weight` lines; uniform over the
        /// specification's domain when absent.
        #[arg(long, value_name = "FILE")]
        dist: Option<PathBuf>,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 4000)]
        n: u64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Replay a bundled case study.
    Corpus {
        case: Case,
        #[arg(long, default_value_t = 4000)]
        n: u64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Check {
    /// Whether A refines B.
    Refines { a: String, b: String },
    /// Whether a program is correct with respect to a specification.
    Correct {
        program: String,
        #[arg(long)]
        spec: String,
    },
    /// Whether P2 is more correct than P1 with respect to a specification.
    MoreCorrect {
        p2: String,
        p1: String,
        #[arg(long)]
        spec: String,
    },
}

#[derive(Subcommand)]
enum Rel {
    /// Algebraic properties of a specification or program function.
    Props { operand: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Cube,
    Fermat,
    Sqrt,
    Strings,
    All,
}

impl Case {
    fn name(self) -> &'static str {
        match self {
            Case::Cube => "cube",
            Case::Fermat => "fermat",
            Case::Sqrt => "sqrt",
            Case::Strings => "strings",
            Case::All => "all",
        }
    }
}

/// Outcome of a command: the verdict that sets the exit code, and an
/// optional report body.
struct Outcome {
    verdict: bool,
    report: Value,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if let Some(path) = &cli.global.report {
                let text = if out.report.is_string() {
                    out.report.as_str().unwrap_or_default().to_string()
                } else {
                    serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n"
                };
                if let Err(e) = fs::write(path, text) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if out.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    if g.fuel == 0 {
        bail!("--fuel must be positive");
    }
    if let Command::Corpus { case, n, seed } = &cli.command {
        return cmd_corpus(*case, g, *n, *seed);
    }
    let loader = Loader::new(&g.spaces)?;
    match &cli.command {
        Command::Check(c) => cmd_check(&loader, g, c),
        Command::Cd {
            program,
            spec,
            list,
        } => cmd_cd(&loader, g, program, spec, *list),
        Command::Project {
            program,
            spec,
            list,
        } => cmd_project(&loader, g, program, spec, *list),
        Command::Order {
            programs,
            spec,
            dot,
        } => cmd_order(&loader, g, programs, spec, dot.as_ref()),
        Command::Rel(Rel::Props { operand }) => cmd_props(&loader, g, operand),
        Command::Reliability {
            programs,
            spec,
            dist,
            n,
            seed,
        } => cmd_reliability(&loader, g, programs, spec, dist.as_ref(), *n, *seed),
        Command::Corpus { .. } => unreachable!("handled above"),
    }
}

fn spec_relation(loader: &Loader, operand: &str) -> Result<(String, Relation)> {
    let item = loader.resolve(operand)?;
    let spec = item.as_spec()?;
    Ok((spec.name().to_string(), spec.as_relation()))
}

fn named(loader: &Loader, g: &Global, operand: &str) -> Result<NamedRelation> {
    let item = loader.resolve(operand)?;
    Ok(NamedRelation::new(item.name(), item.relation(g.fuel)?))
}

fn cmd_check(loader: &Loader, g: &Global, c: &Check) -> Result<Outcome> {
    match c {
        Check::Refines { a, b } => {
            let a = named(loader, g, a)?;
            let b = named(loader, g, b)?;
            let holds = refines(&a.relation, &b.relation)?;
            println!("{} refines {}: {holds}", a.name, b.name);
            Ok(Outcome {
                verdict: holds,
                report: json!({ "check": "refines", "a": a.name, "b": b.name, "holds": holds }),
            })
        }
        Check::Correct { program, spec } => {
            let (rname, r) = spec_relation(loader, spec)?;
            let p = named(loader, g, program)?;
            let holds = is_correct(&p.relation, &r)?;
            println!("{} is correct with respect to {rname}: {holds}", p.name);
            Ok(Outcome {
                verdict: holds,
                report: json!({ "check": "correct", "program": p.name, "spec": rname, "holds": holds }),
            })
        }
        Check::MoreCorrect { p2, p1, spec } => {
            let (rname, r) = spec_relation(loader, spec)?;
            let p2 = named(loader, g, p2)?;
            let p1 = named(loader, g, p1)?;
            let ge = more_correct(&p2.relation, &p1.relation, &r)?;
            let le = more_correct(&p1.relation, &p2.relation, &r)?;
            let verdict = Verdict::from_flags(ge, le);
            println!("{} vs {} under {rname}: {verdict}", p2.name, p1.name);
            Ok(Outcome {
                verdict: ge,
                report: json!({
                    "check": "more_correct",
                    "p2": p2.name,
                    "p1": p1.name,
                    "spec": rname,
                    "holds": ge,
                    "verdict": verdict,
                }),
            })
        }
    }
}

fn cmd_cd(loader: &Loader, g: &Global, program: &str, spec: &str, list: bool) -> Result<Outcome> {
    let (rname, r) = spec_relation(loader, spec)?;
    let p = named(loader, g, program)?;
    let cd = competence_domain(&p.relation, &r)?;
    let sp = r.space();
    println!(
        "competence domain of {} under {rname}: {} of {} states",
        p.name,
        cd.len(),
        sp.cardinality()
    );
    let states: Vec<String> = cd.iter().map(|s| sp.describe(s)).collect();
    if list {
        for s in &states {
            println!("  {s}");
        }
    }
    Ok(Outcome {
        verdict: true,
        report: json!({ "program": p.name, "spec": rname, "size": cd.len(), "states": states }),
    })
}

fn cmd_project(loader: &Loader, g: &Global, program: &str, spec: &str, list: bool) -> Result<Outcome> {
    let (rname, r) = spec_relation(loader, spec)?;
    let p = named(loader, g, program)?;
    let proj = projection(&r, &p.relation)?;
    let equals_spec = proj.equals(&r)?;
    let sp = r.space();
    println!(
        "projection of {} onto {rname}: {} pairs over {} states; equals {rname}: {equals_spec}",
        p.name,
        proj.pair_count(),
        proj.dom().len()
    );
    let pairs: Vec<[String; 2]> = proj
        .pairs()
        .map(|(s, t)| [sp.describe(s), sp.describe(t)])
        .collect();
    if list {
        for [s, t] in &pairs {
            println!("  {s} -> {t}");
        }
    }
    Ok(Outcome {
        verdict: true,
        report: json!({
            "program": p.name,
            "spec": rname,
            "pairs": pairs,
            "equals_spec": equals_spec,
        }),
    })
}

fn cmd_order(
    loader: &Loader,
    g: &Global,
    programs: &[String],
    spec: &str,
    dot: Option<&Option<PathBuf>>,
) -> Result<Outcome> {
    let (rname, r) = spec_relation(loader, spec)?;
    let progs = programs
        .iter()
        .map(|o| named(loader, g, o))
        .collect::<Result<Vec<_>>>()?;
    let h = hasse(&r, &progs)?;
    match dot {
        Some(Some(path)) => {
            fs::write(path, h.to_dot()).with_context(|| format!("writing {}", path.display()))?
        }
        Some(None) => print!("{}", h.to_dot()),
        None => {}
    }
    if !matches!(dot, Some(None)) {
        println!("order under {rname}:");
        for n in &h.nodes {
            println!(
                "  {} (cd {}){}",
                n.names.join(" = "),
                n.competence_domain_size,
                if n.correct { " correct" } else { "" }
            );
        }
        for (a, b) in &h.edges {
            println!(
                "  {} < {}",
                h.nodes[*a].names.join(" = "),
                h.nodes[*b].names.join(" = ")
            );
        }
    }
    Ok(Outcome {
        verdict: true,
        report: json!({ "spec": rname, "hasse": h }),
    })
}

fn cmd_props(loader: &Loader, g: &Global, operand: &str) -> Result<Outcome> {
    let item = loader.resolve(operand)?;
    let rel = item.relation(g.fuel)?;
    let props = [
        ("reflexive", rel.is_reflexive()?),
        ("symmetric", rel.is_symmetric()?),
        ("antisymmetric", rel.is_antisymmetric()?),
        ("asymmetric", rel.is_asymmetric()?),
        ("transitive", rel.is_transitive()?),
        ("total", rel.is_total()?),
        ("deterministic", rel.is_deterministic()?),
        ("vector", rel.is_vector()?),
    ];
    println!("{}:", item.name());
    println!("  {:<14} {}", "pairs", rel.pair_count());
    println!("  {:<14} {}", "domain", rel.dom().len());
    for (k, v) in &props {
        println!("  {k:<14} {v}");
    }
    let mut report = json!({
        "name": item.name(),
        "pairs": rel.pair_count(),
        "domain": rel.dom().len(),
    });
    for (k, v) in props {
        report[k] = json!(v);
    }
    Ok(Outcome {
        verdict: true,
        report,
    })
}

fn cmd_reliability(
    loader: &Loader,
    g: &Global,
    programs: &[String],
    spec: &str,
    dist: Option<&PathBuf>,
    n: u64,
    seed: u64,
) -> Result<Outcome> {
    let item = loader.resolve(spec)?;
    let spec = item.as_spec()?;
    let support = spec.domain(g.budget);
    let d = match dist {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExactDistribution::parse_weights(support, &text)
                .with_context(|| format!("in {}", path.display()))?
        }
        None => ExactDistribution::uniform(support),
    };
    let items = programs
        .iter()
        .map(|o| loader.resolve(o))
        .collect::<Result<Vec<Item>>>()?;
    let progs = items
        .iter()
        .map(Item::as_prog)
        .collect::<Result<Vec<_>>>()?;
    let functions = progs
        .iter()
        .map(|p| Ok(extract(p, g.fuel)?.relation))
        .collect::<Result<Vec<_>>>()?;
    let candidates: Vec<Candidate<'_>> = progs
        .iter()
        .zip(&functions)
        .map(|(p, f)| Candidate {
            program: p,
            function: f,
        })
        .collect();
    let rep = chain_report(spec, &candidates, &d, n, seed, g.fuel)?;
    println!("reliability under {} (n = {n}, seed = {seed:#x}):", spec.name());
    for e in &rep.entries {
        println!(
            "  {:<12} exact {:<14} ({:.6})  estimate {:.6} ± {:.6}{}",
            e.program,
            e.exact_text,
            e.exact,
            e.estimate,
            e.std_error,
            if e.correct { "  correct" } else { "" }
        );
    }
    if !rep.verdicts.is_empty() {
        let v: Vec<String> = rep.verdicts.iter().map(Verdict::to_string).collect();
        println!("  verdicts: {}", v.join(", "));
        println!("  monotone: {}", rep.monotone);
    }
    Ok(Outcome {
        verdict: true,
        report: serde_json::to_value(&rep)?,
    })
}

fn cmd_corpus(case: Case, g: &Global, n: u64, seed: u64) -> Result<Outcome> {
    let opts = ReplayOptions {
        seed,
        samples: n,
        fuel: g.fuel,
        budget: g.budget,
    };
    let rep = corpus::run(&[case.name()], &opts)?;
    for c in &rep.cases {
        println!(
            "{}: {} ({} states, {} programs)",
            c.case,
            if c.passed() { "PASS" } else { "FAIL" },
            c.states,
            c.programs.len()
        );
        for p in &c.programs {
            println!("  {:<4} cd {}", p.program, p.competence_domain_size);
        }
        let v: Vec<String> = c.verdicts.iter().map(Verdict::to_string).collect();
        println!("  chain {}: {}", c.chain.join(" -> "), v.join(", "));
        for f in &c.failures {
            println!("  failure: {f}");
        }
    }
    Ok(Outcome {
        verdict: rep.passed,
        report: Value::String(rep.to_json()),
    })
}
