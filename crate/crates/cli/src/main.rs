use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use whyprov::datalog::{parse_database, parse_fact, parse_program, FactScope};
use whyprov::engine::answers;
use whyprov::generators::{gen_transclosure, load_edge_list, transclosure_query, Profile};
use whyprov::harness::{bench, sweep_reduction, sweep_unwhy, BenchOptions, DelayStats, SweepOptions, SweepReport};
use whyprov::sat::{dimacs, ExternalSolver, SolveResult, Solver, SolverOptions};
use whyprov::{
    check_membership, enumerate, fixpoint, goal_closure, Acyclicity, Database, EncodeOptions, EngineOptions,
    EnumerateOptions, Error, OracleOptions, Program, Query, SessionStatus, Support, Symbol,
};

const EXIT_NEGATIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_ANSWER: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "whyprov", version, about = "Why-provenance of Datalog answers via SAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the answers of a predicate.
    Eval {
        #[command(flatten)]
        input: Input,
        /// Answer predicate.
        #[arg(short = 'q', long)]
        predicate: String,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Stream the supports of the unambiguous proof trees of a goal.
    Explain {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        goal: Goal,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
        /// Write the compressed DAG of each member as DOT into this directory.
        #[arg(long)]
        witness_dir: Option<PathBuf>,
    },
    /// Decide whether a subset of the database is a member.
    Check {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        goal: Goal,
        /// Facts of the candidate subset.
        #[arg(long)]
        subset: PathBuf,
        #[arg(long, default_value = "ve")]
        acyclicity: Acyclicity,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Write the formula of a goal in DIMACS with a variable map.
    ExportDimacs {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        goal: Goal,
        #[arg(long, default_value = "ve")]
        acyclicity: Acyclicity,
        /// DIMACS output file.
        #[arg(short, long)]
        out: PathBuf,
        /// Variable map; defaults to `<out>.map`.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Also write the downward closure, one hyperedge per line.
        #[arg(long)]
        closure: Option<PathBuf>,
    },
    /// Time closure, encoding and enumeration for random answer tuples.
    Bench {
        /// Program; with `--facts` replaces the generated graph.
        #[arg(short, long, requires = "facts")]
        program: Option<PathBuf>,
        #[arg(short, long, requires = "program")]
        facts: Option<PathBuf>,
        /// Answer predicate for `--program`.
        #[arg(short = 'q', long, default_value = "T")]
        predicate: String,
        /// Edge list for the transitive-closure program.
        #[arg(long, conflicts_with = "program")]
        edge_list: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        nodes: usize,
        #[arg(long, default_value_t = 600)]
        edges: usize,
        /// Answer tuples to draw.
        #[arg(short = 'k', long, default_value_t = 5)]
        tuples: usize,
        /// Members per tuple; 0 times closure and encoding only.
        #[arg(long, default_value_t = 1000)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ve")]
        acyclicity: Acyclicity,
        /// Seconds per tuple.
        #[arg(long)]
        timeout: Option<f64>,
        /// Evaluate the tuples concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Compare the pipeline with the exhaustive oracles on random instances.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Solve a DIMACS file with the built-in solver, in competition format.
    SolveDimacs { file: PathBuf },
}

#[derive(Subcommand)]
enum SweepKind {
    /// Enumeration against the unambiguous-tree oracle.
    Unwhy {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Profiles to cycle through; all by default.
        #[arg(long, value_delimiter = ',')]
        profile: Vec<Profile>,
        /// Also compare against the solver named by the environment.
        #[arg(long)]
        external: bool,
    },
    /// The 3SAT reduction against the why oracle.
    Reduction {
        #[arg(long, default_value_t = 200)]
        formulas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Input {
    /// Datalog rules.
    #[arg(short, long)]
    program: PathBuf,
    /// Database facts.
    #[arg(short, long)]
    facts: PathBuf,
}

#[derive(Args)]
struct Goal {
    /// Goal fact, such as `A(d)`.
    #[arg(short, long)]
    goal: String,
}

#[derive(Args)]
struct Limits {
    #[arg(long, default_value = "ve")]
    acyclicity: Acyclicity,
    /// Stop after this many members.
    #[arg(long)]
    limit: Option<usize>,
    /// Wall-clock seconds for the enumeration.
    #[arg(long)]
    timeout: Option<f64>,
    /// Conflicts allowed per solver call.
    #[arg(long)]
    solver_budget: Option<u64>,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TupleNotAnswer(_) => EXIT_NOT_ANSWER,
            Error::Timeout(_) => EXIT_TIMEOUT,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load(input: &Input) -> Result<(Program, Database), Failure> {
    let program = parse_program(&read(&input.program)?)
        .map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", input.program.display())))?;
    let db = parse_database(&read(&input.facts)?, &program, FactScope::Input)
        .map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", input.facts.display())))?;
    Ok((program, db))
}

fn query_and_tuple(program: Program, goal: &Goal) -> Result<(Query, Vec<Symbol>), Failure> {
    let fact = parse_fact(&goal.goal)?;
    let q = Query::new(program, fact.predicate)?;
    Ok((q, fact.args.to_vec()))
}

fn external_solver() -> Result<Option<ExternalSolver>, Failure> {
    ExternalSolver::from_env().transpose().map_err(Failure::from)
}

fn ms(x: f64) -> String {
    format!("{x:.3}")
}

fn cmd_eval(input: &Input, predicate: &str, output: Output) -> CmdResult {
    let (program, db) = load(input)?;
    let q = Query::new(program, predicate)?;
    let tuples = answers(&q, &db, &EngineOptions::default())?;
    let mut out = std::io::stdout().lock();
    match output {
        Output::Text => {
            for t in &tuples {
                let args: Vec<&str> = t.iter().map(|s| s.as_str()).collect();
                writeln!(out, "{}({})", q.answer, args.join(","))?;
            }
        }
        Output::Json => {
            let rows: Vec<Vec<&str>> = tuples.iter().map(|t| t.iter().map(|s| s.as_str()).collect()).collect();
            writeln!(out, "{}", json!({ "predicate": q.answer.as_str(), "answers": rows }))?;
        }
    }
    Ok(0)
}

fn cmd_explain(input: &Input, goal: &Goal, limits: &Limits, output: Output, witness_dir: Option<&Path>) -> CmdResult {
    let (program, db) = load(input)?;
    let (q, tuple) = query_and_tuple(program, goal)?;
    let opts = EnumerateOptions {
        encode: EncodeOptions::with(limits.acyclicity),
        solver: SolverOptions {
            seed: limits.seed,
            max_conflicts: limits.solver_budget,
            ..Default::default()
        },
        max_members: limits.limit,
        time_limit: limits.timeout.map(Duration::from_secs_f64),
        witnesses: witness_dir.is_some(),
        external: external_solver()?,
        ..Default::default()
    };
    if let Some(dir) = witness_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut session = enumerate(&q, &db, &tuple, opts)?;
    let goal_text = session.goal().to_string();
    if !session.is_answer() {
        return Err(fail(EXIT_NOT_ANSWER, format!("`{goal_text}` is not an answer")));
    }
    let mut out = std::io::stdout().lock();
    let mut members: Vec<Support> = Vec::new();
    for m in session.by_ref() {
        let m = m?;
        if let (Some(dir), Some(dag)) = (witness_dir, &m.witness) {
            std::fs::write(dir.join(format!("member-{}.dot", m.ordinal)), dag.to_dot())?;
        }
        if output == Output::Text {
            writeln!(out, "{}", m.facts)?;
            out.flush()?;
        }
        members.push(m.facts);
    }
    let status = session.status();
    let delays = DelayStats::of(session.delays());
    let stats = session.stats();
    match output {
        Output::Text => {
            let d = delays
                .as_ref()
                .map(|d| format!("{}/{}/{} ms", ms(d.min_ms), ms(d.median_ms), ms(d.max_ms)))
                .unwrap_or_else(|| "-".into());
            eprintln!(
                "{} members, status {status}, delay min/median/max {d}, closure {} ms, encode {} ms",
                members.len(),
                ms(stats.closure_ms),
                ms(stats.encode_ms)
            );
        }
        Output::Json => {
            let value = json!({
                "goal": goal_text,
                "members": members,
                "status": status,
                "delays": delays,
                "stats": stats,
            });
            writeln!(out, "{value}")?;
        }
    }
    Ok(if status == SessionStatus::Timeout { EXIT_TIMEOUT } else { 0 })
}

fn cmd_check(input: &Input, goal: &Goal, subset: &Path, acyclicity: Acyclicity, output: Output) -> CmdResult {
    let (program, db) = load(input)?;
    let (q, tuple) = query_and_tuple(program, goal)?;
    let sub = parse_database(&read(subset)?, &q.program, FactScope::Input)
        .map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", subset.display())))?;
    let opts = EnumerateOptions {
        encode: EncodeOptions::with(acyclicity),
        external: external_solver()?,
        ..Default::default()
    };
    let member = check_membership(&q, &db, &tuple, &sub, &opts)?;
    let mut out = std::io::stdout().lock();
    match output {
        Output::Text => writeln!(out, "{}", if member { "MEMBER" } else { "NOT-MEMBER" })?,
        Output::Json => writeln!(out, "{}", json!({ "member": member }))?,
    }
    Ok(if member { 0 } else { EXIT_NEGATIVE })
}

fn cmd_export(
    input: &Input,
    goal: &Goal,
    acyclicity: Acyclicity,
    out: &Path,
    map: Option<&Path>,
    closure: Option<&Path>,
) -> CmdResult {
    let (program, db) = load(input)?;
    let (q, tuple) = query_and_tuple(program, goal)?;
    let goal = q.goal(&tuple)?;
    let engine = EngineOptions {
        record_instantiations: false,
        ..Default::default()
    };
    let fix = fixpoint(&q.program, &db, &engine)?;
    if !fix.contains(&goal) {
        return Err(fail(EXIT_NOT_ANSWER, format!("`{goal}` is not an answer")));
    }
    let dc = goal_closure(&db, &fix, &goal)?;
    let inst = whyprov::encode(&dc, &EncodeOptions::with(acyclicity))?;
    std::fs::write(out, inst.to_dimacs())?;
    let map_path = map.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".map");
        PathBuf::from(p)
    });
    std::fs::write(&map_path, inst.var_map_text())?;
    if let Some(path) = closure {
        std::fs::write(path, dc.to_text())?;
    }
    eprintln!(
        "{} variables, {} clauses, {} database leaves",
        inst.cnf.num_vars,
        inst.cnf.clauses.len(),
        inst.db_leaf_vars.len()
    );
    Ok(0)
}

fn cmd_solve_dimacs(file: &Path) -> CmdResult {
    let cnf = dimacs::parse(&read(file)?)?;
    let mut solver = Solver::new(SolverOptions::default());
    solver.ensure_vars(cnf.num_vars);
    for c in &cnf.clauses {
        solver.add_clause(c);
    }
    let mut out = std::io::stdout().lock();
    match solver.solve()? {
        SolveResult::Sat => {
            writeln!(out, "s SATISFIABLE")?;
            write!(out, "{}", dimacs::write_model(solver.model()))?;
            Ok(10)
        }
        SolveResult::Unsat => {
            writeln!(out, "s UNSATISFIABLE")?;
            Ok(20)
        }
    }
}

fn print_report(report: &SweepReport) -> CmdResult {
    println!("{}", serde_json::to_string_pretty(report).expect("serialisable"));
    eprintln!(
        "{} instances compared, {} skipped, {} mismatches",
        report.instances,
        report.skipped,
        report.mismatches.len()
    );
    Ok(if report.is_clean() { 0 } else { EXIT_NEGATIVE })
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Eval {
            input,
            predicate,
            output,
        } => cmd_eval(&input, &predicate, output),
        Command::Explain {
            input,
            goal,
            limits,
            output,
            witness_dir,
        } => cmd_explain(&input, &goal, &limits, output, witness_dir.as_deref()),
        Command::Check {
            input,
            goal,
            subset,
            acyclicity,
            output,
        } => cmd_check(&input, &goal, &subset, acyclicity, output),
        Command::ExportDimacs {
            input,
            goal,
            acyclicity,
            out,
            map,
            closure,
        } => cmd_export(&input, &goal, acyclicity, &out, map.as_deref(), closure.as_deref()),
        Command::Bench {
            program,
            facts,
            predicate,
            edge_list,
            nodes,
            edges,
            tuples,
            limit,
            seed,
            acyclicity,
            timeout,
            parallel,
        } => {
            let (q, db) = match (program, facts, edge_list) {
                (Some(program), Some(facts), _) => {
                    let (p, db) = load(&Input { program, facts })?;
                    (Query::new(p, predicate.as_str())?, db)
                }
                (_, _, Some(path)) => (transclosure_query(), load_edge_list(&read(&path)?)?),
                _ => gen_transclosure(nodes, edges, seed),
            };
            let opts = BenchOptions {
                tuples,
                limit,
                seed,
                acyclicity,
                time_limit: timeout.map(Duration::from_secs_f64),
                parallel,
            };
            let report = bench(&q, &db, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            Ok(0)
        }
        Command::Sweep { kind } => match kind {
            SweepKind::Unwhy {
                instances,
                seed,
                profile,
                external,
            } => {
                let profiles = if profile.is_empty() { Profile::ALL.to_vec() } else { profile };
                let external = if external {
                    Some(external_solver()?.ok_or_else(|| {
                        fail(EXIT_INPUT, format!("--external needs {}", whyprov::sat::SOLVER_ENV_VAR))
                    })?)
                } else {
                    None
                };
                let opts = SweepOptions {
                    external,
                    ..Default::default()
                };
                print_report(&sweep_unwhy(&profiles, instances, seed, &opts))
            }
            SweepKind::Reduction { formulas, seed } => {
                print_report(&sweep_reduction(formulas, seed, &OracleOptions::default()))
            }
        },
        Command::SolveDimacs { file } => cmd_solve_dimacs(&file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
