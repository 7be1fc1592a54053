use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use elrc::model::{signature, unsafe_axioms, Axiom, Concept, DefeasibleGci, KnowledgeBase};
use elrc::nominals::{self, Closure, NominalError, NominalImageMap};
use elrc::normalize::normalize_kb;
use elrc::oracle::{self, OracleBudget};
use elrc::parse::{parse_concept, parse_kb, parse_query, serialize_kb, ParseError, SourceDocument};
use elrc::rc::{Rank, Reasoner, Stage};

#[derive(Parser)]
#[command(name = "elrc", version, about = "Defeasible reasoning over EL-bottom knowledge bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report rank satisfiability and unsatisfiable individuals.
    Check { file: PathBuf },
    /// Print the rank partition of the DBox and the axioms moved to the TBox.
    Rank {
        file: PathBuf,
        /// Also print the rank of this concept.
        #[arg(long)]
        concept: Option<String>,
    },
    /// Decide a query such as "A <~ B" or "A <= B".
    Query {
        file: PathBuf,
        query: Option<String>,
        #[arg(long, value_enum, default_value_t = ClosureArg::Rc)]
        closure: ClosureArg,
        /// Show the rank of the left side and what settled the answer.
        #[arg(long)]
        explain: bool,
        /// One JSON record per query.
        #[arg(long)]
        machine: bool,
        /// Leave timings out, so output is reproducible.
        #[arg(long)]
        no_timing: bool,
        /// Read queries from a file, one per line.
        #[arg(long, conflicts_with = "query")]
        batch: Option<PathBuf>,
    },
    /// List axioms that are not nominal safe.
    Safety { file: PathBuf },
    /// Print the normal form and the names introduced for complex concepts.
    Normalize { file: PathBuf },
    /// Print the inheritance net in dot format.
    Net { file: PathBuf },
    /// Compare rank-0 tests against a bounded model search.
    #[command(hide = true)]
    DebugOracle {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        domain: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClosureArg {
    Rc,
    Inherit,
    Classical,
}

impl ClosureArg {
    fn label(self) -> &'static str {
        match self {
            ClosureArg::Rc => "rc",
            ClosureArg::Inherit => "inheritance",
            ClosureArg::Classical => "classical",
        }
    }
}

#[derive(Serialize)]
struct Record<'a> {
    query: String,
    entailed: bool,
    closure: &'a str,
    rank: Option<serde_json::Value>,
    tests: u64,
    ms: Option<f64>,
}

struct Input {
    path: String,
    doc: SourceDocument,
    kb: KnowledgeBase,
}

impl Input {
    fn load(path: &Path) -> Result<Input> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let name = path.display().to_string();
        let doc = SourceDocument::new(text, name.clone());
        let kb = parse_kb(&doc).map_err(|e| located(&name, &e))?;
        Ok(Input { path: name, doc, kb })
    }

    /// Line of the first axiom in the file equal to `ax`.
    fn line_of(&self, ax: &Axiom) -> Option<usize> {
        self.doc.text.lines().position(|l| parse_query(l.trim()).is_ok_and(|a| &a == ax)).map(|i| i + 1)
    }

    fn at(&self, ax: &Axiom) -> String {
        match self.line_of(ax) {
            Some(l) => format!("{}:{l}", self.path),
            None => self.path.clone(),
        }
    }

    fn explain_error(&self, e: NominalError) -> anyhow::Error {
        match &e {
            NominalError::NotNominalSafe(ax) => anyhow!("{}: {e}", self.at(ax)),
            _ => anyhow!("{}: {e}", self.path),
        }
    }

    fn require_safe(&self) -> Result<()> {
        match unsafe_axioms(&self.kb).first() {
            Some(ax) => Err(self.explain_error(NominalError::NotNominalSafe(ax.clone()))),
            None => Ok(()),
        }
    }

    fn require_nominal_free(&self) -> Result<()> {
        match self.kb.concepts().find(|c| c.has_nominals() || c.has_def_nominals()) {
            Some(c) => Err(anyhow!("{}: nominals are not supported here ({c})", self.path)),
            None => Ok(()),
        }
    }

    /// The KB with every nominal read as a defeasible nominal and encoded.
    fn encoded(&self) -> Result<KnowledgeBase> {
        self.require_safe()?;
        Ok(nominals::encode_def_nominals(&nominals::defeasibilize_kb(&self.kb)))
    }
}

fn located(origin: &str, e: &ParseError) -> anyhow::Error {
    anyhow!("{origin}:{}:{}: {}", e.line, e.column, e.message)
}

fn fmt_set<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

fn check(file: &Path) -> Result<bool> {
    let input = Input::load(file)?;
    input.require_safe()?;
    let reasoner = Reasoner::new();
    let nkb = nominals::n_translate_kb(&nominals::classicalize_kb(&input.kb));
    let sat = reasoner.is_rank_satisfiable(&nkb)?;
    println!("rank satisfiable: {}", if sat { "yes" } else { "no" });
    let bad = nominals::unsatisfiable_individuals(&reasoner, &input.kb).map_err(|e| input.explain_error(e))?;
    for a in &signature(&input.kb).individuals {
        let state = if bad.contains(a) { "unsatisfiable" } else { "satisfiable" };
        println!("individual {a}: {state}");
    }
    Ok(sat && bad.is_empty())
}

fn rank(file: &Path, concept: Option<&str>) -> Result<bool> {
    let input = Input::load(file)?;
    let kb = input.encoded()?;
    let names = NominalImageMap::for_kb(&kb);
    let show = |g: &DefeasibleGci| DefeasibleGci::new(names.decode(&g.lhs), names.decode(&g.rhs));
    let reasoner = Reasoner::new();
    let r = reasoner.ranking(&kb)?;
    for (i, cell) in r.cells.iter().enumerate() {
        println!("D{i} = {}", fmt_set(cell.iter().map(show)));
    }
    println!("Dinf = {}", fmt_set(r.infinite.iter().map(show)));
    let added: Vec<_> = r.tstar.difference(&kb.tbox).collect();
    if !added.is_empty() {
        println!("T* additions:");
        for g in added {
            println!("  {} <= {}", names.decode(&g.lhs), names.decode(&g.rhs));
        }
    }
    if let Some(text) = concept {
        let c = parse_concept(text).map_err(|e| located("<concept>", &e))?;
        let rank = nominals::rank_nominal_safe(&reasoner, &input.kb, &c).map_err(|e| input.explain_error(e))?;
        println!("rank({c}) = {rank}");
    }
    Ok(true)
}

struct Verdict {
    entailed: bool,
    stage: Option<Stage>,
}

fn decide(reasoner: &Reasoner, kb: &KnowledgeBase, q: &Axiom, closure: ClosureArg) -> Result<Verdict, NominalError> {
    match (closure, q) {
        (ClosureArg::Classical, q) => {
            let tbox = KnowledgeBase { tbox: kb.tbox.clone(), dbox: Default::default() };
            let strict = match q {
                Axiom::Strict(g) => g.clone(),
                Axiom::Defeasible(g) => g.as_strict(),
            };
            let entailed = nominals::entails(reasoner, &tbox, &Axiom::Strict(strict), Closure::Rational)?;
            Ok(Verdict { entailed, stage: None })
        }
        (ClosureArg::Rc, Axiom::Defeasible(g)) => {
            let d = nominals::decide(reasoner, kb, g)?;
            Ok(Verdict { entailed: d.entailed, stage: Some(d.stage) })
        }
        (ClosureArg::Rc, q) => Ok(Verdict { entailed: nominals::entails(reasoner, kb, q, Closure::Rational)?, stage: None }),
        (ClosureArg::Inherit, q) => {
            Ok(Verdict { entailed: nominals::entails(reasoner, kb, q, Closure::Inheritance)?, stage: None })
        }
    }
}

fn stage_rank(stage: Option<Stage>) -> Option<Rank> {
    match stage? {
        Stage::Level(i) => Some(Rank::Finite(i)),
        Stage::Fallback => Some(Rank::Infinite),
        _ => None,
    }
}

fn describe(stage: Option<Stage>, closure: ClosureArg) -> String {
    match stage {
        Some(Stage::Classical) => "the TBox alone".into(),
        Some(Stage::StrictKnowledge) => "T* (TBox plus axioms of infinite rank)".into(),
        Some(Stage::Level(i)) => format!("defeasible axioms of rank {i} and above"),
        Some(Stage::Fallback) => "the classical answer, since the left side has infinite rank".into(),
        None => match closure {
            ClosureArg::Classical => "the TBox alone".into(),
            ClosureArg::Rc => "T* (strict query)".into(),
            ClosureArg::Inherit => "the rational closure of the inheritance-extended DBox".into(),
        },
    }
}

struct QueryOptions {
    closure: ClosureArg,
    explain: bool,
    machine: bool,
    no_timing: bool,
}

fn read_queries(query: Option<String>, batch: Option<&Path>) -> Result<Vec<Axiom>> {
    match (query, batch) {
        (Some(q), _) => Ok(vec![parse_query(&q).map_err(|e| located("<query>", &e))?]),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let origin = path.display().to_string();
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let content = line.split('#').next().unwrap_or("").trim();
                if content.is_empty() {
                    continue;
                }
                let q = parse_query(content).map_err(|e| {
                    located(&origin, &ParseError { line: i + 1, column: e.column, message: e.message })
                })?;
                out.push(q);
            }
            Ok(out)
        }
        (None, None) => Err(anyhow!("give a query or --batch FILE")),
    }
}

fn query(file: &Path, qs: Vec<Axiom>, opts: &QueryOptions) -> Result<bool> {
    let input = Input::load(file)?;
    let reasoner = Reasoner::new();
    let mut all = true;
    for q in &qs {
        reasoner.read_and_reset_counter();
        let start = Instant::now();
        let v = decide(&reasoner, &input.kb, q, opts.closure).map_err(|e| match e {
            NominalError::NotNominalSafe(ref ax) if ax == q => anyhow!("<query>: {e}"),
            NominalError::ClassicalNominalInDefeasibleQuery(_) => anyhow!("<query>: {e}"),
            e => input.explain_error(e),
        })?;
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        let tests = reasoner.read_and_reset_counter();
        let rank = stage_rank(v.stage);
        all &= v.entailed;
        if opts.machine {
            let record = Record {
                query: q.to_string(),
                entailed: v.entailed,
                closure: opts.closure.label(),
                rank: rank.map(|r| match r {
                    Rank::Finite(i) => serde_json::Value::from(i),
                    Rank::Infinite => serde_json::Value::from("inf"),
                }),
                tests,
                ms: (!opts.no_timing).then_some(ms),
            };
            println!("{}", serde_json::to_string(&record)?);
            continue;
        }
        println!("{q}: {}", if v.entailed { "entailed" } else { "not entailed" });
        if opts.explain {
            if let Some(r) = rank {
                println!("  rank of {}: {r}", q.lhs());
            }
            println!("  decided by {}", describe(v.stage, opts.closure));
        }
        if opts.no_timing {
            println!("  tests: {tests}");
        } else {
            println!("  tests: {tests}, time: {ms:.3} ms");
        }
    }
    Ok(all)
}

fn safety(file: &Path) -> Result<bool> {
    let input = Input::load(file)?;
    let bad = unsafe_axioms(&input.kb);
    if bad.is_empty() {
        println!("nominal safe");
        return Ok(true);
    }
    println!("not nominal safe; offending axioms:");
    for ax in &bad {
        println!("  {}: {ax}", input.at(ax));
    }
    Ok(false)
}

fn normalize(file: &Path) -> Result<bool> {
    let input = Input::load(file)?;
    let (nkb, names) = normalize_kb(&input.kb);
    print!("{}", serialize_kb(&nkb));
    if !names.is_empty() {
        println!("names:");
        print!("{names}");
    }
    Ok(true)
}

fn net(file: &Path) -> Result<bool> {
    let input = Input::load(file)?;
    input.require_nominal_free()?;
    let (nkb, _) = normalize_kb(&input.kb);
    let net = elrc::inet::build_net(&Reasoner::new(), &nkb)?;
    print!("{}", net.to_dot());
    Ok(true)
}

fn debug_oracle(file: &Path, domain: usize) -> Result<bool> {
    let input = Input::load(file)?;
    let kb = input.encoded()?;
    let reasoner = Reasoner::new();
    let budget = OracleBudget::with_domain(domain);
    let mut concepts: Vec<Concept> = kb.dbox.iter().map(|g| g.lhs.clone()).collect();
    concepts.extend(signature(&kb).atoms.into_iter().map(Concept::Atom));
    concepts.sort();
    concepts.dedup();
    let mut agree = true;
    for c in &concepts {
        let by_rank = reasoner.rank_of_concept(&kb, c)? != Rank::Finite(0);
        let by_models = oracle::exceptional_bounded(&kb, c, &budget)?;
        let mark = if by_rank == by_models { "ok" } else { "MISMATCH" };
        agree &= by_rank == by_models;
        println!("{c}: rank test {by_rank}, models {by_models} {mark}");
    }
    Ok(agree)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check { file } => check(&file),
        Command::Rank { file, concept } => rank(&file, concept.as_deref()),
        Command::Query { file, query: q, closure, explain, machine, no_timing, batch } => {
            let qs = read_queries(q, batch.as_deref())?;
            query(&file, qs, &QueryOptions { closure, explain, machine, no_timing })
        }
        Command::Safety { file } => safety(&file),
        Command::Normalize { file } => normalize(&file),
        Command::Net { file } => net(&file),
        Command::DebugOracle { file, domain } => debug_oracle(&file, domain),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
