//! Command-line front end: evaluation, expected-convergence bounds,
//! transformations, frontiers, equivalence checks, fuzzing, diagram
//! validation and rewrite-system termination.
//!
//! Exit codes: 0 on success or a verdict that holds, 1 on a failed check,
//! counterexample or violation, 2 on usage and parse errors. An inconclusive
//! verdict exits 0 and prints a warning on stderr.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lazyprob::convergence::{
    bounds_of, explore, frontier_evaluate, parse_weight, weight_string, ExcvBounds, Frontier, FrontierMode,
    FrontierResult, LeafKind, Weight,
};
use lazyprob::diagram::{diagram_set, validate_set, Mode, ValidationParams};
use lazyprob::equiv::{
    counterexample_search, frontier_criteria_check, same_prob_sequences_check, Criterion, DivergenceProbe, Evidence,
    Verdict,
};
use lazyprob::error::FrontierError;
use lazyprob::fuzz::{soundness_fuzz, FuzzParams};
use lazyprob::reduce::{reduce_trace, ProbSeq, ReplayEnd, Rule};
use lazyprob::transform::{apply, match_sites, TransformationId};
use lazyprob::{parse_with, print, ContextClass, CtorTable, Expr, ParseOptions};
use lazyprob_trs::{emit_trs, verify_termination_claim, SystemId, TrsError};

#[derive(Parser)]
#[command(name = "lazyprob", version, about = "Call-by-need lambda calculus with probabilistic choice")]
struct Cli {
    /// Accept constructors, `case` and `seq`.
    #[arg(long, global = true)]
    extended: bool,
    /// Constructor table file (implies --extended).
    #[arg(long, global = true, value_name = "FILE")]
    ctors: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Budget {
    /// Maximal number of choices along an evaluation.
    #[arg(long = "max-prob", value_name = "K", default_value_t = 4)]
    max_prob: usize,
    /// Deterministic steps allowed along each evaluation.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    fuel: u64,
}

#[derive(Args, Clone)]
struct FrontierSpec {
    /// All words of this length.
    #[arg(long, value_name = "D", conflicts_with = "words")]
    depth: Option<usize>,
    /// Comma-separated words such as `L,RL,RR`.
    #[arg(long, value_name = "WORDS")]
    words: Option<String>,
    /// Allow deterministic steps before each choice (uses --fuel).
    #[arg(long)]
    relaxed: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Explore all evaluations, or replay one along --choices.
    Eval {
        expr: String,
        #[command(flatten)]
        budget: Budget,
        /// Print the rules applied along each evaluation.
        #[arg(long)]
        trace: bool,
        /// Replay a single evaluation taking these directions, e.g. `LRL`.
        #[arg(long, value_name = "LRL")]
        choices: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Certified interval for the expected convergence.
    Excv {
        expr: String,
        #[command(flatten)]
        budget: Budget,
        /// Scale by the weight `P` (`num/den`).
        #[arg(long, value_name = "P")]
        weight: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// List or apply instances of a transformation.
    Transform {
        expr: String,
        #[arg(long)]
        rule: String,
        #[arg(long, value_name = "C|S|R|A", default_value = "C")]
        class: String,
        /// Apply the match with this index.
        #[arg(long, value_name = "INDEX", conflicts_with = "list")]
        site: Option<usize>,
        /// List the matches (the default).
        #[arg(long)]
        list: bool,
    },
    /// Evaluate along a frontier of prob-sequences.
    Frontier {
        expr: String,
        #[command(flatten)]
        spec: FrontierSpec,
        #[arg(long, value_name = "N", default_value_t = 1000)]
        fuel: u64,
        #[arg(long)]
        json: bool,
    },
    /// Sufficient checks that the first term approximates the second.
    Equiv {
        left: String,
        right: String,
        /// same-ps, eqcr1, eqcr2 or eqcr3.
        #[arg(long, default_value = "same-ps")]
        criterion: String,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        spec: FrontierSpec,
        #[arg(long)]
        json: bool,
    },
    /// Search small contexts that separate two terms.
    Counterexample {
        left: String,
        right: String,
        /// Maximal context size in nodes.
        #[arg(long = "ctx-budget", value_name = "B", default_value_t = 7)]
        ctx_budget: usize,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        json: bool,
    },
    /// Random soundness trials of a transformation.
    Fuzz {
        #[arg(long)]
        rule: String,
        #[arg(long, value_name = "C|S|R|A", default_value = "C")]
        class: String,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Maximal generated term size in nodes.
        #[arg(long, default_value_t = 25)]
        size: usize,
        #[arg(long = "max-prob", value_name = "K", default_value_t = 4)]
        max_prob: usize,
        #[arg(long, value_name = "N", default_value_t = 2000)]
        fuel: u64,
        /// Print one line per trial.
        #[arg(long)]
        verbose: bool,
        #[arg(long)]
        json: bool,
    },
    /// Close random overlaps with the diagrams of a set.
    DiagramCheck {
        #[arg(long)]
        set: String,
        #[arg(long, value_name = "fork|commute")]
        mode: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print one line per trial.
        #[arg(long)]
        verbose: bool,
        #[arg(long)]
        json: bool,
    },
    /// Rewrite systems encoding diagram application.
    Trs {
        #[command(subcommand)]
        action: TrsAction,
    },
}

#[derive(Subcommand)]
enum TrsAction {
    /// Print the system in the rewriting-tool format.
    Emit {
        #[arg(long)]
        system: String,
    },
    /// Check the termination certificate of the system.
    Verify {
        #[arg(long)]
        system: String,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let options = parse_options(cli)?;
    let expr = |text: &str| read_expr(text, &options);
    match &cli.command {
        Command::Eval { expr: e, budget, trace, choices, json } => eval(&expr(e)?, *budget, *trace, choices.as_deref(), *json),
        Command::Excv { expr: e, budget, weight, json } => excv(&expr(e)?, *budget, weight.as_deref(), *json),
        Command::Transform { expr: e, rule, class, site, list: _ } => transform(&expr(e)?, rule, class, *site),
        Command::Frontier { expr: e, spec, fuel, json } => frontier(&expr(e)?, spec, *fuel, *json),
        Command::Equiv { left, right, criterion, budget, spec, json } => {
            equiv(&expr(left)?, &expr(right)?, criterion, *budget, spec, *json)
        }
        Command::Counterexample { left, right, ctx_budget, budget, json } => {
            counterexample(&expr(left)?, &expr(right)?, *ctx_budget, *budget, *json)
        }
        Command::Fuzz { rule, class, trials, seed, size, max_prob, fuel, verbose, json } => {
            let rule = parse_rule(rule)?;
            let class = parse_class(class)?;
            let params = FuzzParams::for_rule(rule, *trials, *seed, *size, *max_prob, *fuel);
            fuzz(rule, class, &params, *verbose, *json)
        }
        Command::DiagramCheck { set, mode, trials, seed, verbose, json } => {
            diagram_check(set, mode, *trials, *seed, options.extended, *verbose, *json)
        }
        Command::Trs { action } => trs(action),
    }
}

fn parse_options(cli: &Cli) -> Result<ParseOptions, Failure> {
    match &cli.ctors {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let ctors = CtorTable::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Ok(ParseOptions { extended: true, ctors })
        }
        None if cli.extended => Ok(ParseOptions::default()),
        None => Ok(ParseOptions::core()),
    }
}

/// Parses an argument; `-` reads the term from stdin.
fn read_expr(text: &str, options: &ParseOptions) -> Result<Expr, Failure> {
    let owned;
    let source = if text == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).map_err(|e| usage(format!("stdin: {e}")))?;
        owned = buf;
        owned.as_str()
    } else {
        text
    };
    parse_with(source, options).map_err(|e| usage(format!("parse error at {e}")))
}

fn parse_rule(name: &str) -> Result<TransformationId, Failure> {
    name.parse::<TransformationId>().map_err(|e| usage(e.to_string()))
}

fn parse_class(name: &str) -> Result<ContextClass, Failure> {
    name.parse::<ContextClass>().map_err(|e| usage(e.to_string()))
}

fn rules_string(rules: &[Rule]) -> String {
    let names: Vec<&str> = rules.iter().map(|r| r.name()).collect();
    names.join(",")
}

fn bounds_json(b: &ExcvBounds) -> Value {
    json!({
        "lo": weight_string(&b.lo),
        "hi": weight_string(&b.hi),
        "exact": b.exact,
        "fuel_mass": weight_string(&b.fuel_mass),
        "leaves": {
            "success": b.counts.success,
            "stuck": b.counts.stuck,
            "fuel_exhausted": b.counts.fuel_exhausted,
            "budget_exhausted": b.counts.budget_exhausted,
        },
    })
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

// ---------------------------------------------------------------------------
// Commands

fn eval(e: &Expr, budget: Budget, trace: bool, choices: Option<&str>, json: bool) -> Outcome {
    if let Some(word) = choices {
        let seq: ProbSeq = word.parse().map_err(usage)?;
        let replay = reduce_trace(e, &seq, budget.fuel);
        let end = match &replay.end {
            ReplayEnd::Whnf => "success".to_string(),
            ReplayEnd::Stuck(r) => format!("stuck ({r})"),
            ReplayEnd::FuelExhausted => "fuel-exhausted".to_string(),
            ReplayEnd::ChoicesExhausted => "choices-exhausted".to_string(),
        };
        if json {
            print_json(&json!({
                "command": "eval",
                "fuel": budget.fuel,
                "choices": seq.to_string(),
                "end": end,
                "consumed": replay.consumed,
                "term": print(&replay.term),
                "trace": replay.trace.iter().map(|r| r.name()).collect::<Vec<_>>(),
            }));
        } else {
            println!("{end} after {} of {} choices: {}", replay.consumed, seq.len(), print(&replay.term));
            if trace {
                println!("trace: {}", rules_string(&replay.trace));
            }
        }
        return Ok(ExitCode::SUCCESS);
    }
    let tree = explore(e, budget.max_prob, budget.fuel);
    let bounds = bounds_of(&tree);
    let leaves = tree.leaves();
    if json {
        let items: Vec<Value> = leaves
            .iter()
            .map(|l| {
                json!({
                    "probseq": l.probseq.to_string(),
                    "weight": weight_string(&l.weight),
                    "kind": l.kind.label(),
                    "term": print(l.kind.term()),
                    "trace": l.trace.iter().map(|r| r.name()).collect::<Vec<_>>(),
                })
            })
            .collect();
        print_json(&json!({
            "command": "eval",
            "k": budget.max_prob,
            "fuel": budget.fuel,
            "leaves": items,
            "bounds": bounds_json(&bounds),
        }));
        return Ok(ExitCode::SUCCESS);
    }
    for l in &leaves {
        let kind = match &l.kind {
            LeafKind::Stuck(_, r) => format!("stuck ({r})"),
            other => other.label().to_string(),
        };
        println!("{}\t{}\t{}\t{}", l.probseq, weight_string(&l.weight), kind, print(l.kind.term()));
        if trace {
            println!("\ttrace: {}", rules_string(&l.trace));
        }
    }
    println!("{bounds}");
    Ok(ExitCode::SUCCESS)
}

fn excv(e: &Expr, budget: Budget, weight: Option<&str>, json: bool) -> Outcome {
    let p: Weight = match weight {
        Some(s) => parse_weight(s).ok_or_else(|| usage(format!("invalid weight `{s}` (expected num/den)")))?,
        None => Weight::from_integer(1.into()),
    };
    let bounds = bounds_of(&explore(e, budget.max_prob, budget.fuel)).scale(&p);
    if json {
        let mut v = bounds_json(&bounds);
        v["command"] = json!("excv");
        v["k"] = json!(budget.max_prob);
        v["fuel"] = json!(budget.fuel);
        v["weight"] = json!(weight_string(&p));
        print_json(&v);
    } else {
        println!("{bounds}");
    }
    Ok(ExitCode::SUCCESS)
}

fn transform(e: &Expr, rule: &str, class: &str, site: Option<usize>) -> Outcome {
    let rule = parse_rule(rule)?;
    let class = parse_class(class)?;
    let matches = match_sites(e, rule, class);
    match site {
        None => {
            if matches.is_empty() {
                println!("no {rule} sites in class {class}");
            }
            for (i, m) in matches.iter().enumerate() {
                println!("{i}\t{m}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Some(i) => {
            let m = matches
                .get(i)
                .ok_or_else(|| usage(format!("site {i} out of range ({} {rule} sites in class {class})", matches.len())))?;
            let out = apply(e, m).map_err(|err| Failure { code: 1, message: err.to_string() })?;
            println!("{}", print(&out));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build_frontier(spec: &FrontierSpec) -> Result<Frontier, Failure> {
    match (&spec.words, spec.depth) {
        (Some(w), _) => Frontier::parse(w).map_err(|e| usage(e.to_string())),
        (None, Some(d)) => Ok(Frontier::full(d)),
        (None, None) => Err(usage("give a frontier with --depth or --words")),
    }
}

fn frontier_mode(spec: &FrontierSpec, fuel: u64) -> FrontierMode {
    if spec.relaxed {
        FrontierMode::Relaxed { fuel }
    } else {
        FrontierMode::Strict
    }
}

fn frontier_failure(e: FrontierError) -> Failure {
    match e {
        FrontierError::InvalidFrontier(_) => usage(e.to_string()),
        other => Failure { code: 1, message: other.to_string() },
    }
}

fn frontier_json(r: &FrontierResult) -> Value {
    let entries: Vec<Value> =
        r.0.iter().map(|(w, t)| json!({ "weight": weight_string(w), "term": print(t) })).collect();
    json!(entries)
}

fn frontier(e: &Expr, spec: &FrontierSpec, fuel: u64, json: bool) -> Outcome {
    let f = build_frontier(spec)?;
    let result = frontier_evaluate(e, &f, frontier_mode(spec, fuel)).map_err(frontier_failure)?;
    if json {
        print_json(&json!({
            "command": "frontier",
            "fuel": fuel,
            "relaxed": spec.relaxed,
            "words": f.words().iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            "entries": frontier_json(&result),
        }));
    } else {
        for (word, (w, t)) in f.words().iter().zip(&result.0) {
            println!("{word}\t{}\t{}", weight_string(w), print(t));
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Prints a verdict and maps it to an exit code.
fn report_verdict(v: &Verdict, json: Option<Value>) -> Outcome {
    match json {
        Some(mut obj) => {
            obj["verdict"] = json!(match v {
                Verdict::Holds => "holds",
                Verdict::FailsWith(_) => "fails",
                Verdict::Inconclusive(_) => "inconclusive",
            });
            match v {
                Verdict::FailsWith(ev) => obj["evidence"] = evidence_json(ev),
                Verdict::Inconclusive(r) => obj["reason"] = json!(r.to_string()),
                Verdict::Holds => {}
            }
            print_json(&obj);
        }
        None => match v {
            Verdict::FailsWith(Evidence::Context { context, .. }) => {
                println!("{v}");
                println!("witness: ({context})");
            }
            _ => println!("{v}"),
        },
    }
    match v {
        Verdict::Holds => Ok(ExitCode::SUCCESS),
        Verdict::FailsWith(_) => Ok(ExitCode::from(1)),
        Verdict::Inconclusive(r) => {
            eprintln!("warning: inconclusive ({r}); raise the budget to decide");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn evidence_json(ev: &Evidence) -> Value {
    match ev {
        Evidence::ProbSeq(s) => json!({ "kind": "prob-sequence", "probseq": s.to_string() }),
        Evidence::Context { context, left, right } => json!({
            "kind": "context",
            "context": context.label,
            "left": bounds_json(left),
            "right": bounds_json(right),
        }),
        Evidence::Entry { term, left, right } => json!({
            "kind": "entry",
            "term": print(term),
            "left": weight_string(left),
            "right": weight_string(right),
        }),
    }
}

fn equiv(s: &Expr, t: &Expr, criterion: &str, budget: Budget, spec: &FrontierSpec, json: bool) -> Outcome {
    let header = json!({
        "command": "equiv",
        "criterion": criterion,
        "k": budget.max_prob,
        "fuel": budget.fuel,
    });
    if criterion == "same-ps" {
        let v = same_prob_sequences_check(s, t, budget.max_prob, budget.fuel);
        return report_verdict(&v, json.then_some(header));
    }
    let c: Criterion = criterion.parse().map_err(|e: String| usage(format!("{e} (expected same-ps, eqcr1, eqcr2 or eqcr3)")))?;
    let f = build_frontier(spec)?;
    let mode = frontier_mode(spec, budget.fuel);
    let a = frontier_evaluate(s, &f, mode).map_err(frontier_failure)?;
    let b = frontier_evaluate(t, &f, mode).map_err(frontier_failure)?;
    let probe = DivergenceProbe { k: budget.max_prob, fuel: budget.fuel };
    let v = frontier_criteria_check(&a, &b, c, probe);
    let header = json.then(|| {
        let mut h = header;
        h["words"] = json!(f.words().iter().map(|w| w.to_string()).collect::<Vec<_>>());
        h["left"] = frontier_json(&a);
        h["right"] = frontier_json(&b);
        h
    });
    report_verdict(&v, header)
}

fn counterexample(s: &Expr, t: &Expr, ctx_budget: usize, budget: Budget, json: bool) -> Outcome {
    let v = counterexample_search(s, t, ctx_budget, budget.max_prob, budget.fuel);
    let header = json!({
        "command": "counterexample",
        "ctx_budget": ctx_budget,
        "k": budget.max_prob,
        "fuel": budget.fuel,
    });
    report_verdict(&v, json.then_some(header))
}

fn fuzz(rule: TransformationId, class: ContextClass, params: &FuzzParams, verbose: bool, json: bool) -> Outcome {
    let report = soundness_fuzz(rule, class, params);
    let violations = report.violations();
    if json {
        print_json(&json!({
            "command": "fuzz",
            "rule": rule.name(),
            "class": class.to_string(),
            "seed": params.seed,
            "k": params.k,
            "fuel": params.fuel,
            "trials": params.trials,
            "applied": report.records.len(),
            "skipped": report.skipped.len(),
            "violations": violations.iter().map(|r| json!({
                "trial": r.index,
                "source": print(&r.source),
                "target": print(&r.target),
                "site": r.applied.to_string(),
                "source_bounds": bounds_json(&r.source_bounds),
                "target_bounds": bounds_json(&r.target_bounds),
            })).collect::<Vec<_>>(),
            "prob_sequence_checked": report.prob_sequence_checked(),
            "prob_sequence_failures": report.prob_sequence_failures().len(),
        }));
    } else {
        if verbose {
            for r in &report.records {
                println!("{}", r.line());
            }
        }
        println!("{report}");
    }
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn diagram_check(set: &str, mode: &str, trials: usize, seed: u64, extended: bool, verbose: bool, json: bool) -> Outcome {
    let set = diagram_set(set).map_err(|e| usage(e.to_string()))?;
    let mode: Mode = mode.parse().map_err(usage)?;
    if set.extended && !extended {
        return Err(usage(format!("set `{}` belongs to the extended calculus; pass --extended", set.name)));
    }
    if !set.modes().contains(&mode) {
        return Err(usage(format!("set `{}` has no {mode} diagrams", set.name)));
    }
    let params = ValidationParams::for_set(&set, trials, seed);
    let report = validate_set(&set, mode, &params);
    if json {
        print_json(&json!({
            "command": "diagram-check",
            "set": report.set,
            "mode": mode.to_string(),
            "seed": seed,
            "trials": trials,
            "closed": report.closed(),
            "histogram": report.histogram(),
            "lines": report.lines.iter().map(|l| l.line()).collect::<Vec<_>>(),
        }));
    } else {
        if verbose {
            for l in &report.lines {
                println!("{}", l.line());
            }
        }
        println!("{report}");
        for (id, n) in report.histogram() {
            println!("  {id}\t{n}");
        }
    }
    Ok(if report.all_closed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn trs(action: &TrsAction) -> Outcome {
    let system = |name: &str| name.parse::<SystemId>().map_err(|e: TrsError| usage(e.to_string()));
    match action {
        TrsAction::Emit { system: name } => {
            print!("{}", emit_trs(system(name)?));
            Ok(ExitCode::SUCCESS)
        }
        TrsAction::Verify { system: name } => {
            let v = verify_termination_claim(system(name)?).map_err(|e| usage(e.to_string()))?;
            println!("{name}: {v}");
            Ok(if v.holds() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
