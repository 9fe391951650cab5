//! End-to-end runs of the `lazyprob` binary: output formats and exit codes.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lazyprob")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn excv_prints_exact_rationals() {
    let o = run(&["excv", "K <+> Bot", "--max-prob", "1", "--fuel", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "lo=1/2 hi=1/2 exact=true");
}

#[test]
fn excv_weight_scales_the_interval() {
    let o = run(&["excv", "K <+> Bot", "--max-prob", "1", "--fuel", "10", "--weight", "1/2"]);
    assert_eq!(stdout(&o).trim(), "lo=1/4 hi=1/4 exact=true");
    let o = run(&["excv", "K", "--weight", "half"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn excv_json_carries_the_parameters() {
    let o = run(&["excv", "K <+> Bot", "--max-prob", "1", "--fuel", "10", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k"], 1);
    assert_eq!(v["fuel"], 10);
    assert_eq!(v["lo"], "1/2");
    assert_eq!(v["hi"], "1/2");
    assert_eq!(v["exact"], true);
    assert_eq!(v["leaves"]["stuck"], 1);
}

#[test]
fn counterexample_reports_the_separating_context() {
    let o = run(&["counterexample", "K <+> K2", "K", "--ctx-budget", "7", "--max-prob", "2", "--fuel", "50"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("witness: ([·] id Bot)"), "{}", stdout(&o));
}

#[test]
fn counterexample_without_witness_is_a_warning() {
    let o = run(&["counterexample", "K", "K", "--ctx-budget", "3", "--max-prob", "2", "--fuel", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: inconclusive"));
}

#[test]
fn trs_verify_exit_codes() {
    let o = run(&["trs", "verify", "--system", "lll-R1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("KBO"));
    assert_eq!(run(&["trs", "verify", "--system", "gc-ucp-R1"]).status.code(), Some(2));
    assert_eq!(run(&["trs", "verify", "--system", "nope"]).status.code(), Some(2));
}

#[test]
fn trs_emit_prints_the_system() {
    let o = run(&["trs", "emit", "--system", "cpx-R"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "(VAR x)\n(RULES\n  Scpx(SR(x)) -> SR(x)\n  Scpx(SR(x)) -> SR(Scpx(x))\n  Scpx(SR(x)) -> SR(Scpx(Scpx(x)))\n)\n"
    );
}

#[test]
fn parse_errors_exit_two_with_a_location() {
    let o = run(&["excv", "a <+> b <+> c"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1:"), "{}", stderr(&o));
}

#[test]
fn extended_syntax_needs_the_flag() {
    let src = "case (True <+> False) of {True -> a; False -> b}";
    assert_eq!(run(&["eval", src, "--max-prob", "1"]).status.code(), Some(2));
    let o = run(&["--extended", "eval", src, "--max-prob", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("L\t1/2\t") && lines[0].ends_with("\ta"), "{out}");
    assert!(lines[1].starts_with("R\t1/2\t") && lines[1].ends_with("\tb"), "{out}");
}

#[test]
fn ctors_file_replaces_the_table() {
    let dir = std::env::temp_dir().join(format!("lazyprob-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("colors.ctors");
    std::fs::write(&path, "-- three colors\nColor = Red/0 | Green/0 | Blue/0\n").unwrap();
    let p = path.to_str().unwrap();
    let o = run(&["--ctors", p, "excv", "case Green of {Red -> Bot; Green -> K; Blue -> Bot}"]);
    assert_eq!(stdout(&o).trim(), "lo=1/1 hi=1/1 exact=true", "{}", stderr(&o));
    assert_eq!(run(&["--ctors", p, "excv", "True"]).status.code(), Some(2));
    std::fs::write(&path, "Color = red/0\n").unwrap();
    assert_eq!(run(&["--ctors", p, "excv", "K"]).status.code(), Some(2));
}

#[test]
fn eval_replays_choices() {
    let o = run(&["eval", "K <+> Bot", "--choices", "L", "--fuel", "10", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("success after 1 of 1 choices: \\x.\\y.x"), "{out}");
    assert!(out.contains("trace: probl"), "{out}");
    assert_eq!(run(&["eval", "K", "--choices", "LX"]).status.code(), Some(2));
}

#[test]
fn eval_lists_every_leaf() {
    let o = run(&["eval", "(K <+> K2) <+> Bot", "--max-prob", "2", "--fuel", "50", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let seqs: Vec<&str> = v["leaves"].as_array().unwrap().iter().map(|l| l["probseq"].as_str().unwrap()).collect();
    assert_eq!(seqs, ["LL", "LR", "R"]);
    assert_eq!(v["bounds"]["lo"], "1/2");
}

#[test]
fn transform_lists_and_applies() {
    let o = run(&["transform", r"(\x.x) K", "--rule", "lbeta", "--class", "R", "--list"]);
    assert_eq!(stdout(&o).trim(), "0\tlbeta at root");
    let o = run(&["transform", r"(\x.x) K", "--rule", "lbeta", "--class", "R", "--site", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = lazyprob::parse(stdout(&o).trim()).unwrap();
    assert!(lazyprob::alpha_equiv(&out, &lazyprob::parse("let x = K in x").unwrap()), "{}", stdout(&o));
    assert_eq!(run(&["transform", r"(\x.x) K", "--rule", "lbeta", "--site", "3"]).status.code(), Some(2));
    assert_eq!(run(&["transform", "K", "--rule", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["transform", "K", "--rule", "lbeta", "--class", "Q"]).status.code(), Some(2));
}

#[test]
fn frontier_words_and_depth() {
    let o = run(&["frontier", "(K <+> K2) <+> (K <+> Bot)", "--depth", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = run(&["frontier", "(K <+> K2) <+> K", "--words", "LL,LR,R"]);
    let weights: Vec<String> = stdout(&o).lines().map(|l| l.split('\t').nth(1).unwrap().to_string()).collect();
    assert_eq!(weights, ["1/4", "1/4", "1/2"]);
    assert_eq!(run(&["frontier", "K <+> K", "--words", "L"]).status.code(), Some(2));
    assert_eq!(run(&["frontier", "K", "--depth", "1"]).status.code(), Some(1));
    assert_eq!(run(&["frontier", "K <+> K"]).status.code(), Some(2));
}

#[test]
fn equiv_criteria_exit_codes() {
    assert_eq!(run(&["equiv", "K <+> K2", "K2 <+> K", "--criterion", "eqcr2", "--depth", "1"]).status.code(), Some(0));
    let o = run(&["equiv", "K <+> Bot", "K", "--criterion", "same-ps"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("prob-sequence L"));
    let o = run(&["equiv", "Omega", "K", "--max-prob", "1", "--fuel", "30"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
    assert_eq!(run(&["equiv", "K", "K", "--criterion", "eqcr9", "--depth", "1"]).status.code(), Some(2));
}

#[test]
fn fuzz_reports_violations_through_the_exit_code() {
    let o = run(&["fuzz", "--rule", "probid", "--trials", "20", "--seed", "3", "--size", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("violations=0"));
    let o = run(&["fuzz", "--rule", "probassoc", "--trials", "200", "--seed", "1", "--size", "15", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 1);
    assert_eq!(v["k"], 4);
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn diagram_check_summarises_trials() {
    let o = run(&["diagram-check", "--set", "lll-fork", "--mode", "fork", "--trials", "10", "--seed", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 1);
    assert_eq!(v["closed"], 10);
    assert_eq!(run(&["diagram-check", "--set", "ext-abs", "--mode", "fork", "--trials", "1"]).status.code(), Some(2));
    assert_eq!(run(&["diagram-check", "--set", "nope", "--mode", "fork"]).status.code(), Some(2));
    assert_eq!(run(&["diagram-check", "--set", "lll-fork", "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}
