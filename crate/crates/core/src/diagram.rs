//! Forking and commuting diagram sets and their empirical validation.
//!
//! A forking overlap is `s' <-sr- s -S,T-> t`, a commuting overlap is
//! `s -S,T-> t -sr-> t'`. A diagram closes an overlap with two labeled
//! paths that meet in alpha-equivalent terms. Diagram sets are declarative
//! tables; the search interprets them by bounded breadth-first expansion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::DiagramError;
use crate::gen::{trial_seed, GenConfig, Generator};
use crate::reduce::{is_whnf, sr_step, Dir, Rule, StepVerdict};
use crate::syntax::{alpha_equiv, fingerprint, freshen, obeys_convention, ContextClass, Expr};
use crate::transform::{apply, match_sites, RedexMatch, TransformationId};

/// Forking or commuting.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Mode {
    Fork,
    Commute,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fork => "fork",
            Mode::Commute => "commute",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fork" => Ok(Mode::Fork),
            "commute" => Ok(Mode::Commute),
            _ => Err(format!("unknown diagram mode `{s}`")),
        }
    }
}

/// How often an edge is taken.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mult {
    One,
    ZeroOrOne,
    OneOrMore,
    ZeroOrMore,
}

impl Mult {
    fn bounds(self, plus_cap: usize) -> (usize, usize) {
        match self {
            Mult::One => (1, 1),
            Mult::ZeroOrOne => (0, 1),
            Mult::OneOrMore => (1, plus_cap),
            Mult::ZeroOrMore => (0, plus_cap),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Mult::One => "",
            Mult::ZeroOrOne => "?",
            Mult::OneOrMore => "+",
            Mult::ZeroOrMore => "*",
        }
    }
}

/// Label of a standard-reduction edge: a named rule group or a variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SrLabel {
    Group(String),
    Var(char),
}

/// Label of a transformation edge: a union of rules or a variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TransLabel {
    Ids(Vec<TransformationId>),
    Var(char),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StepLabel {
    Sr(SrLabel),
    Trans(ContextClass, TransLabel),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Edge {
    pub label: StepLabel,
    pub mult: Mult,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            StepLabel::Sr(SrLabel::Group(g)) => write!(f, "sr,{g}")?,
            StepLabel::Sr(SrLabel::Var(v)) => write!(f, "sr,{v}")?,
            StepLabel::Trans(c, TransLabel::Var(v)) => write!(f, "{c},{v}")?,
            StepLabel::Trans(c, TransLabel::Ids(ids)) => {
                let names: Vec<&str> = ids.iter().map(|t| t.name()).collect();
                write!(f, "{c},{}", names.join("|"))?
            }
        }
        f.write_str(self.mult.suffix())
    }
}

/// One diagram. For forks `left` starts at the sr result and `right` at the
/// transformation result; for commuting diagrams `left` starts at the
/// source and `right` at the end of the given sr step.
#[derive(Clone, Debug)]
pub struct Diagram {
    pub id: String,
    pub mode: Mode,
    pub given_sr: SrLabel,
    pub given_trans: TransLabel,
    pub left: Vec<Edge>,
    pub right: Vec<Edge>,
    /// Allowed values of label variables; unconstrained variables are absent.
    pub constraints: BTreeMap<char, Vec<String>>,
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &[Edge]| {
            if p.is_empty() {
                "-".to_string()
            } else {
                p.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ")
            }
        };
        let sr = Edge { label: StepLabel::Sr(self.given_sr.clone()), mult: Mult::One };
        let tr = Edge { label: StepLabel::Trans(ContextClass::S, self.given_trans.clone()), mult: Mult::One };
        write!(f, "{} {}: {} / {} => {} / {}", self.id, self.mode, sr, tr, path(&self.left), path(&self.right))?;
        for (v, vals) in &self.constraints {
            write!(f, " {v}={}", vals.join(","))?;
        }
        Ok(())
    }
}

/// What the base cases promise about WHNFs for `s -S,T-> t`.
#[derive(Clone, Debug)]
pub struct BaseCases {
    /// `s` a WHNF implies `t` a WHNF.
    pub forward: bool,
    /// `t` a WHNF implies `s` reaches a WHNF along these sr edges.
    pub backward: Vec<Edge>,
}

#[derive(Clone, Debug)]
pub struct DiagramSet {
    pub name: String,
    pub extended: bool,
    /// Transformations whose overlaps the set closes.
    pub transformations: Vec<TransformationId>,
    pub diagrams: Vec<Diagram>,
    pub base_cases: BaseCases,
}

impl DiagramSet {
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::new();
        for m in [Mode::Fork, Mode::Commute] {
            if self.diagrams.iter().any(|d| d.mode == m) {
                out.push(m);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Tables
//
// Row syntax: `mode | given sr | given transformation | left | right | vars`.
// Edges are `sr:LABEL` or `S:LABEL`, unions are written `gc/ucp`, a trailing
// `+`, `*` or `?` is a multiplicity and `-` is the empty path. Single
// letters are label variables.

struct SetTable {
    name: &'static str,
    extended: bool,
    transformations: &'static [TransformationId],
    forward: bool,
    backward: &'static str,
    rows: &'static [&'static str],
}

const TABLES: &[SetTable] = &[
    SetTable {
        name: "lll-fork",
        extended: false,
        transformations: &[TransformationId::Lll],
        forward: true,
        backward: "sr:llet?",
        rows: &[
            "fork | sr:a | S:lll | - | - | a=lapp,llet",
            "fork | sr:a | S:lll | S:lll | sr:a |",
            "fork | sr:a | S:lll | - | sr:a | a=probl,probr",
            "fork | sr:lapp | S:llet | S:lapp S:llet | sr:lapp |",
        ],
    },
    SetTable {
        name: "lll-commute",
        extended: false,
        transformations: &[TransformationId::Lll],
        forward: true,
        backward: "sr:llet?",
        rows: &[
            "commute | sr:a | S:b | sr:a S:b | - | b=lapp,llet",
            "commute | sr:a | S:lll | sr:a sr:lll | - |",
            "commute | sr:a | S:lll | sr:a | - | a=probl,probr",
            "commute | sr:lapp | S:llet | sr:lapp S:lapp S:llet | - |",
            "commute | sr:lapp | S:llet | sr:lapp sr:lapp S:llet | - |",
        ],
    },
    SetTable {
        name: "cp-fork",
        extended: false,
        transformations: &[TransformationId::Cp],
        forward: true,
        backward: "sr:cp?",
        rows: &[
            "fork | sr:cp | S:cpS | - | - |",
            "fork | sr:a | S:cpS | S:cpS | sr:a |",
            "fork | sr:a | S:cpS | - | sr:a | a=probl,probr",
            "fork | sr:a | S:cpd | S:cpd | sr:a |",
            "fork | sr:lbeta | S:cpd | S:cpS | sr:lbeta |",
            "fork | sr:a | S:cpd | - | sr:a | a=probl,probr",
            "fork | sr:cp | S:cpd | S:cpd S:cpd | sr:cp |",
        ],
    },
    SetTable {
        name: "cp-commute",
        extended: false,
        transformations: &[TransformationId::Cp],
        forward: true,
        backward: "sr:cp?",
        rows: &[
            "commute | sr:a | S:cpS | sr:a S:cpS | - |",
            "commute | sr:a | S:cpS | sr:a | - | a=probl,probr",
            "commute | sr:a | S:cpd | sr:a S:cpd | - |",
            "commute | sr:lbeta | S:cpd | sr:lbeta S:cpS | - |",
            "commute | sr:a | S:cpd | sr:a | - | a=probl,probr",
            "commute | sr:cp | S:cpd | sr:cp S:cpd S:cpd | - |",
            "commute | sr:lbeta | S:cpS | sr:lbeta sr:cp | - |",
        ],
    },
    SetTable {
        name: "cpx",
        extended: false,
        transformations: &[TransformationId::Cpx],
        forward: true,
        backward: "",
        rows: &[
            "fork | sr:a | S:cpx | S:cpx | sr:a |",
            "fork | sr:a | S:cpx | - | sr:a | a=cp,probl,probr",
            "fork | sr:cp | S:cpx | S:cpx S:cpx | sr:cp |",
            "commute | sr:a | S:cpx | sr:a S:cpx | - |",
            "commute | sr:a | S:cpx | sr:a | - | a=cp,probl,probr",
            "commute | sr:cp | S:cpx | sr:cp S:cpx S:cpx | - |",
        ],
    },
    SetTable {
        name: "xch",
        extended: false,
        transformations: &[TransformationId::Xch],
        forward: true,
        backward: "",
        rows: &[
            "fork | sr:a | S:xch | S:xch | sr:a |",
            "fork | sr:a | S:xch | - | sr:a | a=probl,probr",
            "commute | sr:a | S:xch | sr:a S:xch | - |",
            "commute | sr:a | S:xch | sr:a | - | a=probl,probr",
        ],
    },
    SetTable {
        name: "gc-ucp-fork",
        extended: false,
        transformations: &[TransformationId::Gc, TransformationId::Ucp],
        forward: true,
        backward: "sr:llet? sr:cp?",
        rows: &[
            "fork | sr:a | S:b | S:b | sr:a | b=gc,ucp",
            "fork | sr:a | S:gc | - | sr:a | a=llet,lapp,probl,probr",
            "fork | sr:a | S:ucp | - | sr:a | a=probl,probr",
            "fork | sr:a | S:ucp | S:gc | sr:a | a=probl,probr,cp",
            "fork | sr:cp | S:ucp | S:gc | - |",
            "fork | sr:llet | S:ucp | S:ucp | sr:lll+ |",
            // Supplementary: the reduct is garbage collected into t.
            "fork | sr:a | S:b | S:b | - | a=llet,lapp b=gc,ucp",
        ],
    },
    SetTable {
        name: "gc-ucp-commute",
        extended: false,
        transformations: &[TransformationId::Gc, TransformationId::Ucp],
        forward: true,
        backward: "sr:llet? sr:cp?",
        rows: &[
            "commute | sr:a | S:b | sr:a S:b | - | b=gc,ucp",
            "commute | sr:lbeta | S:ucp | sr:lll+ sr:cp sr:lbeta S:gc | - |",
            "commute | sr:a | S:gc/ucp | sr:a | - | a=probl,probr",
            "commute | sr:a | S:ucp | sr:lll+ sr:a S:ucp/gc | - |",
            "commute | sr:a | S:gc | sr:a sr:lll+ S:gc | - |",
            "commute | sr:lbeta | S:ucp | sr:cp sr:lbeta S:gc | - |",
            "commute | sr:a | S:ucp | sr:a S:gc | - | a=probl,probr,cp",
            "commute | sr:lll | S:ucp | sr:lll S:ucp | sr:lll* |",
            "commute | sr:lbeta | S:ucp | sr:lbeta sr:llet S:ucp | - |",
            "commute | sr:lll | S:ucp | sr:lll sr:lll+ S:ucp | sr:lll* |",
            "commute | sr:a | S:gc | sr:lll sr:a sr:lll S:gc | - | a=lbeta,cp,lapp",
            // Supplementary: floating first, as in the extended set.
            "commute | sr:a | S:gc | sr:lll+ sr:a S:gc | - |",
        ],
    },
    SetTable {
        name: "ext-lll",
        extended: true,
        transformations: &[TransformationId::Lll],
        forward: true,
        backward: "sr:lll?",
        rows: &[
            "fork | sr:a | S:lll | - | - | a=lacs,llet",
            "fork | sr:a | S:b | S:b | sr:a | b=lacs,llet",
            "fork | sr:a | S:b | - | sr:a | a=probl,probr,case,seq b=lacs,llet",
            "fork | sr:lll | S:llet | S:lacs S:llet | sr:lll |",
            "commute | sr:a | S:b | sr:a S:b | - | b=lacs,llet",
            "commute | sr:a | S:b | sr:a | - | a=probl,probr,case,seq b=lacs,llet",
            "commute | sr:a | S:b | sr:a sr:lll | - | b=lacs,llet",
            "commute | sr:lll | S:b | sr:lll+ | - | b=lacs,llet",
            "commute | sr:lll | S:llet | sr:lll S:lacs S:llet | - |",
        ],
    },
    SetTable {
        name: "ext-cp",
        extended: true,
        transformations: &[TransformationId::Cp],
        forward: true,
        backward: "sr:cp?",
        rows: &[
            "fork | sr:a | S:b | S:b | sr:a | b=cpS,cpd",
            "fork | sr:a | S:b | - | sr:a | a=probl,probr,case,seq b=cpS,cpd",
            "fork | sr:a | S:cpS | - | - |",
            "fork | sr:lbeta | S:cpd | S:cpS | sr:lbeta |",
            "fork | sr:cp | S:cpd | S:cpd S:cpd | sr:cp |",
            "commute | sr:a | S:b | sr:a S:b | - | b=cpS,cpd",
            "commute | sr:a | S:b | sr:a | - | a=probl,probr,case,seq b=cpS,cpd",
            "commute | sr:a | S:cpS | sr:a sr:cp | - | a=seq,lbeta",
            "commute | sr:lbeta | S:cpd | sr:lbeta S:cpS | - |",
            "commute | sr:cp | S:cpd | sr:cp S:cpd S:cpd | - |",
        ],
    },
    SetTable {
        name: "ext-xch",
        extended: true,
        transformations: &[TransformationId::Xch],
        forward: true,
        backward: "",
        rows: &[
            "fork | sr:a | S:xch | S:xch | sr:a |",
            "fork | sr:a | S:xch | - | sr:a | a=probl,probr,case,seq",
            "commute | sr:a | S:xch | sr:a S:xch | - |",
            "commute | sr:a | S:xch | sr:a | - | a=probl,probr,case,seq",
        ],
    },
    SetTable {
        name: "ext-cpx",
        extended: true,
        transformations: &[TransformationId::Cpx],
        forward: true,
        backward: "",
        rows: &[
            "fork | sr:a | S:cpx | S:cpx | sr:a |",
            "fork | sr:a | S:cpx | - | sr:a | a=probl,probr,case,seq",
            "fork | sr:cp | S:cpx | S:cpx S:cpx | sr:cp |",
            "commute | sr:a | S:cpx | sr:a S:cpx | - |",
            "commute | sr:a | S:cpx | sr:a | - | a=probl,probr,case,seq,cp",
            // Supplementary: the core triangle for copying.
            "fork | sr:a | S:cpx | - | sr:a | a=cp",
            "commute | sr:cp | S:cpx | sr:cp S:cpx S:cpx | - |",
        ],
    },
    SetTable {
        name: "ext-cpcx",
        extended: true,
        transformations: &[TransformationId::Cpcx],
        forward: false,
        backward: "",
        rows: &[
            "fork | sr:a | S:cpcx | S:cpcx | sr:a |",
            "fork | sr:a | S:cpcx | - | sr:a | a=probl,probr,case,seq",
            "fork | sr:a | S:cpcx | S:abs | sr:a | a=probl,probr,case,seq",
            "fork | sr:case | S:cpcx | S:cpcx/abs S:cpx+ S:xch+ | sr:case |",
            "fork | sr:cp | S:cpcx | S:cpcx S:cpcx | sr:cp |",
            "fork | sr:cp | S:cpcx | S:cpcx+ S:cpx+ S:gc | sr:cp |",
            "commute | sr:a | S:cpcx | sr:a S:cpcx | - |",
            "commute | sr:a | S:cpcx | sr:a | - | a=probl,probr,case,seq",
            "commute | sr:a | S:cpcx | sr:a S:abs | - | a=probl,probr,case,seq",
            "commute | sr:case | S:cpcx | sr:case S:cpcx/abs S:cpx+ S:xch+ | - |",
            "commute | sr:cp | S:cpcx | sr:cp S:cpcx S:cpcx | - |",
            "commute | sr:cp | S:cpcx | sr:cp S:cpcx+ S:cpx+ S:gc | - |",
        ],
    },
    SetTable {
        name: "ext-abs",
        extended: true,
        transformations: &[TransformationId::Abs],
        forward: true,
        backward: "",
        rows: &[
            "fork | sr:a | S:abs | S:abs | sr:a |",
            "fork | sr:a | S:abs | - | sr:a | a=probl,probr,case,seq",
            "fork | sr:case | S:abs | S:abs S:cpx+ S:xch+ | sr:case |",
            "commute | sr:a | S:abs | sr:a S:abs | - |",
            "commute | sr:a | S:abs | sr:a | - | a=probl,probr,case,seq",
            "commute | sr:case | S:abs | sr:case S:abs S:cpx+ S:xch+ | - |",
        ],
    },
    SetTable {
        name: "ext-gc",
        extended: true,
        transformations: &[TransformationId::Gc],
        forward: true,
        backward: "sr:lll?",
        rows: &[
            "fork | sr:a | S:gc | S:gc | sr:a |",
            "fork | sr:a | S:gc | - | sr:a | a=probl,probr,case,seq,lll",
            // Supplementary: the reduct is garbage collected into t.
            "fork | sr:a | S:gc | S:gc | - | a=lll",
            "commute | sr:a | S:gc | sr:a S:gc | - |",
            "commute | sr:a | S:gc | sr:a | - | a=probl,probr,case,seq",
            "commute | sr:a | S:gc | sr:lll+ sr:a S:gc | - |",
            "commute | sr:a | S:gc | sr:lll+ sr:a sr:lll S:gc | - | a=lbeta,lll,case",
        ],
    },
    SetTable {
        name: "ext-ucp",
        extended: true,
        transformations: &[TransformationId::Ucp],
        forward: true,
        backward: "sr:lll? sr:cp?",
        rows: &[
            "fork | sr:a | S:ucp | S:ucp | sr:a |",
            "fork | sr:cp | S:ucp | S:gc | - |",
            "fork | sr:a | S:ucp | - | sr:a | a=probl,probr,case,seq",
            "fork | sr:a | S:ucp | S:gc | sr:a | a=case,seq,cp,probl,probr",
            "fork | sr:lll | S:ucp | S:ucp | sr:lll* |",
            "fork | sr:case | S:ucp | S:gc S:ucp+ | sr:case |",
            "commute | sr:a | S:ucp | sr:a S:ucp | - |",
            "commute | sr:a | S:ucp | sr:a | - | a=probl,probr,case,seq",
            "commute | sr:a | S:ucp | sr:a S:gc | - | a=probl,probr,case,seq",
            "commute | sr:lbeta | S:ucp | sr:lbeta sr:lll S:ucp | - |",
            "commute | sr:a | S:ucp | sr:lll* sr:cp sr:a S:gc | - | a=lbeta,seq",
            "commute | sr:a | S:ucp | sr:lll+ sr:a S:ucp/gc | - | a=lbeta,cp,probl,probr,case,seq",
            "commute | sr:case | S:ucp | sr:lll sr:case sr:lll S:ucp | - |",
            "commute | sr:case | S:ucp | sr:lll sr:case sr:lll? S:gc S:ucp+ | - |",
            "commute | sr:lll | S:ucp | sr:lll+ S:ucp | sr:lll* |",
            "commute | sr:lbeta | S:ucp | sr:lll sr:cp sr:lbeta sr:lll S:gc | - |",
        ],
    },
];

/// Rules named by an sr label group.
pub fn sr_group(name: &str) -> Option<&'static [Rule]> {
    use Rule::*;
    Some(match name {
        "lbeta" => &[Lbeta],
        "cp" => &[CpIn, CpE],
        "llet" => &[LletIn, LletE],
        "lapp" => &[Lapp],
        "lcase" => &[Lcase],
        "lseq" => &[Lseq],
        "lll" => &[LletIn, LletE, Lapp, Lcase, Lseq],
        "lacs" => &[Lapp, Lcase, Lseq],
        "probl" => &[Probl],
        "probr" => &[Probr],
        "case" => &[CaseC, CaseIn, CaseE],
        "seq" => &[SeqC, SeqIn, SeqE],
        _ => return None,
    })
}

/// The smallest group a rule belongs to.
fn family(rule: Rule) -> &'static str {
    use Rule::*;
    match rule {
        Lbeta => "lbeta",
        CpIn | CpE => "cp",
        LletIn | LletE => "llet",
        Lapp => "lapp",
        Lcase => "lcase",
        Lseq => "lseq",
        Probl => "probl",
        Probr => "probr",
        CaseC | CaseIn | CaseE => "case",
        SeqC | SeqIn | SeqE => "seq",
    }
}

fn is_var_name(s: &str) -> Option<char> {
    let mut cs = s.chars();
    match (cs.next(), cs.next()) {
        (Some(c), None) if c.is_ascii_lowercase() => Some(c),
        _ => None,
    }
}

fn parse_edge(tok: &str) -> Edge {
    let (body, mult) = match tok.chars().last() {
        Some('+') => (&tok[..tok.len() - 1], Mult::OneOrMore),
        Some('*') => (&tok[..tok.len() - 1], Mult::ZeroOrMore),
        Some('?') => (&tok[..tok.len() - 1], Mult::ZeroOrOne),
        _ => (tok, Mult::One),
    };
    let (kind, name) = body.split_once(':').unwrap_or_else(|| panic!("edge `{tok}` lacks a kind"));
    let label = match kind {
        "sr" => StepLabel::Sr(match is_var_name(name) {
            Some(v) => SrLabel::Var(v),
            None => {
                assert!(sr_group(name).is_some(), "unknown sr group `{name}`");
                SrLabel::Group(name.to_string())
            }
        }),
        "S" => StepLabel::Trans(ContextClass::S, parse_trans_label(name)),
        _ => panic!("unknown edge kind `{kind}`"),
    };
    Edge { label, mult }
}

fn parse_trans_label(name: &str) -> TransLabel {
    match is_var_name(name) {
        Some(v) => TransLabel::Var(v),
        None => TransLabel::Ids(
            name.split('/').map(|n| n.parse().unwrap_or_else(|_| panic!("unknown transformation `{n}`"))).collect(),
        ),
    }
}

fn parse_path(s: &str) -> Vec<Edge> {
    let s = s.trim();
    if s == "-" || s.is_empty() {
        return Vec::new();
    }
    s.split_whitespace().map(parse_edge).collect()
}

fn parse_row(set: &str, index: usize, row: &str) -> Diagram {
    let cols: Vec<&str> = row.split('|').map(str::trim).collect();
    assert_eq!(cols.len(), 6, "diagram row `{row}` needs six columns");
    let mode: Mode = cols[0].parse().expect("diagram mode");
    let given_sr = match parse_edge(cols[1]).label {
        StepLabel::Sr(l) => l,
        _ => panic!("given sr edge expected in `{row}`"),
    };
    let given_trans = match parse_edge(cols[2]).label {
        StepLabel::Trans(_, l) => l,
        _ => panic!("given transformation edge expected in `{row}`"),
    };
    let mut constraints = BTreeMap::new();
    for c in cols[5].split_whitespace() {
        let (v, vals) = c.split_once('=').expect("constraint `v=x,y`");
        let v = is_var_name(v).expect("constraint variable");
        constraints.insert(v, vals.split(',').map(str::to_string).collect());
    }
    Diagram {
        id: format!("{set}#{}", index + 1),
        mode,
        given_sr,
        given_trans,
        left: parse_path(cols[3]),
        right: parse_path(cols[4]),
        constraints,
    }
}

fn build(table: &SetTable) -> DiagramSet {
    DiagramSet {
        name: table.name.to_string(),
        extended: table.extended,
        transformations: table.transformations.to_vec(),
        diagrams: table.rows.iter().enumerate().map(|(i, r)| parse_row(table.name, i, r)).collect(),
        base_cases: BaseCases { forward: table.forward, backward: parse_path(table.backward) },
    }
}

/// Names of the built-in sets.
pub fn set_names() -> Vec<&'static str> {
    TABLES.iter().map(|t| t.name).collect()
}

/// All built-in sets.
pub fn builtin_sets() -> Vec<DiagramSet> {
    TABLES.iter().map(build).collect()
}

/// A built-in set by name; `gc-ucp` merges the forking and commuting sets.
pub fn diagram_set(name: &str) -> Result<DiagramSet, DiagramError> {
    if name == "gc-ucp" {
        let mut fork = diagram_set("gc-ucp-fork")?;
        fork.name = name.to_string();
        fork.diagrams.extend(diagram_set("gc-ucp-commute")?.diagrams);
        return Ok(fork);
    }
    TABLES.iter().find(|t| t.name == name).map(build).ok_or_else(|| DiagramError::UnknownSet(name.to_string()))
}

// ---------------------------------------------------------------------------
// Search

/// Bounds of a join search.
#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    /// Maximum number of steps on one closing path.
    pub depth: usize,
    /// Maximum number of successor computations per path.
    pub fuel: usize,
    /// Cap for `+` and `*` edges.
    pub plus_cap: usize,
    /// Maximum number of distinct states kept per path.
    pub max_states: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { depth: 24, fuel: 20_000, plus_cap: 8, max_states: 400 }
    }
}

/// A term reached along a path, with the labels and choice directions used.
#[derive(Clone, Debug)]
pub struct PathState {
    pub term: Expr,
    pub labels: Vec<String>,
    pub probs: Vec<Dir>,
}

/// How an overlap was closed.
#[derive(Clone, Debug)]
pub struct Closing {
    /// Diagram id, or `trivial` for the implicit cases.
    pub diagram: String,
    pub left: PathState,
    pub right: PathState,
}

/// Result of a join search on one overlap.
#[derive(Clone, Debug)]
pub struct MatchReport {
    pub mode: Mode,
    pub source: Expr,
    pub given_sr: Rule,
    pub given_trans: RedexMatch,
    /// `s'` for forks, `t` for commuting overlaps.
    pub sr_result: Expr,
    pub trans_result: Expr,
    pub closing: Option<Closing>,
}

impl MatchReport {
    pub fn closed(&self) -> bool {
        self.closing.is_some()
    }

    pub fn diagram_id(&self) -> &str {
        self.closing.as_ref().map(|c| c.diagram.as_str()).unwrap_or("-")
    }
}

#[derive(Clone, Default, Debug)]
struct Bindings {
    sr: BTreeMap<char, &'static [Rule]>,
    trans: BTreeMap<char, TransformationId>,
}

fn normal(e: Expr) -> Expr {
    if obeys_convention(&e) {
        e
    } else {
        freshen(&e, &BTreeSet::new())
    }
}

fn sr_successors_dvc(e: &Expr) -> Vec<(Rule, Expr)> {
    match sr_step(e) {
        StepVerdict::Unique(r, t) => vec![(r, normal(t))],
        StepVerdict::ProbBranch { left, right, .. } => vec![(Rule::Probl, left), (Rule::Probr, right)],
        _ => vec![],
    }
}

fn prob_dir(rule: Rule) -> Option<Dir> {
    match rule {
        Rule::Probl => Some(Dir::L),
        Rule::Probr => Some(Dir::R),
        _ => None,
    }
}

fn matches_in(e: &Expr, ids: &[TransformationId], m: &RedexMatch) -> bool {
    ids.iter().any(|id| match_sites(e, *id, ContextClass::S).contains(m))
}

/// Binds the given labels of `d` against the concrete overlap.
fn bind(d: &Diagram, source: &Expr, sr: Rule, trans: &RedexMatch) -> Option<Bindings> {
    let mut b = Bindings::default();
    match &d.given_sr {
        SrLabel::Group(g) => {
            if !sr_group(g)?.contains(&sr) {
                return None;
            }
        }
        SrLabel::Var(v) => {
            let group = match d.constraints.get(v) {
                Some(vals) => vals.iter().filter_map(|g| sr_group(g)).find(|rs| rs.contains(&sr))?,
                None => sr_group(family(sr)).expect("every family is a group"),
            };
            b.sr.insert(*v, group);
        }
    }
    match &d.given_trans {
        TransLabel::Ids(ids) => {
            if !matches_in(source, ids, trans) {
                return None;
            }
        }
        TransLabel::Var(v) => {
            let allowed: Vec<TransformationId> = match d.constraints.get(v) {
                Some(vals) => vals.iter().filter_map(|n| n.parse().ok()).collect(),
                None => vec![trans.rule],
            };
            let id = allowed.into_iter().find(|id| matches_in(source, &[*id], trans))?;
            b.trans.insert(*v, id);
        }
    }
    Some(b)
}

struct Expander<'a> {
    bindings: &'a Bindings,
    config: SearchConfig,
    work: usize,
}

impl Expander<'_> {
    fn step(&mut self, st: &PathState, label: &StepLabel) -> Vec<PathState> {
        if self.work >= self.config.fuel || st.labels.len() >= self.config.depth {
            return Vec::new();
        }
        self.work += 1;
        match label {
            StepLabel::Sr(l) => {
                let allowed: &[Rule] = match l {
                    SrLabel::Group(g) => sr_group(g).unwrap_or(&[]),
                    SrLabel::Var(v) => self.bindings.sr.get(v).copied().unwrap_or(&[]),
                };
                sr_successors_dvc(&st.term)
                    .into_iter()
                    .filter(|(r, _)| allowed.contains(r))
                    .map(|(r, t)| {
                        let mut next = PathState { term: t, labels: st.labels.clone(), probs: st.probs.clone() };
                        next.labels.push(format!("sr,{r}"));
                        next.probs.extend(prob_dir(r));
                        next
                    })
                    .collect()
            }
            StepLabel::Trans(cls, l) => {
                let ids: Vec<TransformationId> = match l {
                    TransLabel::Ids(ids) => ids.clone(),
                    TransLabel::Var(v) => self.bindings.trans.get(v).copied().into_iter().collect(),
                };
                let mut out = Vec::new();
                for id in ids {
                    for m in match_sites(&st.term, id, *cls) {
                        if let Ok(t) = apply(&st.term, &m) {
                            let mut next =
                                PathState { term: normal(t), labels: st.labels.clone(), probs: st.probs.clone() };
                            next.labels.push(format!("{cls},{}", m.rule));
                            out.push(next);
                        }
                    }
                }
                out
            }
        }
    }

    /// Every state reachable from `start` along `path`.
    fn expand(&mut self, start: &Expr, path: &[Edge]) -> Vec<PathState> {
        let mut states = vec![PathState { term: start.clone(), labels: Vec::new(), probs: Vec::new() }];
        for edge in path {
            let (lo, hi) = edge.mult.bounds(self.config.plus_cap);
            let mut out = StateSet::default();
            let mut current = states;
            if lo == 0 {
                for st in &current {
                    out.insert(st.clone());
                }
            }
            for i in 1..=hi {
                let mut next = StateSet::default();
                'frontier: for st in &current {
                    for n in self.step(st, &edge.label) {
                        next.insert(n);
                        if next.len() >= self.config.max_states {
                            break 'frontier;
                        }
                    }
                }
                if next.len() == 0 {
                    break;
                }
                if i >= lo {
                    for n in &next.states {
                        if out.len() >= self.config.max_states {
                            break;
                        }
                        out.insert(n.clone());
                    }
                }
                current = next.states;
            }
            states = out.states;
            if states.is_empty() {
                break;
            }
        }
        states
    }
}

/// Path states deduplicated up to alpha-equivalence and choice directions.
#[derive(Default)]
struct StateSet {
    states: Vec<PathState>,
    buckets: HashMap<(Vec<Dir>, u64), Vec<usize>>,
}

impl StateSet {
    fn len(&self) -> usize {
        self.states.len()
    }

    fn insert(&mut self, s: PathState) {
        let bucket = self.buckets.entry((s.probs.clone(), fingerprint(&s.term))).or_default();
        if bucket.iter().any(|&i| alpha_equiv(&self.states[i].term, &s.term)) {
            return;
        }
        bucket.push(self.states.len());
        self.states.push(s);
    }
}

fn meet(
    left: &[PathState],
    right: &[PathState],
    left_prefix: &[Dir],
    right_prefix: &[Dir],
) -> Option<(PathState, PathState)> {
    let mut index: HashMap<(Vec<Dir>, u64), Vec<&PathState>> = HashMap::new();
    for r in right {
        let rp: Vec<Dir> = right_prefix.iter().chain(&r.probs).copied().collect();
        index.entry((rp, fingerprint(&r.term))).or_default().push(r);
    }
    for l in left {
        let lp: Vec<Dir> = left_prefix.iter().chain(&l.probs).copied().collect();
        if let Some(rs) = index.get(&(lp, fingerprint(&l.term))) {
            if let Some(r) = rs.iter().find(|r| alpha_equiv(&l.term, &r.term)) {
                return Some((l.clone(), (*r).clone()));
            }
        }
    }
    None
}

fn is_trivial(d: &Diagram) -> bool {
    d.left.is_empty() && d.right.is_empty()
}

fn single(term: &Expr) -> PathState {
    PathState { term: term.clone(), labels: Vec::new(), probs: Vec::new() }
}

/// The sr step of `e` in direction `branch` (ignored for deterministic steps).
fn sr_pick(e: &Expr, branch: Dir) -> Result<(Rule, Expr), DiagramError> {
    match sr_step(e) {
        StepVerdict::Unique(r, t) => Ok((r, normal(t))),
        StepVerdict::ProbBranch { left, right, .. } => Ok(match branch {
            Dir::L => (Rule::Probl, left),
            Dir::R => (Rule::Probr, right),
        }),
        StepVerdict::Whnf => Err(DiagramError::NoOverlap("the term is a WHNF".into())),
        StepVerdict::Stuck(r) => Err(DiagramError::NoOverlap(format!("the term is stuck: {r}"))),
    }
}

/// Closes `s' <-sr- s -S,T-> t` with some diagram of `set`.
pub fn fork_join_search(
    s: &Expr,
    trans: &RedexMatch,
    branch: Dir,
    set: &DiagramSet,
    config: SearchConfig,
) -> Result<MatchReport, DiagramError> {
    let s = normal(s.clone());
    if !match_sites(&s, trans.rule, ContextClass::S).contains(trans) {
        return Err(DiagramError::NoOverlap("the transformation does not apply in a surface context".into()));
    }
    let (rule, s1) = sr_pick(&s, branch)?;
    let t = normal(apply(&s, trans).map_err(|e| DiagramError::NoOverlap(e.to_string()))?);
    let given: Vec<Dir> = prob_dir(rule).into_iter().collect();
    let mut report = MatchReport {
        mode: Mode::Fork,
        source: s.clone(),
        given_sr: rule,
        given_trans: trans.clone(),
        sr_result: s1.clone(),
        trans_result: t.clone(),
        closing: None,
    };
    // The transformation step coincides with the sr step.
    if given.is_empty() && alpha_equiv(&s1, &t) {
        let id = set
            .diagrams
            .iter()
            .find(|d| d.mode == Mode::Fork && is_trivial(d) && bind(d, &s, rule, trans).is_some())
            .map(|d| d.id.clone())
            .unwrap_or_else(|| "trivial".into());
        report.closing = Some(Closing { diagram: id, left: single(&s1), right: single(&t) });
        return Ok(report);
    }
    for d in set.diagrams.iter().filter(|d| d.mode == Mode::Fork && !is_trivial(d)) {
        let Some(b) = bind(d, &s, rule, trans) else { continue };
        let mut ex = Expander { bindings: &b, config, work: 0 };
        let right = ex.expand(&t, &d.right);
        let mut ex = Expander { bindings: &b, config, work: 0 };
        let left = ex.expand(&s1, &d.left);
        if let Some((l, r)) = meet(&left, &right, &given, &[]) {
            report.closing = Some(Closing { diagram: d.id.clone(), left: l, right: r });
            return Ok(report);
        }
    }
    Ok(report)
}

/// Closes `s -S,T-> t -sr-> t'` with some diagram of `set`.
pub fn commute_join_search(
    s: &Expr,
    trans: &RedexMatch,
    branch: Dir,
    set: &DiagramSet,
    config: SearchConfig,
) -> Result<MatchReport, DiagramError> {
    let s = normal(s.clone());
    if !match_sites(&s, trans.rule, ContextClass::S).contains(trans) {
        return Err(DiagramError::NoOverlap("the transformation does not apply in a surface context".into()));
    }
    let t = normal(apply(&s, trans).map_err(|e| DiagramError::NoOverlap(e.to_string()))?);
    let (rule, t1) = sr_pick(&t, branch)?;
    let given: Vec<Dir> = prob_dir(rule).into_iter().collect();
    let mut report = MatchReport {
        mode: Mode::Commute,
        source: s.clone(),
        given_sr: rule,
        given_trans: trans.clone(),
        sr_result: t.clone(),
        trans_result: t1.clone(),
        closing: None,
    };
    // The transformation step is itself an sr step.
    if let Some((r0, _)) = sr_successors_dvc(&s).into_iter().find(|(r, u)| !r.is_prob() && alpha_equiv(u, &t)) {
        let left = PathState {
            term: t1.clone(),
            labels: vec![format!("sr,{r0}"), format!("sr,{rule}")],
            probs: given.clone(),
        };
        report.closing = Some(Closing { diagram: "trivial".into(), left, right: single(&t1) });
        return Ok(report);
    }
    for d in set.diagrams.iter().filter(|d| d.mode == Mode::Commute) {
        let Some(b) = bind(d, &s, rule, trans) else { continue };
        let mut ex = Expander { bindings: &b, config, work: 0 };
        let right = ex.expand(&t1, &d.right);
        let mut ex = Expander { bindings: &b, config, work: 0 };
        let left = ex.expand(&s, &d.left);
        if let Some((l, r)) = meet(&left, &right, &[], &given) {
            report.closing = Some(Closing { diagram: d.id.clone(), left: l, right: r });
            return Ok(report);
        }
    }
    Ok(report)
}

/// Checks the set's base cases for one transformation step `s -> t`.
pub fn base_cases_hold(set: &DiagramSet, s: &Expr, t: &Expr, config: SearchConfig) -> bool {
    let (s, t) = (normal(s.clone()), normal(t.clone()));
    if set.base_cases.forward && is_whnf(&s) && !is_whnf(&t) {
        return false;
    }
    if is_whnf(&t) {
        let b = Bindings::default();
        let mut ex = Expander { bindings: &b, config, work: 0 };
        return ex.expand(&s, &set.base_cases.backward).iter().any(|st| is_whnf(&st.term));
    }
    true
}

// ---------------------------------------------------------------------------
// Random overlaps

/// Outcome of one random overlap.
#[derive(Clone, Debug)]
pub enum TrialStatus {
    Closed,
    Unclosed,
    /// The base cases do not hold for the transformation step.
    BaseCaseFailed,
    /// No overlap was found within the attempt limit.
    NoOverlap,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Closed => "closed",
            TrialStatus::Unclosed => "unclosed",
            TrialStatus::BaseCaseFailed => "base-case-failed",
            TrialStatus::NoOverlap => "no-overlap",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrialLine {
    pub trial: usize,
    pub status: TrialStatus,
    pub report: Option<MatchReport>,
}

impl TrialLine {
    /// `trial-id, diagram-id, status`.
    pub fn line(&self) -> String {
        let id = self.report.as_ref().map(|r| r.diagram_id().to_string()).unwrap_or_else(|| "-".into());
        format!("{}\t{}\t{}", self.trial, id, self.status)
    }
}

/// Parameters of a validation run.
#[derive(Clone, Debug)]
pub struct ValidationParams {
    pub trials: usize,
    pub seed: u64,
    pub generator: GenConfig,
    pub search: SearchConfig,
    pub attempts: usize,
}

impl ValidationParams {
    pub fn new(trials: usize, seed: u64, extended: bool) -> Self {
        let generator = if extended { GenConfig::extended(16) } else { GenConfig::core(16) };
        ValidationParams { trials, seed, generator, search: SearchConfig::default(), attempts: 400 }
    }

    /// Parameters whose generator favours sites of the set's transformations.
    pub fn for_set(set: &DiagramSet, trials: usize, seed: u64) -> Self {
        let mut params = ValidationParams::new(trials, seed, set.extended);
        if set.transformations.iter().any(|t| matches!(t, TransformationId::Cpcx | TransformationId::Abs)) {
            params.generator = GenConfig::ctor_rich(16);
        }
        params
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub set: String,
    pub mode: Mode,
    pub lines: Vec<TrialLine>,
}

impl ValidationReport {
    pub fn count(&self, pred: impl Fn(&TrialStatus) -> bool) -> usize {
        self.lines.iter().filter(|l| pred(&l.status)).count()
    }

    pub fn closed(&self) -> usize {
        self.count(|s| matches!(s, TrialStatus::Closed))
    }

    pub fn all_closed(&self) -> bool {
        self.closed() == self.lines.len()
    }

    /// How often each diagram closed an overlap.
    pub fn histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for l in &self.lines {
            if let (TrialStatus::Closed, Some(r)) = (&l.status, &l.report) {
                *h.entry(r.diagram_id().to_string()).or_insert(0) += 1;
            }
        }
        h
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "set={} mode={} trials={} closed={} unclosed={} base-case-failed={} no-overlap={}",
            self.set,
            self.mode,
            self.lines.len(),
            self.closed(),
            self.count(|s| matches!(s, TrialStatus::Unclosed)),
            self.count(|s| matches!(s, TrialStatus::BaseCaseFailed)),
            self.count(|s| matches!(s, TrialStatus::NoOverlap)),
        )
    }
}

/// Closes `params.trials` random overlaps of the set's transformations.
pub fn validate_set(set: &DiagramSet, mode: Mode, params: &ValidationParams) -> ValidationReport {
    let lines = (0..params.trials).into_par_iter().map(|i| overlap_trial(set, mode, params, i)).collect();
    ValidationReport { set: set.name.clone(), mode, lines }
}

fn overlap_trial(set: &DiagramSet, mode: Mode, params: &ValidationParams, trial: usize) -> TrialLine {
    let seed = trial_seed(params.seed, trial as u64);
    let mut generator = Generator::new(seed, params.generator.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    for _ in 0..params.attempts {
        let s = generator.term();
        let sites: Vec<RedexMatch> =
            set.transformations.iter().flat_map(|t| match_sites(&s, *t, ContextClass::S)).collect();
        if sites.is_empty() {
            continue;
        }
        let m = sites[rng.gen_range(0..sites.len())].clone();
        let branch = if rng.gen_bool(0.5) { Dir::L } else { Dir::R };
        let result = match mode {
            Mode::Fork => fork_join_search(&s, &m, branch, set, params.search),
            Mode::Commute => commute_join_search(&s, &m, branch, set, params.search),
        };
        let Ok(report) = result else { continue };
        let status = if !report.closed() {
            TrialStatus::Unclosed
        } else if !base_cases_hold(set, &s, &apply(&s, &m).expect("fresh match applies"), params.search) {
            TrialStatus::BaseCaseFailed
        } else {
            TrialStatus::Closed
        };
        return TrialLine { trial, status, report: Some(report) };
    }
    TrialLine { trial, status: TrialStatus::NoOverlap, report: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn find(e: &Expr, t: TransformationId, pred: impl Fn(&RedexMatch) -> bool) -> RedexMatch {
        match_sites(e, t, ContextClass::S).into_iter().find(pred).expect("match")
    }

    #[test]
    fn tables_parse() {
        for set in builtin_sets() {
            assert!(!set.diagrams.is_empty());
            for d in &set.diagrams {
                assert!(d.to_string().starts_with(&d.id));
            }
        }
        assert_eq!(diagram_set("lll-fork").unwrap().diagrams.len(), 4);
        assert!(matches!(diagram_set("nope"), Err(DiagramError::UnknownSet(_))));
    }

    #[test]
    fn equal_steps_fork() {
        let s = parse("(let x = \\y.y in \\z.z) K").unwrap();
        let m = find(&s, TransformationId::Lll, |m| m.site.0.is_empty());
        let r = fork_join_search(&s, &m, Dir::L, &diagram_set("lll-fork").unwrap(), SearchConfig::default()).unwrap();
        assert_eq!(r.diagram_id(), "lll-fork#1");
    }

    #[test]
    fn prob_branch_absorbs_cp_s() {
        let s = parse("let x = \\y.y in (x <+> (\\z.z))").unwrap();
        let m = find(&s, TransformationId::CpS, |_| true);
        let set = diagram_set("cp-fork").unwrap();
        let r = fork_join_search(&s, &m, Dir::R, &set, SearchConfig::default()).unwrap();
        assert_eq!(r.diagram_id(), "cp-fork#3");
    }

    #[test]
    fn lapp_against_llet_needs_two_steps() {
        let s = parse("(let x = K in let y = K2 in \\z.z) K").unwrap();
        let m = find(&s, TransformationId::Llet, |m| m.site.0.len() == 1);
        let r = fork_join_search(&s, &m, Dir::L, &diagram_set("lll-fork").unwrap(), SearchConfig::default()).unwrap();
        assert_eq!(r.diagram_id(), "lll-fork#4");
    }

    #[test]
    fn lll_commutes_with_later_steps() {
        let s = parse("(\\w.w) (let x = K in let y = K2 in y)").unwrap();
        let m = find(&s, TransformationId::Lll, |_| true);
        let set = diagram_set("lll-commute").unwrap();
        let r = commute_join_search(&s, &m, Dir::L, &set, SearchConfig::default()).unwrap();
        assert_eq!(r.diagram_id(), "lll-commute#1");
    }

    #[test]
    fn ucp_then_lbeta_closes_through_gc() {
        let s = parse("let f = \\y.y in (let g = K in f) K2").unwrap();
        let m = find(&s, TransformationId::Ucp, |_| true);
        let set = diagram_set("gc-ucp-commute").unwrap();
        let r = commute_join_search(&s, &m, Dir::L, &set, SearchConfig::default()).unwrap();
        assert!(r.closed(), "{r:?}");
    }

    #[test]
    fn whnf_is_no_overlap() {
        let s = parse("let x = K in \\y.x").unwrap();
        let m = find(&s, TransformationId::Cp, |_| true);
        let set = diagram_set("cp-fork").unwrap();
        assert!(matches!(
            fork_join_search(&s, &m, Dir::L, &set, SearchConfig::default()),
            Err(DiagramError::NoOverlap(_))
        ));
    }
}
