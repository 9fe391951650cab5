//! The rewrite systems that encode diagram application, with emission in the
//! plain `(VAR ...) (RULES ...)` format.
//!
//! Symbols: `Slll`, `Sllet`, `Slapp`, `Scp`, `Scpd`, `ScpS`, `Scpx` and `Sug`
//! stand for transformation steps, `SR`, `SRlll` and `SRlbeta` for standard
//! reduction steps. In the gc/ucp systems `k` is a right-hand-side-only
//! variable guessing a Peano number built from `s`, and `W`, `V` unfold it
//! into a chain of steps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::TrsError;
use crate::term::Term;

/// The built-in systems.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SystemId {
    LllFork,
    LllCommute,
    CpFork,
    CpCommute,
    Cpx,
    GcUcpFork,
    GcUcpCommute,
}

impl SystemId {
    pub const ALL: [SystemId; 7] = [
        SystemId::LllFork,
        SystemId::LllCommute,
        SystemId::CpFork,
        SystemId::CpCommute,
        SystemId::Cpx,
        SystemId::GcUcpFork,
        SystemId::GcUcpCommute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::LllFork => "lll-R1",
            SystemId::LllCommute => "lll-R2",
            SystemId::CpFork => "cp-R1",
            SystemId::CpCommute => "cp-R2",
            SystemId::Cpx => "cpx-R",
            SystemId::GcUcpFork => "gc-ucp-R1",
            SystemId::GcUcpCommute => "gc-ucp-R2",
        }
    }

    fn vars(self) -> &'static [&'static str] {
        match self {
            SystemId::GcUcpFork | SystemId::GcUcpCommute => &["x", "k"],
            _ => &["x"],
        }
    }

    /// Rules as printed, read row by row and left to right.
    fn rule_text(self) -> &'static [&'static str] {
        match self {
            SystemId::LllFork => &[
                "Slll(SRlll(x)) -> x",
                "Slll(SR(x)) -> SR(x)",
                "Slll(SR(x)) -> SR(Slll(x))",
                "Slll(SRlll(x)) -> SRlll(Slll(x))",
                "Slll(SRlll(x)) -> SRlll(Slll(Slll(x)))",
            ],
            SystemId::LllCommute => &[
                "Sllet(SR(x)) -> SR(Sllet(x))",
                "Sllet(SR(x)) -> SRlll(SR(x))",
                "Sllet(SR(x)) -> SR(x)",
                "Sllet(SRlll(x)) -> SRlll(Sllet(x))",
                "Sllet(SRlll(x)) -> SRlll(Slapp(Sllet(x)))",
                "Sllet(SRlll(x)) -> SRlll(SRlll(x))",
                "Slapp(SR(x)) -> SR(Slapp(x))",
                "Slapp(SR(x)) -> SRlll(SR(x))",
                "Sllet(SRlll(x)) -> SRlll(SRlll(SRlll(x)))",
                "Slapp(SR(x)) -> SR(x)",
                "Slapp(SRlll(x)) -> SRlll(Slapp(x))",
                "Slapp(SRlll(x)) -> SRlll(SRlll(x))",
            ],
            SystemId::CpFork => &[
                "Scp(SR(x)) -> SR(Scp(x))",
                "Scp(SR(x)) -> SR(Scp(x))",
                "Scp(SR(x)) -> SR(x)",
                "Scp(SR(x)) -> x",
                "Scp(SR(x)) -> SR(Scp(x))",
                "Scp(SR(x)) -> SR(x)",
                "Scp(SR(x)) -> SR(Scp(Scp(x)))",
            ],
            SystemId::CpCommute => &[
                "Scpd(SR(x)) -> SR(x)",
                "Scpd(SRlbeta(x)) -> SRlbeta(Scpd(x))",
                "Scpd(SRlbeta(x)) -> SRlbeta(ScpS(x))",
                "Scpd(SR(x)) -> SR(Scpd(x))",
                "Scpd(SR(x)) -> SR(Scpd(Scpd(x)))",
                "ScpS(SRlbeta(x)) -> SRlbeta(ScpS(x))",
                "ScpS(SR(x)) -> SR(x)",
                "ScpS(SRlbeta(x)) -> SR(SRlbeta(x))",
                "ScpS(SR(x)) -> SR(ScpS(x))",
            ],
            SystemId::Cpx => &[
                "Scpx(SR(x)) -> SR(x)",
                "Scpx(SR(x)) -> SR(Scpx(x))",
                "Scpx(SR(x)) -> SR(Scpx(Scpx(x)))",
            ],
            SystemId::GcUcpFork => &[
                "Sug(SR(x)) -> SR(x)",
                "Sug(SR(x)) -> SR(Sug(x))",
                "Sug(SRlll(x)) -> SRlll(Sug(x))",
                "Sug(SR(x)) -> Sug(x)",
                "Sug(SRlll(x)) -> W(k,x)",
                "W(s(k),x) -> SRlll(W(k,x))",
                "Sug(SRlll(x)) -> SRlll(Sug(x))",
                "Sug(SRlll(x)) -> Sug(x)",
                "W(s(k),x) -> SRlll(Sug(x))",
            ],
            SystemId::GcUcpCommute => &[
                "Sug(SR(x)) -> SR(Sug(x))",
                "Sug(SR(x)) -> SR(x)",
                "Sug(SR(x)) -> SR(SR(Sug(x)))",
                "Sug(SRlll(x)) -> SRlll(Sug(x))",
                "Sug(SR(x)) -> SR(SRlll(Sug(x)))",
                "Sug(SR(x)) -> SRlll(SR(Sug(x)))",
                "Sug(SR(x)) -> SRlll(SR(SR(Sug(x))))",
                "Sug(SRlll(x)) -> SRlll(SRlll(Sug(x)))",
                "Sug(SR(x)) -> SRlll(SR(SRlll(Sug(x))))",
                "Sug(SR(x)) -> SRlll(SRlll(SR(Sug(x))))",
                "Sug(SRlll(SRlll(x))) -> SRlll(Sug(x))",
                "Sug(SRlll(SRlll(x))) -> SRlll(SRlll(SRlll(Sug(x))))",
                "Sug(SR(x)) -> SRlll(SR(SR(SRlll(Sug(x)))))",
                "Sug(SR(x)) -> SRlll(SRlll(SR(SR(Sug(x)))))",
                "Sug(SRlll(W(x))) -> V(k,x)",
                "Sug(SRlll(W(SRlll(x)))) -> Sug(SRlll(W(x)))",
                "Sug(SRlll(SRlll(x))) -> SRlll(SRlll(Sug(x)))",
                "Sug(SRlll(x)) -> SRlll(SRlll(SRlll(Sug(x))))",
                "Sug(SRlll(x)) -> SRlll(V(k,x))",
                "Sug(SRlll(SRlll(x))) -> Sug(SRlll(W(x)))",
                "V(s(k),x) -> SRlll(V(k,x))",
                "V(s(k),x) -> SRlll(SRlll(Sug(x)))",
                "V(s(k),x) -> SRlll(SR(SR(Sug(x))))",
                "V(s(k),x) -> SRlll(SR(Sug(x)))",
                "Sug(SRlll(x)) -> V(k,x)",
                "Sug(SR(x)) -> SRlll(V(k,x))",
                "Sug(SR(x)) -> V(k,x)",
                "Sug(SRlll(W(x))) -> SRlll(SRlll(Sug(x)))",
                "Sug(SRlll(W(x))) -> SRlll(V(k,x))",
                "Sug(SRlll(W(x))) -> SRlll(Sug(x))",
            ],
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = TrsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| TrsError::UnknownSystem(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: Term,
    pub rhs: Term,
}

impl Rule {
    /// Variables of the right-hand side that the left-hand side lacks.
    pub fn rhs_only_vars(&self) -> Vec<String> {
        let l = self.lhs.vars();
        self.rhs.vars().into_iter().filter(|x| !l.contains(x)).collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

/// A term rewrite system over one variable set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicTrs {
    pub name: String,
    pub vars: Vec<String>,
    pub rules: Vec<Rule>,
}

impl SymbolicTrs {
    /// Parses rules `l -> r`, treating the names in `vars` as variables.
    pub fn parse(name: &str, vars: &[&str], rules: &[&str]) -> Result<SymbolicTrs, TrsError> {
        let rules = rules
            .iter()
            .map(|r| {
                let (l, rhs) = r.split_once("->").ok_or_else(|| TrsError::Parse(format!("`->` missing in `{r}`")))?;
                Ok(Rule { lhs: Term::parse(l, vars)?, rhs: Term::parse(rhs, vars)? })
            })
            .collect::<Result<Vec<_>, TrsError>>()?;
        Ok(SymbolicTrs { name: name.to_string(), vars: vars.iter().map(|v| v.to_string()).collect(), rules })
    }

    /// Function symbols with their arity, in first-occurrence order.
    pub fn signature(&self) -> Vec<(String, usize)> {
        let mut all = Vec::new();
        for r in &self.rules {
            r.lhs.symbols(&mut all);
            r.rhs.symbols(&mut all);
        }
        let mut out: Vec<(String, usize)> = Vec::new();
        for s in all {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Symbols used with more than one arity.
    pub fn arity_conflicts(&self) -> Vec<String> {
        let mut arities: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (f, n) in self.signature() {
            arities.entry(f).or_default().push(n);
        }
        arities.into_iter().filter(|(_, ns)| ns.len() > 1).map(|(f, _)| f).collect()
    }

    /// Whether some rule has a variable only on its right-hand side.
    pub fn has_rhs_only_vars(&self) -> bool {
        self.rules.iter().any(|r| !r.rhs_only_vars().is_empty())
    }

    /// The plain-text form read by external termination provers.
    pub fn emit(&self) -> String {
        let mut out = format!("(VAR {})\n(RULES\n", self.vars.join(" "));
        for r in &self.rules {
            out.push_str(&format!("  {r}\n"));
        }
        out.push_str(")\n");
        out
    }
}

/// A built-in system.
pub fn system(id: SystemId) -> SymbolicTrs {
    SymbolicTrs::parse(id.name(), id.vars(), id.rule_text()).expect("built-in rules parse")
}

/// The emitted text of a built-in system.
pub fn emit_trs(id: SystemId) -> String {
    system(id).emit()
}
