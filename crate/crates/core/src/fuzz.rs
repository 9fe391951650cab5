//! Randomized soundness testing of transformations.
//!
//! Each trial generates a closed term, applies the transformation at a
//! random site of the requested context class and compares the certified
//! expected-convergence intervals of source and result. Disjoint intervals
//! are a conclusive violation. Trials are seeded independently, so the
//! report does not depend on scheduling.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::convergence::{bounds_of, explore, weight_string, ExcvBounds};
use crate::equiv::{same_prob_sequences_trees, Verdict};
use crate::gen::{trial_seed, GenConfig, Generator};
use crate::print::print;
use crate::syntax::{ContextClass, Expr};
use crate::transform::{apply, match_sites, transformation_metadata, RedexMatch, TransformationId};

/// Parameters of a fuzz run.
#[derive(Clone, Debug)]
pub struct FuzzParams {
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub fuel: u64,
    pub generator: GenConfig,
    /// Terms generated per trial before giving up on finding a site.
    pub attempts: usize,
}

impl FuzzParams {
    pub fn new(trials: usize, seed: u64, size: usize, k: usize, fuel: u64) -> Self {
        FuzzParams { trials, seed, k, fuel, generator: GenConfig::core(size), attempts: 400 }
    }

    /// Parameters whose generator favours the node kinds `rule` matches.
    pub fn for_rule(rule: TransformationId, trials: usize, seed: u64, size: usize, k: usize, fuel: u64) -> Self {
        let mut params = FuzzParams::new(trials, seed, size, k, fuel);
        if rule.is_prob_law() {
            params.generator.choice = 10;
        }
        if rule.is_extended() {
            params.generator.extended = 5;
        }
        params
    }
}

/// One trial: the rewrite performed and its bounds.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub index: usize,
    pub source: Expr,
    pub target: Expr,
    pub applied: RedexMatch,
    pub source_bounds: ExcvBounds,
    pub target_bounds: ExcvBounds,
    pub violation: bool,
    /// Same-prob-sequence verdicts in both directions, for rules that keep
    /// prob-sequences, when both trees are fully decided.
    pub same_prob_sequences: Option<(Verdict, Verdict)>,
}

impl TrialRecord {
    /// Line-oriented record: index, rule, site, both intervals, status.
    pub fn line(&self) -> String {
        let status = if self.violation { "violation" } else { "ok" };
        let ps = match &self.same_prob_sequences {
            None => "-".to_string(),
            Some((a, b)) => format!("{}/{}", short(a), short(b)),
        };
        format!(
            "{}\t{}\t{}\t[{},{}]\t[{},{}]\t{}\t{}",
            self.index,
            self.applied.rule,
            self.applied.site,
            weight_string(&self.source_bounds.lo),
            weight_string(&self.source_bounds.hi),
            weight_string(&self.target_bounds.lo),
            weight_string(&self.target_bounds.hi),
            ps,
            status
        )
    }
}

fn short(v: &Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::FailsWith(_) => "fails",
        Verdict::Inconclusive(_) => "inconclusive",
    }
}

/// Aggregated results, ordered by trial index.
#[derive(Clone, Debug)]
pub struct FuzzReport {
    pub rule: TransformationId,
    pub class: ContextClass,
    pub params: FuzzParams,
    pub records: Vec<TrialRecord>,
    /// Trials where no site was found within the attempt limit.
    pub skipped: Vec<usize>,
}

impl FuzzReport {
    pub fn violations(&self) -> Vec<&TrialRecord> {
        self.records.iter().filter(|r| r.violation).collect()
    }

    /// Trials whose same-prob-sequence check failed in some direction.
    pub fn prob_sequence_failures(&self) -> Vec<&TrialRecord> {
        self.records
            .iter()
            .filter(|r| matches!(&r.same_prob_sequences, Some((a, b)) if a.fails() || b.fails()))
            .collect()
    }

    pub fn prob_sequence_checked(&self) -> usize {
        self.records.iter().filter(|r| r.same_prob_sequences.is_some()).count()
    }

    /// Trials where both lower bounds are equal.
    pub fn equal_lo(&self) -> usize {
        self.records.iter().filter(|r| r.source_bounds.lo == r.target_bounds.lo).count()
    }
}

impl fmt::Display for FuzzReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = self.violations().first().map(|r| format!("trial {} ({})", r.index, print(&r.source)));
        write!(
            f,
            "rule={} class={} seed={} k={} fuel={} trials={} applied={} skipped={} violations={} ps-checked={} ps-failures={} equal-lo={} first-violation={}",
            self.rule,
            self.class,
            self.params.seed,
            self.params.k,
            self.params.fuel,
            self.params.trials,
            self.records.len(),
            self.skipped.len(),
            self.violations().len(),
            self.prob_sequence_checked(),
            self.prob_sequence_failures().len(),
            self.equal_lo(),
            first.unwrap_or_else(|| "none".into())
        )
    }
}

/// Runs `params.trials` independent trials of `rule` in class `cls`.
pub fn soundness_fuzz(rule: TransformationId, cls: ContextClass, params: &FuzzParams) -> FuzzReport {
    let keeps_sequences = transformation_metadata(rule).preserves_prob_sequences;
    let outcomes: Vec<Result<TrialRecord, usize>> = (0..params.trials)
        .into_par_iter()
        .map(|index| run_trial(rule, cls, params, index, keeps_sequences).ok_or(index))
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(i) => skipped.push(i),
        }
    }
    FuzzReport { rule, class: cls, params: params.clone(), records, skipped }
}

fn run_trial(
    rule: TransformationId,
    cls: ContextClass,
    params: &FuzzParams,
    index: usize,
    keeps_sequences: bool,
) -> Option<TrialRecord> {
    let mut generator = Generator::new(trial_seed(params.seed, index as u64), params.generator.clone());
    for _ in 0..params.attempts {
        let source = generator.term();
        let sites = match_sites(&source, rule, cls);
        if sites.is_empty() {
            continue;
        }
        let applied = sites[generator.rng().gen_range(0..sites.len())].clone();
        let target = apply(&source, &applied).expect("fresh match applies");
        let source_tree = explore(&source, params.k, params.fuel);
        let target_tree = explore(&target, params.k, params.fuel);
        let source_bounds = bounds_of(&source_tree);
        let target_bounds = bounds_of(&target_tree);
        let violation = source_bounds.disjoint(&target_bounds);
        let same_prob_sequences = (keeps_sequences && source_bounds.exact && target_bounds.exact).then(|| {
            (
                same_prob_sequences_trees(&source_tree, &target_tree),
                same_prob_sequences_trees(&target_tree, &source_tree),
            )
        });
        return Some(TrialRecord {
            index,
            source,
            target,
            applied,
            source_bounds,
            target_bounds,
            violation,
            same_prob_sequences,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_are_deterministic() {
        let params = FuzzParams::new(20, 3, 15, 3, 300);
        let a = soundness_fuzz(TransformationId::Probcomm, ContextClass::S, &params);
        let b = soundness_fuzz(TransformationId::Probcomm, ContextClass::S, &params);
        let la: Vec<String> = a.records.iter().map(|r| r.line()).collect();
        let lb: Vec<String> = b.records.iter().map(|r| r.line()).collect();
        assert_eq!(la, lb);
        assert!(a.violations().is_empty());
    }
}
