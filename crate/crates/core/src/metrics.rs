//! Trace prediction metrics: output accuracy, trace accuracy, and
//! precision/recall/F1 over lines and over `(line, identifier, value)` triples.
//!
//! Line and identifier matching is multiset intersection: a predicted item
//! matches at most one equal gold item, irrespective of position.

use std::collections::HashMap;
use std::hash::Hash;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::DecodedTrace;
use crate::scalar::Scalar;
use crate::trace::Trace;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputVerdict {
    Correct,
    Incorrect,
    NotApplicable,
}

fn strip_one_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

/// Exact stdout match; programs without gold output are not scored.
pub fn output_accuracy(pred_stdout: &str, gold_stdout: &str) -> OutputVerdict {
    if gold_stdout.is_empty() {
        OutputVerdict::NotApplicable
    } else if strip_one_newline(pred_stdout) == strip_one_newline(gold_stdout) {
        OutputVerdict::Correct
    } else {
        OutputVerdict::Incorrect
    }
}

/// Position-by-position equality; state maps compare as unordered maps.
pub fn trace_accuracy(pred: &Trace, gold: &Trace) -> bool {
    pred.lines == gold.lines
}

/// Matched / predicted / gold item counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: u64,
    pub predicted: u64,
    pub gold: u64,
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            matched: self.matched + o.matched,
            predicted: self.predicted + o.predicted,
            gold: self.gold + o.gold,
        }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: MatchCounts) {
        *self = *self + o;
    }
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl MatchCounts {
    fn fraction<S: Scalar>(&self, den: u64) -> S {
        if den == 0 {
            // both sides empty is a perfect match; one empty side scores zero
            if self.predicted == 0 && self.gold == 0 {
                S::one()
            } else {
                S::zero()
            }
        } else {
            S::from_ratio(self.matched, den)
        }
    }

    pub fn precision<S: Scalar>(&self) -> S {
        self.fraction(self.predicted)
    }

    pub fn recall<S: Scalar>(&self) -> S {
        self.fraction(self.gold)
    }

    pub fn scores<S: Scalar>(&self) -> Prf<S> {
        let precision: S = self.precision();
        let recall: S = self.recall();
        let f1 = S::harmonic_mean(&precision, &recall);
        Prf { precision, recall, f1 }
    }
}

/// Size of the multiset intersection of two item lists.
fn multiset_matches<K: Eq + Hash>(pred: impl IntoIterator<Item = K>, gold: impl IntoIterator<Item = K>) -> MatchCounts {
    let mut counts: HashMap<K, u64> = HashMap::new();
    let mut gold_n = 0;
    for g in gold {
        *counts.entry(g).or_default() += 1;
        gold_n += 1;
    }
    let mut matched = 0;
    let mut pred_n = 0;
    for p in pred {
        pred_n += 1;
        if let Some(c) = counts.get_mut(&p) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    MatchCounts { matched, predicted: pred_n, gold: gold_n }
}

pub fn line_matches(pred: &Trace, gold: &Trace) -> MatchCounts {
    multiset_matches(pred.lines.iter().map(|l| l.canonical_key()), gold.lines.iter().map(|l| l.canonical_key()))
}

fn triples(t: &Trace) -> impl Iterator<Item = (u32, &str, &str)> {
    t.lines.iter().flat_map(|l| l.state.iter().map(move |(k, v)| (l.line_no, k.as_str(), v.as_str())))
}

pub fn identifier_matches(pred: &Trace, gold: &Trace) -> MatchCounts {
    multiset_matches(triples(pred), triples(gold))
}

pub fn line_scores<S: Scalar>(pred: &Trace, gold: &Trace) -> Prf<S> {
    line_matches(pred, gold).scores()
}

pub fn identifier_scores<S: Scalar>(pred: &Trace, gold: &Trace) -> Prf<S> {
    identifier_matches(pred, gold).scores()
}

/// Per-example raw outcomes, the unit that [`aggregate`] folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub output_scored: u64,
    pub output_correct: u64,
    pub trace_exact: u64,
    pub examples: u64,
    pub lines: MatchCounts,
    pub identifiers: MatchCounts,
}

impl Add for ExampleOutcome {
    type Output = ExampleOutcome;

    fn add(self, o: Self) -> Self {
        ExampleOutcome {
            output_scored: self.output_scored + o.output_scored,
            output_correct: self.output_correct + o.output_correct,
            trace_exact: self.trace_exact + o.trace_exact,
            examples: self.examples + o.examples,
            lines: self.lines + o.lines,
            identifiers: self.identifiers + o.identifiers,
        }
    }
}

/// Score one prediction. Malformed predictions are scored on their
/// well-formed prefix but never count as exact traces.
pub fn score_example(pred: &DecodedTrace, pred_stdout: &str, gold: &Trace) -> ExampleOutcome {
    let verdict = output_accuracy(pred_stdout, &gold.stdout);
    ExampleOutcome {
        output_scored: (verdict != OutputVerdict::NotApplicable) as u64,
        output_correct: (verdict == OutputVerdict::Correct) as u64,
        trace_exact: (!pred.malformed && trace_accuracy(&pred.trace, gold)) as u64,
        examples: 1,
        lines: line_matches(&pred.trace, gold),
        identifiers: identifier_matches(&pred.trace, gold),
    }
}

/// Corpus-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<S> {
    /// `None` when no example has gold stdout.
    pub output_acc: Option<S>,
    pub trace_acc: S,
    pub line: Prf<S>,
    pub identifier: Prf<S>,
    pub n_examples: u64,
    pub n_output_examples: u64,
}

/// Example-level accuracy means; micro-averaged precision/recall.
pub fn aggregate<S: Scalar>(outcomes: &[ExampleOutcome]) -> Result<EvalReport<S>, MetricsError> {
    let total = outcomes.iter().copied().fold(ExampleOutcome::default(), Add::add);
    report_from_total(&total)
}

pub fn report_from_total<S: Scalar>(total: &ExampleOutcome) -> Result<EvalReport<S>, MetricsError> {
    if total.examples == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(EvalReport {
        output_acc: (total.output_scored > 0).then(|| S::from_ratio(total.output_correct, total.output_scored)),
        trace_acc: S::from_ratio(total.trace_exact, total.examples),
        line: total.lines.scores(),
        identifier: total.identifiers.scores(),
        n_examples: total.examples,
        n_output_examples: total.output_scored,
    })
}

/// Column names of the results table, in order.
pub const REPORT_COLUMNS: [&str; 8] = [
    "Output Acc.",
    "Trace Acc.",
    "Line Precision",
    "Line Recall",
    "Line F1",
    "Identifier Precision",
    "Identifier Recall",
    "Identifier F1",
];

impl<S: Scalar> EvalReport<S> {
    /// Flat record keyed by the table column names; `Output Acc.` is null
    /// when not applicable.
    pub fn to_table(&self) -> serde_json::Value {
        let values = [
            self.output_acc.as_ref().map(Scalar::to_f64),
            Some(self.trace_acc.to_f64()),
            Some(self.line.precision.to_f64()),
            Some(self.line.recall.to_f64()),
            Some(self.line.f1.to_f64()),
            Some(self.identifier.precision.to_f64()),
            Some(self.identifier.recall.to_f64()),
            Some(self.identifier.f1.to_f64()),
        ];
        let mut map = serde_json::Map::new();
        for (name, v) in REPORT_COLUMNS.iter().zip(values) {
            map.insert(name.to_string(), v.map(serde_json::Value::from).unwrap_or(serde_json::Value::Null));
        }
        map.insert("Examples".into(), self.n_examples.into());
        serde_json::Value::Object(map)
    }
}
