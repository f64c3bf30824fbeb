//! Corpus assembly: the three data tiers, problem-disjoint splits, hard
//! instance selection and curriculum stages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, decode_trace, encode_source, encode_trace, CodecError, TierPrefix};
use crate::harness::Harness;
use crate::program::{physical_line_count, Origin, Program, TestInput};
use crate::pyrepr;
use crate::trace::{StateMap, Trace, TraceLine};

/// Default share of SingleLine kept as the hard subset (3M of ~9M).
pub const DEFAULT_HARD_FRACTION: f64 = 3.0 / 9.0;

/// Flag set on single-line records whose stored final state disagrees with
/// an oracle execution.
pub const FLAG_FINAL_STATE_MISMATCH: &str = "final_state_mismatch";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("difficulty missing for record `{0}`")]
    MissingDifficulty(String),
    #[error("invalid split ratios {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("record `{id}` is tagged {tier} but its input starts with `{found}`")]
    PrefixMismatch { id: String, tier: TierPrefix, found: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}:{line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordMeta {
    #[serde(default)]
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// One (code, trace) training or evaluation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub tier: TierPrefix,
    pub input_tokens: String,
    pub target_tokens: String,
    #[serde(default)]
    pub stdout: String,
    pub problem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
    #[serde(default)]
    pub meta: RecordMeta,
}

impl DatasetRecord {
    pub fn check_prefix(&self) -> Result<(), DatasetError> {
        let first = self.input_tokens.split(' ').next().unwrap_or("");
        if first == self.tier.token() {
            Ok(())
        } else {
            Err(DatasetError::PrefixMismatch { id: self.id.clone(), tier: self.tier, found: first.to_string() })
        }
    }
}

/// A single-line transformation from the external corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLineSource {
    #[serde(default)]
    pub id: Option<String>,
    pub init: String,
    pub line: String,
    /// String values are taken as already-rendered literals; other JSON
    /// values are rendered as the matching Python literal.
    #[serde(rename = "final")]
    pub final_state: IndexMap<String, serde_json::Value>,
}

impl SingleLineSource {
    pub fn code(&self) -> String {
        if self.init.trim().is_empty() {
            self.line.clone()
        } else {
            format!("{}\n{}", self.init.trim_end_matches('\n'), self.line)
        }
    }

    pub fn final_state_map(&self) -> StateMap {
        self.final_state
            .iter()
            .map(|(k, v)| {
                let text = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => pyrepr::json_literal(other),
                };
                (k.clone(), text)
            })
            .collect()
    }
}

/// Convert external single-line records; nothing is executed.
pub fn ingest_singleline(records: &[SingleLineSource]) -> Result<Vec<DatasetRecord>, DatasetError> {
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let malformed = |reason: String| DatasetError::MalformedRecord { index, reason };
            if r.line.trim().is_empty() || r.line.contains('\n') {
                return Err(malformed("`line` must be exactly one non-empty code line".into()));
            }
            let code = r.code();
            let line_no = physical_line_count(&code) as u32;
            let input_tokens = encode_source(&code, TierPrefix::SingleLine).map_err(|e| malformed(e.to_string()))?;
            let last = TraceLine { line_no, state: r.final_state_map() };
            let target_tokens =
                codec::encode_singleline_target(&Trace::new(vec![last])).map_err(|e| malformed(e.to_string()))?;
            let id = r.id.clone().unwrap_or_else(|| format!("singleline-{index}"));
            Ok(DatasetRecord {
                problem_id: id.clone(),
                id,
                tier: TierPrefix::SingleLine,
                input_tokens,
                target_tokens,
                stdout: String::new(),
                difficulty: None,
                meta: RecordMeta { origin: Origin::Singleline, ..Default::default() },
            })
        })
        .collect()
}

/// Anything that can report the final variable state of a code snippet.
pub trait FinalStateOracle {
    fn final_state(&self, code: &str) -> Option<StateMap>;
}

impl FinalStateOracle for Harness {
    fn final_state(&self, code: &str) -> Option<StateMap> {
        let p = Program::parse(code).ok()?;
        let r = self.execute(&p, &TestInput::default()).ok()?;
        r.trace.lines.last().map(|l| l.state.clone())
    }
}

/// Flag (never rewrite) records whose stored final state differs from the
/// oracle's. Returns how many were flagged.
pub fn flag_singleline_mismatches<O: FinalStateOracle>(
    sources: &[SingleLineSource],
    records: &mut [DatasetRecord],
    oracle: &O,
) -> usize {
    let mut flagged = 0;
    for (src, rec) in sources.iter().zip(records.iter_mut()) {
        if oracle.final_state(&src.code()).as_ref() != Some(&src.final_state_map()) {
            rec.meta.flags.push(FLAG_FINAL_STATE_MISMATCH.into());
            flagged += 1;
        }
    }
    flagged
}

/// A program paired with its ground-truth trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedProgram {
    pub id: String,
    pub problem_id: String,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub source: String,
    pub trace: Trace,
}

/// Whole-program record: encoded code in, full trace out.
pub fn record_from_trace(tp: &TracedProgram, tier: TierPrefix) -> Result<DatasetRecord, DatasetError> {
    Ok(DatasetRecord {
        id: tp.id.clone(),
        tier,
        input_tokens: encode_source(&tp.source, tier)?,
        target_tokens: encode_trace(&tp.trace)?,
        stdout: tp.trace.stdout.clone(),
        problem_id: tp.problem_id.clone(),
        difficulty: None,
        meta: RecordMeta { origin: tp.origin, parent_id: tp.parent_id.clone(), flags: Vec::new() },
    })
}

/// Items that can be assigned to a problem-level split.
pub trait SplitItem {
    fn problem_id(&self) -> &str;
    fn is_mutant(&self) -> bool;
}

impl SplitItem for Program {
    fn problem_id(&self) -> &str {
        Program::problem_id(self)
    }

    fn is_mutant(&self) -> bool {
        self.origin() == Origin::Mutant
    }
}

impl SplitItem for DatasetRecord {
    fn problem_id(&self) -> &str {
        &self.problem_id
    }

    fn is_mutant(&self) -> bool {
        self.meta.origin == Origin::Mutant
    }
}

impl SplitItem for TracedProgram {
    fn problem_id(&self) -> &str {
        &self.problem_id
    }

    fn is_mutant(&self) -> bool {
        self.origin == Origin::Mutant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, valid: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<(), DatasetError> {
        let all = [self.train, self.valid, self.test];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidRatios(all));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
    /// Mutants whose problem landed in the test split.
    pub dropped_mutants: usize,
}

impl<T: SplitItem> Splits<T> {
    pub fn problem_ids(items: &[T]) -> BTreeSet<String> {
        items.iter().map(|i| i.problem_id().to_string()).collect()
    }
}

/// Partition by problem id so a problem never spans two splits. Mutants go
/// with their problem, except that the test split keeps only unmutated
/// programs.
pub fn build_split<T: SplitItem>(items: Vec<T>, ratios: SplitRatios, seed: u64) -> Result<Splits<T>, DatasetError> {
    ratios.validate()?;
    let problems: BTreeSet<String> = items.iter().map(|i| i.problem_id().to_string()).collect();
    let mut problems: Vec<String> = problems.into_iter().collect();
    problems.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = problems.len();
    let n_test = ((n as f64) * ratios.test).round() as usize;
    let n_valid = (((n as f64) * ratios.valid).round() as usize).min(n - n_test);
    let mut assignment: HashMap<String, usize> = HashMap::new();
    for (i, p) in problems.into_iter().enumerate() {
        let split = if i < n_test {
            2
        } else if i < n_test + n_valid {
            1
        } else {
            0
        };
        assignment.insert(p, split);
    }
    let mut splits = Splits { train: Vec::new(), valid: Vec::new(), test: Vec::new(), dropped_mutants: 0 };
    for item in items {
        match assignment[item.problem_id()] {
            0 => splits.train.push(item),
            1 => splits.valid.push(item),
            _ if item.is_mutant() => splits.dropped_mutants += 1,
            _ => splits.test.push(item),
        }
    }
    Ok(splits)
}

/// Where per-record difficulty comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DifficultySource {
    /// Per-record model loss keyed by record id.
    External(HashMap<String, f64>),
    /// `(state entries in target, target token count)`, compared lexicographically.
    Proxy,
}

/// Proxy difficulty key of a record.
pub fn proxy_difficulty(r: &DatasetRecord) -> (usize, usize) {
    let decoded = decode_trace(&r.target_tokens);
    let states = decoded.trace.lines.iter().map(|l| l.state.len()).sum();
    (states, r.target_tokens.split_whitespace().count())
}

/// The hardest `fraction` of `records`, hardest first; ties by id.
pub fn select_hard(
    records: &[DatasetRecord],
    fraction: f64,
    source: &DifficultySource,
) -> Result<Vec<DatasetRecord>, DatasetError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let mut keyed: Vec<((f64, usize), DatasetRecord)> = Vec::with_capacity(records.len());
    for r in records {
        let mut r = r.clone();
        let key = match source {
            DifficultySource::External(losses) => {
                let loss = *losses.get(&r.id).ok_or_else(|| DatasetError::MissingDifficulty(r.id.clone()))?;
                r.difficulty = Some(loss);
                (loss, 0)
            }
            DifficultySource::Proxy => {
                let (states, tokens) = proxy_difficulty(&r);
                (states as f64, tokens)
            }
        };
        keyed.push((key, r));
    }
    keyed.sort_by(|(ka, ra), (kb, rb)| kb.0.total_cmp(&ka.0).then(kb.1.cmp(&ka.1)).then_with(|| ra.id.cmp(&rb.id)));
    let keep = ((records.len() as f64) * fraction).round() as usize;
    Ok(keyed.into_iter().take(keep).map(|(_, r)| r).collect())
}

/// Named record sets a stage draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    SingleLineAll,
    SingleLineHard,
    Tutorial,
    CodeNetMut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    S1,
    S2,
    S3,
}

impl Stage {
    pub fn composition(self) -> BTreeSet<Selector> {
        use Selector::*;
        match self {
            Stage::S1 => [SingleLineAll].into(),
            Stage::S2 => [SingleLineHard, Tutorial].into(),
            Stage::S3 => [SingleLineHard, Tutorial, CodeNetMut].into(),
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(Stage::S1),
            "S2" | "2" => Ok(Stage::S2),
            "S3" | "3" => Ok(Stage::S3),
            _ => Err(format!("unknown stage `{s}` (expected S1, S2 or S3)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpora {
    pub singleline: Vec<DatasetRecord>,
    pub singleline_hard: Vec<DatasetRecord>,
    pub tutorial: Vec<DatasetRecord>,
    pub codenetmut: Vec<DatasetRecord>,
}

impl Corpora {
    fn select(&self, s: Selector) -> &[DatasetRecord] {
        match s {
            Selector::SingleLineAll => &self.singleline,
            Selector::SingleLineHard => &self.singleline_hard,
            Selector::Tutorial => &self.tutorial,
            Selector::CodeNetMut => &self.codenetmut,
        }
    }
}

/// Concatenate the stage's record sets and shuffle them with `seed`.
pub fn materialize_stage(stage: Stage, corpora: &Corpora, seed: u64) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out: Vec<DatasetRecord> = Vec::new();
    for sel in stage.composition() {
        for r in corpora.select(sel) {
            r.check_prefix()?;
            out.push(r.clone());
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|source| DatasetError::File { path: path.display().to_string(), source })?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::File { path: path.display().to_string(), source })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Corpus statistics per tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub examples: usize,
    /// Mean physical lines per program.
    pub avg_code_len: f64,
    /// Mean `[LINE]` groups per target.
    pub avg_trace_len: f64,
    /// Mean over traces of the largest per-line state size.
    pub avg_state_num: f64,
}

/// Lines in encoded code: consecutive `[1]`, `[2]`, ... tokens.
pub fn encoded_code_lines(input_tokens: &str) -> usize {
    let mut lines = 0;
    for tok in input_tokens.split(' ') {
        if tok == codec::line_token(lines + 1) {
            lines += 1;
        }
    }
    lines
}

pub fn corpus_stats(records: &[DatasetRecord]) -> BTreeMap<TierPrefix, TierStats> {
    let mut sums: BTreeMap<TierPrefix, (usize, usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let t = decode_trace(&r.target_tokens).trace;
        let e = sums.entry(r.tier).or_default();
        e.0 += 1;
        e.1 += encoded_code_lines(&r.input_tokens);
        e.2 += t.len();
        e.3 += t.max_state_size();
    }
    sums.into_iter()
        .map(|(tier, (n, code, trace, state))| {
            let n_f = n as f64;
            (
                tier,
                TierStats {
                    examples: n,
                    avg_code_len: code as f64 / n_f,
                    avg_trace_len: trace as f64 / n_f,
                    avg_state_num: state as f64 / n_f,
                },
            )
        })
        .collect()
}
