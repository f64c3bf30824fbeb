//! The twelve mutation operators and seeded mutant generation.
//!
//! An operator applied at a site yields an [`Edit`]: a descriptive
//! [`MutationRecord`] plus the byte splices that realise it. Loop operators
//! are expressed as zero-width insertions so they compose with edits to the
//! sites nested inside the loop.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{
    aor_pool, asr_pool, ror_pool, CandidateSite, LoopShape, NodeKind, NumericValue, Origin, Program, ProgramError,
    SiteDetail, SliceArg, Span,
};
use crate::pyrepr;

/// Standard deviation of the Gaussian used to resample numeric literals.
pub const NUMERIC_SIGMA: f64 = 100.0;
/// Per-site mutation probability within one pass.
pub const SITE_PROBABILITY: f64 = 0.5;
/// Passes per seed program used by the corpus pipeline.
pub const DEFAULT_MUTANTS_PER_SEED: usize = 20;

const RANDOM_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MutationOperator {
    /// Constant replacement.
    Crp,
    /// Arithmetic operator deletion (unary `+`/`-`).
    Aod,
    /// Arithmetic operator replacement.
    Aor,
    /// Augmented assignment operator replacement.
    Asr,
    /// `break` <-> `continue`.
    Bcr,
    /// Deletion of `not` / `not in` negation.
    Cod,
    /// `and` <-> `or`.
    Lcr,
    /// Relational operator replacement.
    Ror,
    /// Slice index removal.
    Sir,
    /// One iteration loop.
    Oil,
    /// Reverse iteration loop.
    Ril,
    /// Zero iteration loop.
    Zil,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 12] = [
        Self::Crp,
        Self::Aod,
        Self::Aor,
        Self::Asr,
        Self::Bcr,
        Self::Cod,
        Self::Lcr,
        Self::Ror,
        Self::Sir,
        Self::Oil,
        Self::Ril,
        Self::Zil,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::Crp => "CRP",
            Self::Aod => "AOD",
            Self::Aor => "AOR",
            Self::Asr => "ASR",
            Self::Bcr => "BCR",
            Self::Cod => "COD",
            Self::Lcr => "LCR",
            Self::Ror => "ROR",
            Self::Sir => "SIR",
            Self::Oil => "OIL",
            Self::Ril => "RIL",
            Self::Zil => "ZIL",
        }
    }

    pub fn is_loop_operator(self) -> bool {
        matches!(self, Self::Oil | Self::Ril | Self::Zil)
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for MutationOperator {
    type Err = MutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|op| op.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| MutationError::UnknownOperator(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MutationError {
    #[error("operator {op} does not apply to a {kind:?} site")]
    InapplicableOperator { op: MutationOperator, kind: NodeKind },
    #[error("operator {op} left the site unchanged")]
    NoChange { op: MutationOperator },
    #[error("mutated source does not parse: {0}")]
    NonParsingResult(ProgramError),
    #[error("`{choice}` is not a valid replacement for {op} here")]
    InvalidChoice { op: MutationOperator, choice: String },
    #[error("unknown mutation operator `{0}`")]
    UnknownOperator(String),
}

/// One applied mutation, in terms of the pre-mutation source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub operator: MutationOperator,
    pub span: Span,
    pub before: String,
    pub after: String,
}

/// What to put at a site when the caller, not the random source, decides.
#[derive(Debug, Clone, PartialEq)]
pub enum Choice {
    /// Replacement text for the site span (operator tokens, literals).
    Text(String),
    /// Which slice argument to delete.
    SliceArg(SliceArg),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Splice {
    at: Span,
    text: String,
    /// Orders zero-width insertions at the same offset; lower goes first.
    order: i64,
}

impl Splice {
    fn conflicts(&self, other: &Splice) -> bool {
        let inside = |pt: usize, s: &Span| s.start < pt && pt < s.end;
        match (self.at.is_empty(), other.at.is_empty()) {
            (true, true) => false,
            (true, false) => inside(self.at.start, &other.at),
            (false, true) => inside(other.at.start, &self.at),
            (false, false) => self.at.overlaps(&other.at),
        }
    }
}

/// A planned mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Edit {
    pub record: MutationRecord,
    splices: Vec<Splice>,
}

impl Edit {
    fn replace(op: MutationOperator, span: Span, before: &str, after: String) -> Self {
        Edit {
            record: MutationRecord { operator: op, span, before: before.to_string(), after: after.clone() },
            splices: vec![Splice { at: span, text: after, order: 0 }],
        }
    }

    fn extent(&self) -> usize {
        self.splices.iter().map(|s| s.at.len()).max().unwrap_or(0)
    }

    fn conflicts(&self, other: &Edit) -> bool {
        self.splices.iter().any(|a| other.splices.iter().any(|b| a.conflicts(b)))
    }
}

/// Apply non-conflicting edits to `source`.
fn splice_all(source: &str, edits: &[Edit]) -> String {
    let mut splices: Vec<&Splice> = edits.iter().flat_map(|e| e.splices.iter()).collect();
    splices.sort_by_key(|s| (s.at.start, s.at.end, s.order));
    let mut out = String::with_capacity(source.len() + 32);
    let mut cursor = 0;
    for s in splices {
        debug_assert!(s.at.start >= cursor, "overlapping splices");
        out.push_str(&source[cursor..s.at.start]);
        out.push_str(&s.text);
        cursor = s.at.end;
    }
    out.push_str(&source[cursor..]);
    out
}

fn is_word(c: Option<char>) -> bool {
    c.map(|c| c.is_alphanumeric() || c == '_').unwrap_or(false)
}

/// Text that removes `span` without gluing the neighbouring tokens together.
fn deletion(source: &str, span: Span) -> String {
    let before = source[..span.start].chars().next_back();
    let after = source[span.end..].chars().next();
    if is_word(before) && is_word(after) {
        " ".into()
    } else {
        String::new()
    }
}

fn pick_other<R: Rng + ?Sized>(pool: &[&str], current: &str, rng: &mut R) -> String {
    let others: Vec<&&str> = pool.iter().filter(|t| **t != current).collect();
    others.choose(rng).map(|s| s.to_string()).expect("operator pools have at least two entries")
}

fn resample_number<R: Rng + ?Sized>(value: NumericValue, rng: &mut R) -> Option<String> {
    match value {
        NumericValue::Int(v) => {
            let normal = Normal::new(v as f64, NUMERIC_SIGMA).expect("positive sigma");
            let sample = normal.sample(rng).round();
            if !sample.is_finite() || sample.abs() >= i64::MAX as f64 {
                return None;
            }
            let sample = sample as i64;
            (sample != v).then(|| sample.to_string())
        }
        NumericValue::Float(v) => {
            let normal = Normal::new(v, NUMERIC_SIGMA).expect("positive sigma");
            let sample = normal.sample(rng);
            (sample.is_finite() && sample != v).then(|| pyrepr::float_literal(sample))
        }
    }
}

/// Literal with content extended by one or two random characters, or shortened by one.
fn resample_string<R: Rng + ?Sized>(
    source: &str,
    site: Span,
    content: Span,
    trailing_escape: Option<Span>,
    rng: &mut R,
) -> Option<String> {
    let head = &source[site.start..content.start];
    let body = &source[content.start..content.end];
    let tail = &source[content.end..site.end];
    let new_body = if rng.gen_bool(0.5) {
        let count = rng.gen_range(1..=2);
        let extra: String = (0..count).map(|_| *RANDOM_CHARS.choose(rng).unwrap() as char).collect();
        format!("{body}{extra}")
    } else {
        shorten(body, trailing_escape.map(|e| e.start - content.start))?
    };
    Some(format!("{head}{new_body}{tail}"))
}

fn shorten(body: &str, escape_at: Option<usize>) -> Option<String> {
    if body.is_empty() {
        return None;
    }
    let mut cut = match escape_at {
        Some(at) => at,
        None => body.char_indices().next_back().map(|(i, _)| i).unwrap_or(0),
    };
    // never leave a dangling backslash in front of the closing quote
    while body[..cut].chars().rev().take_while(|c| *c == '\\').count() % 2 == 1 {
        cut -= 1;
    }
    Some(body[..cut].to_string())
}

fn loop_edit(op: MutationOperator, site: &CandidateSite, shape: &LoopShape, source: &str) -> Edit {
    let order = -(site.span.start as i64);
    match op {
        MutationOperator::Oil => {
            let text = if shape.inline { "; break".to_string() } else { format!("\n{}break", shape.indent) };
            let at = Span::new(shape.body.end, shape.body.end);
            Edit {
                record: MutationRecord { operator: op, span: at, before: String::new(), after: text.clone() },
                splices: vec![Splice { at, text, order }],
            }
        }
        MutationOperator::Zil => {
            let text = if shape.inline { "break; ".to_string() } else { format!("break\n{}", shape.indent) };
            let at = Span::new(shape.body.start, shape.body.start);
            Edit {
                record: MutationRecord { operator: op, span: at, before: String::new(), after: text.clone() },
                splices: vec![Splice { at, text, order }],
            }
        }
        MutationOperator::Ril => {
            let it = shape.iterable.expect("RIL is only offered on for loops");
            let text = &source[it.start..it.end];
            let (open, close) = if shape.iterable_is_tuple { ("reversed((", "))") } else { ("reversed(", ")") };
            Edit {
                record: MutationRecord {
                    operator: op,
                    span: it,
                    before: text.to_string(),
                    after: format!("{open}{text}{close}"),
                },
                splices: vec![
                    Splice { at: Span::new(it.start, it.start), text: open.into(), order },
                    Splice { at: Span::new(it.end, it.end), text: close.into(), order },
                ],
            }
        }
        _ => unreachable!("not a loop operator"),
    }
}

/// Decide the edit for `op` at `site`, drawing randomness from `rng` unless
/// `choice` fixes the outcome.
pub fn plan_edit<R: Rng + ?Sized>(
    p: &Program,
    site: &CandidateSite,
    op: MutationOperator,
    choice: Option<&Choice>,
    rng: &mut R,
) -> Result<Edit, MutationError> {
    use MutationOperator as Op;
    if !site.admits(op) {
        return Err(MutationError::InapplicableOperator { op, kind: site.kind });
    }
    let src = p.source();
    let current = p.slice(site.span);
    let invalid = |c: &Choice| MutationError::InvalidChoice { op, choice: format!("{c:?}") };

    if let Some(Choice::Text(text)) = choice {
        let allowed = match op {
            Op::Aor => aor_pool().contains(&text.as_str()),
            Op::Asr => asr_pool().contains(&text.as_str()),
            Op::Ror => ror_pool().contains(&text.as_str()),
            Op::Crp => true,
            _ => false,
        };
        if !allowed {
            return Err(invalid(choice.unwrap()));
        }
        if text == current {
            return Err(MutationError::NoChange { op });
        }
        return Ok(Edit::replace(op, site.span, current, text.clone()));
    }

    let edit = match (op, &site.detail) {
        (Op::Crp, SiteDetail::Number { value }) => {
            let after = resample_number(*value, rng).ok_or(MutationError::NoChange { op })?;
            Edit::replace(op, site.span, current, after)
        }
        (Op::Crp, SiteDetail::Str { content, trailing_escape }) => {
            let after = resample_string(src, site.span, *content, *trailing_escape, rng)
                .ok_or(MutationError::NoChange { op })?;
            Edit::replace(op, site.span, current, after)
        }
        (Op::Aod, _) => Edit::replace(op, site.span, current, deletion(src, site.span)),
        (Op::Cod, SiteDetail::Negation { delete }) => {
            Edit::replace(op, *delete, p.slice(*delete), deletion(src, *delete))
        }
        (Op::Cod, _) => Edit::replace(op, site.span, current, "in".into()),
        (Op::Aor, _) => Edit::replace(op, site.span, current, pick_other(aor_pool(), current, rng)),
        (Op::Asr, _) => Edit::replace(op, site.span, current, pick_other(asr_pool(), current, rng)),
        (Op::Ror, _) => Edit::replace(op, site.span, current, pick_other(ror_pool(), current, rng)),
        (Op::Bcr, _) => {
            let after = if current == "break" { "continue" } else { "break" };
            Edit::replace(op, site.span, current, after.into())
        }
        (Op::Lcr, _) => {
            let after = if current == "and" { "or" } else { "and" };
            Edit::replace(op, site.span, current, after.into())
        }
        (Op::Sir, SiteDetail::Slice { parts }) => {
            let part = match choice {
                Some(Choice::SliceArg(arg)) => {
                    parts.iter().find(|pt| pt.arg == *arg).ok_or_else(|| invalid(choice.unwrap()))?
                }
                Some(other) => return Err(invalid(other)),
                None => parts.choose(rng).expect("slice sites have at least one argument"),
            };
            Edit::replace(op, part.delete, p.slice(part.delete), String::new())
        }
        (Op::Oil | Op::Ril | Op::Zil, SiteDetail::Loop(shape)) => loop_edit(op, site, shape, src),
        _ => return Err(MutationError::InapplicableOperator { op, kind: site.kind }),
    };
    Ok(edit)
}

/// Result of applying a single operator.
#[derive(Debug, Clone)]
pub struct Mutation {
    pub program: Program,
    pub record: MutationRecord,
}

/// Apply `op` at `site`, letting `rng` pick the replacement.
pub fn apply_operator<R: Rng + ?Sized>(
    p: &Program,
    site: &CandidateSite,
    op: MutationOperator,
    rng: &mut R,
) -> Result<Mutation, MutationError> {
    let edit = plan_edit(p, site, op, None, rng)?;
    finish(p, edit)
}

/// Apply `op` at `site` with a caller-chosen replacement.
pub fn apply_choice(
    p: &Program,
    site: &CandidateSite,
    op: MutationOperator,
    choice: &Choice,
) -> Result<Mutation, MutationError> {
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let edit = plan_edit(p, site, op, Some(choice), &mut unused)?;
    finish(p, edit)
}

fn finish(p: &Program, edit: Edit) -> Result<Mutation, MutationError> {
    let source = splice_all(p.source(), std::slice::from_ref(&edit));
    let program = p.reparse(source).map_err(MutationError::NonParsingResult)?.with_origin(Origin::Mutant);
    Ok(Mutation { program, record: edit.record })
}

/// A mutated program together with the edits that produced it.
#[derive(Debug, Clone)]
pub struct Mutant {
    pub program: Program,
    pub parent_id: String,
    pub applied: Vec<MutationRecord>,
    /// Seed of the pass that produced this mutant; replaying the pass with
    /// it reproduces the mutant.
    pub rng_seed: u64,
}

/// Line-delimited persistence shape of a [`Mutant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantRecord {
    pub id: String,
    pub parent_id: String,
    pub problem_id: String,
    pub rng_seed: u64,
    pub source: String,
    pub applied: Vec<MutationRecord>,
}

impl Mutant {
    pub fn to_record(&self) -> MutantRecord {
        MutantRecord {
            id: self.program.id().to_string(),
            parent_id: self.parent_id.clone(),
            problem_id: self.program.problem_id().to_string(),
            rng_seed: self.rng_seed,
            source: self.program.source().to_string(),
            applied: self.applied.clone(),
        }
    }

    pub fn from_record(record: &MutantRecord) -> Result<Mutant, ProgramError> {
        let program = Program::parse(record.source.clone())?
            .with_id(record.id.clone())
            .with_problem_id(record.problem_id.clone())
            .with_origin(Origin::Mutant);
        Ok(Mutant {
            program,
            parent_id: record.parent_id.clone(),
            applied: record.applied.clone(),
            rng_seed: record.rng_seed,
        })
    }
}

/// Which sites a pass may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationPolicy {
    /// Every operator; loops pick OIL/RIL/ZIL or stay unchanged.
    Full,
    /// Only numeric literal replacement.
    ConstantsOnly,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of pass `pass` under root seed `rng_seed`.
pub fn pass_seed(rng_seed: u64, pass: u64) -> u64 {
    splitmix64(rng_seed ^ splitmix64(pass))
}

fn choose_edits<R: Rng + ?Sized>(
    p: &Program,
    sites: &[CandidateSite],
    policy: MutationPolicy,
    rng: &mut R,
) -> Vec<Edit> {
    let mut planned = Vec::new();
    for site in sites {
        let op = match policy {
            MutationPolicy::ConstantsOnly => {
                if site.kind != NodeKind::NumericLiteral || !rng.gen_bool(SITE_PROBABILITY) {
                    continue;
                }
                MutationOperator::Crp
            }
            MutationPolicy::Full if site.kind == NodeKind::Loop => {
                // one draw over the loop operators plus "keep"
                let pick = rng.gen_range(0..=site.ops.len());
                match site.ops.get(pick) {
                    Some(op) => *op,
                    None => continue,
                }
            }
            MutationPolicy::Full => {
                if !rng.gen_bool(SITE_PROBABILITY) {
                    continue;
                }
                *site.ops.choose(rng).expect("sites carry at least one operator")
            }
        };
        if let Ok(edit) = plan_edit(p, site, op, None, rng) {
            planned.push(edit);
        }
    }
    // enclosing edits (slice arguments) win over edits nested inside them
    let mut order: Vec<usize> = (0..planned.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(planned[i].extent()), planned[i].record.span.start));
    let mut accepted: Vec<usize> = Vec::new();
    for i in order {
        if accepted.iter().all(|&j| !planned[i].conflicts(&planned[j])) {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted.into_iter().map(|i| planned[i].clone()).collect()
}

/// Run one mutation pass with its own seed. `None` when the pass changed
/// nothing or produced unparseable code.
pub fn mutation_pass(seed: &Program, policy: MutationPolicy, pass_seed: u64, index: usize) -> Option<Mutant> {
    let sites = seed.find_candidates();
    mutation_pass_with_sites(seed, &sites, policy, pass_seed, index)
}

fn mutation_pass_with_sites(
    seed: &Program,
    sites: &[CandidateSite],
    policy: MutationPolicy,
    pass_seed: u64,
    index: usize,
) -> Option<Mutant> {
    let mut rng = ChaCha8Rng::seed_from_u64(pass_seed);
    let edits = choose_edits(seed, sites, policy, &mut rng);
    if edits.is_empty() {
        return None;
    }
    let source = splice_all(seed.source(), &edits);
    if source == seed.source() {
        return None;
    }
    let program = seed.reparse(source).ok()?.with_origin(Origin::Mutant).with_id(format!("{}#m{index}", seed.id()));
    let mut applied: Vec<MutationRecord> = edits.into_iter().map(|e| e.record).collect();
    applied.sort_by_key(|r| (r.span.start, r.span.end));
    Some(Mutant { program, parent_id: seed.id().to_string(), applied, rng_seed: pass_seed })
}

fn run_passes(seed: &Program, n: usize, rng_seed: u64, policy: MutationPolicy) -> Vec<Mutant> {
    let sites = seed.find_candidates();
    if sites.is_empty() {
        return Vec::new();
    }
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(seed.source().to_string());
    let mut out = Vec::new();
    for pass in 0..n {
        let Some(m) = mutation_pass_with_sites(seed, &sites, policy, pass_seed(rng_seed, pass as u64), pass) else {
            continue;
        };
        if seen.insert(m.program.source().to_string()) {
            out.push(m);
        }
    }
    out
}

/// `n` independent passes over every candidate site, deduplicated by source text.
pub fn generate_mutants(seed: &Program, n: usize, rng_seed: u64) -> Vec<Mutant> {
    run_passes(seed, n, rng_seed, MutationPolicy::Full)
}

/// Like [`generate_mutants`] but only resamples numeric literals.
pub fn mutate_constants_only(seed: &Program, n: usize, rng_seed: u64) -> Vec<Mutant> {
    run_passes(seed, n, rng_seed, MutationPolicy::ConstantsOnly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use MutationOperator as Op;

    fn site_at(p: &Program, text: &str, kind: NodeKind) -> CandidateSite {
        p.find_candidates()
            .into_iter()
            .find(|s| s.kind == kind && p.slice(s.span) == text)
            .unwrap_or_else(|| panic!("no {kind:?} site `{text}`"))
    }

    fn choose(src: &str, text: &str, kind: NodeKind, op: Op, choice: Choice) -> String {
        let p = Program::parse(src).unwrap();
        let site = site_at(&p, text, kind);
        apply_choice(&p, &site, op, &choice).unwrap().program.source().to_string()
    }

    fn apply(src: &str, text: &str, kind: NodeKind, op: Op) -> String {
        let p = Program::parse(src).unwrap();
        let site = site_at(&p, text, kind);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        apply_operator(&p, &site, op, &mut rng).unwrap().program.source().to_string()
    }

    #[test]
    fn twelve_operators() {
        assert_eq!(Op::ALL.len(), 12);
        let codes: HashSet<_> = Op::ALL.iter().map(|o| o.code()).collect();
        assert_eq!(codes.len(), 12);
        assert_eq!("ror".parse::<Op>().unwrap(), Op::Ror);
        assert!("XYZ".parse::<Op>().is_err());
    }

    #[test]
    fn ror_targeted() {
        assert_eq!(choose("x <= y", "<=", NodeKind::Relational, Op::Ror, Choice::Text(">".into())), "x > y");
    }

    #[test]
    fn aor_targeted() {
        assert_eq!(choose("x * y", "*", NodeKind::BinaryArithmetic, Op::Aor, Choice::Text("/".into())), "x / y");
    }

    #[test]
    fn random_replacements_stay_in_pool() {
        let p = Program::parse("x <= y").unwrap();
        let site = site_at(&p, "<=", NodeKind::Relational);
        let mut seen = HashSet::new();
        for s in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let m = apply_operator(&p, &site, Op::Ror, &mut rng).unwrap();
            seen.insert(m.record.after.clone());
        }
        let want: HashSet<String> = ["<", ">", ">=", "==", "!="].iter().map(|s| s.to_string()).collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn invalid_choices_are_rejected() {
        let p = Program::parse("x <= y").unwrap();
        let site = site_at(&p, "<=", NodeKind::Relational);
        assert!(matches!(
            apply_choice(&p, &site, Op::Ror, &Choice::Text("+".into())),
            Err(MutationError::InvalidChoice { .. })
        ));
        assert!(matches!(
            apply_choice(&p, &site, Op::Ror, &Choice::Text("<=".into())),
            Err(MutationError::NoChange { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            apply_operator(&p, &site, Op::Aor, &mut rng),
            Err(MutationError::InapplicableOperator { op: Op::Aor, kind: NodeKind::Relational })
        ));
    }

    #[test]
    fn lcr_swaps_and_is_involutive() {
        let once = apply("a and b", "and", NodeKind::LogicalConnector, Op::Lcr);
        assert_eq!(once, "a or b");
        assert_eq!(apply(&once, "or", NodeKind::LogicalConnector, Op::Lcr), "a and b");
    }

    #[test]
    fn bcr_is_involutive() {
        let src = "for i in a:\n    break\n";
        let once = apply(src, "break", NodeKind::BreakContinue, Op::Bcr);
        assert_eq!(once, "for i in a:\n    continue\n");
        assert_eq!(apply(&once, "continue", NodeKind::BreakContinue, Op::Bcr), src);
    }

    #[test]
    fn cod_deletes_negations() {
        assert_eq!(apply("x = not done", "not", NodeKind::Negation, Op::Cod), "x = done");
        assert_eq!(apply("x = a not in b", "not in", NodeKind::Negation, Op::Cod), "x = a in b");
        assert_eq!(apply("x = not(a)", "not", NodeKind::Negation, Op::Cod), "x = (a)");
    }

    #[test]
    fn aod_deletes_unary_sign() {
        assert_eq!(apply("x = -y", "-", NodeKind::UnaryArithmetic, Op::Aod), "x = y");
        assert_eq!(apply("x = a - -b", "-", NodeKind::UnaryArithmetic, Op::Aod), "x = a - b");
    }

    #[test]
    fn sir_deletes_each_argument() {
        let src = "a[1:5:2]";
        assert_eq!(choose(src, "1:5:2", NodeKind::Slice, Op::Sir, Choice::SliceArg(SliceArg::Step)), "a[1:5]");
        assert_eq!(choose(src, "1:5:2", NodeKind::Slice, Op::Sir, Choice::SliceArg(SliceArg::Start)), "a[:5:2]");
        assert_eq!(choose(src, "1:5:2", NodeKind::Slice, Op::Sir, Choice::SliceArg(SliceArg::Stop)), "a[1::2]");
        let p = Program::parse("a[1:]").unwrap();
        let site = site_at(&p, "1:", NodeKind::Slice);
        assert!(apply_choice(&p, &site, Op::Sir, &Choice::SliceArg(SliceArg::Step)).is_err());
    }

    #[test]
    fn loop_operators() {
        let src = "for i in xs:\n    s += i\n";
        assert_eq!(apply(src, src.trim_end(), NodeKind::Loop, Op::Ril), "for i in reversed(xs):\n    s += i\n");
        assert_eq!(apply(src, src.trim_end(), NodeKind::Loop, Op::Oil), "for i in xs:\n    s += i\n    break\n");
        assert_eq!(apply(src, src.trim_end(), NodeKind::Loop, Op::Zil), "for i in xs:\n    break\n    s += i\n");
        let inline = "for i in xs: s += i\n";
        assert_eq!(apply(inline, inline.trim_end(), NodeKind::Loop, Op::Oil), "for i in xs: s += i; break\n");
        assert_eq!(apply(inline, inline.trim_end(), NodeKind::Loop, Op::Zil), "for i in xs: break; s += i\n");
        let tuple = "for i in 1, 2:\n    pass\n";
        assert_eq!(apply(tuple, tuple.trim_end(), NodeKind::Loop, Op::Ril), "for i in reversed((1, 2)):\n    pass\n");
    }

    #[test]
    fn crp_numeric_keeps_kind() {
        let p = Program::parse("x = 7\ny = 2.5").unwrap();
        let int_site = site_at(&p, "7", NodeKind::NumericLiteral);
        let float_site = site_at(&p, "2.5", NodeKind::NumericLiteral);
        for s in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            if let Ok(m) = apply_operator(&p, &int_site, Op::Crp, &mut rng) {
                assert!(m.record.after.parse::<i64>().is_ok(), "{}", m.record.after);
            }
            if let Ok(m) = apply_operator(&p, &float_site, Op::Crp, &mut rng) {
                assert!(m.record.after.contains('.') || m.record.after.contains('e'));
                assert!(m.record.after.parse::<f64>().is_ok());
            }
        }
    }

    #[test]
    fn crp_string_extends_or_shortens() {
        let p = Program::parse("s = 'abc'").unwrap();
        let site = site_at(&p, "'abc'", NodeKind::StringLiteral);
        let mut shapes = HashSet::new();
        for s in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let m = apply_operator(&p, &site, Op::Crp, &mut rng).unwrap();
            let inner = m.record.after.trim_matches('\'');
            if inner == "ab" {
                shapes.insert("short");
            } else {
                assert!(inner.starts_with("abc") && (4..=5).contains(&inner.len()), "{inner}");
                shapes.insert("long");
            }
        }
        assert_eq!(shapes.len(), 2);
    }

    #[test]
    fn shorten_respects_escapes() {
        assert_eq!(shorten("ab\\n", Some(2)).unwrap(), "ab");
        assert_eq!(shorten("\\\\", None).unwrap(), "");
        assert_eq!(shorten("x\\d", None).unwrap(), "x");
        assert_eq!(shorten("é", None).unwrap(), "");
        assert!(shorten("", None).is_none());
    }

    #[test]
    fn shortening_escape_in_source() {
        let p = Program::parse("s = 'a\\n'").unwrap();
        let site = site_at(&p, "'a\\n'", NodeKind::StringLiteral);
        for s in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let m = apply_operator(&p, &site, Op::Crp, &mut rng).unwrap();
            assert!(m.record.after == "'a'" || m.record.after.starts_with("'a\\n"), "{}", m.record.after);
        }
    }

    #[test]
    fn nested_loop_breaks_keep_indentation() {
        let src = "for i in a:\n    for j in b:\n        x = 1\n";
        let p = Program::parse(src).unwrap();
        let loops: Vec<_> = p.find_candidates().into_iter().filter(|s| s.kind == NodeKind::Loop).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let edits: Vec<Edit> = loops.iter().map(|s| plan_edit(&p, s, Op::Oil, None, &mut rng).unwrap()).collect();
        let out = splice_all(src, &edits);
        assert_eq!(out, "for i in a:\n    for j in b:\n        x = 1\n        break\n    break\n");
        Program::parse(out).unwrap();
    }

    #[test]
    fn no_candidates_no_mutants() {
        let p = Program::parse("pass").unwrap();
        assert!(generate_mutants(&p, 20, 3).is_empty());
    }

    #[test]
    fn generation_is_reproducible_and_deduplicated() {
        let src = "n = 10\ns = 0\nfor i in range(n):\n    if i % 2 == 0 and i > 3:\n        s += i * 2\n    else:\n        continue\nprint(s, 'done')\n";
        let p = Program::parse(src).unwrap().with_id("seed").with_problem_id("p0");
        let a = generate_mutants(&p, 20, 7);
        let b = generate_mutants(&p, 20, 7);
        assert!(!a.is_empty() && a.len() <= 20);
        let sa: Vec<_> = a.iter().map(|m| m.program.source()).collect();
        let sb: Vec<_> = b.iter().map(|m| m.program.source()).collect();
        assert_eq!(sa, sb);
        let distinct: HashSet<_> = sa.iter().collect();
        assert_eq!(distinct.len(), sa.len());
        assert!(!sa.contains(&src));
        for m in &a {
            assert!(!m.applied.is_empty());
            assert_eq!(m.parent_id, "seed");
            assert_eq!(m.program.problem_id(), "p0");
            let replay = mutation_pass(&p, MutationPolicy::Full, m.rng_seed, 0).unwrap();
            assert_eq!(replay.program.source(), m.program.source());
        }
    }

    #[test]
    fn constants_only_touches_numeric_literals() {
        let src = "squares = [x**2 for x in range(10)]";
        let p = Program::parse(src).unwrap();
        let ms = mutate_constants_only(&p, 20, 11);
        assert!(!ms.is_empty());
        for m in &ms {
            for r in &m.applied {
                assert_eq!(r.operator, Op::Crp);
                assert!(r.before == "2" || r.before == "10");
            }
        }
        assert!(mutate_constants_only(&Program::parse("s = 'abc'").unwrap(), 20, 1).is_empty());
    }

    #[test]
    fn record_roundtrip() {
        let p = Program::parse("x = 1 + 2\n").unwrap().with_id("a").with_problem_id("p");
        let m = generate_mutants(&p, 5, 0).remove(0);
        let rec = m.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let back: MutantRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        let again = Mutant::from_record(&back).unwrap();
        assert_eq!(again.program.source(), m.program.source());
    }
}
