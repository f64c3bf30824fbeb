use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracecorpus::codec::{decode_trace, encode_source, TierPrefix};
use tracecorpus::dataset::{
    build_split, corpus_stats, flag_singleline_mismatches, ingest_singleline, materialize_stage, read_jsonl,
    record_from_trace, select_hard, Corpora, DatasetRecord, DifficultySource, SingleLineSource, Splits, Stage,
    TracedProgram,
};
use tracecorpus::downstream::{
    attach_outputs, filter_and_score, leave_one_out_instances, mean_average_precision, ProgramOutput, RankingInstance,
    SearchProgram,
};
use tracecorpus::harness::Harness;
use tracecorpus::manifest::{id_set_hash, Manifest};
use tracecorpus::metrics::{aggregate, score_example, EvalReport, ExampleOutcome};
use tracecorpus::mutation::{generate_mutants, mutate_constants_only, pass_seed, Mutant, MutantRecord};
use tracecorpus::program::{Origin, Program, TestInput};
use tracecorpus::trace::ExecutionStatus;
use tracecorpus::{Exact, Scalar};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::seeds;

const SPLIT_SEED_STREAM: u64 = 0x5eed_0001;
const STAGE_SEED_STREAM: u64 = 0x5eed_0002;

fn pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    Ok(tracecorpus::dataset::write_jsonl(path, items)?)
}

fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn base_manifest(command: &str, cfg: &PipelineConfig) -> Result<Manifest> {
    let mut m = Manifest::new(command);
    m.config = serde_json::to_value(cfg)?;
    m.seeds.insert("root".into(), cfg.rng_seed);
    Ok(m)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

pub fn mutate(cfg: &PipelineConfig, seed_dir: &Path, constants_only: bool, out: &Path) -> Result<()> {
    let set = seeds::load(seed_dir)?;
    for (path, reason) in &set.rejected {
        warn!("skipping seed {}: {reason}", path.display());
    }
    let n = cfg.mutants_per_seed;
    let rng = cfg.rng_seed;
    let per_seed: Vec<Vec<MutantRecord>> = pool(cfg)?.install(|| {
        set.seeds
            .par_iter()
            .map(|s| {
                let mutants = if constants_only {
                    mutate_constants_only(&s.program, n, rng)
                } else {
                    generate_mutants(&s.program, n, rng)
                };
                mutants.iter().map(Mutant::to_record).collect()
            })
            .collect()
    });
    let records: Vec<MutantRecord> = per_seed.into_iter().flatten().collect();
    write_jsonl(out, &records)?;

    let mut m = base_manifest("mutate", cfg)?;
    m.add_input_dir(seed_dir)?;
    m.counts.insert("seeds".into(), set.seeds.len());
    m.counts.insert("rejected_seeds".into(), set.rejected.len());
    m.counts.insert("mutants".into(), records.len());
    write_manifest(&m, &manifest_path(out))?;
    info!("{} mutants from {} seeds", records.len(), set.seeds.len());
    Ok(())
}

/// A program to trace, with its provenance.
#[derive(Debug, Clone, Deserialize)]
struct ProgramRecord {
    id: String,
    #[serde(default)]
    problem_id: String,
    source: String,
    #[serde(default)]
    test_input: String,
    #[serde(default)]
    origin: Option<Origin>,
    #[serde(default)]
    parent_id: Option<String>,
}

struct Job {
    program: Program,
    input: TestInput,
    origin: Origin,
    parent_id: Option<String>,
}

pub fn trace(
    cfg: &PipelineConfig,
    seed_dir: Option<&Path>,
    mutants: Option<&Path>,
    programs: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if seed_dir.is_none() && mutants.is_none() && programs.is_none() {
        return Err(CliError::usage("nothing to trace: pass --seed-dir, --mutants or --programs"));
    }
    let harness = Harness::new(cfg.harness_config()?);
    let mut m = base_manifest("trace", cfg)?;
    let mut jobs: Vec<Job> = Vec::new();
    let mut inputs: HashMap<String, TestInput> = HashMap::new();

    if let Some(dir) = seed_dir {
        let set = seeds::load(dir)?;
        m.add_input_dir(dir)?;
        m.counts.insert("rejected_seeds".into(), set.rejected.len());
        for s in set.seeds {
            inputs.insert(s.program.id().to_string(), s.input.clone());
            jobs.push(Job { program: s.program, input: s.input, origin: Origin::Seed, parent_id: None });
        }
    }
    if let Some(path) = mutants {
        m.add_input(path)?;
        for r in read_jsonl::<MutantRecord>(path)? {
            let mutant = Mutant::from_record(&r).map_err(|e| CliError::data(format!("mutant `{}`: {e}", r.id)))?;
            let input = inputs.get(&r.parent_id).cloned().unwrap_or_default();
            jobs.push(Job { program: mutant.program, input, origin: Origin::Mutant, parent_id: Some(r.parent_id) });
        }
    }
    if let Some(path) = programs {
        m.add_input(path)?;
        for r in read_jsonl::<ProgramRecord>(path)? {
            let program = Program::parse(r.source.clone())
                .map_err(|e| CliError::data(format!("program `{}`: {e}", r.id)))?
                .with_id(r.id.clone())
                .with_problem_id(if r.problem_id.is_empty() { r.id.clone() } else { r.problem_id.clone() });
            let origin = r.origin.unwrap_or(if r.parent_id.is_some() { Origin::Mutant } else { Origin::Seed });
            jobs.push(Job {
                program: program.with_origin(origin),
                input: TestInput::from_text(&r.test_input),
                origin,
                parent_id: r.parent_id,
            });
        }
    }

    // programs that read more input than they are given cannot be traced
    let mut runnable: Vec<(Job, Program)> = Vec::new();
    let mut short_input = 0;
    for job in jobs {
        match job.program.rewrite_stdin(&job.input) {
            Ok(p) => runnable.push((job, p)),
            Err(_) => short_input += 1,
        }
    }
    let batch: Vec<(Program, TestInput)> = runnable.iter().map(|(j, p)| (p.clone(), j.input.clone())).collect();
    let results = harness.execute_many(&batch, cfg.worker_count());

    let mut traced = Vec::new();
    let mut by_status: BTreeMap<&'static str, usize> = BTreeMap::new();
    for ((job, rewritten), result) in runnable.into_iter().zip(results) {
        let result = result?;
        *by_status.entry(result.status.as_str()).or_default() += 1;
        if result.status == ExecutionStatus::Ok {
            traced.push(TracedProgram {
                id: job.program.id().to_string(),
                problem_id: job.program.problem_id().to_string(),
                origin: job.origin,
                parent_id: job.parent_id,
                source: rewritten.source().to_string(),
                trace: result.trace,
            });
        }
    }
    write_jsonl(out, &traced)?;
    m.counts.insert("insufficient_input".into(), short_input);
    for (status, n) in by_status {
        m.counts.insert(format!("status_{status}"), n);
    }
    m.counts.insert("traced".into(), traced.len());
    write_manifest(&m, &manifest_path(out))?;
    Ok(())
}

pub struct DatasetInputs<'a> {
    pub singleline: Option<&'a Path>,
    pub tutorial: Option<&'a Path>,
    pub codenetmut: Option<&'a Path>,
    pub losses: Option<&'a Path>,
    pub verify_singleline: bool,
}

#[derive(Debug, Deserialize)]
struct Loss {
    id: String,
    loss: f64,
}

/// Traces whose code or state cannot be encoded are skipped and counted.
fn to_records(traced: &[TracedProgram], tier: TierPrefix, skipped: &mut usize) -> Vec<DatasetRecord> {
    traced
        .iter()
        .filter_map(|t| match record_from_trace(t, tier) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("skipping `{}`: {e}", t.id);
                *skipped += 1;
                None
            }
        })
        .collect()
}

pub fn build_dataset(cfg: &PipelineConfig, inputs: DatasetInputs<'_>, out_dir: &Path) -> Result<()> {
    let stage: Stage = cfg.stage.parse().map_err(CliError::usage)?;
    let mut m = base_manifest("build-dataset", cfg)?;
    let split_seed = pass_seed(cfg.rng_seed, SPLIT_SEED_STREAM);
    let stage_seed = pass_seed(cfg.rng_seed, STAGE_SEED_STREAM);
    m.seeds.insert("split".into(), split_seed);
    m.seeds.insert("stage".into(), stage_seed);
    let mut corpora = Corpora::default();
    let mut unencodable = 0;

    if let Some(path) = inputs.singleline {
        m.add_input(path)?;
        let sources: Vec<SingleLineSource> = read_jsonl(path)?;
        corpora.singleline = ingest_singleline(&sources)?;
        if inputs.verify_singleline {
            let harness = Harness::new(cfg.harness_config()?);
            let flagged = flag_singleline_mismatches(&sources, &mut corpora.singleline, &harness);
            m.counts.insert("singleline_flagged".into(), flagged);
        }
        let source = match inputs.losses {
            Some(lp) => {
                m.add_input(lp)?;
                let losses: Vec<Loss> = read_jsonl(lp)?;
                DifficultySource::External(losses.into_iter().map(|l| (l.id, l.loss)).collect())
            }
            None => DifficultySource::Proxy,
        };
        corpora.singleline_hard = select_hard(&corpora.singleline, cfg.hard_fraction, &source)?;
    }
    if let Some(path) = inputs.tutorial {
        m.add_input(path)?;
        corpora.tutorial = to_records(&read_jsonl::<TracedProgram>(path)?, TierPrefix::Tutorial, &mut unencodable);
    }
    let (mut valid, mut test) = (Vec::new(), Vec::new());
    if let Some(path) = inputs.codenetmut {
        m.add_input(path)?;
        let traced: Vec<TracedProgram> = read_jsonl(path)?;
        let splits = build_split(traced, cfg.split, split_seed)?;
        for (name, part) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
            let ids = Splits::problem_ids(part);
            m.split_hashes.insert(name.into(), id_set_hash(ids.iter().map(String::as_str)));
            m.counts.insert(format!("{name}_problems"), ids.len());
        }
        m.counts.insert("test_mutants_dropped".into(), splits.dropped_mutants);
        corpora.codenetmut = to_records(&splits.train, TierPrefix::CodeNetMut, &mut unencodable);
        valid = to_records(&splits.valid, TierPrefix::CodeNetMut, &mut unencodable);
        test = to_records(&splits.test, TierPrefix::CodeNetMut, &mut unencodable);
    }

    let train = materialize_stage(stage, &corpora, stage_seed)?;
    fs::create_dir_all(out_dir)?;
    write_jsonl(&out_dir.join("train.jsonl"), &train)?;
    write_jsonl(&out_dir.join("valid.jsonl"), &valid)?;
    write_jsonl(&out_dir.join("test.jsonl"), &test)?;
    m.counts.insert("singleline".into(), corpora.singleline.len());
    m.counts.insert("singleline_hard".into(), corpora.singleline_hard.len());
    m.counts.insert("tutorial".into(), corpora.tutorial.len());
    m.counts.insert("codenetmut_train".into(), corpora.codenetmut.len());
    for (tier, stats) in corpus_stats(&train) {
        m.counts.insert(format!("train_{}", tier.name()), stats.examples);
    }
    m.counts.insert("unencodable".into(), unencodable);
    m.counts.insert("train".into(), train.len());
    m.counts.insert("valid".into(), valid.len());
    m.counts.insert("test".into(), test.len());
    write_manifest(&m, &out_dir.join("manifest.json"))?;
    Ok(())
}

pub fn encode(source: Option<&Path>, traced: Option<&Path>, tier: TierPrefix, out: Option<&Path>) -> Result<()> {
    if let Some(path) = source {
        println!("{}", encode_source(&fs::read_to_string(path)?, tier)?);
        return Ok(());
    }
    let path = traced.ok_or_else(|| CliError::usage("pass --source or --traced"))?;
    let mut skipped = 0;
    let records = to_records(&read_jsonl::<TracedProgram>(path)?, tier, &mut skipped);
    match out {
        Some(out) => write_jsonl(out, &records),
        None => {
            for r in &records {
                println!("{}", serde_json::to_string(r)?);
            }
            Ok(())
        }
    }
}

/// A model prediction; gold records are accepted as perfect predictions.
#[derive(Debug, Deserialize)]
struct Prediction {
    #[serde(alias = "id")]
    example_id: String,
    #[serde(alias = "target_tokens")]
    predicted_tokens: String,
    #[serde(default, alias = "stdout")]
    predicted_stdout: String,
}

fn report_json<S: Scalar>(report: &EvalReport<S>) -> serde_json::Value {
    let mut table = report.to_table();
    table["Output Examples"] = report.n_output_examples.into();
    table
}

pub fn evaluate(pred: &Path, gold: &Path, exact: bool) -> Result<()> {
    let golds: Vec<DatasetRecord> = read_jsonl(gold)?;
    let mut preds: HashMap<String, Prediction> = HashMap::new();
    for p in read_jsonl::<Prediction>(pred)? {
        if preds.contains_key(&p.example_id) {
            return Err(CliError::data(format!("duplicate prediction for `{}`", p.example_id)));
        }
        preds.insert(p.example_id.clone(), p);
    }
    let mut outcomes: Vec<ExampleOutcome> = Vec::with_capacity(golds.len());
    for g in &golds {
        let decoded = decode_trace(&g.target_tokens);
        if decoded.malformed {
            return Err(CliError::data(format!("gold record `{}` has a malformed trace", g.id)));
        }
        let gold_trace = decoded.trace.with_stdout(g.stdout.clone());
        let p = preds.get(&g.id).ok_or_else(|| CliError::data(format!("no prediction for `{}`", g.id)))?;
        outcomes.push(score_example(&decode_trace(&p.predicted_tokens), &p.predicted_stdout, &gold_trace));
    }
    let table =
        if exact { report_json(&aggregate::<Exact>(&outcomes)?) } else { report_json(&aggregate::<f64>(&outcomes)?) };
    print_json(&table)
}

pub fn search_eval(cfg: &PipelineConfig, corpus: &Path, predictions: Option<&Path>) -> Result<()> {
    let programs: Vec<SearchProgram> = read_jsonl(corpus)?;
    let (outputs, mode): (Vec<ProgramOutput>, &str) = match predictions {
        Some(p) => (read_jsonl(p)?, "predicted"),
        None => (Harness::new(cfg.harness_config()?).oracle_outputs(&programs, cfg.worker_count())?, "oracle"),
    };
    let candidates = attach_outputs(&programs, &outputs)?;
    let instances = leave_one_out_instances(&candidates);
    let map = mean_average_precision::<f64>(&instances)?;
    print_json(&json!({ "MAP": map, "queries": instances.len(), "outputs": mode }))
}

pub fn rank_eval(path: &Path, top_m: usize, ks: &[u64]) -> Result<()> {
    if top_m == 0 {
        return Err(CliError::usage("--top-m must be at least 1"));
    }
    let instances: Vec<RankingInstance> = read_jsonl(path)?;
    if instances.is_empty() {
        return Err(CliError::data("no ranking instances"));
    }
    let mut sums: BTreeMap<u64, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    for inst in &instances {
        for (k, v) in filter_and_score::<f64>(inst, top_m, ks)? {
            *sums.get_mut(&k).expect("k requested") += v;
        }
    }
    let n = instances.len() as f64;
    let mut out = serde_json::Map::new();
    for (k, s) in sums {
        out.insert(format!("pass@{k}"), (s / n).into());
    }
    out.insert("instances".into(), instances.len().into());
    out.insert("top_m".into(), top_m.into());
    print_json(&serde_json::Value::Object(out))
}

pub fn stats(paths: &[std::path::PathBuf]) -> Result<()> {
    let mut records: Vec<DatasetRecord> = Vec::new();
    for p in paths {
        records.extend(read_jsonl::<DatasetRecord>(p)?);
    }
    let mut out = serde_json::Map::new();
    for (tier, s) in corpus_stats(&records) {
        out.insert(
            tier.name().to_string(),
            json!({
                "Examples": s.examples,
                "Avg Code Len": s.avg_code_len,
                "Avg Trace Len": s.avg_trace_len,
                "Avg State Num": s.avg_state_num,
            }),
        );
    }
    print_json(&serde_json::Value::Object(out))
}
