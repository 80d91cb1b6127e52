//! The `posd` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::datasets::{
    build_dataset, check_digests, decode, emit_dataset, encode, manifests_in, split_file_name, write_atomic, Dataset,
    DatasetError, DatasetSpec, Manifest, Split,
};
use crate::grammar::TemplateSet;
use crate::learners::{
    chance_alignment_probability, evaluate, render_result, render_table, run_once, run_restarts, train_model, EvalResult,
    Featurizer, LearnerError, ModelPredictor, RestartReport, SavedModel, TrainConfig,
};
use crate::lexicon::Lexicon;
use crate::paradigms::ParadigmId;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for failed verification or a missed threshold.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for malformed invocations.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "posd", version, about = "Generate, verify and evaluate poverty-of-the-stimulus datasets")]
pub struct Cli {
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate split files and a manifest.
    Generate(GenerateArgs),
    /// Check a dataset directory: digests, record well-formedness, regeneration and POSD conditions.
    Verify(VerifyArgs),
    /// Train a learner (or run a fixed predictor) and evaluate it.
    Train(TrainArgs),
    /// Evaluate a saved model or fixed predictor.
    Eval(EvalArgs),
    /// Aggregate result files into one table.
    Report(ReportArgs),
    /// Probability that at least k of n domains align by chance.
    Prob(ProbArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Paradigm; all four when omitted.
    #[arg(long)]
    pub paradigm: Option<ParadigmId>,
    /// Sentences per split (multiple of 4).
    #[arg(long, default_value_t = 10000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace a quarter of training ambiguous pairs' good member with a confound control (saux_inv).
    #[arg(long)]
    pub augment_controls: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub paradigm: Option<ParadigmId>,
}

/// Pass thresholds; a run below any of them exits with status 1.
#[derive(Debug, Clone, Copy, Args)]
pub struct Thresholds {
    /// Minimum training-template pair accuracy on the test split.
    #[arg(long)]
    pub min_train_pairs: Option<f64>,
    /// Minimum test-template pair accuracy on the test split.
    #[arg(long)]
    pub min_test_pairs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub paradigm: Option<ParadigmId>,
    #[arg(long, default_value = "surface")]
    pub featurizer: Featurizer,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Seed of the first restart; later restarts add their index.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the results as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the first restart's model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub paradigm: Option<ParadigmId>,
    /// Saved model; required for trainable featurizers.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fixed predictor to run when no model is given.
    #[arg(long)]
    pub featurizer: Option<Featurizer>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result files written by `train` or `eval`.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Where to write the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbArgs {
    #[arg(long)]
    pub domains: u32,
    #[arg(long)]
    pub atleast: u32,
    #[arg(long)]
    pub p: f64,
}

/// A failed command: usage problems map to 2, everything else to 1.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn fail(message: impl Into<String>) -> Self {
        Failure { code: EXIT_FAIL, message: message.into() }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidSpec(_) => Failure::usage(e.to_string()),
            e => Failure::fail(e.to_string()),
        }
    }
}

impl From<LearnerError> for Failure {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::InvalidConfig(_) | LearnerError::Domain(_) => Failure::usage(e.to_string()),
            e => Failure::fail(e.to_string()),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parse `argv` and run; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Verify(a) => verify(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Prob(a) => prob(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn selected(p: Option<ParadigmId>) -> Vec<ParadigmId> {
    p.map(|p| vec![p]).unwrap_or_else(|| ParadigmId::ALL.to_vec())
}

fn generate(a: GenerateArgs) -> Outcome {
    let lex = Lexicon::shipped();
    let templates = TemplateSet::shipped();
    let paradigms = selected(a.paradigm);
    let mut code = EXIT_OK;
    for p in &paradigms {
        let mut spec = DatasetSpec::new(*p, a.n, a.seed);
        spec.augment_controls = a.augment_controls && *p == ParadigmId::SauxInv;
        if a.augment_controls && a.paradigm.is_some() && *p != ParadigmId::SauxInv {
            return Err(Failure::usage("--augment-controls applies only to saux_inv"));
        }
        spec.validate()?;
        let dataset = build_dataset(&spec, &lex, &templates)?;
        println!("{}", dataset.report);
        if !dataset.report.passed {
            code = EXIT_FAIL;
            continue;
        }
        let m = emit_dataset(&dataset, &a.out)?;
        println!("wrote {} files to {} (content {})", m.digests.len(), a.out.display(), m.content_digest);
    }
    Ok(code)
}

fn manifests(dir: &Path, paradigm: Option<ParadigmId>) -> Result<Vec<Manifest>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", dir.display())));
    }
    let found: Vec<Manifest> = manifests_in(dir)?
        .into_iter()
        .map(|(_, m)| m)
        .filter(|m| paradigm.is_none_or(|p| m.spec.paradigm == p))
        .collect();
    if found.is_empty() {
        return Err(Failure::fail(format!("no dataset manifest in {}", dir.display())));
    }
    Ok(found)
}

/// Rebuild a dataset from its manifest and confirm the files on disk match it byte for byte.
fn reproduce(dir: &Path, manifest: &Manifest) -> Result<Dataset, Failure> {
    let bad = check_digests(dir, manifest)?;
    if !bad.is_empty() {
        return Err(Failure::fail(format!("digest mismatch: {}", bad.join(", "))));
    }
    let dataset = build_dataset(&manifest.spec, &Lexicon::shipped(), &TemplateSet::shipped())?;
    for split in Split::ALL {
        let name = split_file_name(manifest.spec.paradigm, split);
        let on_disk = fs::read(dir.join(&name)).map_err(|e| Failure::fail(format!("{name}: {e}")))?;
        if on_disk != encode(&dataset.records(split)).into_bytes() {
            return Err(Failure::fail(format!("{name} differs from a regeneration with the recorded spec")));
        }
    }
    Ok(dataset)
}

fn verify(a: VerifyArgs) -> Outcome {
    let mut code = EXIT_OK;
    for m in manifests(&a.input, a.paradigm)? {
        let p = m.spec.paradigm;
        for split in Split::ALL {
            let name = split_file_name(p, split);
            let path = a.input.join(&name);
            let file = fs::File::open(&path).map_err(|e| Failure::fail(format!("{name}: {e}")))?;
            let records = decode(std::io::BufReader::new(file), &name)?;
            if let Some(r) = records.iter().find(|r| r.paradigm != p || r.split != split) {
                return Err(Failure::fail(format!("{name}: record for quad {} is out of place", r.quad_id)));
            }
            if let Some(r) = records.iter().find(|r| r.template_kind != r.cell.template_kind()) {
                return Err(Failure::fail(format!("{name}: quad {} has inconsistent template kind", r.quad_id)));
            }
        }
        match reproduce(&a.input, &m) {
            Ok(d) => {
                println!("{}", d.report);
                if !d.report.passed {
                    code = EXIT_FAIL;
                }
            }
            Err(f) => {
                println!("paradigm {p}: {}\nFAIL", f.message);
                code = EXIT_FAIL;
            }
        }
    }
    Ok(code)
}

fn threshold_failures(r: &EvalResult, t: &Thresholds) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |name: &str, got: Option<f64>, min: Option<f64>| {
        if let Some(min) = min {
            match got {
                Some(g) if g >= min => {}
                Some(g) => out.push(format!("{} {} {name} pair accuracy {g:.4} < {min}", r.paradigm, r.featurizer)),
                None => out.push(format!("{} {} has no {name} pairs", r.paradigm, r.featurizer)),
            }
        }
    };
    check("training-template", r.heldout_pair_accuracy(), t.min_train_pairs);
    check("test-template", r.test_pair_accuracy(), t.min_test_pairs);
    out
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Failure::fail(e.to_string()))?;
    write_atomic(path, json.as_bytes())?;
    Ok(())
}

fn finish(results: &[EvalResult], out: Option<&Path>, t: &Thresholds) -> Outcome {
    for r in results {
        print!("{}", render_result(r));
    }
    if results.len() > 1 {
        print!("{}", render_table(results));
    }
    if let Some(path) = out {
        write_json(path, &results)?;
    }
    let failures: Vec<String> = results.iter().flat_map(|r| threshold_failures(r, t)).collect();
    for f in &failures {
        println!("threshold: {f}");
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_FAIL })
}

fn train(a: TrainArgs) -> Outcome {
    if a.restarts == 0 {
        return Err(Failure::usage("--restarts must be at least 1"));
    }
    if a.model_out.is_some() && !a.featurizer.is_trainable() {
        return Err(Failure::usage(format!("{} has no model to save", a.featurizer)));
    }
    let config = TrainConfig { seed: a.seed, ..TrainConfig::default() };
    let mut results = Vec::new();
    let found = manifests(&a.input, a.paradigm)?;
    let many = found.len() > 1;
    for m in found {
        let dataset = reproduce(&a.input, &m)?;
        let runs = run_restarts(&dataset, a.featurizer, config, a.restarts)?;
        if let Some(report) = RestartReport::new(runs.clone()) {
            let s = &report.test_pair_accuracy;
            println!(
                "{} {}: test-template pair accuracy median {:.4} (min {:.4}, max {:.4}) over {} runs",
                report.paradigm, report.featurizer, s.median, s.min, s.max, s.runs
            );
        }
        if let Some(path) = &a.model_out {
            let (model, _) = train_model(&dataset, a.featurizer, config)?;
            let file = SavedModel { paradigm: m.spec.paradigm, featurizer: a.featurizer, model };
            write_json(&model_path(path, m.spec.paradigm, many)?, &file)?;
        }
        results.extend(runs);
    }
    finish(&results, a.out.as_deref(), &a.thresholds)
}

/// With several paradigms `path` is a directory holding one model per paradigm.
fn model_path(path: &Path, paradigm: ParadigmId, many: bool) -> Result<PathBuf, Failure> {
    if !many {
        return Ok(path.to_path_buf());
    }
    fs::create_dir_all(path).map_err(|e| Failure::fail(format!("{}: {e}", path.display())))?;
    Ok(path.join(format!("{paradigm}.model.json")))
}

fn eval(a: EvalArgs) -> Outcome {
    let saved: Option<SavedModel> = match &a.model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let featurizer = match (&saved, a.featurizer) {
        (Some(s), None) => s.featurizer,
        (Some(s), Some(f)) if f == s.featurizer => f,
        (Some(s), Some(f)) => return Err(Failure::usage(format!("model was trained with {}, not {f}", s.featurizer))),
        (None, Some(f)) if !f.is_trainable() => f,
        (None, _) => return Err(Failure::usage("give --model, or --featurizer naming a fixed predictor")),
    };
    let paradigm = a.paradigm.or(saved.as_ref().map(|s| s.paradigm));
    let mut results = Vec::new();
    for m in manifests(&a.input, paradigm)? {
        let dataset = reproduce(&a.input, &m)?;
        let r = match &saved {
            Some(s) => {
                let predictor = ModelPredictor { model: s.model.clone(), featurizer };
                evaluate(&predictor, &dataset, featurizer, a.seed)?
            }
            None => run_once(&dataset, featurizer, TrainConfig { seed: a.seed, ..TrainConfig::default() })?,
        };
        results.push(r);
    }
    finish(&results, a.out.as_deref(), &a.thresholds)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResultFile {
    Many(Vec<EvalResult>),
    One(Box<EvalResult>),
}

fn report(a: ReportArgs) -> Outcome {
    let mut results = Vec::new();
    for path in &a.inputs {
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text).map_err(|e| Failure::fail(format!("{}: {e}", path.display())))? {
            ResultFile::Many(rs) => results.extend(rs),
            ResultFile::One(r) => results.push(*r),
        }
    }
    let table = render_table(&results);
    print!("{table}");
    for r in &results {
        if let Some(d) = r.split(Split::Test).and_then(|s| s.diagnosis.as_ref()) {
            let held = r.heldout_pair_accuracy().unwrap_or(0.0);
            println!(
                "{} {} seed {}: training-template {:.1}%, test-template {:.1}% structural / {:.1}% linear / {:.1}% other",
                r.paradigm,
                r.featurizer,
                r.seed,
                100.0 * held,
                100.0 * d.structural,
                100.0 * d.linear,
                100.0 * d.other
            );
        }
    }
    if let Some(path) = &a.out {
        write_atomic(path, table.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn prob(a: ProbArgs) -> Outcome {
    let p = chance_alignment_probability(a.domains, a.atleast, a.p)?;
    println!("{p}");
    Ok(EXIT_OK)
}
