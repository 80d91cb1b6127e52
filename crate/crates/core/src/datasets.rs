//! Train/dev/test splits built from quads, and the line-delimited split files.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grammar::{GrammarError, TemplateSet};
use crate::learners::RelationIndicators;
use crate::lexicon::Lexicon;
use crate::paradigms::{
    build_quad_with, quad_rng, Cell, LabeledSentence, ParadigmError, ParadigmId, PosdAccumulator, PosdReport,
    Quad, TemplateKind,
};

pub const FORMAT: &str = "posd-split";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const LOCK_FILE: &str = ".posd.lock";

/// Quads generated per parallel batch.
const CHUNK: u64 = 512;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("insufficient lexicon for {paradigm}: accepted {accepted} of {needed} quads after {attempts} attempts ({reason})")]
    InsufficientLexicon { paradigm: ParadigmId, needed: usize, accepted: usize, attempts: u64, reason: String },
    #[error(transparent)]
    Paradigm(#[from] ParadigmError),
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("output directory {0} is locked by another run")]
    Locked(String),
    #[error("{0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| format!("unknown split {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub paradigm: ParadigmId,
    pub n_per_split: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub augment_controls: bool,
    /// Where `emit_dataset` writes; not part of the recorded spec.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl DatasetSpec {
    pub fn new(paradigm: ParadigmId, n_per_split: usize, master_seed: u64) -> Self {
        DatasetSpec { paradigm, n_per_split, master_seed, augment_controls: false, output: None }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_per_split < 4 || !self.n_per_split.is_multiple_of(4) {
            return Err(DatasetError::InvalidSpec(format!(
                "n_per_split must be a positive multiple of 4, got {}",
                self.n_per_split
            )));
        }
        if self.augment_controls && self.paradigm != ParadigmId::SauxInv {
            return Err(DatasetError::InvalidSpec("confound controls exist only for saux_inv".into()));
        }
        Ok(())
    }

    /// Quads assigned to each split: train takes the training pair only, dev and test all four members.
    pub fn quads_per_split(&self) -> [(Split, usize); 3] {
        let n = self.n_per_split;
        [(Split::Train, n / 2), (Split::Dev, n / 4), (Split::Test, n / 4)]
    }
}

/// One sentence of a split file. Field order is the file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRecord {
    pub text: String,
    /// Task label: the structural hypothesis.
    pub label: bool,
    pub label_linear: bool,
    pub paradigm: ParadigmId,
    pub split: Split,
    pub template_kind: TemplateKind,
    pub quad_id: u64,
    pub cell: Cell,
}

impl SplitRecord {
    pub fn key(&self) -> (Split, u64, Cell) {
        (self.split, self.quad_id, self.cell)
    }
}

/// A record together with the tree relations the structural featurizers read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub record: SplitRecord,
    pub indicators: RelationIndicators,
}

impl Example {
    fn new(s: &LabeledSentence, paradigm: ParadigmId, split: Split, quad_id: u64) -> Result<Self, ParadigmError> {
        Ok(Example {
            record: SplitRecord {
                text: s.text(),
                label: s.label_structural,
                label_linear: s.label_linear,
                paradigm,
                split,
                template_kind: s.template_kind,
                quad_id,
                cell: s.cell,
            },
            indicators: RelationIndicators::compute(paradigm, &s.sentence)?,
        })
    }
}

/// Generated splits plus the verification of every quad they draw on.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub splits: BTreeMap<Split, Vec<Example>>,
    pub report: PosdReport,
}

impl Dataset {
    pub fn examples(&self, split: Split) -> &[Example] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn records(&self, split: Split) -> Vec<SplitRecord> {
        self.examples(split).iter().map(|e| e.record.clone()).collect()
    }
}

/// Members a quad contributes to a split, with the control standing in for `train_a` when requested.
fn contributed(quad: &Quad, split: Split, use_control: bool) -> Vec<&LabeledSentence> {
    quad.members
        .iter()
        .filter(|m| split != Split::Train || m.template_kind == TemplateKind::Train)
        .map(|m| match (&quad.control, m.cell) {
            (Some(c), Cell::TrainA) if use_control => c,
            _ => m,
        })
        .collect()
}

pub fn build_dataset(spec: &DatasetSpec, lex: &Lexicon, templates: &TemplateSet) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let paradigm = templates.paradigm(spec.paradigm).map_err(ParadigmError::from)?;
    let plan = spec.quads_per_split();
    let needed: usize = plan.iter().map(|(_, k)| k).sum();
    let max_attempts = needed as u64 * 20 + 1000;

    let mut seen: HashSet<String> = HashSet::new();
    let mut splits: BTreeMap<Split, Vec<Example>> = BTreeMap::new();
    let mut verifier = PosdAccumulator::new(spec.paradigm);
    let mut accepted = 0usize;
    let mut train_quads = 0usize;
    let mut next = 0u64;
    let insufficient = |accepted: usize, attempts: u64, reason: String| DatasetError::InsufficientLexicon {
        paradigm: spec.paradigm,
        needed,
        accepted,
        attempts,
        reason,
    };

    while accepted < needed {
        if next >= max_attempts {
            return Err(insufficient(accepted, next, "too many duplicate sentences".into()));
        }
        let end = (next + CHUNK).min(max_attempts);
        let batch: Vec<Result<Quad, ParadigmError>> = (next..end)
            .into_par_iter()
            .map(|q| {
                let mut rng = quad_rng(spec.master_seed, spec.paradigm, q);
                build_quad_with(paradigm, templates, lex, q, spec.augment_controls, &mut rng)
            })
            .collect();
        next = end;
        for quad in batch {
            let quad = match quad {
                Ok(q) => q,
                Err(ParadigmError::Generation { source: e @ GrammarError::NoCandidate { .. }, quad_id, .. }) => {
                    return Err(insufficient(accepted, quad_id + 1, e.to_string()))
                }
                Err(e) => return Err(e.into()),
            };
            let split = if accepted < plan[0].1 {
                Split::Train
            } else if accepted < plan[0].1 + plan[1].1 {
                Split::Dev
            } else {
                Split::Test
            };
            let use_control = split == Split::Train && spec.augment_controls && train_quads % 4 == 3;
            let members = contributed(&quad, split, use_control);
            let texts: Vec<String> = members.iter().map(|m| m.text()).collect();
            let fresh: HashSet<&String> = texts.iter().collect();
            if fresh.len() != texts.len() || texts.iter().any(|t| seen.contains(t)) {
                continue;
            }
            seen.extend(texts);
            let examples = members
                .into_iter()
                .map(|m| Example::new(m, spec.paradigm, split, quad.quad_id))
                .collect::<Result<Vec<_>, _>>()?;
            splits.entry(split).or_default().extend(examples);
            let mut checked = quad.clone();
            if !use_control {
                checked.control = None;
            }
            verifier.add(&checked);
            accepted += 1;
            if split == Split::Train {
                train_quads += 1;
            }
            if accepted == needed {
                break;
            }
        }
    }
    for s in Split::ALL {
        splits.entry(s).or_default();
    }
    Ok(Dataset { spec: spec.clone(), splits, report: verifier.finish() })
}

/// The three record collections, in train, dev, test order.
pub fn build_splits(
    spec: &DatasetSpec,
    lex: &Lexicon,
    templates: &TemplateSet,
) -> Result<[Vec<SplitRecord>; 3], DatasetError> {
    let d = build_dataset(spec, lex, templates)?;
    Ok(Split::ALL.map(|s| d.records(s)))
}

// ---------------------------------------------------------------------------
// files

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    kind: String,
    format: String,
    version: u32,
    fields: Vec<String>,
}

impl Header {
    fn current() -> Self {
        Header {
            kind: "schema".into(),
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            fields: ["text", "label", "label_linear", "paradigm", "split", "template_kind", "quad_id", "cell"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Serialized split file: header line, then one record per line.
pub fn encode(records: &[SplitRecord]) -> String {
    let mut out = serde_json::to_string(&Header::current()).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn decode<R: BufRead>(source: R, path: &str) -> Result<Vec<SplitRecord>, DatasetError> {
    let malformed = |line: usize, message: String| DatasetError::Malformed { path: path.to_string(), line, message };
    let mut lines = source.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, Ok(l))) => serde_json::from_str(&l).map_err(|e| malformed(1, format!("bad header: {e}")))?,
        Some((_, Err(e))) => return Err(malformed(1, e.to_string())),
        None => return Err(malformed(1, "missing header line".into())),
    };
    if header != Header::current() {
        return Err(malformed(1, format!("unsupported header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| malformed(i + 1, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644)).map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| DatasetError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

pub fn emit(records: &[SplitRecord], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, encode(records).as_bytes())
}

pub fn load(path: &Path) -> Result<Vec<SplitRecord>, DatasetError> {
    let f = File::open(path).map_err(io_err(path))?;
    decode(BufReader::new(f), &path.display().to_string())
}

pub fn split_file_name(paradigm: ParadigmId, split: Split) -> String {
    format!("{paradigm}.{split}.jsonl")
}

pub fn manifest_file_name(paradigm: ParadigmId) -> String {
    format!("{paradigm}.manifest.json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sidecar describing how a dataset was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub tool_version: String,
    /// File name to SHA-256 of its contents.
    pub digests: BTreeMap<String, String>,
    /// Digest over the file digests; the timestamp is not part of it.
    pub content_digest: String,
    pub generated_unix: u64,
}

impl Manifest {
    pub fn digest_of(digests: &BTreeMap<String, String>) -> String {
        let joined: String = digests.iter().map(|(k, v)| format!("{k} {v}\n")).collect();
        sha256_hex(joined.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(DatasetError::Locked(dir.display().to_string())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Write the three split files and the manifest into `dir`.
pub fn emit_dataset(dataset: &Dataset, dir: &Path) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let _lock = DirLock::acquire(dir)?;
    let mut digests = BTreeMap::new();
    for split in Split::ALL {
        let name = split_file_name(dataset.spec.paradigm, split);
        let bytes = encode(&dataset.records(split));
        write_atomic(&dir.join(&name), bytes.as_bytes())?;
        digests.insert(name, sha256_hex(bytes.as_bytes()));
    }
    let generated_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        spec: dataset.spec.clone(),
        seed: dataset.spec.master_seed,
        tool_version: TOOL_VERSION.to_string(),
        content_digest: Manifest::digest_of(&digests),
        digests,
        generated_unix,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(manifest_file_name(dataset.spec.paradigm)), json.as_bytes())?;
    Ok(manifest)
}

/// Paradigms with a manifest in `dir`.
pub fn manifests_in(dir: &Path) -> Result<Vec<(PathBuf, Manifest)>, DatasetError> {
    let mut out = Vec::new();
    for id in ParadigmId::ALL {
        let p = dir.join(manifest_file_name(id));
        if p.exists() {
            out.push((p.clone(), Manifest::load(&p)?));
        }
    }
    Ok(out)
}

/// Re-hash the split files named in a manifest; returns the mismatching file names.
pub fn check_digests(dir: &Path, manifest: &Manifest) -> Result<Vec<String>, DatasetError> {
    let mut bad = Vec::new();
    for (name, digest) in &manifest.digests {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if &sha256_hex(&bytes) != digest {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(paradigm: ParadigmId, n: usize) -> Dataset {
        build_dataset(&DatasetSpec::new(paradigm, n, 7), &Lexicon::shipped(), &TemplateSet::shipped()).unwrap()
    }

    #[test]
    fn smallest_spec() {
        let d = small(ParadigmId::SauxInv, 4);
        let counts: Vec<usize> = Split::ALL.iter().map(|&s| d.examples(s).len()).collect();
        assert_eq!(counts, vec![4, 4, 4]);
        assert!(d.examples(Split::Train).iter().all(|e| e.record.template_kind == TemplateKind::Train));
        let dev_kinds: Vec<TemplateKind> = d.examples(Split::Dev).iter().map(|e| e.record.template_kind).collect();
        assert_eq!(dev_kinds, vec![TemplateKind::Train, TemplateKind::Train, TemplateKind::Test, TemplateKind::Test]);
        assert!(d.report.passed);
    }

    #[test]
    fn invalid_specs() {
        for n in [0, 2, 6] {
            let err = build_dataset(&DatasetSpec::new(ParadigmId::Npi, n, 1), &Lexicon::shipped(), &TemplateSet::shipped());
            assert!(matches!(err, Err(DatasetError::InvalidSpec(_))));
        }
    }

    #[test]
    fn round_trip_and_balance() {
        let d = small(ParadigmId::Tense, 40);
        for s in Split::ALL {
            let recs = d.records(s);
            let text = encode(&recs);
            assert_eq!(decode(text.as_bytes(), "mem").unwrap(), recs);
            assert_eq!(recs.iter().filter(|r| r.label).count() * 2, recs.len());
        }
        let empty = encode(&[]);
        assert_eq!(empty.lines().count(), 1);
        assert!(decode(empty.as_bytes(), "mem").unwrap().is_empty());
    }

    #[test]
    fn missing_field_reports_line() {
        let d = small(ParadigmId::Npi, 4);
        let mut text = encode(&d.records(Split::Dev));
        text = text.replacen("\"label\":true,", "", 1);
        match decode(text.as_bytes(), "f") {
            Err(DatasetError::Malformed { line, .. }) => assert!(line >= 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn controls_replace_every_fourth_training_quad() {
        let mut spec = DatasetSpec::new(ParadigmId::SauxInv, 32, 5);
        spec.augment_controls = true;
        let d = build_dataset(&spec, &Lexicon::shipped(), &TemplateSet::shipped()).unwrap();
        let train = d.examples(Split::Train);
        let a: Vec<&Example> = train.iter().filter(|e| e.record.cell == Cell::TrainA).collect();
        assert_eq!(a.len(), 16);
        for (i, e) in a.iter().enumerate() {
            let has_two_aux = e.record.text.split(' ').filter(|t| ["is", "are", "has", "have"].contains(&t.to_lowercase().as_str())).count();
            if i % 4 == 3 {
                assert!(e.record.label && e.record.label_linear);
                assert!(has_two_aux <= 1, "{}", e.record.text);
            }
        }
        assert!(d.report.passed);
    }
}
