//! Predictors, minimal-pair metrics and restart runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{Featurizer, DIM};
use super::model::{LogisticModel, Sample, TrainConfig, TrainLog};
use super::stats::median;
use super::LearnerError;
use crate::datasets::{Dataset, Example, Split};
use crate::paradigms::{ParadigmId, TemplateKind};

/// Anything that labels an example.
pub trait Predictor: Sync {
    fn predict(&self, ex: &Example) -> bool;
}

/// Always answers with the hierarchical label.
pub struct OracleStructural;

impl Predictor for OracleStructural {
    fn predict(&self, ex: &Example) -> bool {
        ex.record.label
    }
}

/// Always answers with the linear label.
pub struct OracleLinear;

impl Predictor for OracleLinear {
    fn predict(&self, ex: &Example) -> bool {
        ex.record.label_linear
    }
}

/// Coin flip per record, fixed by the seed and the record's identity.
pub struct RandomPredictor {
    pub seed: u64,
}

impl Predictor for RandomPredictor {
    fn predict(&self, ex: &Example) -> bool {
        let r = &ex.record;
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(r.paradigm.as_str());
        h.update(r.split.as_str());
        h.update(r.quad_id.to_le_bytes());
        h.update(r.cell.as_str());
        ChaCha8Rng::from_seed(h.finalize().into()).gen_bool(0.5)
    }
}

/// A trained model with the featurizer it was trained on.
pub struct ModelPredictor {
    pub model: LogisticModel<f64>,
    pub featurizer: Featurizer,
}

impl Predictor for ModelPredictor {
    fn predict(&self, ex: &Example) -> bool {
        self.model.predict(&self.featurizer.featurize(ex))
    }
}

/// A trained model as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub paradigm: ParadigmId,
    pub featurizer: Featurizer,
    pub model: LogisticModel<f64>,
}

/// Accuracy over one template kind within a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindEval {
    pub items: usize,
    pub item_accuracy: f64,
    pub pairs: usize,
    pub pair_accuracy: f64,
}

/// How test-template pairs were classified relative to the two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub pairs: usize,
    pub structural: f64,
    pub linear: f64,
    pub other: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub split: Split,
    pub items: usize,
    pub item_accuracy: f64,
    pub pairs: usize,
    pub pair_accuracy: f64,
    pub by_kind: BTreeMap<TemplateKind, KindEval>,
    pub diagnosis: Option<Diagnosis>,
}

impl SplitEval {
    pub fn pair_accuracy_for(&self, kind: TemplateKind) -> Option<f64> {
        self.by_kind.get(&kind).map(|k| k.pair_accuracy)
    }
}

/// Metrics of one predictor on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub paradigm: ParadigmId,
    pub featurizer: Featurizer,
    pub seed: u64,
    pub splits: Vec<SplitEval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_log: Option<TrainLog>,
}

impl EvalResult {
    pub fn split(&self, split: Split) -> Option<&SplitEval> {
        self.splits.iter().find(|s| s.split == split)
    }

    /// Test-template pair accuracy on the test split.
    pub fn test_pair_accuracy(&self) -> Option<f64> {
        self.split(Split::Test)?.pair_accuracy_for(TemplateKind::Test)
    }

    /// Training-template pair accuracy on held-out (test split) pairs.
    pub fn heldout_pair_accuracy(&self) -> Option<f64> {
        self.split(Split::Test)?.pair_accuracy_for(TemplateKind::Train)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Item and pair metrics for one split. A pair is correct iff both members are.
pub fn evaluate_split(predictor: &dyn Predictor, split: Split, examples: &[Example]) -> Result<SplitEval, LearnerError> {
    let preds: Vec<bool> = examples.par_iter().map(|e| predictor.predict(e)).collect();
    let mut pairs: BTreeMap<(u64, TemplateKind), Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        pairs.entry((e.record.quad_id, e.record.template_kind)).or_default().push(i);
    }
    let correct = |i: usize| preds[i] == examples[i].record.label;

    #[derive(Default)]
    struct Tally {
        items: usize,
        items_ok: usize,
        pairs: usize,
        pairs_ok: usize,
    }
    let mut tallies: BTreeMap<TemplateKind, Tally> = BTreeMap::new();
    let (mut d_struct, mut d_lin, mut d_other) = (0usize, 0usize, 0usize);
    for ((quad_id, kind), members) in &pairs {
        if members.len() != 2 || examples[members[0]].record.cell == examples[members[1]].record.cell {
            let r = &examples[members[0]].record;
            return Err(LearnerError::Unpaired { split, quad_id: *quad_id, cell: r.cell });
        }
        let t = tallies.entry(*kind).or_default();
        t.items += 2;
        t.items_ok += members.iter().filter(|&&i| correct(i)).count();
        t.pairs += 1;
        if members.iter().all(|&i| correct(i)) {
            t.pairs_ok += 1;
        }
        if *kind == TemplateKind::Test {
            if members.iter().all(|&i| preds[i] == examples[i].record.label) {
                d_struct += 1;
            } else if members.iter().all(|&i| preds[i] == examples[i].record.label_linear) {
                d_lin += 1;
            } else {
                d_other += 1;
            }
        }
    }
    let items: usize = tallies.values().map(|t| t.items).sum();
    let items_ok: usize = tallies.values().map(|t| t.items_ok).sum();
    let n_pairs: usize = tallies.values().map(|t| t.pairs).sum();
    let pairs_ok: usize = tallies.values().map(|t| t.pairs_ok).sum();
    let test_pairs = d_struct + d_lin + d_other;
    Ok(SplitEval {
        split,
        items,
        item_accuracy: ratio(items_ok, items),
        pairs: n_pairs,
        pair_accuracy: ratio(pairs_ok, n_pairs),
        by_kind: tallies
            .into_iter()
            .map(|(k, t)| {
                (
                    k,
                    KindEval {
                        items: t.items,
                        item_accuracy: ratio(t.items_ok, t.items),
                        pairs: t.pairs,
                        pair_accuracy: ratio(t.pairs_ok, t.pairs),
                    },
                )
            })
            .collect(),
        diagnosis: (test_pairs > 0).then(|| Diagnosis {
            pairs: test_pairs,
            structural: ratio(d_struct, test_pairs),
            linear: ratio(d_lin, test_pairs),
            other: ratio(d_other, test_pairs),
        }),
    })
}

pub fn evaluate(
    predictor: &dyn Predictor,
    dataset: &Dataset,
    featurizer: Featurizer,
    seed: u64,
) -> Result<EvalResult, LearnerError> {
    let splits = Split::ALL
        .iter()
        .map(|&s| evaluate_split(predictor, s, dataset.examples(s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalResult { paradigm: dataset.spec.paradigm, featurizer, seed, splits, train_log: None })
}

pub fn samples(examples: &[Example], featurizer: Featurizer) -> Vec<Sample<f64>> {
    examples.par_iter().map(|e| (featurizer.featurize(e), e.record.label)).collect()
}

/// Fit on the train split, early-stopping on dev training-template records.
pub fn train_model(
    dataset: &Dataset,
    featurizer: Featurizer,
    config: TrainConfig,
) -> Result<(LogisticModel<f64>, TrainLog), LearnerError> {
    if !featurizer.is_trainable() {
        return Err(LearnerError::InvalidConfig(format!("{featurizer} is a fixed predictor")));
    }
    let train = samples(dataset.examples(Split::Train), featurizer);
    let dev_train: Vec<Example> = dataset
        .examples(Split::Dev)
        .iter()
        .filter(|e| e.record.template_kind == TemplateKind::Train)
        .cloned()
        .collect();
    let dev = samples(&dev_train, featurizer);
    LogisticModel::train(DIM, config, &train, Some(&dev))
}

/// Train (when applicable) and evaluate one run.
pub fn run_once(dataset: &Dataset, featurizer: Featurizer, config: TrainConfig) -> Result<EvalResult, LearnerError> {
    match featurizer {
        Featurizer::OracleStructural => evaluate(&OracleStructural, dataset, featurizer, config.seed),
        Featurizer::OracleLinear => evaluate(&OracleLinear, dataset, featurizer, config.seed),
        Featurizer::Random => evaluate(&RandomPredictor { seed: config.seed }, dataset, featurizer, config.seed),
        _ => {
            let (model, log) = train_model(dataset, featurizer, config)?;
            let mut r = evaluate(&ModelPredictor { model, featurizer }, dataset, featurizer, config.seed)?;
            r.train_log = Some(log);
            Ok(r)
        }
    }
}

/// `n` runs with seeds `config.seed + i`.
pub fn run_restarts(
    dataset: &Dataset,
    featurizer: Featurizer,
    config: TrainConfig,
    n: usize,
) -> Result<Vec<EvalResult>, LearnerError> {
    if n == 0 {
        return Err(LearnerError::InvalidConfig("at least one restart is required".into()));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| run_once(dataset, featurizer, TrainConfig { seed: config.seed.wrapping_add(i), ..config }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(Summary {
            runs: xs.len(),
            median: median(xs)?,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Restart results with summaries of the two headline metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub paradigm: ParadigmId,
    pub featurizer: Featurizer,
    pub test_pair_accuracy: Summary,
    pub heldout_pair_accuracy: Summary,
    pub results: Vec<EvalResult>,
}

impl RestartReport {
    pub fn new(results: Vec<EvalResult>) -> Option<Self> {
        let first = results.first()?;
        let test: Vec<f64> = results.iter().filter_map(EvalResult::test_pair_accuracy).collect();
        let held: Vec<f64> = results.iter().filter_map(EvalResult::heldout_pair_accuracy).collect();
        Some(RestartReport {
            paradigm: first.paradigm,
            featurizer: first.featurizer,
            test_pair_accuracy: Summary::of(&test)?,
            heldout_pair_accuracy: Summary::of(&held)?,
            results,
        })
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Plain-text table with one row per split and a diagnosis line.
pub fn render_result(r: &EvalResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} / {} / seed {}", r.paradigm, r.featurizer, r.seed);
    let _ = writeln!(out, "{:<6} {:>7} {:>8} {:>12} {:>12}", "split", "items", "item%", "train-pair%", "test-pair%");
    for s in &r.splits {
        let cell = |k| s.pair_accuracy_for(k).map(pct).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<6} {:>7} {:>8} {:>12} {:>12}",
            s.split.as_str(),
            s.items,
            pct(s.item_accuracy),
            cell(TemplateKind::Train),
            cell(TemplateKind::Test)
        );
    }
    if let Some(d) = r.split(Split::Test).and_then(|s| s.diagnosis.as_ref()) {
        let _ = writeln!(
            out,
            "diagnosis over {} test pairs: structural {}%, linear {}%, other {}%",
            d.pairs,
            pct(d.structural),
            pct(d.linear),
            pct(d.other)
        );
    }
    out
}

/// Paradigm by featurizer table over many results: per-run points and a summary.
pub fn render_table(results: &[EvalResult]) -> String {
    let mut groups: BTreeMap<(ParadigmId, Featurizer), Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.paradigm, r.featurizer)).or_default().push(r);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<18} {:>4} {:>9} {:>9} {:>9} {:>10} {:>7} {:>7} {:>7}",
        "paradigm", "featurizer", "runs", "test-med", "test-min", "test-max", "heldout", "struct", "linear", "other"
    );
    for ((p, f), rs) in &groups {
        let test: Vec<f64> = rs.iter().filter_map(|r| r.test_pair_accuracy()).collect();
        let held: Vec<f64> = rs.iter().filter_map(|r| r.heldout_pair_accuracy()).collect();
        let diag: Vec<&Diagnosis> = rs.iter().filter_map(|r| r.split(Split::Test)?.diagnosis.as_ref()).collect();
        let mean = |g: fn(&Diagnosis) -> f64| {
            if diag.is_empty() {
                "-".to_string()
            } else {
                pct(diag.iter().map(|d| g(d)).sum::<f64>() / diag.len() as f64)
            }
        };
        let t = Summary::of(&test);
        let fmt = |x: Option<f64>| x.map(pct).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:<18} {:>4} {:>9} {:>9} {:>9} {:>10} {:>7} {:>7} {:>7}",
            p.as_str(),
            f.as_str(),
            rs.len(),
            fmt(t.as_ref().map(|s| s.median)),
            fmt(t.as_ref().map(|s| s.min)),
            fmt(t.as_ref().map(|s| s.max)),
            fmt(median(&held)),
            mean(|d| d.structural),
            mean(|d| d.linear),
            mean(|d| d.other)
        );
        let points: Vec<String> = test.iter().map(|&x| pct(x)).collect();
        let _ = writeln!(out, "  test pair accuracy per run: {}", points.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{build_dataset, DatasetSpec};
    use crate::grammar::TemplateSet;
    use crate::lexicon::Lexicon;

    fn data(p: ParadigmId, n: usize) -> Dataset {
        build_dataset(&DatasetSpec::new(p, n, 11), &Lexicon::shipped(), &TemplateSet::shipped()).unwrap()
    }

    #[test]
    fn oracles_are_exact() {
        for p in ParadigmId::ALL {
            let d = data(p, 40);
            let s = evaluate(&OracleStructural, &d, Featurizer::OracleStructural, 0).unwrap();
            let l = evaluate(&OracleLinear, &d, Featurizer::OracleLinear, 0).unwrap();
            for split in &s.splits {
                assert_eq!(split.pair_accuracy, 1.0);
                assert_eq!(split.diagnosis.as_ref().map(|d| d.structural).unwrap_or(1.0), 1.0);
            }
            for split in &l.splits {
                assert_eq!(split.pair_accuracy_for(TemplateKind::Train), Some(1.0));
                if split.split != Split::Train {
                    assert_eq!(split.pair_accuracy_for(TemplateKind::Test), Some(0.0));
                    assert_eq!(split.diagnosis.as_ref().unwrap().linear, 1.0);
                }
            }
        }
    }

    #[test]
    fn unpaired_record_is_an_error() {
        let d = data(ParadigmId::Tense, 8);
        let mut ex = d.examples(Split::Dev).to_vec();
        ex.pop();
        assert!(matches!(evaluate_split(&OracleLinear, Split::Dev, &ex), Err(LearnerError::Unpaired { .. })));
    }

    #[test]
    fn pair_accuracy_bounded_by_item_accuracy() {
        let d = data(ParadigmId::Npi, 80);
        for seed in 0..5 {
            let r = evaluate(&RandomPredictor { seed }, &d, Featurizer::Random, seed).unwrap();
            for s in &r.splits {
                assert!(s.pair_accuracy <= s.item_accuracy);
                for k in s.by_kind.values() {
                    assert!(k.pair_accuracy <= k.item_accuracy);
                }
                if let Some(diag) = &s.diagnosis {
                    assert!((diag.structural + diag.linear + diag.other - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_restart_matches_run_once() {
        let d = data(ParadigmId::Tense, 40);
        let cfg = TrainConfig { epochs: 3, seed: 9, ..TrainConfig::default() };
        let a = run_restarts(&d, Featurizer::Surface, cfg, 1).unwrap();
        let b = run_once(&d, Featurizer::Surface, cfg).unwrap();
        assert_eq!(a, vec![b]);
        assert!(run_restarts(&d, Featurizer::Surface, cfg, 0).is_err());
    }

    #[test]
    fn table_renders() {
        let d = data(ParadigmId::Reflexive, 40);
        let rs = run_restarts(&d, Featurizer::Random, TrainConfig::default(), 3).unwrap();
        let t = render_table(&rs);
        assert!(t.contains("reflexive"));
        assert!(render_result(&rs[0]).contains("diagnosis"));
        let report = RestartReport::new(rs).unwrap();
        assert_eq!(report.test_pair_accuracy.runs, 3);
    }
}
