mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{reference_quad, words, REFERENCE_QUADS, REFERENCE_SEED};
use posd::datasets::encode;
use posd::learners::{
    evaluate, gradient_check, render_result, run_once, EvalResult, OracleLinear, OracleStructural, RandomPredictor,
    Sample, SparseVector, TrainConfig,
};
use posd::paradigms::TemplateKind;
use posd::{
    build_dataset, chance_alignment_probability, Dataset, DatasetSpec, Featurizer, Lexicon, LinearModel, ParadigmId,
    Split, TemplateSet,
};

const N: usize = 10_000;
const SEED: u64 = 42;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    let o = Outcome { name, passed, detail, elapsed: start.elapsed() };
    println!(
        "{} {:<28} {:>8.2}s  {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.name,
        o.elapsed.as_secs_f64(),
        o.detail
    );
    o
}

fn build(p: ParadigmId) -> Dataset {
    build_dataset(&DatasetSpec::new(p, N, SEED), &Lexicon::shipped(), &TemplateSet::shipped()).expect("generation")
}

fn encoded(d: &Dataset) -> Vec<String> {
    Split::ALL.iter().map(|&s| encode(&d.records(s))).collect()
}

fn pairs(r: &EvalResult, split: Split, kind: TemplateKind) -> Option<f64> {
    r.split(split)?.pair_accuracy_for(kind)
}

fn posd(datasets: &mut BTreeMap<ParadigmId, Dataset>) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in ParadigmId::ALL {
        let start = Instant::now();
        let d = build(p);
        let secs = start.elapsed().as_secs_f64();
        let pass = d.report.passed && d.report.quads == N && secs < 60.0;
        ok &= pass;
        parts.push(format!("{p} {} quads {:.1}s {}", d.report.quads, secs, if pass { "ok" } else { "bad" }));
        if !d.report.passed {
            eprintln!("{}", d.report);
        }
        datasets.insert(p, d);
    }
    (ok, parts.join(", "))
}

fn reference_quads() -> (bool, String) {
    let mut matched = 0;
    let mut linear_positive = 0;
    for row in &REFERENCE_QUADS {
        let quad = reference_quad(row);
        for ((m, want), positive) in quad.members.iter().zip(row.sentences).zip(row.linear_positive) {
            if words(&m.sentence.tokens) == want {
                matched += 1;
            } else {
                eprintln!("reference mismatch: {:?} vs {want:?}", m.text());
            }
            if m.label_linear == positive {
                linear_positive += 1;
            }
        }
    }
    (
        matched == 16 && linear_positive == 16,
        format!("seed {REFERENCE_SEED}: {matched}/16 sentences, {linear_positive}/16 linear labels"),
    )
}

fn oracles(datasets: &BTreeMap<ParadigmId, Dataset>) -> (bool, String) {
    let start = Instant::now();
    let mut ok = true;
    for (p, d) in datasets {
        let s = evaluate(&OracleStructural, d, Featurizer::OracleStructural, 0).unwrap();
        let l = evaluate(&OracleLinear, d, Featurizer::OracleLinear, 0).unwrap();
        for split in Split::ALL {
            let st = s.split(split).unwrap();
            let good = st.pair_accuracy == 1.0
                && pairs(&l, split, TemplateKind::Train) == Some(1.0)
                && (split == Split::Train || pairs(&l, split, TemplateKind::Test) == Some(0.0));
            if !good {
                eprintln!("oracle mismatch: {p} {split}");
            }
            ok &= good;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok && secs < 10.0,
        format!("structural 100% everywhere, linear 100%/0% on train/test templates: {ok}; {secs:.2}s"),
    )
}

fn chance(datasets: &BTreeMap<ParadigmId, Dataset>) -> (bool, String) {
    let (mut correct, mut total) = (0.0, 0usize);
    for d in datasets.values() {
        let r = evaluate(&RandomPredictor { seed: 7 }, d, Featurizer::Random, 7).unwrap();
        let k = &r.split(Split::Test).unwrap().by_kind[&TemplateKind::Test];
        correct += k.pair_accuracy * k.pairs as f64;
        total += k.pairs;
    }
    let acc = correct / total as f64;
    (
        total >= 5000 && (acc - 0.25).abs() <= 0.02,
        format!("{:.2}% over {total} test-template pairs", 100.0 * acc),
    )
}

fn probability() -> (bool, String) {
    let x = chance_alignment_probability(4, 3, 0.25f64).unwrap();
    let exact = chance_alignment_probability(4, 3, Ratio::new(1i64, 4)).unwrap();
    (
        x == 0.05078125 && exact == Ratio::new(13, 256),
        format!("float {x}, rational {exact}"),
    )
}

fn baselines(datasets: &BTreeMap<ParadigmId, Dataset>) -> (bool, String) {
    let config = TrainConfig { seed: 0, ..TrainConfig::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, d) in datasets {
        let s = run_once(d, Featurizer::Structural, config).unwrap();
        let structural_ok = s.splits.iter().all(|x| x.pair_accuracy == 1.0);
        let f = run_once(d, Featurizer::Surface, config).unwrap();
        let held = [Split::Dev, Split::Test].map(|sp| pairs(&f, sp, TemplateKind::Train).unwrap_or(0.0));
        let surface_ok = held.iter().all(|&a| a >= 0.99);
        let report = render_result(&f);
        let diagnosed = f.split(Split::Test).and_then(|x| x.diagnosis.as_ref()).is_some() && report.contains("diagnosis");
        print!("{}", report.lines().map(|l| format!("    {l}\n")).collect::<String>());
        ok &= structural_ok && surface_ok && diagnosed;
        parts.push(format!(
            "{p}: structural {}, surface held-out {:.1}%",
            if structural_ok { "100%" } else { "<100%" },
            100.0 * held[0].min(held[1])
        ));
    }
    (ok, parts.join("; "))
}

fn determinism(datasets: &BTreeMap<ParadigmId, Dataset>) -> (bool, String) {
    let mut ok = true;
    for (p, d) in datasets {
        let reference = encoded(d);
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let again = pool.install(|| build(*p));
            if encoded(&again) != reference {
                eprintln!("{p}: split bytes differ with {threads} threads");
                ok = false;
            }
        }
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let d = &datasets[&ParadigmId::SauxInv];
    let digests: Vec<String> =
        dirs.iter().map(|dir| posd::emit_dataset(d, dir.path()).unwrap().content_digest).collect();
    ok &= digests[0] == digests[1];
    (ok, "4 paradigms x {default, 1, 4} threads, two emissions".into())
}

fn random_instance(rng: &mut ChaCha8Rng) -> (LinearModel, Vec<Sample<f64>>) {
    let dim = rng.gen_range(1..16);
    let mut m = LinearModel::new(dim, TrainConfig::default());
    for i in 0..dim as u32 {
        m.set_weight(i, rng.gen_range(-3.0..3.0));
    }
    m.set_bias(rng.gen_range(-2.0..2.0));
    let data = (0..rng.gen_range(1..32))
        .map(|_| {
            let mut x = SparseVector::new();
            for i in 0..dim as u32 {
                if rng.gen_bool(0.5) {
                    x.add(i, rng.gen_range(-2.0..2.0));
                }
            }
            (x, rng.gen_bool(0.5))
        })
        .collect();
    (m, data)
}

fn gradients() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let worst = (0..100)
        .map(|_| {
            let (m, data) = random_instance(&mut rng);
            gradient_check(&m, &data, 1e-3)
        })
        .fold(0.0f64, f64::max);
    (worst <= 1e-6, format!("max relative error {worst:.2e} over 100 instances"))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut datasets = BTreeMap::new();
    let outcomes = [
        check("posd-verification", || posd(&mut datasets)),
        check("reference-quads", reference_quads),
        check("oracle-exactness", || oracles(&datasets)),
        check("chance-baseline", || chance(&datasets)),
        check("chance-alignment-probability", probability),
        check("baseline-learnability", || baselines(&datasets)),
        check("determinism", || determinism(&datasets)),
        check("gradient-check", gradients),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
