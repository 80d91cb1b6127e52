use std::collections::HashSet;
use std::fs;

use posd::datasets::{check_digests, emit_dataset, encode, load, manifest_file_name, split_file_name, Manifest};
use posd::paradigms::TemplateKind;
use posd::{build_dataset, DatasetError, DatasetSpec, Lexicon, ParadigmId, Split, TemplateSet};

fn build(spec: &DatasetSpec) -> posd::Dataset {
    build_dataset(spec, &Lexicon::shipped(), &TemplateSet::shipped()).unwrap()
}

fn bytes_with_threads(spec: &DatasetSpec, threads: usize) -> Vec<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let d = pool.install(|| build(spec));
    Split::ALL.iter().map(|&s| encode(&d.records(s))).collect()
}

#[test]
fn identical_across_thread_counts() {
    for p in ParadigmId::ALL {
        let spec = DatasetSpec::new(p, 400, 5);
        let one = bytes_with_threads(&spec, 1);
        assert_eq!(one, bytes_with_threads(&spec, 3));
        assert_eq!(one, bytes_with_threads(&spec, 8));
    }
}

#[test]
fn balanced_and_deduplicated() {
    for p in ParadigmId::ALL {
        let d = build(&DatasetSpec::new(p, 200, 3));
        let mut seen = HashSet::new();
        for s in Split::ALL {
            let ex = d.examples(s);
            assert_eq!(ex.len(), 200);
            assert_eq!(ex.iter().filter(|e| e.record.label).count(), 100, "{p} {s}");
            for e in ex {
                assert!(seen.insert(e.record.text.clone()), "duplicate {:?}", e.record.text);
            }
        }
        let dev_test = d.examples(Split::Test).iter().filter(|e| e.record.template_kind == TemplateKind::Test).count();
        assert_eq!(dev_test, 100);
    }
}

#[test]
fn emitted_files_match_manifest_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let d = build(&DatasetSpec::new(ParadigmId::Npi, 80, 21));
    let m = emit_dataset(&d, dir.path()).unwrap();
    assert_eq!(m.digests.len(), 3);
    assert!(check_digests(dir.path(), &m).unwrap().is_empty());
    assert_eq!(Manifest::load(&dir.path().join(manifest_file_name(ParadigmId::Npi))).unwrap().content_digest, m.content_digest);
    for s in Split::ALL {
        assert_eq!(load(&dir.path().join(split_file_name(ParadigmId::Npi, s))).unwrap(), d.records(s));
    }
    let again = emit_dataset(&d, dir.path()).unwrap();
    assert_eq!(again.content_digest, m.content_digest);
    assert!(!dir.path().join(posd::datasets::LOCK_FILE).exists());

    let victim = dir.path().join(split_file_name(ParadigmId::Npi, Split::Dev));
    let mut text = fs::read_to_string(&victim).unwrap();
    text = text.replacen("\"label\":true", "\"label\":false", 1);
    fs::write(&victim, text).unwrap();
    assert_eq!(check_digests(dir.path(), &m).unwrap(), vec![split_file_name(ParadigmId::Npi, Split::Dev)]);
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let _held = posd::datasets::DirLock::acquire(dir.path()).unwrap();
    let d = build(&DatasetSpec::new(ParadigmId::Tense, 4, 1));
    assert!(matches!(emit_dataset(&d, dir.path()), Err(DatasetError::Locked(_))));
}

#[test]
fn tiny_lexicon_is_insufficient() {
    let lex = Lexicon::shipped().restrict(&["the", "a", "critic", "aria", "lady", "who", "sing", "praise"]);
    let r = build_dataset(&DatasetSpec::new(ParadigmId::Tense, 400, 1), &lex, &TemplateSet::shipped());
    assert!(matches!(r, Err(DatasetError::InsufficientLexicon { .. })), "{r:?}");
}
