//! Feature-annotated lexicon and the unification algebra over flat feature bundles.
//!
//! A lexicon file is UTF-8, one JSON object per line. The first non-blank
//! record must be the schema header (`"kind": "schema"`) declaring the
//! syntactic categories, the open (content-word) classes and every feature
//! with its allowed atomic values. Every other record is an entry:
//!
//! ```text
//! {"kind":"schema","categories":["Det","N"],"open_classes":["N"],"features":{"num":["sg","pl"]}}
//! {"id":"man","category":"N","forms":{"sg":"man","pl":"men"},"features":{"anim":"yes"}}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The seed lexicon shipped with the crate.
pub const SHIPPED_LEXICON: &str = include_str!("../data/lexicon.jsonl");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema violation in {}: {}", ids.join(", "), message)]
    Schema { ids: Vec<String>, message: String },
    #[error("no {category} entry unifies with {constraints}")]
    NoCandidate {
        category: String,
        constraints: FeatureBundle,
    },
}

/// Two bundles assign different atomic values to the same feature.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("feature {feature} clashes: {left} vs {right}")]
pub struct Clash {
    pub feature: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Error)]
pub enum UnifyError {
    #[error(transparent)]
    Clash(#[from] Clash),
    #[error(transparent)]
    Schema(#[from] LexiconError),
}

/// Map from feature name to atomic value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureBundle(BTreeMap<String, String>);

impl FeatureBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, feature: &str) -> Option<&str> {
        self.0.get(feature).map(String::as_str)
    }

    pub fn insert(&mut self, feature: impl Into<String>, value: impl Into<String>) -> Option<String> {
        self.0.insert(feature.into(), value.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Union of both bundles, failing on the first feature with conflicting values.
    pub fn unify(&self, other: &FeatureBundle) -> Result<FeatureBundle, Clash> {
        let mut out = self.clone();
        for (feature, value) in other.iter() {
            match out.0.get(feature) {
                Some(existing) if existing != value => {
                    return Err(Clash {
                        feature: feature.to_string(),
                        left: existing.clone(),
                        right: value.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    out.0.insert(feature.to_string(), value.to_string());
                }
            }
        }
        Ok(out)
    }

    pub fn unifies_with(&self, other: &FeatureBundle) -> bool {
        // smaller side drives the scan
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small
            .iter()
            .all(|(f, v)| large.get(f).is_none_or(|w| w == v))
    }

    /// Restriction of the bundle to the given features.
    pub fn project(&self, features: &[&str]) -> FeatureBundle {
        FeatureBundle(
            self.0
                .iter()
                .filter(|(k, _)| features.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for FeatureBundle {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        FeatureBundle(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

impl fmt::Display for FeatureBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// Declared categories and feature inventory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub categories: Vec<String>,
    /// Content-word categories; a content word is never sampled twice into one quad
    /// under different slot names.
    #[serde(default)]
    pub open_classes: Vec<String>,
    pub features: BTreeMap<String, BTreeSet<String>>,
}

impl Schema {
    pub fn check_bundle(&self, owner: &str, bundle: &FeatureBundle) -> Result<(), LexiconError> {
        for (feature, value) in bundle.iter() {
            match self.features.get(feature) {
                None => {
                    return Err(LexiconError::Schema {
                        ids: vec![owner.to_string()],
                        message: format!("undeclared feature {feature:?}"),
                    })
                }
                Some(values) if !values.contains(value) => {
                    return Err(LexiconError::Schema {
                        ids: vec![owner.to_string()],
                        message: format!("value {value:?} not allowed for feature {feature:?}"),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn has_feature(&self, feature: &str) -> bool {
        self.features.contains_key(feature)
    }

    pub fn is_open_class(&self, category: &str) -> bool {
        self.open_classes.iter().any(|c| c == category)
    }

    /// Unification with both operands validated against the schema first.
    pub fn unify(&self, a: &FeatureBundle, b: &FeatureBundle) -> Result<FeatureBundle, UnifyError> {
        self.check_bundle("left operand", a)?;
        self.check_bundle("right operand", b)?;
        Ok(a.unify(b)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalEntry {
    pub id: String,
    pub category: String,
    pub forms: BTreeMap<String, String>,
    #[serde(default)]
    pub features: FeatureBundle,
}

impl LexicalEntry {
    pub fn form(&self, key: &str) -> Option<&str> {
        self.forms.get(key).map(String::as_str)
    }

    fn check_shape(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.forms.is_empty() {
            return Err("no surface forms".into());
        }
        if self.forms.values().any(|f| f.trim().is_empty() || f.contains(char::is_whitespace)) {
            return Err("surface forms must be single nonempty tokens".into());
        }
        match self.category.as_str() {
            "V" => {
                let past = self.forms.contains_key("past");
                let pres = self.forms.keys().any(|k| k.starts_with("pres"));
                if !(past && pres) {
                    return Err("verbs need both a past and a present form".into());
                }
            }
            "Refl" => {
                for f in ["pers", "num", "gen"] {
                    if self.features.get(f).is_none() {
                        return Err(format!("reflexive lacks feature {f:?}"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Validated, immutable collection of entries.
#[derive(Debug, Clone)]
pub struct Lexicon {
    schema: Schema,
    entries: Vec<Arc<LexicalEntry>>,
    by_category: BTreeMap<String, Vec<usize>>,
}

#[derive(Deserialize)]
struct SchemaRecord {
    kind: String,
    #[serde(flatten)]
    schema: Schema,
}

impl Lexicon {
    pub fn new(schema: Schema, entries: Vec<LexicalEntry>) -> Result<Self, LexiconError> {
        let mut seen = BTreeSet::new();
        let mut bad = Vec::new();
        let mut reasons = Vec::new();
        for e in &entries {
            let problem = if !seen.insert(e.id.clone()) {
                Some("duplicate id".to_string())
            } else if !schema.categories.contains(&e.category) {
                Some(format!("undeclared category {:?}", e.category))
            } else if let Err(err) = schema.check_bundle(&e.id, &e.features) {
                Some(match err {
                    LexiconError::Schema { message, .. } => message,
                    other => other.to_string(),
                })
            } else {
                e.check_shape().err()
            };
            if let Some(p) = problem {
                bad.push(e.id.clone());
                reasons.push(format!("{}: {p}", e.id));
            }
        }
        if !bad.is_empty() {
            return Err(LexiconError::Schema { ids: bad, message: reasons.join("; ") });
        }
        let mut by_category: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_category.entry(e.category.clone()).or_default().push(i);
        }
        Ok(Lexicon {
            schema,
            entries: entries.into_iter().map(Arc::new).collect(),
            by_category,
        })
    }

    /// Parse a line-delimited lexicon stream.
    pub fn load<R: BufRead>(source: R) -> Result<Self, LexiconError> {
        let mut schema: Option<Schema> = None;
        let mut entries = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| LexiconError::Parse { line: lineno, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)
                .map_err(|e| LexiconError::Parse { line: lineno, message: e.to_string() })?;
            let kind = value.get("kind").and_then(|k| k.as_str());
            match (kind, &schema) {
                (Some("schema"), None) => {
                    let rec: SchemaRecord = serde_json::from_value(value)
                        .map_err(|e| LexiconError::Parse { line: lineno, message: e.to_string() })?;
                    debug_assert_eq!(rec.kind, "schema");
                    schema = Some(rec.schema);
                }
                (Some("schema"), Some(_)) => {
                    return Err(LexiconError::Parse { line: lineno, message: "second schema record".into() })
                }
                (_, None) => {
                    return Err(LexiconError::Parse {
                        line: lineno,
                        message: "entry before schema header".into(),
                    })
                }
                (Some(other), Some(_)) if other != "entry" => {
                    return Err(LexiconError::Parse {
                        line: lineno,
                        message: format!("unknown record kind {other:?}"),
                    })
                }
                (_, Some(_)) => {
                    let entry: LexicalEntry = serde_json::from_value(value)
                        .map_err(|e| LexiconError::Parse { line: lineno, message: e.to_string() })?;
                    entries.push(entry);
                }
            }
        }
        let schema = schema.ok_or(LexiconError::Parse { line: 0, message: "missing schema header".into() })?;
        Lexicon::new(schema, entries)
    }

    pub fn shipped() -> Self {
        Lexicon::load(SHIPPED_LEXICON.as_bytes()).expect("shipped lexicon is valid")
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Arc<LexicalEntry>> {
        self.entries.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Arc<LexicalEntry>> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.by_category.keys().map(String::as_str)
    }

    /// Sub-lexicon keeping only the listed ids (schema unchanged).
    pub fn restrict<S: AsRef<str>>(&self, ids: &[S]) -> Lexicon {
        let keep: BTreeSet<&str> = ids.iter().map(AsRef::as_ref).collect();
        let entries = self
            .entries
            .iter()
            .filter(|e| keep.contains(e.id.as_str()))
            .map(|e| (**e).clone())
            .collect();
        Lexicon::new(self.schema.clone(), entries).expect("subset of a valid lexicon is valid")
    }

    /// Entries of `category` whose features unify with `constraints`, in file order.
    pub fn candidates<'a>(
        &'a self,
        category: &'a str,
        constraints: &'a FeatureBundle,
    ) -> impl Iterator<Item = &'a Arc<LexicalEntry>> + 'a {
        self.by_category
            .get(category)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
            .filter(move |e| e.features.unifies_with(constraints))
    }

    /// Uniform draw among eligible entries; `exclude` lists ids that may not be chosen.
    pub fn sample_excluding<R: Rng + ?Sized>(
        &self,
        category: &str,
        constraints: &FeatureBundle,
        exclude: &BTreeSet<String>,
        rng: &mut R,
    ) -> Result<Arc<LexicalEntry>, LexiconError> {
        self.schema.check_bundle(&format!("{category} constraints"), constraints)?;
        let eligible: Vec<&Arc<LexicalEntry>> = self
            .candidates(category, constraints)
            .filter(|e| !exclude.contains(&e.id))
            .collect();
        eligible
            .choose(rng)
            .map(|e| Arc::clone(e))
            .ok_or_else(|| LexiconError::NoCandidate {
                category: category.to_string(),
                constraints: constraints.clone(),
            })
    }

    pub fn sample_entry<R: Rng + ?Sized>(
        &self,
        category: &str,
        constraints: &FeatureBundle,
        rng: &mut R,
    ) -> Result<Arc<LexicalEntry>, LexiconError> {
        self.sample_excluding(category, constraints, &BTreeSet::new(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fb(pairs: &[(&str, &str)]) -> FeatureBundle {
        pairs.iter().copied().collect()
    }

    #[test]
    fn unify_examples() {
        let sg = fb(&[("num", "sg")]);
        assert_eq!(sg.unify(&fb(&[("pers", "3")])).unwrap(), fb(&[("num", "sg"), ("pers", "3")]));
        assert_eq!(sg.unify(&FeatureBundle::new()).unwrap(), sg);
        let clash = sg.unify(&fb(&[("num", "pl")])).unwrap_err();
        assert_eq!(clash.feature, "num");
    }

    #[test]
    fn schema_unify_rejects_undeclared_feature() {
        let lex = Lexicon::shipped();
        let err = lex.schema().unify(&fb(&[("num", "sg")]), &fb(&[("color", "red")])).unwrap_err();
        assert!(matches!(err, UnifyError::Schema(_)));
    }

    #[test]
    fn shipped_lexicon_scale() {
        let lex = Lexicon::shipped();
        assert!(lex.len() >= 100, "{} entries", lex.len());
        assert!(lex.categories().count() >= 8);
        assert!(lex.schema().features.len() >= 12);
    }

    #[test]
    fn empty_entry_list_is_valid() {
        let src = r#"{"kind":"schema","categories":["N"],"features":{"num":["sg","pl"]}}"#;
        let lex = Lexicon::load(src.as_bytes()).unwrap();
        assert!(lex.is_empty());
    }

    #[test]
    fn unknown_feature_names_the_entry() {
        let src = concat!(
            r#"{"kind":"schema","categories":["N"],"features":{"num":["sg","pl"]}}"#,
            "\n",
            r#"{"id":"ball","category":"N","forms":{"sg":"ball"},"features":{"color":"red"}}"#
        );
        match Lexicon::load(src.as_bytes()).unwrap_err() {
            LexiconError::Schema { ids, .. } => assert_eq!(ids, vec!["ball".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let src = "{\"kind\":\"schema\",\"categories\":[],\"features\":{}}\n\n{not json";
        match Lexicon::load(src.as_bytes()).unwrap_err() {
            LexiconError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn entry_invariants() {
        let schema: Schema = serde_json::from_str(
            r#"{"categories":["V","Refl"],"features":{"num":["sg"],"pers":["3"],"gen":["masc"]}}"#,
        )
        .unwrap();
        let verb = LexicalEntry {
            id: "go".into(),
            category: "V".into(),
            forms: [("past".to_string(), "went".to_string())].into_iter().collect(),
            features: FeatureBundle::new(),
        };
        assert!(Lexicon::new(schema.clone(), vec![verb]).is_err());
        let refl = LexicalEntry {
            id: "himself".into(),
            category: "Refl".into(),
            forms: [("base".to_string(), "himself".to_string())].into_iter().collect(),
            features: fb(&[("num", "sg")]),
        };
        assert!(Lexicon::new(schema, vec![refl]).is_err());
    }

    #[test]
    fn sample_reflexives() {
        let lex = Lexicon::shipped();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let e = lex.sample_entry("Refl", &fb(&[("num", "sg"), ("gen", "masc")]), &mut rng).unwrap();
            assert_eq!(e.form("base"), Some("himself"));
            let e = lex.sample_entry("Refl", &fb(&[("num", "pl")]), &mut rng).unwrap();
            assert_eq!(e.form("base"), Some("themselves"));
        }
        let err = lex.sample_entry("Aux", &fb(&[("num", "sg"), ("color", "red")]), &mut rng).unwrap_err();
        assert!(matches!(err, LexiconError::Schema { .. }));
        let err = lex.sample_entry("Refl", &fb(&[("num", "pl"), ("anim", "yes"), ("pers", "1")]), &mut rng);
        assert!(matches!(err, Err(LexiconError::NoCandidate { .. })));
    }

    #[test]
    fn restrict_keeps_only_listed_ids() {
        let lex = Lexicon::shipped().restrict(&["man", "cat", "the"]);
        assert_eq!(lex.len(), 3);
    }

    fn bundle_strategy() -> impl Strategy<Value = FeatureBundle> {
        let feats = prop::sample::subsequence(vec!["num", "pers", "gen", "anim"], 0..=4);
        (feats, prop::collection::vec(0usize..2, 4)).prop_map(|(fs, picks)| {
            let values = [("num", ["sg", "pl"]), ("pers", ["1", "3"]), ("gen", ["masc", "fem"]), ("anim", ["yes", "no"])];
            fs.into_iter()
                .zip(picks)
                .map(|(f, p)| {
                    let vals = values.iter().find(|(n, _)| *n == f).unwrap().1;
                    (f, vals[p])
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn unify_commutative_idempotent(a in bundle_strategy(), b in bundle_strategy()) {
            prop_assert_eq!(a.unify(&a).unwrap(), a.clone());
            let ab = a.unify(&b).ok();
            let ba = b.unify(&a).ok();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(ab.is_some(), a.unifies_with(&b));
        }

        #[test]
        fn unify_associative(a in bundle_strategy(), b in bundle_strategy(), c in bundle_strategy()) {
            if let (Ok(ab), Ok(bc), Ok(_)) = (a.unify(&b), b.unify(&c), a.unify(&c)) {
                prop_assert_eq!(ab.unify(&c).ok(), a.unify(&bc).ok());
            }
        }

        #[test]
        fn sampling_is_deterministic_and_satisfies_constraints(seed in any::<u64>(), c in bundle_strategy()) {
            let lex = Lexicon::shipped();
            let c = c.project(&["num", "gen", "anim"]);
            let a = lex.sample_entry("N", &c, &mut ChaCha8Rng::seed_from_u64(seed));
            let b = lex.sample_entry("N", &c, &mut ChaCha8Rng::seed_from_u64(seed));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(&a.id, &b.id);
                    prop_assert!(a.features.unify(&c).is_ok());
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "nondeterministic sampling"),
            }
        }
    }
}
