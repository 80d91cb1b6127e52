//! Sparse hashed feature vectors and the featurizers.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;

use fnv::FnvHasher;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::datasets::Example;
use crate::paradigms::{linear_with, structural_with, Locate, ParadigmError, ParadigmId};
use crate::tree::Sentence;

/// Number of hash buckets.
pub const DIM: usize = 1 << 20;

/// Key for the feature hash.
pub const HASH_SEED: u64 = 0x5eed_1e55_0b5e_55ed;

/// Map from feature index to value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SparseVector<T> {
    entries: BTreeMap<u32, T>,
}

impl<T> Default for SparseVector<T> {
    fn default() -> Self {
        SparseVector { entries: BTreeMap::new() }
    }
}

impl<T: Float> SparseVector<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `value` at `index`, summing with any existing value.
    pub fn add(&mut self, index: u32, value: T) {
        let slot = self.entries.entry(index).or_insert_with(T::zero);
        *slot = *slot + value;
    }

    pub fn get(&self, index: u32) -> T {
        self.entries.get(&index).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, T)> + '_ {
        self.entries.iter().map(|(&i, &v)| (i, v))
    }

    /// Dot product with a dense vector; indices past its end contribute nothing.
    pub fn dot(&self, dense: &[T]) -> T {
        self.iter()
            .filter_map(|(i, v)| dense.get(i as usize).map(|&w| w * v))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.keys().next_back().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(|v| v.is_finite())
    }
}

impl<T: Float> FromIterator<(u32, T)> for SparseVector<T> {
    fn from_iter<I: IntoIterator<Item = (u32, T)>>(iter: I) -> Self {
        let mut v = SparseVector::new();
        for (i, x) in iter {
            v.add(i, x);
        }
        v
    }
}

pub fn hash_feature(name: &str) -> u32 {
    let mut h = FnvHasher::with_key(HASH_SEED);
    h.write(name.as_bytes());
    (h.finish() as usize % DIM) as u32
}

/// Count-valued vector over hashed feature names.
pub fn hashed<T: Float, I: IntoIterator<Item = String>>(names: I) -> SparseVector<T> {
    names.into_iter().map(|n| (hash_feature(&n), T::one())).collect()
}

/// Unigrams, bigrams, (token, position) pairs and first/last markers.
pub fn surface_feature_names(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len() * 3 + 2);
    for (i, t) in tokens.iter().enumerate() {
        out.push(format!("uni:{t}"));
        out.push(format!("pos:{t}:{i}"));
    }
    for w in tokens.windows(2) {
        out.push(format!("bi:{}_{}", w[0], w[1]));
    }
    if let (Some(f), Some(l)) = (tokens.first(), tokens.last()) {
        out.push(format!("first:{f}"));
        out.push(format!("last:{l}"));
    }
    out
}

pub fn featurize_surface<T: Float>(tokens: &[String]) -> SparseVector<T> {
    hashed(surface_feature_names(tokens))
}

/// Split whitespace-joined text back into tokens.
pub fn tokens_of(text: &str) -> Vec<String> {
    text.split(' ').filter(|t| !t.is_empty()).map(String::from).collect()
}

/// Tree relations relevant to one paradigm, each computed from constituency and order alone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationIndicators {
    pub binder_c_commands_reflexive: Option<bool>,
    pub binder_precedes_reflexive: Option<bool>,
    pub neg_c_commands_npi: Option<bool>,
    pub neg_precedes_npi: Option<bool>,
    pub fronted_is_main: Option<bool>,
    pub fronted_is_last: Option<bool>,
    pub embedded_past: Option<bool>,
    pub first_verb_past: Option<bool>,
}

impl RelationIndicators {
    pub fn compute(paradigm: ParadigmId, sentence: &Sentence) -> Result<Self, ParadigmError> {
        let tree = sentence.tree.without_roles();
        let s = Some(structural_with(paradigm, &tree, Locate::Relations)?);
        let l = Some(linear_with(paradigm, &tree, Locate::Relations)?);
        let mut r = RelationIndicators::default();
        match paradigm {
            ParadigmId::SauxInv => (r.fronted_is_main, r.fronted_is_last) = (s, l),
            ParadigmId::Reflexive => (r.binder_c_commands_reflexive, r.binder_precedes_reflexive) = (s, l),
            ParadigmId::Npi => (r.neg_c_commands_npi, r.neg_precedes_npi) = (s, l),
            ParadigmId::Tense => (r.embedded_past, r.first_verb_past) = (s, l),
        }
        Ok(r)
    }

    pub fn hierarchical(&self) -> [(&'static str, Option<bool>); 4] {
        [
            ("binder-c-commands-reflexive", self.binder_c_commands_reflexive),
            ("neg-c-commands-npi", self.neg_c_commands_npi),
            ("fronted-is-main", self.fronted_is_main),
            ("embedded-past", self.embedded_past),
        ]
    }

    pub fn sequential(&self) -> [(&'static str, Option<bool>); 4] {
        [
            ("binder-precedes-reflexive", self.binder_precedes_reflexive),
            ("neg-precedes-npi", self.neg_precedes_npi),
            ("fronted-is-last", self.fronted_is_last),
            ("first-verb-past", self.first_verb_past),
        ]
    }
}

fn indicator_names(pairs: &[(&'static str, Option<bool>)]) -> Vec<String> {
    pairs
        .iter()
        .filter_map(|(n, v)| v.map(|b| format!("{n}:{}", b as u8)))
        .collect()
}

/// One-hot hierarchical relation indicators.
pub fn featurize_structural<T: Float>(ind: &RelationIndicators) -> SparseVector<T> {
    hashed(indicator_names(&ind.hierarchical()))
}

/// One-hot precedence indicators.
pub fn featurize_linear<T: Float>(ind: &RelationIndicators) -> SparseVector<T> {
    hashed(indicator_names(&ind.sequential()))
}

/// How a learner sees a record, or which fixed predictor replaces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Featurizer {
    Surface,
    Structural,
    Linear,
    OracleStructural,
    OracleLinear,
    Random,
}

impl Featurizer {
    pub const ALL: [Featurizer; 6] = [
        Featurizer::Surface,
        Featurizer::Structural,
        Featurizer::Linear,
        Featurizer::OracleStructural,
        Featurizer::OracleLinear,
        Featurizer::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Featurizer::Surface => "surface",
            Featurizer::Structural => "structural",
            Featurizer::Linear => "linear",
            Featurizer::OracleStructural => "oracle-structural",
            Featurizer::OracleLinear => "oracle-linear",
            Featurizer::Random => "random",
        }
    }

    /// Whether a model is fit, as opposed to a fixed predictor.
    pub fn is_trainable(self) -> bool {
        matches!(self, Featurizer::Surface | Featurizer::Structural | Featurizer::Linear)
    }

    /// Whether the featurizer reads trees rather than text.
    pub fn needs_trees(self) -> bool {
        matches!(self, Featurizer::Structural | Featurizer::Linear)
    }

    pub fn featurize<T: Float>(self, ex: &Example) -> SparseVector<T> {
        match self {
            Featurizer::Surface => featurize_surface(&tokens_of(&ex.record.text)),
            Featurizer::Structural => featurize_structural(&ex.indicators),
            Featurizer::Linear => featurize_linear(&ex.indicators),
            _ => SparseVector::new(),
        }
    }
}

impl fmt::Display for Featurizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Featurizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Featurizer::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown featurizer {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn toks(s: &str) -> Vec<String> {
        tokens_of(s)
    }

    #[test]
    fn surface_names_for_two_tokens() {
        let got: BTreeSet<String> = surface_feature_names(&toks("go .")).into_iter().collect();
        let want: BTreeSet<String> =
            ["uni:go", "uni:.", "bi:go_.", "pos:go:0", "pos:.:1", "first:go", "last:."].map(String::from).into();
        assert_eq!(got, want);
    }

    #[test]
    fn surface_is_deterministic() {
        let a: SparseVector<f64> = featurize_surface(&toks("The cat has gone ."));
        let b: SparseVector<f64> = featurize_surface(&toks("The cat has gone ."));
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert!(a.max_index().unwrap() < DIM as u32);
    }

    #[test]
    fn sparse_vector_accumulates() {
        let v: SparseVector<f64> = [(3, 1.0), (3, 2.0), (1, 0.5)].into_iter().collect();
        assert_eq!(v.len(), 2);
        assert_eq!(v.get(3), 3.0);
        assert_eq!(v.dot(&[0.0, 2.0, 0.0, 1.0]), 4.0);
        assert_eq!(v.dot(&[1.0]), 0.0);
    }

    #[test]
    fn featurizer_names() {
        for f in Featurizer::ALL {
            assert_eq!(f.as_str().parse::<Featurizer>().unwrap(), f);
        }
    }
}
