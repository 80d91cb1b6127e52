#![allow(dead_code)]

use posd::paradigms::{build_quad, quad_rng, Cell, ParadigmId, Quad};
use posd::{Lexicon, TemplateSet};

/// Master seed under which the reference quads are generated.
pub const REFERENCE_SEED: u64 = 1;

/// Quad index, vocabulary and the four sentences (cell order, final punctuation dropped).
pub struct ReferenceQuad {
    pub paradigm: ParadigmId,
    pub quad_id: u64,
    pub vocabulary: &'static [&'static str],
    pub sentences: [&'static str; 4],
    /// Cells positive under the linear hypothesis.
    pub linear_positive: [bool; 4],
}

pub const REFERENCE_QUADS: [ReferenceQuad; 4] = [
    ReferenceQuad {
        paradigm: ParadigmId::SauxInv,
        quad_id: 9,
        vocabulary: &["the", "man", "cat", "who", "be", "have", "go", "see"],
        sentences: [
            "Has the man who is going seen the cat",
            "Is the man who going has seen the cat",
            "Has the man seen the cat who is going",
            "Is the man has seen the cat who going",
        ],
        linear_positive: [true, false, false, true],
    },
    ReferenceQuad {
        paradigm: ParadigmId::Reflexive,
        quad_id: 7,
        vocabulary: &[
            "the", "boy", "lady", "that_rel", "love", "talk", "p_to", "himself", "themselves_masc", "themselves_fem",
            "themselves_neut",
        ],
        sentences: [
            "The boy that loves himself talks to ladies",
            "The boy that loves themselves talks to ladies",
            "The boy that loves ladies talks to himself",
            "The boy that loves ladies talks to themselves",
        ],
        linear_positive: [true, false, true, true],
    },
    ReferenceQuad {
        paradigm: ParadigmId::Npi,
        quad_id: 87,
        vocabulary: &["kid", "cat", "dog", "the", "any", "who", "wont", "see", "get"],
        sentences: [
            "Kids who saw the cats won't get any dogs",
            "Kids who saw any cats won't get the dogs",
            "Kids who won't see any cats get the dogs",
            "Kids who won't see the cats get any dogs",
        ],
        linear_positive: [true, false, true, true],
    },
    ReferenceQuad {
        paradigm: ParadigmId::Tense,
        quad_id: 8,
        vocabulary: &["the", "a", "critic", "aria", "lady", "who", "sing", "praise"],
        sentences: [
            "The critic who sang arias praised a lady",
            "The critic who sings arias praised a lady",
            "The critic praised a lady who sang arias",
            "The critic praised a lady who sings arias",
        ],
        linear_positive: [true, false, true, true],
    },
];

pub fn reference_quad(row: &ReferenceQuad) -> Quad {
    let templates = TemplateSet::shipped();
    let lex = Lexicon::shipped().restrict(row.vocabulary);
    let p = templates.paradigm(row.paradigm).unwrap();
    build_quad(p, &templates, &lex, row.quad_id, &mut quad_rng(REFERENCE_SEED, row.paradigm, row.quad_id)).unwrap()
}

/// Tokens without sentence-final punctuation.
pub fn words(tokens: &[String]) -> String {
    let end = if matches!(tokens.last().map(String::as_str), Some("." | "?")) { tokens.len() - 1 } else { tokens.len() };
    tokens[..end].join(" ")
}

pub fn cells() -> [Cell; 4] {
    Cell::ALL
}
