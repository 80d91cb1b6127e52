//! The four experimental paradigms: quad construction, dual labeling and design verification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grammar::{expand_in, Expansion, GrammarError, QuadEnv, TemplateSet};
use crate::lexicon::Lexicon;
use crate::oracles::{
    agreement_match, auxiliaries, c_commands, dominates, embedded_verb_tense, front_auxiliary, leaf_tense,
    precedes, FrontingStrategy, Tense,
};
use crate::tree::{linearize, DerivationTree, NodeId, Role, Sentence, TreeError};

/// Maximum token edit distance between the two members of a minimal pair.
pub const MAX_PAIR_EDIT: usize = 3;

/// Exemplar violations kept in a verification report.
pub const MAX_EXEMPLARS: usize = 20;

#[derive(Debug, Error)]
pub enum ParadigmError {
    #[error("{paradigm} quad {quad_id}: {source}")]
    Generation {
        paradigm: ParadigmId,
        quad_id: u64,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("paradigm {0} has no confound control template")]
    NoControl(ParadigmId),
    #[error("sentence was not formed by auxiliary fronting")]
    NotFronted,
    #[error("paradigm {id}: {message}")]
    Invalid { id: ParadigmId, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParadigmId {
    SauxInv,
    Reflexive,
    Npi,
    Tense,
}

impl ParadigmId {
    pub const ALL: [ParadigmId; 4] = [ParadigmId::SauxInv, ParadigmId::Reflexive, ParadigmId::Npi, ParadigmId::Tense];

    pub fn as_str(self) -> &'static str {
        match self {
            ParadigmId::SauxInv => "saux_inv",
            ParadigmId::Reflexive => "reflexive",
            ParadigmId::Npi => "npi",
            ParadigmId::Tense => "tense",
        }
    }

    pub fn task(self) -> Task {
        match self {
            ParadigmId::Tense => Task::TenseDetection,
            _ => Task::Acceptability,
        }
    }
}

impl fmt::Display for ParadigmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParadigmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParadigmId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown paradigm {s:?} (expected saux_inv, reflexive, npi or tense)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Acceptability,
    TenseDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Train,
    Test,
}

/// Position in a quad. `A` members are structurally positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    TrainA,
    TrainB,
    TestA,
    TestB,
}

impl Cell {
    pub const ALL: [Cell; 4] = [Cell::TrainA, Cell::TrainB, Cell::TestA, Cell::TestB];

    pub fn template_kind(self) -> TemplateKind {
        match self {
            Cell::TrainA | Cell::TrainB => TemplateKind::Train,
            Cell::TestA | Cell::TestB => TemplateKind::Test,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cell::TrainA => "train_a",
            Cell::TrainB => "train_b",
            Cell::TestA => "test_a",
            Cell::TestB => "test_b",
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSpec {
    pub cell: Cell,
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fronting: Option<FrontingStrategy>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub template: String,
    pub fronting: FrontingStrategy,
}

/// A paradigm definition as read from the template file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paradigm {
    pub id: ParadigmId,
    pub task: Task,
    pub cells: Vec<CellSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSpec>,
}

impl Paradigm {
    pub(crate) fn validate(&self, set: &TemplateSet) -> Result<(), GrammarError> {
        let invalid = |message: String| GrammarError::Invalid { template: self.id.to_string(), message };
        if self.task != self.id.task() {
            return Err(invalid(format!("task {:?} does not fit the paradigm", self.task)));
        }
        let cells: BTreeSet<Cell> = self.cells.iter().map(|c| c.cell).collect();
        if self.cells.len() != 4 || cells.len() != 4 {
            return Err(invalid("a paradigm needs exactly the four quad cells".into()));
        }
        for c in &self.cells {
            set.template(&c.template)?;
            if c.fronting.is_some() != (self.id == ParadigmId::SauxInv) {
                return Err(invalid(format!("cell {} has an unexpected fronting strategy", c.cell)));
            }
        }
        if let Some(ctl) = &self.control {
            set.template(&ctl.template)?;
        }
        Ok(())
    }

    pub fn cell(&self, cell: Cell) -> &CellSpec {
        self.cells.iter().find(|c| c.cell == cell).expect("validated paradigm has every cell")
    }
}

/// Labels under the two end-of-sentence NPI characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpiAlternatives {
    pub linear_end: bool,
    pub structural_main: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    pub label_structural: bool,
    pub label_linear: bool,
    pub label_alt: Option<NpiAlternatives>,
    pub template_kind: TemplateKind,
    pub cell: Cell,
    pub template: String,
}

impl LabeledSentence {
    pub fn text(&self) -> String {
        self.sentence.text()
    }
}

/// A training minimal pair and a test minimal pair over shared lexical content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quad {
    pub quad_id: u64,
    /// One member per cell, in cell order.
    pub members: Vec<LabeledSentence>,
    /// Ids of the content words shared across the quad.
    pub lexical_signature: BTreeSet<String>,
    /// Confound control that stands in for the `train_a` member when augmentation is on.
    pub control: Option<LabeledSentence>,
}

impl Quad {
    pub fn member(&self, cell: Cell) -> &LabeledSentence {
        self.members.iter().find(|m| m.cell == cell).expect("quad has every cell")
    }
}

/// Independent random stream for quad `quad_id` of a paradigm under `seed`.
pub fn quad_rng(seed: u64, paradigm: ParadigmId, quad_id: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(paradigm.as_str().as_bytes());
    h.update(quad_id.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn build_quad<R: Rng + ?Sized>(
    paradigm: &Paradigm,
    templates: &TemplateSet,
    lex: &Lexicon,
    quad_id: u64,
    rng: &mut R,
) -> Result<Quad, ParadigmError> {
    build_quad_with(paradigm, templates, lex, quad_id, false, rng)
}

/// Build a quad; with `control` set, also build a confound control from the same lexical choices.
/// The four members do not depend on `control`.
pub fn build_quad_with<R: Rng + ?Sized>(
    paradigm: &Paradigm,
    templates: &TemplateSet,
    lex: &Lexicon,
    quad_id: u64,
    control: bool,
    rng: &mut R,
) -> Result<Quad, ParadigmError> {
    let generation = |source: GrammarError| ParadigmError::Generation { paradigm: paradigm.id, quad_id, source };
    let mut env = QuadEnv::default();
    for c in &paradigm.cells {
        env.sample_missing(&templates.template(&c.template)?.params, rng).map_err(generation)?;
    }
    let mut expansions: BTreeMap<&str, Expansion> = BTreeMap::new();
    let mut members = Vec::with_capacity(4);
    for cell in Cell::ALL {
        let spec = paradigm.cell(cell);
        if !expansions.contains_key(spec.template.as_str()) {
            let t = templates.template(&spec.template)?;
            let e = expand_in(t, lex, &mut env, rng).map_err(generation)?;
            expansions.insert(&spec.template, e);
        }
        let tree = &expansions[spec.template.as_str()].tree;
        members.push(label(paradigm.id, cell, &spec.template, tree, spec.fronting)?);
    }
    let control = if control {
        let ctl = paradigm.control.as_ref().ok_or(ParadigmError::NoControl(paradigm.id))?;
        let t = templates.template(&ctl.template)?;
        env.sample_missing(&t.params, rng).map_err(generation)?;
        let e = expand_in(t, lex, &mut env, rng).map_err(generation)?;
        Some(label(paradigm.id, Cell::TrainA, &ctl.template, &e.tree, Some(ctl.fronting))?)
    } else {
        None
    };
    let lexical_signature = env
        .bound()
        .values()
        .filter(|e| lex.schema().is_open_class(&e.category))
        .map(|e| e.id.clone())
        .collect();
    Ok(Quad { quad_id, members, lexical_signature, control })
}

fn label(
    id: ParadigmId,
    cell: Cell,
    template: &str,
    tree: &DerivationTree,
    fronting: Option<FrontingStrategy>,
) -> Result<LabeledSentence, ParadigmError> {
    let sentence = match fronting {
        Some(s) => front_auxiliary(tree, s)?,
        None => linearize(tree)?,
    };
    Ok(LabeledSentence {
        label_structural: label_structural(id, &sentence)?,
        label_linear: label_linear(id, &sentence)?,
        label_alt: if id == ParadigmId::Npi { Some(label_npi_alternatives(&sentence)?) } else { None },
        template_kind: cell.template_kind(),
        cell,
        template: template.to_string(),
        sentence,
    })
}

/// How the labelers find the nodes they relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locate {
    /// Through the role tags assigned at expansion.
    Roles,
    /// From tree configuration and category labels alone.
    Relations,
}

fn find(tree: &DerivationTree, how: Locate, role: Role, label: &str) -> Result<Option<NodeId>, TreeError> {
    match how {
        Locate::Roles => tree.find_role(role),
        Locate::Relations => {
            let mut hits = tree.leaves().into_iter().filter(|&l| tree.node(l).map(|n| n.label == label).unwrap_or(false));
            let first = hits.next();
            if hits.next().is_some() {
                return Err(TreeError::DuplicateRole(role));
            }
            Ok(first)
        }
    }
}

fn require(tree: &DerivationTree, how: Locate, role: Role, label: &str) -> Result<NodeId, TreeError> {
    find(tree, how, role, label)?.ok_or(TreeError::MissingRole(role))
}

fn is_nominal(tree: &DerivationTree, id: NodeId) -> bool {
    tree.node(id).map(|n| matches!(n.label.as_str(), "NP" | "N" | "Rel")).unwrap_or(false)
}

fn leaf_with_label(tree: &DerivationTree, id: NodeId, labels: &[&str]) -> bool {
    tree.node(id).map(|n| n.is_leaf() && labels.contains(&n.label.as_str())).unwrap_or(false)
}

/// Label under the hierarchical hypothesis.
pub fn label_structural(id: ParadigmId, sentence: &Sentence) -> Result<bool, ParadigmError> {
    structural_with(id, &sentence.tree, Locate::Roles)
}

/// Label under the linear hypothesis.
pub fn label_linear(id: ParadigmId, sentence: &Sentence) -> Result<bool, ParadigmError> {
    linear_with(id, &sentence.tree, Locate::Roles)
}

/// Both labels recomputed with every role tag deleted.
pub fn labels_from_relations(id: ParadigmId, sentence: &Sentence) -> Result<(bool, bool), ParadigmError> {
    let bare = sentence.tree.without_roles();
    Ok((structural_with(id, &bare, Locate::Relations)?, linear_with(id, &bare, Locate::Relations)?))
}

pub fn structural_with(id: ParadigmId, tree: &DerivationTree, how: Locate) -> Result<bool, ParadigmError> {
    Ok(match id {
        ParadigmId::SauxInv => {
            let m = tree.movement().ok_or(ParadigmError::NotFronted)?;
            match how {
                Locate::Roles => tree.node(m.node)?.role == Some(Role::MainAux),
                Locate::Relations => m.from_parent == tree.root(),
            }
        }
        ParadigmId::Reflexive => {
            let refl = require(tree, how, Role::Reflexive, "Refl")?;
            let refl_node = tree.node(refl)?;
            let mut found = false;
            for n in tree.ids() {
                if n != refl && is_nominal(tree, n) && c_commands(tree, n, refl)? && agreement_match(tree.node(n)?, refl_node) {
                    found = true;
                    break;
                }
            }
            found
        }
        ParadigmId::Npi => match find(tree, how, Role::Npi, "NPI-Det")? {
            None => true,
            Some(npi) => match find(tree, how, Role::Negation, "Neg")? {
                Some(neg) => c_commands(tree, neg, npi)?,
                None => false,
            },
        },
        ParadigmId::Tense => match how {
            Locate::Roles => embedded_verb_tense(tree)? == Tense::Past,
            Locate::Relations => {
                let v = tree
                    .leaves()
                    .into_iter()
                    .find(|&l| {
                        leaf_with_label(tree, l, &["V"]) && tree.ancestors(l).any(|a| tree.node(a).map(|n| n.label == "RC").unwrap_or(false))
                    })
                    .ok_or(TreeError::MissingRole(Role::EmbeddedVerb))?;
                leaf_tense(tree.node(v)?) == Some(Tense::Past)
            }
        },
    })
}

pub fn linear_with(id: ParadigmId, tree: &DerivationTree, how: Locate) -> Result<bool, ParadigmError> {
    Ok(match id {
        ParadigmId::SauxInv => {
            let m = tree.movement().ok_or(ParadigmError::NotFronted)?;
            let declarative = tree.restore_declarative();
            auxiliaries(&declarative).last() == Some(&m.node)
        }
        ParadigmId::Reflexive => {
            let refl = require(tree, how, Role::Reflexive, "Refl")?;
            let refl_node = tree.node(refl)?;
            let mut found = false;
            for n in tree.leaves() {
                if leaf_with_label(tree, n, &["N"]) && precedes(tree, n, refl)? && agreement_match(tree.node(n)?, refl_node) {
                    found = true;
                    break;
                }
            }
            found
        }
        ParadigmId::Npi => match find(tree, how, Role::Npi, "NPI-Det")? {
            None => true,
            Some(npi) => match find(tree, how, Role::Negation, "Neg")? {
                Some(neg) => precedes(tree, neg, npi)?,
                None => false,
            },
        },
        ParadigmId::Tense => {
            let first = tree
                .leaves()
                .into_iter()
                .find(|&l| leaf_with_label(tree, l, &["V", "Aux"]))
                .ok_or(TreeError::MissingRole(Role::MainVerb))?;
            leaf_tense(tree.node(first)?) == Some(Tense::Past)
        }
    })
}

/// NPI near the end of the sentence versus NPI in the main clause.
pub fn label_npi_alternatives(sentence: &Sentence) -> Result<NpiAlternatives, ParadigmError> {
    let tree = &sentence.tree;
    let Some(npi) = tree.find_role(Role::Npi)? else {
        return Ok(NpiAlternatives { linear_end: false, structural_main: false });
    };
    let last_n = tree
        .leaves()
        .into_iter()
        .rev()
        .find(|&l| leaf_with_label(tree, l, &["N"]))
        .ok_or(TreeError::MissingRole(Role::Object))?;
    let linear_end = match tree.parent(last_n) {
        Some(phrase) => dominates(tree, phrase, npi)?,
        None => false,
    };
    let structural_main = !tree.ancestors(npi).any(|a| tree.node(a).map(|n| n.label == "RC").unwrap_or(false));
    Ok(NpiAlternatives { linear_end, structural_main })
}

/// Token-level edit distance between two sentences.
pub fn pair_edit_distance(a: &Sentence, b: &Sentence) -> usize {
    strsim::generic_levenshtein(&a.tokens, &b.tokens)
}

/// Standalone confound controls: acceptable training-template questions whose relative clause
/// has a finite lexical verb and no auxiliary.
pub fn build_confound_controls<R: Rng + ?Sized>(
    templates: &TemplateSet,
    lex: &Lexicon,
    rng: &mut R,
    n: usize,
) -> Result<Vec<LabeledSentence>, ParadigmError> {
    let paradigm = templates.paradigm(ParadigmId::SauxInv)?;
    let ctl = paradigm.control.as_ref().ok_or(ParadigmError::NoControl(paradigm.id))?;
    let t = templates.template(&ctl.template)?;
    (0..n as u64)
        .map(|i| {
            let generation = |source| ParadigmError::Generation { paradigm: paradigm.id, quad_id: i, source };
            let mut env = QuadEnv::sample(&t.params, rng).map_err(generation)?;
            let e = expand_in(t, lex, &mut env, rng).map_err(generation)?;
            label(paradigm.id, Cell::TrainA, &ctl.template, &e.tree, Some(ctl.fronting))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// verification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Training members are labeled alike by both hypotheses.
    TrainAmbiguity,
    /// Test members diverge in the designed pattern.
    TestDivergence,
    /// The two NPI characterizations agree.
    NpiAlternatives,
}

impl Condition {
    pub fn describe(self) -> &'static str {
        match self {
            Condition::TrainAmbiguity => "(i) training members: structural label = linear label",
            Condition::TestDivergence => "(ii) test members: designed divergence pattern",
            Condition::NpiAlternatives => "(iii) npi: linear_end = structural_main",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub checked: usize,
    pub violations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub quad_id: u64,
    pub cell: Cell,
    pub text: String,
    pub label_structural: bool,
    pub label_linear: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosdReport {
    pub paradigm: ParadigmId,
    pub quads: usize,
    pub sentences: usize,
    pub conditions: Vec<ConditionResult>,
    pub exemplars: Vec<Violation>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl PosdReport {
    pub fn violations(&self) -> usize {
        self.conditions.iter().map(|c| c.violations).sum()
    }
}

impl fmt::Display for PosdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "paradigm {}: {} quads, {} sentences", self.paradigm, self.quads, self.sentences)?;
        for c in &self.conditions {
            writeln!(
                f,
                "  {} {}: {} checked, {} violations",
                if c.passed { "PASS" } else { "FAIL" },
                c.condition.describe(),
                c.checked,
                c.violations
            )?;
        }
        for v in &self.exemplars {
            writeln!(
                f,
                "  violation [{}] quad {} {}: {:?} structural={} linear={}",
                v.condition, v.quad_id, v.cell, v.text, v.label_structural, v.label_linear
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::TrainAmbiguity => "i",
            Condition::TestDivergence => "ii",
            Condition::NpiAlternatives => "iii",
        })
    }
}

/// Expected (structural, linear) labels for a member.
pub fn expected_labels(id: ParadigmId, cell: Cell) -> (bool, bool) {
    match (id, cell) {
        (_, Cell::TrainA) => (true, true),
        (_, Cell::TrainB) => (false, false),
        (ParadigmId::SauxInv, Cell::TestA) => (true, false),
        (_, Cell::TestA) => (true, true),
        (_, Cell::TestB) => (false, true),
    }
}

/// One member's contribution to the verification: the conditions it violates.
pub fn member_violations(id: ParadigmId, cell: Cell, s: bool, l: bool, alt: Option<NpiAlternatives>) -> Vec<Condition> {
    let mut out = Vec::new();
    match cell.template_kind() {
        TemplateKind::Train => {
            if s != l || (s, l) != expected_labels(id, cell) {
                out.push(Condition::TrainAmbiguity);
            }
        }
        TemplateKind::Test => {
            if (s, l) != expected_labels(id, cell) {
                out.push(Condition::TestDivergence);
            }
        }
    }
    if id == ParadigmId::Npi && !matches!(alt, Some(a) if a.linear_end == a.structural_main) {
        out.push(Condition::NpiAlternatives);
    }
    out
}

/// Check that training data is ambiguous and test data disambiguates.
pub fn verify_posd(quads: &[Quad], paradigm: ParadigmId) -> PosdReport {
    let mut acc = PosdAccumulator::new(paradigm);
    for q in quads {
        acc.add(q);
    }
    acc.finish()
}

/// Streaming form of [`verify_posd`].
#[derive(Debug, Clone)]
pub struct PosdAccumulator {
    paradigm: ParadigmId,
    quads: usize,
    sentences: usize,
    counts: BTreeMap<Condition, (usize, usize)>,
    exemplars: Vec<Violation>,
}

impl PosdAccumulator {
    pub fn new(paradigm: ParadigmId) -> Self {
        let mut counts = BTreeMap::new();
        counts.insert(Condition::TrainAmbiguity, (0, 0));
        counts.insert(Condition::TestDivergence, (0, 0));
        if paradigm == ParadigmId::Npi {
            counts.insert(Condition::NpiAlternatives, (0, 0));
        }
        PosdAccumulator { paradigm, quads: 0, sentences: 0, counts, exemplars: Vec::new() }
    }

    /// Check all members of a quad, and its control if present.
    pub fn add(&mut self, q: &Quad) {
        self.quads += 1;
        for m in q.members.iter().chain(q.control.iter()) {
            self.add_member(q.quad_id, m.cell, m.text(), m.label_structural, m.label_linear, m.label_alt);
        }
    }

    pub fn add_member(&mut self, quad_id: u64, cell: Cell, text: String, s: bool, l: bool, alt: Option<NpiAlternatives>) {
        self.sentences += 1;
        let checked = match cell.template_kind() {
            TemplateKind::Train => Condition::TrainAmbiguity,
            TemplateKind::Test => Condition::TestDivergence,
        };
        self.counts.get_mut(&checked).expect("condition present").0 += 1;
        if let Some(c) = self.counts.get_mut(&Condition::NpiAlternatives) {
            c.0 += 1;
        }
        for c in member_violations(self.paradigm, cell, s, l, alt) {
            self.counts.get_mut(&c).expect("condition present").1 += 1;
            if self.exemplars.len() < MAX_EXEMPLARS {
                self.exemplars.push(Violation { condition: c, quad_id, cell, text: text.clone(), label_structural: s, label_linear: l });
            }
        }
    }

    pub fn finish(self) -> PosdReport {
        let conditions: Vec<ConditionResult> = self
            .counts
            .into_iter()
            .map(|(condition, (checked, violations))| ConditionResult { condition, checked, violations, passed: violations == 0 })
            .collect();
        let mut warnings = Vec::new();
        if self.quads == 0 && self.sentences == 0 {
            warnings.push("zero quads checked".to_string());
        }
        let mut notes = Vec::new();
        if self.paradigm == ParadigmId::Tense {
            notes.push("linear hypothesis for tense: the first verb or auxiliary is past".to_string());
        }
        PosdReport {
            paradigm: self.paradigm,
            quads: self.quads,
            sentences: self.sentences,
            passed: conditions.iter().all(|c| c.passed),
            conditions,
            exemplars: self.exemplars,
            warnings,
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quads(id: ParadigmId, n: u64, control: bool) -> Vec<Quad> {
        let set = TemplateSet::shipped();
        let lex = Lexicon::shipped();
        let p = set.paradigm(id).unwrap();
        (0..n)
            .map(|q| build_quad_with(p, &set, &lex, q, control, &mut quad_rng(3, id, q)).unwrap())
            .collect()
    }

    #[test]
    fn every_paradigm_passes_and_labels_are_tree_derived() {
        for id in ParadigmId::ALL {
            let qs = quads(id, 300, id == ParadigmId::SauxInv);
            let report = verify_posd(&qs, id);
            assert!(report.passed, "{report}");
            for q in &qs {
                for m in q.members.iter().chain(q.control.iter()) {
                    let (s, l) = labels_from_relations(id, &m.sentence).unwrap();
                    assert_eq!((s, l), (m.label_structural, m.label_linear), "{}", m.text());
                }
                let [a, b, c, d] = &q.members[..] else { panic!() };
                assert!(pair_edit_distance(&a.sentence, &b.sentence) <= MAX_PAIR_EDIT, "{} / {}", a.text(), b.text());
                assert!(pair_edit_distance(&c.sentence, &d.sentence) <= MAX_PAIR_EDIT, "{} / {}", c.text(), d.text());
            }
        }
    }

    #[test]
    fn quads_are_deterministic() {
        for id in ParadigmId::ALL {
            assert_eq!(quads(id, 5, false), quads(id, 5, false));
        }
    }

    #[test]
    fn control_does_not_perturb_members() {
        let with = quads(ParadigmId::SauxInv, 20, true);
        let without = quads(ParadigmId::SauxInv, 20, false);
        for (a, b) in with.iter().zip(&without) {
            assert_eq!(a.members, b.members);
            let ctl = a.control.as_ref().unwrap();
            assert_eq!((ctl.label_structural, ctl.label_linear), (true, true));
        }
    }

    #[test]
    fn flipped_train_label_fails_condition_one() {
        let mut qs = quads(ParadigmId::Reflexive, 3, false);
        qs[1].members[0].label_linear = !qs[1].members[0].label_linear;
        let r = verify_posd(&qs, ParadigmId::Reflexive);
        assert!(!r.passed);
        assert_eq!(r.exemplars.len(), 1);
        assert_eq!(r.exemplars[0].condition, Condition::TrainAmbiguity);
        assert_eq!(r.exemplars[0].quad_id, 1);
    }

    #[test]
    fn empty_input_passes_with_warning() {
        let r = verify_posd(&[], ParadigmId::Npi);
        assert!(r.passed);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn controls() {
        let set = TemplateSet::shipped();
        let lex = Lexicon::shipped();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(build_confound_controls(&set, &lex, &mut rng, 0).unwrap().is_empty());
        for c in build_confound_controls(&set, &lex, &mut rng, 50).unwrap() {
            assert_eq!((c.label_structural, c.label_linear), (true, true));
            let rel = c.sentence.tokens.iter().position(|t| t == "who" || t == "that").unwrap();
            let next = c.sentence.tree.leaves()[rel + 1];
            assert_ne!(c.sentence.tree.node(next).unwrap().label, "Aux");
            assert_eq!(auxiliaries(&c.sentence.tree).len(), 1);
        }
    }

    #[test]
    fn paradigm_names() {
        for id in ParadigmId::ALL {
            assert_eq!(id.as_str().parse::<ParadigmId>().unwrap(), id);
        }
        assert!("saux".parse::<ParadigmId>().is_err());
    }
}
