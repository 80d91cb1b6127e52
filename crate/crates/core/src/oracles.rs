//! Structural and linear relations over derivation trees, and auxiliary fronting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tree::{linearize, DerivationTree, Node, NodeId, Role, Sentence, Terminal, TreeError};

/// True iff `a` is a proper ancestor of `b`.
pub fn dominates(tree: &DerivationTree, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
    tree.node(a)?;
    tree.node(b)?;
    Ok(tree.ancestors(b).any(|x| x == a))
}

/// First-branching c-command: neither node dominates the other and `a`'s parent dominates `b`.
pub fn c_commands(tree: &DerivationTree, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
    if a == b || dominates(tree, a, b)? || dominates(tree, b, a)? {
        return Ok(false);
    }
    match tree.parent(a) {
        Some(p) => dominates(tree, p, b),
        None => Ok(false),
    }
}

/// Every leaf under `a` is left of every leaf under `b`. The nodes must be disjoint.
pub fn precedes(tree: &DerivationTree, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
    if a == b || dominates(tree, a, b)? || dominates(tree, b, a)? {
        return Err(TreeError::Overlap(a, b));
    }
    let order = tree.leaves();
    let pos = |l: NodeId| order.iter().position(|&x| x == l).expect("leaf of tree");
    let last_a = tree.leaves_under(a).into_iter().map(pos).max();
    let first_b = tree.leaves_under(b).into_iter().map(pos).min();
    Ok(matches!((last_a, first_b), (Some(x), Some(y)) if x < y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    CCommand,
    Precedence,
    Dominance,
}

/// An evaluated relation between two nodes of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub from: NodeId,
    pub to: NodeId,
    pub holds: bool,
}

impl Relation {
    pub fn compute(tree: &DerivationTree, kind: RelationKind, from: NodeId, to: NodeId) -> Result<Self, TreeError> {
        if from == to && kind != RelationKind::Dominance {
            return Err(TreeError::Overlap(from, to));
        }
        let holds = match kind {
            RelationKind::CCommand => c_commands(tree, from, to)?,
            RelationKind::Precedence => precedes(tree, from, to)?,
            RelationKind::Dominance => dominates(tree, from, to)?,
        };
        Ok(Relation { kind, from, to, holds })
    }
}

/// Person, number and gender agree wherever both nodes specify them.
pub fn agreement_match(binder: &Node, reflexive: &Node) -> bool {
    ["pers", "num", "gen"].iter().all(|f| match (binder.features.get(f), reflexive.features.get(f)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    })
}

/// Which auxiliary moves to the front of a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrontingStrategy {
    /// The main-clause auxiliary.
    #[serde(rename = "MAIN")]
    Main,
    /// The linearly first auxiliary.
    #[serde(rename = "FIRST")]
    First,
    /// The linearly last auxiliary.
    #[serde(rename = "LAST")]
    Last,
}

impl fmt::Display for FrontingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrontingStrategy::Main => "MAIN",
            FrontingStrategy::First => "FIRST",
            FrontingStrategy::Last => "LAST",
        })
    }
}

impl FromStr for FrontingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MAIN" => Ok(FrontingStrategy::Main),
            "FIRST" => Ok(FrontingStrategy::First),
            "LAST" => Ok(FrontingStrategy::Last),
            _ => Err(format!("unknown fronting strategy {s:?}")),
        }
    }
}

pub fn is_auxiliary(tree: &DerivationTree, id: NodeId) -> bool {
    tree.node(id).map(|n| n.label == "Aux" && n.is_leaf()).unwrap_or(false)
}

/// Auxiliary leaves in token order.
pub fn auxiliaries(tree: &DerivationTree) -> Vec<NodeId> {
    tree.leaves().into_iter().filter(|&l| is_auxiliary(tree, l)).collect()
}

/// The auxiliary a strategy selects in a declarative tree.
pub fn select_auxiliary(declarative: &DerivationTree, strategy: FrontingStrategy) -> Result<NodeId, TreeError> {
    let auxes = auxiliaries(declarative);
    if auxes.is_empty() {
        return Err(TreeError::NoAuxiliary);
    }
    Ok(match strategy {
        FrontingStrategy::Main => {
            let main = declarative.require_role(Role::MainAux)?;
            assert_eq!(
                declarative.parent(main),
                Some(declarative.root()),
                "main-aux role is not immediately dominated by the main clause"
            );
            main
        }
        FrontingStrategy::First => auxes[0],
        FrontingStrategy::Last => auxes[auxes.len() - 1],
    })
}

/// Interrogative formed by moving the selected auxiliary to the front and ending with `?`.
pub fn front_auxiliary(declarative: &DerivationTree, strategy: FrontingStrategy) -> Result<Sentence, TreeError> {
    let aux = select_auxiliary(declarative, strategy)?;
    let mut q = declarative.clone();
    q.front_leaf(aux)?;
    if let Some(&last) = q.leaves().last() {
        if matches!(&q.node(last)?.terminal, Some(Terminal::Literal(p)) if p == ".") {
            q.set_terminal(last, Terminal::Literal("?".into()));
        }
    }
    linearize(&q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Past,
    Present,
}

impl fmt::Display for Tense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tense::Past => "past",
            Tense::Present => "present",
        })
    }
}

/// Tense of a verb or auxiliary leaf, read off its inflection key.
pub fn leaf_tense(node: &Node) -> Option<Tense> {
    let key = node.form_key()?;
    Some(if key.starts_with("past") { Tense::Past } else { Tense::Present })
}

pub fn embedded_verb_tense(tree: &DerivationTree) -> Result<Tense, TreeError> {
    let v = tree.require_role(Role::EmbeddedVerb)?;
    let node = tree.node(v)?;
    leaf_tense(node).ok_or_else(|| TreeError::UnlexicalizedLeaf(v, node.label.clone()))
}
