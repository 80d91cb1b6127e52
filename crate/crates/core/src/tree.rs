//! Labeled constituency trees produced by template expansion, and their surface realization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::FeatureBundle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0} is not in the tree")]
    NodeNotInTree(NodeId),
    #[error("leaf {0} ({1}) carries no lexeme")]
    UnlexicalizedLeaf(NodeId, String),
    #[error("role {0} occurs more than once")]
    DuplicateRole(Role),
    #[error("tree has no {0} node")]
    MissingRole(Role),
    #[error("nodes {0} and {1} overlap")]
    Overlap(NodeId, NodeId),
    #[error("no auxiliary to front")]
    NoAuxiliary,
    #[error("unknown role tag {0:?}")]
    UnknownRole(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Semantic role tags attached to template slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    MainAux,
    EmbeddedAux,
    MainVerb,
    EmbeddedVerb,
    Binder,
    Reflexive,
    Negation,
    Npi,
    Relativizer,
    Subject,
    Object,
}

impl Role {
    pub const ALL: [Role; 11] = [
        Role::MainAux,
        Role::EmbeddedAux,
        Role::MainVerb,
        Role::EmbeddedVerb,
        Role::Binder,
        Role::Reflexive,
        Role::Negation,
        Role::Npi,
        Role::Relativizer,
        Role::Subject,
        Role::Object,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::MainAux => "main-aux",
            Role::EmbeddedAux => "embedded-aux",
            Role::MainVerb => "main-verb",
            Role::EmbeddedVerb => "embedded-verb",
            Role::Binder => "binder",
            Role::Reflexive => "reflexive",
            Role::Negation => "negation",
            Role::Npi => "npi",
            Role::Relativizer => "relativizer",
            Role::Subject => "subject",
            Role::Object => "object",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| TreeError::UnknownRole(s.to_string()))
    }
}

/// Lexical material at a leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    /// A sampled entry and the inflection key chosen for it.
    Lexeme { entry: String, form_key: String, surface: String },
    /// Fixed template text such as sentence punctuation.
    Literal(String),
}

impl Terminal {
    pub fn surface(&self) -> &str {
        match self {
            Terminal::Lexeme { surface, .. } => surface,
            Terminal::Literal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    /// Nonterminal label (`S`, `NP`, `RC`, ...) or category tag for leaves.
    pub label: String,
    pub features: FeatureBundle,
    pub terminal: Option<Terminal>,
    pub role: Option<Role>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn surface(&self) -> Option<&str> {
        self.terminal.as_ref().map(Terminal::surface)
    }

    pub fn form_key(&self) -> Option<&str> {
        match &self.terminal {
            Some(Terminal::Lexeme { form_key, .. }) => Some(form_key),
            _ => None,
        }
    }

    pub fn entry_id(&self) -> Option<&str> {
        match &self.terminal {
            Some(Terminal::Lexeme { entry, .. }) => Some(entry),
            _ => None,
        }
    }
}

/// Record of a leaf moved to the front of the clause, kept so the declarative can be restored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Movement {
    pub node: NodeId,
    pub from_parent: NodeId,
    pub from_index: usize,
}

/// Arena-allocated constituency tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationTree {
    nodes: Vec<Node>,
    root: NodeId,
    movement: Option<Movement>,
}

impl DerivationTree {
    pub fn new(root_label: impl Into<String>) -> Self {
        DerivationTree {
            nodes: vec![Node {
                label: root_label.into(),
                features: FeatureBundle::new(),
                terminal: None,
                role: None,
                parent: None,
                children: Vec::new(),
            }],
            root: NodeId(0),
            movement: None,
        }
    }

    pub fn add_child(&mut self, parent: NodeId, label: impl Into<String>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            label: label.into(),
            features: FeatureBundle::new(),
            terminal: None,
            role: None,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent.index()].children.push(id);
        id
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id.index()).ok_or(TreeError::NodeNotInTree(id))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, TreeError> {
        self.nodes.get_mut(id.index()).ok_or(TreeError::NodeNotInTree(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(id.index()).and_then(|n| n.parent)
    }

    pub fn movement(&self) -> Option<&Movement> {
        self.movement.as_ref()
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id.index()];
            if node.is_leaf() {
                out.push(id);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Leaves dominated by (or equal to) `id`, in order.
    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id.index()];
            if node.is_leaf() {
                out.push(id);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Ancestors of `id` from its parent up to the root.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |&n| self.parent(n))
    }

    pub fn depth(&self) -> usize {
        self.leaves().into_iter().map(|l| self.ancestors(l).count()).max().unwrap_or(0)
    }

    /// The unique node carrying `role`, if any.
    pub fn find_role(&self, role: Role) -> Result<Option<NodeId>, TreeError> {
        let mut found = None;
        for id in self.ids() {
            if self.nodes[id.index()].role == Some(role) {
                if found.is_some() {
                    return Err(TreeError::DuplicateRole(role));
                }
                found = Some(id);
            }
        }
        Ok(found)
    }

    pub fn require_role(&self, role: Role) -> Result<NodeId, TreeError> {
        self.find_role(role)?.ok_or(TreeError::MissingRole(role))
    }

    /// Same tree with every role tag removed.
    pub fn without_roles(&self) -> DerivationTree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.role = None;
        }
        t
    }

    /// Detach a leaf and attach it as the first child of the root, recording where it came from.
    pub fn front_leaf(&mut self, leaf: NodeId) -> Result<(), TreeError> {
        let parent = self.parent(leaf).ok_or(TreeError::NodeNotInTree(leaf))?;
        let siblings = &mut self.nodes[parent.index()].children;
        let from_index = siblings.iter().position(|&c| c == leaf).expect("child listed under parent");
        siblings.remove(from_index);
        let root = self.root;
        self.nodes[root.index()].children.insert(0, leaf);
        self.nodes[leaf.index()].parent = Some(root);
        self.movement = Some(Movement { node: leaf, from_parent: parent, from_index });
        Ok(())
    }

    /// Undo a recorded movement, giving back the declarative tree with a final `.`.
    pub fn restore_declarative(&self) -> DerivationTree {
        let mut t = self.clone();
        if let Some(m) = t.movement.take() {
            let root = t.root;
            t.nodes[root.index()].children.retain(|&c| c != m.node);
            t.nodes[m.from_parent.index()].children.insert(m.from_index, m.node);
            t.nodes[m.node.index()].parent = Some(m.from_parent);
            if let Some(&last) = t.leaves().last() {
                if matches!(&t.nodes[last.index()].terminal, Some(Terminal::Literal(p)) if p == "?") {
                    t.set_terminal(last, Terminal::Literal(".".into()));
                }
            }
        }
        t
    }

    pub fn set_terminal(&mut self, id: NodeId, terminal: Terminal) {
        self.nodes[id.index()].terminal = Some(terminal);
    }

    /// Bracketed rendering, e.g. `[S [NP the man] ...]`.
    pub fn bracketed(&self) -> String {
        fn go(t: &DerivationTree, id: NodeId, out: &mut String) {
            let n = &t.nodes[id.index()];
            if n.is_leaf() {
                out.push_str(n.surface().unwrap_or("_"));
            } else {
                out.push('[');
                out.push_str(&n.label);
                for &c in &n.children {
                    out.push(' ');
                    go(t, c, out);
                }
                out.push(']');
            }
        }
        let mut s = String::new();
        go(self, self.root, &mut s);
        s
    }
}

/// Token sequence plus the tree it realizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tree: DerivationTree,
    /// Leaf id to token index; a bijection onto `0..tokens.len()`.
    pub leaf_spans: BTreeMap<NodeId, usize>,
}

impl Sentence {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Token sequence rebuilt from the leaf spans alone.
    pub fn reconstruct(&self) -> Vec<String> {
        let mut by_index: Vec<(usize, NodeId)> = self.leaf_spans.iter().map(|(&l, &i)| (i, l)).collect();
        by_index.sort();
        let surfaces = by_index
            .into_iter()
            .map(|(_, l)| self.tree.node(l).ok().and_then(|n| n.surface()).unwrap_or_default().to_string());
        sentence_case(surfaces)
    }
}

/// Lower-case everything except the first token, which is capitalized.
fn sentence_case<I: IntoIterator<Item = String>>(tokens: I) -> Vec<String> {
    tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| if i == 0 { capitalize(&t) } else { t })
        .collect()
}

pub fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// In-order leaf yield with sentence-initial capitalization.
pub fn linearize(tree: &DerivationTree) -> Result<Sentence, TreeError> {
    let leaves = tree.leaves();
    let mut surfaces = Vec::with_capacity(leaves.len());
    let mut leaf_spans = BTreeMap::new();
    for (i, &leaf) in leaves.iter().enumerate() {
        let node = tree.node(leaf)?;
        let surface = node
            .surface()
            .ok_or_else(|| TreeError::UnlexicalizedLeaf(leaf, node.label.clone()))?;
        surfaces.push(surface.to_string());
        leaf_spans.insert(leaf, i);
    }
    Ok(Sentence { tokens: sentence_case(surfaces), tree: tree.clone(), leaf_spans })
}
