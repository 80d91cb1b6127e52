//! CFG-style templates with feature-passing agreement links, expanded into lexicalized trees.
//!
//! Templates are data. A template file shares the line-delimited record container
//! of the lexicon and holds three record kinds:
//!
//! * `template`: `{"kind":"template","id":..,"root":"S","params":[{"name":"ns","values":["sg","pl"]}]}`
//! * `production`: `{"kind":"production","templates":[..],"lhs":"NP.subj","children":[..],"links":[["num",0,"num"]],"when":{"ns":"pl"}}`
//! * `paradigm`: the four quad cells of one experimental paradigm.
//!
//! Children are `{"nt": symbol}`, `{"slot": category, "name": .., "form": [..]}` or `{"lit": text}`;
//! any child may carry `constraints` and a `role`. A nonterminal's node label is the symbol up to
//! the first `.`, so `NP.subj` and `NP.obj` both produce `NP` nodes. Constraint values of the form
//! `$p` refer to template parameters, which are sampled once per quad. A link
//! `[parent_feature, child_index, child_feature]` requires the two features to unify.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{FeatureBundle, LexicalEntry, Lexicon, LexiconError, Schema};
use crate::paradigms::{Paradigm, ParadigmId};
use crate::tree::{DerivationTree, NodeId, Role, Terminal, TreeError};

/// Templates and paradigm definitions shipped with the crate.
pub const SHIPPED_TEMPLATES: &str = include_str!("../data/templates.jsonl");

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("template {template}: {message}")]
    Invalid { template: String, message: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("unknown paradigm {0:?}")]
    UnknownParadigm(String),
    #[error("template {template}: no production for {symbol} matches the quad parameters")]
    NoProduction { template: String, symbol: String },
    #[error("template {template}: agreement conflict on {feature}: {left} vs {right}")]
    Agreement { template: String, feature: String, left: String, right: String },
    #[error("template {template}, slot {slot}: {source}")]
    NoCandidate {
        template: String,
        slot: String,
        #[source]
        source: LexiconError,
    },
    #[error("template {template}: entry {entry} has no form for {patterns:?}")]
    NoForm { template: String, entry: String, patterns: Vec<String> },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// Quad-level parameter with its value domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub values: Vec<String>,
    /// Sampled value must differ from this (earlier) parameter's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChildKind {
    Nonterminal(String),
    Slot { category: String, name: Option<String>, form: Vec<String> },
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Child {
    pub kind: ChildKind,
    /// Feature constraints; values starting with `$` name a parameter.
    pub constraints: BTreeMap<String, String>,
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub parent_feature: String,
    pub child_index: usize,
    pub child_feature: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: String,
    pub children: Vec<Child>,
    pub links: Vec<Link>,
    /// Parameter guard: the production is eligible only when every listed parameter has the given value.
    pub when: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub root: String,
    pub params: Vec<ParamDecl>,
    pub rules: BTreeMap<String, Vec<Production>>,
    depth_bound: usize,
}

impl Template {
    /// Longest root-to-leaf path any expansion can produce.
    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    fn invalid(&self, message: impl Into<String>) -> GrammarError {
        GrammarError::Invalid { template: self.id.clone(), message: message.into() }
    }

    fn validate(&mut self) -> Result<(), GrammarError> {
        if !self.rules.contains_key(&self.root) {
            return Err(self.invalid(format!("root {} has no production", self.root)));
        }
        let declared: BTreeSet<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        for (i, p) in self.params.iter().enumerate() {
            if p.values.is_empty() {
                return Err(self.invalid(format!("parameter {} has no values", p.name)));
            }
            if let Some(d) = &p.distinct_from {
                if !self.params[..i].iter().any(|q| &q.name == d) {
                    return Err(self.invalid(format!("parameter {} is distinct from undeclared {d}", p.name)));
                }
            }
        }
        for prods in self.rules.values() {
            for prod in prods {
                if prod.children.len() < 2 {
                    return Err(self.invalid(format!("unary production for {}", prod.lhs)));
                }
                for link in &prod.links {
                    if link.child_index >= prod.children.len() {
                        return Err(self.invalid(format!("link into missing child {} of {}", link.child_index, prod.lhs)));
                    }
                }
                for p in prod.when.keys() {
                    if !declared.contains(p.as_str()) {
                        return Err(self.invalid(format!("guard on undeclared parameter {p}")));
                    }
                }
                for child in &prod.children {
                    for v in child.constraints.values() {
                        if let Some(p) = v.strip_prefix('$') {
                            if !declared.contains(p) {
                                return Err(self.invalid(format!("constraint on undeclared parameter {p}")));
                            }
                        }
                    }
                    if let ChildKind::Nonterminal(sym) = &child.kind {
                        if !self.rules.contains_key(sym) {
                            return Err(self.invalid(format!("nonterminal {sym} has no production")));
                        }
                    }
                }
            }
        }
        self.depth_bound = self.longest_chain()?;
        Ok(())
    }

    /// Depth of the deepest possible tree; errors on recursive templates.
    fn longest_chain(&self) -> Result<usize, GrammarError> {
        fn visit<'a>(
            t: &'a Template,
            sym: &'a str,
            on_path: &mut BTreeSet<&'a str>,
            memo: &mut BTreeMap<&'a str, usize>,
        ) -> Result<usize, GrammarError> {
            if let Some(&d) = memo.get(sym) {
                return Ok(d);
            }
            if !on_path.insert(sym) {
                return Err(t.invalid(format!("recursive expansion through {sym}")));
            }
            let mut best = 0;
            for prod in &t.rules[sym] {
                for child in &prod.children {
                    let below = match &child.kind {
                        ChildKind::Nonterminal(s) => visit(t, s, on_path, memo)?,
                        _ => 0,
                    };
                    best = best.max(1 + below);
                }
            }
            on_path.remove(sym);
            memo.insert(sym, best);
            Ok(best)
        }
        visit(self, &self.root, &mut BTreeSet::new(), &mut BTreeMap::new())
    }

    /// Check feature names, categories and constant values against a lexicon schema.
    pub fn validate_against(&self, schema: &Schema) -> Result<(), GrammarError> {
        let param_values: BTreeMap<&str, &[String]> =
            self.params.iter().map(|p| (p.name.as_str(), p.values.as_slice())).collect();
        for prods in self.rules.values() {
            for prod in prods {
                for link in &prod.links {
                    for f in [&link.parent_feature, &link.child_feature] {
                        if !schema.has_feature(f) {
                            return Err(self.invalid(format!("link on undeclared feature {f}")));
                        }
                    }
                }
                for child in &prod.children {
                    if let ChildKind::Slot { category, .. } = &child.kind {
                        if !schema.categories.contains(category) {
                            return Err(self.invalid(format!("slot of undeclared category {category}")));
                        }
                    }
                    for (f, v) in &child.constraints {
                        let values: Vec<&String> = match v.strip_prefix('$') {
                            Some(p) => param_values[p].iter().collect(),
                            None => vec![v],
                        };
                        let bundle_ok = values.into_iter().all(|v| {
                            schema.check_bundle(&self.id, &[(f.as_str(), v.as_str())].into_iter().collect::<FeatureBundle>()).is_ok()
                        });
                        if !bundle_ok {
                            return Err(self.invalid(format!("constraint {f}={v} violates the schema")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// file format

#[derive(Deserialize)]
struct RawChild {
    nt: Option<String>,
    slot: Option<String>,
    lit: Option<String>,
    name: Option<String>,
    #[serde(default)]
    constraints: BTreeMap<String, String>,
    #[serde(default)]
    form: Vec<String>,
    role: Option<String>,
}

#[derive(Deserialize)]
struct RawTemplate {
    id: String,
    root: String,
    #[serde(default)]
    params: Vec<ParamDecl>,
}

#[derive(Deserialize)]
struct RawProduction {
    #[serde(default)]
    template: Option<String>,
    #[serde(default)]
    templates: Vec<String>,
    lhs: String,
    children: Vec<RawChild>,
    #[serde(default)]
    links: Vec<(String, usize, String)>,
    #[serde(default)]
    when: BTreeMap<String, String>,
}

fn convert_child(raw: RawChild) -> Result<Child, String> {
    let kind = match (raw.nt, raw.slot, raw.lit) {
        (Some(sym), None, None) => ChildKind::Nonterminal(sym),
        (None, Some(category), None) => ChildKind::Slot {
            category,
            name: raw.name,
            form: if raw.form.is_empty() { vec!["base".to_string()] } else { raw.form },
        },
        (None, None, Some(text)) => ChildKind::Literal(text),
        _ => return Err("child needs exactly one of nt, slot, lit".into()),
    };
    let role = raw.role.map(|r| r.parse::<Role>()).transpose().map_err(|e| e.to_string())?;
    Ok(Child { kind, constraints: raw.constraints, role })
}

/// All templates and paradigm definitions from one template file.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
    paradigms: BTreeMap<ParadigmId, Paradigm>,
}

impl TemplateSet {
    pub fn load<R: BufRead>(source: R) -> Result<Self, GrammarError> {
        let mut templates: BTreeMap<String, Template> = BTreeMap::new();
        let mut productions: Vec<(usize, RawProduction)> = Vec::new();
        let mut paradigms = BTreeMap::new();
        for (i, line) in source.lines().enumerate() {
            let lineno = i + 1;
            let parse = |message: String| GrammarError::Parse { line: lineno, message };
            let line = line.map_err(|e| parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
            match value.get("kind").and_then(|k| k.as_str()) {
                Some("template") => {
                    let raw: RawTemplate = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
                    if templates.contains_key(&raw.id) {
                        return Err(parse(format!("duplicate template {}", raw.id)));
                    }
                    templates.insert(
                        raw.id.clone(),
                        Template { id: raw.id, root: raw.root, params: raw.params, rules: BTreeMap::new(), depth_bound: 0 },
                    );
                }
                Some("production") => {
                    let raw: RawProduction = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
                    productions.push((lineno, raw));
                }
                Some("paradigm") => {
                    let p: Paradigm = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
                    if paradigms.insert(p.id, p).is_some() {
                        return Err(parse("duplicate paradigm".into()));
                    }
                }
                other => return Err(parse(format!("unknown record kind {other:?}"))),
            }
        }
        for (line, raw) in productions {
            let mut targets = raw.templates;
            targets.extend(raw.template);
            if targets.is_empty() {
                return Err(GrammarError::Parse { line, message: "production names no template".into() });
            }
            let children = raw
                .children
                .into_iter()
                .map(convert_child)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|message| GrammarError::Parse { line, message })?;
            let prod = Production {
                lhs: raw.lhs,
                children,
                links: raw
                    .links
                    .into_iter()
                    .map(|(p, i, c)| Link { parent_feature: p, child_index: i, child_feature: c })
                    .collect(),
                when: raw.when,
            };
            for t in targets {
                let template = templates
                    .get_mut(&t)
                    .ok_or_else(|| GrammarError::Parse { line, message: format!("unknown template {t}") })?;
                template.rules.entry(prod.lhs.clone()).or_default().push(prod.clone());
            }
        }
        for t in templates.values_mut() {
            t.validate()?;
        }
        let set = TemplateSet { templates, paradigms };
        for p in set.paradigms.values() {
            p.validate(&set)?;
        }
        Ok(set)
    }

    pub fn shipped() -> Self {
        TemplateSet::load(SHIPPED_TEMPLATES.as_bytes()).expect("shipped templates are valid")
    }

    pub fn template(&self, id: &str) -> Result<&Template, GrammarError> {
        self.templates.get(id).ok_or_else(|| GrammarError::UnknownTemplate(id.to_string()))
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    pub fn paradigm(&self, id: ParadigmId) -> Result<&Paradigm, GrammarError> {
        self.paradigms.get(&id).ok_or_else(|| GrammarError::UnknownParadigm(id.to_string()))
    }

    pub fn paradigms(&self) -> impl Iterator<Item = &Paradigm> {
        self.paradigms.values()
    }

    pub fn validate_against(&self, schema: &Schema) -> Result<(), GrammarError> {
        self.templates.values().try_for_each(|t| t.validate_against(schema))
    }
}

// ---------------------------------------------------------------------------
// expansion

/// State shared by every expansion in one quad: sampled parameters and named lexical choices.
#[derive(Debug, Clone, Default)]
pub struct QuadEnv {
    params: BTreeMap<String, String>,
    bound: BTreeMap<String, Arc<LexicalEntry>>,
}

impl QuadEnv {
    /// Sample every declared parameter once, in declaration order.
    pub fn sample<'a, R, I>(decls: I, rng: &mut R) -> Result<Self, GrammarError>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a ParamDecl>,
    {
        let mut env = QuadEnv::default();
        env.sample_missing(decls, rng)?;
        Ok(env)
    }

    /// Sample the parameters not yet set, keeping existing values.
    pub fn sample_missing<'a, R, I>(&mut self, decls: I, rng: &mut R) -> Result<(), GrammarError>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a ParamDecl>,
    {
        let params = &mut self.params;
        for d in decls {
            if params.contains_key(&d.name) {
                continue;
            }
            let avoid = d.distinct_from.as_ref().and_then(|p| params.get(p));
            let choices: Vec<&String> = d.values.iter().filter(|v| Some(*v) != avoid).collect();
            let v = choices.choose(rng).ok_or_else(|| GrammarError::Invalid {
                template: d.name.clone(),
                message: "parameter has no admissible value".into(),
            })?;
            params.insert(d.name.clone(), (*v).clone());
        }
        Ok(())
    }

    pub fn with_params(params: BTreeMap<String, String>) -> Self {
        QuadEnv { params, bound: BTreeMap::new() }
    }

    pub fn params(&self) -> &BTreeMap<String, String> {
        &self.params
    }

    pub fn bound(&self) -> &BTreeMap<String, Arc<LexicalEntry>> {
        &self.bound
    }

    fn resolve(&self, template: &str, constraints: &BTreeMap<String, String>) -> Result<Vec<(String, String)>, GrammarError> {
        constraints
            .iter()
            .map(|(f, v)| {
                let value = match v.strip_prefix('$') {
                    Some(p) => self.params.get(p).cloned().ok_or_else(|| GrammarError::Invalid {
                        template: template.to_string(),
                        message: format!("parameter {p} not sampled"),
                    })?,
                    None => v.clone(),
                };
                Ok((f.clone(), value))
            })
            .collect()
    }
}

/// Union-find over (node, feature) variables, each class holding an optional atomic value.
#[derive(Default)]
struct FeatureVars {
    index: BTreeMap<(NodeId, String), usize>,
    parent: Vec<usize>,
    value: Vec<Option<String>>,
}

impl FeatureVars {
    fn var(&mut self, node: NodeId, feature: &str) -> usize {
        if let Some(&v) = self.index.get(&(node, feature.to_string())) {
            return v;
        }
        let v = self.parent.len();
        self.parent.push(v);
        self.value.push(None);
        self.index.insert((node, feature.to_string()), v);
        v
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns the clashing pair of values on failure.
    fn union(&mut self, a: usize, b: usize) -> Result<(), (String, String)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Ok(());
        }
        let merged = match (self.value[ra].take(), self.value[rb].take()) {
            (Some(x), Some(y)) if x != y => return Err((x, y)),
            (x, y) => x.or(y),
        };
        self.parent[rb] = ra;
        self.value[ra] = merged;
        Ok(())
    }

    fn bind(&mut self, v: usize, value: &str) -> Result<(), (String, String)> {
        let r = self.find(v);
        match &self.value[r] {
            Some(x) if x != value => Err((x.clone(), value.to_string())),
            _ => {
                self.value[r] = Some(value.to_string());
                Ok(())
            }
        }
    }

    fn lookup(&mut self, node: NodeId, feature: &str) -> Option<String> {
        let v = *self.index.get(&(node, feature.to_string()))?;
        let r = self.find(v);
        self.value[r].clone()
    }

    fn bundle(&mut self, node: NodeId) -> FeatureBundle {
        let keys: Vec<(String, usize)> = self
            .index
            .range((node, String::new())..)
            .take_while(|((n, _), _)| *n == node)
            .map(|((_, f), &v)| (f.clone(), v))
            .collect();
        keys.into_iter()
            .filter_map(|(f, v)| {
                let r = self.find(v);
                self.value[r].clone().map(|val| (f, val))
            })
            .collect()
    }
}

/// One agreement link as instantiated in a tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLink {
    pub parent: NodeId,
    pub parent_feature: String,
    pub child: NodeId,
    pub child_feature: String,
}

/// A lexicalized tree together with the links it was built under.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub tree: DerivationTree,
    pub links: Vec<TreeLink>,
}

impl Expansion {
    /// Links whose two ends carry different values.
    pub fn violated_links(&self) -> Vec<&TreeLink> {
        self.links
            .iter()
            .filter(|l| {
                let p = self.tree.node(l.parent).ok().and_then(|n| n.features.get(&l.parent_feature));
                let c = self.tree.node(l.child).ok().and_then(|n| n.features.get(&l.child_feature));
                matches!((p, c), (Some(a), Some(b)) if a != b)
            })
            .collect()
    }
}

struct SlotInfo {
    category: String,
    name: Option<String>,
    form: Vec<String>,
}

/// Expand with a fresh environment (parameters sampled from `rng`).
pub fn expand<R: Rng + ?Sized>(template: &Template, lex: &Lexicon, rng: &mut R) -> Result<DerivationTree, GrammarError> {
    let mut env = QuadEnv::sample(&template.params, rng)?;
    Ok(expand_in(template, lex, &mut env, rng)?.tree)
}

/// Expand inside a quad environment, reusing and extending its named lexical choices.
pub fn expand_in<R: Rng + ?Sized>(
    template: &Template,
    lex: &Lexicon,
    env: &mut QuadEnv,
    rng: &mut R,
) -> Result<Expansion, GrammarError> {
    let mut tree = DerivationTree::new(label_of(&template.root));
    let mut vars = FeatureVars::default();
    let mut slots: BTreeMap<NodeId, SlotInfo> = BTreeMap::new();
    let mut links = Vec::new();
    let mut constraints: Vec<(NodeId, Vec<(String, String)>)> = Vec::new();

    let conflict = |feature: &str, (left, right): (String, String)| GrammarError::Agreement {
        template: template.id.clone(),
        feature: feature.to_string(),
        left,
        right,
    };

    // skeleton: choose productions top-down
    let mut agenda = vec![(tree.root(), template.root.clone(), 0usize)];
    while let Some((node, symbol, depth)) = agenda.pop() {
        assert!(depth < template.depth_bound, "expansion deeper than static bound");
        let eligible: Vec<&Production> = template.rules[&symbol]
            .iter()
            .filter(|p| p.when.iter().all(|(k, v)| env.params.get(k) == Some(v)))
            .collect();
        let prod = *eligible.choose(rng).ok_or_else(|| GrammarError::NoProduction {
            template: template.id.clone(),
            symbol: symbol.clone(),
        })?;
        let mut child_ids = Vec::with_capacity(prod.children.len());
        let mut pending = Vec::new();
        for child in &prod.children {
            let id = match &child.kind {
                ChildKind::Nonterminal(sym) => {
                    let id = tree.add_child(node, label_of(sym));
                    pending.push((id, sym.clone(), depth + 1));
                    id
                }
                ChildKind::Slot { category, name, form } => {
                    let id = tree.add_child(node, category.clone());
                    slots.insert(id, SlotInfo { category: category.clone(), name: name.clone(), form: form.clone() });
                    id
                }
                ChildKind::Literal(text) => {
                    let id = tree.add_child(node, "Punct");
                    tree.set_terminal(id, Terminal::Literal(text.clone()));
                    id
                }
            };
            tree.node_mut(id)?.role = child.role;
            constraints.push((id, env.resolve(&template.id, &child.constraints)?));
            child_ids.push(id);
        }
        for link in &prod.links {
            links.push(TreeLink {
                parent: node,
                parent_feature: link.parent_feature.clone(),
                child: child_ids[link.child_index],
                child_feature: link.child_feature.clone(),
            });
        }
        // depth-first, left to right
        agenda.extend(pending.into_iter().rev());
    }

    for (node, cs) in &constraints {
        for (f, v) in cs {
            let var = vars.var(*node, f);
            vars.bind(var, v).map_err(|e| conflict(f, e))?;
        }
    }
    for l in &links {
        let a = vars.var(l.parent, &l.parent_feature);
        let b = vars.var(l.child, &l.child_feature);
        vars.union(a, b).map_err(|e| conflict(&l.child_feature, e))?;
    }

    // lexicalize left to right
    for leaf in tree.leaves() {
        let Some(slot) = slots.get(&leaf) else { continue };
        let wanted = vars.bundle(leaf);
        let slot_label = slot.name.clone().unwrap_or_else(|| slot.category.clone());
        let no_candidate = |source: LexiconError| GrammarError::NoCandidate {
            template: template.id.clone(),
            slot: slot_label.clone(),
            source,
        };
        let entry = match slot.name.as_ref().and_then(|n| env.bound.get(n)) {
            Some(e) => {
                if e.category != slot.category || !e.features.unifies_with(&wanted) {
                    return Err(no_candidate(LexiconError::NoCandidate {
                        category: slot.category.clone(),
                        constraints: wanted,
                    }));
                }
                Arc::clone(e)
            }
            None => {
                let exclude: BTreeSet<String> = if lex.schema().is_open_class(&slot.category) {
                    env.bound
                        .values()
                        .filter(|e| lex.schema().is_open_class(&e.category))
                        .map(|e| e.id.clone())
                        .collect()
                } else {
                    BTreeSet::new()
                };
                let e = lex.sample_excluding(&slot.category, &wanted, &exclude, rng).map_err(no_candidate)?;
                if let Some(n) = &slot.name {
                    env.bound.insert(n.clone(), Arc::clone(&e));
                }
                e
            }
        };
        for (f, v) in entry.features.iter() {
            let var = vars.var(leaf, f);
            vars.bind(var, v).map_err(|e| conflict(f, e))?;
        }
        let form_key = slot
            .form
            .iter()
            .filter_map(|pattern| interpolate(pattern, |f| vars.lookup(leaf, f)))
            .find(|key| entry.forms.contains_key(key))
            .ok_or_else(|| GrammarError::NoForm {
                template: template.id.clone(),
                entry: entry.id.clone(),
                patterns: slot.form.clone(),
            })?;
        let surface = entry.forms[&form_key].clone();
        tree.set_terminal(leaf, Terminal::Lexeme { entry: entry.id.clone(), form_key, surface });
    }

    for id in tree.ids().collect::<Vec<_>>() {
        tree.node_mut(id)?.features = vars.bundle(id);
    }
    for role in Role::ALL {
        tree.find_role(role)?;
    }
    debug_assert!(tree.depth() <= template.depth_bound);
    Ok(Expansion { tree, links })
}

fn label_of(symbol: &str) -> String {
    symbol.split('.').next().unwrap_or(symbol).to_string()
}

/// Substitute `{feature}` placeholders; `None` if any placeholder is unbound.
fn interpolate(pattern: &str, mut lookup: impl FnMut(&str) -> Option<String>) -> Option<String> {
    let mut out = String::new();
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}')? + start;
        out.push_str(&lookup(&rest[start + 1..end])?);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Some(out)
}
