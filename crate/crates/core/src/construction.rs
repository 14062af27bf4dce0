//! Tree-pattern construction rules (the CON section) and proper-noun
//! transliteration.
//!
//! A rule file holds one rule per logical line:
//!
//! ```text
//! [id[@priority]] nodes ; edges ; template
//! ```
//!
//! * nodes: `#n` or `#n:attr=value&attr=/regex/` where `attr` is one of
//!   `form`, `lemma`, `upos`, `xpos`, `deprel` or `feat:<Name>`. Regular
//!   expressions must match the whole field.
//! * edges: `#i>label>#j` (labeled parent), `#i>#j` (parent, any label),
//!   `#i<<#j` (precedes), `#i<#j` (immediately precedes) and `#i!>label`
//!   (has no child with that label). Labels may also be `/regex/`.
//! * template: free text with `{{#n.attr}}` placeholders.
//!
//! A trailing backslash continues a rule on the next line. Lines starting
//! with `#` not followed by a digit are comments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::conllu::{Sentence, Token};
use crate::prompt::{SectionKind, SectionText, CON_HEADER};

pub const DEFAULT_RULES: &str = include_str!("../data/rules.txt");
pub const DEFAULT_TRANSLITERATION: &str = include_str!("../data/transliteration.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: undeclared node #{node}")]
    UndeclaredNode { line: usize, node: usize },
    #[error("line {line}: bad regular expression: {message}")]
    BadRegex { line: usize, message: String },
    #[error("transliteration table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("match for rule `{found}` applied to rule `{expected}`")]
    ForeignMatch { expected: String, found: String },
}

fn syntax(line: usize, message: impl Into<String>) -> ConstructionError {
    ConstructionError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Form,
    Lemma,
    Upos,
    Xpos,
    Deprel,
    Feat(String),
}

impl Attribute {
    pub fn parse(s: &str) -> Option<Attribute> {
        Some(match s {
            "form" => Attribute::Form,
            "lemma" => Attribute::Lemma,
            "upos" => Attribute::Upos,
            "xpos" => Attribute::Xpos,
            "deprel" => Attribute::Deprel,
            _ => {
                let name = s.strip_prefix("feat:")?;
                if name.is_empty() {
                    return None;
                }
                Attribute::Feat(name.to_owned())
            }
        })
    }

    /// The attribute's value on a token; absent features read as "".
    pub fn value<'t>(&self, token: &'t Token) -> &'t str {
        match self {
            Attribute::Form => &token.form,
            Attribute::Lemma => &token.lemma,
            Attribute::Upos => &token.upos,
            Attribute::Xpos => &token.xpos,
            Attribute::Deprel => &token.deprel,
            Attribute::Feat(name) => token.feat(name).unwrap_or(""),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::Form => f.write_str("form"),
            Attribute::Lemma => f.write_str("lemma"),
            Attribute::Upos => f.write_str("upos"),
            Attribute::Xpos => f.write_str("xpos"),
            Attribute::Deprel => f.write_str("deprel"),
            Attribute::Feat(name) => write!(f, "feat:{name}"),
        }
    }
}

/// Exact string or whole-field regular expression.
#[derive(Clone, Debug)]
pub enum Matcher {
    Exact(String),
    Regex { source: String, compiled: Regex },
}

impl Matcher {
    pub fn regex(source: &str) -> Result<Matcher, regex::Error> {
        let compiled = Regex::new(&format!("^(?:{source})$"))?;
        Ok(Matcher::Regex {
            source: source.to_owned(),
            compiled,
        })
    }

    pub fn is_match(&self, value: &str) -> bool {
        match self {
            Matcher::Exact(s) => s == value,
            Matcher::Regex { compiled, .. } => compiled.is_match(value),
        }
    }
}

impl PartialEq for Matcher {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Matcher::Exact(a), Matcher::Exact(b)) => a == b,
            (Matcher::Regex { source: a, .. }, Matcher::Regex { source: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Eq for Matcher {}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Matcher::Exact(s) => f.write_str(s),
            Matcher::Regex { source, .. } => write!(f, "/{source}/"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeConstraint {
    pub node_ref: usize,
    pub tests: Vec<(Attribute, Matcher)>,
}

impl NodeConstraint {
    pub fn accepts(&self, token: &Token) -> bool {
        self.tests.iter().all(|(a, m)| m.is_match(a.value(token)))
    }
}

impl fmt::Display for NodeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.node_ref)?;
        for (i, (attr, m)) in self.tests.iter().enumerate() {
            f.write_str(if i == 0 { ":" } else { "&" })?;
            write!(f, "{attr}={m}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeConstraint {
    /// `to` is a dependent of `from`, optionally with a matching relation.
    ParentOf {
        from: usize,
        to: usize,
        label: Option<Matcher>,
    },
    /// `from` occurs somewhere before `to`.
    Precedes { from: usize, to: usize },
    /// `from` occurs directly before `to`.
    ImmediatelyPrecedes { from: usize, to: usize },
    /// `node` has no dependent whose relation matches `label`.
    LacksChild { node: usize, label: Matcher },
}

impl EdgeConstraint {
    pub fn refs(&self) -> Vec<usize> {
        match self {
            EdgeConstraint::ParentOf { from, to, .. }
            | EdgeConstraint::Precedes { from, to }
            | EdgeConstraint::ImmediatelyPrecedes { from, to } => vec![*from, *to],
            EdgeConstraint::LacksChild { node, .. } => vec![*node],
        }
    }

    /// Check the constraint given the bound tokens of its refs.
    fn holds(&self, sentence: &Sentence, bound: impl Fn(usize) -> usize) -> bool {
        match self {
            EdgeConstraint::ParentOf { from, to, label } => {
                let (h, d) = (bound(*from), bound(*to));
                let dep = &sentence.tokens[d - 1];
                dep.head == h && label.as_ref().is_none_or(|m| m.is_match(&dep.deprel))
            }
            EdgeConstraint::Precedes { from, to } => bound(*from) < bound(*to),
            EdgeConstraint::ImmediatelyPrecedes { from, to } => bound(*from) + 1 == bound(*to),
            EdgeConstraint::LacksChild { node, label } => {
                let id = bound(*node);
                !sentence
                    .tokens
                    .iter()
                    .any(|t| t.head == id && label.is_match(&t.deprel))
            }
        }
    }
}

impl fmt::Display for EdgeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeConstraint::ParentOf {
                from,
                to,
                label: Some(l),
            } => write!(f, "#{from}>{l}>#{to}"),
            EdgeConstraint::ParentOf {
                from,
                to,
                label: None,
            } => write!(f, "#{from}>#{to}"),
            EdgeConstraint::Precedes { from, to } => write!(f, "#{from}<<#{to}"),
            EdgeConstraint::ImmediatelyPrecedes { from, to } => write!(f, "#{from}<#{to}"),
            EdgeConstraint::LacksChild { node, label } => write!(f, "#{node}!>{label}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot { node: usize, attr: Attribute },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub rule_id: String,
    pub priority: i64,
    pub nodes: Vec<NodeConstraint>,
    pub edges: Vec<EdgeConstraint>,
    pub template: String,
    segments: Vec<Segment>,
}

impl Rule {
    pub fn node(&self, node_ref: usize) -> Option<&NodeConstraint> {
        self.nodes.iter().find(|n| n.node_ref == node_ref)
    }

    /// The placeholders used by the template, in order of appearance.
    pub fn placeholders(&self) -> Vec<(usize, Attribute)> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot { node, attr } => Some((*node, attr.clone())),
                Segment::Text(_) => None,
            })
            .collect()
    }
}

impl fmt::Display for Rule {
    /// Canonical single-line form; parses back to an equal rule.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.rule_id, self.priority)?;
        for n in &self.nodes {
            write!(f, " {n}")?;
        }
        f.write_str(" ;")?;
        for e in &self.edges {
            write!(f, " {e}")?;
        }
        write!(f, " ; {}", self.template)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    /// Rules ordered by priority, file order breaking ties.
    pub fn by_priority(&self) -> Vec<&Rule> {
        let mut v: Vec<&Rule> = self.rules.iter().collect();
        v.sort_by_key(|r| r.priority);
        v
    }

    pub fn starter() -> RuleSet {
        parse_rules(DEFAULT_RULES).expect("bundled rule pack parses")
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || (t.starts_with('#') && !t[1..].starts_with(|c: char| c.is_ascii_digit()))
}

/// Split `s` at characters satisfying `sep`, ignoring separators inside
/// `/regex/` values. A regex opens at a `/` directly after `=`, `>` or `!>`,
/// or at the start of a piece, and closes at the next unescaped `/`.
fn split_outside_regex(s: &str, sep: impl Fn(char) -> bool, limit: usize) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_regex = false;
    let mut escaped = false;
    let mut prev: Option<char> = None;
    for (i, c) in s.char_indices() {
        if in_regex {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '/' {
                in_regex = false;
            }
        } else if c == '/' && matches!(prev, None | Some('=') | Some('>')) || c == '/' && i == start {
            in_regex = true;
        } else if sep(c) && out.len() + 1 < limit {
            out.push(&s[start..i]);
            start = i + c.len_utf8();
            prev = None;
            continue;
        }
        prev = Some(c);
    }
    out.push(&s[start..]);
    out
}

fn parse_matcher(raw: &str, line: usize) -> Result<Matcher, ConstructionError> {
    if let Some(inner) = raw.strip_prefix('/') {
        let Some(src) = inner.strip_suffix('/') else {
            return Err(syntax(line, format!("unterminated regular expression `{raw}`")));
        };
        if src.is_empty() {
            return Err(syntax(line, "empty regular expression"));
        }
        Matcher::regex(src).map_err(|e| ConstructionError::BadRegex {
            line,
            message: e.to_string(),
        })
    } else if raw.is_empty() {
        Err(syntax(line, "empty value"))
    } else {
        Ok(Matcher::Exact(raw.to_owned()))
    }
}

fn parse_ref(s: &str, line: usize) -> Result<(usize, &str), ConstructionError> {
    let rest = s
        .strip_prefix('#')
        .ok_or_else(|| syntax(line, format!("expected node reference in `{s}`")))?;
    let end = rest
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(rest.len());
    let n: usize = rest[..end]
        .parse()
        .map_err(|_| syntax(line, format!("expected node number in `{s}`")))?;
    if n == 0 {
        return Err(syntax(line, "node references start at #1"));
    }
    Ok((n, &rest[end..]))
}

fn parse_node(decl: &str, line: usize) -> Result<NodeConstraint, ConstructionError> {
    let (node_ref, rest) = parse_ref(decl, line)?;
    let mut tests = Vec::new();
    if !rest.is_empty() {
        let body = rest
            .strip_prefix(':')
            .ok_or_else(|| syntax(line, format!("expected `:` after #{node_ref} in `{decl}`")))?;
        for test in split_outside_regex(body, |c| c == '&', usize::MAX) {
            let (attr, value) = test
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected attr=value in `{test}`")))?;
            let attr = Attribute::parse(attr)
                .ok_or_else(|| syntax(line, format!("unknown attribute `{attr}`")))?;
            tests.push((attr, parse_matcher(value, line)?));
        }
    }
    Ok(NodeConstraint { node_ref, tests })
}

fn parse_edge(decl: &str, line: usize) -> Result<EdgeConstraint, ConstructionError> {
    let (from, rest) = parse_ref(decl, line)?;
    let target = |s: &str| -> Result<usize, ConstructionError> {
        let (n, tail) = parse_ref(s, line)?;
        if !tail.is_empty() {
            return Err(syntax(line, format!("trailing characters in edge `{decl}`")));
        }
        Ok(n)
    };
    if let Some(r) = rest.strip_prefix("<<") {
        Ok(EdgeConstraint::Precedes { from, to: target(r)? })
    } else if let Some(r) = rest.strip_prefix('<') {
        Ok(EdgeConstraint::ImmediatelyPrecedes { from, to: target(r)? })
    } else if let Some(r) = rest.strip_prefix("!>") {
        Ok(EdgeConstraint::LacksChild {
            node: from,
            label: parse_matcher(r, line)?,
        })
    } else if let Some(r) = rest.strip_prefix('>') {
        if r.starts_with('#') {
            return Ok(EdgeConstraint::ParentOf {
                from,
                to: target(r)?,
                label: None,
            });
        }
        let cut = r
            .rfind(">#")
            .ok_or_else(|| syntax(line, format!("expected `>#n` at the end of `{decl}`")))?;
        Ok(EdgeConstraint::ParentOf {
            from,
            to: target(&r[cut + 1..])?,
            label: Some(parse_matcher(&r[..cut], line)?),
        })
    } else {
        Err(syntax(line, format!("unknown edge operator in `{decl}`")))
    }
}

fn parse_template(text: &str, line: usize) -> Result<Vec<Segment>, ConstructionError> {
    let mut segments = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        if open > 0 {
            segments.push(Segment::Text(rest[..open].to_owned()));
        }
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| syntax(line, "unterminated {{ placeholder"))?;
        let inner = &after[..close];
        let (node, tail) = parse_ref(inner, line)?;
        let attr = tail
            .strip_prefix('.')
            .and_then(Attribute::parse)
            .ok_or_else(|| syntax(line, format!("bad placeholder `{{{{{inner}}}}}`")))?;
        segments.push(Segment::Slot { node, attr });
        rest = &after[close + 2..];
    }
    if !rest.is_empty() {
        segments.push(Segment::Text(rest.to_owned()));
    }
    Ok(segments)
}

fn parse_rule(text: &str, line: usize, index: usize) -> Result<Rule, ConstructionError> {
    let parts = split_outside_regex(text, |c| c == ';', 3);
    if parts.len() != 3 {
        return Err(syntax(line, "expected `nodes ; edges ; template`"));
    }
    let mut decls: Vec<&str> = split_outside_regex(parts[0], char::is_whitespace, usize::MAX)
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect();

    let (mut rule_id, mut priority) = (format!("rule{}", index + 1), 0i64);
    if let Some(first) = decls.first() {
        if !first.starts_with('#') {
            let (id, prio) = match first.split_once('@') {
                Some((id, p)) => (
                    id,
                    p.parse()
                        .map_err(|_| syntax(line, format!("bad priority `{p}`")))?,
                ),
                None => (*first, 0),
            };
            if id.is_empty() {
                return Err(syntax(line, "empty rule id"));
            }
            rule_id = id.to_owned();
            priority = prio;
            decls.remove(0);
        }
    }

    if decls.is_empty() {
        return Err(syntax(line, "rule declares no nodes"));
    }
    let nodes = decls
        .iter()
        .map(|d| parse_node(d, line))
        .collect::<Result<Vec<_>, _>>()?;
    let mut declared = HashSet::new();
    for n in &nodes {
        if !declared.insert(n.node_ref) {
            return Err(syntax(line, format!("node #{} declared twice", n.node_ref)));
        }
    }

    let edges = split_outside_regex(parts[1], char::is_whitespace, usize::MAX)
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|d| parse_edge(d, line))
        .collect::<Result<Vec<_>, _>>()?;
    for e in &edges {
        let refs = e.refs();
        for r in &refs {
            if !declared.contains(r) {
                return Err(ConstructionError::UndeclaredNode { line, node: *r });
            }
        }
        if refs.len() == 2 && refs[0] == refs[1] {
            return Err(syntax(line, format!("edge `{e}` relates a node to itself")));
        }
    }

    let template = parts[2].trim().to_owned();
    if template.is_empty() {
        return Err(syntax(line, "empty template"));
    }
    let segments = parse_template(&template, line)?;
    for s in &segments {
        if let Segment::Slot { node, .. } = s {
            if !declared.contains(node) {
                return Err(ConstructionError::UndeclaredNode { line, node: *node });
            }
        }
    }

    Ok(Rule {
        rule_id,
        priority,
        nodes,
        edges,
        template,
        segments,
    })
}

/// Parse a rule file. Rules keep file order; errors carry the line on which
/// the offending rule starts.
pub fn parse_rules(text: &str) -> Result<RuleSet, ConstructionError> {
    let mut rules = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw.trim_end_matches('\r');
        if pending.is_none() && is_comment(raw) {
            continue;
        }
        let (continued, content) = match raw.trim_end().strip_suffix('\\') {
            Some(c) => (true, c),
            None => (false, raw),
        };
        let entry = pending.get_or_insert_with(|| (line_no, String::new()));
        if !entry.1.is_empty() {
            entry.1.push(' ');
        }
        entry.1.push_str(content.trim());
        if !continued {
            let (start, body) = pending.take().unwrap();
            let index = rules.len();
            rules.push(parse_rule(&body, start, index)?);
        }
    }
    if let Some((start, _)) = pending {
        return Err(syntax(start, "file ends inside a continued rule"));
    }
    let mut seen = HashSet::new();
    for r in &rules {
        if !seen.insert(r.rule_id.as_str()) {
            return Err(syntax(0, format!("duplicate rule id `{}`", r.rule_id)));
        }
    }
    Ok(RuleSet { rules })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Match {
    pub rule_id: String,
    /// Node ref → token id.
    pub bindings: BTreeMap<usize, usize>,
    pub sentence: String,
}

/// All injective node→token assignments satisfying the rule, in
/// lexicographic order of the bound token ids (taken in ascending node-ref
/// order).
pub fn match_rule(rule: &Rule, sentence: &Sentence) -> Vec<Match> {
    let mut order: Vec<&NodeConstraint> = rule.nodes.iter().collect();
    order.sort_by_key(|n| n.node_ref);
    let depth_of: HashMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(d, n)| (n.node_ref, d))
        .collect();

    // Each edge is checked once, as soon as its last endpoint is bound.
    let mut checks: Vec<Vec<&EdgeConstraint>> = vec![Vec::new(); order.len()];
    for e in &rule.edges {
        let d = e.refs().iter().map(|r| depth_of[r]).max().unwrap();
        checks[d].push(e);
    }
    let candidates: Vec<Vec<usize>> = order
        .iter()
        .map(|n| {
            sentence
                .tokens
                .iter()
                .filter(|t| n.accepts(t))
                .map(|t| t.id)
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut assigned = vec![0usize; order.len()];
    let mut used = vec![false; sentence.tokens.len() + 1];
    search(
        0,
        &order,
        &depth_of,
        &checks,
        &candidates,
        sentence,
        &mut assigned,
        &mut used,
        &mut |assigned| {
            out.push(Match {
                rule_id: rule.rule_id.clone(),
                bindings: order
                    .iter()
                    .zip(assigned)
                    .map(|(n, &t)| (n.node_ref, t))
                    .collect(),
                sentence: sentence.source_id.clone(),
            })
        },
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn search(
    depth: usize,
    order: &[&NodeConstraint],
    depth_of: &HashMap<usize, usize>,
    checks: &[Vec<&EdgeConstraint>],
    candidates: &[Vec<usize>],
    sentence: &Sentence,
    assigned: &mut Vec<usize>,
    used: &mut Vec<bool>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if depth == order.len() {
        emit(assigned);
        return;
    }
    for &t in &candidates[depth] {
        if used[t] {
            continue;
        }
        assigned[depth] = t;
        let ok = checks[depth]
            .iter()
            .all(|e| e.holds(sentence, |r| assigned[depth_of[&r]]));
        if ok {
            used[t] = true;
            search(
                depth + 1,
                order,
                depth_of,
                checks,
                candidates,
                sentence,
                assigned,
                used,
                emit,
            );
            used[t] = false;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instantiated {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Fill the rule's template from the tokens bound by `m`. An empty attribute
/// falls back to the token's form and records a warning.
pub fn instantiate_template(
    rule: &Rule,
    m: &Match,
    sentence: &Sentence,
) -> Result<Instantiated, ConstructionError> {
    if m.rule_id != rule.rule_id {
        return Err(ConstructionError::ForeignMatch {
            expected: rule.rule_id.clone(),
            found: m.rule_id.clone(),
        });
    }
    let mut text = String::new();
    let mut warnings = Vec::new();
    for seg in &rule.segments {
        match seg {
            Segment::Text(s) => text.push_str(s),
            Segment::Slot { node, attr } => {
                let token = m
                    .bindings
                    .get(node)
                    .and_then(|&id| sentence.token(id))
                    .ok_or_else(|| ConstructionError::ForeignMatch {
                        expected: rule.rule_id.clone(),
                        found: m.rule_id.clone(),
                    })?;
                let value = attr.value(token);
                if value.is_empty() {
                    warnings.push(format!(
                        "rule {}: token {} has no {attr}; using its form",
                        rule.rule_id, token.id
                    ));
                    text.push_str(&token.form);
                } else {
                    text.push_str(value);
                }
            }
        }
    }
    Ok(Instantiated { text, warnings })
}

/// Coptic→Latin mapping with greedy longest-match lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslitTable {
    map: HashMap<String, String>,
    longest_key: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transliteration {
    pub text: String,
    /// Characters without a table entry, passed through lowercased.
    pub unknown: Vec<char>,
}

impl TranslitTable {
    /// Parse a `coptic<TAB>latin` TSV with a header row. The Latin column
    /// may be empty (for combining marks that are dropped).
    pub fn parse(text: &str) -> Result<TranslitTable, ConstructionError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == "coptic\tlatin" => {}
            _ => {
                return Err(ConstructionError::Table {
                    line: 1,
                    message: "expected header `coptic<TAB>latin`".into(),
                })
            }
        }
        let mut map = HashMap::new();
        for (i, raw) in lines {
            let raw = raw.trim_end_matches('\r');
            if raw.is_empty() {
                continue;
            }
            let (k, v) = raw.split_once('\t').ok_or_else(|| ConstructionError::Table {
                line: i + 1,
                message: "expected two tab-separated columns".into(),
            })?;
            if k.is_empty() {
                return Err(ConstructionError::Table {
                    line: i + 1,
                    message: "empty source sequence".into(),
                });
            }
            if map.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(ConstructionError::Table {
                    line: i + 1,
                    message: format!("duplicate source sequence `{k}`"),
                });
            }
        }
        let longest_key = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Ok(TranslitTable { map, longest_key })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Upper bound `c` on output characters per input character.
    pub fn expansion_bound(&self) -> usize {
        let table = self
            .map
            .iter()
            .map(|(k, v)| v.chars().count().div_ceil(k.chars().count()))
            .max()
            .unwrap_or(0);
        // Lowercasing an unknown character yields at most three characters.
        table.max(3)
    }

    pub fn transliterate(&self, word: &str) -> Transliteration {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let mut text = String::new();
        let mut unknown = Vec::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            let max = self.longest_key.min(chars.len() - i);
            for len in (1..=max).rev() {
                let start = chars[i].0;
                let end = chars.get(i + len).map_or(word.len(), |c| c.0);
                if let Some(v) = self.map.get(&word[start..end]) {
                    text.push_str(v);
                    i += len;
                    continue 'outer;
                }
            }
            let c = chars[i].1;
            unknown.push(c);
            text.extend(c.to_lowercase());
            i += 1;
        }
        Transliteration { text, unknown }
    }
}

impl Default for TranslitTable {
    fn default() -> Self {
        TranslitTable::parse(DEFAULT_TRANSLITERATION).expect("bundled transliteration table parses")
    }
}

pub fn propn_line(form: &str, latin: &str) -> String {
    format!("The word {form} is a name, transliterated in Latin characters as {latin}.")
}

/// One instruction line per PROPN token, plus warnings for unmapped characters.
pub fn transliterate_propn_with_warnings(
    sentence: &Sentence,
    table: &TranslitTable,
) -> (Vec<String>, Vec<String>) {
    let mut lines = Vec::new();
    let mut warnings = Vec::new();
    for t in sentence.tokens.iter().filter(|t| t.upos == "PROPN") {
        let tr = table.transliterate(&t.form);
        if !tr.unknown.is_empty() {
            let chars: String = tr.unknown.iter().collect();
            warnings.push(format!(
                "token {} `{}`: no transliteration for {:?}",
                t.id, t.form, chars
            ));
        }
        lines.push(propn_line(&t.form, &tr.text));
    }
    (lines, warnings)
}

pub fn transliterate_propn(sentence: &Sentence, table: &TranslitTable) -> Vec<String> {
    transliterate_propn_with_warnings(sentence, table).0
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConOutput {
    pub section: SectionText,
    pub matches: Vec<Match>,
    pub warnings: Vec<String>,
}

/// Build the CON section: instructions ordered by rule priority, file order
/// and match order, then transliteration lines, one per line. Repeated
/// identical instructions are emitted once.
pub fn verbalize_constructions_detailed(
    sentence: &Sentence,
    rules: &RuleSet,
    table: &TranslitTable,
) -> Result<ConOutput, ConstructionError> {
    let mut lines: Vec<String> = Vec::new();
    let mut matches = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for rule in rules.by_priority() {
        for m in match_rule(rule, sentence) {
            let inst = instantiate_template(rule, &m, sentence)?;
            warnings.extend(inst.warnings);
            if seen.insert(inst.text.clone()) {
                lines.push(inst.text);
            }
            matches.push(m);
        }
    }
    let (names, w) = transliterate_propn_with_warnings(sentence, table);
    warnings.extend(w);
    lines.extend(names);
    let section = if lines.is_empty() {
        SectionText::empty(SectionKind::Con)
    } else {
        SectionText {
            kind: SectionKind::Con,
            header: CON_HEADER.to_owned(),
            body: lines.join("\n"),
        }
    };
    Ok(ConOutput {
        section,
        matches,
        warnings,
    })
}

pub fn verbalize_constructions(
    sentence: &Sentence,
    rules: &RuleSet,
    table: &TranslitTable,
) -> Result<SectionText, ConstructionError> {
    Ok(verbalize_constructions_detailed(sentence, rules, table)?.section)
}
