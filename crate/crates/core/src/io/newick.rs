//! Newick reader and writer.
//!
//! Numeric internal-node labels are read as clade supports. When any of them
//! exceeds 1 the whole tree is taken to use the bootstrap-percent convention
//! and every support is divided by 100.

use std::fmt::Write as _;

use thiserror::Error;

use crate::phylo::{Node, NodeId, PhyloTree, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum NewickError {
    #[error("empty Newick input")]
    Empty,
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParentheses(usize),
    #[error("unexpected character {ch:?} at byte {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("missing terminating ';'")]
    MissingSemicolon,
    #[error("trailing characters after ';' at byte {0}")]
    TrailingGarbage(usize),
    #[error("cannot parse branch length {0:?}")]
    BadNumber(String),
    #[error("negative branch length {0}")]
    NegativeBranchLength(f64),
    #[error("duplicate tip label {0}")]
    DuplicateTipLabel(String),
    #[error("unterminated quoted label or comment")]
    Unterminated,
    #[error(transparent)]
    Tree(TreeError),
}

impl From<TreeError> for NewickError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::DuplicateTipLabel(l) => NewickError::DuplicateTipLabel(l),
            TreeError::NegativeBranchLength(v) => NewickError::NegativeBranchLength(v),
            other => NewickError::Tree(other),
        }
    }
}

/// How numeric internal labels were interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportScale {
    /// No numeric internal labels.
    Absent,
    /// Values already in [0, 1] (posterior probabilities).
    Probability,
    /// Values rescaled from percentages.
    Percent,
}

#[derive(Debug, Clone)]
pub struct ParsedNewick {
    pub tree: PhyloTree,
    pub support_scale: SupportScale,
}

pub fn parse_newick(text: &str) -> Result<PhyloTree, NewickError> {
    parse_newick_detailed(text).map(|p| p.tree)
}

pub fn parse_newick_detailed(text: &str) -> Result<ParsedNewick, NewickError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        text,
        pos: 0,
    };
    p.skip_insignificant()?;
    if p.at_end() {
        return Err(NewickError::Empty);
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut raw_support: Vec<Option<f64>> = Vec::new();
    let mut open: Vec<NodeId> = Vec::new();
    let mut missing = 0usize;
    let mut expect_subtree = true;

    let new_node = |nodes: &mut Vec<Node>, raw: &mut Vec<Option<f64>>, parent: Option<NodeId>| {
        let id = nodes.len();
        nodes.push(Node::new(parent));
        raw.push(None);
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        id
    };

    loop {
        p.skip_insignificant()?;
        let pos = p.pos;
        let c = p.peek();
        if expect_subtree {
            match c {
                Some(b'(') => {
                    p.pos += 1;
                    let id = new_node(&mut nodes, &mut raw_support, open.last().copied());
                    open.push(id);
                }
                Some(b';') | None if !open.is_empty() => {
                    return Err(NewickError::UnbalancedParentheses(pos))
                }
                Some(b')') if open.is_empty() => return Err(NewickError::UnbalancedParentheses(pos)),
                _ => {
                    let id = new_node(&mut nodes, &mut raw_support, open.last().copied());
                    nodes[id].label = p.label()?;
                    if !p.branch_length(&mut nodes[id])? && nodes[id].parent.is_some() {
                        missing += 1;
                    }
                    expect_subtree = false;
                }
            }
        } else {
            match c {
                Some(b',') => {
                    if open.is_empty() {
                        return Err(NewickError::UnexpectedChar { ch: ',', pos });
                    }
                    p.pos += 1;
                    expect_subtree = true;
                }
                Some(b')') => {
                    let id = open.pop().ok_or(NewickError::UnbalancedParentheses(pos))?;
                    p.pos += 1;
                    if let Some(label) = p.label()? {
                        match label.parse::<f64>() {
                            Ok(v) if v.is_finite() => raw_support[id] = Some(v),
                            _ => nodes[id].label = Some(label),
                        }
                    }
                    if !p.branch_length(&mut nodes[id])? && nodes[id].parent.is_some() {
                        missing += 1;
                    }
                }
                Some(b';') => {
                    if !open.is_empty() {
                        return Err(NewickError::UnbalancedParentheses(pos));
                    }
                    p.pos += 1;
                    break;
                }
                None => {
                    return Err(if open.is_empty() {
                        NewickError::MissingSemicolon
                    } else {
                        NewickError::UnbalancedParentheses(pos)
                    })
                }
                Some(other) => {
                    let ch = p.text[pos..].chars().next().unwrap_or(other as char);
                    return Err(NewickError::UnexpectedChar { ch, pos });
                }
            }
        }
    }

    p.skip_insignificant()?;
    if !p.at_end() {
        return Err(NewickError::TrailingGarbage(p.pos));
    }

    let numeric: Vec<f64> = raw_support.iter().flatten().copied().collect();
    let support_scale = if numeric.is_empty() {
        SupportScale::Absent
    } else if numeric.iter().any(|&v| v > 1.0) {
        SupportScale::Percent
    } else {
        SupportScale::Probability
    };
    let divisor = if support_scale == SupportScale::Percent { 100.0 } else { 1.0 };
    for (node, raw) in nodes.iter_mut().zip(&raw_support) {
        if let Some(v) = raw {
            let s = v / divisor;
            if !(0.0..=1.0).contains(&s) {
                return Err(TreeError::InvalidSupport(*v).into());
            }
            node.support = Some(s);
        }
    }
    if support_scale == SupportScale::Percent {
        log::info!("internal labels read as bootstrap percentages and rescaled to [0, 1]");
    }
    if missing > 0 {
        log::warn!("{missing} edges had no branch length; set to 0");
    }

    let mut tree = PhyloTree::from_nodes(nodes, 0)?;
    tree.missing_lengths = missing;
    Ok(ParsedNewick {
        tree,
        support_scale,
    })
}

struct Parser<'a> {
    bytes: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    /// Skips whitespace and bracketed comments.
    fn skip_insignificant(&mut self) -> Result<(), NewickError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let close = self.bytes[self.pos..]
                        .iter()
                        .position(|&c| c == b']')
                        .ok_or(NewickError::Unterminated)?;
                    self.pos += close + 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>, NewickError> {
        self.skip_insignificant()?;
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                let rest = &self.text[self.pos..];
                let q = rest.find('\'').ok_or(NewickError::Unterminated)?;
                out.push_str(&rest[..q]);
                self.pos += q + 1;
                if self.peek() == Some(b'\'') {
                    out.push('\'');
                    self.pos += 1;
                } else {
                    return Ok(Some(out));
                }
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || b"():,;[".contains(&c) {
                break;
            }
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.text[start..self.pos].to_string()))
    }

    /// Reads an optional `:length`; returns whether one was present.
    fn branch_length(&mut self, node: &mut Node) -> Result<bool, NewickError> {
        self.skip_insignificant()?;
        if self.peek() != Some(b':') {
            return Ok(false);
        }
        self.pos += 1;
        self.skip_insignificant()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let raw = &self.text[start..self.pos];
        let v: f64 = raw
            .parse()
            .map_err(|_| NewickError::BadNumber(raw.to_string()))?;
        if !v.is_finite() {
            return Err(NewickError::BadNumber(raw.to_string()));
        }
        if v < 0.0 {
            return Err(NewickError::NegativeBranchLength(v));
        }
        node.branch_length = v;
        Ok(true)
    }
}

fn write_label(out: &mut String, label: &str) {
    let needs_quotes = label.is_empty()
        || label
            .chars()
            .any(|c| c.is_whitespace() || "():,;[]'".contains(c));
    if needs_quotes {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

/// Serializes a tree. Supports are written as internal labels on the [0, 1]
/// scale; every non-root edge carries its length.
pub fn write_newick(tree: &PhyloTree) -> String {
    let mut out = String::new();
    // (node, next child index)
    let mut stack: Vec<(NodeId, usize)> = vec![(tree.root(), 0)];
    while let Some((v, next)) = stack.pop() {
        let children = tree.children(v);
        if children.is_empty() {
            write_label(&mut out, tree.tip_label(v));
            write_length(&mut out, tree, v);
            continue;
        }
        if next == 0 {
            out.push('(');
        } else if next < children.len() {
            out.push(',');
        }
        if next < children.len() {
            stack.push((v, next + 1));
            stack.push((children[next], 0));
        } else {
            out.push(')');
            let node = tree.node(v);
            if let Some(s) = node.support {
                let _ = write!(out, "{s}");
            } else if let Some(label) = &node.label {
                write_label(&mut out, label);
            }
            write_length(&mut out, tree, v);
        }
    }
    out.push(';');
    out
}

fn write_length(out: &mut String, tree: &PhyloTree, v: NodeId) {
    let len = tree.branch_length(v);
    if v != tree.root() || len != 0.0 {
        let _ = write!(out, ":{len}");
    }
}
