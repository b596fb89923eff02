use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use super::{CorpusError, ParsedSentence};

pub const X_PLACEHOLDER: &str = "<X>";
pub const Y_PLACEHOLDER: &str = "<Y>";

/// How the traversal leaves a node, or the satellite side for satellites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
    End,
    SatLeft,
    SatRight,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Up,
        Direction::Down,
        Direction::End,
        Direction::SatLeft,
        Direction::SatRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
            Direction::End => "END",
            Direction::SatLeft => "SAT_LEFT",
            Direction::SatRight => "SAT_RIGHT",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::SatLeft => Direction::SatRight,
            Direction::SatRight => Direction::SatLeft,
            Direction::End => Direction::End,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown direction `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathNode {
    pub lemma: String,
    pub pos: String,
    pub dep: String,
    pub dir: Direction,
}

impl PathNode {
    pub fn new(lemma: &str, pos: &str, dep: &str, dir: Direction) -> Self {
        PathNode {
            lemma: lemma.to_string(),
            pos: pos.to_string(),
            dep: dep.to_string(),
            dir,
        }
    }
}

impl fmt::Display for PathNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.lemma, self.pos, self.dep, self.dir)
    }
}

/// Node sequence from the `<X>` token to the `<Y>` token, optionally with
/// one satellite before and/or after. Serialised as space-separated
/// `lemma/POS/dep/DIR` tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyPath {
    nodes: Vec<PathNode>,
}

impl DependencyPath {
    pub fn nodes(&self) -> &[PathNode] {
        &self.nodes
    }

    /// Edges including satellite edges.
    pub fn edge_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks placeholder and direction structure.
    pub fn from_nodes(nodes: Vec<PathNode>) -> Result<Self, String> {
        let count = |p: &str| nodes.iter().filter(|n| n.lemma == p).count();
        if count(X_PLACEHOLDER) != 1 || count(Y_PLACEHOLDER) != 1 {
            return Err("path needs exactly one <X> and one <Y>".into());
        }
        let core: Vec<&PathNode> = nodes
            .iter()
            .filter(|n| !matches!(n.dir, Direction::SatLeft | Direction::SatRight))
            .collect();
        let sat_ok = nodes.iter().enumerate().all(|(i, n)| match n.dir {
            Direction::SatLeft => i == 0,
            Direction::SatRight => i + 1 == nodes.len(),
            _ => true,
        });
        match core.split_last() {
            Some((last, rest))
                if last.dir == Direction::End && rest.iter().all(|n| n.dir != Direction::End) && sat_ok =>
            {
                Ok(DependencyPath { nodes })
            }
            _ => Err("malformed direction sequence".into()),
        }
    }

    /// The same route walked from the other end: node order reversed,
    /// UP/DOWN and satellite sides swapped, placeholders swapped.
    pub fn reversed(&self) -> Self {
        let core: Vec<&PathNode> = self
            .nodes
            .iter()
            .filter(|n| !matches!(n.dir, Direction::SatLeft | Direction::SatRight))
            .collect();
        let swap = |l: &str| match l {
            X_PLACEHOLDER => Y_PLACEHOLDER.to_string(),
            Y_PLACEHOLDER => X_PLACEHOLDER.to_string(),
            other => other.to_string(),
        };
        let mut out = Vec::with_capacity(self.nodes.len());
        if let Some(sat) = self.nodes.last().filter(|n| n.dir == Direction::SatRight) {
            out.push(PathNode {
                dir: Direction::SatLeft,
                ..sat.clone()
            });
        }
        let m = core.len();
        for k in (0..m).rev() {
            let n = core[k];
            // the move out of node k+1 towards k is the inverse of k → k+1
            let dir = if k == 0 {
                Direction::End
            } else {
                core[k - 1].dir.flipped()
            };
            out.push(PathNode {
                lemma: swap(&n.lemma),
                dir,
                ..n.clone()
            });
        }
        if let Some(sat) = self.nodes.first().filter(|n| n.dir == Direction::SatLeft) {
            out.push(PathNode {
                dir: Direction::SatRight,
                ..sat.clone()
            });
        }
        DependencyPath { nodes: out }
    }
}

impl fmt::Display for DependencyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

impl FromStr for DependencyPath {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        let bad = |reason: String| CorpusError::BadPath {
            text: s.to_string(),
            reason,
        };
        let mut nodes = Vec::new();
        for tok in s.split(' ') {
            let fields: Vec<&str> = tok.split('/').collect();
            if fields.len() != 4 {
                return Err(bad(format!("node `{tok}` has {} fields, expected 4", fields.len())));
            }
            if fields[..3].iter().any(|f| f.is_empty()) {
                return Err(bad(format!("node `{tok}` has an empty field")));
            }
            let dir = fields[3].parse().map_err(bad)?;
            nodes.push(PathNode::new(fields[0], fields[1], fields[2], dir));
        }
        DependencyPath::from_nodes(nodes).map_err(bad)
    }
}

/// Makes a corpus field safe for the slash/space serialisation.
fn clean_field(s: &str) -> String {
    let s: String = s
        .chars()
        .map(|c| if c == '/' || c.is_whitespace() { '-' } else { c })
        .collect();
    if s.is_empty() {
        "_".to_string()
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractOptions {
    pub max_edges: usize,
    pub satellites: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            max_edges: 8,
            satellites: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathError {
    SameToken,
    OutOfRange,
    /// No route between the tokens (malformed tree).
    Disconnected,
}

/// Token `i` followed by its ancestors up to the root.
fn ancestors(sentence: &ParsedSentence, i: usize) -> Option<Vec<usize>> {
    let mut chain = vec![i];
    let mut cur = i;
    while let Some(p) = sentence.parent(cur) {
        if chain.len() > sentence.len() {
            return None;
        }
        chain.push(p);
        cur = p;
    }
    Some(chain)
}

/// Token indices along the tree route from `i` to `j`, both included.
fn route(sentence: &ParsedSentence, i: usize, j: usize) -> Result<Vec<usize>, PathError> {
    let n = sentence.len();
    if i >= n || j >= n {
        return Err(PathError::OutOfRange);
    }
    if i == j {
        return Err(PathError::SameToken);
    }
    let up = ancestors(sentence, i).ok_or(PathError::Disconnected)?;
    let down = ancestors(sentence, j).ok_or(PathError::Disconnected)?;
    let down_set: HashSet<usize> = down.iter().copied().collect();
    let lca_pos = up
        .iter()
        .position(|t| down_set.contains(t))
        .ok_or(PathError::Disconnected)?;
    let lca = up[lca_pos];
    let mut nodes: Vec<usize> = up[..=lca_pos].to_vec();
    let lca_in_down = down.iter().position(|&t| t == lca).unwrap();
    nodes.extend(down[..lca_in_down].iter().rev());
    Ok(nodes)
}

fn node_for(sentence: &ParsedSentence, t: usize, lemma: Option<&str>, dir: Direction) -> PathNode {
    let tok = &sentence.tokens()[t];
    let lemma = match lemma {
        Some(l) => l.to_string(),
        None => clean_field(&tok.lemma.to_lowercase()),
    };
    PathNode {
        lemma,
        pos: clean_field(&tok.pos),
        dep: clean_field(&tok.deprel),
        dir,
    }
}

fn core_nodes(sentence: &ParsedSentence, route: &[usize], i: usize, j: usize) -> Vec<PathNode> {
    route
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let dir = match route.get(k + 1) {
                None => Direction::End,
                Some(&next) if sentence.parent(t) == Some(next) => Direction::Up,
                Some(_) => Direction::Down,
            };
            let lemma = if t == i {
                Some(X_PLACEHOLDER)
            } else if t == j {
                Some(Y_PLACEHOLDER)
            } else {
                None
            };
            node_for(sentence, t, lemma, dir)
        })
        .collect()
}

/// The tree path between tokens `i` (→ `<X>`) and `j` (→ `<Y>`), or `None`
/// when it has more than `max_edges` edges.
pub fn extract_path(
    sentence: &ParsedSentence,
    i: usize,
    j: usize,
    max_edges: usize,
) -> Result<Option<DependencyPath>, PathError> {
    let route = route(sentence, i, j)?;
    if route.len() - 1 > max_edges {
        return Ok(None);
    }
    Ok(Some(DependencyPath {
        nodes: core_nodes(sentence, &route, i, j),
    }))
}

/// Dependent of `endpoint` off the route, closest in linear order (left
/// wins ties).
fn satellite(sentence: &ParsedSentence, endpoint: usize, on_route: &HashSet<usize>) -> Option<usize> {
    sentence
        .children(endpoint)
        .filter(|c| !on_route.contains(c))
        .min_by_key(|&c| (c.abs_diff(endpoint), c))
}

/// The core path plus, when enabled, the variants with a left satellite
/// (a dependent of `i`), a right satellite (a dependent of `j`), and both.
/// Variants over the edge budget are omitted.
pub fn extract_paths(
    sentence: &ParsedSentence,
    i: usize,
    j: usize,
    opts: &ExtractOptions,
) -> Result<Vec<DependencyPath>, PathError> {
    let route = route(sentence, i, j)?;
    if route.len() - 1 > opts.max_edges {
        return Ok(Vec::new());
    }
    let core = core_nodes(sentence, &route, i, j);
    let mut out = vec![DependencyPath { nodes: core.clone() }];
    if !opts.satellites {
        return Ok(out);
    }
    let on_route: HashSet<usize> = route.iter().copied().collect();
    let left = satellite(sentence, i, &on_route).map(|t| node_for(sentence, t, None, Direction::SatLeft));
    let right = satellite(sentence, j, &on_route).map(|t| node_for(sentence, t, None, Direction::SatRight));
    let variants = [(left.clone(), None), (None, right.clone()), (left, right)];
    for (l, r) in variants {
        if l.is_none() && r.is_none() {
            continue;
        }
        let extra = l.is_some() as usize + r.is_some() as usize;
        if core.len() - 1 + extra > opts.max_edges {
            continue;
        }
        let mut nodes = Vec::with_capacity(core.len() + extra);
        nodes.extend(l);
        nodes.extend(core.iter().cloned());
        nodes.extend(r);
        let p = DependencyPath { nodes };
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}
