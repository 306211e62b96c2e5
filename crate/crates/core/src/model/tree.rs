//! Common-noise scenario trees.
//!
//! A node at depth `n` is a realized noise prefix `(ξ_0, …, ξ_{n-1})`; the
//! edge into it carries the symbol `ξ_{n-1}` and its conditional probability.
//! In finite-horizon mode a tree has `N + 2` levels (depths `0..=N+1`): the
//! per-step tables live on depths `0..=N`, and the edges leaving depth `n`
//! carry the noise that acts on step `n`.
//!
//! Nodes are stored level by level (breadth first). The public node id used in
//! files is the depth-first preorder index, matching the order nodes appear in
//! a nested model description.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise symbol carried by a tree edge.
pub type Symbol = u32;

/// The symbol used when a game has no common noise.
pub const UNIT_SYMBOL: Symbol = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Symbol on the edge from the parent (unused at the root).
    pub symbol: Symbol,
    /// Conditional probability `P(ξ | parent)`.
    pub cond_prob: f64,
    /// Chain-rule probability of the whole prefix.
    pub prob: f64,
    pub children: Vec<usize>,
    pub dfs_id: usize,
}

/// Nested node description, as found in model files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseNodeSpec {
    #[serde(default)]
    pub symbol: Symbol,
    #[serde(default = "one")]
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NoiseNodeSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTree {
    nodes: Vec<TreeNode>,
    level_start: Vec<usize>,
    dfs_to_bfs: Vec<usize>,
}

impl NoiseTree {
    /// A chain of `depth` edges, each with probability one.
    pub fn degenerate(depth: usize) -> Self {
        Self::degenerate_with_symbols(depth, |_| UNIT_SYMBOL)
    }

    /// A chain whose edge leaving depth `n` carries `symbol(n)`.
    pub fn degenerate_with_symbols(depth: usize, symbol: impl Fn(usize) -> Symbol) -> Self {
        Self::build(depth, usize::MAX, |path| vec![(symbol(path.len()), 1.0)])
            .expect("a chain never exceeds the node limit")
    }

    /// Grows a tree level by level. `branch` receives the symbol path of a
    /// node at depth `< depth` and returns its `(symbol, conditional prob)`
    /// children. Fails once the node count would exceed `node_limit`.
    pub fn build(
        depth: usize,
        node_limit: usize,
        mut branch: impl FnMut(&[Symbol]) -> Vec<(Symbol, f64)>,
    ) -> Result<Self> {
        let mut nodes = vec![TreeNode {
            parent: None,
            depth: 0,
            symbol: UNIT_SYMBOL,
            cond_prob: 1.0,
            prob: 1.0,
            children: Vec::new(),
            dfs_id: 0,
        }];
        let mut paths: Vec<Vec<Symbol>> = vec![Vec::new()];
        let mut level_start = vec![0, 1];
        for d in 0..depth {
            let range = level_start[d]..level_start[d + 1];
            for parent in range {
                let kids = branch(&paths[parent]);
                for (symbol, cond_prob) in kids {
                    if nodes.len() >= node_limit {
                        return Err(Error::TreeTooLarge {
                            nodes: nodes.len() + 1,
                            limit: node_limit,
                        });
                    }
                    let id = nodes.len();
                    let prob = nodes[parent].prob * cond_prob;
                    nodes.push(TreeNode {
                        parent: Some(parent),
                        depth: d + 1,
                        symbol,
                        cond_prob,
                        prob,
                        children: Vec::new(),
                        dfs_id: 0,
                    });
                    nodes[parent].children.push(id);
                    let mut path = paths[parent].clone();
                    path.push(symbol);
                    paths.push(path);
                }
            }
            level_start.push(nodes.len());
        }
        Ok(Self::finish(nodes, level_start))
    }

    /// Builds from a nested description; child order is preserved, so the
    /// depth-first ids follow the order of appearance.
    pub fn from_spec(root: &NoiseNodeSpec) -> Self {
        let mut nodes = vec![TreeNode {
            parent: None,
            depth: 0,
            symbol: UNIT_SYMBOL,
            cond_prob: 1.0,
            prob: 1.0,
            children: Vec::new(),
            dfs_id: 0,
        }];
        let mut frontier: Vec<(usize, &NoiseNodeSpec)> = vec![(0, root)];
        let mut level_start = vec![0, 1];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (id, spec) in frontier {
                for child in &spec.children {
                    let cid = nodes.len();
                    let prob = nodes[id].prob * child.prob;
                    nodes.push(TreeNode {
                        parent: Some(id),
                        depth: nodes[id].depth + 1,
                        symbol: child.symbol,
                        cond_prob: child.prob,
                        prob,
                        children: Vec::new(),
                        dfs_id: 0,
                    });
                    nodes[id].children.push(cid);
                    next.push((cid, child));
                }
            }
            if !next.is_empty() {
                level_start.push(nodes.len());
            }
            frontier = next;
        }
        Self::finish(nodes, level_start)
    }

    fn finish(mut nodes: Vec<TreeNode>, level_start: Vec<usize>) -> Self {
        let mut dfs_to_bfs = Vec::with_capacity(nodes.len());
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            nodes[id].dfs_id = dfs_to_bfs.len();
            dfs_to_bfs.push(id);
            stack.extend(nodes[id].children.iter().rev());
        }
        Self {
            nodes,
            level_start,
            dfs_to_bfs,
        }
    }

    pub fn to_spec(&self) -> NoiseNodeSpec {
        fn rec(tree: &NoiseTree, id: usize) -> NoiseNodeSpec {
            let node = &tree.nodes[id];
            NoiseNodeSpec {
                symbol: node.symbol,
                prob: node.cond_prob,
                children: node.children.iter().map(|&c| rec(tree, c)).collect(),
            }
        }
        rec(self, 0)
    }

    /// Deepest level present.
    pub fn depth(&self) -> usize {
        self.level_start.len() - 2
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of nodes at depths `0..=depth`.
    pub fn num_nodes_through(&self, depth: usize) -> usize {
        self.level_start[(depth + 1).min(self.level_start.len() - 1)]
    }

    /// Node indices at `depth`, contiguous in storage order.
    pub fn level(&self, depth: usize) -> Range<usize> {
        if depth > self.depth() {
            return 0..0;
        }
        self.level_start[depth]..self.level_start[depth + 1]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn dfs_id(&self, id: usize) -> usize {
        self.nodes[id].dfs_id
    }

    pub fn from_dfs_id(&self, dfs: usize) -> Option<usize> {
        self.dfs_to_bfs.get(dfs).copied()
    }

    /// Ancestor of `id` at `depth` (the node itself when depths agree).
    pub fn ancestor_at(&self, mut id: usize, depth: usize) -> Option<usize> {
        if depth > self.nodes[id].depth {
            return None;
        }
        while self.nodes[id].depth > depth {
            id = self.nodes[id].parent?;
        }
        Some(id)
    }

    /// Symbols on the path from the root to `id`.
    pub fn path(&self, mut id: usize) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(self.nodes[id].depth);
        while let Some(p) = self.nodes[id].parent {
            out.push(self.nodes[id].symbol);
            id = p;
        }
        out.reverse();
        out
    }

    /// Every internal node has exactly one child with probability one.
    pub fn is_degenerate(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.children.len() <= 1 && (n.parent.is_none() || n.cond_prob == 1.0))
    }

    /// All nodes at depth `n` with their chain-rule probabilities.
    pub fn enumerate_scenarios(&self, depth: usize) -> Result<Vec<(usize, f64)>> {
        if depth > self.depth() {
            return Err(Error::DepthOutOfRange {
                requested: depth,
                depth: self.depth(),
            });
        }
        Ok(self.level(depth).map(|id| (id, self.nodes[id].prob)).collect())
    }

    /// Structural problems, as `(dfs node id, message)` pairs.
    pub fn violations(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        let depth = self.depth();
        for node in &self.nodes {
            if node.parent.is_some() && !(node.cond_prob >= 0.0) {
                out.push((
                    node.dfs_id,
                    format!("edge probability {} is negative or NaN", node.cond_prob),
                ));
            }
            if node.children.is_empty() {
                if node.depth != depth {
                    out.push((
                        node.dfs_id,
                        format!("leaf at depth {} but tree depth is {}", node.depth, depth),
                    ));
                }
            } else {
                let total: f64 = node
                    .children
                    .iter()
                    .map(|&c| self.nodes[c].cond_prob)
                    .sum();
                if (total - 1.0).abs() > 1e-12 {
                    out.push((
                        node.dfs_id,
                        format!("outgoing edge probabilities sum to {total}"),
                    ));
                }
            }
        }
        for d in 0..=depth {
            let total: f64 = self.level(d).map(|id| self.nodes[id].prob).sum();
            if (total - 1.0).abs() > 1e-10 {
                out.push((
                    self.nodes[self.level_start[d]].dfs_id,
                    format!("probabilities at depth {d} sum to {total}"),
                ));
            }
        }
        out
    }
}
