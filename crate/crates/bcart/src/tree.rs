//! Binary decision trees over threshold rules: construction on data, routing,
//! the depth-based tree prior, Metropolis–Hastings proposal moves, partition
//! superimposition and the adjusted Rand index.
//!
//! Rules send a record left iff its value is `≤ threshold`.  For categorical
//! covariates the value is the node's target-encoded score of the record's
//! level, so every split is one-dimensional.  Nodes are stored in preorder;
//! leaf ids are dense in that order.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::level_scores;
use crate::model::{FitData, LeafScore};

/// Tree-prior hyperparameters: a node at depth `d` splits with probability
/// `γ(1+d)^{−ρ}`.  `max_depth` optionally truncates the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub rho: f64,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl HyperParams {
    pub fn new(gamma: f64, rho: f64) -> Self {
        Self { gamma, rho, max_depth: None }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(format!("need 0 < γ ≤ 1 and ρ ≥ 0, got γ={} ρ={}", self.gamma, self.rho));
        }
        Ok(())
    }
}

pub fn depth_split_prob(d: usize, hp: &HyperParams) -> f64 {
    if hp.max_depth.is_some_and(|m| d >= m) {
        return 0.0;
    }
    hp.gamma * (1.0 + d as f64).powf(-hp.rho)
}

/// Minimum child sizes for a rule to be admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConstraints {
    pub min_leaf: usize,
    pub min_positive: usize,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        Self { min_leaf: 10, min_positive: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub cov: usize,
    pub threshold: f64,
}

/// Admissible thresholds at a node, per covariate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSpace {
    pub thresholds: Vec<Vec<f64>>,
}

impl RuleSpace {
    /// Total number of admissible rules.
    pub fn k(&self) -> usize {
        self.thresholds.iter().map(Vec::len).sum()
    }

    /// Covariates with at least one admissible rule.
    pub fn covariates(&self) -> Vec<usize> {
        (0..self.thresholds.len()).filter(|&j| !self.thresholds[j].is_empty()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub rule: DecisionRule,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    pub parent: Option<usize>,
    pub split: Option<Split>,
    /// 1-based leaf id, dense in preorder.
    pub leaf_id: Option<usize>,
    /// Level scores per covariate (empty for numeric covariates).
    pub enc: Arc<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub rows: Arc<Vec<u32>>,
    #[serde(skip)]
    pub space: Option<Arc<RuleSpace>>,
    #[serde(skip)]
    pub score: Option<LeafScore>,
    #[serde(skip)]
    pub draw: Option<[f64; 2]>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn k(&self) -> usize {
        self.space.as_ref().map_or(0, |s| s.k())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Level counts per covariate; `None` for numeric covariates.
    pub n_levels: Vec<Option<usize>>,
    pub constraints: SplitConstraints,
}

fn node_value(data: &FitData, enc: &[Vec<f64>], j: usize, i: usize) -> f64 {
    match data.n_levels[j] {
        None => data.x[j][i],
        Some(_) => enc[j][data.x[j][i] as usize],
    }
}

fn encode(data: &FitData, rows: &[u32], parent: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..data.p())
        .map(|j| match data.n_levels[j] {
            None => Vec::new(),
            Some(k) => level_scores(k, j, data.target, rows.iter().map(|&i| &data.ds.records[i as usize]), &parent[j]),
        })
        .collect()
}

/// Enumerates admissible thresholds: midpoints between consecutive distinct
/// values whose induced children satisfy `cons`.
pub fn rule_space(data: &FitData, rows: &[u32], enc: &[Vec<f64>], cons: &SplitConstraints) -> RuleSpace {
    let m = rows.len();
    let p = data.p();
    if m < 2 * cons.min_leaf.max(1) {
        return RuleSpace { thresholds: vec![Vec::new(); p] };
    }
    let total_pos = rows.iter().filter(|&&i| data.positive[i as usize]).count();
    // Large nodes walk the presorted global order; small ones sort locally.
    let use_order = (m as f64) * (m as f64).log2() > data.len() as f64;
    let member = if use_order {
        let mut mask = vec![false; data.len()];
        for &i in rows {
            mask[i as usize] = true;
        }
        mask
    } else {
        Vec::new()
    };
    let mut buf: Vec<(f64, usize, usize)> = Vec::with_capacity(m);
    let thresholds = (0..p)
        .map(|j| {
            buf.clear();
            match data.n_levels[j] {
                Some(k) => {
                    // Aggregate per level, then order levels by score.
                    let mut cnt = vec![(0usize, 0usize); k];
                    for &i in rows {
                        let c = &mut cnt[data.x[j][i as usize] as usize];
                        c.0 += 1;
                        c.1 += data.positive[i as usize] as usize;
                    }
                    buf.extend((0..k).filter(|&l| cnt[l].0 > 0).map(|l| (enc[j][l], cnt[l].0, cnt[l].1)));
                    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                }
                None if use_order => {
                    // Single pass over the presorted order, no buffering.
                    let (col, pos) = (&data.x[j], &data.positive);
                    let mut out = Vec::new();
                    let (mut left, mut left_pos) = (0usize, 0usize);
                    let mut prev = f64::NAN;
                    for &i in &data.order[j] {
                        let i = i as usize;
                        if !member[i] {
                            continue;
                        }
                        let v = col[i];
                        if left > 0 && v != prev && admissible(left, left_pos, m, total_pos, cons) {
                            out.push(midpoint(prev, v));
                        }
                        left += 1;
                        left_pos += pos[i] as usize;
                        prev = v;
                    }
                    return out;
                }
                None => {
                    buf.extend(rows.iter().map(|&i| (data.x[j][i as usize], 1, data.positive[i as usize] as usize)));
                    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                }
            }
            sweep_thresholds(&buf, m, total_pos, cons)
        })
        .collect();
    RuleSpace { thresholds }
}

/// Admissible midpoints over `(value, count, positives)` runs sorted by value.
fn sweep_thresholds(buf: &[(f64, usize, usize)], m: usize, total_pos: usize, cons: &SplitConstraints) -> Vec<f64> {
    let mut out = Vec::new();
    let (mut left, mut left_pos) = (0usize, 0usize);
    let mut k = 0;
    while k < buf.len() {
        let val = buf[k].0;
        while k < buf.len() && buf[k].0 == val {
            left += buf[k].1;
            left_pos += buf[k].2;
            k += 1;
        }
        if k == buf.len() {
            break;
        }
        if admissible(left, left_pos, m, total_pos, cons) {
            out.push(midpoint(val, buf[k].0));
        }
    }
    out
}

#[inline]
fn admissible(left: usize, left_pos: usize, m: usize, total_pos: usize, cons: &SplitConstraints) -> bool {
    left >= cons.min_leaf && m - left >= cons.min_leaf && left_pos >= cons.min_positive && total_pos - left_pos >= cons.min_positive
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Splits `rows` by `rule` using the node's encoding.
fn partition(data: &FitData, rows: &[u32], enc: &[Vec<f64>], rule: &DecisionRule) -> (Vec<u32>, Vec<u32>) {
    rows.iter().partition(|&&i| node_value(data, enc, rule.cov, i as usize) <= rule.threshold)
}

/// Moves `rule` onto the canonical midpoint of the values it separates at a
/// node; `None` if it no longer separates anything.
fn snap(data: &FitData, rows: &[u32], enc: &[Vec<f64>], rule: &DecisionRule) -> Option<DecisionRule> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &i in rows {
        let v = node_value(data, enc, rule.cov, i as usize);
        if v <= rule.threshold {
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
    }
    if lo.is_finite() && hi.is_finite() {
        Some(DecisionRule { cov: rule.cov, threshold: midpoint(lo, hi) })
    } else {
        None
    }
}

impl Tree {
    /// Root-only tree holding every record of `data`.
    pub fn root(data: &FitData, cons: SplitConstraints) -> Tree {
        let rows: Vec<u32> = (0..data.len() as u32).collect();
        let enc = encode(data, &rows, &data.global_scores);
        let space = rule_space(data, &rows, &enc, &cons);
        let node = Node {
            depth: 0,
            parent: None,
            split: None,
            leaf_id: Some(1),
            enc: Arc::new(enc),
            rows: Arc::new(rows),
            space: Some(Arc::new(space)),
            score: None,
            draw: None,
        };
        Tree { nodes: vec![node], n_levels: data.n_levels.clone(), constraints: cons }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn internal(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_leaf()).collect()
    }

    /// Nodes in the subtree rooted at `id`, in preorder.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some(s) = self.nodes[i].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        out
    }

    pub fn subtree_leaves(&self, id: usize) -> Vec<usize> {
        self.subtree(id).into_iter().filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    /// Internal nodes whose children are both leaves.
    pub fn prunable(&self) -> Vec<usize> {
        self.internal()
            .into_iter()
            .filter(|&i| {
                let s = self.nodes[i].split.unwrap();
                self.nodes[s.left].is_leaf() && self.nodes[s.right].is_leaf()
            })
            .collect()
    }

    /// Leaves that may split: an admissible rule exists and the prior allows it.
    pub fn growable(&self, hp: &HyperParams) -> Vec<usize> {
        self.leaves().into_iter().filter(|&i| self.is_growable(i, hp)).collect()
    }

    fn is_growable(&self, i: usize, hp: &HyperParams) -> bool {
        self.nodes[i].k() > 0 && depth_split_prob(self.nodes[i].depth, hp) > 0.0
    }

    /// `(parent, child)` pairs of internal nodes.
    pub fn swappable(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in self.internal() {
            let s = self.nodes[i].split.unwrap();
            for c in [s.left, s.right] {
                if !self.nodes[c].is_leaf() {
                    out.push((i, c));
                }
            }
        }
        out
    }

    /// Renumbers nodes in preorder and refreshes parent links and leaf ids.
    fn canonicalize(&mut self) {
        let order = self.subtree(0);
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (k, &i) in order.iter().enumerate() {
            new_id[i] = k;
        }
        let mut nodes: Vec<Node> = order.iter().map(|&i| self.nodes[i].clone()).collect();
        let mut leaf = 0;
        for n in nodes.iter_mut() {
            n.parent = n.parent.map(|p| new_id[p]);
            if let Some(s) = n.split.as_mut() {
                s.left = new_id[s.left];
                s.right = new_id[s.right];
                n.leaf_id = None;
            } else {
                leaf += 1;
                n.leaf_id = Some(leaf);
            }
        }
        self.nodes = nodes;
    }

    fn child(&self, data: &FitData, parent: usize, rows: Vec<u32>) -> Node {
        self.child_with(data, parent, rows, true)
    }

    /// A fresh child node; `with_space = false` skips the rule space (for
    /// trees that are only compared structurally).
    fn child_with(&self, data: &FitData, parent: usize, rows: Vec<u32>, with_space: bool) -> Node {
        let p = &self.nodes[parent];
        let enc = encode(data, &rows, &p.enc);
        let space = if with_space { rule_space(data, &rows, &enc, &self.constraints) } else { RuleSpace::default() };
        Node {
            depth: p.depth + 1,
            parent: Some(parent),
            split: None,
            leaf_id: None,
            enc: Arc::new(enc),
            rows: Arc::new(rows),
            space: Some(Arc::new(space)),
            score: None,
            draw: None,
        }
    }

    fn rule_ok(&self, data: &FitData, l: &[u32], r: &[u32]) -> bool {
        let c = &self.constraints;
        let pos = |rows: &[u32]| rows.iter().filter(|&&i| data.positive[i as usize]).count();
        l.len() >= c.min_leaf && r.len() >= c.min_leaf && pos(l) >= c.min_positive && pos(r) >= c.min_positive
    }

    /// Splits leaf `id` by `rule`.  Returns `false` (tree unchanged) when the
    /// rule is inadmissible.  Node ids before `id` in preorder are stable.
    pub fn grow(&mut self, data: &FitData, id: usize, rule: DecisionRule) -> bool {
        assert!(self.nodes[id].is_leaf(), "grow on an internal node");
        let (l, r) = partition(data, &self.nodes[id].rows, &self.nodes[id].enc, &rule);
        if !self.rule_ok(data, &l, &r) {
            return false;
        }
        let (lc, rc) = (self.child(data, id, l), self.child(data, id, r));
        let n = self.nodes.len();
        self.nodes.push(lc);
        self.nodes.push(rc);
        let node = &mut self.nodes[id];
        node.split = Some(Split { rule, left: n, right: n + 1 });
        node.score = None;
        node.draw = None;
        self.canonicalize();
        true
    }

    /// Collapses internal node `id` into a leaf.
    pub fn prune(&mut self, id: usize) {
        let node = &mut self.nodes[id];
        assert!(node.split.is_some(), "prune on a leaf");
        node.split = None;
        node.score = None;
        node.draw = None;
        self.canonicalize();
    }

    /// Re-derives rows, encodings and rule spaces below `id` after its rule
    /// (or an ancestor's) changed; descendant thresholds snap to canonical
    /// midpoints.  Returns `false` if some rule became inadmissible.
    pub fn rebuild_below(&mut self, data: &FitData, id: usize) -> bool {
        self.rebuild_below_with(data, id, true)
    }

    fn rebuild_below_with(&mut self, data: &FitData, id: usize, with_space: bool) -> bool {
        let Some(s) = self.nodes[id].split else { return true };
        let (l, r) = partition(data, &self.nodes[id].rows, &self.nodes[id].enc, &s.rule);
        if !self.rule_ok(data, &l, &r) {
            return false;
        }
        for (c, rows) in [(s.left, l), (s.right, r)] {
            let fresh = self.child_with(data, id, rows, with_space);
            let node = &mut self.nodes[c];
            node.enc = fresh.enc;
            node.rows = fresh.rows;
            node.space = fresh.space;
            node.score = None;
            node.draw = None;
            if let Some(cs) = node.split {
                let Some(rule) = snap(data, &node.rows, &node.enc, &cs.rule) else { return false };
                self.nodes[c].split = Some(Split { rule, ..cs });
            }
            if !self.rebuild_below_with(data, c, with_space) {
                return false;
            }
        }
        true
    }

    /// `log p(T)`: each internal node contributes `log p(d) − log K`, each leaf
    /// that could still split `log(1 − p(d))`.
    pub fn log_prior(&self, hp: &HyperParams) -> f64 {
        let mut lp = 0.0;
        for (i, n) in self.nodes.iter().enumerate() {
            let p = depth_split_prob(n.depth, hp);
            if n.is_leaf() {
                if self.is_growable(i, hp) {
                    lp += (1.0 - p).ln();
                }
            } else {
                let k = n.k();
                if k == 0 || p == 0.0 {
                    return f64::NEG_INFINITY;
                }
                lp += p.ln() - (k as f64).ln();
            }
        }
        lp
    }

    /// Node id of the leaf that `x` falls in.
    pub fn route_node(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            let j = s.rule.cov;
            let v = match self.n_levels[j] {
                None => x[j],
                Some(_) => self.nodes[i].enc[j][x[j] as usize],
            };
            i = if v <= s.rule.threshold { s.left } else { s.right };
        }
        i
    }

    /// 1-based leaf id of `x`.
    pub fn route(&self, x: &[f64]) -> usize {
        self.nodes[self.route_node(x)].leaf_id.expect("leaf")
    }

    /// Canonical text form of the tree's structure and rules.
    pub fn signature(&self) -> String {
        fn go(t: &Tree, i: usize, out: &mut String) {
            match t.nodes[i].split {
                None => out.push('L'),
                Some(s) => {
                    out.push_str(&format!("(x{}<={}:", s.rule.cov, s.rule.threshold));
                    go(t, s.left, out);
                    out.push(',');
                    go(t, s.right, out);
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        go(self, 0, &mut s);
        s
    }

    /// Human-readable conjunction of rules leading to each leaf.
    pub fn leaf_paths(&self, names: &[String]) -> Vec<String> {
        self.leaves()
            .into_iter()
            .map(|l| {
                let mut parts = Vec::new();
                let mut c = l;
                while let Some(p) = self.nodes[c].parent {
                    let s = self.nodes[p].split.unwrap();
                    let op = if s.left == c { "<=" } else { ">" };
                    let enc = if self.n_levels[s.rule.cov].is_some() { "score:" } else { "" };
                    parts.push(format!("{}{} {} {:.6}", enc, names[s.rule.cov], op, s.rule.threshold));
                    c = p;
                }
                parts.reverse();
                if parts.is_empty() {
                    "all".to_string()
                } else {
                    parts.join(" & ")
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
    Swap,
}

/// Probabilities of grow, prune, change and swap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs(pub [f64; 4]);

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs([0.25, 0.25, 0.4, 0.1])
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<(), String> {
        let s: f64 = self.0.iter().sum();
        if self.0.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(format!("move probabilities {:?} must be non-negative and sum to 1", self.0));
        }
        Ok(())
    }

    /// Move-kind probabilities restricted to kinds legal on `t`.
    fn available(&self, t: &Tree, hp: &HyperParams) -> [f64; 4] {
        let legal = [!t.growable(hp).is_empty(), !t.prunable().is_empty(), t.nodes.len() > 1, !t.swappable().is_empty()];
        let mut p = [0.0; 4];
        for k in 0..4 {
            if legal[k] {
                p[k] = self.0[k];
            }
        }
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            p.iter_mut().for_each(|x| *x /= s);
        }
        p
    }
}

const KINDS: [MoveKind; 4] = [MoveKind::Grow, MoveKind::Prune, MoveKind::Change, MoveKind::Swap];

#[derive(Debug, Clone)]
pub struct ProposalResult {
    pub tree: Tree,
    pub kind: MoveKind,
    /// `log[q(T*, T) / q(T, T*)]`.
    pub log_q_ratio: f64,
    /// Root of the changed subtree; its id is the same in both trees.
    pub region: usize,
    /// `false` when the move produced an inadmissible tree (prior zero).
    pub valid: bool,
}

fn pick<R: Rng + ?Sized, T: Copy>(xs: &[T], rng: &mut R) -> T {
    xs[rng.gen_range(0..xs.len())]
}

/// Draws a rule uniformly: covariate among those with admissible rules,
/// then threshold.  Returns the rule and `log` of its probability.
fn draw_rule<R: Rng + ?Sized>(space: &RuleSpace, rng: &mut R) -> (DecisionRule, f64) {
    let covs = space.covariates();
    let j = pick(&covs, rng);
    let th = &space.thresholds[j];
    let t = th[rng.gen_range(0..th.len())];
    (DecisionRule { cov: j, threshold: t }, -(covs.len() as f64).ln() - (th.len() as f64).ln())
}

fn rule_log_prob(space: &RuleSpace, cov: usize) -> f64 {
    -(space.covariates().len() as f64).ln() - (space.thresholds[cov].len() as f64).ln()
}

/// Draws a move and builds the candidate tree.  `None` if no move is legal.
pub fn propose<R: Rng + ?Sized>(
    t: &Tree,
    data: &FitData,
    hp: &HyperParams,
    probs: &MoveProbs,
    rng: &mut R,
) -> Option<ProposalResult> {
    let avail = probs.available(t, hp);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut kind = None;
    for k in 0..4 {
        if avail[k] == 0.0 {
            continue;
        }
        acc += avail[k];
        kind = Some(KINDS[k]);
        if u < acc {
            break;
        }
    }
    let kind = kind?;
    let mut new = t.clone();
    let idx = |k: MoveKind| KINDS.iter().position(|&x| x == k).unwrap();
    let p_kind = |tr: &Tree, k: MoveKind| probs.available(tr, hp)[idx(k)].ln();
    Some(match kind {
        MoveKind::Grow => {
            let growable = t.growable(hp);
            let leaf = pick(&growable, rng);
            let space = t.nodes[leaf].space.clone().expect("rule space");
            let (rule, lp_rule) = draw_rule(&space, rng);
            let ok = new.grow(data, leaf, rule);
            debug_assert!(ok, "drawn rule is admissible");
            let fwd = p_kind(t, MoveKind::Grow) - (growable.len() as f64).ln() + lp_rule;
            let rev = p_kind(&new, MoveKind::Prune) - (new.prunable().len() as f64).ln();
            ProposalResult { tree: new, kind, log_q_ratio: rev - fwd, region: leaf, valid: ok }
        }
        MoveKind::Prune => {
            let prunable = t.prunable();
            let node = pick(&prunable, rng);
            let rule = t.nodes[node].split.unwrap().rule;
            new.prune(node);
            let fwd = p_kind(t, MoveKind::Prune) - (prunable.len() as f64).ln();
            let space = new.nodes[node].space.clone().expect("rule space");
            let rev = p_kind(&new, MoveKind::Grow) - (new.growable(hp).len() as f64).ln() + rule_log_prob(&space, rule.cov);
            ProposalResult { tree: new, kind, log_q_ratio: rev - fwd, region: node, valid: true }
        }
        MoveKind::Change => {
            let internal = t.internal();
            let node = pick(&internal, rng);
            let space = t.nodes[node].space.clone().expect("rule space");
            let (rule, _) = draw_rule(&space, rng);
            let old = t.nodes[node].split.unwrap().rule;
            match apply_change(t, data, node, rule) {
                Some(new) => {
                    // descendants snap to canonical thresholds, so the inverse
                    // move is not guaranteed to exist; without it q(T*,T) = 0
                    let back = change_with(&new, data, node, old, false).is_some_and(|b| b.signature() == t.signature());
                    // same node, same rule space: only the threshold counts of
                    // the two covariates differ
                    let lq = p_kind(&new, MoveKind::Change) - p_kind(t, MoveKind::Change)
                        + rule_log_prob(&space, old.cov)
                        - rule_log_prob(&space, rule.cov);
                    ProposalResult { tree: new, kind, log_q_ratio: lq, region: node, valid: back }
                }
                None => ProposalResult { tree: t.clone(), kind, log_q_ratio: 0.0, region: node, valid: false },
            }
        }
        MoveKind::Swap => {
            let pairs = t.swappable();
            let (p, c) = pick(&pairs, rng);
            match apply_swap(t, data, p, c) {
                Some(new) => {
                    let back = swap_with(&new, data, p, c, false).is_some_and(|b| b.signature() == t.signature());
                    let lq = p_kind(&new, MoveKind::Swap) - p_kind(t, MoveKind::Swap) + (pairs.len() as f64).ln()
                        - (new.swappable().len() as f64).ln();
                    ProposalResult { tree: new, kind, log_q_ratio: lq, region: p, valid: back }
                }
                None => ProposalResult { tree: t.clone(), kind, log_q_ratio: 0.0, region: p, valid: false },
            }
        }
    })
}

/// Replaces the rule of internal node `node`; `None` if the result is inadmissible.
pub fn apply_change(t: &Tree, data: &FitData, node: usize, rule: DecisionRule) -> Option<Tree> {
    change_with(t, data, node, rule, true)
}

fn change_with(t: &Tree, data: &FitData, node: usize, rule: DecisionRule, with_space: bool) -> Option<Tree> {
    let mut new = t.clone();
    let s = new.nodes[node].split.expect("internal node");
    new.nodes[node].split = Some(Split { rule, ..s });
    if !new.rebuild_below_with(data, node, with_space) {
        return None;
    }
    new.canonicalize();
    Some(new)
}

/// Exchanges the rules of internal parent `p` and internal child `c`.
pub fn apply_swap(t: &Tree, data: &FitData, p: usize, c: usize) -> Option<Tree> {
    swap_with(t, data, p, c, true)
}

fn swap_with(t: &Tree, data: &FitData, p: usize, c: usize, with_space: bool) -> Option<Tree> {
    let mut new = t.clone();
    let (sp, sc) = (new.nodes[p].split.expect("internal"), new.nodes[c].split.expect("internal"));
    let rp = snap(data, &new.nodes[p].rows, &new.nodes[p].enc, &sc.rule)?;
    new.nodes[p].split = Some(Split { rule: rp, ..sp });
    new.nodes[c].split = Some(Split { rule: sp.rule, ..sc });
    if !new.rebuild_below_with(data, p, with_space) {
        return None;
    }
    new.canonicalize();
    Some(new)
}

/// Cell index per point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLabels {
    pub labels: Vec<usize>,
    pub n_cells: usize,
}

impl PartitionLabels {
    /// Densifies arbitrary keys into `0..n_cells`, ordered by key.
    pub fn from_keys<K: Ord + Clone>(keys: &[K]) -> Self {
        let mut ids: BTreeMap<K, usize> = keys.iter().cloned().map(|k| (k, 0)).collect();
        for (i, v) in ids.values_mut().enumerate() {
            *v = i;
        }
        PartitionLabels { labels: keys.iter().map(|k| ids[k]).collect(), n_cells: ids.len() }
    }

    pub fn of_tree(t: &Tree, xs: &[&[f64]]) -> Self {
        let keys: Vec<usize> = xs.iter().map(|x| t.route(x)).collect();
        Self::from_keys(&keys)
    }
}

/// Joint partition of `xs` by two trees: one cell per occupied leaf pair.
pub fn superimpose(ta: &Tree, tb: &Tree, xs: &[&[f64]]) -> PartitionLabels {
    let keys: Vec<(usize, usize)> = xs.iter().map(|x| (ta.route(x), tb.route(x))).collect();
    PartitionLabels::from_keys(&keys)
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index (Hubert–Arabie).
pub fn ari(a: &PartitionLabels, b: &PartitionLabels) -> f64 {
    assert_eq!(a.labels.len(), b.labels.len(), "partitions of different point sets");
    let n = a.labels.len() as u64;
    if n <= 1 {
        return 1.0;
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ra = vec![0u64; a.n_cells];
    let mut rb = vec![0u64; b.n_cells];
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *table.entry((x, y)).or_default() += 1;
        ra[x] += 1;
        rb[y] += 1;
    }
    let sij: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.iter().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (sij - expected) / (max - expected)
}
