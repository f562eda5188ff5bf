//! Two-layer self-organizing incremental neural network.
//!
//! The first layer learns a topology over the training samples with per-node
//! adaptive similarity thresholds. Its node weights are then replayed into a
//! second layer that uses one constant threshold, and the connected
//! components of the second layer's graph are the discovered groups.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{dist, majority, mean, nearest, two_nearest};
use crate::pipeline::{PrototypeSet, PrototypeSource};
use crate::rng::RngSeed;

/// Learning rate of the winner after its `t`-th win.
pub fn winner_rate(t: f64) -> f64 {
    1.0 / t
}

/// Learning rate of the winner's direct neighbors.
pub fn neighbor_rate(t: f64) -> f64 {
    1.0 / (100.0 * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoinnNode {
    pub weight: Vec<f64>,
    /// Accumulated distance to the samples this node won.
    pub local_error: f64,
    /// Accumulated win count (fractional after an insertion split).
    pub density: f64,
    pub error_radius: f64,
    pub group_label: Option<usize>,
}

impl SoinnNode {
    fn new(weight: Vec<f64>) -> Self {
        SoinnNode {
            weight,
            local_error: 0.0,
            density: 0.0,
            error_radius: 0.0,
            group_label: None,
        }
    }

    fn mean_error(&self) -> f64 {
        if self.density > 0.0 {
            self.local_error / self.density
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoinnEdge {
    pub a: usize,
    pub b: usize,
    pub age: usize,
}

/// Shares used when an intra-class insertion splits error and density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFactors {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for DecayFactors {
    fn default() -> Self {
        DecayFactors {
            alpha1: 1.0 / 6.0,
            alpha2: 1.0 / 4.0,
            alpha3: 1.0 / 4.0,
            beta: 2.0 / 3.0,
            gamma: 3.0 / 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoinnParams {
    /// Insertion and pruning period, in presented samples.
    pub lambda: usize,
    pub age_dead: usize,
    /// First-layer presentations; `None` means two passes over the data.
    pub lt: Option<usize>,
    /// Fixed second-layer threshold; derived from the first layer when `None`.
    pub second_layer_threshold: Option<f64>,
    pub decay: DecayFactors,
}

impl Default for SoinnParams {
    fn default() -> Self {
        SoinnParams {
            lambda: 100,
            age_dead: 100,
            lt: None,
            second_layer_threshold: None,
            decay: DecayFactors::default(),
        }
    }
}

impl SoinnParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::param("soinn.lambda", "must be at least 1"));
        }
        if self.age_dead == 0 {
            return Err(Error::param("soinn.age_dead", "must be at least 1"));
        }
        if self.lt == Some(0) {
            return Err(Error::param("soinn.lt", "must be at least 1"));
        }
        if let Some(t) = self.second_layer_threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::param("soinn.second_layer_threshold", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// How a layer decides whether a sample belongs to existing structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Per-node threshold from the node's neighborhood.
    Adaptive,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphRecord", try_from = "GraphRecord")]
pub struct SoinnGraph {
    nodes: Vec<SoinnNode>,
    /// Symmetric adjacency: neighbor id -> edge age.
    adjacency: Vec<BTreeMap<usize, usize>>,
    pub layer: u8,
    pub group_count: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    nodes: Vec<SoinnNode>,
    edges: Vec<SoinnEdge>,
    layer: u8,
    group_count: usize,
}

impl From<SoinnGraph> for GraphRecord {
    fn from(g: SoinnGraph) -> Self {
        let edges = g.edges();
        GraphRecord {
            nodes: g.nodes,
            edges,
            layer: g.layer,
            group_count: g.group_count,
        }
    }
}

impl TryFrom<GraphRecord> for SoinnGraph {
    type Error = String;

    fn try_from(r: GraphRecord) -> std::result::Result<Self, String> {
        let mut g = SoinnGraph {
            adjacency: vec![BTreeMap::new(); r.nodes.len()],
            nodes: r.nodes,
            layer: r.layer,
            group_count: r.group_count,
        };
        for e in r.edges {
            if e.a == e.b || e.a >= g.nodes.len() || e.b >= g.nodes.len() {
                return Err(format!("invalid edge {}-{}", e.a, e.b));
            }
            g.connect(e.a, e.b);
            g.set_age(e.a, e.b, e.age);
        }
        Ok(g)
    }
}

/// What an intra-class insertion did, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionRecord {
    pub q: usize,
    pub f: usize,
    /// (E, M, R) of q and f before the split; radii refreshed to E/M.
    pub q_before: (f64, f64, f64),
    pub f_before: (f64, f64, f64),
    /// (E, M, R) given to the candidate node.
    pub new_node: (f64, f64, f64),
    pub q_after: (f64, f64),
    pub f_after: (f64, f64),
    pub kept: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Sample became a node of its own.
    pub between_class_insertion: bool,
    pub intra_class_insertion: Option<InsertionRecord>,
    pub pruned: usize,
}

impl SoinnGraph {
    /// Graph seeded with two nodes and no edges.
    pub fn with_seeds(first: Vec<f64>, second: Vec<f64>, layer: u8) -> Self {
        SoinnGraph {
            nodes: vec![SoinnNode::new(first), SoinnNode::new(second)],
            adjacency: vec![BTreeMap::new(), BTreeMap::new()],
            layer,
            group_count: 0,
        }
    }

    /// Build from explicit nodes and edges `(a, b, age)`.
    pub fn from_parts(nodes: Vec<SoinnNode>, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let record = GraphRecord {
            nodes,
            edges: edges.iter().map(|&(a, b, age)| SoinnEdge { a, b, age }).collect(),
            layer: 1,
            group_count: 0,
        };
        SoinnGraph::try_from(record).map_err(|e| Error::param("edges", e))
    }

    pub fn nodes(&self) -> &[SoinnNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    /// Undirected edges, each once with `a < b`, in ascending order.
    pub fn edges(&self) -> Vec<SoinnEdge> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| {
                nbrs.iter()
                    .filter(move |(&b, _)| a < b)
                    .map(move |(&b, &age)| SoinnEdge { a, b, age })
            })
            .collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].keys().copied()
    }

    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.weight.clone()).collect()
    }

    fn push_node(&mut self, node: SoinnNode) -> usize {
        self.nodes.push(node);
        self.adjacency.push(BTreeMap::new());
        self.nodes.len() - 1
    }

    fn connect(&mut self, a: usize, b: usize) {
        self.adjacency[a].insert(b, 0);
        self.adjacency[b].insert(a, 0);
    }

    fn set_age(&mut self, a: usize, b: usize, age: usize) {
        self.adjacency[a].insert(b, age);
        self.adjacency[b].insert(a, age);
    }

    fn disconnect(&mut self, a: usize, b: usize) {
        self.adjacency[a].remove(&b);
        self.adjacency[b].remove(&a);
    }

    /// Drop the listed nodes and renumber the rest in order.
    fn remove_nodes(&mut self, doomed: &[bool]) {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (i, &d) in doomed.iter().enumerate() {
            if !d {
                remap[i] = next;
                next += 1;
            }
        }
        let nodes = std::mem::take(&mut self.nodes);
        let adjacency = std::mem::take(&mut self.adjacency);
        for ((i, node), nbrs) in nodes.into_iter().enumerate().zip(adjacency) {
            if doomed[i] {
                continue;
            }
            self.nodes.push(node);
            self.adjacency.push(
                nbrs.into_iter()
                    .filter(|(j, _)| !doomed[*j])
                    .map(|(j, age)| (remap[j], age))
                    .collect(),
            );
        }
    }

    fn threshold(&self, i: usize, mode: Threshold) -> f64 {
        match mode {
            Threshold::Constant(t) => t,
            Threshold::Adaptive => similarity_threshold(self, i).expect("graph has two nodes"),
        }
    }

    /// Present one sample. `step` counts presentations within the current layer, from 1.
    pub fn process_sample(&mut self, x: &[f64], step: usize, p: &SoinnParams, mode: Threshold) -> Result<StepReport> {
        let dim = self.nodes[0].weight.len();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        let mut report = StepReport::default();
        if self.nodes.len() < 2 {
            self.push_node(SoinnNode::new(x.to_vec()));
            report.between_class_insertion = true;
            return Ok(report);
        }

        let weights = self.weights();
        let ((s1, d1), (s2, d2)) = two_nearest(x, &weights);
        if d1 > self.threshold(s1, mode) || d2 > self.threshold(s2, mode) {
            self.push_node(SoinnNode::new(x.to_vec()));
            report.between_class_insertion = true;
        } else {
            self.connect(s1, s2);
            for age in self.adjacency[s1].values_mut() {
                *age += 1;
            }
            let nbrs: Vec<(usize, usize)> = self.adjacency[s1].iter().map(|(&j, &a)| (j, a)).collect();
            for (j, age) in nbrs {
                self.adjacency[j].insert(s1, age);
            }

            let winner = &mut self.nodes[s1];
            winner.local_error += d1;
            winner.density += 1.0;
            let t = winner.density;
            let rate = winner_rate(t);
            for (w, &xv) in winner.weight.iter_mut().zip(x) {
                *w += rate * (xv - *w);
            }
            let rate = neighbor_rate(t);
            let nbrs: Vec<usize> = self.neighbors(s1).collect();
            for j in nbrs {
                for (w, &xv) in self.nodes[j].weight.iter_mut().zip(x) {
                    *w += rate * (xv - *w);
                }
            }

            let stale: Vec<usize> = self.adjacency[s1]
                .iter()
                .filter(|(_, &age)| age > p.age_dead)
                .map(|(&j, _)| j)
                .collect();
            for j in stale {
                self.disconnect(s1, j);
            }
        }

        if step.is_multiple_of(p.lambda) {
            report.intra_class_insertion = self.intra_class_insertion(&p.decay);
            report.pruned = self.prune();
        }
        Ok(report)
    }

    /// Insert a node halfway between the highest-error node and its
    /// highest-error neighbor; rolled back unless the new node's error radius
    /// is below both parents' radii.
    pub fn intra_class_insertion(&mut self, decay: &DecayFactors) -> Option<InsertionRecord> {
        let q = argmax(self.nodes.iter().map(|n| n.local_error).enumerate())?;
        let f = argmax(self.neighbors(q).map(|j| (j, self.nodes[j].local_error)))?;
        let (nq, nf) = (&self.nodes[q], &self.nodes[f]);
        if nq.density <= 0.0 || nf.density <= 0.0 {
            return None;
        }
        let (rq, rf) = (nq.mean_error(), nf.mean_error());
        let q_before = (nq.local_error, nq.density, rq);
        let f_before = (nf.local_error, nf.density, rf);
        let saved = (nq.clone(), nf.clone());

        let weight = nq.weight.iter().zip(&nf.weight).map(|(a, b)| (a + b) / 2.0).collect();
        let new_node = (
            decay.alpha1 * (q_before.0 + f_before.0),
            decay.alpha2 * (q_before.1 + f_before.1),
            decay.alpha3 * (rq + rf),
        );
        for (i, r) in [(q, rq), (f, rf)] {
            let n = &mut self.nodes[i];
            n.error_radius = r;
            n.local_error *= decay.beta;
            n.density *= decay.gamma;
        }
        let q_after = (self.nodes[q].local_error, self.nodes[q].density);
        let f_after = (self.nodes[f].local_error, self.nodes[f].density);

        let kept = new_node.2 < rq && new_node.2 < rf;
        if kept {
            let r = self.push_node(SoinnNode {
                weight,
                local_error: new_node.0,
                density: new_node.1,
                error_radius: new_node.2,
                group_label: None,
            });
            self.connect(r, q);
            self.connect(r, f);
            self.disconnect(q, f);
        } else {
            self.nodes[q] = saved.0;
            self.nodes[f] = saved.1;
        }
        Some(InsertionRecord {
            q,
            f,
            q_before,
            f_before,
            new_node,
            q_after,
            f_after,
            kept,
        })
    }

    /// Delete isolated nodes and single-edge nodes whose density is below the
    /// mean density. Skipped when it would leave fewer than two nodes.
    pub fn prune(&mut self) -> usize {
        let n = self.nodes.len();
        if n == 0 {
            return 0;
        }
        let mean_density = self.nodes.iter().map(|x| x.density).sum::<f64>() / n as f64;
        let doomed: Vec<bool> = (0..n)
            .map(|i| match self.adjacency[i].len() {
                0 => true,
                1 => self.nodes[i].density < mean_density,
                _ => false,
            })
            .collect();
        let count = doomed.iter().filter(|&&d| d).count();
        if count == 0 || n - count < 2 {
            return 0;
        }
        self.remove_nodes(&doomed);
        count
    }

    /// Mean length over all edges, `None` without edges.
    pub fn mean_edge_length(&self) -> Option<f64> {
        let edges = self.edges();
        if edges.is_empty() {
            return None;
        }
        let total: f64 = edges
            .iter()
            .map(|e| dist(&self.nodes[e.a].weight, &self.nodes[e.b].weight))
            .sum();
        Some(total / edges.len() as f64)
    }

    /// Mean weight of each labeled group, indexed by group label.
    pub fn group_means(&self) -> Vec<Vec<f64>> {
        (0..self.group_count)
            .map(|g| {
                mean(
                    self.nodes
                        .iter()
                        .filter(|n| n.group_label == Some(g))
                        .map(|n| n.weight.as_slice()),
                )
                .expect("every group has a node")
            })
            .collect()
    }
}

fn argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Largest distance to a direct neighbor, or the smallest distance to any
/// other node when the node has no neighbors.
pub fn similarity_threshold(g: &SoinnGraph, node: usize) -> Result<f64> {
    if g.nodes.len() < 2 {
        return Err(Error::param("graph", "similarity threshold needs at least two nodes"));
    }
    let w = &g.nodes[node].weight;
    let t = if g.adjacency[node].is_empty() {
        g.nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != node)
            .map(|(_, n)| dist(w, &n.weight))
            .fold(f64::INFINITY, f64::min)
    } else {
        g.neighbors(node)
            .map(|j| dist(w, &g.nodes[j].weight))
            .fold(0.0, f64::max)
    };
    Ok(t)
}

/// Label connected components 0..Q-1 in order of their lowest node id.
pub fn label_groups(mut g: SoinnGraph) -> SoinnGraph {
    let n = g.nodes.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in g.neighbors(i).collect::<Vec<_>>() {
                if label[j] == usize::MAX {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    for (node, l) in g.nodes.iter_mut().zip(label) {
        node.group_label = Some(l);
    }
    g.group_count = next;
    g
}

/// Constant second-layer threshold: midway between the mean edge length and
/// the smallest distance between first-layer groups, or 1.5 times the mean
/// edge length when that interval is empty.
pub fn second_layer_threshold(first: &SoinnGraph) -> f64 {
    let labeled = label_groups(first.clone());
    let mdi = match labeled.mean_edge_length() {
        Some(m) => m,
        None => {
            // No edges at all: fall back to the mean nearest-neighbor distance.
            let w = labeled.weights();
            let n = w.len();
            (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| dist(&w[i], &w[j]))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / n as f64
        }
    };
    let nodes = labeled.nodes();
    let mut min_inter = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i].group_label != nodes[j].group_label {
                min_inter = min_inter.min(dist(&nodes[i].weight, &nodes[j].weight));
            }
        }
    }
    if min_inter.is_finite() && min_inter > mdi {
        (mdi + min_inter) / 2.0
    } else {
        1.5 * mdi
    }
}

fn train_layer<R: Rng>(
    inputs: &[Vec<f64>],
    presentations: usize,
    p: &SoinnParams,
    mode: Threshold,
    layer: u8,
    rng: &mut R,
) -> Result<SoinnGraph> {
    let seeds = sample(rng, inputs.len(), 2);
    let mut g = SoinnGraph::with_seeds(inputs[seeds.index(0)].clone(), inputs[seeds.index(1)].clone(), layer);
    for step in 1..=presentations {
        let x = &inputs[rng.random_range(0..inputs.len())];
        g.process_sample(x, step, p, mode)?;
    }
    g.prune();
    Ok(g)
}

/// Train both layers for `lt` presentations each and label the second
/// layer's components.
pub fn soinn_train(ds: &Dataset, p: &SoinnParams, seed: RngSeed) -> Result<SoinnGraph> {
    p.validate()?;
    if ds.len() < 2 {
        return Err(Error::InvalidDataset("SOINN needs at least two samples".into()));
    }
    let mut rng = seed.rng();
    let lt = p.lt.unwrap_or(2 * ds.len());
    let first = train_layer(ds.samples(), lt, p, Threshold::Adaptive, 1, &mut rng)?;

    let inputs = first.weights();
    let tc = p.second_layer_threshold.unwrap_or_else(|| second_layer_threshold(&first));
    let second = train_layer(&inputs, lt, p, Threshold::Constant(tc), 2, &mut rng)?;
    Ok(label_groups(second))
}

/// Node weights as prototypes, the group count as the suggested cluster count.
///
/// Each node carries the majority class of the samples nearest to it, or the
/// class of its nearest sample when it attracts none.
pub fn soinn_prototypes(g: &SoinnGraph, ds: &Dataset) -> PrototypeSet {
    let weights = g.weights();
    let majority_labels = ds.labels().map(|labels| {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); weights.len()];
        for (x, &l) in ds.samples().iter().zip(labels) {
            members[nearest(x, &weights).0].push(l);
        }
        members
            .iter()
            .zip(&weights)
            .map(|(m, w)| {
                majority(m.iter().copied(), ds.n_classes())
                    .unwrap_or_else(|| labels[nearest(w, ds.samples()).0])
            })
            .collect()
    });
    PrototypeSet {
        prototypes: weights,
        majority_labels,
        suggested_k: Some(g.group_count),
        source: PrototypeSource::Soinn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn node(w: &[f64]) -> SoinnNode {
        SoinnNode::new(w.to_vec())
    }

    #[test]
    fn threshold_rules() {
        let g = SoinnGraph::from_parts(vec![node(&[0.0]), node(&[3.0]), node(&[7.0])], &[]).unwrap();
        assert_eq!(similarity_threshold(&g, 0).unwrap(), 3.0);
        let g = SoinnGraph::from_parts(
            vec![node(&[0.0]), node(&[1.0]), node(&[-4.0]), node(&[0.5])],
            &[(0, 1, 0), (0, 2, 0)],
        )
        .unwrap();
        assert_eq!(similarity_threshold(&g, 0).unwrap(), 4.0);
        let single = SoinnGraph::from_parts(vec![node(&[0.0])], &[]).unwrap();
        assert!(similarity_threshold(&single, 0).is_err());
    }

    #[test]
    fn threshold_matches_scan() {
        let mut rng = RngSeed(3).rng();
        let nodes: Vec<SoinnNode> = (0..10).map(|_| node(&[rng.random(), rng.random()])).collect();
        let mut edges = Vec::new();
        for a in 0..10 {
            for b in a + 1..10 {
                if rng.random::<f64>() < 0.2 {
                    edges.push((a, b, 0));
                }
            }
        }
        let g = SoinnGraph::from_parts(nodes.clone(), &edges).unwrap();
        for i in 0..10 {
            let d = |j: usize| {
                ((nodes[i].weight[0] - nodes[j].weight[0]).powi(2) + (nodes[i].weight[1] - nodes[j].weight[1]).powi(2))
                    .sqrt()
            };
            let nbrs: Vec<usize> = edges
                .iter()
                .filter_map(|&(a, b, _)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
                .collect();
            let oracle = if nbrs.is_empty() {
                (0..10).filter(|&j| j != i).map(d).fold(f64::INFINITY, f64::min)
            } else {
                nbrs.into_iter().map(d).fold(0.0, f64::max)
            };
            assert_eq!(similarity_threshold(&g, i).unwrap(), oracle);
        }
    }

    #[test]
    fn far_sample_becomes_node() {
        let mut g = SoinnGraph::with_seeds(vec![0.0, 0.0], vec![1.0, 0.0], 1);
        let p = SoinnParams::default();
        let r = g.process_sample(&[10.0, 10.0], 1, &p, Threshold::Adaptive).unwrap();
        assert!(r.between_class_insertion);
        assert_eq!((g.node_count(), g.edge_count()), (3, 0));
    }

    #[test]
    fn first_win_moves_winner_onto_sample() {
        let mut g = SoinnGraph::with_seeds(vec![0.0, 0.0], vec![1.0, 0.0], 1);
        let p = SoinnParams::default();
        let r = g.process_sample(&[0.2, 0.1], 1, &p, Threshold::Adaptive).unwrap();
        assert!(!r.between_class_insertion);
        assert_eq!(g.nodes()[0].weight, vec![0.2, 0.1]);
        assert_eq!(g.nodes()[0].density, 1.0);
        assert_eq!(g.edges(), vec![SoinnEdge { a: 0, b: 1, age: 1 }]);
        // neighbor moved by 1/100 of the gap
        assert!((g.nodes()[1].weight[0] - (1.0 + 0.01 * (0.2 - 1.0))).abs() < 1e-15);
    }

    #[test]
    fn learning_rates() {
        assert_eq!(winner_rate(4.0), 0.25);
        assert_eq!(neighbor_rate(4.0), 0.0025);
    }

    fn insertion_fixture() -> SoinnGraph {
        let mk = |w: f64, e: f64, m: f64| SoinnNode {
            weight: vec![w],
            local_error: e,
            density: m,
            error_radius: 0.0,
            group_label: None,
        };
        SoinnGraph::from_parts(
            vec![mk(0.0, 9.0, 6.0), mk(1.0, 6.0, 5.0), mk(5.0, 1.0, 4.0)],
            &[(0, 1, 0), (1, 2, 0)],
        )
        .unwrap()
    }

    #[test]
    fn intra_class_insertion_splits_exactly() {
        let mut g = insertion_fixture();
        let d = DecayFactors::default();
        let rec = g.intra_class_insertion(&d).unwrap();
        assert_eq!((rec.q, rec.f), (0, 1));
        assert!(rec.kept);
        assert_eq!(g.node_count(), 4);
        let (q, f, r) = (&g.nodes()[0], &g.nodes()[1], &g.nodes()[3]);
        assert_eq!(q.local_error, 9.0 * (2.0 / 3.0));
        assert_eq!(f.local_error, 6.0 * (2.0 / 3.0));
        assert_eq!(q.density, 6.0 * 0.75);
        assert_eq!(f.density, 5.0 * 0.75);
        assert_eq!(r.local_error, (9.0 + 6.0) / 6.0);
        assert_eq!(r.density, (6.0 + 5.0) / 4.0);
        assert_eq!(r.error_radius, (9.0 / 6.0 + 6.0 / 5.0) / 4.0);
        assert_eq!(r.weight, vec![0.5]);
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(edges, vec![(0, 3), (1, 2), (1, 3)]);
    }

    #[test]
    fn intra_class_insertion_rolls_back() {
        // f's mean error is far below q's, so the new radius is not below both.
        let mut g = insertion_fixture();
        g.nodes[1].local_error = 0.1;
        g.nodes[2].local_error = 0.0;
        let before = g.clone();
        let rec = g.intra_class_insertion(&DecayFactors::default()).unwrap();
        assert!(!rec.kept);
        assert_eq!(g, before);
    }

    #[test]
    fn prune_rules() {
        let mk = |w: f64, m: f64| SoinnNode {
            weight: vec![w],
            local_error: 0.0,
            density: m,
            error_radius: 0.0,
            group_label: None,
        };
        // mean density = 4; node 3 isolated, node 2 single-edge with low density
        let mut g = SoinnGraph::from_parts(
            vec![mk(0.0, 6.0), mk(1.0, 6.0), mk(2.0, 1.0), mk(9.0, 3.0), mk(0.5, 4.0)],
            &[(0, 1, 0), (1, 2, 0), (0, 4, 0), (1, 4, 0)],
        )
        .unwrap();
        assert_eq!(g.prune(), 2);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn label_groups_examples() {
        let nodes: Vec<SoinnNode> = (0..5).map(|i| node(&[i as f64])).collect();
        let g = label_groups(SoinnGraph::from_parts(nodes.clone(), &[]).unwrap());
        assert_eq!(g.group_count, 5);
        let mut all = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                all.push((a, b, 0));
            }
        }
        let g = label_groups(SoinnGraph::from_parts(nodes, &all).unwrap());
        assert_eq!(g.group_count, 1);
        assert_eq!(label_groups(g.clone()), g);
    }

    fn union_find_partition(n: usize, edges: &[(usize, usize, usize)]) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b, _) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..n).map(|i| find(&mut parent, i)).collect()
    }

    proptest! {
        #[test]
        fn label_groups_matches_union_find(n in 1usize..25, density in 0.0f64..0.3, seed in any::<u64>()) {
            let mut rng = RngSeed(seed).rng();
            let nodes: Vec<SoinnNode> = (0..n).map(|i| node(&[i as f64])).collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random::<f64>() < density {
                        edges.push((a, b, 0));
                    }
                }
            }
            let g = label_groups(SoinnGraph::from_parts(nodes, &edges).unwrap());
            let roots = union_find_partition(n, &edges);
            for a in 0..n {
                for b in 0..n {
                    let same = g.nodes()[a].group_label == g.nodes()[b].group_label;
                    prop_assert_eq!(same, roots[a] == roots[b]);
                }
            }
            let distinct: std::collections::BTreeSet<usize> = roots.into_iter().collect();
            prop_assert_eq!(g.group_count, distinct.len());
        }

        #[test]
        fn structural_invariants(seed in any::<u64>(), lambda in 5usize..40, age_dead in 1usize..30) {
            let ds = crate::data::gen_simple(60, 5.0, RngSeed(seed)).unwrap();
            let p = SoinnParams { lambda, age_dead, ..SoinnParams::default() };
            let mut rng = RngSeed(seed ^ 7).rng();
            let mut g = SoinnGraph::with_seeds(ds.samples()[0].clone(), ds.samples()[1].clone(), 1);
            for step in 1..=240 {
                let x = &ds.samples()[rng.random_range(0..ds.len())];
                g.process_sample(x, step, &p, Threshold::Adaptive).unwrap();
                prop_assert!(g.edges().iter().all(|e| e.age <= age_dead));
                prop_assert!(g.node_count() <= 2 + step + step / lambda);
                prop_assert!(g.edges().iter().all(|e| e.a != e.b && e.b < g.node_count()));
            }
        }

        #[test]
        fn rate_identities(t in 1u32..1_000_000) {
            let t = f64::from(t);
            // The rates are the correctly rounded reciprocals, so the products
            // land on 1 up to one rounding step.
            prop_assert_eq!(winner_rate(t), 1.0 / t);
            prop_assert_eq!(neighbor_rate(t), 1.0 / (100.0 * t));
            prop_assert!((winner_rate(t) * t - 1.0).abs() <= f64::EPSILON);
            prop_assert!((neighbor_rate(t) * (100.0 * t) - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn identical_points_are_harmless() {
        let ds = Dataset::new("same", vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = soinn_train(&ds, &SoinnParams::default(), RngSeed(1)).unwrap();
        assert!(g.node_count() >= 1 && g.group_count >= 1);
        let one = Dataset::new("one", vec![vec![1.0]]).unwrap();
        assert!(soinn_train(&one, &SoinnParams::default(), RngSeed(1)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ds = crate::data::gen_simple(50, 8.0, RngSeed(2)).unwrap();
        let g = soinn_train(&ds, &SoinnParams::default(), RngSeed(2)).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: SoinnGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["edges"].is_array() && v["nodes"][0]["local_error"].is_number());
    }

    #[test]
    fn prototypes_follow_nodes() {
        let ds = crate::data::gen_simple(50, 8.0, RngSeed(5)).unwrap();
        let g = soinn_train(&ds, &SoinnParams::default(), RngSeed(5)).unwrap();
        let p = soinn_prototypes(&g, &ds);
        assert_eq!(p.len(), g.node_count());
        assert_eq!(p.suggested_k, Some(g.group_count));
        let unlabeled = Dataset::new("u", ds.samples().to_vec()).unwrap();
        assert!(soinn_prototypes(&g, &unlabeled).majority_labels.is_none());
    }
}
