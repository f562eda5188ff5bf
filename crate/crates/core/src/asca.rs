//! Ant System-based Clustering Algorithm (ASCA).
//!
//! Starting from a single cluster, each round divides the loosest cluster,
//! lets objects migrate to closer centers, merges overlapping clusters, lets
//! objects migrate again and sets aside outliers. Rounds repeat until the
//! total within-cluster variance stops changing.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{dist, majority, nearest, sq_dist};
use crate::pipeline::{PrototypeSet, PrototypeSource};
use crate::rng::RngSeed;

pub const TWCV_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscaParams {
    /// Fixed acceptance threshold for object moves; a fresh uniform draw per
    /// decision when `None`.
    pub epsilon: Option<f64>,
    /// Outlier scale; 1000 puts the cut at three standard deviations.
    pub theta: f64,
    pub max_rounds: usize,
    /// Merging never reduces the cluster count below this.
    pub min_clusters: usize,
}

impl Default for AscaParams {
    fn default() -> Self {
        AscaParams {
            epsilon: None,
            theta: 1000.0,
            max_rounds: 50,
            min_clusters: 1,
        }
    }
}

impl AscaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::param("asca.theta", "must be finite and > 0"));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("asca.max_rounds", "must be at least 1"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::param("asca.epsilon", "must lie in (0, 1)"));
            }
        }
        if self.min_clusters == 0 {
            return Err(Error::param("asca.min_clusters", "must be at least 1"));
        }
        Ok(())
    }
}

/// The subprocedures of one round, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AscaStep {
    Divide,
    AgglomerateObjects,
    Agglomerate,
    Remove,
}

pub const ROUND: [AscaStep; 5] = [
    AscaStep::Divide,
    AscaStep::AgglomerateObjects,
    AscaStep::Agglomerate,
    AscaStep::AgglomerateObjects,
    AscaStep::Remove,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscaClustering {
    /// Cluster of each object; `None` marks an object set aside as an outlier.
    pub assignment: Vec<Option<usize>>,
    pub centers: Vec<Vec<f64>>,
    /// Objective after each completed round.
    pub twcv_history: Vec<f64>,
}

impl AscaClustering {
    /// Every object in cluster 0.
    pub fn single(points: &[Vec<f64>]) -> Self {
        let mut c = AscaClustering {
            assignment: vec![Some(0); points.len()],
            centers: vec![vec![0.0; points.first().map_or(0, Vec::len)]],
            twcv_history: Vec::new(),
        };
        c.refresh_centers(points);
        c
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        self.assignment.iter().flatten().for_each(|&c| sizes[c] += 1);
        sizes
    }

    pub fn removed(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(cluster))
            .map(|(i, _)| i)
    }

    /// Recompute centers from live members and drop clusters left empty.
    pub fn refresh_centers(&mut self, points: &[Vec<f64>]) {
        let dim = self.centers.first().map_or(0, Vec::len);
        let k = self.k();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, a) in points.iter().zip(&self.assignment) {
            if let Some(c) = *a {
                counts[c] += 1;
                sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
            }
        }
        if counts.iter().all(|&n| n > 0) {
            self.centers = sums
                .into_iter()
                .zip(&counts)
                .map(|(s, &n)| s.into_iter().map(|v| v / n as f64).collect())
                .collect();
            return;
        }
        let mut remap = vec![None; k];
        let mut centers = Vec::new();
        for (c, (s, n)) in sums.into_iter().zip(counts).enumerate() {
            if n > 0 {
                remap[c] = Some(centers.len());
                centers.push(s.into_iter().map(|v| v / n as f64).collect());
            }
        }
        for a in self.assignment.iter_mut().flatten() {
            *a = remap[*a].expect("member keeps its cluster");
        }
        self.centers = centers;
    }

    /// Objective over live objects.
    pub fn twcv(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .filter_map(|(x, a)| a.map(|c| sq_dist(x, &self.centers[c])))
            .sum()
    }

    fn cluster_sse(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let mut sse = vec![0.0; self.k()];
        for (x, a) in points.iter().zip(&self.assignment) {
            if let Some(c) = *a {
                sse[c] += sq_dist(x, &self.centers[c]);
            }
        }
        sse
    }

    /// Dense assignment with every object attached.
    pub fn labels(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .map(|a| a.expect("no removed objects remain"))
            .collect()
    }
}

/// Split the cluster with the largest within-cluster variance around its two
/// mutually farthest members.
pub fn asca_divide(c: &mut AscaClustering, points: &[Vec<f64>]) {
    let sse = c.cluster_sse(points);
    let Some(target) = (0..c.k()).fold(None, |best: Option<usize>, j| match best {
        Some(b) if sse[b] >= sse[j] => Some(b),
        _ => Some(j),
    }) else {
        return;
    };
    let members: Vec<usize> = c.members(target).collect();
    if members.len() < 2 {
        return;
    }
    let mut far = (members[0], members[0], 0.0);
    for (n, &i) in members.iter().enumerate() {
        for &j in &members[n + 1..] {
            let d = sq_dist(&points[i], &points[j]);
            if d > far.2 {
                far = (i, j, d);
            }
        }
    }
    if far.2 == 0.0 {
        return;
    }
    let (a, b) = (points[far.0].clone(), points[far.1].clone());
    let new_id = c.k();
    c.centers.push(b.clone());
    for i in members {
        if sq_dist(&points[i], &b) < sq_dist(&points[i], &a) {
            c.assignment[i] = Some(new_id);
        }
    }
    c.refresh_centers(points);
}

/// One sweep over the objects in random order. Each object may move to its
/// nearest center when that strictly lowers the objective and a uniform draw
/// falls below its relative distance gain. Never raises the objective.
pub fn asca_agglomerate_objects<R: Rng>(c: &mut AscaClustering, points: &[Vec<f64>], p: &AscaParams, rng: &mut R) -> usize {
    let before = c.clone();
    let before_twcv = c.twcv(points);
    let mut sizes = c.sizes();
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| c.assignment[i].is_some()).collect();
    order.shuffle(rng);
    let mut moved = 0;
    for i in order {
        let from = c.assignment[i].expect("live object");
        let na = sizes[from] as f64;
        if sizes[from] < 2 {
            continue;
        }
        let x = &points[i];
        let (to, _) = nearest(x, &c.centers);
        if to == from {
            continue;
        }
        let nb = sizes[to] as f64;
        let (da2, db2) = (sq_dist(x, &c.centers[from]), sq_dist(x, &c.centers[to]));
        let delta = -na / (na - 1.0) * da2 + nb / (nb + 1.0) * db2;
        if delta >= 0.0 {
            continue;
        }
        let (da, db) = (da2.sqrt(), db2.sqrt());
        let eps = p.epsilon.unwrap_or_else(|| rng.random());
        if eps >= (da - db) / da {
            continue;
        }
        for (ca, &v) in c.centers[from].iter_mut().zip(x) {
            *ca = (na * *ca - v) / (na - 1.0);
        }
        for (cb, &v) in c.centers[to].iter_mut().zip(x) {
            *cb = (nb * *cb + v) / (nb + 1.0);
        }
        c.assignment[i] = Some(to);
        sizes[from] -= 1;
        sizes[to] += 1;
        moved += 1;
    }
    c.refresh_centers(points);
    if c.twcv(points) > before_twcv {
        // Only rounding in the running centers can get here.
        *c = before;
        return 0;
    }
    moved
}

/// Merge the closest pair of clusters when their center distance is below
/// the mean pairwise center distance and below the sum of their RMS radii.
/// At most one merge per call.
pub fn asca_agglomerate(c: &mut AscaClustering, points: &[Vec<f64>], min_clusters: usize) -> bool {
    let k = c.k();
    if k < 2 || k <= min_clusters {
        return false;
    }
    let mut total = 0.0;
    let mut closest = (0, 1, f64::INFINITY);
    for a in 0..k {
        for b in a + 1..k {
            let d = dist(&c.centers[a], &c.centers[b]);
            total += d;
            if d < closest.2 {
                closest = (a, b, d);
            }
        }
    }
    let mean_pair = total / (k * (k - 1) / 2) as f64;
    let (a, b, d) = closest;
    let sse = c.cluster_sse(points);
    let sizes = c.sizes();
    let radius = |j: usize| (sse[j] / sizes[j] as f64).sqrt();
    if !(d < mean_pair && d < radius(a) + radius(b)) {
        return false;
    }
    for x in c.assignment.iter_mut().flatten() {
        if *x == b {
            *x = a;
        }
    }
    c.refresh_centers(points);
    true
}

/// Set aside members lying farther from their center than the cluster's
/// mean member distance plus `(theta / 1000) * 3` standard deviations.
pub fn asca_remove(c: &mut AscaClustering, points: &[Vec<f64>], theta: f64) -> usize {
    let k = c.k();
    let dists: Vec<Option<f64>> = points
        .iter()
        .zip(&c.assignment)
        .map(|(x, a)| a.map(|j| dist(x, &c.centers[j])))
        .collect();
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (d, a) in dists.iter().zip(&c.assignment) {
        if let (Some(d), Some(j)) = (d, a) {
            sum[*j] += d;
            sum_sq[*j] += d * d;
            count[*j] += 1;
        }
    }
    let cut: Vec<f64> = (0..k)
        .map(|j| {
            let n = count[j] as f64;
            let m = sum[j] / n;
            let std = (sum_sq[j] / n - m * m).max(0.0).sqrt();
            m + theta / 1000.0 * 3.0 * std
        })
        .collect();
    let mut removed = 0;
    for (d, a) in dists.iter().zip(c.assignment.iter_mut()) {
        if let (Some(d), Some(j)) = (d, *a) {
            if *d > cut[j] && count[j] > 1 {
                *a = None;
                count[j] -= 1;
                removed += 1;
            }
        }
    }
    if removed > 0 {
        c.refresh_centers(points);
    }
    removed
}

/// Attach every set-aside object to its nearest center.
pub fn reattach(c: &mut AscaClustering, points: &[Vec<f64>]) {
    for (x, a) in points.iter().zip(c.assignment.iter_mut()) {
        if a.is_none() {
            *a = Some(nearest(x, &c.centers).0);
        }
    }
    c.refresh_centers(points);
}

/// Run rounds until the objective settles, calling `observe` after every
/// subprocedure. A round that would raise the objective is discarded and ends
/// the search.
pub fn asca_fit_observed(
    ds: &Dataset,
    p: &AscaParams,
    seed: RngSeed,
    mut observe: impl FnMut(AscaStep, &AscaClustering),
) -> Result<(AscaClustering, PrototypeSet)> {
    p.validate()?;
    if ds.len() < 2 {
        return Err(Error::InvalidDataset("ASCA needs at least two samples".into()));
    }
    let points = ds.samples();
    let mut rng = seed.rng();
    let mut c = AscaClustering::single(points);
    let mut previous = c.twcv(points);

    for _ in 0..p.max_rounds {
        let checkpoint = c.clone();
        for step in ROUND {
            match step {
                AscaStep::Divide => asca_divide(&mut c, points),
                AscaStep::AgglomerateObjects => {
                    asca_agglomerate_objects(&mut c, points, p, &mut rng);
                }
                AscaStep::Agglomerate => {
                    asca_agglomerate(&mut c, points, p.min_clusters);
                }
                AscaStep::Remove => {
                    asca_remove(&mut c, points, p.theta);
                }
            }
            observe(step, &c);
        }
        let current = c.twcv(points);
        if current > previous {
            c = checkpoint;
            break;
        }
        c.twcv_history.push(current);
        if previous - current < TWCV_TOLERANCE {
            break;
        }
        previous = current;
    }

    reattach(&mut c, points);
    let prototypes = asca_prototypes(&c, ds);
    Ok((c, prototypes))
}

pub fn asca_fit(ds: &Dataset, p: &AscaParams, seed: RngSeed) -> Result<(AscaClustering, PrototypeSet)> {
    asca_fit_observed(ds, p, seed, |_, _| {})
}

/// Final cluster centers with the majority class of their members.
pub fn asca_prototypes(c: &AscaClustering, ds: &Dataset) -> PrototypeSet {
    let majority_labels = ds.labels().map(|labels| {
        (0..c.k())
            .map(|j| majority(c.members(j).map(|i| labels[i]), ds.n_classes()).expect("nonempty cluster"))
            .collect()
    });
    PrototypeSet {
        prototypes: c.centers.clone(),
        majority_labels,
        suggested_k: None,
        source: PrototypeSource::Asca,
    }
}
