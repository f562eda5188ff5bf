//! Lloyd's K-means with seeded initialization and empty-cluster repair.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{cluster_means, nearest, sq_dist};
use crate::rng::RngSeed;

/// Convergence threshold on the largest centroid displacement.
pub const CENTROID_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// SSE after each assignment step; never increases.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Independent seeded starts; the lowest-SSE model wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 300,
            restarts: 50,
        }
    }
}

/// Each point's nearest centroid, ties to the lowest index.
pub fn assign_nearest(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centroids).0).collect()
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn sse(points: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: assignment.len(),
        });
    }
    let mut total = 0.0;
    for (p, &c) in points.iter().zip(assignment) {
        let centroid = centroids.get(c).ok_or(Error::ClusterOutOfRange {
            id: c,
            k: centroids.len(),
        })?;
        total += sq_dist(p, centroid);
    }
    Ok(total)
}

/// `k` distinct rows chosen uniformly by `seed`.
pub fn sample_centroids(points: &[Vec<f64>], k: usize, seed: RngSeed) -> Vec<Vec<f64>> {
    sample(&mut seed.rng(), points.len(), k)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

pub fn kmeans_fit(
    ds: &Dataset,
    k: usize,
    init: Option<Vec<Vec<f64>>>,
    max_iter: usize,
    seed: RngSeed,
) -> Result<KMeansModel> {
    let points = ds.samples();
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::param("k", format!("k = {k} exceeds {} samples", points.len())));
    }
    let centroids = match init {
        Some(c) => {
            if c.len() != k {
                return Err(Error::param("init", format!("{} centroids given for k = {k}", c.len())));
            }
            if let Some(bad) = c.iter().find(|v| v.len() != ds.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: ds.dim(),
                    got: bad.len(),
                });
            }
            if c.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::param("init", "centroids must be finite"));
            }
            c
        }
        None => sample_centroids(points, k, seed),
    };
    Ok(lloyd(points, centroids, max_iter.max(1)))
}

/// Best-SSE model over `restarts` seeded starts. The first start uses `seed`
/// itself, so one restart reproduces [`kmeans_fit`].
pub fn kmeans_fit_restarts(ds: &Dataset, k: usize, config: &KMeansConfig, seed: RngSeed) -> Result<KMeansModel> {
    let mut best: Option<KMeansModel> = None;
    for r in 0..config.restarts.max(1) {
        let start = if r == 0 { seed } else { seed.derive(r as u64) };
        let model = kmeans_fit(ds, k, None, config.max_iter, start)?;
        if best.as_ref().is_none_or(|b| model.sse() < b.sse()) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansModel {
    let k = centroids.len();
    let mut assignment = Vec::new();
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        assignment = assign_nearest(points, &centroids);
        sse_history.push(sse(points, &assignment, &centroids).expect("ids in range"));

        let means = cluster_means(points, &assignment, k);
        let mut next: Vec<Vec<f64>> = means
            .iter()
            .zip(&centroids)
            .map(|(m, old)| m.clone().unwrap_or_else(|| old.clone()))
            .collect();
        let empty: Vec<usize> = (0..k).filter(|&j| means[j].is_none()).collect();
        repair_empty(points, &mut assignment, &mut next, &empty);

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = next;
        if shift < CENTROID_TOLERANCE {
            break;
        }
    }
    KMeansModel {
        centroids,
        assignment,
        sse_history,
        iterations,
    }
}

/// Re-seed each empty cluster at the point farthest from its own centroid,
/// moving that point into the empty cluster. Donor clusters are never emptied.
pub(crate) fn repair_empty(
    points: &[Vec<f64>],
    assignment: &mut [usize],
    centroids: &mut [Vec<f64>],
    empty: &[usize],
) {
    if empty.is_empty() {
        return;
    }
    let mut sizes = vec![0usize; centroids.len()];
    assignment.iter().for_each(|&c| sizes[c] += 1);
    for &e in empty {
        let candidate = points
            .iter()
            .enumerate()
            .filter(|&(i, _)| sizes[assignment[i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &centroids[assignment[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = candidate {
            sizes[assignment[i]] -= 1;
            sizes[e] += 1;
            assignment[i] = e;
            centroids[e] = points[i].clone();
        }
    }
}
