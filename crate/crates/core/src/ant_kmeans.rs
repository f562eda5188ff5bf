//! Ant K-means: K-means whose assignment step is sampled by a small colony of
//! ants, biased by pheromone on object-to-centroid links and by inverse
//! distance, with a perturbation step to leave repeated solutions.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{cluster_means, dist, mean, sq_dist};
use crate::kmeans::repair_empty;
use crate::rng::RngSeed;

pub const INITIAL_PHEROMONE: f64 = 1.0;
pub const PHEROMONE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AkParams {
    /// Pheromone exponent.
    pub alpha: f64,
    /// Visibility exponent.
    pub beta: f64,
    /// Evaporation rate.
    pub rho: f64,
    /// Deposit constant.
    pub q: f64,
    pub n_iter: usize,
    pub n_ants: usize,
    /// Fraction of objects reassigned when the objective repeats.
    pub perturbation: f64,
}

impl Default for AkParams {
    fn default() -> Self {
        AkParams {
            alpha: 0.5,
            beta: 1.0,
            rho: 0.9,
            q: 1.0,
            n_iter: 500,
            n_ants: 2,
            perturbation: 0.1,
        }
    }
}

impl AkParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.alpha) {
            return Err(Error::param("ak.alpha", "must be finite and >= 0"));
        }
        if !finite_nonneg(self.beta) {
            return Err(Error::param("ak.beta", "must be finite and >= 0"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("ak.rho", "must lie in (0, 1)"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::param("ak.q", "must be finite and > 0"));
        }
        if self.n_iter == 0 {
            return Err(Error::param("ak.n_iter", "must be at least 1"));
        }
        if self.n_ants == 0 {
            return Err(Error::param("ak.n_ants", "must be at least 1"));
        }
        if !(self.perturbation > 0.0 && self.perturbation <= 1.0) {
            return Err(Error::param("ak.perturbation", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkState {
    pub centroids: Vec<Vec<f64>>,
    /// One row per object, one column per cluster.
    pub pheromone: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub twcv: f64,
    pub best_twcv: f64,
    pub best_centroids: Vec<Vec<f64>>,
    pub best_assignment: Vec<usize>,
    /// Best objective after each iteration.
    pub best_history: Vec<f64>,
}

impl AkState {
    fn new(points: &[Vec<f64>], centroids: Vec<Vec<f64>>) -> Self {
        let nc = centroids.len();
        let assignment = crate::kmeans::assign_nearest(points, &centroids);
        let twcv = twcv(points, &assignment, &centroids).expect("ids in range");
        AkState {
            pheromone: vec![vec![INITIAL_PHEROMONE; nc]; points.len()],
            best_twcv: twcv,
            best_centroids: centroids.clone(),
            best_assignment: assignment.clone(),
            centroids,
            assignment,
            twcv,
            best_history: Vec::new(),
        }
    }

    pub fn nc(&self) -> usize {
        self.centroids.len()
    }

    fn adopt(&mut self, assignment: Vec<usize>, centroids: Vec<Vec<f64>>, twcv: f64) {
        self.assignment = assignment;
        self.centroids = centroids;
        self.twcv = twcv;
        self.record_best();
    }

    fn record_best(&mut self) {
        if self.twcv < self.best_twcv {
            self.best_twcv = self.twcv;
            self.best_assignment = self.assignment.clone();
            self.best_centroids = self.centroids.clone();
        }
    }
}

/// Total within-cluster variance: squared distance of each object to its
/// cluster's center, summed.
pub fn twcv(points: &[Vec<f64>], assignment: &[usize], centers: &[Vec<f64>]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: assignment.len(),
        });
    }
    points.iter().zip(assignment).try_fold(0.0, |acc, (x, &c)| {
        let center = centers.get(c).ok_or(Error::ClusterOutOfRange { id: c, k: centers.len() })?;
        Ok(acc + sq_dist(x, center))
    })
}

pub fn cluster_center<'a>(members: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    mean(members).ok_or(Error::EmptyCluster)
}

/// Probability of moving one object to each centroid, proportional to
/// `pheromone^alpha * (1/distance)^beta`. An object sitting exactly on a
/// centroid goes there with certainty.
pub fn choice_probabilities(pheromone: &[f64], distances: &[f64], p: &AkParams) -> Vec<f64> {
    let one_hot = |j: usize| {
        let mut v = vec![0.0; distances.len()];
        v[j] = 1.0;
        v
    };
    if let Some(j) = distances.iter().position(|&d| d == 0.0) {
        return one_hot(j);
    }
    let weights: Vec<f64> = pheromone
        .iter()
        .zip(distances)
        .map(|(&t, &d)| t.powf(p.alpha) * d.recip().powf(p.beta))
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        let nearest = distances
            .iter()
            .enumerate()
            .fold(0, |best, (j, &d)| if d < distances[best] { j } else { best });
        return one_hot(nearest);
    }
    weights.into_iter().map(|w| w / total).collect()
}

/// Evaporate every link once, then let each ant deposit `q / twcv` on the
/// links it chose. Ants with a zero objective deposit nothing.
pub fn pheromone_update(pheromone: &mut [Vec<f64>], ants: &[(&[usize], f64)], p: &AkParams) {
    for row in pheromone.iter_mut() {
        for t in row.iter_mut() {
            *t = (*t * (1.0 - p.rho)).max(PHEROMONE_FLOOR);
        }
    }
    for &(assignment, objective) in ants {
        if objective <= 0.0 {
            continue;
        }
        let deposit = p.q / objective;
        for (row, &c) in pheromone.iter_mut().zip(assignment) {
            row[c] += deposit;
        }
    }
}

fn centers_for(points: &[Vec<f64>], assignment: &mut [usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = previous.len();
    let means = cluster_means(points, assignment, k);
    let empty: Vec<usize> = (0..k).filter(|&j| means[j].is_none()).collect();
    let mut centers: Vec<Vec<f64>> = means
        .into_iter()
        .zip(previous)
        .map(|(m, old)| m.unwrap_or_else(|| old.clone()))
        .collect();
    if !empty.is_empty() {
        repair_empty(points, assignment, &mut centers, &empty);
        centers = cluster_means(points, assignment, k)
            .into_iter()
            .zip(centers)
            .map(|(m, c)| m.unwrap_or(c))
            .collect();
    }
    centers
}

/// Reassign a random `strength` fraction of objects (at least one) to
/// uniformly random clusters, reset their pheromone, and recompute centers.
/// The best-so-far snapshot is left alone.
pub fn perturb<R: Rng>(state: &mut AkState, points: &[Vec<f64>], strength: f64, rng: &mut R) {
    let n = points.len();
    let count = ((strength * n as f64).round() as usize).clamp(1, n);
    let nc = state.nc();
    for i in sample(rng, n, count) {
        state.assignment[i] = rng.random_range(0..nc);
        state.pheromone[i].fill(INITIAL_PHEROMONE);
    }
    state.centroids = centers_for(points, &mut state.assignment, &state.centroids);
    state.twcv = twcv(points, &state.assignment, &state.centroids).expect("ids in range");
}

fn ant_sweep<R: Rng>(points: &[Vec<f64>], state: &AkState, p: &AkParams, rng: &mut R) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let mut assignment: Vec<usize> = points
        .iter()
        .zip(&state.pheromone)
        .map(|(x, tau)| {
            let d: Vec<f64> = state.centroids.iter().map(|c| dist(x, c)).collect();
            let probs = choice_probabilities(tau, &d, p);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            probs
                .iter()
                .position(|&pr| {
                    acc += pr;
                    u < acc
                })
                .unwrap_or_else(|| probs.iter().rposition(|&pr| pr > 0.0).expect("some mass"))
        })
        .collect();
    let centers = centers_for(points, &mut assignment, &state.centroids);
    let objective = twcv(points, &assignment, &centers).expect("ids in range");
    (assignment, centers, objective)
}

/// Run the colony for `p.n_iter` iterations from the given centroids.
pub fn ak_fit(ds: &Dataset, nc: usize, init_centroids: Vec<Vec<f64>>, p: &AkParams, seed: RngSeed) -> Result<AkState> {
    p.validate()?;
    let points = ds.samples();
    if nc == 0 {
        return Err(Error::param("nc", "must be at least 1"));
    }
    if nc > points.len() {
        return Err(Error::param("nc", format!("nc = {nc} exceeds {} samples", points.len())));
    }
    if init_centroids.len() != nc {
        return Err(Error::param("init_centroids", format!("{} centroids given for nc = {nc}", init_centroids.len())));
    }
    if let Some(bad) = init_centroids.iter().find(|c| c.len() != ds.dim()) {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            got: bad.len(),
        });
    }

    let mut rng = seed.rng();
    let mut state = AkState::new(points, init_centroids);
    // Bring the starting point in line with the objective the ants will report.
    let mut start = state.assignment.clone();
    let centers = centers_for(points, &mut start, &state.centroids);
    let objective = twcv(points, &start, &centers)?;
    state.best_twcv = f64::INFINITY;
    state.adopt(start, centers, objective);

    for _ in 0..p.n_iter {
        let sweeps: Vec<_> = (0..p.n_ants).map(|_| ant_sweep(points, &state, p, &mut rng)).collect();
        let deposits: Vec<(&[usize], f64)> = sweeps.iter().map(|(a, _, t)| (a.as_slice(), *t)).collect();
        pheromone_update(&mut state.pheromone, &deposits, p);

        let previous = state.twcv;
        let (assignment, centers, objective) = sweeps
            .into_iter()
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("at least one ant");
        state.adopt(assignment, centers, objective);
        state.best_history.push(state.best_twcv);

        if nc == 1 {
            break;
        }
        if (state.twcv - previous).abs() <= 1e-12 * previous.abs().max(1.0) {
            perturb(&mut state, points, p.perturbation, &mut rng);
            state.record_best();
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::kmeans::{kmeans_fit, sse};
    use proptest::prelude::*;

    fn rows(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn twcv_examples() {
        assert_eq!(twcv(&rows(&[0.0, 2.0]), &[0, 0], &rows(&[1.0])).unwrap(), 2.0);
        let pts = rows(&[3.0, -1.0, 8.0]);
        assert_eq!(twcv(&pts, &[0, 1, 2], &pts).unwrap(), 0.0);
        assert!(matches!(
            twcv(&pts, &[0, 1, 5], &pts),
            Err(Error::ClusterOutOfRange { id: 5, k: 3 })
        ));
    }

    #[test]
    fn twcv_agrees_with_sse() {
        let mut rng = RngSeed(11).rng();
        let pts: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let centers: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let a: Vec<usize> = (0..50).map(|_| rng.random_range(0..4)).collect();
        let t = twcv(&pts, &a, &centers).unwrap();
        assert!((t - sse(&pts, &a, &centers).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn center_examples() {
        let pts = [vec![0.0, 0.0], vec![2.0, 2.0]];
        assert_eq!(cluster_center(pts.iter().map(Vec::as_slice)).unwrap(), vec![1.0, 1.0]);
        assert_eq!(cluster_center([pts[1].as_slice()]).unwrap(), vec![2.0, 2.0]);
        assert!(matches!(cluster_center(std::iter::empty()), Err(Error::EmptyCluster)));

        let mut rng = RngSeed(4).rng();
        let many: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random(), rng.random()]).collect();
        let c = cluster_center(many.iter().map(Vec::as_slice)).unwrap();
        let (mut sx, mut sy) = (0.0, 0.0);
        for p in &many {
            sx += p[0];
            sy += p[1];
        }
        assert!((c[0] - sx / 100.0).abs() < 1e-12 && (c[1] - sy / 100.0).abs() < 1e-12);
    }

    #[test]
    fn probability_examples() {
        let p = AkParams::default();
        assert_eq!(choice_probabilities(&[1.0, 1.0], &[2.0, 2.0], &p), vec![0.5, 0.5]);
        let visibility_only = AkParams { alpha: 0.0, ..p.clone() };
        let v = choice_probabilities(&[7.0, 0.2], &[1.0, 3.0], &visibility_only);
        assert!((v[0] - 0.75).abs() < 1e-15 && (v[1] - 0.25).abs() < 1e-15);
        let v = choice_probabilities(&[4.0, 1.0], &[1.0, 1.0], &p);
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15 && (v[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(choice_probabilities(&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &p), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn pheromone_examples() {
        let keep = AkParams { rho: 0.0, ..AkParams::default() };
        let mut tau = vec![vec![1.0, 1.0]];
        pheromone_update(&mut tau, &[(&[0], 2.0)], &keep);
        assert_eq!(tau, vec![vec![1.5, 1.0]]);

        let wipe = AkParams { rho: 1.0, ..AkParams::default() };
        let mut tau = vec![vec![3.0, 5.0], vec![2.0, 9.0]];
        pheromone_update(&mut tau, &[(&[0, 1], 4.0)], &wipe);
        assert_eq!(tau, vec![vec![PHEROMONE_FLOOR + 0.25, PHEROMONE_FLOOR], vec![PHEROMONE_FLOOR, PHEROMONE_FLOOR + 0.25]]);

        // 3x2 matrix, two ants, rho = 0.5, q = 2
        let p = AkParams { rho: 0.5, q: 2.0, ..AkParams::default() };
        let mut tau = vec![vec![1.0, 2.0], vec![4.0, 0.5], vec![1.0, 1.0]];
        pheromone_update(&mut tau, &[(&[0, 1, 1], 4.0), (&[0, 0, 1], 8.0)], &p);
        let expected = vec![vec![0.5 + 0.5 + 0.25, 1.0], vec![2.0 + 0.25, 0.25 + 0.5], vec![0.5, 0.5 + 0.5 + 0.25]];
        assert_eq!(tau, expected);

        let mut tau = vec![vec![1.0]];
        pheromone_update(&mut tau, &[(&[0], 0.0)], &p);
        assert_eq!(tau, vec![vec![0.5]]);
    }

    fn fitted_state(seed: u64) -> (Vec<Vec<f64>>, AkState) {
        let ds = crate::data::gen_simple(20, 3.0, RngSeed(seed)).unwrap();
        let init = crate::kmeans::sample_centroids(ds.samples(), 3, RngSeed(seed));
        let p = AkParams { n_iter: 20, ..AkParams::default() };
        (ds.samples().to_vec(), ak_fit(&ds, 3, init, &p, RngSeed(seed)).unwrap())
    }

    #[test]
    fn perturb_leaves_snapshot() {
        let (pts, mut state) = fitted_state(1);
        let snapshot = (state.best_twcv, state.best_assignment.clone(), state.best_centroids.clone());
        let mut a = state.clone();
        perturb(&mut state, &pts, 0.3, &mut RngSeed(9).rng());
        perturb(&mut a, &pts, 0.3, &mut RngSeed(9).rng());
        assert_eq!(a, state);
        assert_eq!(snapshot, (state.best_twcv, state.best_assignment.clone(), state.best_centroids.clone()));
        assert!((state.twcv - twcv(&pts, &state.assignment, &state.centroids).unwrap()).abs() < 1e-12);
        let mut full = state.clone();
        perturb(&mut full, &pts, 1.0, &mut RngSeed(10).rng());
        assert!(full.pheromone.iter().flatten().all(|&t| t == INITIAL_PHEROMONE));
    }

    #[test]
    fn single_cluster() {
        let ds = crate::data::gen_simple(10, 2.0, RngSeed(0)).unwrap();
        let init = vec![vec![5.0, 5.0]];
        let s = ak_fit(&ds, 1, init, &AkParams::default(), RngSeed(0)).unwrap();
        assert!(s.best_assignment.iter().all(|&c| c == 0));
        assert_eq!(s.best_history.len(), 1);
        let m = mean(ds.samples().iter().map(Vec::as_slice)).unwrap();
        let total: f64 = ds.samples().iter().map(|x| sq_dist(x, &m)).sum();
        assert!((s.best_twcv - total).abs() < 1e-9);
    }

    #[test]
    fn far_blobs_match_kmeans() {
        let ds = crate::data::gen_simple(30, 20.0, RngSeed(2)).unwrap();
        let labels = ds.labels().unwrap();
        let means: Vec<Vec<f64>> = (0..2)
            .map(|c| {
                mean(ds.samples().iter().zip(labels).filter(|(_, &l)| l == c).map(|(x, _)| x.as_slice())).unwrap()
            })
            .collect();
        let s = ak_fit(&ds, 2, means.clone(), &AkParams { n_iter: 50, ..AkParams::default() }, RngSeed(2)).unwrap();
        let km = kmeans_fit(&ds, 2, Some(means), 100, RngSeed(2)).unwrap();
        assert_eq!(s.best_assignment, km.assignment);
        assert!((s.best_twcv - km.sse()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let ds = crate::data::gen_simple(2, 2.0, RngSeed(0)).unwrap();
        let p = AkParams::default();
        assert!(ak_fit(&ds, 5, vec![vec![0.0, 0.0]; 5], &p, RngSeed(0)).is_err());
        assert!(ak_fit(&ds, 2, vec![vec![0.0, 0.0]], &p, RngSeed(0)).is_err());
        assert!(ak_fit(&ds, 1, vec![vec![0.0]], &p, RngSeed(0)).is_err());
        assert!(ak_fit(&ds, 1, vec![vec![0.0, 0.0]], &AkParams { rho: 1.0, ..p }, RngSeed(0)).is_err());
    }

    #[test]
    fn snapshot_reevaluates_exactly() {
        let (pts, s) = fitted_state(6);
        assert_eq!(twcv(&pts, &s.best_assignment, &s.best_centroids).unwrap(), s.best_twcv);
        assert!(s.pheromone.iter().flatten().all(|&t| t > 0.0));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AkState>(&json).unwrap(), s);
    }

    proptest! {
        #[test]
        fn probabilities_normalized(
            tau in proptest::collection::vec(1e-6f64..100.0, 1..8),
            alpha in 0.0f64..3.0,
            beta in 0.0f64..3.0,
            seed in any::<u64>(),
        ) {
            let mut rng = RngSeed(seed).rng();
            let d: Vec<f64> = tau.iter().map(|_| rng.random_range(1e-3..10.0)).collect();
            let p = AkParams { alpha, beta, ..AkParams::default() };
            let v = choice_probabilities(&tau, &d, &p);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn higher_alpha_favors_top_trail(tau in proptest::collection::vec(1e-3f64..100.0, 2..6), a in 0.0f64..2.0, extra in 0.0f64..2.0) {
            let d = vec![1.5; tau.len()];
            let top = tau.iter().enumerate().fold(0, |b, (j, &t)| if t > tau[b] { j } else { b });
            let lo = choice_probabilities(&tau, &d, &AkParams { alpha: a, ..AkParams::default() });
            let hi = choice_probabilities(&tau, &d, &AkParams { alpha: a + extra, ..AkParams::default() });
            prop_assert!(hi[top] >= lo[top] - 1e-12);
        }
    }
}
