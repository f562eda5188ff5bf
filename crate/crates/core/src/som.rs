//! Sequential self-organizing map on a hexagonal lattice.
//!
//! Training runs a list of phases (by default a short rough phase followed by
//! a longer fine-tuning phase). Within a phase the learning rate and the
//! Gaussian neighborhood radius are held constant for an epoch and move
//! linearly from their start to end values across the phase's epochs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{majority, nearest, sq_dist};
use crate::pipeline::{PrototypeSet, PrototypeSource};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<Vec<f64>>,
    #[serde(skip)]
    positions: Vec<[f64; 2]>,
}

impl SomGrid {
    pub fn from_weights(rows: usize, cols: usize, weights: Vec<Vec<f64>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("rows/cols", "map needs at least one unit"));
        }
        if weights.len() != rows * cols {
            return Err(Error::param("weights", format!("{} weights for {rows}x{cols} units", weights.len())));
        }
        Ok(SomGrid {
            rows,
            cols,
            weights,
            positions: hex_positions(rows, cols),
        })
    }

    pub fn units(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    /// Lattice coordinate of a unit; odd rows are shifted half a step so every
    /// neighbor sits at distance 1.
    pub fn position(&self, unit: usize) -> [f64; 2] {
        self.positions[unit]
    }

    /// Restore lattice coordinates after deserialization.
    pub fn rebuild_positions(&mut self) {
        self.positions = hex_positions(self.rows, self.cols);
    }

    fn lattice_sq_dist(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.positions[a], self.positions[b]);
        (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)
    }

    /// Gaussian neighborhood weight between the BMU `b` and unit `i`.
    pub fn kernel(&self, b: usize, i: usize, sigma: f64) -> f64 {
        neighborhood(self.lattice_sq_dist(b, i), sigma)
    }
}

fn hex_positions(rows: usize, cols: usize) -> Vec<[f64; 2]> {
    let pitch = 3f64.sqrt() / 2.0;
    (0..rows * cols)
        .map(|u| {
            let (r, c) = (u / cols, u % cols);
            let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
            [c as f64 + shift, r as f64 * pitch]
        })
        .collect()
}

/// `exp(-d² / 2σ²)` on a squared lattice distance.
pub fn neighborhood(lattice_sq_dist: f64, sigma: f64) -> f64 {
    if lattice_sq_dist == 0.0 {
        return 1.0;
    }
    (-lattice_sq_dist / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Rough,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub epochs: usize,
    pub phase: Phase,
}

impl SomSchedule {
    pub fn validate(&self) -> Result<()> {
        let alpha_ok = |a: f64| a > 0.0 && a <= 1.0;
        if !alpha_ok(self.alpha_start) || !alpha_ok(self.alpha_end) {
            return Err(Error::param("som.alpha", "learning rates must lie in (0, 1]"));
        }
        if !(self.sigma_end > 0.0 && self.sigma_end <= self.sigma_start) {
            return Err(Error::param("som.sigma", "need 0 < sigma_end <= sigma_start"));
        }
        if self.epochs == 0 {
            return Err(Error::param("som.epochs", "each phase needs at least one epoch"));
        }
        Ok(())
    }

    /// (alpha, sigma) used throughout epoch `e` of this phase.
    pub fn at_epoch(&self, e: usize) -> (f64, f64) {
        let frac = if self.epochs <= 1 {
            0.0
        } else {
            e as f64 / (self.epochs - 1) as f64
        };
        (
            self.alpha_start + (self.alpha_end - self.alpha_start) * frac,
            self.sigma_start + (self.sigma_end - self.sigma_start) * frac,
        )
    }
}

/// Map size and training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    /// Initial learning rate.
    pub alpha: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub alpha_decay: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub epochs_rough: usize,
    pub epochs_fine: usize,
}

impl Default for SomConfig {
    fn default() -> Self {
        SomConfig {
            rows: 19,
            cols: 17,
            alpha: 0.5,
            alpha_decay: 0.99,
            sigma_start: 10.0,
            sigma_end: 2.0,
            epochs_rough: 3,
            epochs_fine: 10,
        }
    }
}

impl SomConfig {
    /// Rough and fine phases. The radius falls linearly over all epochs of
    /// both phases; the learning rate decays by `alpha_decay` per epoch.
    pub fn schedules(&self) -> Vec<SomSchedule> {
        let total = self.epochs_rough + self.epochs_fine;
        let sigma_at = |e: usize| {
            if total <= 1 {
                self.sigma_start
            } else {
                self.sigma_start + (self.sigma_end - self.sigma_start) * e as f64 / (total - 1) as f64
            }
        };
        let alpha_at = |e: usize| self.alpha * self.alpha_decay.powi(e as i32);
        let phase = |first: usize, epochs: usize, phase: Phase| SomSchedule {
            alpha_start: alpha_at(first),
            alpha_end: alpha_at(first + epochs - 1),
            sigma_start: sigma_at(first),
            sigma_end: sigma_at(first + epochs - 1),
            epochs,
            phase,
        };
        let mut out = Vec::new();
        if self.epochs_rough > 0 {
            out.push(phase(0, self.epochs_rough, Phase::Rough));
        }
        if self.epochs_fine > 0 {
            out.push(phase(self.epochs_rough, self.epochs_fine, Phase::Fine));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param("som.rows/cols", "must be at least 1"));
        }
        if !(self.alpha_decay > 0.0 && self.alpha_decay <= 1.0) {
            return Err(Error::param("som.alpha_decay", "must lie in (0, 1]"));
        }
        let schedules = self.schedules();
        if schedules.is_empty() {
            return Err(Error::param("som.epochs", "at least one epoch is required"));
        }
        schedules.iter().try_for_each(SomSchedule::validate)
    }
}

/// Weights drawn uniformly from [-1, 1]^dim.
pub fn som_init(rows: usize, cols: usize, dim: usize, seed: RngSeed) -> Result<SomGrid> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    let mut rng = seed.rng();
    let weights = (0..rows * cols)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    SomGrid::from_weights(rows, cols, weights)
}

/// Best matching unit, ties to the lowest index.
pub fn bmu(grid: &SomGrid, x: &[f64]) -> usize {
    nearest(x, &grid.weights).0
}

/// One sequential update: `m_i += alpha * h_bi * (x - m_i)` for every unit.
pub fn update_step(grid: &mut SomGrid, x: &[f64], alpha: f64, sigma: f64) -> usize {
    let b = bmu(grid, x);
    for i in 0..grid.weights.len() {
        let h = grid.kernel(b, i, sigma);
        let rate = alpha * h;
        if rate == 0.0 {
            continue;
        }
        for (w, &xv) in grid.weights[i].iter_mut().zip(x) {
            *w += rate * (xv - *w);
        }
    }
    b
}

pub fn som_train(mut grid: SomGrid, ds: &Dataset, schedules: &[SomSchedule], seed: RngSeed) -> Result<SomGrid> {
    if ds.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: ds.dim(),
        });
    }
    if schedules.is_empty() {
        return Err(Error::param("schedules", "at least one training phase is required"));
    }
    schedules.iter().try_for_each(SomSchedule::validate)?;
    let mut rng = seed.rng();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for schedule in schedules {
        for e in 0..schedule.epochs {
            let (alpha, sigma) = schedule.at_epoch(e);
            order.shuffle(&mut rng);
            for &i in &order {
                update_step(&mut grid, &ds.samples()[i], alpha, sigma);
            }
        }
    }
    Ok(grid)
}

/// Initialize and train a map from a config.
pub fn som_fit(ds: &Dataset, config: &SomConfig, seed: RngSeed) -> Result<SomGrid> {
    config.validate()?;
    let grid = som_init(config.rows, config.cols, ds.dim(), seed.derive(0))?;
    som_train(grid, ds, &config.schedules(), seed.derive(1))
}

/// Quantization energy with a fixed neighborhood radius:
/// `sum_i sum_j h_bj ||x_i - m_j||²`.
pub fn som_energy(grid: &SomGrid, ds: &Dataset, sigma: f64) -> f64 {
    ds.samples()
        .iter()
        .map(|x| {
            let b = bmu(grid, x);
            grid.weights
                .iter()
                .enumerate()
                .map(|(j, m)| grid.kernel(b, j, sigma) * sq_dist(x, m))
                .sum::<f64>()
        })
        .sum()
}

/// Units that won at least one sample, with the majority class of their samples.
pub fn som_prototypes(grid: &SomGrid, ds: &Dataset) -> PrototypeSet {
    let hits: Vec<usize> = ds.samples().iter().map(|x| bmu(grid, x)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); grid.units()];
    for (i, &u) in hits.iter().enumerate() {
        members[u].push(i);
    }
    let live: Vec<usize> = (0..grid.units()).filter(|&u| !members[u].is_empty()).collect();
    let majority_labels = ds.labels().map(|labels| {
        live.iter()
            .map(|&u| majority(members[u].iter().map(|&i| labels[i]), ds.n_classes()).expect("live unit"))
            .collect()
    });
    PrototypeSet {
        prototypes: live.iter().map(|&u| grid.weights[u].clone()).collect(),
        majority_labels,
        suggested_k: None,
        source: PrototypeSource::Som,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    #[test]
    fn hex_neighbors_at_unit_distance() {
        let g = som_init(3, 3, 1, RngSeed(0)).unwrap();
        // unit 4 (row 1, col 1) is shifted by half a step
        for n in [1, 2, 3, 5, 7, 8] {
            assert!((g.lattice_sq_dist(4, n) - 1.0).abs() < 1e-12, "unit {n}");
        }
    }

    #[test]
    fn init_sizes_and_determinism() {
        let g = som_init(19, 17, 4, RngSeed(1)).unwrap();
        assert_eq!(g.units(), 323);
        assert!(g.weights.iter().flatten().all(|w| (-1.0..=1.0).contains(w)));
        assert_eq!(g, som_init(19, 17, 4, RngSeed(1)).unwrap());
        let single = som_init(1, 1, 2, RngSeed(1)).unwrap();
        assert_eq!(bmu(&single, &[100.0, -3.0]), 0);
    }

    #[test]
    fn bmu_exact_and_ties() {
        let mut g = som_init(2, 5, 2, RngSeed(2)).unwrap();
        let w7 = g.weights[7].clone();
        assert_eq!(bmu(&g, &w7), 7);
        g.weights = (0..10).map(|i| vec![100.0 + i as f64, 100.0]).collect();
        g.weights[3] = vec![1.0, 0.0];
        g.weights[9] = vec![-1.0, 0.0];
        assert_eq!(bmu(&g, &[0.0, 0.0]), 3);
    }

    #[test]
    fn bmu_matches_scan() {
        let g = som_init(4, 5, 3, RngSeed(3)).unwrap();
        let mut rng = RngSeed(4).rng();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut best = (0, f64::INFINITY);
            for (i, w) in g.weights.iter().enumerate() {
                let d: f64 = w.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            assert_eq!(bmu(&g, &x), best.0);
        }
    }

    #[test]
    fn kernel_values() {
        assert_eq!(neighborhood(0.0, 3.0), 1.0);
        assert!((neighborhood(4.0, 2.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_unit_full_rate_jumps_to_sample() {
        let mut g = SomGrid::from_weights(1, 1, vec![vec![0.3, -0.2]]).unwrap();
        update_step(&mut g, &[0.9, 0.4], 1.0, 5.0);
        assert!((g.weights[0][0] - 0.9).abs() < 1e-15 && (g.weights[0][1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn default_schedule_shape() {
        let s = SomConfig::default().schedules();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].epochs, s[1].epochs), (3, 10));
        assert_eq!(s[0].sigma_start, 10.0);
        assert!((s[1].sigma_end - 2.0).abs() < 1e-12);
        assert_eq!(s[0].alpha_start, 0.5);
        assert!((s[1].alpha_end - 0.5 * 0.99f64.powi(12)).abs() < 1e-15);
        assert!(s[0].sigma_end > s[1].sigma_start);
    }

    #[test]
    fn energy_small_cases() {
        let g = SomGrid::from_weights(1, 1, vec![vec![1.0]]).unwrap();
        let ds = Dataset::new("e", vec![vec![0.0]]).unwrap();
        assert_eq!(som_energy(&g, &ds, 2.0), 1.0);

        let g = SomGrid::from_weights(1, 3, vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let ds = Dataset::new("e", vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(som_energy(&g, &ds, 1e-3) < 1e-12);
    }

    #[test]
    fn energy_matches_double_loop() {
        let g = som_init(3, 4, 2, RngSeed(5)).unwrap();
        let ds = crate::data::gen_simple(15, 1.0, RngSeed(6)).unwrap();
        let sigma = 1.7;
        let pos = |u: usize| {
            let (r, c) = (u / 4, u % 4);
            (c as f64 + if r % 2 == 1 { 0.5 } else { 0.0 }, r as f64 * 3f64.sqrt() / 2.0)
        };
        let mut oracle = 0.0;
        for x in ds.samples() {
            let mut b = 0;
            let mut bd = f64::INFINITY;
            for (j, w) in g.weights.iter().enumerate() {
                let d = (x[0] - w[0]).powi(2) + (x[1] - w[1]).powi(2);
                if d < bd {
                    bd = d;
                    b = j;
                }
            }
            for (j, w) in g.weights.iter().enumerate() {
                let (pb, pj) = (pos(b), pos(j));
                let h = (-((pb.0 - pj.0).powi(2) + (pb.1 - pj.1).powi(2)) / (2.0 * sigma * sigma)).exp();
                oracle += h * ((x[0] - w[0]).powi(2) + (x[1] - w[1]).powi(2));
            }
        }
        assert!((som_energy(&g, &ds, sigma) - oracle).abs() < 1e-9);
    }

    #[test]
    fn training_lowers_energy() {
        for s in 0..30u64 {
            let raw = crate::data::gen_simple(100, 6.0, RngSeed(s)).unwrap();
            let (ds, _) = crate::data::normalize(&raw);
            let cfg = SomConfig {
                rows: 6,
                cols: 5,
                sigma_start: 3.0,
                ..SomConfig::default()
            };
            let g0 = som_init(cfg.rows, cfg.cols, 2, RngSeed(s).derive(0)).unwrap();
            let g1 = som_train(g0.clone(), &ds, &cfg.schedules(), RngSeed(s).derive(1)).unwrap();
            assert!(som_energy(&g1, &ds, cfg.sigma_end) <= som_energy(&g0, &ds, cfg.sigma_end), "seed {s}");
        }
    }

    #[test]
    fn prototypes_drop_dead_units() {
        let g = SomGrid::from_weights(1, 3, vec![vec![0.0], vec![50.0], vec![100.0]]).unwrap();
        let ds = Dataset::new("p", vec![vec![0.1], vec![-0.1], vec![0.2]])
            .unwrap()
            .with_labels_and_classes(vec![0, 0, 0], 2)
            .unwrap();
        let p = som_prototypes(&g, &ds);
        assert_eq!(p.prototypes, vec![vec![0.0]]);
        assert_eq!(p.majority_labels, Some(vec![0]));
    }

    #[test]
    fn default_map_prototypes_bounded() {
        let raw = crate::data::gen_lines(1000, 10, RngSeed(1)).unwrap();
        let (ds, _) = crate::data::normalize(&raw);
        let g = som_fit(&ds, &SomConfig::default(), RngSeed(2)).unwrap();
        let p = som_prototypes(&g, &ds);
        assert!(p.len() <= 323 && p.len() <= ds.len());
        assert!(g.weights.iter().flatten().all(|w| w.is_finite()));
    }

    proptest! {
        #[test]
        fn update_rule_literal(
            seed in any::<u64>(),
            alpha in 0.001f64..=1.0,
            sigma in 0.5f64..10.0,
            x in proptest::collection::vec(-1.0f64..=1.0, 3),
        ) {
            let before = som_init(3, 4, 3, RngSeed(seed)).unwrap();
            let mut after = before.clone();
            let b = update_step(&mut after, &x, alpha, sigma);
            for i in 0..before.units() {
                let (rb, ri) = (before.position(b), before.position(i));
                let h = (-((rb[0] - ri[0]).powi(2) + (rb[1] - ri[1]).powi(2)) / (2.0 * sigma.powi(2))).exp();
                prop_assert!(h > 0.0 && h <= 1.0);
                prop_assert_eq!(h == 1.0, i == b);
                for ((&w0, &w1), &xd) in before.weights[i].iter().zip(&after.weights[i]).zip(&x) {
                    let expected = w0 + alpha * h * (xd - w0);
                    prop_assert!((w1 - expected).abs() <= 1e-15);
                    prop_assert!(w1.is_finite());
                }
            }
        }
    }
}
