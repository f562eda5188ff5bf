//! Scoring and the cross-validated experiment protocol.
//!
//! A clustering is scored by the size-weighted class entropy of its clusters.
//! An experiment repeats k-fold cross-validation over several runs, fitting on
//! the training folds and assigning the held-out fold by nearest prototype or
//! centroid, then summarizes the per-run entropies with a Student-t interval.

use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{make_folds, normalize, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::{two_stage_fit, Method, MethodConfig, PipelineModel};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub per_cluster_entropy: Vec<f64>,
    pub per_cluster_size: Vec<usize>,
    /// Row per cluster: share of each class among its members.
    pub class_given_cluster: Vec<Vec<f64>>,
    pub total_entropy: f64,
}

/// Class entropy (base 2) of each cluster and their size-weighted mean.
/// Cluster ids need not be dense; unused ids give empty rows.
pub fn cluster_entropy(assignment: &[usize], labels: &[usize], n_classes: usize) -> Result<EntropyReport> {
    if assignment.is_empty() {
        return Err(Error::InvalidDataset("entropy of an empty assignment".into()));
    }
    if assignment.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: assignment.len(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::param("labels", format!("label {bad} outside {n_classes} classes")));
    }
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![vec![0usize; n_classes]; k];
    for (&c, &l) in assignment.iter().zip(labels) {
        counts[c][l] += 1;
    }
    let sizes: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
    let shares: Vec<Vec<f64>> = counts
        .iter()
        .zip(&sizes)
        .map(|(row, &m)| {
            row.iter()
                .map(|&c| if m == 0 { 0.0 } else { c as f64 / m as f64 })
                .collect()
        })
        .collect();
    let entropies: Vec<f64> = shares
        .iter()
        .map(|row| {
            -row.iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.log2())
                .sum::<f64>()
        })
        .map(|e: f64| e.max(0.0))
        .collect();
    let total = assignment.len() as f64;
    let total_entropy = entropies
        .iter()
        .zip(&sizes)
        .map(|(e, &m)| m as f64 / total * e)
        .sum();
    Ok(EntropyReport {
        per_cluster_entropy: entropies,
        per_cluster_size: sizes,
        class_given_cluster: shares,
        total_entropy,
    })
}

/// Cluster of each test point under a fitted model.
pub fn assign_test_fold(test_points: &[Vec<f64>], model: &PipelineModel) -> Result<Vec<usize>> {
    test_points.iter().map(|x| model.predict(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub dataset: String,
    /// Mean held-out entropy of each run.
    pub entropies: Vec<f64>,
    /// Wall-clock fit and assignment time of each run.
    pub times_seconds: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EvalReport {
    pub fn from_runs(method: Method, dataset: impl Into<String>, entropies: Vec<f64>, times_seconds: Vec<f64>) -> Result<Self> {
        let (ci_low, ci_high) = confidence_interval(&entropies, 0.95)?;
        Ok(EvalReport {
            method,
            dataset: dataset.into(),
            min: entropies.iter().copied().fold(f64::INFINITY, f64::min),
            max: entropies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: sample_mean(&entropies),
            std: sample_std(&entropies),
            ci_low,
            ci_high,
            entropies,
            times_seconds,
        })
    }

    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            method: self.method.name().to_string(),
            dataset: self.dataset.clone(),
            min: self.min,
            max: self.max,
            mean: self.mean,
            std: self.std,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub dataset: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn write_table<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "dataset", "min", "max", "mean", "std", "ci_low", "ci_high"])?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))
}

pub fn read_table<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = sample_mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        sample_var(xs).sqrt()
    }
}

/// Two-sided Student-t interval for the mean at confidence `level`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::param("samples", "a confidence interval needs at least two samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", "must lie in (0, 1)"));
    }
    let n = samples.len() as f64;
    let m = sample_mean(samples);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("df >= 1")
        .inverse_cdf(0.5 + level / 2.0);
    let half = t * sample_std(samples) / n.sqrt();
    Ok((m - half, m + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Welch-Satterthwaite degrees of freedom; generally not an integer.
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Welch two-sample t-test of equal means, two-sided at level `alpha`.
pub fn t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::param("samples", "each group needs at least two samples"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a) / na, sample_var(b) / nb);
    let diff = sample_mean(a) - sample_mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let separated = diff != 0.0;
        return Ok(TTestResult {
            t_statistic: if separated { diff.signum() * f64::INFINITY } else { 0.0 },
            degrees_of_freedom: na + nb - 2.0,
            p_value: if separated { 0.0 } else { 1.0 },
            significant: separated,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value,
        significant: p_value < alpha,
    })
}

/// Settings shared by every cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub runs: usize,
    pub k_folds: usize,
    /// Cluster count; the class count when `None` for methods that need one.
    pub nc: Option<usize>,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            runs: 30,
            k_folds: 10,
            nc: None,
        }
    }
}

/// Mean held-out entropy of one run of k-fold cross-validation.
fn run_once(method: Method, ds: &Dataset, protocol: &Protocol, config: &MethodConfig, seed: RngSeed) -> Result<f64> {
    let labels = ds.labels().ok_or(Error::Unlabeled)?;
    let plan = make_folds(ds.len(), protocol.k_folds, seed.derive(0))?;
    let mut total = 0.0;
    for fold in 0..protocol.k_folds {
        let (train_idx, test_idx) = plan.split(fold);
        let (train, params) = normalize(&ds.subset(&train_idx)?);
        let model = two_stage_fit(&train, method, protocol.nc, config, seed.derive(1 + fold as u64))?;
        let test: Vec<Vec<f64>> = test_idx.iter().map(|&i| params.transform_row(&ds.samples()[i])).collect();
        let assignment = assign_test_fold(&test, &model)?;
        let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        total += cluster_entropy(&assignment, &test_labels, ds.n_classes())?.total_entropy;
    }
    Ok(total / protocol.k_folds as f64)
}

/// Repeat cross-validation `protocol.runs` times from independent seeds.
pub fn run_experiment(method: Method, ds: &Dataset, protocol: &Protocol, config: &MethodConfig, seed: RngSeed) -> Result<EvalReport> {
    if ds.labels().is_none() {
        return Err(Error::Unlabeled);
    }
    if protocol.runs < 2 {
        return Err(Error::param("runs", "at least two runs are needed"));
    }
    if protocol.k_folds < 2 || protocol.k_folds > ds.len() {
        return Err(Error::param("k_folds", format!("must lie in 2..={}", ds.len())));
    }
    config.validate()?;
    let mut entropies = Vec::with_capacity(protocol.runs);
    let mut times = Vec::with_capacity(protocol.runs);
    for run in 0..protocol.runs {
        let start = Instant::now();
        entropies.push(run_once(method, ds, protocol, config, seed.derive(run as u64))?);
        times.push(start.elapsed().as_secs_f64());
    }
    EvalReport::from_runs(method, ds.name(), entropies, times)
}
