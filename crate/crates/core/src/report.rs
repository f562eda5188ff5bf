//! Result bundles for a method-by-dataset matrix of experiments.
//!
//! Every file except `timings.csv` depends only on the inputs and the master
//! seed, so two runs with the same seed produce identical bytes.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::eval::{t_test, write_table, EvalReport, SummaryRow};
use crate::pipeline::Method;

/// Outcome of one (method, dataset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub method: Method,
    pub dataset: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

impl CellOutcome {
    pub fn new(method: Method, dataset: impl Into<String>, result: crate::Result<EvalReport>) -> Self {
        let (report, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        CellOutcome {
            method,
            dataset: dataset.into(),
            report,
            error,
        }
    }
}

/// One pairwise comparison of two methods on the same dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub dataset: String,
    pub method_a: String,
    pub method_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Serialize)]
struct CiRow<'a> {
    method: &'a str,
    mean: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    method: &'a str,
    dataset: &'a str,
    run: usize,
    seconds: f64,
}

/// Reports without their wall-clock times.
#[derive(Serialize)]
struct StableReport<'a> {
    method: Method,
    dataset: &'a str,
    entropies: Option<&'a [f64]>,
    error: Option<&'a str>,
}

fn csv_string<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 csv")
}

/// All pairwise Welch tests between successful cells sharing a dataset, in
/// outcome order.
pub fn pairwise_tests(outcomes: &[CellOutcome], alpha: f64) -> Vec<PairRow> {
    let ok: Vec<(&CellOutcome, &EvalReport)> = outcomes.iter().filter_map(|o| o.report.as_ref().map(|r| (o, r))).collect();
    let mut rows = Vec::new();
    for (i, (oa, a)) in ok.iter().enumerate() {
        for (ob, b) in &ok[i + 1..] {
            if oa.dataset != ob.dataset {
                continue;
            }
            let Ok(t) = t_test(&a.entropies, &b.entropies, alpha) else {
                continue;
            };
            rows.push(PairRow {
                dataset: oa.dataset.clone(),
                method_a: oa.method.name().into(),
                method_b: ob.method.name().into(),
                mean_a: a.mean,
                mean_b: b.mean,
                t_statistic: t.t_statistic,
                degrees_of_freedom: t.degrees_of_freedom,
                p_value: t.p_value,
                significant: t.significant,
            });
        }
    }
    rows
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// File name to contents for the deterministic part of a bundle.
pub fn bundle_files(outcomes: &[CellOutcome]) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let summaries: Vec<SummaryRow> = outcomes.iter().filter_map(|o| o.report.as_ref().map(EvalReport::summary)).collect();
    let mut table = Vec::new();
    write_table(&summaries, &mut table).expect("in-memory write");
    files.insert("table.csv".into(), String::from_utf8(table).expect("utf-8 csv"));

    files.insert(
        "ttests.csv".into(),
        csv_string(
            &pairwise_tests(outcomes, 0.05),
            &["dataset", "method_a", "method_b", "mean_a", "mean_b", "t_statistic", "degrees_of_freedom", "p_value", "significant"],
        ),
    );

    let mut datasets: Vec<&str> = Vec::new();
    for o in outcomes {
        if !datasets.contains(&o.dataset.as_str()) {
            datasets.push(&o.dataset);
        }
    }
    for d in datasets {
        let rows: Vec<CiRow> = outcomes
            .iter()
            .filter(|o| o.dataset == d)
            .filter_map(|o| o.report.as_ref())
            .map(|r| CiRow {
                method: r.method.name(),
                mean: r.mean,
                lo: r.ci_low,
                hi: r.ci_high,
            })
            .collect();
        files.insert(format!("ci_plot_{}.csv", file_safe(d)), csv_string(&rows, &["method", "mean", "lo", "hi"]));
    }

    let stable: Vec<StableReport> = outcomes
        .iter()
        .map(|o| StableReport {
            method: o.method,
            dataset: &o.dataset,
            entropies: o.report.as_ref().map(|r| r.entropies.as_slice()),
            error: o.error.as_deref(),
        })
        .collect();
    files.insert(
        "reports.json".into(),
        serde_json::to_string_pretty(&stable).expect("plain data") + "\n",
    );
    files
}

/// Parse a `ttests.csv` written by [`bundle_files`].
pub fn read_pairs<R: Read>(input: R) -> crate::Result<Vec<PairRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(crate::Error::from))
        .collect()
}

/// Per-run wall-clock times; varies between otherwise identical runs.
pub fn timings_csv(outcomes: &[CellOutcome]) -> String {
    let rows: Vec<TimingRow> = outcomes
        .iter()
        .filter_map(|o| o.report.as_ref())
        .flat_map(|r| {
            r.times_seconds.iter().enumerate().map(move |(run, &seconds)| TimingRow {
                method: r.method.name(),
                dataset: &r.dataset,
                run,
                seconds,
            })
        })
        .collect();
    csv_string(&rows, &["method", "dataset", "run", "seconds"])
}
