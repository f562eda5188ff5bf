use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use protoclust::eval::{read_table, run_experiment, write_table, EvalReport};
use protoclust::report::{bundle_files, read_pairs, timings_csv, CellOutcome};
use protoclust::{Dataset, Error, Method, RngSeed};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::source::{DatasetSource, GeneratorSpec};
use crate::{Classify, ExperimentArgs, Failure, GenerateArgs, MatrixArgs, ReportArgs, RunArgs};

pub fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let mut spec = GeneratorSpec::new(args.generator);
    let given = [
        ("n", args.n.map(|v| v as f64)),
        ("segments", args.segments.map(|v| v as f64)),
        ("s", args.s),
        ("u", args.u),
        ("d", args.d),
        ("seed", Some(args.seed as f64)),
    ];
    for (key, value) in given {
        if let Some(v) = value {
            spec.set(key, v).usage()?;
        }
    }
    let ds = spec.generate().usage()?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| args.out_dir.join(format!("{}.csv", args.generator)));
    ensure_parent(&path).runtime()?;
    ds.save_csv(&path).runtime()?;
    println!("N={} A={} L={} -> {}", ds.len(), ds.dim(), ds.n_classes(), path.display());
    Ok(())
}

/// File config with flag overrides applied and validated.
fn effective_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).usage()?,
        None => ExperimentConfig::default(),
    };
    let exp = &mut cfg.experiment;
    if let Some(seed) = args.seed {
        exp.seed = seed;
    }
    if let Some(runs) = args.runs {
        exp.runs = runs;
    }
    if let Some(k) = args.k_folds {
        exp.k_folds = k;
    }
    if args.nc.is_some() {
        exp.nc = args.nc;
    }
    let soinn = &mut cfg.params.soinn;
    if let Some(lambda) = args.soinn_lambda {
        soinn.lambda = lambda;
    }
    if let Some(age) = args.soinn_age_dead {
        soinn.age_dead = age;
    }
    if args.soinn_lt.is_some() {
        soinn.lt = args.soinn_lt;
    }
    cfg.params.validate().usage()?;
    Ok(cfg)
}

fn load_source(text: &str, seed: RngSeed) -> Result<(DatasetSource, Dataset), Failure> {
    let source: DatasetSource = text.parse().usage()?;
    let ds = source.load(seed).usage()?;
    let ds = if source.is_file() { ds } else { ds.with_name(text.trim_start_matches("gen:")) };
    Ok((source, ds))
}

/// Errors caused by the configuration rather than by the computation.
fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::InvalidParameter { .. } | Error::Unlabeled | Error::InvalidDataset(_))
}

fn classify(e: Error) -> Failure {
    if is_config_error(&e) {
        Failure::Usage(e.into())
    } else {
        Failure::Runtime(e.into())
    }
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = effective_config(&args.experiment)?;
    if let Some(m) = args.method {
        cfg.experiment.method = Some(m);
    }
    if let Some(d) = &args.dataset {
        cfg.experiment.dataset = Some(d.clone());
    }
    let method = cfg
        .experiment
        .method
        .ok_or_else(|| anyhow!("no method given; use --method or [experiment] method"))
        .usage()?;
    let dataset = cfg
        .experiment
        .dataset
        .clone()
        .ok_or_else(|| anyhow!("no dataset given; use --dataset or [experiment] dataset"))
        .usage()?;
    let seed = RngSeed(cfg.experiment.seed);
    let (_, ds) = load_source(&dataset, seed)?;

    let report = run_experiment(method, &ds, &cfg.protocol(), &cfg.params, seed.derive(0)).map_err(classify)?;
    let path = args
        .report
        .clone()
        .unwrap_or_else(|| args.experiment.out_dir.join(format!("{}_{}.json", method, file_safe(ds.name()))));
    ensure_parent(&path).runtime()?;
    let json = serde_json::to_string_pretty(&report).runtime()? + "\n";
    fs::write(&path, json).with_context(|| format!("cannot write {}", path.display())).runtime()?;
    if let Some(csv) = &args.csv {
        append_row(csv, &report).runtime()?;
    }
    print_report(&report);
    println!("report: {}", path.display());
    Ok(())
}

fn append_row(path: &Path, report: &EvalReport) -> anyhow::Result<()> {
    let mut table = Vec::new();
    write_table(&[report.summary()], &mut table)?;
    let text = String::from_utf8(table)?;
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let body = if fresh { text.as_str() } else { text.split_once('\n').map_or("", |(_, rows)| rows) };
    ensure_parent(path)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    file.write_all(body.as_bytes())?;
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!(
        "{} on {}: mean {:.4} std {:.4} min {:.4} max {:.4} 95% CI [{:.4}, {:.4}] over {} runs",
        r.method,
        r.dataset,
        r.mean,
        r.std,
        r.min,
        r.max,
        r.ci_low,
        r.ci_high,
        r.entropies.len()
    );
}

pub fn matrix(args: &MatrixArgs) -> Result<(), Failure> {
    let mut cfg = effective_config(&args.experiment)?;
    if !args.methods.is_empty() {
        cfg.experiment.methods = args.methods.clone();
    }
    if !args.datasets.is_empty() {
        cfg.experiment.datasets = args.datasets.clone();
    }
    if cfg.experiment.methods.is_empty() {
        cfg.experiment.methods = Method::ALL.to_vec();
    }
    if cfg.experiment.datasets.is_empty() {
        return Err(Failure::Usage(anyhow!("no datasets given; use --dataset or [experiment] datasets")));
    }
    let cells_total = cfg.experiment.methods.len() * cfg.experiment.datasets.len();
    if cells_total < 2 {
        return Err(Failure::Usage(anyhow!("a matrix needs at least two cells, got {cells_total}")));
    }

    let master = RngSeed(cfg.experiment.seed);
    let datasets: Vec<Dataset> = cfg
        .experiment
        .datasets
        .iter()
        .map(|d| load_source(d, master).map(|(_, ds)| ds))
        .collect::<Result<_, _>>()?;
    let cells: Vec<(Method, &Dataset)> = datasets
        .iter()
        .flat_map(|ds| cfg.experiment.methods.iter().map(move |&m| (m, ds)))
        .collect();

    let protocol = cfg.protocol();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().runtime()?;
    let results: Vec<protoclust::Result<EvalReport>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(method, ds))| run_experiment(method, ds, &protocol, &cfg.params, master.derive(i as u64)))
            .collect()
    });

    let mut exit_code = 0u8;
    let mut outcomes = Vec::with_capacity(cells.len());
    for (&(method, ds), result) in cells.iter().zip(results) {
        if let Err(e) = &result {
            eprintln!("cell {method} on {} failed: {e}", ds.name());
            exit_code = exit_code.max(if is_config_error(e) { 2 } else { 1 });
        }
        outcomes.push(CellOutcome::new(method, ds.name(), result));
    }

    let out = &args.experiment.out_dir;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display())).runtime()?;
    let mut files = bundle_files(&outcomes);
    files.insert("timings.csv".into(), timings_csv(&outcomes));
    files.insert("config.toml".into(), cfg.to_toml());
    for (name, body) in &files {
        let path = out.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display())).runtime()?;
    }
    for o in outcomes.iter().filter_map(|o| o.report.as_ref()) {
        print_report(o);
    }
    println!("bundle: {} ({} files)", out.display(), files.len());
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    let summary = anyhow!("{failed} of {} cells failed", outcomes.len());
    match exit_code {
        0 => Ok(()),
        2 => Err(Failure::Usage(summary)),
        _ => Err(Failure::Runtime(summary)),
    }
}

pub fn report(args: &ReportArgs) -> Result<(), Failure> {
    let table_path = args.dir.join("table.csv");
    let file = fs::File::open(&table_path)
        .with_context(|| format!("cannot open {}", table_path.display()))
        .usage()?;
    let rows = read_table(file).runtime()?;
    let dw = rows.iter().map(|r| r.dataset.len()).chain([7]).max().unwrap_or(7);
    let mw = rows.iter().map(|r| r.method.len()).chain([6]).max().unwrap_or(6);
    println!("{:<dw$}  {:<mw$} {:>8} {:>8} {:>8} {:>8}  95% CI", "dataset", "method", "mean", "std", "min", "max");
    for r in &rows {
        println!(
            "{:<dw$}  {:<mw$} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  [{:.4}, {:.4}]",
            r.dataset, r.method, r.mean, r.std, r.min, r.max, r.ci_low, r.ci_high
        );
    }
    let pairs_path = args.dir.join("ttests.csv");
    if let Ok(file) = fs::File::open(&pairs_path) {
        let pairs = read_pairs(file).runtime()?;
        let significant: Vec<_> = pairs.iter().filter(|p| p.significant).collect();
        println!("\n{} of {} pairs differ at alpha 0.05", significant.len(), pairs.len());
        for p in significant {
            let better = if p.mean_a < p.mean_b { &p.method_a } else { &p.method_b };
            println!(
                "  {} {} vs {}: p = {:.3e}, lower entropy: {}",
                p.dataset, p.method_a, p.method_b, p.p_value, better
            );
        }
    }
    Ok(())
}
