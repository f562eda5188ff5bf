//! Browser bindings for the demo page in `www/`.
//!
//! Every entry point takes and returns JSON strings. The plain Rust
//! functions are usable natively; the `#[wasm_bindgen]` wrappers only convert
//! errors into JavaScript exceptions.

use protoclust::data::{gen_banana, gen_highleyman, gen_lines, gen_simple, gen_spherical, normalize};
use protoclust::eval::cluster_entropy;
use protoclust::pipeline::two_stage_fit;
use protoclust::soinn::{soinn_train, SoinnParams};
use protoclust::{Dataset, Method, MethodConfig, RngSeed};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Points rescaled to [-1, 1] per axis, with their classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoData {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub assignment: Vec<usize>,
    pub prototypes: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub groups: Vec<usize>,
    pub group_count: usize,
}

type DemoResult<T> = Result<T, String>;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `size` is the total for `lines` and the per-class count otherwise;
/// `param` is the segment count, noise, offset or mean distance.
pub fn dataset(kind: &str, size: usize, param: f64, seed: u64) -> DemoResult<DemoData> {
    let seed = RngSeed(seed);
    let raw = match kind {
        "lines" => gen_lines(size, param.max(1.0) as usize, seed),
        "banana" => gen_banana(size, param, seed),
        "highleyman" => gen_highleyman(size, seed),
        "spherical" => gen_spherical(size, param, seed),
        "simple" => gen_simple(size, param, seed),
        other => return Err(format!("unknown dataset `{other}`")),
    }
    .map_err(text)?;
    let (ds, _) = normalize(&raw);
    Ok(DemoData {
        points: ds.samples().to_vec(),
        labels: ds.labels().map(<[usize]>::to_vec).unwrap_or_default(),
        n_classes: ds.n_classes(),
    })
}

fn to_dataset(data: &DemoData) -> DemoResult<Dataset> {
    Dataset::new("demo", data.points.clone())
        .and_then(|ds| ds.with_labels_and_classes(data.labels.clone(), data.n_classes))
        .map_err(text)
}

/// Fit `method` and label every point. `nc == 0` lets the method choose.
pub fn cluster(data: &DemoData, method: &str, nc: usize, seed: u64) -> DemoResult<ClusterView> {
    let method: Method = method.parse().map_err(text)?;
    let ds = to_dataset(data)?;
    let nc = (nc > 0).then_some(nc);
    let model = two_stage_fit(&ds, method, nc, &MethodConfig::default(), RngSeed(seed)).map_err(text)?;
    let assignment = ds.samples().iter().map(|x| model.predict(x)).collect::<Result<Vec<_>, _>>().map_err(text)?;
    let entropy = cluster_entropy(&assignment, &data.labels, data.n_classes).map_err(text)?.total_entropy;
    Ok(ClusterView {
        assignment,
        prototypes: model.stage1.prototypes.clone(),
        centroids: model.final_centroids.clone(),
        k: model.nc,
        entropy,
    })
}

pub fn soinn_graph(data: &DemoData, lambda: usize, age_dead: usize, seed: u64) -> DemoResult<GraphView> {
    let ds = to_dataset(data)?;
    let params = SoinnParams {
        lambda,
        age_dead,
        ..SoinnParams::default()
    };
    let g = soinn_train(&ds, &params, RngSeed(seed)).map_err(text)?;
    Ok(GraphView {
        nodes: g.weights(),
        edges: g.edges().iter().map(|e| [e.a, e.b]).collect(),
        groups: g.nodes().iter().map(|n| n.group_label.unwrap_or(0)).collect(),
        group_count: g.group_count,
    })
}

fn parse(json: &str) -> Result<DemoData, JsValue> {
    serde_json::from_str(json).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn emit<T: Serialize>(result: DemoResult<T>) -> Result<String, JsValue> {
    let value = result.map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn demo_dataset(kind: &str, size: u32, param: f64, seed: u32) -> Result<String, JsValue> {
    emit(dataset(kind, size as usize, param, seed.into()))
}

#[wasm_bindgen]
pub fn demo_cluster(data_json: &str, method: &str, nc: u32, seed: u32) -> Result<String, JsValue> {
    emit(cluster(&parse(data_json)?, method, nc as usize, seed.into()))
}

#[wasm_bindgen]
pub fn demo_soinn_graph(data_json: &str, lambda: u32, age_dead: u32, seed: u32) -> Result<String, JsValue> {
    emit(soinn_graph(&parse(data_json)?, lambda as usize, age_dead as usize, seed.into()))
}
