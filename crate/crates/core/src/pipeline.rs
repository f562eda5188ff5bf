//! Method selection and the two-stage architecture: a first stage reduces the
//! data to prototypes, a second stage clusters the prototypes, and every
//! sample inherits the cluster of its nearest prototype.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ant_kmeans::{ak_fit, AkParams};
use crate::asca::{asca_fit, AscaParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::nearest;
use crate::kmeans::{kmeans_fit_restarts, sample_centroids, KMeansConfig};
use crate::rng::RngSeed;
use crate::soinn::{soinn_prototypes, soinn_train, SoinnParams};
use crate::som::{som_fit, som_prototypes, SomConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Som,
    Asca,
    Soinn,
    Somk,
    Somak,
    Ascak,
    Soinak,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Kmeans,
        Method::Som,
        Method::Asca,
        Method::Soinn,
        Method::Somk,
        Method::Somak,
        Method::Ascak,
        Method::Soinak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kmeans => "kmeans",
            Method::Som => "som",
            Method::Asca => "asca",
            Method::Soinn => "soinn",
            Method::Somk => "somk",
            Method::Somak => "somak",
            Method::Ascak => "ascak",
            Method::Soinak => "soinak",
        }
    }

    /// Whether the method needs a cluster count from the caller or the labels.
    pub fn needs_nc(self) -> bool {
        !matches!(self, Method::Asca | Method::Soinn | Method::Soinak)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::param("method", format!("unknown method `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrototypeSource {
    Som,
    Asca,
    Soinn,
    Raw,
}

/// First-stage output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub prototypes: Vec<Vec<f64>>,
    /// Majority class of the samples each prototype represents.
    pub majority_labels: Option<Vec<usize>>,
    /// Cluster count proposed by the first stage, if it proposes one.
    pub suggested_k: Option<usize>,
    pub source: PrototypeSource,
}

impl PrototypeSet {
    /// The samples themselves.
    pub fn raw(ds: &Dataset) -> Self {
        PrototypeSet {
            prototypes: ds.samples().to_vec(),
            majority_labels: ds.labels().map(<[usize]>::to_vec),
            suggested_k: None,
            source: PrototypeSource::Raw,
        }
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn to_dataset(&self, name: &str) -> Result<Dataset> {
        Dataset::new(format!("{name}-prototypes"), self.prototypes.clone())
    }
}

/// Parameters for every algorithm a method may use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub kmeans: KMeansConfig,
    pub som: SomConfig,
    pub soinn: SoinnParams,
    pub ak: AkParams,
    pub asca: AscaParams,
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kmeans.max_iter == 0 {
            return Err(Error::param("kmeans.max_iter", "must be at least 1"));
        }
        if self.kmeans.restarts == 0 {
            return Err(Error::param("kmeans.restarts", "must be at least 1"));
        }
        self.som.validate()?;
        self.soinn.validate()?;
        self.ak.validate()?;
        self.asca.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub method: Method,
    pub stage1: PrototypeSet,
    pub final_centroids: Vec<Vec<f64>>,
    /// Final cluster of each first-stage prototype.
    pub proto_to_cluster: Vec<usize>,
    pub nc: usize,
}

impl PipelineModel {
    fn routes_through_prototypes(&self) -> bool {
        !matches!(self.method, Method::Kmeans | Method::Som | Method::Asca)
    }

    pub fn dim(&self) -> usize {
        self.final_centroids.first().map_or(0, Vec::len)
    }

    /// Cluster of `x`: via its nearest prototype for two-stage methods and
    /// SOINN, via the nearest final centroid otherwise. Ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(if self.routes_through_prototypes() {
            self.proto_to_cluster[nearest(x, &self.stage1.prototypes).0]
        } else {
            nearest(x, &self.final_centroids).0
        })
    }
}

fn resolve_nc(method: Method, nc: Option<usize>, ds: &Dataset) -> Result<usize> {
    let k = match nc {
        Some(k) => k,
        None if ds.labels().is_some() => ds.n_classes(),
        None => {
            return Err(Error::param(
                "nc",
                format!("method {method} needs a cluster count for unlabeled data"),
            ))
        }
    };
    if k == 0 {
        return Err(Error::param("nc", "must be at least 1"));
    }
    Ok(k)
}

fn check_prototype_count(nc: usize, protos: &PrototypeSet) -> Result<()> {
    if nc > protos.len() {
        return Err(Error::param(
            "nc",
            format!("nc = {nc} exceeds the {} first-stage prototypes", protos.len()),
        ));
    }
    Ok(())
}

/// Fit `method` on `ds`. `nc` defaults to the class count for methods that
/// need one; SOINN-based methods use the discovered group count instead.
pub fn two_stage_fit(ds: &Dataset, method: Method, nc: Option<usize>, config: &MethodConfig, seed: RngSeed) -> Result<PipelineModel> {
    config.validate()?;
    let stage1_seed = seed.derive(1);
    let stage2_seed = seed.derive(2);
    match method {
        Method::Kmeans => {
            let k = resolve_nc(method, nc, ds)?;
            let km = kmeans_fit_restarts(ds, k, &config.kmeans, seed)?;
            Ok(PipelineModel {
                method,
                stage1: PrototypeSet::raw(ds),
                final_centroids: km.centroids,
                proto_to_cluster: km.assignment,
                nc: k,
            })
        }
        Method::Som => {
            let k = resolve_nc(method, nc, ds)?;
            let chain = SomConfig {
                rows: 1,
                cols: k,
                sigma_start: (k as f64 / 2.0).max(1.0),
                sigma_end: 0.5,
                ..config.som.clone()
            };
            let grid = som_fit(ds, &chain, stage1_seed)?;
            let stage1 = som_prototypes(&grid, ds);
            let m = stage1.len();
            Ok(PipelineModel {
                method,
                final_centroids: stage1.prototypes.clone(),
                proto_to_cluster: (0..m).collect(),
                stage1,
                nc: m,
            })
        }
        Method::Asca => {
            let (_, stage1) = asca_fit(ds, &config.asca, stage1_seed)?;
            let m = stage1.len();
            Ok(PipelineModel {
                method,
                final_centroids: stage1.prototypes.clone(),
                proto_to_cluster: (0..m).collect(),
                stage1,
                nc: m,
            })
        }
        Method::Soinn => {
            let graph = soinn_train(ds, &config.soinn, stage1_seed)?;
            if graph.group_count == 0 {
                return Err(Error::InvalidDataset("SOINN found no groups".into()));
            }
            let stage1 = soinn_prototypes(&graph, ds);
            Ok(PipelineModel {
                method,
                final_centroids: graph.group_means(),
                proto_to_cluster: graph.nodes().iter().map(|n| n.group_label.expect("labeled")).collect(),
                stage1,
                nc: graph.group_count,
            })
        }
        Method::Somk => {
            let k = resolve_nc(method, nc, ds)?;
            let grid = som_fit(ds, &config.som, stage1_seed)?;
            let stage1 = som_prototypes(&grid, ds);
            check_prototype_count(k, &stage1)?;
            let km = kmeans_fit_restarts(&stage1.to_dataset(ds.name())?, k, &config.kmeans, stage2_seed)?;
            Ok(PipelineModel {
                method,
                stage1,
                final_centroids: km.centroids,
                proto_to_cluster: km.assignment,
                nc: k,
            })
        }
        Method::Somak | Method::Ascak => {
            let k = resolve_nc(method, nc, ds)?;
            let stage1 = if method == Method::Somak {
                som_prototypes(&som_fit(ds, &config.som, stage1_seed)?, ds)
            } else {
                let asca = AscaParams {
                    min_clusters: config.asca.min_clusters.max(k),
                    ..config.asca.clone()
                };
                asca_fit(ds, &asca, stage1_seed)?.1
            };
            check_prototype_count(k, &stage1)?;
            let init = sample_centroids(&stage1.prototypes, k, stage2_seed.derive(0));
            refine_with_ak(ds, method, stage1, k, init, &config.ak, stage2_seed)
        }
        Method::Soinak => {
            let graph = soinn_train(ds, &config.soinn, stage1_seed)?;
            let q = graph.group_count;
            if q == 0 {
                return Err(Error::InvalidDataset("SOINN found no groups".into()));
            }
            let stage1 = soinn_prototypes(&graph, ds);
            let k = nc.unwrap_or(q.min(stage1.len()));
            if k == 0 {
                return Err(Error::param("nc", "must be at least 1"));
            }
            check_prototype_count(k, &stage1)?;
            let init = if k == q {
                graph.group_means()
            } else {
                sample_centroids(&stage1.prototypes, k, stage2_seed.derive(0))
            };
            refine_with_ak(ds, method, stage1, k, init, &config.ak, stage2_seed)
        }
    }
}

fn refine_with_ak(
    ds: &Dataset,
    method: Method,
    stage1: PrototypeSet,
    k: usize,
    init: Vec<Vec<f64>>,
    ak: &AkParams,
    seed: RngSeed,
) -> Result<PipelineModel> {
    let state = ak_fit(&stage1.to_dataset(ds.name())?, k, init, ak, seed)?;
    Ok(PipelineModel {
        method,
        stage1,
        final_centroids: state.best_centroids,
        proto_to_cluster: state.best_assignment,
        nc: k,
    })
}

/// Proportional costs of clustering `n` samples directly for every cluster
/// count up to `c_max`, and of doing so on `m_protos` prototypes after
/// building them from the samples.
pub fn complexity_estimate(n: u64, m_protos: u64, c_max: u64) -> Result<(u64, u64)> {
    if !(n >= m_protos && m_protos >= c_max && c_max >= 2) {
        return Err(Error::param("complexity_estimate", "requires n >= m_protos >= c_max >= 2"));
    }
    // sum of k for k = 2..=c_max
    let ks = c_max * (c_max + 1) / 2 - 1;
    Ok((n * ks, n * m_protos + m_protos * ks))
}
