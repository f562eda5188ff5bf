//! Experiment configuration files.
//!
//! A TOML file with an `[experiment]` table and one optional table per
//! algorithm (`[kmeans]`, `[som]`, `[soinn]`, `[ak]`, `[asca]`). Every key is
//! optional; missing keys take the library defaults. Command-line flags
//! override file values.
//!
//! ```toml
//! [experiment]
//! method = "somak"
//! dataset = "gen:lines"
//! methods = ["kmeans", "somk"]       # matrix only
//! datasets = ["gen:simple:d=20"]     # matrix only
//! seed = 7
//! runs = 30
//! k_folds = 10
//! nc = 10
//!
//! [soinn]
//! lambda = 50
//! ```

use std::path::Path;

use anyhow::Context;
use protoclust::eval::Protocol;
use protoclust::{Method, MethodConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub method: Option<Method>,
    pub dataset: Option<String>,
    pub methods: Vec<Method>,
    pub datasets: Vec<String>,
    pub seed: u64,
    pub runs: usize,
    pub k_folds: usize,
    pub nc: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let protocol = Protocol::default();
        ExperimentSection {
            method: None,
            dataset: None,
            methods: Vec::new(),
            datasets: Vec::new(),
            seed: 0,
            runs: protocol.runs,
            k_folds: protocol.k_folds,
            nc: protocol.nc,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(flatten)]
    pub params: MethodConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            runs: self.experiment.runs,
            k_folds: self.experiment.k_folds,
            nc: self.experiment.nc,
        }
    }

    /// The effective configuration, as echoed into result bundles.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            "[experiment]\nmethod = \"soinak\"\nruns = 5\n\n[soinn]\nlambda = 40\n\n[ak]\nrho = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.method, Some(Method::Soinak));
        assert_eq!(cfg.experiment.runs, 5);
        assert_eq!(cfg.experiment.k_folds, 10);
        assert_eq!(cfg.params.soinn.lambda, 40);
        assert_eq!(cfg.params.soinn.age_dead, MethodConfig::default().soinn.age_dead);
        assert_eq!(cfg.params.ak.rho, 0.5);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.methods = vec![Method::Kmeans, Method::Somak];
        cfg.experiment.datasets = vec!["gen:lines".into()];
        cfg.experiment.nc = Some(3);
        cfg.params.soinn.lt = Some(500);
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_experiment_key_is_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[experiment]\nrunz = 3\n").is_err());
    }
}
