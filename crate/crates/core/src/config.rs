//! Declarative run configuration (TOML, versioned schema).
//!
//! ```toml
//! schema_version = 1
//! seed = 1
//! replications = 10000
//!
//! [[cells]]
//! label = "paired, sigma 0.5"
//! dgp = { kind = "grouped_factor", n_groups = 10, t0 = 20, rho = 0.5, sigma = 0.5 }
//! estimator = { kind = "standard", predictors = { weighting = "unit" } }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::{DgpConfig, EffectSpec};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::montecarlo::CellSpec;

pub const SCHEMA_VERSION: u32 = 1;

const TABLE_A1: &str = include_str!("../configs/table_a1.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: default_formats(),
        }
    }
}

/// Published values a cell is expected to reproduce.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub post_rmse: Option<f64>,
    pub pre_rmse: Option<f64>,
    pub w2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub label: String,
    pub dgp: DgpConfig,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub effect: EffectSpec,
    /// Overrides the run-level replication count.
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub backdate: Option<usize>,
    #[serde(default)]
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub output: OutputConfig,
    pub cells: Vec<CellConfig>,
}

fn default_replications() -> usize {
    10_000
}

impl RunConfig {
    /// Parses and validates a TOML document; `origin` names it in error messages.
    pub fn from_toml_str(source: &str, origin: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(source).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(source, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&source, &path.display().to_string())
    }

    /// The shipped suite with one cell per simulated row of the reference table.
    pub fn table_a1() -> Self {
        Self::from_toml_str(TABLE_A1, "table_a1.toml").expect("built-in suite is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.cells.is_empty() {
            return Err(Error::Config("config defines no cells".into()));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for cell in &self.cells {
            if !seen.insert(cell.label.as_str()) {
                return Err(Error::Config(format!("duplicate cell label `{}`", cell.label)));
            }
        }
        for spec in self.cell_specs() {
            spec.validate()?;
        }
        Ok(())
    }

    /// Applies run-wide replication and seed overrides.
    pub fn with_overrides(mut self, replications: Option<usize>, seed: Option<u64>) -> Self {
        if let Some(r) = replications {
            self.replications = r;
            for cell in &mut self.cells {
                cell.replications = None;
            }
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn cell_specs(&self) -> Vec<CellSpec> {
        self.cells
            .iter()
            .map(|c| CellSpec {
                label: c.label.clone(),
                dgp: c.dgp.clone(),
                estimator: c.estimator.clone(),
                effect: c.effect,
                replications: c.replications.unwrap_or(self.replications),
                seed: self.seed,
                backdate: c.backdate,
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// 1-based line and column of byte offset `pos`.
pub(crate) fn line_column(source: &str, pos: usize) -> (u64, u64) {
    let before = &source[..pos.min(source.len())];
    let line = before.matches('\n').count() as u64 + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u64 + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::Trend;
    use crate::estimators::{EstimatorKind, TrimSpec};
    use crate::panel::PredictorWeighting;

    const MINIMAL: &str = r#"
schema_version = 1
seed = 5

[[cells]]
label = "a"
dgp = { kind = "grouped_factor", n_groups = 10, t0 = 20, rho = 0.5, sigma = 1.0 }
estimator = { kind = "shift", trim = { keep_count = 5 }, predictors = { weighting = "unit" } }
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml_str(MINIMAL, "t").unwrap();
        assert_eq!(c.replications, 10_000);
        assert_eq!(c.output.formats, vec![OutputFormat::Csv, OutputFormat::Json]);
        let cells = c.cell_specs();
        assert_eq!(cells[0].seed, 5);
        assert_eq!(cells[0].estimator.kind, EstimatorKind::ConstantShift);
        assert_eq!(cells[0].estimator.trim, Some(TrimSpec::KeepCount(5)));
        assert_eq!(cells[0].estimator.predictors.weighting, PredictorWeighting::Unit);
        match &cells[0].dgp {
            DgpConfig::GroupedFactor(g) => {
                assert_eq!(g.units_per_group, 2);
                assert_eq!(g.t_total, 30);
                assert_eq!(g.trend, Trend::None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        let top = MINIMAL.replace("seed = 5", "seed = 5\nbogus = 1");
        let dgp = MINIMAL.replace("sigma = 1.0", "sigma = 1.0, bogus = 1");
        let est = MINIMAL.replace("kind = \"shift\"", "kind = \"shift\", bogus = 1");
        for src in [top, dgp, est] {
            assert!(matches!(RunConfig::from_toml_str(&src, "t"), Err(Error::Parse { .. })), "{src}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let src = MINIMAL.replace("rho = 0.5", "rho = \"high\"");
        match RunConfig::from_toml_str(&src, "cfg.toml") {
            Err(Error::Parse { path, line, .. }) => {
                assert_eq!(path, "cfg.toml");
                assert_eq!(line, 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let v2 = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(RunConfig::from_toml_str(&v2, "t"), Err(Error::Config(_))));
        let bad = MINIMAL.replace("t0 = 20", "t0 = 40");
        assert!(matches!(RunConfig::from_toml_str(&bad, "t"), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn overrides_and_hash() {
        let c = RunConfig::from_toml_str(MINIMAL, "t").unwrap();
        let h = c.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, c.clone().hash());
        let o = c.with_overrides(Some(7), Some(9));
        assert_ne!(o.hash(), h);
        assert_eq!(o.cell_specs()[0].replications, 7);
        assert_eq!(o.cell_specs()[0].seed, 9);
    }

    #[test]
    fn builtin_suite_loads() {
        let c = RunConfig::table_a1();
        assert!(c.cells.len() >= 30);
        assert!(c.cells.iter().all(|c| c.reference.is_some()));
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
