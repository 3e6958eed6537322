//! Run configuration.
//!
//! A config file is flat TOML; every key is optional and falls back to the
//! default below. Command-line flags override file values.
//!
//! ```toml
//! data_dir = "data"            # holds macro_panel.csv, life_table_ssa.csv, plf_hecm.csv
//! countries = ["world"]        # "world", "us", "uk", "europe" or ISO codes
//! households = 1000000
//! seed = 20240101
//! threads = 0                  # 0 = all cores
//! down_payments = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0]
//! thresholds = [0.1, 0.2, 0.3, 0.4, 0.5]
//! second_home_down_payments = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0]
//! second_home_thresholds = [0.1, 0.2, 0.3]
//! base_cell = [0.1, 0.1]       # benchmark for second homes and strategy ranking
//! replacement_rate = 0.45
//! income_target = 70000.0      # mean employed earnings at 45, 2024 USD
//! hpi_anchor = 4.14            # US house-price-to-income ratio in 1990
//! comparison_paths = 1000000
//! output_dir = "results"
//! dump_trajectories = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with the three input tables; bundled copies when unset.
    pub data_dir: Option<PathBuf>,
    pub countries: Vec<String>,
    pub households: u64,
    pub seed: u64,
    pub threads: usize,
    pub down_payments: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub second_home_down_payments: Vec<f64>,
    pub second_home_thresholds: Vec<f64>,
    pub base_cell: [f64; 2],
    pub replacement_rate: f64,
    pub income_target: f64,
    pub hpi_anchor: f64,
    pub comparison_paths: u64,
    pub output_dir: PathBuf,
    /// Number of leading households whose base-cell trajectories are written.
    pub dump_trajectories: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: None,
            countries: vec!["world".into()],
            households: 1_000_000,
            seed: 20_240_101,
            threads: 0,
            down_payments: vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
            thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            second_home_down_payments: vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
            second_home_thresholds: vec![0.1, 0.2, 0.3],
            base_cell: [0.1, 0.1],
            replacement_rate: 0.45,
            income_target: 70_000.0,
            hpi_anchor: 4.14,
            comparison_paths: 1_000_000,
            output_dir: PathBuf::from("results"),
            dump_trajectories: 0,
        }
    }
}

/// Fields that determine results, in a fixed order, for hashing.
#[derive(Serialize)]
struct ReproKey<'a> {
    data_dir: &'a Option<PathBuf>,
    countries: &'a [String],
    households: u64,
    seed: u64,
    down_payments: &'a [f64],
    thresholds: &'a [f64],
    second_home_down_payments: &'a [f64],
    second_home_thresholds: &'a [f64],
    base_cell: [f64; 2],
    replacement_rate: f64,
    income_target: f64,
    hpi_anchor: f64,
    comparison_paths: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.households == 0 {
            return bad("households must be at least 1".into());
        }
        if self.down_payments.is_empty() || self.thresholds.is_empty() {
            return bad("strategy grid is empty".into());
        }
        let fracs = self
            .down_payments
            .iter()
            .chain(&self.thresholds)
            .chain(&self.second_home_down_payments)
            .chain(&self.second_home_thresholds)
            .chain(&self.base_cell);
        for &f in fracs {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("fraction {f} outside (0, 1]"));
            }
        }
        if !(self.replacement_rate >= 0.0 && self.replacement_rate <= 1.0) {
            return bad(format!("replacement_rate {} outside [0, 1]", self.replacement_rate));
        }
        if !(self.income_target > 0.0 && self.hpi_anchor > 0.0) {
            return bad("income_target and hpi_anchor must be positive".into());
        }
        if self.comparison_paths == 0 {
            return bad("comparison_paths must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 over the result-determining fields. Thread count and output
    /// location are excluded, so they never change a result file.
    pub fn hash(&self) -> String {
        let key = ReproKey {
            data_dir: &self.data_dir,
            countries: &self.countries,
            households: self.households,
            seed: self.seed,
            down_payments: &self.down_payments,
            thresholds: &self.thresholds,
            second_home_down_payments: &self.second_home_down_payments,
            second_home_thresholds: &self.second_home_thresholds,
            base_cell: self.base_cell,
            replacement_rate: self.replacement_rate,
            income_target: self.income_target,
            hpi_anchor: self.hpi_anchor,
            comparison_paths: self.comparison_paths,
        };
        let text = toml::to_string(&key).expect("config key serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml("households = 10\nseed = 3\n").unwrap();
        assert_eq!(cfg.households, 10);
        assert_eq!(cfg.down_payments.len(), 6);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("housholds = 10").is_err());
        let mut cfg = RunConfig::default();
        cfg.thresholds = vec![0.0];
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
        cfg = RunConfig::default();
        cfg.households = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.threads = 8;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
