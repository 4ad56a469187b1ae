//! The experiment pipeline behind the command-line tool: configuration,
//! on-disk layout, and the `gen-data`, `train`, `baseline`, `sweep`,
//! `verify` and `report` steps.
//!
//! Layout under the output directory:
//!
//! ```text
//! run.json                      resolved config and outputs of the last run
//! baseline.json                 threshold baseline per SNR
//! sweep.csv, sweep_timing.csv   error rates and per-trial wall clock
//! sweep_reports.json            full evaluation reports behind sweep.csv
//! report.md                     human-readable summary
//! snr_<db>dB/dataset.csv, manifest.json
//! snr_<db>dB/controller.json, controller_loss.csv
//! snr_<db>dB/detector_k<K>.json, detector_k<K>_loss.csv
//! ```

mod baseline;
mod pipeline;
mod report;
mod sweep;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::GaussianModel;
use crate::neural::{read_json, write_json};
use crate::rng;
use crate::training::TrainingConfig;

pub use baseline::{baseline, find_baseline, BaselineQuantizer};
pub use pipeline::{gen_data, train};
pub use report::{log_linear_fit, report, LinearFit};
pub use sweep::{sweep, SweepRow};
pub use verify::{verify, Check, VerifyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub training: TrainingConfig,
    pub snr_db: Vec<f64>,
    /// Sensor counts evaluated by the sweep; one detector is trained per entry.
    pub k_list: Vec<usize>,
    /// Monte Carlo trials per sweep point.
    pub trials: u64,
    pub out_dir: PathBuf,
    /// Also evaluate the threshold baseline in the sweep.
    pub baseline: bool,
    /// Epochs between resumable training snapshots; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            training: TrainingConfig::default(),
            snr_db: vec![-5.0, 0.0],
            k_list: vec![5, 10, 15, 20],
            trials: 100_000,
            out_dir: PathBuf::from("runs"),
            baseline: true,
            checkpoint_every: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.snr_db.is_empty() || self.k_list.is_empty() {
            return Err(Error::invalid("snr and K lists must not be empty"));
        }
        if self.k_list.contains(&0) {
            return Err(Error::invalid("every K must be >= 1"));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("snr {s} dB is not finite")));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        Ok(())
    }

    pub fn model(&self, snr_db: f64) -> Result<GaussianModel> {
        GaussianModel::from_snr_db(snr_db)
    }

    pub fn snr_dir(&self, snr_db: f64) -> PathBuf {
        self.out_dir.join(format!("snr_{snr_db}dB"))
    }

    /// Seed for one artifact, derived from the master seed, a role label and the SNR.
    pub fn seed_for(&self, role: &str, snr_db: f64) -> u64 {
        rng::derive_seed(self.training.seed, &format!("{role}/snr={snr_db}"))
    }

    /// The training config used at one SNR: same hyperparameters, derived seed.
    pub fn training_at(&self, snr_db: f64, sensors: usize) -> TrainingConfig {
        TrainingConfig {
            sensors,
            seed: self.seed_for("train", snr_db),
            ..self.training.clone()
        }
    }
}

/// Snapshot written to `run.json` by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub status: String,
    pub elapsed_seconds: f64,
    pub config: ExperimentConfig,
    pub outputs: Vec<PathBuf>,
}

/// Runs `body` and records the outcome in `run.json`, whether it failed or not.
pub fn with_run_record<T>(
    command: &str,
    config: &ExperimentConfig,
    body: impl FnOnce(&ExperimentConfig) -> Result<(T, Vec<PathBuf>)>,
) -> Result<T> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let start = Instant::now();
    let outcome = config.validate().and_then(|()| body(config));
    let (status, outputs) = match &outcome {
        Ok((_, outs)) => ("ok".to_string(), outs.clone()),
        Err(e) => (format!("error: {e}"), Vec::new()),
    };
    let record = RunRecord {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
        outputs,
    };
    write_json(&config.out_dir.join("run.json"), &record)?;
    outcome.map(|(v, _)| v)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// A few-second configuration for tests that need real artifacts.
#[cfg(test)]
pub(crate) fn test_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        training: TrainingConfig {
            sensors: 5,
            samples: 300,
            batch_size: 50,
            epochs: 6,
            lr: 1e-2,
            controller_widths: vec![4],
            detector_widths: vec![4],
            ..TrainingConfig::default()
        },
        snr_db: vec![0.0],
        k_list: vec![3, 5],
        trials: 2000,
        out_dir: out.to_path_buf(),
        checkpoint_every: 2,
        ..ExperimentConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"trials": 7, "training": {"epochs": 3}}"#).unwrap();
        assert_eq!(partial.trials, 7);
        assert_eq!(partial.training.epochs, 3);
        assert_eq!(partial.training.sensors, 20);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 7}"#).is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig {
            k_list: vec![],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            k_list: vec![0],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            trials: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            snr_db: vec![f64::NAN],
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn seeds_differ_by_role_and_snr() {
        let c = ExperimentConfig::default();
        assert_ne!(c.seed_for("dataset", 0.0), c.seed_for("train", 0.0));
        assert_ne!(c.seed_for("dataset", 0.0), c.seed_for("dataset", -5.0));
        assert_eq!(c.snr_dir(-5.0), PathBuf::from("runs/snr_-5dB"));
    }

    #[test]
    fn run_record_written_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            out_dir: dir.path().to_path_buf(),
            trials: 0,
            ..Default::default()
        };
        let r: Result<()> = with_run_record("sweep", &cfg, |_| Ok(((), vec![])));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
        let rec: RunRecord = read_json(&dir.path().join("run.json")).unwrap();
        assert!(rec.status.starts_with("error"));
        assert_eq!(rec.command, "sweep");
    }
}
