use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ensure_dir, ExperimentConfig};
use crate::error::{Error, Result};
use crate::hypothesis::{sample_dataset, Dataset};
use crate::neural::{read_json, write_json, Mlp};
use crate::training::{
    ControllerTrainer, DetectorTrainer, LossCurve, Stage, TrainState, Trainer, TrainingConfig,
};

pub(crate) fn dataset_paths(config: &ExperimentConfig, snr: f64) -> (PathBuf, PathBuf) {
    let dir = config.snr_dir(snr);
    (dir.join("dataset.csv"), dir.join("manifest.json"))
}

pub(crate) fn controller_path(config: &ExperimentConfig, snr: f64) -> PathBuf {
    config.snr_dir(snr).join("controller.json")
}

pub(crate) fn detector_path(config: &ExperimentConfig, snr: f64, k: usize) -> PathBuf {
    config.snr_dir(snr).join(format!("detector_k{k}.json"))
}

/// One dataset per SNR, each from its own derived seed.
pub fn gen_data(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    for &snr in &config.snr_db {
        ensure_dir(&config.snr_dir(snr))?;
        let data = sample_dataset(
            &config.model(snr)?,
            config.training.samples,
            config.seed_for("dataset", snr),
        )?;
        let (csv, manifest) = dataset_paths(config, snr);
        data.write_csv(&csv)?;
        data.write_manifest(&manifest)?;
        outputs.extend([csv, manifest]);
    }
    Ok(outputs)
}

/// A stage snapshot is only resumed under the exact config that wrote it.
#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: TrainingConfig,
    state: TrainState,
}

fn snapshot_path(final_path: &Path) -> PathBuf {
    final_path.with_extension("partial.json")
}

fn load_snapshot(path: &Path, config: &TrainingConfig, stage: Stage) -> Result<Option<TrainState>> {
    if !path.exists() {
        return Ok(None);
    }
    let snap: Snapshot = read_json(path)?;
    if snap.config != *config || snap.state.stage != stage {
        return Err(Error::invalid(format!(
            "{} was written under a different config; delete it to start over",
            path.display()
        )));
    }
    Ok(Some(snap.state))
}

/// Shared epoch loop: periodic snapshots, then final checkpoint and loss CSV.
fn drive(
    t: &mut dyn Trainer,
    config: &TrainingConfig,
    every: usize,
    net_path: &Path,
    loss_path: &Path,
) -> Result<()> {
    let snap = snapshot_path(net_path);
    while t.epochs_done() < config.epochs {
        t.run_epoch()?;
        let done = t.epochs_done();
        if every > 0 && done.is_multiple_of(every) && done < config.epochs {
            write_json(
                &snap,
                &Snapshot {
                    config: config.clone(),
                    state: t.state(),
                },
            )?;
        }
    }
    let s = t.state();
    Mlp::from_checkpoint(&s.net)?.save(net_path)?;
    LossCurve {
        stage: s.stage,
        losses: s.losses,
    }
    .write_csv(loss_path)?;
    if snap.exists() {
        fs::remove_file(&snap).map_err(|e| Error::io(&snap, e))?;
    }
    Ok(())
}

/// Trains one controller per SNR at `training.sensors`, then one detector per
/// entry of `k_list` against that frozen controller.
pub fn train(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    for &snr in &config.snr_db {
        let (csv, manifest) = dataset_paths(config, snr);
        let data = Dataset::load(&csv, &manifest)?;
        let dir = config.snr_dir(snr);

        let cfg = config.training_at(snr, config.training.sensors);
        let net_path = controller_path(config, snr);
        let loss_path = dir.join("controller_loss.csv");
        let mut t = match load_snapshot(&snapshot_path(&net_path), &cfg, Stage::Controller)? {
            Some(s) => ControllerTrainer::resume(&cfg, &data, s)?,
            None => ControllerTrainer::new(&cfg, &data)?,
        };
        drive(&mut t, &cfg, config.checkpoint_every, &net_path, &loss_path)?;
        let phi = t.finish().0;
        outputs.extend([net_path, loss_path]);

        for &k in &config.k_list {
            let cfg = config.training_at(snr, k);
            let net_path = detector_path(config, snr, k);
            let loss_path = dir.join(format!("detector_k{k}_loss.csv"));
            let mut t = match load_snapshot(&snapshot_path(&net_path), &cfg, Stage::Detector)? {
                Some(s) => DetectorTrainer::resume(&cfg, &phi, &data, s)?,
                None => DetectorTrainer::new(&cfg, &phi, &data)?,
            };
            drive(&mut t, &cfg, config.checkpoint_every, &net_path, &loss_path)?;
            outputs.extend([net_path, loss_path]);
        }
    }
    Ok(outputs)
}
