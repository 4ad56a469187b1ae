use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::Result;
use crate::hypothesis::{GaussianModel, Hypothesis};
use crate::metrics::{chernoff_information, DiscreteChannel};
use crate::neural::write_json;
use crate::optimize::golden_section_min;
use crate::quantizer::{Controller, GammaPair};

/// Bracket width at which the threshold search stops.
pub const TAU_TOL: f64 = 1e-8;

/// The deterministic threshold quantizer maximizing the Chernoff information
/// of the binary channel it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineQuantizer {
    pub snr_db: f64,
    pub sigma: f64,
    pub tau_star: f64,
    pub gammas: GammaPair,
    pub chernoff: f64,
}

impl BaselineQuantizer {
    pub fn controller(&self) -> Controller {
        Controller::Threshold { tau: self.tau_star }
    }
}

pub(crate) fn threshold_chernoff(model: &GaussianModel, tau: f64) -> f64 {
    let g = Controller::Threshold { tau }.gammas_expected(model);
    chernoff_information(&DiscreteChannel::binary(g)).value
}

/// Golden-section search for `tau` between the two means.
pub fn find_baseline(model: &GaussianModel) -> BaselineQuantizer {
    let (m0, m1) = (model.mean(Hypothesis::H0), model.mean(Hypothesis::H1));
    let (lo, hi) = (m0.min(m1), m0.max(m1));
    let best = golden_section_min(|tau| -threshold_chernoff(model, tau), lo, hi, TAU_TOL);
    let gammas = Controller::Threshold { tau: best.x }.gammas_expected(model);
    BaselineQuantizer {
        snr_db: -20.0 * model.sigma().log10(),
        sigma: model.sigma(),
        tau_star: best.x,
        gammas,
        chernoff: -best.value,
    }
}

/// Baseline per configured SNR, written to `baseline.json`.
pub fn baseline(config: &ExperimentConfig) -> Result<(Vec<BaselineQuantizer>, Vec<PathBuf>)> {
    super::ensure_dir(&config.out_dir)?;
    let mut all = Vec::with_capacity(config.snr_db.len());
    for &snr in &config.snr_db {
        let mut b = find_baseline(&config.model(snr)?);
        b.snr_db = snr;
        all.push(b);
    }
    let path = config.out_dir.join("baseline.json");
    write_json(&path, &all)?;
    Ok((all, vec![path]))
}
