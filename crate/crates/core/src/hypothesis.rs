//! Binary hypotheses, priors and the conditionally i.i.d. Gaussian
//! observation model shared by every sensor.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

/// Prior pair `(pi0, pi1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pi0: f64,
    pi1: f64,
}

impl Priors {
    /// Builds the pair from `pi0`; `pi1 = 1 - pi0`.
    pub fn new(pi0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi0) {
            return Err(Error::invalid(format!("prior pi0={pi0} outside [0, 1]")));
        }
        Ok(Self {
            pi0,
            pi1: 1.0 - pi0,
        })
    }

    pub fn equal() -> Self {
        Self { pi0: 0.5, pi1: 0.5 }
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn get(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.pi0,
            Hypothesis::H1 => self.pi1,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.pi0, self.pi1]
    }

    pub fn min(&self) -> f64 {
        self.pi0.min(self.pi1)
    }

    pub fn sample(&self, rng: &mut Stream) -> Hypothesis {
        if rng.random::<f64>() < self.pi0 {
            Hypothesis::H0
        } else {
            Hypothesis::H1
        }
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self::equal()
    }
}

/// `SNR = 1 / sigma^2` in decibels, so `sigma = 10^(-snr_db / 20)`.
pub fn snr_to_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// `X | H_n ~ N(mean_n, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    mean0: f64,
    mean1: f64,
    sigma: f64,
}

impl GaussianModel {
    pub fn new(mean0: f64, mean1: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma={sigma} must be positive and finite"
            )));
        }
        if !(mean0.is_finite() && mean1.is_finite()) {
            return Err(Error::invalid("means must be finite"));
        }
        Ok(Self {
            mean0,
            mean1,
            sigma,
        })
    }

    /// Means at -1 and +1.
    pub fn symmetric(sigma: f64) -> Result<Self> {
        Self::new(-1.0, 1.0, sigma)
    }

    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::symmetric(snr_to_sigma(snr_db))
    }

    pub fn mean(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.mean0,
            Hypothesis::H1 => self.mean1,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pdf(&self, x: f64, h: Hypothesis) -> f64 {
        let z = (x - self.mean(h)) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    pub fn ln_pdf(&self, x: f64, h: Hypothesis) -> f64 {
        let z = (x - self.mean(h)) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn sample(&self, h: Hypothesis, rng: &mut Stream) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean(h) + self.sigma * z
    }
}

/// One H0-conditioned and one H1-conditioned draw sharing the index `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationPair {
    pub x_h0: f64,
    pub x_h1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub mean0: f64,
    pub mean1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ObservationPair>,
    pub seed: u64,
    pub model: GaussianModel,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            seed: self.seed,
            sigma: self.model.sigma,
            t: self.samples.len(),
            mean0: self.model.mean0,
            mean1: self.model.mean1,
        }
    }

    /// Writes `t,x_h0,x_h1` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["t", "x_h0", "x_h1"]).map_err(csv_err)?;
        for (i, s) in self.samples.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                format!("{:.16e}", s.x_h0),
                format!("{:.16e}", s.x_h1),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(csv_path: &Path, manifest_path: &Path) -> Result<Self> {
        if !csv_path.exists() {
            return Err(Error::MissingArtifact(csv_path.to_path_buf()));
        }
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: manifest_path.to_path_buf(),
                source,
            })?;
        let csv_err = |source| Error::Csv {
            path: csv_path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(csv_path).map_err(csv_err)?;
        let mut samples = Vec::with_capacity(manifest.t);
        for row in r.deserialize::<(usize, f64, f64)>() {
            let (_, x_h0, x_h1) = row.map_err(csv_err)?;
            samples.push(ObservationPair { x_h0, x_h1 });
        }
        if samples.len() != manifest.t {
            return Err(Error::invalid(format!(
                "{} holds {} rows but its manifest says T={}",
                csv_path.display(),
                samples.len(),
                manifest.t
            )));
        }
        Ok(Self {
            samples,
            seed: manifest.seed,
            model: GaussianModel::new(manifest.mean0, manifest.mean1, manifest.sigma)?,
        })
    }
}

/// Draws `t` pairs from the stream `(seed, "dataset")`, H0 before H1 per index.
pub fn sample_dataset(model: &GaussianModel, t: usize, seed: u64) -> Result<Dataset> {
    if t == 0 {
        return Err(Error::invalid("dataset size T must be at least 1"));
    }
    let mut rng = rng::stream(seed, "dataset");
    let samples = (0..t)
        .map(|_| ObservationPair {
            x_h0: model.sample(Hypothesis::H0, &mut rng),
            x_h1: model.sample(Hypothesis::H1, &mut rng),
        })
        .collect();
    Ok(Dataset {
        samples,
        seed,
        model: *model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> GaussianModel {
        GaussianModel::symmetric(1.0).unwrap()
    }

    #[test]
    fn pdf_spot_values() {
        let m = unit();
        assert!((m.pdf(-1.0, Hypothesis::H0) - 0.398_942_3).abs() < 1e-7);
        assert!((m.pdf(-1.0, Hypothesis::H1) - 0.053_991_0).abs() < 1e-7);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for sigma in [0.3, 1.0, 2.5] {
            let m = GaussianModel::new(-1.0, 1.0, sigma).unwrap();
            for h in Hypothesis::BOTH {
                let (lo, hi, n) = (m.mean(h) - 20.0 * sigma, m.mean(h) + 20.0 * sigma, 20_000);
                let dx = (hi - lo) / n as f64;
                // trapezoid; the integrand vanishes at both ends
                let s: f64 = (1..n).map(|i| m.pdf(lo + i as f64 * dx, h)).sum::<f64>() * dx;
                assert!((s - 1.0).abs() < 1e-6, "sigma={sigma} {h:?}: {s}");
            }
        }
    }

    #[test]
    fn ln_pdf_finite_far_out() {
        let m = GaussianModel::symmetric(0.5).unwrap();
        for h in Hypothesis::BOTH {
            assert!(m.ln_pdf(m.mean(h) + 50.0 * 0.5, h).is_finite());
            assert!(m.pdf(m.mean(h) - 50.0 * 0.5, h) >= 0.0);
        }
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_sigma(0.0), 1.0);
        assert!((snr_to_sigma(20.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_sigma(-6.0206) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussianModel::symmetric(0.0).is_err());
        assert!(GaussianModel::symmetric(-1.0).is_err());
        assert!(Priors::new(1.5).is_err());
        assert!(sample_dataset(&unit(), 0, 1).is_err());
    }

    #[test]
    fn near_noiseless_sample_hits_mean() {
        let m = GaussianModel::symmetric(1e-12).unwrap();
        let x = m.sample(Hypothesis::H1, &mut rng::stream(3, "obs"));
        assert!((x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = unit();
        let draw = || {
            let mut r = rng::stream(11, "obs");
            (0..32)
                .map(|_| m.sample(Hypothesis::H0, &mut r))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn million_draw_moments() {
        let m = unit();
        let d = sample_dataset(&m, 1_000_000, 5).unwrap();
        let n = d.len() as f64;
        let mean0 = d.samples.iter().map(|s| s.x_h0).sum::<f64>() / n;
        let mean1 = d.samples.iter().map(|s| s.x_h1).sum::<f64>() / n;
        assert!((mean0 + 1.0).abs() < 0.004, "{mean0}");
        assert!((mean1 - 1.0).abs() < 0.004, "{mean1}");
        // Var of the sample variance is 2/n for a unit normal
        let var0 = d
            .samples
            .iter()
            .map(|s| (s.x_h0 - mean0).powi(2))
            .sum::<f64>()
            / n;
        assert!((var0 - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{var0}");
    }

    #[test]
    fn single_pair_dataset() {
        let d = sample_dataset(&unit(), 1, 9).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dataset(&unit(), 257, 99).unwrap();
        let (c, j) = (dir.path().join("d.csv"), dir.path().join("m.json"));
        d.write_csv(&c).unwrap();
        d.write_manifest(&j).unwrap();
        let text = fs::read_to_string(&c).unwrap();
        assert!(text.starts_with("t,x_h0,x_h1\n1,"));
        assert_eq!(Dataset::load(&c, &j).unwrap(), d);
    }

    proptest! {
        #[test]
        fn mirror_symmetry(x in -20.0f64..20.0) {
            let m = unit();
            let a = m.pdf(x, Hypothesis::H0);
            let b = m.pdf(-x, Hypothesis::H1);
            prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
            prop_assert!(a > 0.0);
        }
    }
}
