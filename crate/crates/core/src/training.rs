//! Two-stage training. The controller is fitted first against the batch
//! estimate of the closed-form MAP error; it is then frozen and the detector
//! is fitted against the expected KL divergence to the exact posterior.
//!
//! Neither loss differentiates through the dither: both depend on the
//! controller only through the batch means `gamma_hat = (1/B) sum_t G(x_t)`.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{Dataset, ObservationPair, Priors};
use crate::metrics::{joint_table, mapdep_binary_with_grad};
use crate::neural::{Adam, Checkpoint, Gradients, Mlp, Trace};
use crate::quantizer::{Controller, GammaPair};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Sensor count `K` the losses are evaluated for.
    pub sensors: usize,
    /// Dataset size `T`.
    pub samples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Hidden widths of the controller network.
    pub controller_widths: Vec<usize>,
    /// Hidden widths of the detector network.
    pub detector_widths: Vec<usize>,
    pub pi0: f64,
    /// Reshuffle the dataset every epoch; fixed order otherwise.
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            sensors: 20,
            samples: 50_000,
            batch_size: 500,
            epochs: 500,
            lr: 1e-4,
            seed: 42,
            controller_widths: vec![20, 20, 20],
            detector_widths: vec![30, 30, 30],
            pi0: 0.5,
            shuffle: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 || self.samples == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "sensors, samples, batch_size and epochs must all be >= 1",
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.controller_widths.contains(&0) || self.detector_widths.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Priors::new(self.pi0)?;
        Ok(())
    }

    pub fn priors(&self) -> Priors {
        Priors::new(self.pi0).expect("validated")
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.samples.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Controller,
    Detector,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Controller => "controller",
            Stage::Detector => "detector",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded value per epoch: the mean of that epoch's batch losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub stage: Stage,
    pub losses: Vec<f64>,
}

impl LossCurve {
    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// `epoch,loss,stage`, epochs counted from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,loss,stage\n");
        for (i, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{},{:.16e},{}\n", i + 1, l, self.stage));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Loss value, gradients and the batch gammas they were computed from.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    pub grads: Gradients,
    pub gammas: GammaPair,
}

/// Batch MAP-error loss of a controller network.
///
/// `gamma_hat_n` is the batch mean of `G(x_{t,n})`; the loss is the binomial
/// closed form at `gamma_hat`. Since `d gamma_hat_n / d phi` is the mean of
/// the per-sample gradients, each sample needs one forward and one backward
/// pass, independent of the loss value.
pub fn loss_phi(
    net: &Mlp,
    batch: &[ObservationPair],
    priors: Priors,
    sensors: usize,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut trace = Trace::default();
    let mut sums = [0.0; 2];
    let mut per_h = [Gradients::zeros_like(net), Gradients::zeros_like(net)];
    for pair in batch {
        for (n, x) in [pair.x_h0, pair.x_h1].into_iter().enumerate() {
            net.forward_into(&[x], &mut trace)?;
            sums[n] += trace.output()[0];
            net.accumulate_backward(&trace, &[1.0], &mut per_h[n])?;
        }
    }
    let b = batch.len() as f64;
    let gammas = GammaPair {
        gamma0: sums[0] / b,
        gamma1: sums[1] / b,
    };
    let (loss, d_gamma) = mapdep_binary_with_grad(priors, gammas, sensors);
    if !loss.is_finite() || d_gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            stage: "controller",
            epoch: 0,
            loss,
            gamma0: gammas.gamma0,
            gamma1: gammas.gamma1,
        });
    }
    let [mut grads, g1] = per_h;
    grads.scale(d_gamma[0] / b);
    let mut g1 = g1;
    g1.scale(d_gamma[1] / b);
    grads.add(&g1);
    Ok(BatchLoss {
        loss,
        grads,
        gammas,
    })
}

/// Expected KL divergence between the exact posterior at `gammas` and the
/// detector network's output at every `kbar = k/K`. `gammas` is treated as a
/// constant; gradients flow through the softmax outputs only.
pub fn loss_theta(
    net: &Mlp,
    gammas: GammaPair,
    priors: Priors,
    sensors: usize,
) -> Result<BatchLoss> {
    let gammas = gammas.clamped();
    let weights = joint_table(priors, gammas, sensors);
    let mut grads = Gradients::zeros_like(net);
    let mut trace = Trace::default();
    let mut loss = 0.0;
    for (k, w) in weights.iter().enumerate() {
        net.forward_into(&[k as f64 / sensors as f64], &mut trace)?;
        let f = trace.output();
        let z = w[0] + w[1];
        let mut upstream = [0.0; 2];
        for n in 0..2 {
            if w[n] > 0.0 {
                loss += w[n] * ((w[n] / z).max(1e-12).ln() - f[n].max(1e-12).ln());
                upstream[n] = -w[n] / f[n];
            }
        }
        net.accumulate_backward(&trace, &upstream, &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::Diverged {
            stage: "detector",
            epoch: 0,
            loss,
            gamma0: gammas.gamma0,
            gamma1: gammas.gamma1,
        });
    }
    Ok(BatchLoss {
        loss,
        grads,
        gammas,
    })
}

/// Everything needed to continue a stage exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub stage: Stage,
    pub epochs_done: usize,
    pub losses: Vec<f64>,
    pub net: Checkpoint,
    pub adam: Adam,
}

impl TrainState {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::neural::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::neural::read_json(path)
    }
}

/// Epoch-at-a-time access shared by both stages, so a driver can snapshot
/// between epochs.
pub trait Trainer {
    fn epochs_done(&self) -> usize;
    fn run_epoch(&mut self) -> Result<f64>;
    fn state(&self) -> TrainState;
}

fn epoch_order(config: &TrainingConfig, stage: Stage, epoch: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..config.samples).collect();
    if config.shuffle {
        let label = format!("shuffle-{stage}");
        idx.shuffle(&mut rng::substream(config.seed, &label, epoch as u64));
    }
    idx
}

fn check_dataset(config: &TrainingConfig, dataset: &Dataset) -> Result<()> {
    config.validate()?;
    if dataset.len() != config.samples {
        return Err(Error::invalid(format!(
            "dataset holds {} pairs but the config asks for T={}",
            dataset.len(),
            config.samples
        )));
    }
    Ok(())
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Diverged {
            stage,
            loss,
            gamma0,
            gamma1,
            ..
        } => Error::Diverged {
            stage,
            epoch,
            loss,
            gamma0,
            gamma1,
        },
        other => other,
    }
}

/// Epoch-at-a-time controller training; see [`train_quantizer`].
pub struct ControllerTrainer<'a> {
    config: &'a TrainingConfig,
    dataset: &'a Dataset,
    net: Mlp,
    adam: Adam,
    losses: Vec<f64>,
}

impl<'a> ControllerTrainer<'a> {
    pub fn new(config: &'a TrainingConfig, dataset: &'a Dataset) -> Result<Self> {
        check_dataset(config, dataset)?;
        let mut net = Mlp::controller(
            &config.controller_widths,
            rng::derive_seed(config.seed, "controller-init"),
        )?;
        net.set_train_seed(config.seed);
        let adam = Adam::new(&net, config.lr)?;
        Ok(Self {
            config,
            dataset,
            net,
            adam,
            losses: Vec::new(),
        })
    }

    pub fn resume(
        config: &'a TrainingConfig,
        dataset: &'a Dataset,
        state: TrainState,
    ) -> Result<Self> {
        check_dataset(config, dataset)?;
        if state.stage != Stage::Controller || state.losses.len() != state.epochs_done {
            return Err(Error::invalid(
                "state is not a consistent controller-stage checkpoint",
            ));
        }
        Ok(Self {
            config,
            dataset,
            net: Mlp::from_checkpoint(&state.net)?,
            adam: state.adam,
            losses: state.losses,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn finish(self) -> (Mlp, LossCurve) {
        (
            self.net,
            LossCurve {
                stage: Stage::Controller,
                losses: self.losses,
            },
        )
    }
}

impl Trainer for ControllerTrainer<'_> {
    fn epochs_done(&self) -> usize {
        self.losses.len()
    }

    fn run_epoch(&mut self) -> Result<f64> {
        let epoch = self.losses.len();
        let order = epoch_order(self.config, Stage::Controller, epoch);
        let priors = self.config.priors();
        let mut batch = Vec::with_capacity(self.config.batch_size);
        let mut total = 0.0;
        let mut count = 0;
        for chunk in order.chunks(self.config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| self.dataset.samples[i]));
            let out = loss_phi(&self.net, &batch, priors, self.config.sensors)
                .map_err(|e| with_epoch(e, epoch + 1))?;
            self.adam.step(&mut self.net, &out.grads)?;
            total += out.loss;
            count += 1;
        }
        let mean = total / count as f64;
        self.losses.push(mean);
        Ok(mean)
    }

    fn state(&self) -> TrainState {
        TrainState {
            stage: Stage::Controller,
            epochs_done: self.losses.len(),
            losses: self.losses.clone(),
            net: self.net.to_checkpoint(),
            adam: self.adam.clone(),
        }
    }
}

/// Mini-batch Adam on [`loss_phi`] for `config.epochs` epochs.
pub fn train_quantizer(config: &TrainingConfig, dataset: &Dataset) -> Result<(Mlp, LossCurve)> {
    let mut t = ControllerTrainer::new(config, dataset)?;
    while t.epochs_done() < config.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

/// Epoch-at-a-time detector training; see [`train_detector`].
pub struct DetectorTrainer<'a> {
    config: &'a TrainingConfig,
    /// `G_phi*(x)` for every sample, H0 and H1 columns.
    controller_out: Vec<[f64; 2]>,
    net: Mlp,
    adam: Adam,
    losses: Vec<f64>,
}

impl<'a> DetectorTrainer<'a> {
    pub fn new(config: &'a TrainingConfig, phi_star: &Mlp, dataset: &Dataset) -> Result<Self> {
        check_dataset(config, dataset)?;
        let mut net = Mlp::detector(
            &config.detector_widths,
            rng::derive_seed(config.seed, "detector-init"),
        )?;
        net.set_train_seed(config.seed);
        let adam = Adam::new(&net, config.lr)?;
        Self::assemble(config, phi_star, dataset, net, adam, Vec::new())
    }

    pub fn resume(
        config: &'a TrainingConfig,
        phi_star: &Mlp,
        dataset: &Dataset,
        state: TrainState,
    ) -> Result<Self> {
        check_dataset(config, dataset)?;
        if state.stage != Stage::Detector || state.losses.len() != state.epochs_done {
            return Err(Error::invalid(
                "state is not a consistent detector-stage checkpoint",
            ));
        }
        let net = Mlp::from_checkpoint(&state.net)?;
        Self::assemble(config, phi_star, dataset, net, state.adam, state.losses)
    }

    fn assemble(
        config: &'a TrainingConfig,
        phi_star: &Mlp,
        dataset: &Dataset,
        net: Mlp,
        adam: Adam,
        losses: Vec<f64>,
    ) -> Result<Self> {
        let controller = Controller::neural(phi_star.clone())?;
        let mut scratch = Trace::default();
        let controller_out = dataset
            .samples
            .iter()
            .map(|p| {
                [
                    controller.eval_with(p.x_h0, &mut scratch),
                    controller.eval_with(p.x_h1, &mut scratch),
                ]
            })
            .collect();
        Ok(Self {
            config,
            controller_out,
            net,
            adam,
            losses,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn finish(self) -> (Mlp, LossCurve) {
        (
            self.net,
            LossCurve {
                stage: Stage::Detector,
                losses: self.losses,
            },
        )
    }
}

impl Trainer for DetectorTrainer<'_> {
    fn epochs_done(&self) -> usize {
        self.losses.len()
    }

    fn run_epoch(&mut self) -> Result<f64> {
        let epoch = self.losses.len();
        let order = epoch_order(self.config, Stage::Detector, epoch);
        let priors = self.config.priors();
        let mut total = 0.0;
        let mut count = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let mut sums = [0.0; 2];
            for &i in chunk {
                sums[0] += self.controller_out[i][0];
                sums[1] += self.controller_out[i][1];
            }
            let b = chunk.len() as f64;
            let gammas = GammaPair {
                gamma0: sums[0] / b,
                gamma1: sums[1] / b,
            };
            let out = loss_theta(&self.net, gammas, priors, self.config.sensors)
                .map_err(|e| with_epoch(e, epoch + 1))?;
            self.adam.step(&mut self.net, &out.grads)?;
            total += out.loss;
            count += 1;
        }
        let mean = total / count as f64;
        self.losses.push(mean);
        Ok(mean)
    }

    fn state(&self) -> TrainState {
        TrainState {
            stage: Stage::Detector,
            epochs_done: self.losses.len(),
            losses: self.losses.clone(),
            net: self.net.to_checkpoint(),
            adam: self.adam.clone(),
        }
    }
}

/// Mini-batch Adam on [`loss_theta`] with the controller frozen; each batch
/// re-estimates `gamma*` from its own samples.
pub fn train_detector(
    config: &TrainingConfig,
    phi_star: &Mlp,
    dataset: &Dataset,
) -> Result<(Mlp, LossCurve)> {
    let mut t = DetectorTrainer::new(config, phi_star, dataset)?;
    while t.epochs_done() < config.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{sample_dataset, GaussianModel};
    use crate::metrics::{kl_binary, mapdep_binary};
    use crate::neural::Head;
    use rand::Rng;

    fn pairs(n: usize, seed: u64) -> Vec<ObservationPair> {
        sample_dataset(&GaussianModel::symmetric(1.0).unwrap(), n, seed)
            .unwrap()
            .samples
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn constant_controller_loss_is_blind_guess() {
        let net = Mlp::zeros(&[1, 4, 1], Head::Sigmoid).unwrap();
        let pr = Priors::new(0.3).unwrap();
        let out = loss_phi(&net, &pairs(16, 1), pr, 5).unwrap();
        assert!((out.loss - 0.3).abs() < 1e-15);
        assert!(out.grads.to_flat().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn loss_phi_hand_value() {
        // a steep single unit acts as the x > 0 threshold on this batch
        let mut net = Mlp::zeros(&[1, 1], Head::Sigmoid).unwrap();
        net.set_param(0, 1e4);
        let xs0 = [-1.0, -0.5, -2.0, 0.7, -1.2];
        let xs1 = [1.0, 0.5, 2.0, -0.7, 1.2];
        let batch: Vec<_> = xs0
            .iter()
            .zip(&xs1)
            .map(|(&a, &b)| ObservationPair { x_h0: a, x_h1: b })
            .collect();
        let out = loss_phi(&net, &batch, Priors::equal(), 2).unwrap();
        assert!((out.gammas.gamma0 - 0.2).abs() < 1e-8);
        assert!((out.gammas.gamma1 - 0.8).abs() < 1e-8);
        assert!((out.loss - 0.20).abs() < 1e-8);
    }

    #[test]
    fn loss_phi_gradient_check() {
        let pr = Priors::equal();
        let batch = pairs(32, 2);
        let mut probe_rng = rng::stream(3, "probe");
        let mut worst: f64 = 0.0;
        for probe in 0..100 {
            let net = Mlp::new(&[1, 4, 1], Head::Sigmoid, probe).unwrap();
            let out = loss_phi(&net, &batch, pr, 5).unwrap();
            let i = probe_rng.random_range(0..net.param_count());
            let h = 1e-5;
            let mut p = net.clone();
            p.set_param(i, net.param(i) + h);
            let mut m = net.clone();
            m.set_param(i, net.param(i) - h);
            let fd = (loss_phi(&p, &batch, pr, 5).unwrap().loss
                - loss_phi(&m, &batch, pr, 5).unwrap().loss)
                / (2.0 * h);
            worst = worst.max(rel_err(out.grads.get(i), fd));
        }
        assert!(worst <= 1e-4, "{worst}");
    }

    /// One-layer softmax detector whose logit gap is the exact log-odds,
    /// which is affine in `k`.
    fn exact_detector(pr: Priors, g: GammaPair, k: usize) -> Mlp {
        let slope =
            k as f64 * ((g.gamma1 / g.gamma0).ln() - ((1.0 - g.gamma1) / (1.0 - g.gamma0)).ln());
        let offset =
            (pr.pi1() / pr.pi0()).ln() + k as f64 * ((1.0 - g.gamma1) / (1.0 - g.gamma0)).ln();
        let mut net = Mlp::zeros(&[1, 2], Head::Softmax).unwrap();
        // params: w00, w10, b0, b1
        net.set_param(1, slope);
        net.set_param(3, offset);
        net
    }

    #[test]
    fn exact_detector_has_zero_loss() {
        for (pr, g, k) in [
            (Priors::equal(), GammaPair::new(0.2, 0.8).unwrap(), 20),
            (
                Priors::new(0.7).unwrap(),
                GammaPair::new(0.35, 0.6).unwrap(),
                9,
            ),
        ] {
            let out = loss_theta(&exact_detector(pr, g, k), g, pr, k).unwrap();
            // only the output clamp at 1e-9 separates the net from the posterior
            assert!(out.loss.abs() < 1e-9, "{}", out.loss);
        }
    }

    #[test]
    fn uniform_detector_matches_kl_binary() {
        let g = GammaPair::new(0.2, 0.8).unwrap();
        let net = Mlp::zeros(&[1, 30, 30, 30, 2], Head::Softmax).unwrap();
        let out = loss_theta(&net, g, Priors::equal(), 1).unwrap();
        let by_hand = 2.0 * (0.4 * (0.8f64 / 0.5).ln() + 0.1 * (0.2f64 / 0.5).ln());
        assert!((out.loss - by_hand).abs() < 1e-15);
        let table = [[0.5, 0.5], [0.5, 0.5]];
        assert!((out.loss - kl_binary(Priors::equal(), g, &table, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn loss_theta_matches_kl_binary_for_trained_shapes() {
        let g = GammaPair::new(0.3, 0.75).unwrap();
        let pr = Priors::new(0.4).unwrap();
        let net = Mlp::new(&[1, 6, 6, 2], Head::Softmax, 5).unwrap();
        let table: Vec<[f64; 2]> = (0..=8)
            .map(|k| {
                let y = net.eval(&[k as f64 / 8.0]).unwrap();
                [y[0], y[1]]
            })
            .collect();
        let a = loss_theta(&net, g, pr, 8).unwrap().loss;
        let b = kl_binary(pr, g, &table, 8).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn loss_theta_gradient_check() {
        let mut probe_rng = rng::stream(4, "probe");
        let mut worst: f64 = 0.0;
        for probe in 0..100 {
            let net = Mlp::new(&[1, 5, 5, 2], Head::Softmax, probe).unwrap();
            let g = GammaPair::new(
                probe_rng.random_range(0.05..0.5),
                probe_rng.random_range(0.5..0.95),
            )
            .unwrap();
            let pr = Priors::new(probe_rng.random_range(0.2..0.8)).unwrap();
            let k = probe_rng.random_range(1..=20);
            let out = loss_theta(&net, g, pr, k).unwrap();
            let i = probe_rng.random_range(0..net.param_count());
            let h = 1e-5;
            let mut p = net.clone();
            p.set_param(i, net.param(i) + h);
            let mut m = net.clone();
            m.set_param(i, net.param(i) - h);
            let fd = (loss_theta(&p, g, pr, k).unwrap().loss
                - loss_theta(&m, g, pr, k).unwrap().loss)
                / (2.0 * h);
            worst = worst.max(rel_err(out.grads.get(i), fd));
        }
        assert!(worst <= 1e-4, "{worst}");
    }

    fn small_config() -> TrainingConfig {
        TrainingConfig {
            sensors: 5,
            samples: 400,
            batch_size: 50,
            epochs: 15,
            lr: 1e-2,
            seed: 3,
            controller_widths: vec![6, 6],
            detector_widths: vec![6, 6],
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn controller_training_reduces_loss_deterministically() {
        let cfg = small_config();
        let data = sample_dataset(&GaussianModel::symmetric(1.0).unwrap(), cfg.samples, 8).unwrap();
        let (net, curve) = train_quantizer(&cfg, &data).unwrap();
        assert_eq!(curve.losses.len(), cfg.epochs);
        assert!(curve.last().unwrap() < curve.losses[0]);
        assert!(curve.losses.iter().all(|l| (0.0..=0.5 + 1e-9).contains(l)));
        let (again, curve2) = train_quantizer(&cfg, &data).unwrap();
        assert_eq!(net.to_checkpoint(), again.to_checkpoint());
        assert_eq!(curve, curve2);
        // the trained gammas improve on the blind guess
        let c = Controller::neural(net).unwrap();
        let g = c.gammas_expected(&data.model);
        assert!(mapdep_binary(cfg.priors(), g, cfg.sensors) < 0.2);
    }

    #[test]
    fn resume_is_bit_exact() {
        let cfg = small_config();
        let data = sample_dataset(&GaussianModel::symmetric(1.0).unwrap(), cfg.samples, 8).unwrap();
        let (full, _) = train_quantizer(&cfg, &data).unwrap();
        let mut t = ControllerTrainer::new(&cfg, &data).unwrap();
        for _ in 0..6 {
            t.run_epoch().unwrap();
        }
        let json = serde_json::to_string(&t.state()).unwrap();
        let state: TrainState = serde_json::from_str(&json).unwrap();
        let mut t = ControllerTrainer::resume(&cfg, &data, state).unwrap();
        while t.epochs_done() < cfg.epochs {
            t.run_epoch().unwrap();
        }
        assert_eq!(t.finish().0.to_checkpoint(), full.to_checkpoint());
    }

    #[test]
    fn detector_training_leaves_controller_untouched() {
        let cfg = TrainingConfig {
            epochs: 40,
            ..small_config()
        };
        let data = sample_dataset(&GaussianModel::symmetric(1.0).unwrap(), cfg.samples, 8).unwrap();
        let phi = Mlp::controller(&[6, 6], 1).unwrap();
        let before = phi.to_checkpoint();
        let (theta, curve) = train_detector(&cfg, &phi, &data).unwrap();
        assert_eq!(phi.to_checkpoint(), before);
        assert_eq!(curve.stage, Stage::Detector);
        assert!(curve.last().unwrap() < curve.losses[0]);
        assert!(curve.losses.iter().all(|l| *l >= 0.0));
        let (theta2, _) = train_detector(&cfg, &phi, &data).unwrap();
        assert_eq!(theta.to_checkpoint(), theta2.to_checkpoint());
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig {
            epochs: 0,
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            lr: 0.0,
            ..small_config()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            pi0: 2.0,
            ..small_config()
        }
        .validate()
        .is_err());
        let cfg = small_config();
        let data = sample_dataset(&GaussianModel::symmetric(1.0).unwrap(), 10, 8).unwrap();
        assert!(train_quantizer(&cfg, &data).is_err());
        assert_eq!(
            TrainingConfig {
                samples: 401,
                ..cfg
            }
            .batches_per_epoch(),
            9
        );
    }

    #[test]
    fn loss_curve_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        LossCurve {
            stage: Stage::Detector,
            losses: vec![0.5, 0.25],
        }
        .write_csv(&p)
        .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("epoch,loss,stage\n1,5.0000000000000000e-1,detector\n"));
    }
}
