//! Fusion center: the bit count as sufficient statistic, posterior detectors
//! over the average `k/K`, and end-to-end Monte Carlo error estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{GaussianModel, Hypothesis, Priors};
use crate::metrics::log_binomial;
use crate::neural::{Head, Mlp, Trace};
use crate::quantizer::{quantize, Controller, GammaPair};
use crate::rng;

/// Exact bit average `ones / total`, kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitCount {
    pub ones: usize,
    pub total: usize,
}

impl BitCount {
    pub fn fraction(&self) -> f64 {
        self.ones as f64 / self.total as f64
    }
}

pub fn average_bits(bits: &[u8]) -> Result<BitCount> {
    if bits.is_empty() {
        return Err(Error::invalid("no bits to fuse"));
    }
    Ok(BitCount {
        ones: bits.iter().filter(|&&b| b != 0).count(),
        total: bits.len(),
    })
}

/// `ln(pi_n C(K,k) gamma_n^k (1-gamma_n)^(K-k))` for both hypotheses.
fn joint_log_weights(priors: Priors, gammas: GammaPair, k: usize, total: usize) -> [f64; 2] {
    let lc = log_binomial(total, k).expect("k <= K checked by callers");
    let term = |pi: f64, g: f64| {
        if pi == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ones = if k == 0 { 0.0 } else { k as f64 * g.ln() };
        let zeros = if k == total {
            0.0
        } else {
            (total - k) as f64 * (-g).ln_1p()
        };
        pi.ln() + lc + ones + zeros
    };
    [
        term(priors.pi0(), gammas.gamma0),
        term(priors.pi1(), gammas.gamma1),
    ]
}

/// Exact posterior `p(H | kbar = k/K)` under the binomial count law.
pub fn oracle_posterior(
    priors: Priors,
    gammas: GammaPair,
    k: usize,
    total: usize,
) -> Result<[f64; 2]> {
    if k > total {
        return Err(Error::invalid(format!("k={k} exceeds K={total}")));
    }
    let [a, b] = joint_log_weights(priors, gammas, k, total);
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return Err(Error::Unreachable { k, total });
    }
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    Ok([ea / (ea + eb), eb / (ea + eb)])
}

/// Argmax of a posterior pair; ties go to H1.
pub fn decide_posterior(p: [f64; 2]) -> Hypothesis {
    if p[0] > p[1] {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    /// Softmax-headed network fed with `k/K`.
    Neural(Mlp),
    /// The exact posterior for known priors and gammas.
    Oracle { priors: Priors, gammas: GammaPair },
}

impl Detector {
    pub fn neural(net: Mlp) -> Result<Self> {
        if net.head() != Head::Softmax || net.sizes()[0] != 1 {
            return Err(Error::invalid(
                "detector network must map a scalar to a softmax pair",
            ));
        }
        Ok(Detector::Neural(net))
    }

    pub fn posterior(&self, k: usize, total: usize) -> Result<[f64; 2]> {
        if total == 0 || k > total {
            return Err(Error::invalid(format!(
                "need 0 <= k <= K with K >= 1, got k={k}, K={total}"
            )));
        }
        match self {
            Detector::Neural(net) => {
                let y = net.eval(&[k as f64 / total as f64])?;
                Ok([y[0], y[1]])
            }
            Detector::Oracle { priors, gammas } => oracle_posterior(*priors, *gammas, k, total),
        }
    }

    /// MAP decision; an unreachable count under the oracle is a 0 = 0 tie and goes to H1.
    pub fn decide(&self, k: usize, total: usize) -> Result<Hypothesis> {
        match self.posterior(k, total) {
            Ok(p) => Ok(decide_posterior(p)),
            Err(Error::Unreachable { .. }) => Ok(Hypothesis::H1),
            Err(e) => Err(e),
        }
    }

    /// Decisions for every `k` in `0..=K`.
    pub fn decision_table(&self, total: usize) -> Result<Vec<Hypothesis>> {
        (0..=total).map(|k| self.decide(k, total)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub error_rate: f64,
    pub trials: u64,
    pub errors: u64,
    /// `1.96 sqrt(e (1 - e) / n)`.
    pub ci_halfwidth: f64,
    /// 95% interval: normal approximation, or Wilson when fewer than 10 errors.
    pub interval: [f64; 2],
    pub per_hypothesis: [Tally; 2],
    pub k: usize,
    pub sigma: f64,
    pub snr_db: f64,
    pub seed: u64,
}

const Z95: f64 = 1.96;

impl EvaluationReport {
    fn from_tallies(
        per_hypothesis: [Tally; 2],
        k: usize,
        model: &GaussianModel,
        seed: u64,
    ) -> Self {
        let trials = per_hypothesis[0].trials + per_hypothesis[1].trials;
        let errors = per_hypothesis[0].errors + per_hypothesis[1].errors;
        let n = trials as f64;
        let e = errors as f64 / n;
        let ci_halfwidth = Z95 * (e * (1.0 - e) / n).sqrt();
        let interval = if errors < 10 {
            let z2 = Z95 * Z95;
            let center = (e + z2 / (2.0 * n)) / (1.0 + z2 / n);
            let half = Z95 / (1.0 + z2 / n) * (e * (1.0 - e) / n + z2 / (4.0 * n * n)).sqrt();
            [(center - half).max(0.0), (center + half).min(1.0)]
        } else {
            [(e - ci_halfwidth).max(0.0), (e + ci_halfwidth).min(1.0)]
        };
        Self {
            error_rate: e,
            trials,
            errors,
            ci_halfwidth,
            interval,
            per_hypothesis,
            k,
            sigma: model.sigma(),
            snr_db: -20.0 * model.sigma().log10(),
            seed,
        }
    }
}

/// Trials per independent random substream.
pub const TRIAL_BLOCK: u64 = 4096;

fn run_block(
    block: u64,
    count: u64,
    model: &GaussianModel,
    priors: Priors,
    controller: &Controller,
    decisions: &[Hypothesis],
    seed: u64,
) -> [Tally; 2] {
    use rand::Rng;
    let k = decisions.len() - 1;
    let mut r = rng::substream(seed, "monte-carlo", block);
    let mut scratch = Trace::default();
    let mut tally = [Tally::default(); 2];
    for _ in 0..count {
        let h = priors.sample(&mut r);
        let mut ones = 0;
        for _ in 0..k {
            let x = model.sample(h, &mut r);
            let z: f64 = r.random();
            ones += usize::from(quantize(controller.eval_with(x, &mut scratch), z));
        }
        let t = &mut tally[h.index()];
        t.trials += 1;
        t.errors += u64::from(decisions[ones] != h);
    }
    tally
}

/// End-to-end error rate: per trial draw `H` from the priors, `K` observations,
/// dither-quantize each, count the ones and decide.
///
/// Trials are split into blocks of [`TRIAL_BLOCK`], each drawing from its own
/// substream of `seed`, so the result does not depend on how blocks are scheduled.
pub fn monte_carlo_error(
    model: &GaussianModel,
    priors: Priors,
    controller: &Controller,
    detector: &Detector,
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<EvaluationReport> {
    if trials == 0 || k == 0 {
        return Err(Error::invalid("need at least one trial and one sensor"));
    }
    let decisions = detector.decision_table(k)?;
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let block_len = |b: u64| TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
    let run = |b: u64| run_block(b, block_len(b), model, priors, controller, &decisions, seed);

    #[cfg(feature = "parallel")]
    let parts: Vec<[Tally; 2]> = {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<[Tally; 2]> = (0..blocks).map(run).collect();

    let mut total = [Tally::default(); 2];
    for p in parts {
        for (t, q) in total.iter_mut().zip(p) {
            t.trials += q.trials;
            t.errors += q.errors;
        }
    }
    Ok(EvaluationReport::from_tallies(total, k, model, seed))
}
