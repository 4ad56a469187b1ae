//! One-bit probabilistic quantizer: a probability controller `G(x)` followed
//! by comparison with uniform dither, so that `P(u = 1 | x) = G(x)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{GaussianModel, Hypothesis};
use crate::neural::{Head, Mlp, Trace, OUTPUT_CLAMP};
use crate::rng::Stream;

/// `(gamma0, gamma1)`: probability that a sensor emits 1 under each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPair {
    pub gamma0: f64,
    pub gamma1: f64,
}

impl GammaPair {
    pub fn new(gamma0: f64, gamma1: f64) -> Result<Self> {
        for g in [gamma0, gamma1] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::invalid(format!("gamma={g} outside [0, 1]")));
            }
        }
        Ok(Self { gamma0, gamma1 })
    }

    /// Both entries pulled into `[1e-9, 1 - 1e-9]`.
    pub fn clamped(self) -> Self {
        let c = |g: f64| g.clamp(OUTPUT_CLAMP, 1.0 - OUTPUT_CLAMP);
        Self {
            gamma0: c(self.gamma0),
            gamma1: c(self.gamma1),
        }
    }

    pub fn get(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.gamma0,
            Hypothesis::H1 => self.gamma1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// Sigmoid-headed network with a scalar input.
    Neural(Mlp),
    /// `G(x) = 1` if `x > tau`, else 0.
    Threshold { tau: f64 },
    /// `G(x) = p` for every `x`; carries no information when `p` is fixed.
    Constant { p: f64 },
}

impl Controller {
    pub fn neural(net: Mlp) -> Result<Self> {
        if net.head() != Head::Sigmoid || net.sizes()[0] != 1 {
            return Err(Error::invalid(
                "controller network must map a scalar to a sigmoid output",
            ));
        }
        Ok(Controller::Neural(net))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with(x, &mut Trace::default())
    }

    /// As [`Controller::eval`] but reuses a forward-pass buffer.
    pub fn eval_with(&self, x: f64, scratch: &mut Trace) -> f64 {
        match self {
            Controller::Neural(net) => {
                net.forward_into(&[x], scratch)
                    .expect("scalar input checked at construction");
                scratch.output()[0]
            }
            Controller::Threshold { tau } => {
                if x > *tau {
                    1.0
                } else {
                    0.0
                }
            }
            Controller::Constant { p } => *p,
        }
    }

    /// `E[G(X) | H]` under a Gaussian model: exact for thresholds and constants,
    /// composite Simpson quadrature over +-12 sigma otherwise.
    pub fn gamma_expected(&self, model: &GaussianModel, h: Hypothesis) -> f64 {
        match self {
            Controller::Threshold { tau } => gamma_exact_threshold(*tau, model, h),
            Controller::Constant { p } => *p,
            Controller::Neural(_) => {
                const PANELS: usize = 8000;
                let (mu, s) = (model.mean(h), model.sigma());
                let (lo, hi) = (mu - 12.0 * s, mu + 12.0 * s);
                let dx = (hi - lo) / PANELS as f64;
                let mut scratch = Trace::default();
                let mut f = |i: usize| {
                    let x = lo + i as f64 * dx;
                    self.eval_with(x, &mut scratch) * model.pdf(x, h)
                };
                let mut acc = f(0) + f(PANELS);
                for i in 1..PANELS {
                    acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
                }
                acc * dx / 3.0
            }
        }
    }

    pub fn gammas_expected(&self, model: &GaussianModel) -> GammaPair {
        GammaPair {
            gamma0: self.gamma_expected(model, Hypothesis::H0),
            gamma1: self.gamma_expected(model, Hypothesis::H1),
        }
    }
}

/// `u = (1 + sgn(p - z)) / 2` with `sgn(0) = +1`, i.e. 1 iff `p >= z`.
pub fn quantize(p: f64, z: f64) -> u8 {
    debug_assert!((0.0..=1.0).contains(&p) && (0.0..1.0).contains(&z));
    u8::from(p >= z)
}

/// One bit per observation, each with its own fresh dither draw.
pub fn quantize_array(controller: &Controller, xs: &[f64], rng: &mut Stream) -> Result<Vec<u8>> {
    if xs.is_empty() {
        return Err(Error::invalid("no observations to quantize"));
    }
    let mut scratch = Trace::default();
    Ok(xs
        .iter()
        .map(|&x| quantize(controller.eval_with(x, &mut scratch), rng.random::<f64>()))
        .collect())
}

/// `(1/B) sum_t G(x_t)`.
pub fn gamma_empirical(controller: &Controller, batch: &[f64]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut scratch = Trace::default();
    Ok(batch
        .iter()
        .map(|&x| controller.eval_with(x, &mut scratch))
        .sum::<f64>()
        / batch.len() as f64)
}

/// `P(X > tau | H)` for a Gaussian model.
pub fn gamma_exact_threshold(tau: f64, model: &GaussianModel, h: Hypothesis) -> f64 {
    0.5 * libm::erfc((tau - model.mean(h)) / (model.sigma() * std::f64::consts::SQRT_2))
}
