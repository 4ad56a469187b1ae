//! Detection-performance metrics for `K` conditionally i.i.d. quantized
//! sensors: the MAP error probability (by enumeration, by the binomial
//! closed form, and through the distribution of the bit average), Chernoff
//! information, the expected posterior KL divergence, and log-binomials.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hypothesis::{Hypothesis, Priors};
use crate::optimize::golden_section_min;
use crate::quantizer::GammaPair;

/// Above this `K` the binomial closed form switches to log-space terms.
pub const LOG_SPACE_THRESHOLD: usize = 60;

/// `L^K` limit for [`mapdep_enumerate`].
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

const NORMALIZATION_TOL: f64 = 1e-12;
const KL_LOG_FLOOR: f64 = 1e-12;

/// Conditional message distributions `p(u | H0)` and `p(u | H1)` over `L` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    p_given_h0: Vec<f64>,
    p_given_h1: Vec<f64>,
}

impl DiscreteChannel {
    pub fn new(p_given_h0: Vec<f64>, p_given_h1: Vec<f64>) -> Result<Self> {
        if p_given_h0.len() < 2 || p_given_h0.len() != p_given_h1.len() {
            return Err(Error::invalid(format!(
                "channel needs two equal-length vectors of at least 2 levels, got {} and {}",
                p_given_h0.len(),
                p_given_h1.len()
            )));
        }
        for p in [&p_given_h0, &p_given_h1] {
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(
                    "channel probabilities must be finite and non-negative",
                ));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::invalid(format!("channel row sums to {s}, not 1")));
            }
        }
        Ok(Self {
            p_given_h0,
            p_given_h1,
        })
    }

    /// One-bit channel; level 1 has probability `gamma_n` under `H_n`.
    pub fn binary(gammas: GammaPair) -> Self {
        Self {
            p_given_h0: vec![1.0 - gammas.gamma0, gammas.gamma0],
            p_given_h1: vec![1.0 - gammas.gamma1, gammas.gamma1],
        }
    }

    pub fn levels(&self) -> usize {
        self.p_given_h0.len()
    }

    pub fn given(&self, h: Hypothesis) -> &[f64] {
        match h {
            Hypothesis::H0 => &self.p_given_h0,
            Hypothesis::H1 => &self.p_given_h1,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            p_given_h0: self.p_given_h1.clone(),
            p_given_h1: self.p_given_h0.clone(),
        }
    }

    /// `ln sum_u p(u|H0)^alpha p(u|H1)^(1-alpha)`, convex in `alpha`.
    pub fn chernoff_objective(&self, alpha: f64) -> f64 {
        self.p_given_h0
            .iter()
            .zip(&self.p_given_h1)
            .filter(|(a, b)| **a > 0.0 || **b > 0.0)
            .map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha))
            .sum::<f64>()
            .ln()
    }
}

/// Exact MAP error by summing over all `L^K` message vectors.
pub fn mapdep_enumerate(priors: Priors, channel: &DiscreteChannel, k: usize) -> Result<f64> {
    let levels = channel.levels();
    let too_large = Error::EnumerationTooLarge { levels, sensors: k };
    let count = u32::try_from(k)
        .ok()
        .and_then(|k| (levels as u64).checked_pow(k))
        .ok_or(too_large)?;
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { levels, sensors: k });
    }
    fn walk(depth: usize, p0: f64, p1: f64, ch: &DiscreteChannel, pr: Priors, acc: &mut f64) {
        if depth == 0 {
            *acc += (pr.pi0() * p0).min(pr.pi1() * p1);
            return;
        }
        for (a, b) in ch.p_given_h0.iter().zip(&ch.p_given_h1) {
            walk(depth - 1, p0 * a, p1 * b, ch, pr, acc);
        }
    }
    let mut acc = 0.0;
    walk(k, 1.0, 1.0, channel, priors, &mut acc);
    Ok(acc)
}

/// `p^k (1-p)^(n-k)` as a logarithm, with `0 ln 0 = 0`.
fn ln_bernoulli_run(p: f64, n: usize, k: usize) -> f64 {
    let ones = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let zeros = if n == k {
        0.0
    } else {
        (n - k) as f64 * (-p).ln_1p()
    };
    ones + zeros
}

/// `C(n, k) p^k (1-p)^(n-k)`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    debug_assert!(k <= n);
    (log_binomial_unchecked(n, k) + ln_bernoulli_run(p, n, k)).exp()
}

/// Per-`k` joint weights `pi_n C(K,k) gamma_n^k (1-gamma_n)^(K-k)`.
fn joint_terms_direct(
    priors: Priors,
    g: GammaPair,
    n: usize,
) -> impl Iterator<Item = (usize, f64, f64)> {
    let mut c = 1.0;
    (0..=n).map(move |k| {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        let a = priors.pi0() * c * g.gamma0.powi(k as i32) * (1.0 - g.gamma0).powi((n - k) as i32);
        let b = priors.pi1() * c * g.gamma1.powi(k as i32) * (1.0 - g.gamma1).powi((n - k) as i32);
        (k, a, b)
    })
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Closed-form MAP error of `K` identical one-bit quantizers.
pub fn mapdep_binary(priors: Priors, gammas: GammaPair, k: usize) -> f64 {
    if k <= LOG_SPACE_THRESHOLD {
        return joint_terms_direct(priors, gammas, k)
            .map(|(_, a, b)| a.min(b))
            .sum();
    }
    let (lp0, lp1) = (ln_or_neg_inf(priors.pi0()), ln_or_neg_inf(priors.pi1()));
    let logs: Vec<f64> = (0..=k)
        .map(|j| {
            let c = log_binomial_unchecked(k, j);
            let a = lp0 + c + ln_bernoulli_run(gammas.gamma0, k, j);
            let b = lp1 + c + ln_bernoulli_run(gammas.gamma1, k, j);
            a.min(b)
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>()
}

/// [`mapdep_binary`] and its partial derivatives with respect to
/// `(gamma0, gamma1)`. Each `min` contributes the derivative of its active
/// branch; ties go to the H0 branch.
pub fn mapdep_binary_with_grad(priors: Priors, gammas: GammaPair, k: usize) -> (f64, [f64; 2]) {
    let n = k;
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    let mut c = 1.0;
    for j in 0..=n {
        if j > 0 {
            c = c * (n - j + 1) as f64 / j as f64;
        }
        let (g0, g1) = (gammas.gamma0, gammas.gamma1);
        let a = priors.pi0() * c * g0.powi(j as i32) * (1.0 - g0).powi((n - j) as i32);
        let b = priors.pi1() * c * g1.powi(j as i32) * (1.0 - g1).powi((n - j) as i32);
        let (branch, pi, g) = if a <= b {
            (0, priors.pi0(), g0)
        } else {
            (1, priors.pi1(), g1)
        };
        value += a.min(b);
        // d/dg [g^j (1-g)^(n-j)]
        let up = if j > 0 {
            j as f64 * g.powi(j as i32 - 1) * (1.0 - g).powi((n - j) as i32)
        } else {
            0.0
        };
        let down = if j < n {
            (n - j) as f64 * g.powi(j as i32) * (1.0 - g).powi((n - j) as i32 - 1)
        } else {
            0.0
        };
        grad[branch] += pi * c * (up - down);
    }
    (value, grad)
}

/// MAP error using only the bit average `k/K`, from the distribution of the
/// count built by adding one sensor at a time. Shares no code with the
/// binomial closed form.
pub fn mapdep_average(priors: Priors, gammas: GammaPair, k: usize) -> f64 {
    let count_law = |g: f64| {
        let mut dist = vec![0.0; k + 1];
        dist[0] = 1.0;
        for sensors in 1..=k {
            for j in (0..=sensors).rev() {
                let stay = if j < sensors {
                    dist[j] * (1.0 - g)
                } else {
                    0.0
                };
                let step = if j > 0 { dist[j - 1] * g } else { 0.0 };
                dist[j] = stay + step;
            }
        }
        dist
    };
    let (d0, d1) = (count_law(gammas.gamma0), count_law(gammas.gamma1));
    d0.iter()
        .zip(&d1)
        .map(|(a, b)| (priors.pi0() * a).min(priors.pi1() * b))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffResult {
    /// Nats.
    pub value: f64,
    pub alpha_star: f64,
}

pub const ALPHA_TOL: f64 = 1e-9;

/// Chernoff information of one channel: `-min_alpha ln sum_u p0^alpha p1^(1-alpha)`.
pub fn chernoff_information(channel: &DiscreteChannel) -> ChernoffResult {
    let m = golden_section_min(|a| channel.chernoff_objective(a), 0.0, 1.0, ALPHA_TOL);
    ChernoffResult {
        value: (-m.value).max(0.0),
        alpha_star: m.x,
    }
}

/// The two sides of the identical-quantizer inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerGap {
    /// `-(1/K) min_alpha sum_k ln sum_u p_k(u|H0)^alpha p_k(u|H1)^(1-alpha)`.
    pub common_alpha: f64,
    /// Mean of the per-sensor Chernoff informations.
    pub per_sensor_mean: f64,
}

/// `common_alpha <= per_sensor_mean`, with equality iff every sensor's
/// optimal `alpha` coincides (in particular for identical channels).
pub fn identical_quantizer_gap(channels: &[DiscreteChannel]) -> Result<QuantizerGap> {
    let first = channels
        .first()
        .ok_or_else(|| Error::invalid("need at least one channel"))?;
    if let Some(bad) = channels.iter().find(|c| c.levels() != first.levels()) {
        return Err(Error::invalid(format!(
            "mismatched levels: {} vs {}",
            first.levels(),
            bad.levels()
        )));
    }
    let n = channels.len() as f64;
    let joint = golden_section_min(
        |a| channels.iter().map(|c| c.chernoff_objective(a)).sum(),
        0.0,
        1.0,
        ALPHA_TOL,
    );
    Ok(QuantizerGap {
        common_alpha: -joint.value / n,
        per_sensor_mean: channels
            .iter()
            .map(|c| chernoff_information(c).value)
            .sum::<f64>()
            / n,
    })
}

/// `[w0, w1]` per `k`, where `w_n = pi_n p(kbar = k/K | H_n)`.
pub fn joint_table(priors: Priors, gammas: GammaPair, k: usize) -> Vec<[f64; 2]> {
    (0..=k)
        .map(|j| {
            [
                priors.pi0() * binomial_pmf(k, j, gammas.gamma0),
                priors.pi1() * binomial_pmf(k, j, gammas.gamma1),
            ]
        })
        .collect()
}

/// Expected KL divergence between the exact posterior `p(H | k/K)` and a
/// detector's table `F(H | k/K)`, averaged over the count distribution.
pub fn kl_binary(priors: Priors, gammas: GammaPair, table: &[[f64; 2]], k: usize) -> Result<f64> {
    if table.len() != k + 1 {
        return Err(Error::DimensionMismatch {
            expected: k + 1,
            actual: table.len(),
        });
    }
    for (j, row) in table.iter().enumerate() {
        if row.iter().any(|v| v.is_nan() || *v < 0.0) || (row[0] + row[1] - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "detector row {j} = {row:?} is not a distribution"
            )));
        }
    }
    Ok(joint_table(priors, gammas, k)
        .iter()
        .zip(table)
        .map(|(w, f)| {
            let z = w[0] + w[1];
            (0..2)
                .filter(|&n| w[n] > 0.0)
                .map(|n| w[n] * ((w[n] / z).max(KL_LOG_FLOOR).ln() - f[n].max(KL_LOG_FLOOR).ln()))
                .sum::<f64>()
        })
        .sum())
}

/// The MAP rule on raw likelihoods: H0 iff `pi0 l0 > pi1 l1`, ties to H1.
pub fn map_decide_ratio(priors: Priors, likelihood0: f64, likelihood1: f64) -> Result<Hypothesis> {
    if !(likelihood0 >= 0.0 && likelihood1 >= 0.0) || (likelihood0 == 0.0 && likelihood1 == 0.0) {
        return Err(Error::invalid(format!(
            "likelihoods ({likelihood0}, {likelihood1}) must be non-negative and not both zero"
        )));
    }
    Ok(if priors.pi0() * likelihood0 > priors.pi1() * likelihood1 {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    })
}

/// `ln C(n, k)`.
pub fn log_binomial(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds n={n}")));
    }
    Ok(log_binomial_unchecked(n, k))
}

/// Direct summation below this many factors; Stirling with corrections above.
const LOG_BINOMIAL_SUM_LIMIT: usize = 30;

fn log_binomial_unchecked(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= LOG_BINOMIAL_SUM_LIMIT {
        // every factor is >= 1, so the sum has no cancellation
        return (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
    }
    let (nf, kf, rf) = (n as f64, k as f64, (n - k) as f64);
    kf * (nf / kf).ln() - rf * (-kf / nf).ln_1p()
        + 0.5 * (nf / (2.0 * PI * kf * rf)).ln()
        + stirling_error(nf)
        - stirling_error(kf)
        - stirling_error(rf)
}

/// `ln m! - ((m + 1/2) ln m - m + ln(2 pi)/2)` for `m >= 30`.
fn stirling_error(m: f64) -> f64 {
    let m2 = m * m;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * m2)) / m2) / m2) / m
}
