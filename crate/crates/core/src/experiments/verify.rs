//! Self-checks of the analytic core, each reported with the largest deviation
//! it observed and the tolerance it was held to.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::baseline::find_baseline;
use crate::error::Result;
use crate::hypothesis::{sample_dataset, GaussianModel, Priors};
use crate::metrics::{
    chernoff_information, identical_quantizer_gap, mapdep_average, mapdep_binary, mapdep_enumerate,
    DiscreteChannel,
};
use crate::neural::{write_json, Head, Mlp};
use crate::quantizer::{quantize, GammaPair};
use crate::rng::{self, Stream};
use crate::training::{loss_phi, loss_theta, BatchLoss};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl Check {
    fn new(name: &'static str, max_deviation: f64, tolerance: f64, cases: usize) -> Self {
        Self {
            name,
            // NaN deviations fail
            passed: max_deviation <= tolerance,
            max_deviation,
            tolerance,
            cases,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<44} max dev {:>10.3e}  tol {:>8.1e}  ({} cases)",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_deviation,
                c.tolerance,
                c.cases
            )?;
        }
        Ok(())
    }
}

/// The closed-form error function under test.
pub type ClosedForm<'a> = &'a dyn Fn(Priors, GammaPair, usize) -> f64;

fn random_priors(r: &mut Stream) -> Priors {
    Priors::new(r.random_range(0.05..0.95)).expect("inside (0, 1)")
}

fn random_gammas(r: &mut Stream) -> GammaPair {
    GammaPair::new(r.random(), r.random()).expect("inside [0, 1)")
}

fn random_channel(r: &mut Stream, levels: usize) -> DiscreteChannel {
    let mut row = || {
        let raw: Vec<f64> = (0..levels).map(|_| r.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
    };
    let (p0, p1) = (row(), row());
    DiscreteChannel::new(p0, p1).expect("normalized rows")
}

fn closed_form_checks(closed_form: ClosedForm, seed: u64) -> Vec<Check> {
    let mut r = rng::stream(seed, "verify/closed-form");
    let (mut enum_dev, mut avg_dev) = (0.0f64, 0.0f64);
    let cases = 200;
    for _ in 0..cases {
        let (pr, g, k) = (
            random_priors(&mut r),
            random_gammas(&mut r),
            r.random_range(1..=12),
        );
        let cf = closed_form(pr, g, k);
        let enumerated =
            mapdep_enumerate(pr, &DiscreteChannel::binary(g), k).expect("K <= 12 is enumerable");
        enum_dev = enum_dev.max((enumerated - cf).abs());
        avg_dev = avg_dev.max((cf - mapdep_average(pr, g, k)).abs());
    }

    let m = GaussianModel::symmetric(1.0).expect("valid");
    let g = find_baseline(&m).gammas;
    let mut rise = 0.0f64;
    for k in 1..40 {
        let (a, b) = (
            closed_form(Priors::equal(), g, k),
            closed_form(Priors::equal(), g, k + 1),
        );
        rise = rise.max((b - a) / a);
    }
    vec![
        Check::new("enumeration matches closed form", enum_dev, 1e-10, cases),
        Check::new("closed form matches bit-count route", avg_dev, 1e-12, cases),
        Check::new("closed form non-increasing in K", rise.max(0.0), 1e-12, 39),
    ]
}

fn chernoff_checks(seed: u64) -> Vec<Check> {
    let mut r = rng::stream(seed, "verify/chernoff");
    let cases = 100;
    let (mut excess, mut equality) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let levels = r.random_range(2..=4);
        let (a, b) = (
            random_channel(&mut r, levels),
            random_channel(&mut r, levels),
        );
        let gap = identical_quantizer_gap(&[a.clone(), b]).expect("same level count");
        excess = excess.max(gap.common_alpha - gap.per_sensor_mean);
        let same = identical_quantizer_gap(&[a.clone(), a.clone(), a]).expect("same level count");
        equality = equality.max((same.common_alpha - same.per_sensor_mean).abs());
    }
    let b = find_baseline(&GaussianModel::symmetric(1.0).expect("valid"));
    let reference = chernoff_information(&DiscreteChannel::binary(b.gammas)).value;
    vec![
        Check::new(
            "common alpha bounded by per-sensor mean",
            excess.max(0.0),
            1e-12,
            cases,
        ),
        Check::new("identical channels reach equality", equality, 1e-9, cases),
        Check::new(
            "symmetric threshold baseline at zero",
            b.tau_star.abs(),
            1e-6,
            1,
        ),
        Check::new(
            "baseline maximizes its own Chernoff value",
            (reference - b.chernoff).abs(),
            1e-12,
            1,
        ),
    ]
}

fn central_difference(loss: impl Fn(&Mlp) -> f64, net: &Mlp, i: usize, h: f64) -> f64 {
    let (mut p, mut m) = (net.clone(), net.clone());
    p.set_param(i, net.param(i) + h);
    m.set_param(i, net.param(i) - h);
    (loss(&p) - loss(&m)) / (2.0 * h)
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative gap between analytic and central-difference gradients
/// over `probes` random (network, parameter) pairs.
pub fn gradient_check(
    probes: usize,
    seed: u64,
    make_net: impl Fn(u64) -> Mlp,
    loss: impl Fn(&Mlp, &mut Stream) -> BatchLoss,
) -> f64 {
    let mut r = rng::stream(seed, "verify/gradients");
    let mut worst = 0.0f64;
    for probe in 0..probes {
        let net = make_net(rng::derive_seed(seed, &format!("probe-{probe}")));
        let state = r.clone();
        let analytic = loss(&net, &mut r);
        let i = r.random_range(0..net.param_count());
        let fd = central_difference(|n| loss(n, &mut state.clone()).loss, &net, i, 1e-5);
        worst = worst.max(relative_error(analytic.grads.get(i), fd));
    }
    worst
}

fn gradient_checks(seed: u64) -> Vec<Check> {
    let data =
        sample_dataset(&GaussianModel::symmetric(1.0).expect("valid"), 64, seed).expect("T >= 1");
    let phi = gradient_check(
        100,
        seed,
        |s| Mlp::new(&[1, 6, 6, 1], Head::Sigmoid, s).expect("valid sizes"),
        |net, r| {
            let k = r.random_range(1..=20);
            let b = r.random_range(8..=64);
            loss_phi(net, &data.samples[..b], Priors::equal(), k).expect("finite")
        },
    );
    let theta = gradient_check(
        100,
        seed,
        |s| Mlp::new(&[1, 6, 6, 2], Head::Softmax, s).expect("valid sizes"),
        |net, r| {
            let (pr, k) = (random_priors(r), r.random_range(1..=20));
            let g = GammaPair::new(r.random_range(0.05..0.5), r.random_range(0.5..0.95))
                .expect("in range");
            loss_theta(net, g, pr, k).expect("finite")
        },
    );
    vec![
        Check::new("controller loss gradient", phi, 1e-4, 100),
        Check::new("detector loss gradient", theta, 1e-4, 100),
    ]
}

/// Largest `|mean - p| / sd` of dithered bits over `p` in {0.1, 0.3, 0.5, 0.9}.
pub fn dither_deviation(draws: usize, seed: u64) -> f64 {
    [0.1, 0.3, 0.5, 0.9]
        .iter()
        .map(|&p| {
            let mut r = rng::substream(seed, "verify/dither", (p * 10.0) as u64);
            let ones: usize = (0..draws)
                .map(|_| usize::from(quantize(p, r.random())))
                .sum();
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            (ones as f64 / draws as f64 - p).abs() / sd
        })
        .fold(0.0, f64::max)
}

/// Runs every check against `closed_form`; [`verify`] uses the library's own.
pub fn verify_with(closed_form: ClosedForm, seed: u64) -> VerifyReport {
    let mut checks = closed_form_checks(closed_form, seed);
    checks.extend(chernoff_checks(seed));
    checks.extend(gradient_checks(seed));
    checks.push(Check::new(
        "dithered bits unbiased (in sd units)",
        dither_deviation(1_000_000, seed),
        4.0,
        4,
    ));
    VerifyReport { checks }
}

pub fn verify(seed: u64) -> VerifyReport {
    verify_with(&mapdep_binary, seed)
}
