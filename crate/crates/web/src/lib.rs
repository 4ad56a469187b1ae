//! Browser bindings for the demo page in `www/`.
//!
//! Every export has a plain Rust counterpart in [`curves`] that the wrappers
//! call, so the numbers can be tested without a JavaScript host.

use wasm_bindgen::prelude::*;

pub mod curves {
    use bqdetect::experiments::find_baseline;
    use bqdetect::fusion::monte_carlo_error;
    use bqdetect::metrics::{chernoff_information, mapdep_binary};
    use bqdetect::{Controller, Detector, DiscreteChannel, Error, GaussianModel, Priors, Result};

    /// Largest grid or sensor count a single call may request.
    pub const MAX_POINTS: usize = 2000;
    /// Largest Monte Carlo run a single call may request.
    pub const MAX_TRIALS: u64 = 2_000_000;

    fn check_points(n: usize) -> Result<()> {
        if n == 0 || n > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "point count {n} outside 1..={MAX_POINTS}"
            )));
        }
        Ok(())
    }

    /// MAP error of the symmetric threshold baseline for `K = 1..=k_max`,
    /// interleaved with the Chernoff estimate `exp(-K C)`:
    /// `[err(1), est(1), err(2), est(2), ...]`.
    pub fn error_vs_sensors(snr_db: f64, k_max: usize, pi0: f64) -> Result<Vec<f64>> {
        check_points(k_max)?;
        let priors = Priors::new(pi0)?;
        let b = find_baseline(&GaussianModel::from_snr_db(snr_db)?);
        Ok((1..=k_max)
            .flat_map(|k| {
                [
                    mapdep_binary(priors, b.gammas, k),
                    (-(k as f64) * b.chernoff).exp(),
                ]
            })
            .collect())
    }

    /// Chernoff information of the threshold-at-`tau` channel over an even
    /// grid on `[lo, hi]`, interleaved as `[tau, value, ...]`.
    pub fn chernoff_vs_threshold(snr_db: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
        check_points(points)?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bad threshold range [{lo}, {hi}]"
            )));
        }
        let model = GaussianModel::from_snr_db(snr_db)?;
        let step = if points == 1 {
            0.0
        } else {
            (hi - lo) / (points - 1) as f64
        };
        Ok((0..points)
            .flat_map(|i| {
                let tau = lo + step * i as f64;
                let g = Controller::Threshold { tau }.gammas_expected(&model);
                [tau, chernoff_information(&DiscreteChannel::binary(g)).value]
            })
            .collect())
    }

    /// End-to-end simulation of `K` threshold sensors with exact MAP fusion:
    /// `[error_rate, ci_halfwidth, closed_form]`.
    pub fn simulate(snr_db: f64, k: usize, tau: f64, trials: u64, seed: u64) -> Result<Vec<f64>> {
        check_points(k)?;
        if trials == 0 || trials > MAX_TRIALS {
            return Err(Error::InvalidArgument(format!(
                "trials {trials} outside 1..={MAX_TRIALS}"
            )));
        }
        let model = GaussianModel::from_snr_db(snr_db)?;
        let controller = Controller::Threshold { tau };
        let gammas = controller.gammas_expected(&model);
        let priors = Priors::equal();
        let detector = Detector::Oracle { priors, gammas };
        let r = monte_carlo_error(&model, priors, &controller, &detector, k, trials, seed)?;
        Ok(vec![
            r.error_rate,
            r.ci_halfwidth,
            mapdep_binary(priors, gammas, k),
        ])
    }
}

fn to_js<T>(r: bqdetect::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = errorVsSensors)]
pub fn error_vs_sensors(snr_db: f64, k_max: usize, pi0: f64) -> Result<Vec<f64>, JsError> {
    to_js(curves::error_vs_sensors(snr_db, k_max, pi0))
}

#[wasm_bindgen(js_name = chernoffVsThreshold)]
pub fn chernoff_vs_threshold(
    snr_db: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    to_js(curves::chernoff_vs_threshold(snr_db, lo, hi, points))
}

#[wasm_bindgen]
pub fn simulate(
    snr_db: f64,
    k: usize,
    tau: f64,
    trials: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    to_js(curves::simulate(
        snr_db,
        k,
        tau,
        u64::from(trials),
        u64::from(seed),
    ))
}
