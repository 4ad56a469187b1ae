use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::baseline::find_baseline;
use super::sweep::SweepRow;
use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::mapdep_binary;

/// Least-squares line through `(x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("need at least two paired points"));
    }
    if ys.iter().any(|&y| y.is_nan() || y <= 0.0) {
        return Err(Error::invalid("log-linear fit needs positive values"));
    }
    let n = xs.len() as f64;
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ls.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy == 0.0 {
            1.0
        } else {
            sxy * sxy / (sxx * syy)
        },
    })
}

fn last_loss(path: &Path) -> Result<Option<f64>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .last()
        .and_then(|l| l.split(',').nth(1))
        .and_then(|v| v.parse().ok()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"))
}

/// Summarizes whatever artifacts exist under the output directory into `report.md`.
pub fn report(config: &ExperimentConfig) -> Result<(String, Vec<PathBuf>)> {
    let priors = config.training.priors();
    let mut out = String::from("# Run summary\n\n## Training\n\n| SNR (dB) | stage | K | final loss |\n|---|---|---|---|\n");
    for &snr in &config.snr_db {
        let dir = config.snr_dir(snr);
        let c = last_loss(&dir.join("controller_loss.csv"))?;
        writeln!(
            out,
            "| {snr} | controller | {} | {} |",
            config.training.sensors,
            fmt_opt(c)
        )
        .unwrap();
        for &k in &config.k_list {
            let d = last_loss(&dir.join(format!("detector_k{k}_loss.csv")))?;
            writeln!(out, "| {snr} | detector | {k} | {} |", fmt_opt(d)).unwrap();
        }
    }

    out.push_str("\n## Threshold baseline\n\n| SNR (dB) | tau* | gamma0 | gamma1 | Chernoff | log-linear slope (K=2..40) | R^2 |\n|---|---|---|---|---|---|---|\n");
    for &snr in &config.snr_db {
        let b = find_baseline(&config.model(snr)?);
        let ks: Vec<f64> = (2..=40).map(f64::from).collect();
        let errs: Vec<f64> = (2..=40)
            .map(|k| mapdep_binary(priors, b.gammas, k))
            .collect();
        let fit = log_linear_fit(&ks, &errs)?;
        writeln!(
            out,
            "| {snr} | {:.3e} | {:.6} | {:.6} | {:.6} | {:.5} | {:.5} |",
            b.tau_star, b.gammas.gamma0, b.gammas.gamma1, b.chernoff, fit.slope, fit.r_squared
        )
        .unwrap();
    }

    let sweep_path = config.out_dir.join("sweep.csv");
    if sweep_path.exists() {
        let csv_err = |source| Error::Csv {
            path: sweep_path.clone(),
            source,
        };
        let rows: Vec<SweepRow> = csv::Reader::from_path(&sweep_path)
            .map_err(csv_err)?
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)?;
        out.push_str("\n## Sweep\n\n| SNR (dB) | K | detector | controller | error | 95% half-width |\n|---|---|---|---|---|---|\n");
        for r in rows {
            writeln!(
                out,
                "| {} | {} | {} | {} | {:.4e} | {:.1e} |",
                r.snr_db, r.k, r.detector, r.controller, r.error_rate, r.ci
            )
            .unwrap();
        }
    }
    super::ensure_dir(&config.out_dir)?;
    let path = config.out_dir.join("report.md");
    fs::write(&path, &out).map_err(|e| Error::io(&path, e))?;
    Ok((out, vec![path]))
}
