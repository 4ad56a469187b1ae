use bqdetect_web::curves::{chernoff_vs_threshold, error_vs_sensors, simulate, MAX_POINTS};

/// `P(Z > 1)` for a standard normal.
const Q1: f64 = 0.158_655_253_931_457_05;

#[test]
fn single_sensor_error_is_the_gaussian_tail() {
    let v = error_vs_sensors(0.0, 1, 0.5).unwrap();
    assert_eq!(v.len(), 2);
    assert!((v[0] - Q1).abs() < 1e-9);
}

#[test]
fn error_curve_falls_and_tracks_its_exponent() {
    let v = error_vs_sensors(0.0, 40, 0.5).unwrap();
    let errs: Vec<f64> = v.iter().step_by(2).copied().collect();
    let ests: Vec<f64> = v.iter().skip(1).step_by(2).copied().collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    for (e, c) in errs.iter().zip(&ests) {
        // the Chernoff bound holds for equal priors with a factor 1/2
        assert!(*e <= 0.5 * c * (1.0 + 1e-9));
    }
}

#[test]
fn chernoff_grid_peaks_at_zero() {
    let v = chernoff_vs_threshold(0.0, -1.0, 1.0, 201).unwrap();
    assert_eq!(v.len(), 402);
    let (mut best_tau, mut best) = (f64::NAN, f64::NEG_INFINITY);
    for p in v.chunks(2) {
        if p[1] > best {
            (best_tau, best) = (p[0], p[1]);
        }
    }
    assert!(best_tau.abs() < 1e-9);
    assert!(chernoff_vs_threshold(0.0, 1.0, -1.0, 10).is_err());
}

#[test]
fn simulation_matches_closed_form() {
    let v = simulate(0.0, 5, 0.0, 200_000, 7).unwrap();
    assert!((v[0] - v[2]).abs() <= 3.0 * v[1], "{v:?}");
    assert_eq!(v, simulate(0.0, 5, 0.0, 200_000, 7).unwrap());
}

#[test]
fn request_limits() {
    assert!(error_vs_sensors(0.0, 0, 0.5).is_err());
    assert!(error_vs_sensors(0.0, MAX_POINTS + 1, 0.5).is_err());
    assert!(error_vs_sensors(0.0, 3, 1.5).is_err());
    assert!(simulate(0.0, 3, 0.0, 0, 1).is_err());
}
