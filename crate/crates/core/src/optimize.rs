//! Golden-section search for unimodal functions on a closed interval.

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Minimizer and minimum of `f` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Shrinks the bracket until it is narrower than `tol`, then compares the
/// interior estimate against both endpoints, since a minimum of a convex
/// function may sit on the boundary.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = Minimum {
        x: mid,
        value: f(mid),
    };
    for x in [lo, hi] {
        let value = f(x);
        if value < best.value {
            best = Minimum { x, value };
        }
    }
    best
}
