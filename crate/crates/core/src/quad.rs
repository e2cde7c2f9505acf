//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

// Nodes and weights are tabulated to more digits than f64 holds.
#![allow(clippy::excessive_precision)]

use crate::error::{LabError, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 20_000;

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// `∫_a^b f` to within `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut intervals = vec![(a, b, kronrod(&f, a, b))];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let error: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if error <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(LabError::Numerical(format!(
                "quadrature did not converge (error {error:e})"
            )));
        }
        let worst = (0..intervals.len())
            .max_by(|&i, &j| intervals[i].2 .1.total_cmp(&intervals[j].2 .1))
            .expect("non-empty");
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, kronrod(&f, lo, mid)));
        intervals.push((mid, hi, kronrod(&f, mid, hi)));
    }
}

/// Composite integral over consecutive panels `breaks[i]..breaks[i+1]`.
pub fn integrate_panels(f: impl Fn(f64) -> f64, breaks: &[f64], abs_tol: f64) -> Result<f64> {
    let panels = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], abs_tol / panels, 0.0))
        .sum()
}
