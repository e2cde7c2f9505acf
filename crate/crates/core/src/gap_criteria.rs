//! Closed-form strict-gap criteria for the Wigner window on balls.
//!
//! With `x = 2πpR²`, `A_d(x) = dγ(d,x)/x^d` and `F_d(x) = γ(d,x)/Γ(d)`, the Gaussian mass is
//! `‖Wφ₀‖^p_{L^p(B_R)} = 2^{dp}|B_R| A_d(x) = 2^{dp}(2p)^{-d} F_d(x)`, and the threshold
//! `m_d = inf_x max{A_d, F_d}` is reached where the two curves cross, at `x = (d!)^{1/d}`.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::quad;

const SERIES_MAX_TERMS: usize = 1000;
const CF_MAX_ITER: usize = 1000;
const EPS: f64 = 1e-16;

/// `C_p^p = Γ((p+1)/2) / (√π Γ((p+2)/2))`.
pub fn cp_power(p: f64) -> f64 {
    (ln_gamma((p + 1.0) / 2.0) - ln_gamma((p + 2.0) / 2.0)).exp() / PI.sqrt()
}

/// `C_p = (C_p^p)^{1/p}`.
pub fn c_p(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(cp_power(p).powf(1.0 / p))
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(LabError::invalid(
            "p",
            "exponent must be finite and at least 1",
        ));
    }
    Ok(())
}

/// `C_p^p = (1/2π) ∫_0^{2π} |cos θ|^p dθ` by quadrature on a quarter period.
pub fn cp_power_quadrature(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(2.0 / PI * quad::integrate(|t: f64| t.cos().powf(p), 0.0, PI / 2.0, 1e-15, 1e-14)?)
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) {
        return Err(LabError::invalid("d", "gamma shape must be positive"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(LabError::invalid(
            "x",
            "incomplete gamma argument must be finite and non-negative",
        ));
    }
    Ok(())
}

/// `Σ_k x^k / (a(a+1)…(a+k))`, so that `γ(a,x) = x^a e^{-x} · series`.
fn gamma_series(a: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    for k in 1..SERIES_MAX_TERMS {
        term *= x / (a + k as f64);
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(LabError::Numerical(format!(
        "incomplete gamma series failed for a={a}, x={x}"
    )))
}

/// Modified Lentz continued fraction with `Γ(a,x) = x^a e^{-x} · cf`.
fn gamma_continued_fraction(a: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(LabError::Numerical(format!(
        "incomplete gamma continued fraction failed for a={a}, x={x}"
    )))
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a,x)/Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        Ok((log_prefactor + gamma_series(a, x)?.ln()).exp())
    } else {
        Ok(1.0 - (log_prefactor + gamma_continued_fraction(a, x)?.ln()).exp())
    }
}

/// Lower incomplete gamma `γ(a, x)`.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(regularized_lower_gamma(a, x)? * ln_gamma(a).exp())
}

/// `A_d(x) = d γ(d,x) / x^d`, evaluated without cancellation for small `x`.
pub fn a_d(d: u32, x: f64) -> Result<f64> {
    let a = d as f64;
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(a * (-x).exp() * gamma_series(a, x)?)
    } else {
        Ok((a.ln() + ln_gamma(a) + regularized_lower_gamma(a, x)?.ln() - a * x.ln()).exp())
    }
}

/// `F_d(x) = γ(d,x)/Γ(d)`.
pub fn f_d(d: u32, x: f64) -> Result<f64> {
    regularized_lower_gamma(d as f64, x)
}

/// Crossing point `x* = (d!)^{1/d}`.
pub fn crossing_point(d: u32) -> f64 {
    (ln_gamma(d as f64 + 1.0) / d as f64).exp()
}

/// `m_d = F_d((d!)^{1/d})`.
pub fn m_d(d: u32) -> Result<f64> {
    if d == 0 {
        return Err(LabError::invalid("d", "dimension must be at least 1"));
    }
    f_d(d, crossing_point(d))
}

/// `m_d` by golden-section minimization of `max{A_d, F_d}` in `log x`.
pub fn m_d_golden(d: u32) -> Result<f64> {
    if d == 0 {
        return Err(LabError::invalid("d", "dimension must be at least 1"));
    }
    let objective = |t: f64| -> Result<f64> {
        let x = t.exp();
        Ok(a_d(d, x)?.max(f_d(d, x)?))
    };
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((1e-3_f64).ln(), (50.0 * d as f64).ln());
    let mut t1 = hi - ratio * (hi - lo);
    let mut t2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (objective(t1)?, objective(t2)?);
    while hi - lo > 1e-13 {
        if f1 < f2 {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - ratio * (hi - lo);
            f1 = objective(t1)?;
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + ratio * (hi - lo);
            f2 = objective(t2)?;
        }
    }
    objective(0.5 * (lo + hi))
}

/// `L_{p,d} = ‖Wφ₀‖_{L^p} = 2^d (2p)^{-d/p}`.
pub fn l_pd(p: f64, d: u32) -> f64 {
    let d = d as f64;
    2.0_f64.powf(d) * (2.0 * p).powf(-d / p)
}

/// Volume of the ball of radius `r` in `ℝ^{2d}`.
pub fn ball_volume(d: u32, r: f64) -> f64 {
    let d = d as f64;
    (d * PI.ln() + 2.0 * d * r.ln() - ln_gamma(d + 1.0)).exp()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapConstants {
    pub p: f64,
    pub d: u32,
    pub c_p: f64,
    pub c_p_pow_p: f64,
    pub m_d: f64,
    pub l_pd: f64,
}

impl GapConstants {
    pub fn new(p: f64, d: u32) -> Result<Self> {
        Ok(GapConstants {
            p,
            d,
            c_p: c_p(p)?,
            c_p_pow_p: cp_power(p),
            m_d: m_d(d)?,
            l_pd: l_pd(p, d),
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaProfiles {
    pub gamma_lower: f64,
    pub a_d: f64,
    pub f_d: f64,
    pub m_d: f64,
}

pub fn gap_constants(d: u32, x: f64) -> Result<GammaProfiles> {
    Ok(GammaProfiles {
        gamma_lower: lower_incomplete_gamma(d as f64, x)?,
        a_d: a_d(d, x)?,
        f_d: f_d(d, x)?,
        m_d: m_d(d)?,
    })
}

/// Both closed forms of `‖Wφ₀‖^p_{L^p(B_R)}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianMass {
    pub via_a: f64,
    pub via_f: f64,
}

pub fn gaussian_mass(d: u32, p: f64, r: f64) -> Result<GaussianMass> {
    let x = 2.0 * PI * p * r * r;
    let scale = 2.0_f64.powf(d as f64 * p);
    Ok(GaussianMass {
        via_a: scale * ball_volume(d, r) * a_d(d, x)?,
        via_f: scale * (2.0 * p).powf(-(d as f64)) * f_d(d, x)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `C_p^p < m_d`, valid for every radius.
    Cpmd,
    /// `max{A_d(x), F_d(x)} > C_p^p`.
    GaussianMass,
    /// `Ω` inside a ball where `|Wφ₀| > 2^d C_p`.
    SmallSet,
}

impl Criterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Cpmd => "cpmd",
            Criterion::GaussianMass => "gaussian-mass",
            Criterion::SmallSet => "small-set",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WignerBallVerdict {
    pub d: u32,
    pub p: f64,
    pub r: f64,
    pub x: f64,
    pub a_d: f64,
    pub f_d: f64,
    pub cp_p: f64,
    pub m_d: f64,
    pub criterion: Option<Criterion>,
}

impl WignerBallVerdict {
    pub fn certified(&self) -> bool {
        self.criterion.is_some()
    }

    pub fn verdict(&self) -> &'static str {
        if self.certified() {
            "certified-gap"
        } else {
            "uncertified"
        }
    }
}

/// Radius below which the small-set criterion certifies: `e^{-2πr²} > C_p`.
pub fn small_set_radius(p: f64) -> f64 {
    let cp = cp_power(p).powf(1.0 / p);
    ((1.0 / cp).ln() / (2.0 * PI)).sqrt()
}

/// Tries the cpmd, gaussian-mass and small-set criteria in that order.
pub fn wigner_ball_verdict(d: u32, p: f64, r: f64) -> Result<WignerBallVerdict> {
    if d == 0 {
        return Err(LabError::invalid("d", "dimension must be at least 1"));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(LabError::invalid(
            "p",
            "the Lieb bound needs a finite exponent p >= 2",
        ));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(LabError::invalid("R", "radius must be positive"));
    }
    let x = 2.0 * PI * p * r * r;
    let (a, f, cp, md) = (a_d(d, x)?, f_d(d, x)?, cp_power(p), m_d(d)?);
    let criterion = if cp < md {
        Some(Criterion::Cpmd)
    } else if a.max(f) > cp {
        Some(Criterion::GaussianMass)
    } else if r < small_set_radius(p) {
        Some(Criterion::SmallSet)
    } else {
        None
    };
    Ok(WignerBallVerdict {
        d,
        p,
        r,
        x,
        a_d: a,
        f_d: f,
        cp_p: cp,
        m_d: md,
        criterion,
    })
}

/// Smallest `p ≥ 2` with `C_p^p < m_d` (the infimum, found by bisection); 2 when already met.
pub fn p_threshold(d: u32) -> Result<f64> {
    let md = m_d(d)?;
    if cp_power(2.0) < md {
        return Ok(2.0);
    }
    let mut hi = 4.0;
    while cp_power(hi) >= md {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(LabError::Numerical("p threshold bracket failed".into()));
        }
    }
    let mut lo = 2.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if cp_power(mid) < md {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One row of the gap table: `d, p, R, x, A_d, F_d, C_p^p, verdict`.
#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub d: u32,
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub x: f64,
    #[serde(rename = "A_d")]
    pub a_d: f64,
    #[serde(rename = "F_d")]
    pub f_d: f64,
    #[serde(rename = "C_p^p")]
    pub cp_p: f64,
    pub verdict: String,
}

impl From<&WignerBallVerdict> for GapRow {
    fn from(v: &WignerBallVerdict) -> Self {
        GapRow {
            d: v.d,
            p: v.p,
            r: v.r,
            x: v.x,
            a_d: v.a_d,
            f_d: v.f_d,
            cp_p: v.cp_p,
            verdict: v.verdict().into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp_two_is_one_half() {
        assert!((cp_power(2.0) - 0.5).abs() < 1e-14, "{}", cp_power(2.0));
    }

    #[test]
    fn m_one_closed_form() {
        assert!((m_d(1).unwrap() - (1.0 - (-1.0_f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn crossing_is_where_curves_meet() {
        for d in 1..=6 {
            let x = crossing_point(d);
            assert!((a_d(d, x).unwrap() - f_d(d, x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(wigner_ball_verdict(1, 2.0, 0.0).is_err());
        assert!(wigner_ball_verdict(0, 2.0, 1.0).is_err());
        assert!(wigner_ball_verdict(1, 1.5, 1.0).is_err());
        assert!(c_p(0.5).is_err());
        assert!(regularized_lower_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn threshold_is_two_in_dimension_one() {
        assert_eq!(p_threshold(1).unwrap(), 2.0);
        let p2 = p_threshold(2).unwrap();
        assert!(p2 > 3.0 && p2 < 4.0);
        assert!(cp_power(p2) < m_d(2).unwrap());
        assert!(cp_power(p2 * (1.0 - 1e-9)) >= m_d(2).unwrap());
    }
}
