//! Window operators `S` with verified flags and a structure tag.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::operator::{FastForm, LowRankForm, Operator};
use crate::phase_space::{GridModel, PhasePoint, Signal};
use crate::qha::{fourier_wigner_inverse, PhaseFunction};
use crate::quad;

/// How a window was built; drives fast paths and the certified essential-value bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    RankOne,
    FiniteRank,
    Wigner,
    TauWigner,
    BornJordan,
    Shift,
    IdentityPlus,
    DiagonalSeries,
    Multiplication,
    Custom,
}

impl Structure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Structure::RankOne => "rank-one",
            Structure::FiniteRank => "finite-rank",
            Structure::Wigner => "wigner",
            Structure::TauWigner => "tau-wigner",
            Structure::BornJordan => "born-jordan",
            Structure::Shift => "shift",
            Structure::IdentityPlus => "identity-plus",
            Structure::DiagonalSeries => "diagonal-series",
            Structure::Multiplication => "multiplication",
            Structure::Custom => "custom",
        }
    }

    /// Structures that are compact in the continuum, so their essential value is zero.
    pub fn is_compact(&self) -> bool {
        matches!(self, Structure::RankOne | Structure::FiniteRank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFlags {
    pub hermitian: bool,
    pub positive: bool,
    pub compact: bool,
}

/// Relative tolerance for flag verification.
pub const FLAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorWindow {
    operator: Operator,
    structure: Structure,
    flags: WindowFlags,
    norm: f64,
}

impl Deref for OperatorWindow {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.operator
    }
}

impl OperatorWindow {
    /// Wraps an operator, computing its norm and verifying the hermitian and positive flags.
    pub fn new(operator: Operator, structure: Structure) -> Self {
        let (norm, hermitian, min_eig) = inspect(&operator);
        let tol = FLAG_TOLERANCE * norm;
        let flags = WindowFlags {
            hermitian,
            positive: hermitian && min_eig.is_some_and(|v| v >= -tol),
            compact: structure.is_compact(),
        };
        OperatorWindow {
            operator,
            structure,
            flags,
            norm,
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn flags(&self) -> WindowFlags {
        self.flags
    }

    /// `‖S‖_B`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }
}

/// Norm, hermitian flag and smallest eigenvalue (when hermitian).
fn inspect(op: &Operator) -> (f64, bool, Option<f64>) {
    let m = op.matrix();
    let frob = linalg::frobenius(m);
    if frob == 0.0 {
        return (0.0, true, Some(0.0));
    }
    if let Some(FastForm::LowRank(form)) = op.fast_form() {
        let norm = op.operator_norm();
        let skew = linalg::frobenius(&(m - m.adjoint()));
        let hermitian = skew <= FLAG_TOLERANCE * norm;
        let min = if hermitian {
            Some(low_rank_min_eigenvalue(op.grid(), form))
        } else {
            None
        };
        return (norm, hermitian, min);
    }
    if let Some(FastForm::Parity(c)) = op.fast_form() {
        // P has both eigenvalues ±1 for even n ≥ 4.
        let hermitian = c.im.abs() <= FLAG_TOLERANCE * c.norm();
        return (c.norm(), hermitian, hermitian.then(|| -c.re.abs()));
    }
    if let Some(FastForm::TfShift(_, c)) = op.fast_form() {
        let skew = linalg::frobenius(&(m - m.adjoint()));
        let hermitian = skew <= FLAG_TOLERANCE * c.norm();
        let min = if hermitian {
            Some(
                linalg::hermitian_eigen(m)
                    .values
                    .last()
                    .copied()
                    .unwrap_or(0.0),
            )
        } else {
            None
        };
        return (c.norm(), hermitian, min);
    }
    let skew = linalg::frobenius(&(m - m.adjoint()));
    if skew <= 1e-12 * frob {
        let eig = linalg::hermitian_eigen(m);
        let top = eig.values[0];
        let bottom = *eig.values.last().unwrap();
        let norm = top.abs().max(bottom.abs());
        (norm, skew <= FLAG_TOLERANCE * norm, Some(bottom))
    } else {
        let norm = linalg::singular_values(m)[0];
        let hermitian = skew <= FLAG_TOLERANCE * norm;
        let min = if hermitian {
            Some(*linalg::hermitian_eigen(m).values.last().unwrap())
        } else {
            None
        };
        (norm, hermitian, min)
    }
}

/// Smallest eigenvalue of a hermitian `cI + Σ u⊗v`: the span of the factors is invariant
/// and the complement is the `c`-eigenspace.
fn low_rank_min_eigenvalue(grid: &GridModel, form: &LowRankForm) -> f64 {
    let n = grid.n();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for (u, v) in &form.terms {
        for w in [u, v] {
            let mut x = w.data().to_vec();
            for _ in 0..2 {
                for b in &basis {
                    let c: Complex64 = b.iter().zip(&x).map(|(bi, xi)| bi.conj() * xi).sum();
                    x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
                }
            }
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let scale = w.data().iter().map(|z| z.norm()).fold(0.0, f64::max) * (n as f64).sqrt();
            if norm > 1e-12 * scale {
                basis.push(x.iter().map(|z| z / norm).collect());
            }
        }
    }
    let delta = grid.delta();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let mut out: Vec<Complex64> = x.iter().map(|xi| xi * form.shift).collect();
        for (u, v) in &form.terms {
            let c: Complex64 = x
                .iter()
                .zip(v.data())
                .map(|(xi, vi)| xi * vi.conj())
                .sum::<Complex64>()
                * delta;
            out.iter_mut()
                .zip(u.data())
                .for_each(|(o, ui)| *o += c * ui);
        }
        out
    };
    let r = basis.len();
    let images: Vec<Vec<Complex64>> = basis.iter().map(|b| apply(b)).collect();
    let gram = CMatrix::from_fn(r, r, |i, j| {
        basis[i]
            .iter()
            .zip(&images[j])
            .map(|(a, b)| a.conj() * b)
            .sum()
    });
    let mut min = if r > 0 {
        *linalg::hermitian_eigen(&gram).values.last().unwrap()
    } else {
        f64::INFINITY
    };
    if r < n {
        min = min.min(form.shift.re);
    }
    min
}

fn require_continuum(grid: &GridModel) -> Result<()> {
    if grid.is_continuum() {
        Ok(())
    } else {
        Err(LabError::ContinuumRequired)
    }
}

/// `g ⊗ h`.
pub fn rank_one(g: &Signal, h: &Signal) -> Result<OperatorWindow> {
    Ok(OperatorWindow::new(
        Operator::rank_one(g, h)?,
        Structure::RankOne,
    ))
}

/// `Σ wᵢ gᵢ ⊗ gᵢ`.
pub fn finite_rank(terms: &[(f64, Signal)]) -> Result<OperatorWindow> {
    let grid = *terms
        .first()
        .ok_or_else(|| LabError::invalid("terms", "need at least one term"))?
        .1
        .grid();
    let mut list = Vec::with_capacity(terms.len());
    for (w, g) in terms {
        grid.ensure_same(g.grid())?;
        list.push((g.scaled(Complex64::new(*w, 0.0)), g.clone()));
    }
    Ok(OperatorWindow::new(
        Operator::low_rank(
            grid,
            LowRankForm {
                shift: ZERO,
                terms: list,
            },
        ),
        Structure::FiniteRank,
    ))
}

/// Wigner window `2P`.
pub fn wigner(grid: GridModel) -> OperatorWindow {
    OperatorWindow::new(
        Operator::parity(grid).scaled(Complex64::new(2.0, 0.0)),
        Structure::Wigner,
    )
}

/// Fourier–Wigner data of `Š` for a Cohen kernel whose symplectic Fourier transform is `kernel(xξ)`.
///
/// The discrete parity lives on the even sublattice with weight 4, so the sampled kernel
/// is placed there; `kernel ≡ 1` reproduces `2P` exactly.
fn kernel_window(grid: GridModel, kernel: impl Fn(f64) -> Complex64) -> Operator {
    let n = grid.n();
    let data = PhaseFunction::from_fn(grid, |z| {
        if z.m % 2 == 0 && z.k % 2 == 0 {
            let product = (grid.centered(z.m) * grid.centered(z.k)) as f64 / n as f64;
            kernel(product) * 4.0
        } else {
            ZERO
        }
    });
    fourier_wigner_inverse(&data).parity_reflect()
}

/// τ-Wigner window, built from the Cohen kernel `e^{2πi(τ-1/2)xξ}` in the Fourier–Wigner domain.
pub fn tau_wigner(grid: GridModel, tau: f64) -> Result<OperatorWindow> {
    require_continuum(&grid)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(LabError::invalid("tau", "must lie in [0, 1]"));
    }
    let op = kernel_window(grid, |xxi| {
        Complex64::from_polar(1.0, 2.0 * PI * (tau - 0.5) * xxi)
    });
    Ok(OperatorWindow::new(op, Structure::TauWigner))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BornJordanMethod {
    /// Fourier–Wigner data `sinc(π xξ)`.
    SincSymbol,
    /// Midpoint average of τ-Wigner windows over `τ ∈ [0, 1]`.
    TauAverage,
}

/// Number of midpoint nodes in the τ-average route.
pub const TAU_AVERAGE_NODES: usize = 201;

pub fn born_jordan(grid: GridModel, method: BornJordanMethod) -> Result<OperatorWindow> {
    require_continuum(&grid)?;
    let op = match method {
        BornJordanMethod::SincSymbol => kernel_window(grid, |xxi| {
            let t = PI * xxi;
            Complex64::new(if t.abs() < 1e-12 { 1.0 } else { t.sin() / t }, 0.0)
        }),
        BornJordanMethod::TauAverage => {
            let nodes = TAU_AVERAGE_NODES;
            let mut acc = CMatrix::zeros(grid.n(), grid.n());
            for i in 0..nodes {
                let tau = (i as f64 + 0.5) / nodes as f64;
                acc += tau_wigner(grid, tau)?.operator().matrix();
            }
            Operator::from_matrix(grid, acc / Complex64::new(nodes as f64, 0.0))?
        }
    };
    Ok(OperatorWindow::new(op, Structure::BornJordan))
}

/// Squeeze multiplier of the Born–Jordan window, `∫ e^{-isλ} / (2cosh(s/2)) ds`, by quadrature.
///
/// The integrand is even in `s` and below `e^{-40}` beyond `|s| = 80`.
pub fn born_jordan_multiplier(lambda: f64) -> Result<f64> {
    let breaks: Vec<f64> = (0..=80).map(|i| i as f64).collect();
    let half = quad::integrate_panels(
        |s| (s * lambda).cos() / (2.0 * (s / 2.0).cosh()),
        &breaks,
        1e-13,
    )?;
    Ok(2.0 * half)
}

/// `π / cosh(πλ)`.
pub fn born_jordan_multiplier_closed(lambda: f64) -> f64 {
    PI / (PI * lambda).cosh()
}

/// `π(z₀)`.
pub fn shift(grid: GridModel, z0: PhasePoint) -> OperatorWindow {
    OperatorWindow::new(Operator::tf_shift(grid, z0), Structure::Shift)
}

/// `c·Id + K`.
pub fn identity_plus(c: Complex64, k: &Operator) -> Result<OperatorWindow> {
    let id = Operator::identity(*k.grid()).scaled(c);
    Ok(OperatorWindow::new(id.add(k)?, Structure::IdentityPlus))
}

/// `Σ wᵢ φ_{nᵢ} ⊗ φ_{nᵢ}` over Hermite functions.
pub fn diagonal_series(
    grid: GridModel,
    indices: &[usize],
    weights: &[f64],
) -> Result<OperatorWindow> {
    if indices.len() != weights.len() || indices.is_empty() {
        return Err(LabError::invalid(
            "weights",
            "need one weight per Hermite index",
        ));
    }
    let terms: Vec<(Signal, Signal)> = indices
        .iter()
        .zip(weights)
        .map(|(&j, &w)| Signal::hermite(grid, j).map(|h| (h.scaled(Complex64::new(w, 0.0)), h)))
        .collect::<Result<_>>()?;
    Ok(OperatorWindow::new(
        Operator::low_rank(grid, LowRankForm { shift: ZERO, terms }),
        Structure::DiagonalSeries,
    ))
}

/// Multiplier profiles available from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierProfile {
    /// `1 - e^{-|x|}`.
    OneMinusExpAbs,
}

impl MultiplierProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MultiplierProfile::OneMinusExpAbs => 1.0 - (-x.abs()).exp(),
        }
    }
}

/// Multiplication operator `f ↦ φ·f` sampled at the signal coordinates.
pub fn multiplication(grid: GridModel, phi: impl Fn(f64) -> f64) -> OperatorWindow {
    let n = grid.n();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = Complex64::new(phi(grid.sample_coordinate(j)), 0.0);
    }
    OperatorWindow::new(
        Operator::from_matrix(grid, m).expect("square"),
        Structure::Multiplication,
    )
}

pub fn custom(grid: GridModel, matrix: CMatrix) -> Result<OperatorWindow> {
    Ok(OperatorWindow::new(
        Operator::from_matrix(grid, matrix)?,
        Structure::Custom,
    ))
}

/// `Id - φ₀ ⊗ φ₀`.
pub fn identity_minus_gaussian(grid: GridModel) -> Result<OperatorWindow> {
    let g = Signal::standard_gaussian(grid)?;
    identity_plus(ONE, &Operator::rank_one(&g.scaled(-ONE), &g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qha::cohen_transform;

    #[test]
    fn wigner_is_hermitian_not_positive_with_norm_two() {
        let w = wigner(GridModel::exact(16).unwrap());
        assert!(w.flags().hermitian);
        assert!(!w.flags().positive);
        assert!((w.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_window_is_positive_rank_one() {
        let g = GridModel::continuum(64).unwrap();
        let phi = Signal::standard_gaussian(g).unwrap();
        let w = rank_one(&phi, &phi).unwrap();
        assert!(w.flags().positive && w.flags().compact);
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuum_only_windows_reject_exact_mode() {
        let g = GridModel::exact(16).unwrap();
        assert!(matches!(
            tau_wigner(g, 0.3),
            Err(LabError::ContinuumRequired)
        ));
        let err = born_jordan(g, BornJordanMethod::SincSymbol).unwrap_err();
        assert_eq!(err.to_string(), "continuum emulation required");
    }

    #[test]
    fn tau_half_reproduces_wigner() {
        let g = GridModel::continuum(64).unwrap();
        let tw = tau_wigner(g, 0.5).unwrap();
        assert!(tw.max_abs_diff(&wigner(g)) < 1e-12);
    }

    #[test]
    fn identity_minus_gaussian_cohen_transform() {
        let g = GridModel::continuum(64).unwrap();
        let w = identity_minus_gaussian(g).unwrap();
        assert!(w.flags().positive);
        let f = Signal::random(g, 2).unwrap();
        let q = cohen_transform(&w, &f).unwrap();
        let phi = Signal::standard_gaussian(g).unwrap();
        let v = crate::qha::stft(&f, &phi).unwrap();
        let expect = PhaseFunction::from_fn(g, |z| Complex64::new(1.0 - v.get(z).norm_sqr(), 0.0));
        assert!(q.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn shift_window_flags() {
        let g = GridModel::exact(8).unwrap();
        let s = shift(g, PhasePoint::new(1, 0));
        assert!(!s.flags().hermitian);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}
