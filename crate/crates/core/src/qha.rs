//! Quantum harmonic analysis on `ℤ_n × ℤ_n`: Cohen transforms, Fourier–Wigner and
//! symplectic Fourier transforms, Weyl calculus and operator convolutions.
//!
//! Normalizations (all with the cell weight `1/n`):
//! * `F_W(S)(z) = e^{πi m_c k_c/n} tr(π(z)* S)`, unitary from Hilbert–Schmidt to `L²(dz)`.
//! * `F_σ F(z) = (1/n) Σ_u F(u) e^{-2πi[u,z]/n}`, a unitary involution.
//! * `a_S = F_σ F_W(S)` is the Weyl symbol and `weyl_quantize(1) = Id`.
//! * `T ⋆ S(z) = tr(T α_z(Š))` with `Š = PSP`, so `F_σ(T ⋆ S) = F_W(T)·F_W(S)`.
//!
//! The phase `e^{πi m_c k_c/n}` uses centered representatives; it is what makes the
//! convolution identity exact on the cyclic group.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::linalg::{self, CMatrix, DftPair, ZERO};
use crate::operator::{FastForm, Operator};
use crate::phase_space::{symplectic_form, GridModel, PhasePoint, Region, Signal};

/// Lebesgue exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(Exponent(p))
        } else {
            Err(LabError::invalid(
                "p",
                format!("exponent must lie in [1, ∞], got {p}"),
            ))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    /// `t^{1/p}`, equal to 1 for `p = ∞`.
    pub fn root(&self, t: f64) -> f64 {
        if self.is_infinite() {
            1.0
        } else {
            t.powf(1.0 / self.0)
        }
    }
}

/// Complex function on the phase grid, row-major in `(m, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFunction {
    grid: GridModel,
    values: Vec<Complex64>,
}

impl PhaseFunction {
    pub fn new(grid: GridModel, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() * grid.n() {
            return Err(LabError::DimensionMismatch(format!(
                "phase function has {} values, expected {}",
                values.len(),
                grid.n() * grid.n()
            )));
        }
        Ok(PhaseFunction { grid, values })
    }

    pub fn zeros(grid: GridModel) -> Self {
        PhaseFunction {
            grid,
            values: vec![ZERO; grid.n() * grid.n()],
        }
    }

    pub fn from_fn(grid: GridModel, f: impl Fn(PhasePoint) -> Complex64) -> Self {
        let n = grid.n();
        PhaseFunction {
            grid,
            values: (0..n * n)
                .map(|i| f(PhasePoint::new(i / n, i % n)))
                .collect(),
        }
    }

    pub fn indicator(region: &Region) -> Self {
        let values = region
            .mask()
            .iter()
            .map(|&b| if b { Complex64::new(1.0, 0.0) } else { ZERO })
            .collect();
        PhaseFunction {
            grid: *region.grid(),
            values,
        }
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, z: PhasePoint) -> Complex64 {
        let n = self.grid.n();
        self.values[(z.m % n) * n + z.k % n]
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        let n = self.grid.n();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> PhaseFunction {
        PhaseFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn reflected(&self) -> PhaseFunction {
        let n = self.grid.n();
        Self::from_fn(self.grid, |z| {
            self.get(PhasePoint::new((n - z.m) % n, (n - z.k) % n))
        })
    }

    /// `‖F‖_{L^p(Ω)}` with cell weight `1/n`.
    pub fn lp_norm(&self, region: &Region, p: Exponent) -> f64 {
        let w = self.grid.phase_weight();
        let it = self
            .values
            .iter()
            .zip(region.mask())
            .filter(|(_, &b)| b)
            .map(|(v, _)| v.norm());
        if p.is_infinite() {
            it.fold(0.0, f64::max)
        } else {
            (it.map(|a| a.powf(p.value())).sum::<f64>() * w).powf(1.0 / p.value())
        }
    }

    /// `‖F‖_{L²}` over the whole grid.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.phase_weight()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &PhaseFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn unit(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// `e^{2πi q/n}` for an integer numerator.
fn root_of_unity(q: usize, n: usize) -> Complex64 {
    unit(2.0 * PI * (q % n) as f64 / n as f64)
}

/// Discrete half-phase `e^{πi m_c k_c/n}` attached to the Fourier–Wigner transform.
pub fn half_phase(grid: &GridModel, z: PhasePoint) -> Complex64 {
    let n = grid.n() as i64;
    let q = (grid.centered(z.m) * grid.centered(z.k)).rem_euclid(2 * n);
    unit(PI * q as f64 / n as f64)
}

/// Short-time Fourier transform `V_g f(z) = ⟨f, π(z)g⟩`, rows in `rows` only.
fn stft_rows(f: &Signal, g: &Signal, rows: &[usize], dft: &DftPair) -> Vec<Vec<Complex64>> {
    let n = f.grid().n();
    let delta = f.grid().delta();
    rows.par_iter()
        .map(|&m| {
            let mut buf: Vec<Complex64> = (0..n)
                .map(|j| f.data()[j] * g.data()[(j + n - m) % n].conj() * delta)
                .collect();
            dft.forward(&mut buf);
            buf
        })
        .collect()
}

pub fn stft(f: &Signal, g: &Signal) -> Result<PhaseFunction> {
    f.grid().ensure_same(g.grid())?;
    let n = f.grid().n();
    let rows: Vec<usize> = (0..n).collect();
    let values = stft_rows(f, g, &rows, &DftPair::new(n)).concat();
    PhaseFunction::new(*f.grid(), values)
}

/// Ambiguity function `Af(z) = ⟨f, π(z)f⟩`.
pub fn ambiguity(f: &Signal) -> PhaseFunction {
    stft(f, f).expect("same grid")
}

/// `k ↦ tr(A α_{(m,k)}(B))` for one row `m`, with `A` given entrywise.
fn trace_row(
    n: usize,
    a: &(dyn Fn(usize, usize) -> Complex64 + Sync),
    b: &CMatrix,
    m: usize,
    dft: &DftPair,
) -> Vec<Complex64> {
    let mut r: Vec<Complex64> = (0..n)
        .map(|d| {
            (0..n)
                .map(|l| a(l, (l + d) % n) * b[((l + d + n - m) % n, (l + n - m) % n)])
                .sum()
        })
        .collect();
    dft.inverse(&mut r);
    r
}

/// Rows of the polarized Cohen transform `⟨α_z(S) f, g⟩`.
pub(crate) fn cohen_rows(
    s: &Operator,
    f: &Signal,
    g: &Signal,
    rows: &[usize],
    dft: &DftPair,
) -> Vec<Vec<Complex64>> {
    let grid = *s.grid();
    let n = grid.n();
    match s.fast_form() {
        Some(FastForm::LowRank(form)) => {
            let base = form.shift * f.inner(g);
            let mut out = vec![vec![base; n]; rows.len()];
            for (u, v) in &form.terms {
                let vf = stft_rows(f, v, rows, dft);
                let ug = stft_rows(g, u, rows, dft);
                for (o, (a, b)) in out.iter_mut().zip(vf.iter().zip(&ug)) {
                    for k in 0..n {
                        o[k] += a[k] * b[k].conj();
                    }
                }
            }
            out
        }
        Some(FastForm::TfShift(z0, scale)) => {
            let c = scale * f.tf_shift(*z0).inner(g);
            rows.iter()
                .map(|&m| {
                    (0..n)
                        .map(|k| {
                            c * root_of_unity(symplectic_form(&grid, *z0, PhasePoint::new(m, k)), n)
                        })
                        .collect()
                })
                .collect()
        }
        Some(FastForm::Parity(c)) => {
            // ⟨α_z(cP)f, g⟩ = cδ Σ_t e^{2πi·2kt/n} f[m-t] conj(g[m+t])
            let scale = c * grid.delta();
            rows.par_iter()
                .map(|&m| {
                    let mut buf: Vec<Complex64> = (0..n)
                        .map(|t| f.data()[(m + n - t) % n] * g.data()[(m + t) % n].conj())
                        .collect();
                    dft.inverse(&mut buf);
                    (0..n).map(|k| scale * buf[(2 * k) % n]).collect()
                })
                .collect()
        }
        None => {
            let delta = grid.delta();
            let (fd, gd) = (f.data(), g.data());
            let a = move |l: usize, l2: usize| fd[l] * gd[l2].conj() * delta;
            rows.par_iter()
                .map(|&m| trace_row(n, &a, s.matrix(), m, dft))
                .collect()
        }
    }
}

/// `Q_S f(z) = ⟨α_z(S) f, f⟩`.
pub fn cohen_transform(s: &Operator, f: &Signal) -> Result<PhaseFunction> {
    cohen_transform_pair(s, f, f)
}

/// `Q_S(f, g)(z) = ⟨α_z(S) f, g⟩`.
pub fn cohen_transform_pair(s: &Operator, f: &Signal, g: &Signal) -> Result<PhaseFunction> {
    s.grid().ensure_same(f.grid())?;
    s.grid().ensure_same(g.grid())?;
    let n = s.n();
    let rows: Vec<usize> = (0..n).collect();
    PhaseFunction::new(
        *s.grid(),
        cohen_rows(s, f, g, &rows, &DftPair::new(n)).concat(),
    )
}

/// `Q_S(f, g)` on the rows meeting `region`, zero elsewhere; enough for any `L^p(Ω)` norm.
pub fn cohen_transform_on(
    s: &Operator,
    f: &Signal,
    g: &Signal,
    region: &Region,
) -> Result<PhaseFunction> {
    s.grid().ensure_same(f.grid())?;
    s.grid().ensure_same(g.grid())?;
    s.grid().ensure_same(region.grid())?;
    let n = s.n();
    let rows = region.rows();
    let computed = cohen_rows(s, f, g, &rows, &DftPair::new(n));
    let mut values = vec![ZERO; n * n];
    for (&m, row) in rows.iter().zip(computed) {
        values[m * n..(m + 1) * n].copy_from_slice(&row);
    }
    PhaseFunction::new(*s.grid(), values)
}

/// `Σ_z c(z) α_z(S) f` where `c` is supported on the listed rows.
pub(crate) fn apply_field(
    s: &Operator,
    rows: &[usize],
    coeffs: &[Vec<Complex64>],
    f: &Signal,
    dft: &DftPair,
) -> Vec<Complex64> {
    let grid = *s.grid();
    let n = grid.n();
    let mut out = vec![ZERO; n];
    match s.fast_form() {
        Some(FastForm::LowRank(form)) => {
            let total: Complex64 = coeffs.iter().flatten().sum();
            for (o, x) in out.iter_mut().zip(f.data()) {
                *o += form.shift * total * x;
            }
            for (u, v) in &form.terms {
                let vf = stft_rows(f, v, rows, dft);
                let parts: Vec<Vec<Complex64>> = rows
                    .par_iter()
                    .zip(vf.par_iter().zip(coeffs.par_iter()))
                    .map(|(&m, (vrow, crow))| {
                        let mut buf: Vec<Complex64> =
                            vrow.iter().zip(crow).map(|(a, c)| a * c).collect();
                        dft.inverse(&mut buf);
                        (0..n).map(|j| buf[j] * u.data()[(j + n - m) % n]).collect()
                    })
                    .collect();
                for part in parts {
                    for (o, p) in out.iter_mut().zip(part) {
                        *o += p;
                    }
                }
            }
        }
        Some(FastForm::TfShift(z0, scale)) => {
            let mut total = ZERO;
            for (&m, crow) in rows.iter().zip(coeffs) {
                for (k, c) in crow.iter().enumerate() {
                    total +=
                        c * root_of_unity(symplectic_form(&grid, *z0, PhasePoint::new(m, k)), n);
                }
            }
            let shifted = f.tf_shift(*z0);
            for (o, x) in out.iter_mut().zip(shifted.data()) {
                *o += scale * total * x;
            }
        }
        Some(FastForm::Parity(c)) => {
            // (α_z(P)f)[j] = e^{2πi·2k(j-m)/n} f[2m-j]
            let parts: Vec<Vec<Complex64>> = rows
                .par_iter()
                .zip(coeffs.par_iter())
                .map(|(&m, crow)| {
                    let mut chat = crow.clone();
                    dft.inverse(&mut chat);
                    (0..n)
                        .map(|j| c * chat[(2 * (j + n - m)) % n] * f.data()[(2 * m + n - j) % n])
                        .collect()
                })
                .collect();
            for part in parts {
                for (o, p) in out.iter_mut().zip(part) {
                    *o += p;
                }
            }
        }
        None => {
            let sm = s.matrix();
            let parts: Vec<Vec<Complex64>> = rows
                .par_iter()
                .zip(coeffs.par_iter())
                .map(|(&m, crow)| {
                    let mut chat = crow.clone();
                    dft.inverse(&mut chat);
                    let mut part = vec![ZERO; n];
                    for a in 0..n {
                        let mut acc = ZERO;
                        for b in 0..n {
                            acc += sm[(a, b)] * f.data()[(b + m) % n] * chat[(a + n - b) % n];
                        }
                        part[(a + m) % n] = acc;
                    }
                    part
                })
                .collect();
            for part in parts {
                for (o, p) in out.iter_mut().zip(part) {
                    *o += p;
                }
            }
        }
    }
    out
}

/// `F_W(S)(z) = e^{πi m_c k_c/n} tr(π(z)* S)`.
pub fn fourier_wigner(s: &Operator) -> PhaseFunction {
    let grid = *s.grid();
    let n = grid.n();
    let dft = DftPair::new(n);
    let values: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut buf: Vec<Complex64> = (0..n).map(|l| s.matrix()[((l + m) % n, l)]).collect();
            dft.forward(&mut buf);
            (0..n)
                .map(|k| buf[k] * half_phase(&grid, PhasePoint::new(m, k)).conj())
                .collect()
        })
        .collect();
    PhaseFunction {
        grid,
        values: values.concat(),
    }
}

/// Inverse of [`fourier_wigner`]: `(1/n) Σ_w G(w) e^{-πi m_c k_c/n} π(w)`.
pub fn fourier_wigner_inverse(g: &PhaseFunction) -> Operator {
    let grid = *g.grid();
    let n = grid.n();
    let dft = DftPair::new(n);
    let diagonals: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut buf: Vec<Complex64> = (0..n)
                .map(|k| g.get(PhasePoint::new(m, k)) * half_phase(&grid, PhasePoint::new(m, k)))
                .collect();
            dft.inverse(&mut buf);
            buf.iter().map(|v| v / n as f64).collect()
        })
        .collect();
    let mut matrix = CMatrix::zeros(n, n);
    for (m, diag) in diagonals.iter().enumerate() {
        for l in 0..n {
            matrix[((l + m) % n, l)] = diag[l];
        }
    }
    Operator::from_matrix(grid, matrix).expect("square")
}

/// `F_σ F(z) = (1/n) Σ_u F(u) e^{-2πi[u,z]/n}`.
pub fn symplectic_fourier(f: &PhaseFunction) -> PhaseFunction {
    let grid = *f.grid();
    let n = grid.n();
    let dft = DftPair::new(n);
    let stage: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|mu| {
            let mut buf = f.row(mu).to_vec();
            dft.inverse(&mut buf);
            buf
        })
        .collect();
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|mz| {
            let mut buf: Vec<Complex64> = (0..n).map(|mu| stage[mu][mz]).collect();
            dft.forward(&mut buf);
            buf.iter().map(|v| v / n as f64).collect()
        })
        .collect();
    PhaseFunction {
        grid,
        values: columns.concat(),
    }
}

/// Weyl symbol `a_S = F_σ F_W(S)`.
pub fn weyl_symbol(s: &Operator) -> PhaseFunction {
    symplectic_fourier(&fourier_wigner(s))
}

/// Weyl quantization, the inverse of [`weyl_symbol`].
pub fn weyl_quantize(symbol: &PhaseFunction) -> Operator {
    fourier_wigner_inverse(&symplectic_fourier(symbol))
}

fn fft2(f: &PhaseFunction, inverse: bool) -> Vec<Complex64> {
    let n = f.grid().n();
    let dft = DftPair::new(n);
    let run = |buf: &mut Vec<Complex64>| {
        if inverse {
            dft.inverse(buf)
        } else {
            dft.forward(buf)
        }
    };
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut buf = f.row(m).to_vec();
            run(&mut buf);
            buf
        })
        .collect();
    let cols: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut buf: Vec<Complex64> = (0..n).map(|m| rows[m][k]).collect();
            run(&mut buf);
            buf
        })
        .collect();
    let mut out = vec![ZERO; n * n];
    for (k, col) in cols.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            out[m * n + k] = *v;
        }
    }
    out
}

/// `(F * G)(z) = (1/n) Σ_u F(u) G(z - u)`.
pub fn symbol_convolution(f: &PhaseFunction, g: &PhaseFunction) -> Result<PhaseFunction> {
    f.grid().ensure_same(g.grid())?;
    let n = f.grid().n();
    let (a, b) = (fft2(f, false), fft2(g, false));
    let prod = PhaseFunction {
        grid: *f.grid(),
        values: a.iter().zip(&b).map(|(x, y)| x * y).collect(),
    };
    let scale = 1.0 / (n as f64).powi(3);
    Ok(PhaseFunction {
        grid: *f.grid(),
        values: fft2(&prod, true).iter().map(|v| v * scale).collect(),
    })
}

/// `T ⋆ S(z) = tr(T α_z(Š))`.
pub fn op_convolution(t: &Operator, s: &Operator) -> Result<PhaseFunction> {
    t.grid().ensure_same(s.grid())?;
    let n = t.n();
    let dft = DftPair::new(n);
    let reflected = s.parity_reflect();
    let tm = t.matrix();
    let a = |l: usize, l2: usize| tm[(l, l2)];
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|m| trace_row(n, &a, reflected.matrix(), m, &dft))
        .collect();
    PhaseFunction::new(*t.grid(), rows.concat())
}

/// [`op_convolution`] on the rows meeting `region`, zero elsewhere.
pub fn op_convolution_on(t: &Operator, s: &Operator, region: &Region) -> Result<PhaseFunction> {
    t.grid().ensure_same(s.grid())?;
    t.grid().ensure_same(region.grid())?;
    let n = t.n();
    let dft = DftPair::new(n);
    let reflected = s.parity_reflect();
    let tm = t.matrix();
    let a = |l: usize, l2: usize| tm[(l, l2)];
    let rows = region.rows();
    let computed: Vec<Vec<Complex64>> = rows
        .par_iter()
        .map(|&m| trace_row(n, &a, reflected.matrix(), m, &dft))
        .collect();
    let mut values = vec![ZERO; n * n];
    for (&m, row) in rows.iter().zip(computed) {
        values[m * n..(m + 1) * n].copy_from_slice(&row);
    }
    PhaseFunction::new(*t.grid(), values)
}

/// `F ⋆ S = Σ_z (1/n) F(z) α_z(S)`.
pub fn fn_op_convolution(f: &PhaseFunction, s: &Operator) -> Result<Operator> {
    f.grid().ensure_same(s.grid())?;
    let grid = *s.grid();
    let n = grid.n();
    let w = grid.phase_weight();
    let dft = DftPair::new(n);
    let active: Vec<usize> = (0..n)
        .filter(|&m| f.row(m).iter().any(|v| *v != ZERO))
        .collect();
    let hats: Vec<Vec<Complex64>> = active
        .par_iter()
        .map(|&m| {
            let mut buf: Vec<Complex64> = f.row(m).iter().map(|v| v * w).collect();
            dft.inverse(&mut buf);
            buf
        })
        .collect();
    let sm = s.matrix();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|l| {
                    let d = (j + n - l) % n;
                    active
                        .iter()
                        .zip(&hats)
                        .map(|(&m, hat)| sm[((j + n - m) % n, (l + n - m) % n)] * hat[d])
                        .sum()
                })
                .collect()
        })
        .collect();
    Operator::from_matrix(grid, CMatrix::from_fn(n, n, |j, l| rows[j][l]))
}

/// Localization operator `H_{Ω,S} = χ_Ω ⋆ S`.
pub fn localization_operator(region: &Region, s: &Operator) -> Result<Operator> {
    fn_op_convolution(&PhaseFunction::indicator(region), s)
}

pub fn numerical_radius(s: &Operator) -> f64 {
    linalg::numerical_radius(s.matrix()).value
}

pub fn schatten_norm(s: &Operator, q: f64) -> Result<f64> {
    linalg::schatten_norm(s.matrix(), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_operator(grid: GridModel, seed: u64) -> Operator {
        let a = Signal::random(grid, seed).unwrap();
        let b = Signal::random(grid, seed + 100).unwrap();
        let c = Signal::random(grid, seed + 200).unwrap();
        let m = Operator::rank_one(&a, &b).unwrap().matrix()
            + Operator::rank_one(&c, &a).unwrap().matrix();
        Operator::from_matrix(
            grid,
            m + CMatrix::from_fn(grid.n(), grid.n(), |i, j| {
                Complex64::new(
                    ((i * 7 + j * 3) % 5) as f64 * 0.1,
                    ((i + 2 * j) % 3) as f64 * 0.05,
                )
            }),
        )
        .unwrap()
    }

    /// Direct `O(n⁴)` evaluation of `⟨π(z)Sπ(z)* f, f⟩`.
    fn cohen_bruteforce(s: &Operator, f: &Signal) -> PhaseFunction {
        let grid = *s.grid();
        PhaseFunction::from_fn(grid, |z| {
            let dense = Operator::from_matrix(grid, s.matrix().clone()).unwrap();
            dense
                .apply(&f.tf_shift_adjoint(z))
                .unwrap()
                .inner(&f.tf_shift_adjoint(z))
        })
    }

    #[test]
    fn cohen_fast_paths_match_bruteforce() {
        for grid in [
            GridModel::exact(8).unwrap(),
            GridModel::continuum(16).unwrap(),
        ] {
            let f = Signal::random(grid, 11).unwrap();
            let g = Signal::random(grid, 12).unwrap();
            let low = Operator::rank_one(&g, &f).unwrap();
            let shift = Operator::tf_shift(grid, PhasePoint::new(3, 1));
            let dense = random_operator(grid, 5);
            let parity = Operator::parity(grid).scaled(Complex64::new(2.0, -0.5));
            let shift_adjoint = shift.adjoint().scaled(Complex64::new(0.3, 1.1));
            for s in [low, shift, dense, parity, shift_adjoint] {
                let fast = cohen_transform(&s, &f).unwrap();
                assert!(fast.max_abs_diff(&cohen_bruteforce(&s, &f)) < 1e-12);
            }
        }
    }

    #[test]
    fn apply_field_matches_explicit_sum() {
        let grid = GridModel::exact(8).unwrap();
        let f = Signal::random(grid, 21).unwrap();
        let g = Signal::random(grid, 22).unwrap();
        let rows = vec![1, 4, 6];
        let coeffs: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|&m| {
                (0..8)
                    .map(|k| Complex64::new((m + k) as f64 * 0.1, (m * k) as f64 * 0.03))
                    .collect()
            })
            .collect();
        let ops = [
            Operator::rank_one(&g, &f).unwrap(),
            Operator::tf_shift(grid, PhasePoint::new(2, 5)),
            random_operator(grid, 9),
            Operator::parity(grid).scaled(Complex64::new(0.5, 1.5)),
            Operator::tf_shift(grid, PhasePoint::new(3, 6))
                .adjoint()
                .scaled(Complex64::new(-0.7, 0.2)),
        ];
        for s in ops {
            let got = apply_field(&s, &rows, &coeffs, &f, &DftPair::new(8));
            let mut want = vec![ZERO; 8];
            for (&m, crow) in rows.iter().zip(&coeffs) {
                for (k, c) in crow.iter().enumerate() {
                    let y = s.alpha(PhasePoint::new(m, k)).apply(&f).unwrap();
                    for (w, v) in want.iter_mut().zip(y.data()) {
                        *w += c * v;
                    }
                }
            }
            let err = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn symplectic_fourier_is_an_involution() {
        let grid = GridModel::exact(8).unwrap();
        let f = PhaseFunction::from_fn(grid, |z| {
            Complex64::new(z.m as f64 - 0.3 * z.k as f64, (z.m * z.k) as f64)
        });
        assert!(symplectic_fourier(&symplectic_fourier(&f)).max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn weyl_quantization_of_one_is_identity() {
        let grid = GridModel::exact(8).unwrap();
        let one = PhaseFunction::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        assert!(weyl_quantize(&one).max_abs_diff(&Operator::identity(grid)) < 1e-12);
    }

    #[test]
    fn full_grid_localization_is_trace_times_identity() {
        let grid = GridModel::exact(8).unwrap();
        let s = random_operator(grid, 3);
        let h = localization_operator(&Region::full(grid), &s).unwrap();
        let expect = Operator::identity(grid).scaled(s.trace());
        assert!(h.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn fourier_wigner_inverse_round_trip() {
        let grid = GridModel::continuum(16).unwrap();
        let s = random_operator(grid, 4);
        assert!(fourier_wigner_inverse(&fourier_wigner(&s)).max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn convolution_identities_hold_exactly() {
        for grid in [
            GridModel::exact(8).unwrap(),
            GridModel::continuum(8).unwrap(),
        ] {
            let t = random_operator(grid, 31);
            let s = random_operator(grid, 47);
            let conv = op_convolution(&t, &s).unwrap();
            let lhs = symplectic_fourier(&conv);
            let (ft, fs) = (fourier_wigner(&t), fourier_wigner(&s));
            let rhs = PhaseFunction::from_fn(grid, |z| ft.get(z) * fs.get(z));
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
            let sym = symbol_convolution(&weyl_symbol(&t), &weyl_symbol(&s)).unwrap();
            assert!(sym.max_abs_diff(&conv) < 1e-10);
            let f = Signal::random(grid, 5).unwrap();
            let ff = Operator::rank_one(&f, &f).unwrap();
            let via = op_convolution(&ff, &s.parity_reflect()).unwrap();
            assert!(via.max_abs_diff(&cohen_transform(&s, &f).unwrap()) < 1e-10);
            assert!((fourier_wigner(&s).l2_norm() - s.hs_norm()).abs() < 1e-10);
        }
    }
}
