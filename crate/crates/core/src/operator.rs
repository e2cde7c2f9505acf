//! Operators on the sampled signal space, stored densely with an optional structured form
//! that the transforms use as a fast path.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::phase_space::{GridModel, PhasePoint, Signal};

/// `shift·Id + Σ uᵢ ⊗ vᵢ` where `(u ⊗ v)h = ⟨h, v⟩u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankForm {
    pub shift: Complex64,
    pub terms: Vec<(Signal, Signal)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FastForm {
    LowRank(LowRankForm),
    /// A multiple `cπ(z₀)` of a time-frequency shift.
    TfShift(PhasePoint, Complex64),
    /// A multiple `cP` of the parity.
    Parity(Complex64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    grid: GridModel,
    matrix: CMatrix,
    fast: Option<FastForm>,
}

impl Operator {
    pub fn from_matrix(grid: GridModel, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != grid.n() || matrix.ncols() != grid.n() {
            return Err(LabError::DimensionMismatch(format!(
                "operator is {}x{}, grid has n={}",
                matrix.nrows(),
                matrix.ncols(),
                grid.n()
            )));
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LabError::invalid("matrix", "entries must be finite"));
        }
        Ok(Operator {
            grid,
            matrix,
            fast: None,
        })
    }

    pub fn identity(grid: GridModel) -> Self {
        Self::low_rank(
            grid,
            LowRankForm {
                shift: ONE,
                terms: Vec::new(),
            },
        )
    }

    pub fn zero(grid: GridModel) -> Self {
        Operator {
            grid,
            matrix: CMatrix::zeros(grid.n(), grid.n()),
            fast: None,
        }
    }

    /// `(f ⊗ g)h = ⟨h, g⟩f`.
    pub fn rank_one(f: &Signal, g: &Signal) -> Result<Self> {
        f.grid().ensure_same(g.grid())?;
        Ok(Self::low_rank(
            *f.grid(),
            LowRankForm {
                shift: ZERO,
                terms: vec![(f.clone(), g.clone())],
            },
        ))
    }

    pub fn low_rank(grid: GridModel, form: LowRankForm) -> Self {
        let n = grid.n();
        let delta = Complex64::new(grid.delta(), 0.0);
        let mut matrix = CMatrix::identity(n, n) * form.shift;
        for (u, v) in &form.terms {
            for i in 0..n {
                let ui = u.data()[i] * delta;
                for j in 0..n {
                    matrix[(i, j)] += ui * v.data()[j].conj();
                }
            }
        }
        Operator {
            grid,
            matrix,
            fast: Some(FastForm::LowRank(form)),
        }
    }

    /// The unitary `π(z₀)`.
    pub fn tf_shift(grid: GridModel, z: PhasePoint) -> Self {
        let n = grid.n();
        let mut matrix = CMatrix::zeros(n, n);
        for l in 0..n {
            let j = (l + z.m) % n;
            matrix[(j, l)] =
                Complex64::from_polar(1.0, 2.0 * PI * ((z.k * j) % n) as f64 / n as f64);
        }
        Operator {
            grid,
            matrix,
            fast: Some(FastForm::TfShift(z, ONE)),
        }
    }

    /// The parity `Pf[j] = f[-j mod n]`.
    pub fn parity(grid: GridModel) -> Self {
        let n = grid.n();
        let mut matrix = CMatrix::zeros(n, n);
        for j in 0..n {
            matrix[(j, (n - j) % n)] = ONE;
        }
        Operator {
            grid,
            matrix,
            fast: Some(FastForm::Parity(ONE)),
        }
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn fast_form(&self) -> Option<&FastForm> {
        self.fast.as_ref()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn apply(&self, f: &Signal) -> Result<Signal> {
        self.grid.ensure_same(f.grid())?;
        let n = self.n();
        let data = (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * f.data()[j]).sum())
            .collect();
        Signal::new(self.grid, data)
    }

    pub fn adjoint(&self) -> Operator {
        let fast = match &self.fast {
            Some(FastForm::LowRank(form)) => Some(FastForm::LowRank(LowRankForm {
                shift: form.shift.conj(),
                terms: form
                    .terms
                    .iter()
                    .map(|(u, v)| (v.clone(), u.clone()))
                    .collect(),
            })),
            Some(FastForm::Parity(c)) => Some(FastForm::Parity(c.conj())),
            // π(m,k)* = e^{-2πi km/n} π(-m,-k)
            Some(FastForm::TfShift(z, c)) => {
                let n = self.n();
                let phase = -2.0 * PI * ((z.k * z.m) % n) as f64 / n as f64;
                let minus = PhasePoint::new((n - z.m) % n, (n - z.k) % n);
                Some(FastForm::TfShift(
                    minus,
                    c.conj() * Complex64::from_polar(1.0, phase),
                ))
            }
            _ => None,
        };
        Operator {
            grid: self.grid,
            matrix: self.matrix.adjoint(),
            fast,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Operator {
        let fast = match &self.fast {
            Some(FastForm::LowRank(form)) => Some(FastForm::LowRank(LowRankForm {
                shift: form.shift * c,
                terms: form
                    .terms
                    .iter()
                    .map(|(u, v)| (u.scaled(c), v.clone()))
                    .collect(),
            })),
            Some(FastForm::Parity(a)) => Some(FastForm::Parity(a * c)),
            Some(FastForm::TfShift(z, a)) => Some(FastForm::TfShift(*z, a * c)),
            _ => None,
        };
        Operator {
            grid: self.grid,
            matrix: &self.matrix * c,
            fast,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.grid.ensure_same(&other.grid)?;
        let fast = match (&self.fast, &other.fast) {
            (Some(FastForm::LowRank(a)), Some(FastForm::LowRank(b))) => {
                Some(FastForm::LowRank(LowRankForm {
                    shift: a.shift + b.shift,
                    terms: a.terms.iter().chain(&b.terms).cloned().collect(),
                }))
            }
            _ => None,
        };
        Ok(Operator {
            grid: self.grid,
            matrix: &self.matrix + &other.matrix,
            fast,
        })
    }

    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Operator {
            grid: self.grid,
            matrix: &self.matrix * &other.matrix,
            fast: None,
        })
    }

    /// `Š = P S P`.
    pub fn parity_reflect(&self) -> Operator {
        let n = self.n();
        let matrix = CMatrix::from_fn(n, n, |i, j| self.matrix[((n - i) % n, (n - j) % n)]);
        let fast = match &self.fast {
            Some(FastForm::LowRank(form)) => Some(FastForm::LowRank(LowRankForm {
                shift: form.shift,
                terms: form
                    .terms
                    .iter()
                    .map(|(u, v)| (u.parity(), v.parity()))
                    .collect(),
            })),
            Some(FastForm::Parity(c)) => Some(FastForm::Parity(*c)),
            _ => None,
        };
        Operator {
            grid: self.grid,
            matrix,
            fast,
        }
    }

    /// `α_z(S) = π(z) S π(z)*`, entrywise `e^{2πik(j-l)/n} S[j-m, l-m]`.
    pub fn alpha(&self, z: PhasePoint) -> Operator {
        let n = self.n();
        let matrix = CMatrix::from_fn(n, n, |j, l| {
            let d = (j + n - l) % n;
            let phase = 2.0 * PI * ((z.k * d) % n) as f64 / n as f64;
            Complex64::from_polar(1.0, phase)
                * self.matrix[((j + n - z.m % n) % n, (l + n - z.m % n) % n)]
        });
        Operator {
            grid: self.grid,
            matrix,
            fast: None,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `⟨A, B⟩_{S²} = tr(A B*)`.
    pub fn hs_inner(&self, other: &Operator) -> Complex64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn hs_norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    /// Operator norm, exact for low-rank-plus-identity forms without an `n³` factorization.
    pub fn operator_norm(&self) -> f64 {
        match &self.fast {
            Some(FastForm::TfShift(_, c)) => c.norm(),
            Some(FastForm::Parity(c)) => c.norm(),
            Some(FastForm::LowRank(form)) if 2 * form.terms.len() < self.n() => {
                low_rank_norm(&self.grid, form)
            }
            _ => linalg::operator_norm(&self.matrix),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == ZERO)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `‖cI + Σ u⊗v‖`: `S*S - |c|²I` lives on `span{u, v}`, so compress there.
fn low_rank_norm(grid: &GridModel, form: &LowRankForm) -> f64 {
    let n = grid.n();
    let delta = grid.delta();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for (u, v) in &form.terms {
        for w in [u, v] {
            let mut x: Vec<Complex64> = w.data().to_vec();
            for _ in 0..2 {
                for b in &basis {
                    let c: Complex64 = b.iter().zip(&x).map(|(bi, xi)| bi.conj() * xi).sum();
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi -= c * bi;
                    }
                }
            }
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm
                > 1e-12
                    * w.data()
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max)
                        .max(1e-300)
                    * (n as f64).sqrt()
            {
                basis.push(x.iter().map(|z| z / norm).collect());
            }
        }
    }
    let c2 = form.shift.norm_sqr();
    if basis.is_empty() {
        return c2.sqrt();
    }
    let apply = |x: &[Complex64], adjoint: bool| -> Vec<Complex64> {
        let shift = if adjoint {
            form.shift.conj()
        } else {
            form.shift
        };
        let mut out: Vec<Complex64> = x.iter().map(|xi| xi * shift).collect();
        for (u, v) in &form.terms {
            let (a, b) = if adjoint { (v, u) } else { (u, v) };
            let c: Complex64 = x
                .iter()
                .zip(b.data())
                .map(|(xi, bi)| xi * bi.conj())
                .sum::<Complex64>()
                * delta;
            for (o, ai) in out.iter_mut().zip(a.data()) {
                *o += c * ai;
            }
        }
        out
    };
    let r = basis.len();
    let images: Vec<Vec<Complex64>> = basis
        .iter()
        .map(|b| apply(&apply(b, false), true))
        .collect();
    let gram = CMatrix::from_fn(r, r, |i, j| {
        basis[i]
            .iter()
            .zip(&images[j])
            .map(|(a, b)| a.conj() * b)
            .sum()
    });
    let top = linalg::hermitian_eigen(&gram).values[0];
    let top = if r < n { top.max(c2) } else { top };
    top.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_rank_norm_matches_dense() {
        let g = GridModel::continuum(32).unwrap();
        let f = Signal::random(g, 1).unwrap();
        let h = Signal::random(g, 2).unwrap();
        let form = LowRankForm {
            shift: Complex64::new(0.3, 0.1),
            terms: vec![(f.scaled(Complex64::new(2.0, 0.0)), h.clone()), (h, f)],
        };
        let op = Operator::low_rank(g, form);
        let dense = linalg::operator_norm(op.matrix());
        assert!((op.operator_norm() - dense).abs() < 1e-10 * dense);
    }

    #[test]
    fn rank_one_acts_by_inner_product() {
        let g = GridModel::continuum(16).unwrap();
        let f = Signal::random(g, 4).unwrap();
        let h = Signal::random(g, 5).unwrap();
        let x = Signal::random(g, 6).unwrap();
        let y = Operator::rank_one(&f, &h).unwrap().apply(&x).unwrap();
        let expect = f.scaled(x.inner(&h));
        let err: f64 = y
            .data()
            .iter()
            .zip(expect.data())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn alpha_matches_conjugation_by_shift() {
        let g = GridModel::exact(8).unwrap();
        let f = Signal::random(g, 8).unwrap();
        let s = Operator::rank_one(&f, &f.parity()).unwrap();
        let z = PhasePoint::new(3, 5);
        let pz = Operator::tf_shift(g, z);
        let direct = pz.compose(&s).unwrap().compose(&pz.adjoint()).unwrap();
        assert!(s.alpha(z).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn parity_spectrum_multiplicities() {
        let n = 12;
        let g = GridModel::exact(n).unwrap();
        let eig = linalg::hermitian_eigen(Operator::parity(g).matrix());
        let plus = eig
            .values
            .iter()
            .filter(|v| (*v - 1.0).abs() < 1e-10)
            .count();
        let minus = eig
            .values
            .iter()
            .filter(|v| (*v + 1.0).abs() < 1e-10)
            .count();
        assert_eq!((plus, minus), (n / 2 + 1, n / 2 - 1));
    }
}
