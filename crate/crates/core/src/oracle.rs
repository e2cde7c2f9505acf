//! Identity suite: the exact algebraic identities of the finite model, each reduced to one
//! residual on seeded random inputs.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::CMatrix;
use crate::operator::Operator;
use crate::operator_rep::{polarized_adjoint, polarized_cohen, POLARIZED_MAX_N};
use crate::phase_space::{GridModel, Signal};
use crate::qha::{
    cohen_transform, fourier_wigner, op_convolution, stft, symbol_convolution, symplectic_fourier,
    weyl_quantize, weyl_symbol, PhaseFunction,
};

/// One identity and its largest observed deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub residual: f64,
}

fn gaussian_entry(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * scale
}

/// Dense operator with independent complex Gaussian entries, Hilbert-Schmidt norm about one.
pub fn random_operator(grid: GridModel, seed: u64) -> Operator {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (2.0f64.sqrt() * n as f64);
    let matrix = CMatrix::from_fn(n, n, |_, _| gaussian_entry(&mut rng, scale));
    Operator::from_matrix(grid, matrix).expect("square matrix on the grid")
}

fn random_symbol(grid: GridModel, seed: u64) -> PhaseFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.n() * grid.n())
        .map(|_| gaussian_entry(&mut rng, 1.0))
        .collect();
    PhaseFunction::new(grid, values).expect("n² values")
}

/// Runs every identity on an exact-cyclic grid of size `n`; `n` is capped by the dense
/// storage of the polarized transform.
pub fn identity_suite(n: usize, seed: u64) -> Result<Vec<IdentityResidual>> {
    if n > POLARIZED_MAX_N {
        return Err(LabError::invalid(
            "n",
            format!("identity suite runs for n <= {POLARIZED_MAX_N}"),
        ));
    }
    let grid = GridModel::exact(n)?;
    let f = Signal::random(grid, seed)?;
    let g = Signal::random(grid, seed + 1)?;
    let t = random_operator(grid, seed + 2);
    let s = random_operator(grid, seed + 3);
    let mut out = Vec::new();

    let spectrogram: f64 = stft(&f, &g)?
        .values()
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        * grid.phase_weight();
    out.push(IdentityResidual {
        name: "moyal spectrogram resolution",
        residual: (spectrogram - f.norm().powi(2) * g.norm().powi(2)).abs(),
    });

    out.push(IdentityResidual {
        name: "fourier-wigner parseval",
        residual: (fourier_wigner(&s).l2_norm() - s.hs_norm()).abs(),
    });

    let symbol = random_symbol(grid, seed + 4);
    out.push(IdentityResidual {
        name: "weyl round trip",
        residual: weyl_symbol(&weyl_quantize(&symbol))
            .max_abs_diff(&symbol)
            .max(weyl_quantize(&weyl_symbol(&s)).max_abs_diff(&s)),
    });

    let conv = op_convolution(&t, &s)?;
    let (ft, fs) = (fourier_wigner(&t), fourier_wigner(&s));
    let product = PhaseFunction::from_fn(grid, |z| ft.get(z) * fs.get(z));
    out.push(IdentityResidual {
        name: "symplectic fourier of convolution",
        residual: symplectic_fourier(&conv).max_abs_diff(&product),
    });

    let ff = Operator::rank_one(&f, &f)?;
    out.push(IdentityResidual {
        name: "rank-one convolution is cohen transform",
        residual: op_convolution(&ff, &s.parity_reflect())?.max_abs_diff(&cohen_transform(&s, &f)?),
    });

    out.push(IdentityResidual {
        name: "convolution of weyl symbols",
        residual: symbol_convolution(&weyl_symbol(&t), &weyl_symbol(&s))?.max_abs_diff(&conv),
    });

    let unit = s.scaled(Complex64::new(1.0 / s.hs_norm(), 0.0));
    let field = polarized_cohen(&t, &unit)?;
    out.push(IdentityResidual {
        name: "polarized isometry",
        residual: (field.l2_norm() - t.hs_norm()).abs(),
    });

    let (r, w) = (
        random_operator(grid, seed + 5),
        random_operator(grid, seed + 6),
    );
    let inner = polarized_cohen(&s, &r)?.inner(&polarized_cohen(&t, &w)?);
    out.push(IdentityResidual {
        name: "polarized orthogonality",
        residual: (inner - s.hs_inner(&t) * r.hs_inner(&w).conj()).norm(),
    });

    out.push(IdentityResidual {
        name: "polarized reconstruction",
        residual: polarized_adjoint(&field, &unit)?.max_abs_diff(&t),
    });
    Ok(out)
}
