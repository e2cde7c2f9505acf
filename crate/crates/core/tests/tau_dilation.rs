//! τ-Wigner windows against the direct dilation `S_τ f(y) = (1-τ)^{-1} f(τy/(τ-1))`
//! at τ = 2/3, where the dilation is the exact decimation `3 f(-2y)`.

use num_complex::Complex64;
use qha_lab::linalg::CMatrix;
use qha_lab::operator::Operator;
use qha_lab::phase_space::{GridModel, Region, Signal};
use qha_lab::qha::cohen_transform;
use qha_lab::windows;

fn direct_two_thirds(grid: GridModel) -> Operator {
    let n = grid.n();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, (3 * n / 2 + 2 * n - 2 * j) % n)] = Complex64::new(3.0, 0.0);
    }
    Operator::from_matrix(grid, m).unwrap()
}

#[test]
fn two_thirds_cohen_transform_matches_decimation() {
    let grid = GridModel::continuum(256).unwrap();
    let f = Signal::standard_gaussian(grid)
        .unwrap()
        .tf_shift(grid.nearest_point(0.3, -0.2))
        .combine(
            Complex64::new(1.0, 0.0),
            &Signal::hermite(grid, 1).unwrap(),
            Complex64::new(0.0, 0.5),
        )
        .normalized()
        .unwrap();
    let direct = cohen_transform(&direct_two_thirds(grid), &f).unwrap();
    let q = cohen_transform(&windows::tau_wigner(grid, 2.0 / 3.0).unwrap(), &f).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.5).unwrap();
    let worst = region
        .points()
        .map(|z| (q.get(z) - direct.get(z)).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    let other = cohen_transform(&windows::tau_wigner(grid, 1.0 / 3.0).unwrap(), &f).unwrap();
    let off = region
        .points()
        .map(|z| (other.get(z) - direct.get(z)).norm())
        .fold(0.0, f64::max);
    assert!(off > 0.1);
}
