//! Discrete phase space: grid model, signals, time-frequency shifts, parity and regions.
//!
//! Sample `j` of a signal sits at position `centered(j)` in exact-cyclic mode and at
//! `(j - n/2)·δ` with `δ = 1/√n` in continuum emulation. A phase-space index pair
//! `(m, k)` stands for the time-frequency shift by `m` samples and `k` frequency bins,
//! and regions are rasterized in the symmetric coordinates `(m_c, k_c)/√n`, which are
//! the physical `(x, ξ)` in continuum mode.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::ZERO;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridMode {
    #[serde(rename = "exact")]
    ExactCyclic,
    #[serde(rename = "continuum")]
    ContinuumEmulation,
}

impl GridMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridMode::ExactCyclic => "exact",
            GridMode::ContinuumEmulation => "continuum",
        }
    }
}

/// `ℤ_n × ℤ_n` with its sampling step and phase-space cell weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridModel {
    n: usize,
    mode: GridMode,
}

impl GridModel {
    pub fn new(n: usize, mode: GridMode) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(LabError::invalid(
                "n",
                format!("grid size must be even and at least 4, got {n}"),
            ));
        }
        Ok(GridModel { n, mode })
    }

    pub fn exact(n: usize) -> Result<Self> {
        Self::new(n, GridMode::ExactCyclic)
    }

    pub fn continuum(n: usize) -> Result<Self> {
        Self::new(n, GridMode::ContinuumEmulation)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn is_continuum(&self) -> bool {
        self.mode == GridMode::ContinuumEmulation
    }

    /// Sample spacing used in signal norms.
    pub fn delta(&self) -> f64 {
        match self.mode {
            GridMode::ExactCyclic => 1.0,
            GridMode::ContinuumEmulation => 1.0 / (self.n as f64).sqrt(),
        }
    }

    /// Measure of one phase-space cell.
    pub fn phase_weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Representative of `i mod n` in `[-n/2, n/2)`.
    pub fn centered(&self, i: usize) -> i64 {
        let i = (i % self.n) as i64;
        let n = self.n as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }

    /// Coordinate of sample `j` used by the special signal builders.
    pub fn sample_coordinate(&self, j: usize) -> f64 {
        let scale = 1.0 / (self.n as f64).sqrt();
        match self.mode {
            GridMode::ExactCyclic => self.centered(j) as f64 * scale,
            GridMode::ContinuumEmulation => (j as f64 - (self.n / 2) as f64) * scale,
        }
    }

    /// Symmetric phase-space coordinates `(m_c, k_c)/√n` of an index pair.
    pub fn coordinates(&self, z: PhasePoint) -> (f64, f64) {
        let s = 1.0 / (self.n as f64).sqrt();
        (self.centered(z.m) as f64 * s, self.centered(z.k) as f64 * s)
    }

    /// Nearest grid point to symmetric coordinates `(x, ξ)`.
    pub fn nearest_point(&self, x: f64, xi: f64) -> PhasePoint {
        let s = (self.n as f64).sqrt();
        PhasePoint::new(
            self.wrap((x * s).round() as i64),
            self.wrap((xi * s).round() as i64),
        )
    }

    /// Half-width of the symmetric coordinate box, `√n / 2`.
    pub fn half_width(&self) -> f64 {
        (self.n as f64).sqrt() / 2.0
    }

    pub fn ensure_same(&self, other: &GridModel) -> Result<()> {
        if self != other {
            return Err(LabError::DimensionMismatch(format!(
                "grid n={} {:?} vs n={} {:?}",
                self.n, self.mode, other.n, other.mode
            )));
        }
        Ok(())
    }
}

/// Index pair `(m, k) ∈ ℤ_n × ℤ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    pub m: usize,
    pub k: usize,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { m: 0, k: 0 };

    pub fn new(m: usize, k: usize) -> Self {
        PhasePoint { m, k }
    }
}

/// Discrete symplectic form `[u, z] = m_u k_z - k_u m_z` reduced mod `n`.
pub fn symplectic_form(grid: &GridModel, u: PhasePoint, z: PhasePoint) -> usize {
    let n = grid.n() as u128;
    let a = (u.m as u128 * z.k as u128) % n;
    let b = (u.k as u128 * z.m as u128) % n;
    ((a + n - b) % n) as usize
}

/// Samples on the grid with `‖f‖² = Σ|f_j|²·δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: GridModel,
    data: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: GridModel, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.n() {
            return Err(LabError::DimensionMismatch(format!(
                "signal has {} samples, grid has {}",
                data.len(),
                grid.n()
            )));
        }
        Ok(Signal { grid, data })
    }

    pub fn zeros(grid: GridModel) -> Self {
        Signal {
            grid,
            data: vec![ZERO; grid.n()],
        }
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// `⟨self, other⟩ = Σ self_j·conj(other_j)·δ`.
    pub fn inner(&self, other: &Signal) -> Complex64 {
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.delta()
    }

    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.delta()).sqrt()
    }

    pub fn normalized(&self) -> Result<Signal> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LabError::ZeroSignal);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Signal {
        Signal {
            grid: self.grid,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Signal, b: Complex64) -> Signal {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Signal {
            grid: self.grid,
            data,
        }
    }

    /// `π(m,k)f[j] = e^{2πi kj/n} f[j - m]`.
    pub fn tf_shift(&self, z: PhasePoint) -> Signal {
        let n = self.grid.n();
        let data = (0..n)
            .map(|j| {
                let phase = 2.0 * PI * ((z.k * j) % n) as f64 / n as f64;
                Complex64::from_polar(1.0, phase) * self.data[(j + n - z.m % n) % n]
            })
            .collect();
        Signal {
            grid: self.grid,
            data,
        }
    }

    /// `π(z)* f`.
    pub fn tf_shift_adjoint(&self, z: PhasePoint) -> Signal {
        let n = self.grid.n();
        let data = (0..n)
            .map(|j| {
                let idx = (j + z.m) % n;
                let phase = -2.0 * PI * ((z.k * idx) % n) as f64 / n as f64;
                Complex64::from_polar(1.0, phase) * self.data[idx]
            })
            .collect();
        Signal {
            grid: self.grid,
            data,
        }
    }

    /// `Pf[j] = f[-j mod n]`.
    pub fn parity(&self) -> Signal {
        let n = self.grid.n();
        Signal {
            grid: self.grid,
            data: (0..n).map(|j| self.data[(n - j) % n]).collect(),
        }
    }

    fn from_fn(grid: GridModel, f: impl Fn(f64) -> f64) -> Result<Signal> {
        let data = (0..grid.n())
            .map(|j| Complex64::new(f(grid.sample_coordinate(j)), 0.0))
            .collect();
        Signal { grid, data }.normalized()
    }

    /// Dilated Gaussian `(√2/λ)^{1/2} e^{-π y²/λ²}` moved to `center` by a time-frequency shift.
    pub fn gaussian(grid: GridModel, lambda: f64, center: PhasePoint) -> Result<Signal> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LabError::invalid("lambda", "dilation must be positive"));
        }
        let g = Self::from_fn(grid, |y| (-PI * y * y / (lambda * lambda)).exp())?;
        Ok(g.tf_shift(center))
    }

    /// `φ₀(t) = 2^{1/4} e^{-π t²}`.
    pub fn standard_gaussian(grid: GridModel) -> Result<Signal> {
        Self::gaussian(grid, 1.0, PhasePoint::ORIGIN)
    }

    /// L²-normalized Hermite function of order `j`, requiring `j < n/4`.
    pub fn hermite(grid: GridModel, j: usize) -> Result<Signal> {
        if 4 * j >= grid.n() {
            return Err(LabError::InsufficientResolution(format!(
                "hermite order {j} needs n > {}",
                4 * j
            )));
        }
        Self::from_fn(grid, |t| hermite_function(j, t))
    }

    /// Seeded complex Gaussian noise, normalized.
    pub fn random(grid: GridModel, seed: u64) -> Result<Signal> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.n())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        Signal { grid, data }.normalized()
    }
}

/// Hermite function `2^{1/4}(2^j j!)^{-1/2} H_j(√(2π) t) e^{-π t²}` by the stable three-term recurrence.
pub fn hermite_function(j: usize, t: f64) -> f64 {
    let s = (2.0 * PI).sqrt() * t;
    let mut prev = 2.0_f64.powf(0.25) * (-PI * t * t).exp();
    if j == 0 {
        return prev;
    }
    let mut cur = 2.0_f64.sqrt() * s * prev;
    for i in 1..j {
        let next = ((2.0 / (i as f64 + 1.0)).sqrt()) * s * cur
            - (i as f64 / (i as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Laguerre polynomial `L_j(x)`.
pub fn laguerre(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if j == 0 {
        return prev;
    }
    for i in 1..j {
        let i = i as f64;
        let next = ((2.0 * i + 1.0 - x) * cur - i * prev) / (i + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Geometric description of a region before rasterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionSpec {
    Ball {
        center: [f64; 2],
        radius: f64,
    },
    Rectangle {
        x: [f64; 2],
        xi: [f64; 2],
    },
    Mask {
        mask: Vec<bool>,
    },
    Union {
        parts: Vec<RegionSpec>,
    },
    ComplementInBox {
        x: [f64; 2],
        xi: [f64; 2],
        inner: Box<RegionSpec>,
    },
}

impl RegionSpec {
    fn contains(&self, grid: &GridModel, z: PhasePoint) -> bool {
        let (x, xi) = grid.coordinates(z);
        let in_rect =
            |a: &[f64; 2], b: &[f64; 2]| a[0] <= x && x <= a[1] && b[0] <= xi && xi <= b[1];
        match self {
            RegionSpec::Ball { center, radius } => {
                (x - center[0]).powi(2) + (xi - center[1]).powi(2) <= radius * radius
            }
            RegionSpec::Rectangle { x: a, xi: b } => in_rect(a, b),
            RegionSpec::Mask { mask } => mask.get(z.m * grid.n() + z.k).copied().unwrap_or(false),
            RegionSpec::Union { parts } => parts.iter().any(|p| p.contains(grid, z)),
            RegionSpec::ComplementInBox { x: a, xi: b, inner } => {
                in_rect(a, b) && !inner.contains(grid, z)
            }
        }
    }

    fn validate(&self, grid: &GridModel) -> Result<()> {
        match self {
            RegionSpec::Ball { radius, .. } if !(*radius >= 0.0) => Err(LabError::invalid(
                "radius",
                "ball radius must be non-negative",
            )),
            RegionSpec::Mask { mask } if mask.len() != grid.n() * grid.n() => {
                Err(LabError::DimensionMismatch(format!(
                    "mask has {} entries, expected {}",
                    mask.len(),
                    grid.n() * grid.n()
                )))
            }
            RegionSpec::Union { parts } => parts.iter().try_for_each(|p| p.validate(grid)),
            RegionSpec::ComplementInBox { inner, .. } => inner.validate(grid),
            _ => Ok(()),
        }
    }
}

/// Rasterized subset of the phase grid; measure is `count / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: GridModel,
    mask: Vec<bool>,
}

impl Region {
    pub fn from_mask(grid: GridModel, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.n() * grid.n() {
            return Err(LabError::DimensionMismatch(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                grid.n() * grid.n()
            )));
        }
        if !mask.iter().any(|&b| b) {
            return Err(LabError::DegenerateRegion);
        }
        Ok(Region { grid, mask })
    }

    pub fn from_spec(grid: GridModel, spec: &RegionSpec) -> Result<Self> {
        spec.validate(&grid)?;
        let n = grid.n();
        let mask = (0..n * n)
            .map(|i| spec.contains(&grid, PhasePoint::new(i / n, i % n)))
            .collect();
        Self::from_mask(grid, mask)
    }

    pub fn ball(grid: GridModel, center: (f64, f64), radius: f64) -> Result<Self> {
        Self::from_spec(
            grid,
            &RegionSpec::Ball {
                center: [center.0, center.1],
                radius,
            },
        )
    }

    pub fn full(grid: GridModel) -> Self {
        Region {
            grid,
            mask: vec![true; grid.n() * grid.n()],
        }
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, z: PhasePoint) -> bool {
        self.mask[(z.m % self.grid.n()) * self.grid.n() + z.k % self.grid.n()]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.phase_weight()
    }

    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        let n = self.grid.n();
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| PhasePoint::new(i / n, i % n))
    }

    /// Rows `m` meeting the region.
    pub fn rows(&self) -> Vec<usize> {
        let n = self.grid.n();
        (0..n)
            .filter(|&m| self.mask[m * n..(m + 1) * n].iter().any(|&b| b))
            .collect()
    }

    pub fn row_mask(&self, m: usize) -> &[bool] {
        let n = self.grid.n();
        &self.mask[m * n..(m + 1) * n]
    }

    /// Point of the region closest to the centroid of its symmetric coordinates.
    pub fn density_point(&self) -> PhasePoint {
        let pts: Vec<PhasePoint> = self.points().collect();
        let coords: Vec<(f64, f64)> = pts.iter().map(|&z| self.grid.coordinates(z)).collect();
        let cx = coords.iter().map(|c| c.0).sum::<f64>() / coords.len() as f64;
        let cy = coords.iter().map(|c| c.1).sum::<f64>() / coords.len() as f64;
        let best = (0..pts.len())
            .min_by(|&a, &b| {
                let da = (coords[a].0 - cx).powi(2) + (coords[a].1 - cy).powi(2);
                let db = (coords[b].0 - cx).powi(2) + (coords[b].1 - cy).powi(2);
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        pts[best]
    }

    /// Diagonal of the bounding box in symmetric coordinates.
    pub fn diameter(&self) -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for z in self.points() {
            let (x, y) = self.grid.coordinates(z);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let step = 1.0 / (self.grid.n() as f64).sqrt();
        ((x1 - x0 + step).powi(2) + (y1 - y0 + step).powi(2)).sqrt()
    }

    /// Torus distance in symmetric coordinates from `z` to the nearest region point.
    pub fn distance_to(&self, z: PhasePoint) -> f64 {
        let n = self.grid.n();
        self.points()
            .map(|p| {
                let dm = self.grid.centered((z.m + n - p.m) % n) as f64;
                let dk = self.grid.centered((z.k + n - p.k) % n) as f64;
                (dm * dm + dk * dk).sqrt() / (n as f64).sqrt()
            })
            .fold(f64::MAX, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_or_small_sizes() {
        assert!(GridModel::exact(7).is_err());
        assert!(GridModel::exact(2).is_err());
        assert!(GridModel::continuum(8).is_ok());
    }

    #[test]
    fn weights_in_both_modes() {
        let g = GridModel::continuum(64).unwrap();
        assert!((g.delta() - 0.125).abs() < 1e-15);
        assert!((g.phase_weight() - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(GridModel::exact(64).unwrap().delta(), 1.0);
    }

    #[test]
    fn ball_measure_approximates_area() {
        let g = GridModel::continuum(1024).unwrap();
        let r = Region::ball(g, (0.0, 0.0), 1.0).unwrap();
        assert!((r.measure() - PI).abs() / PI < 0.02);
    }

    #[test]
    fn empty_region_is_degenerate() {
        let g = GridModel::exact(8).unwrap();
        let err = Region::from_mask(g, vec![false; 64]).unwrap_err();
        assert!(err.to_string().contains("degenerate region"));
    }

    #[test]
    fn complement_in_box_removes_inner() {
        let g = GridModel::continuum(64).unwrap();
        let spec = RegionSpec::ComplementInBox {
            x: [-1.0, 1.0],
            xi: [-1.0, 1.0],
            inner: Box::new(RegionSpec::Ball {
                center: [0.0, 0.0],
                radius: 0.5,
            }),
        };
        let r = Region::from_spec(g, &spec).unwrap();
        assert!(!r.contains(PhasePoint::ORIGIN));
        assert!(r.contains(g.nearest_point(0.9, 0.9)));
    }

    #[test]
    fn hermite_beyond_resolution_fails() {
        let g = GridModel::continuum(32).unwrap();
        assert!(matches!(
            Signal::hermite(g, 8),
            Err(LabError::InsufficientResolution(_))
        ));
        assert!(Signal::hermite(g, 7).is_ok());
    }

    #[test]
    fn parity_is_an_involution_and_adjoint_inverts_shift() {
        let g = GridModel::exact(16).unwrap();
        let f = Signal::random(g, 3).unwrap();
        assert_eq!(f.parity().parity(), f);
        let z = PhasePoint::new(5, 11);
        let back = f.tf_shift(z).tf_shift_adjoint(z);
        let err: f64 = back
            .data()
            .iter()
            .zip(f.data())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(err < 1e-12);
    }
}
