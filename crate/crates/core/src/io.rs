//! JSON and CSV forms of signals, regions, operators, phase functions and gap tables, plus
//! a serde description of windows for configuration files.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::gap_criteria::GapRow;
use crate::linalg::CMatrix;
use crate::operator::Operator;
use crate::phase_space::{GridMode, GridModel, Region, RegionSpec, Signal};
use crate::qha::PhaseFunction;
use crate::windows::{
    self, BornJordanMethod, MultiplierProfile, OperatorWindow, Structure, WindowFlags,
};

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// `{"n", "mode", "data": [[re, im], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRecord {
    pub n: usize,
    pub mode: GridMode,
    pub data: Vec<[f64; 2]>,
}

impl From<&Signal> for SignalRecord {
    fn from(f: &Signal) -> Self {
        SignalRecord {
            n: f.grid().n(),
            mode: f.grid().mode(),
            data: f.data().iter().copied().map(pair).collect(),
        }
    }
}

impl SignalRecord {
    pub fn into_signal(self) -> Result<Signal> {
        let grid = GridModel::new(self.n, self.mode)?;
        Signal::new(grid, self.data.into_iter().map(complex).collect())
    }
}

/// `{"n", "mode", "mask": [bool, …]}` row-major by `(m, k)`; `mode` defaults to continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRecord {
    pub n: usize,
    #[serde(default = "continuum_mode")]
    pub mode: GridMode,
    pub mask: Vec<bool>,
}

fn continuum_mode() -> GridMode {
    GridMode::ContinuumEmulation
}

impl From<&Region> for RegionRecord {
    fn from(r: &Region) -> Self {
        RegionRecord {
            n: r.grid().n(),
            mode: r.grid().mode(),
            mask: r.mask().to_vec(),
        }
    }
}

impl RegionRecord {
    pub fn into_region(self) -> Result<Region> {
        Region::from_mask(GridModel::new(self.n, self.mode)?, self.mask)
    }
}

/// `{"n", "mode", "matrix": [[[re, im], …], …], "flags", "structure"}` with rows outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorRecord {
    pub n: usize,
    pub mode: GridMode,
    pub matrix: Vec<Vec<[f64; 2]>>,
    /// Informational on load: flags are always recomputed from the matrix.
    #[serde(default)]
    pub flags: Option<WindowFlags>,
    pub structure: Structure,
}

impl From<&OperatorWindow> for OperatorRecord {
    fn from(w: &OperatorWindow) -> Self {
        let m = w.operator().matrix();
        let n = m.nrows();
        OperatorRecord {
            n,
            mode: w.grid().mode(),
            matrix: (0..n)
                .map(|i| (0..n).map(|j| pair(m[(i, j)])).collect())
                .collect(),
            flags: Some(w.flags()),
            structure: w.structure(),
        }
    }
}

impl OperatorRecord {
    pub fn into_window(self) -> Result<OperatorWindow> {
        let grid = GridModel::new(self.n, self.mode)?;
        if self.matrix.len() != self.n || self.matrix.iter().any(|row| row.len() != self.n) {
            return Err(LabError::DimensionMismatch(format!(
                "operator matrix must be {0}×{0}",
                self.n
            )));
        }
        let matrix = CMatrix::from_fn(self.n, self.n, |i, j| complex(self.matrix[i][j]));
        Ok(OperatorWindow::new(
            Operator::from_matrix(grid, matrix)?,
            self.structure,
        ))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

pub fn write_json<T: Serialize, W: Write>(value: &T, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<T> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn read_signal<R: Read>(reader: R) -> Result<Signal> {
    read_json::<SignalRecord, _>(reader)?.into_signal()
}

pub fn read_region<R: Read>(reader: R) -> Result<Region> {
    read_json::<RegionRecord, _>(reader)?.into_region()
}

pub fn read_window<R: Read>(reader: R) -> Result<OperatorWindow> {
    read_json::<OperatorRecord, _>(reader)?.into_window()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PhaseRow {
    m: usize,
    k: usize,
    re: f64,
    im: f64,
}

/// Long-form CSV `m,k,re,im`, row-major by `(m, k)`.
pub fn write_phase_csv<W: Write>(f: &PhaseFunction, writer: W) -> Result<()> {
    let n = f.grid().n();
    let mut out = csv::Writer::from_writer(writer);
    for m in 0..n {
        for (k, v) in f.row(m).iter().enumerate() {
            out.serialize(PhaseRow {
                m,
                k,
                re: v.re,
                im: v.im,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_phase_csv<R: Read>(grid: GridModel, reader: R) -> Result<PhaseFunction> {
    let n = grid.n();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let mut seen = vec![false; n * n];
    for row in csv::Reader::from_reader(reader).deserialize::<PhaseRow>() {
        let row = row?;
        if row.m >= n || row.k >= n {
            return Err(LabError::invalid(
                "m,k",
                format!("index ({}, {}) outside ℤ_{n}", row.m, row.k),
            ));
        }
        values[row.m * n + row.k] = Complex64::new(row.re, row.im);
        seen[row.m * n + row.k] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(LabError::DimensionMismatch(format!(
            "phase CSV must list all {} points",
            n * n
        )));
    }
    PhaseFunction::new(grid, values)
}

/// CSV with columns `d, p, R, x, A_d, F_d, C_p^p, verdict`.
pub fn write_gap_csv<W: Write>(rows: &[GapRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Signal description for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Dilated Gaussian moved to `(x, xi)`.
    Gaussian {
        #[serde(default = "unit")]
        lambda: f64,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        xi: f64,
    },
    Hermite {
        j: usize,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        xi: f64,
    },
    Random {
        seed: u64,
    },
    Zero {},
    File {
        path: String,
    },
}

fn unit() -> f64 {
    1.0
}

impl SignalSpec {
    pub fn build(&self, grid: GridModel) -> Result<Signal> {
        match self {
            SignalSpec::Gaussian { lambda, x, xi } => {
                Signal::gaussian(grid, *lambda, grid.nearest_point(*x, *xi))
            }
            SignalSpec::Hermite { j, x, xi } => {
                Ok(Signal::hermite(grid, *j)?.tf_shift(grid.nearest_point(*x, *xi)))
            }
            SignalSpec::Random { seed } => Signal::random(grid, *seed),
            SignalSpec::Zero {} => Ok(Signal::zeros(grid)),
            SignalSpec::File { path } => {
                let f = read_signal(std::fs::File::open(path)?)?;
                grid.ensure_same(f.grid())?;
                Ok(f)
            }
        }
    }
}

/// Window description for configuration files. Field-less kinds are empty structs so that
/// stray fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindowSpec {
    RankOne {
        g: SignalSpec,
        h: SignalSpec,
    },
    FiniteRank {
        weights: Vec<f64>,
        signals: Vec<SignalSpec>,
    },
    Wigner {},
    TauWigner {
        tau: f64,
    },
    BornJordan {
        #[serde(default = "sinc_method")]
        method: BornJordanMethod,
    },
    Shift {
        x: f64,
        xi: f64,
    },
    IdentityMinusGaussian {},
    /// `c·Id + Σ wᵢ gᵢ⊗gᵢ`.
    IdentityPlus {
        c: f64,
        weights: Vec<f64>,
        signals: Vec<SignalSpec>,
    },
    DiagonalSeries {
        indices: Vec<usize>,
        weights: Vec<f64>,
    },
    Multiplication {
        profile: MultiplierProfile,
    },
    Zero {},
    File {
        path: String,
    },
}

fn sinc_method() -> BornJordanMethod {
    BornJordanMethod::SincSymbol
}

impl WindowSpec {
    pub fn build(&self, grid: GridModel) -> Result<OperatorWindow> {
        let terms = |weights: &[f64], signals: &[SignalSpec]| -> Result<Vec<(f64, Signal)>> {
            if weights.len() != signals.len() {
                return Err(LabError::invalid("weights", "need one weight per signal"));
            }
            weights
                .iter()
                .zip(signals)
                .map(|(&w, s)| Ok((w, s.build(grid)?)))
                .collect()
        };
        match self {
            WindowSpec::RankOne { g, h } => windows::rank_one(&g.build(grid)?, &h.build(grid)?),
            WindowSpec::FiniteRank { weights, signals } => {
                windows::finite_rank(&terms(weights, signals)?)
            }
            WindowSpec::Wigner {} => Ok(windows::wigner(grid)),
            WindowSpec::TauWigner { tau } => windows::tau_wigner(grid, *tau),
            WindowSpec::BornJordan { method } => windows::born_jordan(grid, *method),
            WindowSpec::Shift { x, xi } => Ok(windows::shift(grid, grid.nearest_point(*x, *xi))),
            WindowSpec::IdentityMinusGaussian {} => windows::identity_minus_gaussian(grid),
            WindowSpec::IdentityPlus {
                c,
                weights,
                signals,
            } => {
                let k = if signals.is_empty() {
                    Operator::zero(grid)
                } else {
                    windows::finite_rank(&terms(weights, signals)?)?
                        .operator()
                        .clone()
                };
                windows::identity_plus(Complex64::new(*c, 0.0), &k)
            }
            WindowSpec::DiagonalSeries { indices, weights } => {
                windows::diagonal_series(grid, indices, weights)
            }
            WindowSpec::Multiplication { profile } => {
                let profile = *profile;
                Ok(windows::multiplication(grid, move |x| profile.eval(x)))
            }
            WindowSpec::Zero {} => windows::custom(grid, CMatrix::zeros(grid.n(), grid.n())),
            WindowSpec::File { path } => {
                let w = read_window(std::fs::File::open(path)?)?;
                grid.ensure_same(w.grid())?;
                Ok(w)
            }
        }
    }
}

/// Region description for configuration files: a geometric spec or a mask file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSource {
    File { path: String },
    Spec(RegionSpec),
}

impl RegionSource {
    pub fn build(&self, grid: GridModel) -> Result<Region> {
        match self {
            RegionSource::Spec(spec) => Region::from_spec(grid, spec),
            RegionSource::File { path } => {
                let r = read_region(std::fs::File::open(path)?)?;
                grid.ensure_same(r.grid())?;
                Ok(r)
            }
        }
    }
}
