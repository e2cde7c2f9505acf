//! Phase-space representations of operators: generalized Husimi transforms, the total
//! correlation, operator-level concentration over Hilbert–Schmidt and density operators, and
//! the polarized Cohen class on double phase space.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ascent::{sphere_ascent, AscentSettings, SphereObjective};
use crate::concentration::{
    self, ConcentrationProblem, FamilyTrace, OptimizerBudget, GRADIENT_FLOOR, TIE_TOLERANCE,
};
use crate::error::{LabError, Result};
use crate::linalg::{self, CMatrix, DftPair, ZERO};
use crate::operator::Operator;
use crate::phase_space::{GridModel, PhasePoint, Region, Signal};
use crate::qha::{self, Exponent, PhaseFunction};
use crate::windows::OperatorWindow;

/// Largest grid on which the polarized Cohen class is stored in full (`n⁴` values).
pub const POLARIZED_MAX_N: usize = 16;

/// Change of variables `U` with `|Q_S T(z,w)| = |V_{a_S} a_T(U(w,z))|` in the continuum (one
/// degree of freedom, `det U = 1`). The discrete double grid has no exact half-integer shear, so
/// this is recorded for reference and never applied.
pub const POLARIZED_SHEAR: [[f64; 4]; 4] = [
    [0.0, -1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0, 0.0],
    [0.5, 0.0, 0.5, 0.0],
    [0.0, 0.5, 0.0, 0.5],
];

const DENSITY_POSITIVITY_TOLERANCE: f64 = 1e-10;
const DENSITY_TRACE_TOLERANCE: f64 = 1e-12;

/// A positive trace-one operator.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    operator: Operator,
}

impl DensityOperator {
    pub fn new(operator: Operator) -> Result<Self> {
        let m = operator.matrix();
        let scale = linalg::frobenius(m).max(1.0);
        if !linalg::is_hermitian(m, DENSITY_POSITIVITY_TOLERANCE * scale) {
            return Err(LabError::invalid("density", "operator is not self-adjoint"));
        }
        let eig = linalg::hermitian_eigen(&linalg::hermitian_part(m));
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -DENSITY_POSITIVITY_TOLERANCE {
            return Err(LabError::invalid(
                "density",
                format!("negative eigenvalue {min}"),
            ));
        }
        let trace = operator.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > DENSITY_TRACE_TOLERANCE {
            return Err(LabError::invalid(
                "density",
                format!("trace {trace} is not one"),
            ));
        }
        Ok(DensityOperator { operator })
    }

    /// `T = AA*/tr(AA*)`.
    pub fn from_factor(grid: GridModel, factor: &CMatrix) -> Result<Self> {
        let t = factor * factor.adjoint();
        let trace = t.trace().re;
        if !(trace > 0.0) {
            return Err(LabError::invalid("factor", "factor must be nonzero"));
        }
        let mut t = t / Complex64::new(trace, 0.0);
        let h = linalg::hermitian_part(&t);
        t.copy_from(&h);
        Self::new(Operator::from_matrix(grid, t)?)
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn into_operator(self) -> Operator {
        self.operator
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values = linalg::hermitian_eigen(self.operator.matrix()).values;
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }
}

/// Generalized Husimi transform `tr(T α_z(S)) = T ⋆ Š`.
pub fn husimi_transform(t: &Operator, s: &Operator) -> Result<PhaseFunction> {
    qha::op_convolution(t, &s.parity_reflect())
}

/// Husimi function `⟨T π(z)φ₀, π(z)φ₀⟩`.
pub fn standard_husimi(t: &Operator) -> Result<PhaseFunction> {
    let g = Signal::standard_gaussian(*t.grid())?;
    husimi_transform(t, &Operator::rank_one(&g, &g)?)
}

/// Total correlation `T̃ = T ⋆ Ť`, i.e. `tr(T α_z(T))`.
pub fn total_correlation(t: &Operator) -> PhaseFunction {
    qha::op_convolution(t, &t.parity_reflect()).expect("same grid")
}

/// The total correlation with its pointwise bound and the equality case at the origin.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    #[serde(skip)]
    pub field: PhaseFunction,
    /// `‖T‖²_{S²}`.
    pub bound: f64,
    pub max_abs: f64,
    pub at_origin: f64,
    /// `|T̃(0)| = ‖T‖²_{S²}` within `1e-10` relative.
    pub origin_saturates: bool,
    /// `T* = cT` for some `|c| = 1`.
    pub unimodular_adjoint: bool,
}

impl CorrelationReport {
    /// Both sides of the equality case agree.
    pub fn consistent(&self) -> bool {
        self.origin_saturates == self.unimodular_adjoint
    }
}

pub fn correlation_report(t: &Operator) -> CorrelationReport {
    let field = total_correlation(t);
    let bound = t.hs_norm().powi(2);
    let at_origin = field.get(PhasePoint::new(0, 0)).norm();
    let tol = 1e-10 * bound.max(f64::MIN_POSITIVE);
    let adjoint = t.adjoint();
    let c = if bound > 0.0 {
        adjoint.hs_inner(t) / bound
    } else {
        ZERO
    };
    let residual = adjoint
        .add(&t.scaled(-c))
        .map(|r| r.hs_norm())
        .unwrap_or(f64::INFINITY);
    let unimodular_adjoint =
        bound > 0.0 && (c.norm() - 1.0).abs() <= 1e-10 && residual <= 1e-10 * t.hs_norm();
    CorrelationReport {
        max_abs: field.max_abs(),
        origin_saturates: bound > 0.0 && (at_origin - bound).abs() <= tol,
        unimodular_adjoint,
        bound,
        at_origin,
        field,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorClass {
    HilbertSchmidt,
    TotalCorrelation,
    Density,
}

impl OperatorClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorClass::HilbertSchmidt => "hilbert-schmidt",
            OperatorClass::TotalCorrelation => "total-correlation",
            OperatorClass::Density => "density",
        }
    }
}

impl fmt::Display for OperatorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorClass {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilbert-schmidt" => Ok(OperatorClass::HilbertSchmidt),
            "total-correlation" => Ok(OperatorClass::TotalCorrelation),
            "density" => Ok(OperatorClass::Density),
            other => Err(LabError::Unknown {
                kind: "operator class",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorBudget {
    pub max_iterations: usize,
    pub random_starts: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Dilations of the broad-symbol family used for the total correlation.
    pub family_size: usize,
}

impl Default for OperatorBudget {
    fn default() -> Self {
        OperatorBudget {
            max_iterations: 500,
            random_starts: 2,
            tolerance: 1e-10,
            seed: 0,
            family_size: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorConcentrationResult {
    pub class: OperatorClass,
    pub p: f64,
    /// Best value of the class's concentration ratio.
    pub value: f64,
    #[serde(skip)]
    pub optimizer: Option<Operator>,
    /// Same supremum over Weyl symbols (Hilbert–Schmidt class).
    pub symbol_route: Option<f64>,
    /// Signal-level `Λ_{p,Ω}(S)` (density class).
    pub signal_route: Option<f64>,
    pub upper_bound: f64,
    pub attained: bool,
    /// Leading singular values of the optimizer, normalized to unit Hilbert–Schmidt or trace norm.
    pub spectrum: Vec<f64>,
    pub family: Option<FamilyTrace>,
    pub start: String,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Operator-level concentration for the chosen class.
pub fn optimize_operator_concentration(
    window: Option<&OperatorWindow>,
    region: &Region,
    p: Exponent,
    class: OperatorClass,
    budget: &OperatorBudget,
) -> Result<OperatorConcentrationResult> {
    match class {
        OperatorClass::HilbertSchmidt => {
            let s = window.ok_or(LabError::MissingWindow("hilbert-schmidt"))?;
            hilbert_schmidt(s, region, p, budget)
        }
        OperatorClass::Density => {
            let s = window.ok_or(LabError::MissingWindow("density"))?;
            density(s, region, p, budget)
        }
        OperatorClass::TotalCorrelation => total_correlation_family(region, p, budget),
    }
}

fn check_window(s: &OperatorWindow, region: &Region) -> Result<()> {
    s.grid().ensure_same(region.grid())?;
    if s.is_zero() {
        return Err(LabError::ZeroWindow);
    }
    Ok(())
}

/// `p|Q|^{p-2}Q` on `Ω` (or its conjugate), zero elsewhere.
fn weights(q: &PhaseFunction, region: &Region, p: f64, conjugate: bool) -> PhaseFunction {
    let values = q
        .values()
        .iter()
        .zip(region.mask())
        .map(|(v, &inside)| {
            let a = v.norm();
            if !inside || a == 0.0 || (p < 2.0 && a < GRADIENT_FLOOR) {
                ZERO
            } else {
                let c = if conjugate { v.conj() } else { *v };
                c * (p * a.powf(p - 2.0))
            }
        })
        .collect();
    PhaseFunction::new(*q.grid(), values).expect("grid-sized field")
}

fn power_sum(q: &PhaseFunction, region: &Region, p: f64) -> f64 {
    let w = q.grid().phase_weight();
    q.values()
        .iter()
        .zip(region.mask())
        .filter(|(_, &b)| b)
        .map(|(v, _)| v.norm().powf(p))
        .sum::<f64>()
        * w
}

fn matrix_from(n: usize, x: &[Complex64]) -> CMatrix {
    CMatrix::from_column_slice(n, n, x)
}

fn random_matrix(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    })
}

fn random_field(grid: GridModel, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.n() * grid.n())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect()
}

/// `Σ_Ω w|tr(T α_z(S))|^p` over Hilbert–Schmidt `T`.
struct HilbertSchmidtObjective<'a> {
    reflected: Operator,
    adjoint: Operator,
    region: &'a Region,
    p: f64,
}

impl SphereObjective for HilbertSchmidtObjective<'_> {
    type State = PhaseFunction;

    fn evaluate(&self, x: &[Complex64]) -> (f64, PhaseFunction) {
        let grid = *self.region.grid();
        let t = Operator::from_matrix(grid, matrix_from(grid.n(), x)).expect("square");
        let q = qha::op_convolution_on(&t, &self.reflected, self.region).expect("same grid");
        (power_sum(&q, self.region, self.p), q)
    }

    fn gradient(&self, _: &[Complex64], q: &PhaseFunction) -> Vec<Complex64> {
        let coeffs = weights(q, self.region, self.p, false);
        let g = qha::fn_op_convolution(&coeffs, &self.adjoint).expect("same grid");
        g.matrix().as_slice().to_vec()
    }
}

/// `Σ_Ω w|(a * b)(z)|^p` over symbols `a`, with `b` the symbol of `Š`.
struct SymbolObjective<'a> {
    symbol: PhaseFunction,
    correlator: PhaseFunction,
    region: &'a Region,
    p: f64,
}

impl SphereObjective for SymbolObjective<'_> {
    type State = PhaseFunction;

    fn evaluate(&self, x: &[Complex64]) -> (f64, PhaseFunction) {
        let a = PhaseFunction::new(*self.region.grid(), x.to_vec()).expect("grid-sized field");
        let q = qha::symbol_convolution(&a, &self.symbol).expect("same grid");
        (power_sum(&q, self.region, self.p), q)
    }

    fn gradient(&self, _: &[Complex64], q: &PhaseFunction) -> Vec<Complex64> {
        let coeffs = weights(q, self.region, self.p, false);
        qha::symbol_convolution(&coeffs, &self.correlator)
            .expect("same grid")
            .values()
            .to_vec()
    }
}

/// `Σ_Ω w|tr(AA* α_z(S))|^p` over factors with `‖A‖_{S²} = 1`.
struct DensityObjective<'a> {
    window: &'a Operator,
    reflected: Operator,
    region: &'a Region,
    p: f64,
}

impl SphereObjective for DensityObjective<'_> {
    type State = PhaseFunction;

    fn evaluate(&self, x: &[Complex64]) -> (f64, PhaseFunction) {
        let grid = *self.region.grid();
        let a = matrix_from(grid.n(), x);
        let t = Operator::from_matrix(grid, &a * a.adjoint()).expect("square");
        let q = qha::op_convolution_on(&t, &self.reflected, self.region).expect("same grid");
        (power_sum(&q, self.region, self.p), q)
    }

    fn gradient(&self, x: &[Complex64], q: &PhaseFunction) -> Vec<Complex64> {
        let n = self.region.grid().n();
        let coeffs = weights(q, self.region, self.p, true);
        let m = qha::fn_op_convolution(&coeffs, self.window).expect("same grid");
        let sym = m.matrix() + m.matrix().adjoint();
        (sym * matrix_from(n, x)).as_slice().to_vec()
    }
}

struct Run {
    label: String,
    point: Vec<Complex64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

/// Parallel multistart; ties within [`TIE_TOLERANCE`] keep the earlier start.
fn multistart<O: SphereObjective + Sync>(
    objective: &O,
    starts: Vec<(String, Vec<Complex64>)>,
    settings: &AscentSettings,
) -> Result<Run> {
    let runs: Vec<Run> = starts
        .into_par_iter()
        .map(|(label, start)| {
            let out = sphere_ascent(objective, &start, settings);
            Run {
                label,
                point: out.point,
                objective: out.objective,
                iterations: out.iterations,
                converged: out.converged,
            }
        })
        .collect();
    let mut best: Option<Run> = None;
    for run in runs {
        if !run.objective.is_finite() {
            return Err(LabError::Numerical(format!(
                "start {} produced a non-finite value",
                run.label
            )));
        }
        best = match best {
            Some(b) if run.objective <= b.objective * (1.0 + TIE_TOLERANCE) => Some(b),
            _ => Some(run),
        };
    }
    best.ok_or_else(|| LabError::invalid("budget", "no starts requested"))
}

fn leading_singular_values(m: &CMatrix, count: usize, normalizer: f64) -> Vec<f64> {
    let mut s = linalg::singular_values(m);
    s.sort_by(|a, b| b.total_cmp(a));
    s.into_iter().take(count).map(|v| v / normalizer).collect()
}

/// Gaussian bump `e^{-π|z-w|²/λ²}` on the torus.
fn phase_bump(grid: GridModel, center: PhasePoint, lambda: f64) -> Vec<Complex64> {
    let n = grid.n() as i64;
    let scale = grid.delta();
    let dist = |a: usize, b: usize| {
        let d = (a as i64 - b as i64).rem_euclid(n);
        d.min(n - d) as f64 * scale
    };
    (0..grid.n())
        .flat_map(|m| (0..grid.n()).map(move |k| (m, k)))
        .map(|(m, k)| {
            let r2 = dist(m, center.m).powi(2) + dist(k, center.k).powi(2);
            Complex64::new((-std::f64::consts::PI * r2 / (lambda * lambda)).exp(), 0.0)
        })
        .collect()
}

fn hilbert_schmidt(
    s: &OperatorWindow,
    region: &Region,
    p: Exponent,
    budget: &OperatorBudget,
) -> Result<OperatorConcentrationResult> {
    check_window(s, region)?;
    let grid = *region.grid();
    let n = grid.n();
    let norm = s.hs_norm();
    let density_point = region.density_point();
    let shifted_adjoint = s
        .adjoint()
        .alpha(density_point)
        .scaled(Complex64::new(1.0 / norm, 0.0));
    let mut notes = Vec::new();
    if p.is_infinite() {
        let q = husimi_transform(&shifted_adjoint, s)?;
        let value = q.lp_norm(region, p);
        notes.push("optimizer α_w(S*)/‖S‖ at the density point".into());
        return Ok(OperatorConcentrationResult {
            class: OperatorClass::HilbertSchmidt,
            p: p.value(),
            value,
            symbol_route: Some(norm),
            signal_route: None,
            upper_bound: norm,
            attained: (value - norm).abs() <= 1e-8 * norm.max(1.0),
            spectrum: leading_singular_values(shifted_adjoint.matrix(), 4, 1.0),
            family: None,
            optimizer: Some(shifted_adjoint),
            start: "shifted-adjoint".into(),
            iterations: 0,
            converged: true,
            notes,
        });
    }
    let pv = p.value();
    let settings = AscentSettings {
        max_iterations: budget.max_iterations,
        tolerance: budget.tolerance,
        weight: 1.0,
        degree: pv,
    };

    let objective = HilbertSchmidtObjective {
        reflected: s.parity_reflect(),
        adjoint: s.adjoint(),
        region,
        p: pv,
    };
    let mut starts = vec![(
        "shifted-adjoint".to_string(),
        shifted_adjoint.matrix().as_slice().to_vec(),
    )];
    for i in 0..budget.random_starts {
        starts.push((
            format!("random-{i}"),
            random_matrix(n, budget.seed.wrapping_add(i as u64))
                .as_slice()
                .to_vec(),
        ));
    }
    let best = multistart(&objective, starts, &settings)?;

    let symbol = qha::weyl_symbol(&s.parity_reflect());
    let correlator = symbol.reflected().map(|v| v.conj());
    let symbol_objective = SymbolObjective {
        symbol,
        correlator,
        region,
        p: pv,
    };
    let mut symbol_starts = vec![(
        "phase-bump".to_string(),
        phase_bump(grid, density_point, 1.0),
    )];
    for i in 0..budget.random_starts {
        symbol_starts.push((
            format!("random-{i}"),
            random_field(grid, budget.seed.wrapping_add(1000 + i as u64)),
        ));
    }
    let symbol_settings = AscentSettings {
        weight: grid.phase_weight(),
        ..settings
    };
    let symbol_best = multistart(&symbol_objective, symbol_starts, &symbol_settings)?;

    let optimizer = Operator::from_matrix(grid, matrix_from(n, &best.point))?;
    let upper_bound = norm * region.measure().powf(1.0 / pv);
    Ok(OperatorConcentrationResult {
        class: OperatorClass::HilbertSchmidt,
        p: pv,
        value: best.objective.powf(1.0 / pv),
        symbol_route: Some(symbol_best.objective.powf(1.0 / pv)),
        signal_route: None,
        upper_bound,
        attained: true,
        spectrum: leading_singular_values(optimizer.matrix(), 4, 1.0),
        family: None,
        optimizer: Some(optimizer),
        start: best.label,
        iterations: best.iterations,
        converged: best.converged,
        notes,
    })
}

fn density(
    s: &OperatorWindow,
    region: &Region,
    p: Exponent,
    budget: &OperatorBudget,
) -> Result<OperatorConcentrationResult> {
    check_window(s, region)?;
    let grid = *region.grid();
    let n = grid.n();
    let problem = ConcentrationProblem::new(s.clone(), region.clone(), p)?;
    let signal_budget = OptimizerBudget {
        max_iterations: budget.max_iterations,
        tolerance: budget.tolerance,
        seed: budget.seed,
        ..Default::default()
    };
    let signal = concentration::optimize_concentration(&problem, &signal_budget)?;
    let upper_bound = qha::numerical_radius(s)
        * if p.is_infinite() {
            1.0
        } else {
            region.measure().powf(1.0 / p.value())
        };

    if p.is_infinite() {
        let nr = linalg::numerical_radius(s.matrix());
        let g = Signal::new(grid, nr.vector.iter().copied().collect())?
            .normalized()?
            .tf_shift(region.density_point());
        let optimizer = Operator::rank_one(&g, &g)?;
        let value = husimi_transform(&optimizer, s)?.lp_norm(region, p);
        return Ok(OperatorConcentrationResult {
            class: OperatorClass::Density,
            p: p.value(),
            value,
            symbol_route: None,
            signal_route: Some(signal.value),
            upper_bound: nr.value,
            attained: true,
            spectrum: leading_singular_values(optimizer.matrix(), 4, 1.0),
            family: None,
            optimizer: Some(optimizer),
            start: "numerical-radius-vector".into(),
            iterations: 0,
            converged: true,
            notes: vec!["value is the numerical radius w(S)".into()],
        });
    }
    let pv = p.value();
    let objective = DensityObjective {
        window: s.operator(),
        reflected: s.parity_reflect(),
        region,
        p: pv,
    };
    let mut starts = Vec::new();
    for i in 0..budget.random_starts.max(1) {
        starts.push((
            format!("random-{i}"),
            random_matrix(n, budget.seed.wrapping_add(2000 + i as u64))
                .as_slice()
                .to_vec(),
        ));
    }
    let settings = AscentSettings {
        max_iterations: budget.max_iterations,
        tolerance: budget.tolerance,
        weight: 1.0,
        degree: 2.0 * pv,
    };
    let best = multistart(&objective, starts, &settings)?;
    let optimizer =
        DensityOperator::from_factor(grid, &matrix_from(n, &best.point))?.into_operator();
    let value = husimi_transform(&optimizer, s)?.lp_norm(region, p);
    Ok(OperatorConcentrationResult {
        class: OperatorClass::Density,
        p: pv,
        value,
        symbol_route: None,
        signal_route: Some(signal.value),
        upper_bound,
        attained: true,
        spectrum: leading_singular_values(optimizer.matrix(), 4, 1.0),
        family: None,
        optimizer: Some(optimizer),
        start: best.label,
        iterations: best.iterations,
        converged: best.converged,
        notes: Vec::new(),
    })
}

/// Weyl quantization of the broad Gaussian symbol `e^{-π|z-w|²/λ²}`.
pub fn broad_symbol_operator(grid: GridModel, center: PhasePoint, lambda: f64) -> Result<Operator> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LabError::invalid("lambda", "dilation must be positive"));
    }
    let symbol = PhaseFunction::new(grid, phase_bump(grid, center, lambda))?;
    Ok(qha::weyl_quantize(&symbol))
}

/// `‖T̃‖_{L^p(Ω)} / ‖T‖²_{S²}`.
pub fn total_correlation_ratio(t: &Operator, region: &Region, p: Exponent) -> Result<f64> {
    let field = qha::op_convolution_on(t, &t.parity_reflect(), region)?;
    Ok(field.lp_norm(region, p) / t.hs_norm().powi(2))
}

/// The total-correlation supremum is `|Ω|^{1/p}`; broad Gaussian symbols approach it without
/// reaching it.
fn total_correlation_family(
    region: &Region,
    p: Exponent,
    budget: &OperatorBudget,
) -> Result<OperatorConcentrationResult> {
    let grid = *region.grid();
    let count = budget.family_size.max(3);
    let lambda_max = 0.7 * grid.half_width();
    if lambda_max <= 1.0 {
        return Err(LabError::GridTooSmall(format!(
            "half width {:.3} leaves no room for broad symbols",
            grid.half_width()
        )));
    }
    let lambdas: Vec<f64> = (0..count)
        .map(|i| lambda_max.powf(i as f64 / (count - 1) as f64))
        .collect();
    let center = region.density_point();
    let values = lambdas
        .par_iter()
        .map(|&lambda| {
            total_correlation_ratio(&broad_symbol_operator(grid, center, lambda)?, region, p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let upper_bound = if p.is_infinite() {
        1.0
    } else {
        region.measure().powf(1.0 / p.value())
    };
    let tail = values.last().copied().unwrap_or(0.0);
    let best = values.iter().copied().fold(f64::MIN, f64::max);
    let growing = values.windows(2).all(|w| w[1] >= w[0] - 1e-12) && tail > values[0];
    let attained = (best - upper_bound).abs() <= 1e-10 * upper_bound;
    let mut notes = vec![format!("upper bound |Ω|^(1/p) = {upper_bound:.12}")];
    if !attained {
        notes.push(if growing {
            "family increases toward the bound without reaching it: supremum not attained".into()
        } else {
            "family is not monotone on this grid".into()
        });
    }
    Ok(OperatorConcentrationResult {
        class: OperatorClass::TotalCorrelation,
        p: p.value(),
        value: best,
        symbol_route: None,
        signal_route: None,
        upper_bound,
        attained,
        spectrum: Vec::new(),
        family: Some(FamilyTrace {
            family: "broad-gaussian-symbol".into(),
            parameters: lambdas,
            values,
            tail,
        }),
        optimizer: None,
        start: "broad-gaussian-symbol".into(),
        iterations: 0,
        converged: true,
        notes,
    })
}

/// Field `(w, z) ↦ F(w, z)` on double phase space, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePhaseFunction {
    grid: GridModel,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubleSummary {
    pub n: usize,
    pub l2_norm: f64,
    pub max_abs: f64,
    pub argmax: [usize; 4],
}

impl DoublePhaseFunction {
    pub fn new(grid: GridModel, values: Vec<Complex64>) -> Result<Self> {
        let n = grid.n();
        if values.len() != n.pow(4) {
            return Err(LabError::DimensionMismatch(format!(
                "{} values, expected {}",
                values.len(),
                n.pow(4)
            )));
        }
        Ok(DoublePhaseFunction { grid, values })
    }

    pub fn grid(&self) -> &GridModel {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn index(&self, w: PhasePoint, z: PhasePoint) -> usize {
        let n = self.grid.n();
        ((w.m * n + w.k) * n + z.m) * n + z.k
    }

    pub fn get(&self, w: PhasePoint, z: PhasePoint) -> Complex64 {
        self.values[self.index(w, z)]
    }

    /// Cell weight of the double grid, the square of the single-grid weight.
    pub fn cell_weight(&self) -> f64 {
        self.grid.phase_weight().powi(2)
    }

    pub fn inner(&self, other: &DoublePhaseFunction) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.cell_weight()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.sqrt()
    }

    /// `‖F‖_{L^p(Ω₁ × Ω₂)}`.
    pub fn product_lp_norm(&self, first: &Region, second: &Region, p: Exponent) -> f64 {
        let n = self.grid.n();
        let inside = (0..n * n).filter(|&i| first.mask()[i]).flat_map(|i| {
            (0..n * n)
                .filter(|&j| second.mask()[j])
                .map(move |j| i * n * n + j)
        });
        let mags = inside.map(|i| self.values[i].norm());
        if p.is_infinite() {
            mags.fold(0.0, f64::max)
        } else {
            (mags.map(|a| a.powf(p.value())).sum::<f64>() * self.cell_weight())
                .powf(1.0 / p.value())
        }
    }

    pub fn summary(&self) -> DoubleSummary {
        let n = self.grid.n();
        let (best, max_abs) = self
            .values
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| {
                if v.norm() > bv {
                    (i, v.norm())
                } else {
                    (bi, bv)
                }
            });
        let argmax = [
            best / n.pow(3),
            (best / n.pow(2)) % n,
            (best / n) % n,
            best % n,
        ];
        DoubleSummary {
            n,
            l2_norm: self.l2_norm(),
            max_abs,
            argmax,
        }
    }
}

/// `T π(w)`, entrywise `T[a, b+m] e^{2πik(b+m)/n}`.
fn times_shift(t: &CMatrix, w: PhasePoint, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| {
        let c = (b + w.m) % n;
        t[(a, c)]
            * Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * ((w.k * c) % n) as f64 / n as f64,
            )
    })
}

/// `M π(w)*`, entrywise `M[a, b-m] e^{-2πikb/n}`.
fn times_shift_adjoint(m: &CMatrix, w: PhasePoint, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| {
        m[(a, (b + n - w.m) % n)]
            * Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * ((w.k * b) % n) as f64 / n as f64,
            )
    })
}

/// Polarized Cohen class `Q_S T(w, z) = ⟨T, π(z) S π(w)*⟩_{S²}`, limited to
/// `n ≤` [`POLARIZED_MAX_N`].
pub fn polarized_cohen(t: &Operator, s: &Operator) -> Result<DoublePhaseFunction> {
    if t.n() > POLARIZED_MAX_N {
        return Err(LabError::invalid(
            "n",
            format!("polarized Cohen class is stored densely only for n <= {POLARIZED_MAX_N}; use the unbounded variant"),
        ));
    }
    polarized_cohen_unbounded(t, s)
}

/// [`polarized_cohen`] without the size guard; storage grows as `n⁴`.
pub fn polarized_cohen_unbounded(t: &Operator, s: &Operator) -> Result<DoublePhaseFunction> {
    t.grid().ensure_same(s.grid())?;
    let grid = *t.grid();
    let n = grid.n();
    let dft = DftPair::new(n);
    let s_adjoint = s.matrix().adjoint();
    // Q(w, z) = tr(π(z)* R_w) with R_w = T π(w) S*; each row of z is one DFT of a diagonal.
    let blocks: Vec<Vec<Complex64>> = (0..n * n)
        .into_par_iter()
        .map(|wi| {
            let w = PhasePoint::new(wi / n, wi % n);
            let r = times_shift(t.matrix(), w, n) * &s_adjoint;
            let mut block = Vec::with_capacity(n * n);
            for m in 0..n {
                let mut buf: Vec<Complex64> = (0..n).map(|j| r[(j, (j + n - m) % n)]).collect();
                dft.forward(&mut buf);
                block.extend(buf);
            }
            block
        })
        .collect();
    DoublePhaseFunction::new(grid, blocks.concat())
}

/// Adjoint `Q_S* F = Σ_{w,z} (1/n²) F(w, z) π(z) S π(w)*`.
pub fn polarized_adjoint(field: &DoublePhaseFunction, s: &Operator) -> Result<Operator> {
    field.grid().ensure_same(s.grid())?;
    let grid = *s.grid();
    let n = grid.n();
    let dft = DftPair::new(n);
    let weight = Complex64::new(field.cell_weight(), 0.0);
    let total = (0..n * n)
        .into_par_iter()
        .map(|wi| {
            let w = PhasePoint::new(wi / n, wi % n);
            // X_w = Σ_z F(w, z) π(z) has X_w[j, j-m] = Σ_k F(w, (m, k)) e^{2πikj/n}.
            let mut x = CMatrix::zeros(n, n);
            for m in 0..n {
                let mut buf: Vec<Complex64> = (0..n)
                    .map(|k| field.get(w, PhasePoint::new(m, k)))
                    .collect();
                dft.inverse(&mut buf);
                for (j, v) in buf.into_iter().enumerate() {
                    x[(j, (j + n - m) % n)] = v;
                }
            }
            times_shift_adjoint(&(x * s.matrix()), w, n)
        })
        .reduce(|| CMatrix::zeros(n, n), |a, b| a + b);
    Operator::from_matrix(grid, total * weight)
}
