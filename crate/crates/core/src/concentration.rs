//! Concentration of Cohen-class distributions on a region: the functional
//! `J(f) = ‖Q_S f‖_{L^p(Ω)}`, its supremum over unit signals, escape-family estimates of the
//! essential value, and the strict-gap diagnosis.
//!
//! Solvers are strategies behind [`ConcentrationStrategy`], looked up by name in a
//! [`StrategyRegistry`]. Without an explicit choice the registry dispatches on the problem:
//! the localization eigenproblem for positive windows at `p = 1`, the numerical radius at
//! `p = ∞`, and multistart Riemannian ascent otherwise.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ascent::{sphere_ascent, AscentSettings, SphereObjective};
use crate::error::{LabError, Result};
use crate::gap_criteria;
use crate::linalg::{self, CMatrix, DftPair, ZERO};
use crate::operator::Operator;
use crate::phase_space::{GridModel, PhasePoint, Region, Signal};
use crate::qha::{self, Exponent};
use crate::windows::{OperatorWindow, Structure};

/// Points with `|Q_S f(z)|` below this are dropped from the gradient when `p < 2`.
pub const GRADIENT_FLOOR: f64 = 1e-12;
/// Multistart values closer than this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-10;
/// Relative margin separating a value from an essential-level bound.
pub const GAP_MARGIN: f64 = 1e-3;
/// Escape headroom: the last shift must sit this many region diameters away from `Ω`.
pub const ESCAPE_HEADROOM: f64 = 5.0;
/// Relative rise below which an escape family counts as flat.
pub const GROWTH_FLOOR: f64 = 1e-9;

/// The triple `(S, Ω, p)`.
#[derive(Debug, Clone)]
pub struct ConcentrationProblem {
    pub window: OperatorWindow,
    pub region: Region,
    pub p: Exponent,
}

impl ConcentrationProblem {
    pub fn new(window: OperatorWindow, region: Region, p: Exponent) -> Result<Self> {
        window.grid().ensure_same(region.grid())?;
        Ok(ConcentrationProblem { window, region, p })
    }

    pub fn grid(&self) -> &GridModel {
        self.window.grid()
    }
}

/// `J(f) = ‖Q_S f‖_{L^p(Ω)}`, homogeneous of degree two in `f`.
pub fn concentration_functional(problem: &ConcentrationProblem, f: &Signal) -> Result<f64> {
    problem.grid().ensure_same(f.grid())?;
    if f.norm() == 0.0 {
        return Err(LabError::ZeroSignal);
    }
    let eval = Evaluator::new(problem);
    Ok(eval.value(&eval.field(f)))
}

/// Budget and start configuration for the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerBudget {
    pub max_iterations: usize,
    pub random_starts: usize,
    pub gaussian_starts: usize,
    pub hermite_starts: usize,
    /// Leading eigenvectors of `H_{Ω,S}` used as starts; `None` means 3 when `n ≤ 256`.
    pub eigen_starts: Option<usize>,
    /// Relative stationarity tolerance on the Riemannian gradient.
    pub tolerance: f64,
    pub seed: u64,
    /// Strategy name; `None` dispatches on the problem.
    pub strategy: Option<String>,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        OptimizerBudget {
            max_iterations: 500,
            random_starts: 4,
            gaussian_starts: 2,
            hermite_starts: 2,
            eigen_starts: None,
            tolerance: 1e-10,
            seed: 0,
            strategy: None,
        }
    }
}

impl OptimizerBudget {
    fn eigen_start_count(&self, n: usize) -> usize {
        self.eigen_starts.unwrap_or(if n <= 256 { 3 } else { 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    #[serde(rename = "J")]
    pub value: f64,
    pub step: f64,
}

/// Output of one strategy run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: f64,
    pub optimizer: Signal,
    pub iterations: usize,
    pub converged: bool,
    pub start: String,
    pub trace: Vec<TraceEntry>,
}

pub trait ConcentrationStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, problem: &ConcentrationProblem) -> bool;
    fn solve(&self, problem: &ConcentrationProblem, budget: &OptimizerBudget) -> Result<Solution>;
}

/// Name-keyed collection of strategies.
pub struct StrategyRegistry {
    entries: BTreeMap<&'static str, Box<dyn ConcentrationStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut registry = StrategyRegistry {
            entries: BTreeMap::new(),
        };
        registry.register(Box::new(EigenLocalization));
        registry.register(Box::new(NumericalRadiusRoute));
        registry.register(Box::new(ProjectedAscent));
        registry
    }
}

impl StrategyRegistry {
    pub fn register(&mut self, strategy: Box<dyn ConcentrationStrategy>) {
        self.entries.insert(strategy.name(), strategy);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn ConcentrationStrategy> {
        self.entries
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| LabError::Unknown {
                kind: "strategy",
                name: name.into(),
            })
    }

    /// The strategy named in the budget, or the one the problem calls for.
    pub fn select(
        &self,
        problem: &ConcentrationProblem,
        budget: &OptimizerBudget,
    ) -> Result<&dyn ConcentrationStrategy> {
        let name = match &budget.strategy {
            Some(name) => name.as_str(),
            None if problem.p.is_infinite() => NumericalRadiusRoute.name(),
            None if problem.p.value() == 1.0 && problem.window.flags().positive => {
                EigenLocalization.name()
            }
            None => ProjectedAscent.name(),
        };
        let strategy = self.get(name)?;
        if !strategy.supports(problem) {
            return Err(LabError::invalid(
                "strategy",
                format!("`{name}` does not apply to this problem"),
            ));
        }
        Ok(strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedGap,
    EmpiricalGap,
    ThresholdSuspected,
    UnattainedSuspected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CertifiedGap => "certified-gap",
            Verdict::EmpiricalGap => "empirical-gap",
            Verdict::ThresholdSuspected => "threshold-suspected",
            Verdict::UnattainedSuspected => "unattained-suspected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBounds {
    /// `|Ω|^{1/p}‖S‖_B`, bounds the value.
    pub universal: f64,
    /// `‖H_{Ω,S^p}‖^{1/p}` for positive windows, bounds the value.
    pub jensen: Option<f64>,
    /// `C_p·min{2|Ω|^{1/p}, 2(2p)^{-1/p}}` for the Wigner window, bounds the essential value.
    #[serde(rename = "wigner_appA")]
    pub wigner_essential: Option<f64>,
}

/// Values of `J` along one escape family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyTrace {
    pub family: String,
    pub parameters: Vec<f64>,
    pub values: Vec<f64>,
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationResult {
    pub value: f64,
    #[serde(skip)]
    pub optimizer: Signal,
    /// Lower estimate of the essential value; 0 when no family was run.
    pub ess_lower: f64,
    pub upper_bounds: UpperBounds,
    pub verdict: Option<Verdict>,
    pub strategy: String,
    pub start: String,
    pub iterations: usize,
    pub converged: bool,
    pub families: Vec<FamilyTrace>,
    pub notes: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

/// Best value of `J` over unit signals found by the selected strategy.
pub fn optimize_concentration(
    problem: &ConcentrationProblem,
    budget: &OptimizerBudget,
) -> Result<ConcentrationResult> {
    optimize_with(&StrategyRegistry::default(), problem, budget)
}

pub fn optimize_with(
    registry: &StrategyRegistry,
    problem: &ConcentrationProblem,
    budget: &OptimizerBudget,
) -> Result<ConcentrationResult> {
    if problem.window.is_zero() {
        return Err(LabError::ZeroWindow);
    }
    let strategy = registry.select(problem, budget)?;
    let solution = strategy.solve(problem, budget)?;
    Ok(ConcentrationResult {
        value: solution.value,
        optimizer: solution.optimizer,
        ess_lower: 0.0,
        upper_bounds: upper_bounds(problem)?,
        verdict: None,
        strategy: strategy.name().into(),
        start: solution.start,
        iterations: solution.iterations,
        converged: solution.converged,
        families: Vec::new(),
        notes: Vec::new(),
        trace: solution.trace,
    })
}

/// `H_{Ω,S}` with its eigenvalues in descending order (empty unless `S` is hermitian).
pub fn localization_spectrum(
    region: &Region,
    window: &OperatorWindow,
) -> Result<(Operator, Vec<f64>)> {
    let h = qha::localization_operator(region, window)?;
    let spectrum = if window.flags().hermitian {
        linalg::hermitian_eigen(&linalg::hermitian_part(h.matrix())).values
    } else {
        Vec::new()
    };
    Ok((h, spectrum))
}

pub fn universal_bound(problem: &ConcentrationProblem) -> f64 {
    problem.p.root(problem.region.measure()) * problem.window.norm()
}

/// Largest `n` at which the Jensen bound is computed (two dense eigendecompositions).
pub const JENSEN_MAX_N: usize = 256;

/// `‖H_{Ω,S^p}‖^{1/p}` through the functional calculus of a positive window.
pub fn jensen_bound(problem: &ConcentrationProblem) -> Result<Option<f64>> {
    if !problem.window.flags().positive
        || problem.p.is_infinite()
        || problem.grid().n() > JENSEN_MAX_N
    {
        return Ok(None);
    }
    let p = problem.p.value();
    let eig = linalg::hermitian_eigen(&linalg::hermitian_part(problem.window.matrix()));
    let n = problem.grid().n();
    let powered = CMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|r| {
                eig.vectors[(i, r)] * eig.values[r].max(0.0).powf(p) * eig.vectors[(j, r)].conj()
            })
            .sum()
    });
    let sp = Operator::from_matrix(*problem.grid(), powered)?;
    let h = qha::localization_operator(&problem.region, &sp)?;
    let top = linalg::hermitian_eigen(&linalg::hermitian_part(h.matrix())).values[0];
    Ok(Some(top.max(0.0).powf(1.0 / p)))
}

/// Certified bound on the essential value of the Wigner window (continuum mode, `p ≥ 2`).
pub fn wigner_essential_bound(problem: &ConcentrationProblem) -> Option<f64> {
    let p = problem.p.value();
    if problem.window.structure() != Structure::Wigner
        || !problem.grid().is_continuum()
        || p.is_infinite()
        || p < 2.0
    {
        return None;
    }
    let c_p = gap_criteria::cp_power(p).powf(1.0 / p);
    let area = problem.region.measure();
    Some(c_p * (2.0 * area.powf(1.0 / p)).min(2.0 * (2.0 * p).powf(-1.0 / p)))
}

pub fn upper_bounds(problem: &ConcentrationProblem) -> Result<UpperBounds> {
    Ok(UpperBounds {
        universal: universal_bound(problem),
        jensen: jensen_bound(problem)?,
        wigner_essential: wigner_essential_bound(problem),
    })
}

/// Normalized signals emulating weakly null sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum EscapeFamily {
    /// `π(z_j) profile` with `z_j` the grid point nearest `r_j·direction`.
    Shifted {
        profile: Signal,
        direction: (f64, f64),
        magnitudes: Vec<f64>,
    },
    /// Dilated Gaussians `f_λ` centred at `center`.
    Dilated {
        center: PhasePoint,
        lambdas: Vec<f64>,
    },
    /// Hermite functions of growing order moved to `center`.
    Hermite {
        center: PhasePoint,
        indices: Vec<usize>,
    },
}

impl EscapeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            EscapeFamily::Shifted { .. } => "shifted",
            EscapeFamily::Dilated { .. } => "dilated",
            EscapeFamily::Hermite { .. } => "hermite",
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        match self {
            EscapeFamily::Shifted { magnitudes, .. } => magnitudes.clone(),
            EscapeFamily::Dilated { lambdas, .. } => lambdas.clone(),
            EscapeFamily::Hermite { indices, .. } => indices.iter().map(|&j| j as f64).collect(),
        }
    }

    fn shift_point(grid: &GridModel, direction: (f64, f64), r: f64) -> PhasePoint {
        let norm = direction.0.hypot(direction.1);
        grid.nearest_point(r * direction.0 / norm, r * direction.1 / norm)
    }

    /// Checks ordering and, for shifts, that the last member has left `Ω` far enough behind.
    pub fn validate(&self, region: &Region) -> Result<()> {
        let params = self.parameters();
        if params.len() < 3 {
            return Err(LabError::invalid(
                "family",
                "an escape family needs at least 3 members",
            ));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::invalid(
                "family",
                "family parameters must increase strictly",
            ));
        }
        if let EscapeFamily::Shifted {
            direction,
            magnitudes,
            ..
        } = self
        {
            if direction.0 == 0.0 && direction.1 == 0.0 {
                return Err(LabError::invalid(
                    "direction",
                    "shift direction must be nonzero",
                ));
            }
            let last = Self::shift_point(
                region.grid(),
                *direction,
                *magnitudes.last().expect("checked"),
            );
            let distance = region.distance_to(last);
            let needed = ESCAPE_HEADROOM * region.diameter();
            if distance < needed {
                return Err(LabError::GridTooSmall(format!(
                    "last shift is {distance:.3} from the region, need {needed:.3} at n={}",
                    region.grid().n()
                )));
            }
        }
        Ok(())
    }

    pub fn members(&self, grid: GridModel) -> Result<Vec<Signal>> {
        match self {
            EscapeFamily::Shifted {
                profile,
                direction,
                magnitudes,
            } => {
                grid.ensure_same(profile.grid())?;
                let profile = profile.normalized()?;
                Ok(magnitudes
                    .iter()
                    .map(|&r| profile.tf_shift(Self::shift_point(&grid, *direction, r)))
                    .collect())
            }
            EscapeFamily::Dilated { center, lambdas } => lambdas
                .iter()
                .map(|&l| Signal::gaussian(grid, l, *center))
                .collect(),
            EscapeFamily::Hermite { center, indices } => indices
                .iter()
                .map(|&j| Ok(Signal::hermite(grid, j)?.tf_shift(*center)))
                .collect(),
        }
    }
}

/// Shifted Gaussians along the diagonal, dilated Gaussians modulated away from `Ω` and high
/// Hermite functions, all sized to the grid. The shifted family is omitted (with a note) when the grid lacks headroom.
pub fn default_escape_families(region: &Region) -> Result<(Vec<EscapeFamily>, Vec<String>)> {
    let grid = *region.grid();
    if !grid.is_continuum() {
        return Err(LabError::ContinuumRequired);
    }
    let n = grid.n();
    let center = region.density_point();
    let mut families = Vec::new();
    let mut notes = Vec::new();
    let reach = 0.98 * grid.half_width() * 2.0_f64.sqrt();
    let shifted = EscapeFamily::Shifted {
        profile: Signal::standard_gaussian(grid)?,
        direction: (1.0, 1.0),
        magnitudes: (1..=8).map(|i| reach * i as f64 / 8.0).collect(),
    };
    match shifted.validate(region) {
        Ok(()) => families.push(shifted),
        Err(LabError::GridTooSmall(msg)) => notes.push(format!(
            "shifted family skipped: grid too small to emulate escape: {msg}"
        )),
        Err(e) => return Err(e),
    }
    // Wide in time and narrow in frequency, so modulate far along the frequency axis.
    let lambda_max = 0.37 * grid.half_width();
    if lambda_max > 1.5 {
        let count = 6;
        let lambdas = (0..count)
            .map(|i| lambda_max.powf(i as f64 / (count - 1) as f64))
            .collect();
        let (cx, cy) = grid.coordinates(center);
        let far = grid.nearest_point(cx, cy + 0.8 * grid.half_width());
        families.push(EscapeFamily::Dilated {
            center: far,
            lambdas,
        });
    }
    let top = n / 4 - 1;
    if top >= 8 {
        let indices: Vec<usize> = (0..6).map(|i| top * (i + 1) / 6).collect();
        families.push(EscapeFamily::Hermite { center, indices });
    }
    Ok((families, notes))
}

#[derive(Debug, Clone)]
pub struct EssentialEstimate {
    /// Maximum over families of the mean of the last three values: a lower bound only.
    pub value: f64,
    pub families: Vec<FamilyTrace>,
    /// Member attaining the largest value of `J` seen along any family.
    pub best_member: Option<(f64, Signal)>,
}

/// Lower estimate of `Λ^ess` from the tails of escape families.
pub fn essential_value_estimate(
    problem: &ConcentrationProblem,
    families: &[EscapeFamily],
) -> Result<EssentialEstimate> {
    if families.is_empty() {
        return Err(LabError::invalid(
            "families",
            "at least one escape family is required",
        ));
    }
    let eval = Evaluator::new(problem);
    let mut traces = Vec::new();
    let mut best: Option<(f64, Signal)> = None;
    for family in families {
        family.validate(&problem.region)?;
        let members = family.members(*problem.grid())?;
        let values: Vec<f64> = members.iter().map(|f| eval.value(&eval.field(f))).collect();
        for (v, f) in values.iter().zip(&members) {
            if best.as_ref().is_none_or(|(b, _)| v > b) {
                best = Some((*v, f.clone()));
            }
        }
        let tail = values[values.len() - 3..].iter().sum::<f64>() / 3.0;
        traces.push(FamilyTrace {
            family: family.name().into(),
            parameters: family.parameters(),
            values,
            tail,
        });
    }
    let value = traces.iter().map(|t| t.tail).fold(f64::MIN, f64::max);
    Ok(EssentialEstimate {
        value,
        families: traces,
        best_member: best,
    })
}

/// Runs the optimizer and the default escape families, then classifies the gap.
///
/// A certified bound on the essential value (zero for compact windows, the Wigner bound for
/// `p ≥ 2`) below `value − margin` gives `certified-gap`. Otherwise a family that rises
/// monotonically into the margin gives `unattained-suspected`, a family tail below the margin
/// gives `empirical-gap`, and anything else `threshold-suspected`.
pub fn strict_gap_check(
    problem: &ConcentrationProblem,
    budget: &OptimizerBudget,
) -> Result<ConcentrationResult> {
    let mut result = optimize_concentration(problem, budget)?;
    let (families, notes) = default_escape_families(&problem.region)?;
    result.notes = notes;
    let ess = if families.is_empty() {
        result.notes.push("no escape family fits this grid".into());
        None
    } else {
        Some(essential_value_estimate(problem, &families)?)
    };
    if let Some(ess) = &ess {
        result.ess_lower = ess.value;
        result.families = ess.families.clone();
        if let Some((v, f)) = &ess.best_member {
            if *v > result.value {
                result.value = *v;
                result.optimizer = f.clone();
                result.start = "escape-family".into();
            }
        }
    }
    let margin = GAP_MARGIN * result.value;
    let certified = if problem.window.structure().is_compact() {
        Some(0.0)
    } else {
        result.upper_bounds.wigner_essential
    };
    let floor = GROWTH_FLOOR * result.value;
    let growing = result.families.iter().any(|t| {
        let tail = &t.values[t.values.len() - 3..];
        let last = tail[2];
        last - t.values[0] > floor
            && tail.windows(2).all(|w| w[1] >= w[0] - floor)
            && last >= result.value - margin
    });
    result.verdict = Some(if certified.is_some_and(|b| b < result.value - margin) {
        Verdict::CertifiedGap
    } else if growing {
        Verdict::UnattainedSuspected
    } else if result.ess_lower < result.value - margin {
        Verdict::EmpiricalGap
    } else {
        Verdict::ThresholdSuspected
    });
    Ok(result)
}

/// `‖c + ρ Q_{S₀}u‖_{L^p(Ω)}` for a unit `u`.
pub fn perturbation_profile(
    c: f64,
    s0: &Operator,
    region: &Region,
    p: Exponent,
    u: &Signal,
    rho: f64,
) -> Result<f64> {
    let u = u.normalized()?;
    let q = qha::cohen_transform(s0, &u)?;
    Ok(q.map(|v| Complex64::new(c, 0.0) + v * rho)
        .lp_norm(region, p))
}

/// `max ‖c + ρ Q_{S₀}u‖_{L^p(Ω)}` over `ρ` on the given nodes and `u` among the leading
/// eigenvectors of `H_{Ω,S₀}`.
pub fn perturbation_eigen_route(
    c: f64,
    s0: &OperatorWindow,
    region: &Region,
    p: Exponent,
    vectors: usize,
    rho_nodes: &[f64],
) -> Result<f64> {
    let h = qha::localization_operator(region, s0)?;
    let eig = linalg::hermitian_eigen(&linalg::hermitian_part(h.matrix()));
    let grid = *s0.grid();
    let mut best = f64::MIN;
    for r in 0..vectors.min(grid.n()) {
        let u = Signal::new(grid, eig.vectors.column(r).iter().copied().collect())?;
        for &rho in rho_nodes {
            best = best.max(perturbation_profile(c, s0, region, p, &u, rho)?);
        }
    }
    Ok(best)
}

/// Row-restricted evaluation of `Q_S f` on `Ω` and of the ascent gradient.
struct Evaluator<'a> {
    problem: &'a ConcentrationProblem,
    adjoint: std::sync::OnceLock<Operator>,
    rows: Vec<usize>,
    dft: DftPair,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a ConcentrationProblem) -> Self {
        Evaluator {
            problem,
            adjoint: std::sync::OnceLock::new(),
            rows: problem.region.rows(),
            dft: DftPair::new(problem.grid().n()),
        }
    }

    fn field(&self, f: &Signal) -> Vec<Vec<Complex64>> {
        qha::cohen_rows(self.problem.window.operator(), f, f, &self.rows, &self.dft)
    }

    fn masked<'b>(&'b self, q: &'b [Vec<Complex64>]) -> impl Iterator<Item = Complex64> + 'b {
        self.rows.iter().zip(q).flat_map(move |(&m, row)| {
            row.iter()
                .zip(self.problem.region.row_mask(m))
                .filter(|(_, &b)| b)
                .map(|(v, _)| *v)
        })
    }

    /// `Σ_Ω w|Q|^p` (finite `p`).
    fn power_sum(&self, q: &[Vec<Complex64>]) -> f64 {
        let p = self.problem.p.value();
        self.masked(q).map(|v| v.norm().powf(p)).sum::<f64>() * self.problem.grid().phase_weight()
    }

    fn value(&self, q: &[Vec<Complex64>]) -> f64 {
        if self.problem.p.is_infinite() {
            self.masked(q).map(|v| v.norm()).fold(0.0, f64::max)
        } else {
            self.power_sum(q).powf(1.0 / self.problem.p.value())
        }
    }

    /// Gradient of `Σ_Ω w|Q|^p` for the real inner product `Re⟨·,·⟩`.
    fn gradient(&self, f: &Signal, q: &[Vec<Complex64>]) -> Vec<Complex64> {
        let p = self.problem.p.value();
        let w = self.problem.grid().phase_weight();
        let coeffs: Vec<Vec<Complex64>> = self
            .rows
            .iter()
            .zip(q)
            .map(|(&m, row)| {
                row.iter()
                    .zip(self.problem.region.row_mask(m))
                    .map(|(v, &inside)| {
                        let a = v.norm();
                        if !inside || (p < 2.0 && a < GRADIENT_FLOOR) || a == 0.0 {
                            ZERO
                        } else {
                            v.conj() * (w * p * a.powf(p - 2.0))
                        }
                    })
                    .collect()
            })
            .collect();
        let conj: Vec<Vec<Complex64>> = coeffs
            .iter()
            .map(|r| r.iter().map(|c| c.conj()).collect())
            .collect();
        let s = self.problem.window.operator();
        let adjoint = self.adjoint.get_or_init(|| s.adjoint());
        let a = qha::apply_field(s, &self.rows, &coeffs, f, &self.dft);
        let b = qha::apply_field(adjoint, &self.rows, &conj, f, &self.dft);
        a.into_iter().zip(b).map(|(x, y)| x + y).collect()
    }
}

impl SphereObjective for Evaluator<'_> {
    type State = Vec<Vec<Complex64>>;

    fn evaluate(&self, x: &[Complex64]) -> (f64, Self::State) {
        let f = Signal::new(*self.problem.grid(), x.to_vec()).expect("grid-sized vector");
        let q = self.field(&f);
        (self.power_sum(&q), q)
    }

    fn gradient(&self, x: &[Complex64], q: &Self::State) -> Vec<Complex64> {
        let f = Signal::new(*self.problem.grid(), x.to_vec()).expect("grid-sized vector");
        Evaluator::gradient(self, &f, q)
    }
}

/// Sphere ascent of `Σ_Ω w|Q_S f|^p`, traced in units of `J`.
fn ascend(
    eval: &Evaluator,
    start: &Signal,
    budget: &OptimizerBudget,
) -> Result<(Signal, usize, bool, Vec<TraceEntry>)> {
    let grid = *eval.problem.grid();
    let p = eval.problem.p.value();
    let settings = AscentSettings {
        max_iterations: budget.max_iterations,
        tolerance: budget.tolerance,
        weight: grid.delta(),
        degree: p,
    };
    let out = sphere_ascent(eval, start.normalized()?.data(), &settings);
    let trace = out
        .trace
        .iter()
        .map(|s| TraceEntry {
            iter: s.iter,
            value: s.objective.powf(1.0 / p),
            step: s.step,
        })
        .collect();
    Ok((
        Signal::new(grid, out.point)?,
        out.iterations,
        out.converged,
        trace,
    ))
}

/// Top eigenpair of `H_{Ω,S}`; exact for positive `S` at `p = 1` since `J(f) = ⟨H f, f⟩`.
pub struct EigenLocalization;

impl ConcentrationStrategy for EigenLocalization {
    fn name(&self) -> &'static str {
        "eigen-localization"
    }

    fn supports(&self, problem: &ConcentrationProblem) -> bool {
        problem.p.value() == 1.0 && problem.window.flags().positive
    }

    fn solve(&self, problem: &ConcentrationProblem, _budget: &OptimizerBudget) -> Result<Solution> {
        let h = qha::localization_operator(&problem.region, &problem.window)?;
        let (lambda, v) = linalg::top_eigenpair(&linalg::hermitian_part(h.matrix()));
        let optimizer = Signal::new(*problem.grid(), v.iter().copied().collect())?.normalized()?;
        let value = concentration_functional(problem, &optimizer)?;
        Ok(Solution {
            value,
            optimizer,
            iterations: 0,
            converged: true,
            start: "eigenvector".into(),
            trace: vec![TraceEntry {
                iter: 0,
                value: lambda,
                step: 0.0,
            }],
        })
    }
}

/// `Λ_{∞,Ω}(S) = w(S)`, attained by a numerical-radius vector moved to a density point of `Ω`.
pub struct NumericalRadiusRoute;

impl ConcentrationStrategy for NumericalRadiusRoute {
    fn name(&self) -> &'static str {
        "numerical-radius"
    }

    fn supports(&self, problem: &ConcentrationProblem) -> bool {
        problem.p.is_infinite()
    }

    fn solve(&self, problem: &ConcentrationProblem, _budget: &OptimizerBudget) -> Result<Solution> {
        let nr = linalg::numerical_radius(problem.window.matrix());
        let g = Signal::new(*problem.grid(), nr.vector.iter().copied().collect())?.normalized()?;
        let optimizer = g.tf_shift(problem.region.density_point());
        let value = concentration_functional(problem, &optimizer)?;
        Ok(Solution {
            value,
            optimizer,
            iterations: 0,
            converged: true,
            start: "numerical-radius-vector".into(),
            trace: vec![TraceEntry {
                iter: 0,
                value: nr.value,
                step: nr.theta,
            }],
        })
    }
}

/// Multistart Riemannian ascent from random, Gaussian, Hermite and localization-eigenvector starts.
pub struct ProjectedAscent;

impl ProjectedAscent {
    fn starts(
        problem: &ConcentrationProblem,
        budget: &OptimizerBudget,
    ) -> Result<Vec<(String, Signal)>> {
        let grid = *problem.grid();
        let mut starts = Vec::new();
        for i in 0..budget.random_starts {
            starts.push((
                format!("random-{i}"),
                Signal::random(grid, budget.seed.wrapping_add(i as u64))?,
            ));
        }
        if grid.is_continuum() {
            let points: Vec<PhasePoint> = problem.region.points().collect();
            let center = problem.region.density_point();
            for i in 0..budget.gaussian_starts {
                let z = if i == 0 {
                    center
                } else {
                    points[(i * 7919) % points.len()]
                };
                starts.push((
                    format!("gaussian-{}-{}", z.m, z.k),
                    Signal::gaussian(grid, 1.0, z)?,
                ));
            }
            for j in 0..budget.hermite_starts.min(grid.n() / 4) {
                starts.push((
                    format!("hermite-{j}"),
                    Signal::hermite(grid, j)?.tf_shift(center),
                ));
            }
        }
        let eigen = budget.eigen_start_count(grid.n());
        if eigen > 0 {
            let h = qha::localization_operator(&problem.region, &problem.window)?;
            let eig = linalg::hermitian_eigen(&linalg::hermitian_part(h.matrix()));
            for r in 0..eigen.min(grid.n()) {
                let v = Signal::new(grid, eig.vectors.column(r).iter().copied().collect())?;
                starts.push((format!("eigen-{r}"), v));
            }
        }
        if starts.is_empty() {
            return Err(LabError::invalid("budget", "no starting points configured"));
        }
        Ok(starts)
    }
}

impl ConcentrationStrategy for ProjectedAscent {
    fn name(&self) -> &'static str {
        "projected-ascent"
    }

    fn supports(&self, problem: &ConcentrationProblem) -> bool {
        !problem.p.is_infinite()
    }

    fn solve(&self, problem: &ConcentrationProblem, budget: &OptimizerBudget) -> Result<Solution> {
        let starts = Self::starts(problem, budget)?;
        let eval = Evaluator::new(problem);
        let runs: Vec<Result<Solution>> = starts
            .par_iter()
            .map(|(label, start)| {
                let (optimizer, iterations, converged, trace) = ascend(&eval, start, budget)?;
                let value = eval.value(&eval.field(&optimizer));
                Ok(Solution {
                    value,
                    optimizer,
                    iterations,
                    converged,
                    start: label.clone(),
                    trace,
                })
            })
            .collect();
        let mut best: Option<Solution> = None;
        for run in runs {
            let run = run?;
            best = match best {
                None => Some(run),
                Some(b) if run.value > b.value + TIE_TOLERANCE => Some(run),
                Some(b)
                    if (run.value - b.value).abs() <= TIE_TOLERANCE
                        && run.iterations < b.iterations =>
                {
                    Some(run)
                }
                keep => keep,
            };
        }
        Ok(best.expect("at least one start"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windows;

    fn gaussian_problem(n: usize, p: f64) -> ConcentrationProblem {
        let grid = GridModel::continuum(n).unwrap();
        let phi = Signal::standard_gaussian(grid).unwrap();
        let window = windows::rank_one(&phi, &phi).unwrap();
        let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
        ConcentrationProblem::new(window, region, Exponent::new(p).unwrap()).unwrap()
    }

    #[test]
    fn identity_window_gives_region_measure() {
        let grid = GridModel::exact(16).unwrap();
        let region = Region::ball(grid, (0.0, 0.0), 1.2).unwrap();
        let window = windows::identity_plus(ZERO, &Operator::identity(grid)).unwrap();
        let problem =
            ConcentrationProblem::new(window, region.clone(), Exponent::new(3.0).unwrap()).unwrap();
        let f = Signal::random(grid, 5).unwrap();
        let j = concentration_functional(&problem, &f).unwrap();
        assert!((j - region.measure().powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_and_zero_window_rejected() {
        let problem = gaussian_problem(32, 2.0);
        let zero = Signal::zeros(*problem.grid());
        assert!(matches!(
            concentration_functional(&problem, &zero),
            Err(LabError::ZeroSignal)
        ));
        let zw = windows::custom(*problem.grid(), CMatrix::zeros(32, 32)).unwrap();
        let zp = ConcentrationProblem::new(zw, problem.region.clone(), Exponent::TWO).unwrap();
        let err = optimize_concentration(&zp, &OptimizerBudget::default()).unwrap_err();
        assert_eq!(err.to_string(), "window is zero");
    }

    #[test]
    fn registry_dispatch() {
        let registry = StrategyRegistry::default();
        assert_eq!(
            registry.names(),
            vec!["eigen-localization", "numerical-radius", "projected-ascent"]
        );
        let budget = OptimizerBudget::default();
        assert_eq!(
            registry
                .select(&gaussian_problem(32, 1.0), &budget)
                .unwrap()
                .name(),
            "eigen-localization"
        );
        assert_eq!(
            registry
                .select(&gaussian_problem(32, 2.0), &budget)
                .unwrap()
                .name(),
            "projected-ascent"
        );
        let inf = gaussian_problem(32, f64::INFINITY);
        assert_eq!(
            registry.select(&inf, &budget).unwrap().name(),
            "numerical-radius"
        );
        let forced = OptimizerBudget {
            strategy: Some("eigen-localization".into()),
            ..budget.clone()
        };
        assert!(registry.select(&inf, &forced).is_err());
        assert!(matches!(
            registry.get("simplex"),
            Err(LabError::Unknown { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = GridModel::exact(8).unwrap();
        let a = Signal::random(grid, 1).unwrap();
        let b = Signal::random(grid, 2).unwrap();
        let m = Operator::rank_one(&a, &b).unwrap().matrix()
            + Operator::tf_shift(grid, PhasePoint::new(1, 3)).matrix();
        let window = windows::custom(grid, m).unwrap();
        let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let problem = ConcentrationProblem::new(
                window.clone(),
                region.clone(),
                Exponent::new(p).unwrap(),
            )
            .unwrap();
            let eval = Evaluator::new(&problem);
            let f = Signal::random(grid, 9).unwrap();
            let h = Signal::random(grid, 10).unwrap();
            let g = eval.gradient(&f, &eval.field(&f));
            let predicted = crate::ascent::real_inner(h.data(), &g, grid.delta());
            let eps = 1e-6;
            let plus = eval.power_sum(&eval.field(&f.combine(ONE_C, &h, Complex64::new(eps, 0.0))));
            let minus =
                eval.power_sum(&eval.field(&f.combine(ONE_C, &h, Complex64::new(-eps, 0.0))));
            let fd = (plus - minus) / (2.0 * eps);
            assert!(
                (fd - predicted).abs() < 1e-6 * predicted.abs().max(1.0),
                "p={p}: {fd} vs {predicted}"
            );
        }
    }

    const ONE_C: Complex64 = Complex64::new(1.0, 0.0);
}
