//! Riemannian conjugate-gradient ascent on the unit sphere of a weighted complex vector space,
//! shared by the signal-level and operator-level concentration optimizers.

use num_complex::Complex64;

/// Iterations over which the ascent measures its average progress.
pub const CREEP_WINDOW: usize = 25;

/// A smooth objective `Φ` on the sphere; `State` caches whatever the gradient reuses.
pub trait SphereObjective {
    type State;

    fn evaluate(&self, x: &[Complex64]) -> (f64, Self::State);

    /// Euclidean gradient of `Φ` for the real inner product `Re⟨·,·⟩_weight`.
    fn gradient(&self, x: &[Complex64], state: &Self::State) -> Vec<Complex64>;
}

#[derive(Debug, Clone, Copy)]
pub struct AscentSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Weight `δ` of the inner product `Σ x conj(y) δ`.
    pub weight: f64,
    /// Degree of homogeneity of `Φ`, which scales the gradient stopping test.
    pub degree: f64,
}

#[derive(Debug, Clone)]
pub struct AscentStep {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub point: Vec<Complex64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<AscentStep>,
}

pub fn real_inner(a: &[Complex64], b: &[Complex64], weight: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>() * weight
}

pub fn norm(v: &[Complex64], weight: f64) -> f64 {
    real_inner(v, v, weight).sqrt()
}

pub fn normalize(v: &[Complex64], weight: f64) -> Option<Vec<Complex64>> {
    let r = norm(v, weight);
    (r > 0.0 && r.is_finite()).then(|| v.iter().map(|x| x / r).collect())
}

fn project_tangent(x: &[Complex64], v: &mut [Complex64], weight: f64) {
    let c = real_inner(v, x, weight);
    v.iter_mut().zip(x).for_each(|(vi, xi)| *vi -= xi * c);
}

/// Polak–Ribière+ with Armijo backtracking along great circles. The step angle doubles only
/// after a step accepted on the first try and is capped at `π/4`. Stops on a small relative
/// gradient, on five negligible steps, or when the mean relative gain over
/// [`CREEP_WINDOW`] steps drops below a hundred tolerances.
pub fn sphere_ascent<O: SphereObjective>(
    objective: &O,
    start: &[Complex64],
    settings: &AscentSettings,
) -> AscentOutcome {
    let weight = settings.weight;
    let mut x = normalize(start, weight).unwrap_or_else(|| start.to_vec());
    let (mut phi, mut state) = objective.evaluate(&x);
    let mut g = objective.gradient(&x, &state);
    project_tangent(&x, &mut g, weight);
    let mut d = g.clone();
    let mut theta: f64 = 0.1;
    let mut trace = vec![AscentStep {
        iter: 0,
        objective: phi,
        step: 0.0,
    }];
    let mut stalls = 0;
    let mut first_try = true;
    let finish = |x, phi, iterations, converged, trace| AscentOutcome {
        point: x,
        objective: phi,
        iterations,
        converged,
        trace,
    };
    for iter in 1..=settings.max_iterations {
        let gnorm = norm(&g, weight);
        if gnorm <= settings.tolerance * settings.degree * phi.abs().max(f64::MIN_POSITIVE) {
            return finish(x, phi, iter - 1, true, trace);
        }
        let mut slope = real_inner(&g, &d, weight);
        if slope <= 0.0 {
            d = g.clone();
            slope = gnorm * gnorm;
        }
        let dnorm = norm(&d, weight);
        let dir: Vec<Complex64> = d.iter().map(|v| v / dnorm).collect();
        let rate = slope / dnorm;
        if first_try {
            theta = (2.0 * theta).min(std::f64::consts::FRAC_PI_4);
        }
        first_try = true;
        let accepted = loop {
            let (c, s) = (theta.cos(), theta.sin());
            let moved: Vec<Complex64> = x.iter().zip(&dir).map(|(a, b)| a * c + b * s).collect();
            if let Some(candidate) = normalize(&moved, weight) {
                let (cphi, cstate) = objective.evaluate(&candidate);
                if cphi >= phi + 1e-4 * theta * rate {
                    break Some((candidate, cphi, cstate));
                }
            }
            theta *= 0.5;
            first_try = false;
            if theta < 1e-15 {
                break None;
            }
        };
        let Some((next, nphi, nstate)) = accepted else {
            if d == g {
                return finish(x, phi, iter, true, trace);
            }
            d = g.clone();
            theta = 0.1;
            continue;
        };
        let improvement = nphi - phi;
        let mut ng = objective.gradient(&next, &nstate);
        project_tangent(&next, &mut ng, weight);
        let mut old_g = g;
        project_tangent(&next, &mut old_g, weight);
        let diff: Vec<Complex64> = ng.iter().zip(&old_g).map(|(a, b)| a - b).collect();
        let beta = (real_inner(&ng, &diff, weight) / (gnorm * gnorm)).max(0.0);
        project_tangent(&next, &mut d, weight);
        d = ng.iter().zip(&d).map(|(a, b)| a + b * beta).collect();
        x = next;
        phi = nphi;
        state = nstate;
        g = ng;
        trace.push(AscentStep {
            iter,
            objective: phi,
            step: theta,
        });
        if improvement <= 1e-15 * phi.abs() {
            stalls += 1;
            if stalls >= 5 {
                return finish(x, phi, iter, true, trace);
            }
        } else {
            stalls = 0;
        }
        if trace.len() > CREEP_WINDOW {
            let past = trace[trace.len() - 1 - CREEP_WINDOW].objective;
            if phi - past <= CREEP_WINDOW as f64 * 100.0 * settings.tolerance * phi.abs() {
                return finish(x, phi, iter, true, trace);
            }
        }
    }
    drop(state);
    finish(x, phi, settings.max_iterations, false, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Φ(x) = Σ aᵢ|xᵢ|²` peaks at the largest `aᵢ`.
    struct Diagonal(Vec<f64>);

    impl SphereObjective for Diagonal {
        type State = ();

        fn evaluate(&self, x: &[Complex64]) -> (f64, ()) {
            (
                self.0.iter().zip(x).map(|(a, v)| a * v.norm_sqr()).sum(),
                (),
            )
        }

        fn gradient(&self, x: &[Complex64], _: &()) -> Vec<Complex64> {
            self.0.iter().zip(x).map(|(a, v)| v * (2.0 * a)).collect()
        }
    }

    #[test]
    fn finds_largest_diagonal_entry() {
        let objective = Diagonal(vec![0.5, 2.0, 1.0, 1.9]);
        let start = vec![Complex64::new(1.0, 0.2); 4];
        let settings = AscentSettings {
            max_iterations: 500,
            tolerance: 1e-12,
            weight: 1.0,
            degree: 2.0,
        };
        let out = sphere_ascent(&objective, &start, &settings);
        assert!((out.objective - 2.0).abs() < 1e-9, "{}", out.objective);
        assert!(out
            .trace
            .windows(2)
            .all(|w| w[1].objective >= w[0].objective));
    }
}
