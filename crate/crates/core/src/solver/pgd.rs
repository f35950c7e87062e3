//! Projected gradient descent on a box with Armijo backtracking.
//!
//! Each iteration tries the Barzilai-Borwein step from the previous pair of
//! iterates (the configured initial step on the first iteration) and shrinks
//! it until the sufficient-decrease condition holds along the projection arc.
//! Stops when `‖x − P(x − ∇f(x))‖₂ ≤ tol`.

use super::{SolverDiagnostics, SolverOptions};

const SUFFICIENT_DECREASE: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e12;

pub trait BoxObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub diagnostics: SolverDiagnostics,
}

fn project(x: f64, upper: f64) -> f64 {
    x.clamp(0.0, upper)
}

fn projected_gradient_norm(x: &[f64], g: &[f64], upper: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let d = xi - project(xi - gi, upper);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` over `[0, upper]^dim`; `pinned` coordinates are held at 0.
pub fn minimize<F: BoxObjective>(f: &F, upper: f64, pinned: &[bool], opts: &SolverOptions) -> Minimum {
    let dim = f.dim();
    let start = project(opts.init.unwrap_or(0.5 * upper), upper);
    let mut x: Vec<f64> = pinned.iter().map(|&p| if p { 0.0 } else { start }).collect();
    let mut g = vec![0.0; dim];
    let mut value = f.value(&x);
    f.gradient(&x, &mut g);
    mask(&mut g, pinned);

    let mut trial = vec![0.0; dim];
    let mut g_trial = vec![0.0; dim];
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut norm = projected_gradient_norm(&x, &g, upper);
    let mut stalled = false;

    while norm > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let mut alpha = step;
        let accepted = loop {
            let mut slope = 0.0;
            for i in 0..dim {
                trial[i] = project(x[i] - alpha * g[i], upper);
                slope += g[i] * (trial[i] - x[i]);
            }
            let v = f.value(&trial);
            // rounding slack: near the optimum decreases fall below one ulp of f
            let slack = 4.0 * f64::EPSILON * value.abs();
            if v <= value + SUFFICIENT_DECREASE * slope + slack {
                break Some(v);
            }
            alpha *= opts.shrink;
            if alpha < MIN_STEP {
                break None;
            }
        };
        let Some(v) = accepted else {
            stalled = true;
            break;
        };
        f.gradient(&trial, &mut g_trial);
        mask(&mut g_trial, pinned);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..dim {
            let s = trial[i] - x[i];
            ss += s * s;
            sy += s * (g_trial[i] - g[i]);
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(MIN_STEP, MAX_STEP)
        } else {
            (2.0 * alpha).min(MAX_STEP)
        };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        value = v;
        norm = projected_gradient_norm(&x, &g, upper);
        if ss == 0.0 && norm > opts.tolerance {
            stalled = true;
            break;
        }
    }

    let converged = norm <= opts.tolerance;
    Minimum {
        x,
        value,
        diagnostics: SolverDiagnostics {
            iterations,
            projected_gradient_norm: norm,
            converged,
            stalled: stalled && !converged,
        },
    }
}

fn mask(g: &mut [f64], pinned: &[bool]) {
    for (gi, &p) in g.iter_mut().zip(pinned) {
        if p {
            *gi = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Quadratic {
        center: Vec<f64>,
        scale: Vec<f64>,
    }

    impl BoxObjective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((x, c), s)| s * (x - c).powi(2))
                .sum()
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) {
            for i in 0..x.len() {
                out[i] = 2.0 * self.scale[i] * (x[i] - self.center[i]);
            }
        }
    }

    #[test]
    fn clamps_to_box() {
        let q = Quadratic {
            center: vec![-1.0, 0.3, 2.0],
            scale: vec![1.0, 1e-3, 50.0],
        };
        let m = minimize(&q, 1.0, &[false; 3], &SolverOptions::default());
        assert!(m.diagnostics.converged);
        assert_abs_diff_eq!(m.x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.x[1], 0.3, epsilon = 1e-5);
        assert_abs_diff_eq!(m.x[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pinned_coordinates_stay_zero() {
        let q = Quadratic {
            center: vec![0.5, 0.5],
            scale: vec![1.0, 1.0],
        };
        let m = minimize(&q, 1.0, &[true, false], &SolverOptions::default());
        assert_eq!(m.x[0], 0.0);
        assert_abs_diff_eq!(m.x[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let q = Quadratic {
            center: vec![0.3; 4],
            scale: vec![1.0, 10.0, 100.0, 1000.0],
        };
        let opts = SolverOptions {
            max_iterations: 1,
            ..SolverOptions::default()
        };
        let m = minimize(&q, 1.0, &[false; 4], &opts);
        assert!(!m.diagnostics.converged);
        assert_eq!(m.diagnostics.iterations, 1);
    }
}
