//! Deterministic Nelder-Mead minimizer with seeded restarts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Reflection, expansion, contraction and shrink coefficients.
const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Objective spread across the simplex below which it counts as collapsed.
    pub f_tol: f64,
    /// Simplex diameter below which it counts as collapsed.
    pub x_tol: f64,
    pub max_evaluations: usize,
    /// Restarts allowed after collapse.
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 0.02,
            f_tol: 1e-12,
            x_tol: 1e-6,
            max_evaluations: 500,
            max_restarts: 3,
            seed: 0x5ea_b0a7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub index: usize,
    pub params: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<Evaluation>,
    pub restarts: usize,
}

struct Counter<'a, F> {
    f: &'a F,
    history: Vec<Evaluation>,
    limit: usize,
}

impl<F> Counter<'_, F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn remaining(&self) -> usize {
        self.limit.saturating_sub(self.history.len())
    }

    fn eval(&mut self, x: Vec<f64>) -> Option<f64> {
        if self.remaining() == 0 {
            return None;
        }
        let value = (self.f)(&x);
        self.record(x, value);
        Some(value)
    }

    /// Evaluates independent points concurrently, up to the remaining budget.
    fn eval_many(&mut self, xs: Vec<Vec<f64>>) -> Vec<f64> {
        let xs: Vec<_> = xs.into_iter().take(self.remaining()).collect();
        let values: Vec<f64> = xs.par_iter().map(|x| (self.f)(x)).collect();
        for (x, v) in xs.into_iter().zip(&values) {
            self.record(x, *v);
        }
        values
    }

    fn record(&mut self, params: Vec<f64>, value: f64) {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.history.push(Evaluation {
            index: self.history.len(),
            params,
            value,
        });
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| yi + a * (xi - yi)).collect()
}

/// Vertices `x0 + step·s_k·e_{π(k)}` with signs `s_k` and permutation `π`
/// drawn from `rng` (identity orientation when `rng` is `None`).
fn initial_vertices(x0: &[f64], step: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut axes: Vec<usize> = (0..n).collect();
    let mut signs = vec![1.0; n];
    if let Some(rng) = rng {
        axes.shuffle(rng);
        for s in signs.iter_mut() {
            if rng.gen_bool(0.5) {
                *s = -1.0;
            }
        }
    }
    let mut out = vec![x0.to_vec()];
    for k in 0..n {
        let mut v = x0.to_vec();
        v[axes[k]] += signs[k] * step;
        out.push(v);
    }
    out
}

/// Minimizes `f` from `x0`.
///
/// Restart rule: when the simplex collapses (objective spread below `f_tol`
/// or diameter below `x_tol`) and budget remains, a fresh simplex of half
/// the previous edge is built around the best point, with axis order and
/// signs drawn from a ChaCha8 stream seeded by `seed`.
pub fn minimize<F>(f: &F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut counter = Counter {
        f,
        history: Vec::new(),
        limit: opts.max_evaluations,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = x0.len();
    let mut best = x0.to_vec();
    let mut best_value = f64::INFINITY;
    let mut step = opts.initial_step;
    let mut restarts = 0;

    let mut pts = initial_vertices(x0, step, None);
    'outer: loop {
        let vals = counter.eval_many(pts.clone());
        if vals.len() < pts.len() {
            for (p, v) in pts.iter().zip(&vals) {
                if *v < best_value {
                    best_value = *v;
                    best = p.clone();
                }
            }
            break;
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = pts.into_iter().zip(vals).collect();
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[0].1 < best_value {
                best_value = simplex[0].1;
                best = simplex[0].0.clone();
            }
            let spread = simplex[n].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(p, _)| {
                    p.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread.is_finite() && spread <= opts.f_tol || diameter <= opts.x_tol {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].0.clone();
            let f_worst = simplex[n].1;

            let xr = axpy(-REFLECT, &worst, &centroid);
            let Some(fr) = counter.eval(xr.clone()) else {
                break 'outer;
            };
            if fr < simplex[0].1 {
                let xe = axpy(-EXPAND, &worst, &centroid);
                let Some(fe) = counter.eval(xe.clone()) else {
                    break 'outer;
                };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < f_worst {
                    let xc = axpy(CONTRACT, &xr, &centroid);
                    let Some(fc) = counter.eval(xc.clone()) else {
                        break 'outer;
                    };
                    (xc, fc)
                } else {
                    let xc = axpy(CONTRACT, &worst, &centroid);
                    let Some(fc) = counter.eval(xc.clone()) else {
                        break 'outer;
                    };
                    (xc, fc)
                };
                if fc < fr.min(f_worst) {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..]
                        .iter()
                        .map(|(p, _)| axpy(SHRINK, p, &anchor))
                        .collect();
                    let vals = counter.eval_many(shrunk.clone());
                    if vals.len() < shrunk.len() {
                        break 'outer;
                    }
                    for (k, (p, v)) in shrunk.into_iter().zip(vals).enumerate() {
                        simplex[k + 1] = (p, v);
                    }
                }
            }
        }
        if restarts >= opts.max_restarts || counter.remaining() <= n {
            break;
        }
        restarts += 1;
        step *= 0.5;
        pts = initial_vertices(&best, step, Some(&mut rng));
    }
    // Budget exhaustion mid-iteration can leave a better evaluated point unrecorded.
    for e in &counter.history {
        if e.value < best_value {
            best_value = e.value;
            best = e.params.clone();
        }
    }
    SimplexResult {
        best,
        best_value,
        history: counter.history,
        restarts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            initial_step: 0.5,
            max_evaluations: 2000,
            f_tol: 1e-16,
            x_tol: 1e-10,
            ..Default::default()
        };
        let r = minimize(&f, &[-1.2, 1.0], &opts);
        assert!(r.best_value < 1e-8, "{}", r.best_value);
        assert!((r.best[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn respects_budget_and_is_deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let opts = SimplexOptions {
            max_evaluations: 37,
            ..Default::default()
        };
        let a = minimize(&f, &[0.0; 3], &opts);
        let b = minimize(&f, &[0.0; 3], &opts);
        assert!(a.history.len() <= 37);
        assert_eq!(a.history, b.history);
        assert!(a.best_value <= f(&[0.0; 3]));
    }

    #[test]
    fn nan_objective_is_never_best() {
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0] * x[0] };
        let r = minimize(&f, &[-0.5], &SimplexOptions::default());
        assert!(r.best_value.is_finite());
        assert!(r.best[0] <= 0.0);
    }
}
