//! Small optimization helpers shared by the minimizers.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use crate::error::{Error, Result};

/// Golden-section search for a unimodal `f` on `[a, b]`; returns `(x, f(x))`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the bracket ends may beat the midpoint for monotone f
    [(x, fx), (c, fc), (d, fd)].into_iter().min_by(|p, q| p.1.total_cmp(&q.1)).expect("three candidates")
}

/// Outcome of [`bisect_multiplier`].
#[derive(Clone, Debug)]
pub struct Multiplier<T> {
    pub mu: f64,
    pub feasible: T,
    /// Solution at the largest infeasible multiplier tried, if any.
    pub infeasible: Option<T>,
}

/// Smallest multiplier `μ ∈ [0, hi]` (up to `iters` bisections) for which
/// `solve(μ)` is feasible. `solve(0)` is tried first; `hi` is doubled until
/// feasible, at most `max_doublings` times.
pub fn bisect_multiplier<T>(
    mut solve: impl FnMut(f64) -> (bool, T),
    mut hi: f64,
    iters: usize,
    max_doublings: usize,
) -> Result<Multiplier<T>> {
    let (ok, sol) = solve(0.0);
    if ok {
        return Ok(Multiplier { mu: 0.0, feasible: sol, infeasible: None });
    }
    let mut infeasible = sol;
    let mut lo = 0.0;
    let mut best = None;
    for _ in 0..=max_doublings {
        let (ok, sol) = solve(hi);
        if ok {
            best = Some(sol);
            break;
        }
        lo = hi;
        infeasible = sol;
        hi *= 2.0;
    }
    let mut best = best.ok_or_else(|| Error::Infeasible(format!("no feasible solution up to multiplier {hi}")))?;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let (ok, sol) = solve(mid);
        if ok {
            hi = mid;
            best = sol;
        } else {
            lo = mid;
            infeasible = sol;
        }
    }
    Ok(Multiplier { mu: hi, feasible: best, infeasible: Some(infeasible) })
}

struct Smooth<'a> {
    cost: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    grad: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
}

impl CostFunction for Smooth<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.cost)(p))
    }
}

impl Gradient for Smooth<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok((self.grad)(p))
    }
}

/// L-BFGS (memory 7, Moré–Thuente line search) on a smooth objective.
pub fn lbfgs(
    cost: &(dyn Fn(&[f64]) -> f64 + Sync),
    grad: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    x0: Vec<f64>,
    max_iters: u64,
) -> Result<Vec<f64>> {
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
        .with_tolerance_grad(1e-12)
        .and_then(|s| s.with_tolerance_cost(1e-15))
        .map_err(|e| Error::arg(format!("L-BFGS setup: {e}")))?;
    let fallback = x0.clone();
    let res = Executor::new(Smooth { cost, grad }, solver)
        .configure(|s| s.param(x0).max_iters(max_iters))
        .run()
        .map_err(|e| Error::arg(format!("L-BFGS failed: {e}")))?;
    Ok(res.state().get_best_param().cloned().unwrap_or(fallback))
}
