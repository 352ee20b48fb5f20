//! Integrands with linear growth on `M x N` matrices, their recession
//! functions, and the action `v(Du)` on derivative measures.

mod catalog;
mod envelope;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use catalog::{lookup, lookup_spatial, CATALOG};
pub use envelope::{convex_envelope_1d, lamination_upper_bound, PiecewiseLinear1d};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;

pub type MatrixFn = Arc<dyn Fn(&Matrix) -> f64 + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SpatialFn = Arc<dyn Fn(&[f64], &Matrix) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Matrix) -> Matrix + Send + Sync>;

/// Positively 1-homogeneous function, stored through its values on the unit sphere.
#[derive(Clone)]
pub struct HomogeneousIntegrand {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    sphere: MatrixFn,
    gradient: Option<GradientFn>,
}

impl HomogeneousIntegrand {
    /// `f` is only ever evaluated on unit matrices.
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, f: impl Fn(&Matrix) -> f64 + Send + Sync + 'static) -> Self {
        HomogeneousIntegrand { name: name.into(), rows, cols, sphere: Arc::new(f), gradient: None }
    }

    /// Attach the exact gradient, evaluated on unit matrices where the
    /// function is differentiable. Used instead of finite differences.
    pub fn with_gradient(mut self, g: impl Fn(&Matrix) -> Matrix + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn sphere_eval(&self, u: &Matrix) -> f64 {
        (self.sphere)(u)
    }

    /// `|A| · sphere(A/|A|)`, zero at the origin.
    pub fn eval(&self, a: &Matrix) -> f64 {
        let n = a.norm();
        if n == 0.0 {
            0.0
        } else {
            n * (self.sphere)(&a.scale(1.0 / n))
        }
    }

    /// A subgradient-like descent direction by central differences on the
    /// sphere. At the origin the average over `±E_ij` is used, which lies in
    /// the subdifferential whenever the function is convex.
    pub fn subgradient(&self, a: &Matrix) -> Matrix {
        const H: f64 = 1e-6;
        if let Some(g) = &self.gradient {
            return self.exact_subgradient(g, a);
        }
        let n = a.norm();
        let (rows, cols) = (self.rows, self.cols);
        if n < 1e-12 {
            let mut g = Matrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let e = Matrix::unit(rows, cols, i, j);
                    let gp = self.central_difference(&e, H);
                    let gm = self.central_difference(&(-e), H);
                    g += (gp + gm).scale(0.5);
                }
            }
            return g.scale(1.0 / (rows * cols) as f64);
        }
        self.central_difference(&a.scale(1.0 / n), H)
    }

    fn exact_subgradient(&self, g: &GradientFn, a: &Matrix) -> Matrix {
        let n = a.norm();
        if n > 1e-12 {
            return g(&a.scale(1.0 / n));
        }
        let (rows, cols) = (self.rows, self.cols);
        let mut s = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = Matrix::unit(rows, cols, i, j);
                s += (g(&e) + g(&(-e))).scale(0.5);
            }
        }
        s.scale(1.0 / (rows * cols) as f64)
    }

    fn central_difference(&self, u: &Matrix, h: f64) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.cols);
        for k in 0..u.len() {
            let mut p = *u;
            let mut m = *u;
            p.as_mut_slice()[k] += h;
            m.as_mut_slice()[k] -= h;
            g.as_mut_slice()[k] = (self.eval(&p) - self.eval(&m)) / (2.0 * h);
        }
        g
    }

    /// `A ↦ v(A R)` for an orthogonal `N x N` matrix `R`.
    pub fn compose_right(&self, r: &Matrix) -> HomogeneousIntegrand {
        let inner = self.sphere.clone();
        let r = *r;
        let gradient = self.gradient.clone().map(|g| -> GradientFn {
            let rt = r.transpose();
            Arc::new(move |u: &Matrix| {
                let w = u.matmul(&r);
                let n = w.norm();
                if n == 0.0 {
                    Matrix::zeros(u.rows(), u.cols())
                } else {
                    g(&w.scale(1.0 / n)).matmul(&rt)
                }
            })
        });
        HomogeneousIntegrand {
            name: format!("{}∘R", self.name),
            rows: self.rows,
            cols: self.cols,
            sphere: Arc::new(move |u: &Matrix| {
                let w = u.matmul(&r);
                let n = w.norm();
                if n == 0.0 {
                    0.0
                } else {
                    n * inner(&w.scale(1.0 / n))
                }
            }),
            gradient,
        }
    }

    pub fn scaled(&self, s: f64) -> HomogeneousIntegrand {
        let inner = self.sphere.clone();
        HomogeneousIntegrand {
            name: format!("{}*{s}", self.name),
            rows: self.rows,
            cols: self.cols,
            sphere: Arc::new(move |u: &Matrix| s * inner(u)),
            gradient: self.gradient.clone().map(|g| -> GradientFn { Arc::new(move |u: &Matrix| g(u).scale(s)) }),
        }
    }

    /// `max |v(αA) − αv(A)| / (α|A|)` over the samples and factors.
    pub fn homogeneity_defect(&self, samples: &[Matrix], factors: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in samples {
            let base = self.eval(a);
            for &t in factors {
                let d = (self.eval(&a.scale(t)) - t * base).abs() / (t * a.norm()).max(1e-300);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// The integrand `v = v^∞` itself.
    pub fn to_integrand(&self) -> Integrand {
        let h = self.clone();
        let c = sphere_samples(self.rows, self.cols, 64, 7)
            .iter()
            .map(|u| self.sphere_eval(u).abs())
            .fold(1.0, f64::max);
        Integrand::new(self.name.clone(), self.rows, self.cols, move |a| h.eval(a))
            .with_growth(c)
            .with_recession(self.clone())
    }
}

impl fmt::Debug for HomogeneousIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HomogeneousIntegrand({}, {}x{})", self.name, self.rows, self.cols)
    }
}

#[derive(Clone)]
pub struct Integrand {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    eval: MatrixFn,
    pub growth_c: f64,
    pub recession: Option<HomogeneousIntegrand>,
    pub spatial_weight: Option<PointFn>,
    pub convex: bool,
    pub quasiconvex: bool,
}

impl Integrand {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, f: impl Fn(&Matrix) -> f64 + Send + Sync + 'static) -> Self {
        Integrand {
            name: name.into(),
            rows,
            cols,
            eval: Arc::new(f),
            growth_c: 1.0,
            recession: None,
            spatial_weight: None,
            convex: false,
            quasiconvex: false,
        }
    }

    pub fn with_growth(mut self, c: f64) -> Self {
        self.growth_c = c;
        self
    }

    pub fn with_recession(mut self, r: HomogeneousIntegrand) -> Self {
        self.recession = Some(r);
        self
    }

    pub fn with_weight(mut self, w: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.spatial_weight = Some(Arc::new(w));
        self
    }

    /// Convex integrands are quasiconvex as well.
    pub fn convex(mut self) -> Self {
        self.convex = true;
        self.quasiconvex = true;
        self
    }

    pub fn quasiconvex(mut self) -> Self {
        self.quasiconvex = true;
        self
    }

    pub fn eval(&self, a: &Matrix) -> f64 {
        (self.eval)(a)
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        self.spatial_weight.as_ref().map_or(1.0, |w| w(x))
    }

    /// `g(x) v(A)` with the spatial weight.
    pub fn eval_at(&self, x: &[f64], a: &Matrix) -> f64 {
        self.weight(x) * self.eval(a)
    }

    pub fn recession_or_err(&self) -> Result<&HomogeneousIntegrand> {
        self.recession.as_ref().ok_or_else(|| Error::RecessionRequired(self.name.clone()))
    }

    /// The same integrand without its spatial weight.
    pub fn unweighted(&self) -> Integrand {
        let mut v = self.clone();
        v.spatial_weight = None;
        v
    }
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Integrand({}, {}x{}, c={})", self.name, self.rows, self.cols, self.growth_c)
    }
}

/// `f(x, A)` with its joint recession function `f^∞(x, A)`.
#[derive(Clone)]
pub struct SpatialIntegrand {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    f: SpatialFn,
    recession: Option<SpatialFn>,
    pub convex: bool,
}

impl SpatialIntegrand {
    pub fn new(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        f: impl Fn(&[f64], &Matrix) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SpatialIntegrand { name: name.into(), rows, cols, f: Arc::new(f), recession: None, convex: false }
    }

    pub fn with_recession(mut self, r: impl Fn(&[f64], &Matrix) -> f64 + Send + Sync + 'static) -> Self {
        self.recession = Some(Arc::new(r));
        self
    }

    pub fn convex(mut self) -> Self {
        self.convex = true;
        self
    }

    /// `g(x) v(A)` from a (possibly weighted) integrand.
    pub fn from_integrand(v: &Integrand) -> Self {
        let f = v.clone();
        let mut s = SpatialIntegrand::new(v.name.clone(), v.rows, v.cols, move |x, a| f.eval_at(x, a));
        if let Some(r) = v.recession.clone() {
            let w = v.clone();
            s = s.with_recession(move |x, a| w.weight(x) * r.eval(a));
        }
        s.convex = v.convex;
        s
    }

    pub fn eval(&self, x: &[f64], a: &Matrix) -> f64 {
        (self.f)(x, a)
    }

    pub fn has_recession(&self) -> bool {
        self.recession.is_some()
    }

    pub fn recession(&self, x: &[f64], a: &Matrix) -> Result<f64> {
        self.recession
            .as_ref()
            .map(|r| r(x, a))
            .ok_or_else(|| Error::RecessionRequired(self.name.clone()))
    }

    /// Numerical recession estimate at `x` when no closed form is attached.
    pub fn recession_estimate(&self, x: &[f64], a: &Matrix, schedule: &RecessionSchedule) -> Result<RecessionEstimate> {
        if let Some(r) = &self.recession {
            return Ok(RecessionEstimate { value: r(x, a), exists: true, tail_spread: 0.0 });
        }
        let x = x.to_vec();
        let f = self.f.clone();
        let v = Integrand::new(self.name.clone(), self.rows, self.cols, move |m| f(&x, m));
        estimate_recession(&v, a, schedule)
    }
}

impl fmt::Debug for SpatialIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpatialIntegrand({}, {}x{})", self.name, self.rows, self.cols)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RecessionSchedule {
    pub factors: Vec<f64>,
    pub jitter: f64,
    pub tol: f64,
}

impl Default for RecessionSchedule {
    fn default() -> Self {
        RecessionSchedule { factors: (0..=40).map(|k| 2f64.powi(k)).collect(), jitter: 1e-3, tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecessionEstimate {
    pub value: f64,
    pub exists: bool,
    /// Largest successive difference over the tail, across all tested directions.
    pub tail_spread: f64,
}

const TAIL: usize = 4;

/// Estimate `v^∞(A) = lim v(αA')/α` as `α → ∞`, `A' → A`.
///
/// The quotient is evaluated along the schedule for `A` and for directions
/// jittered by `±jitter·E_ij` (renormalized). The limit is declared to exist
/// when every one of these sequences is Cauchy within `tol` over its last
/// four steps; otherwise the reported value is the largest quotient over the
/// second half of the schedule, an estimate of the limsup `v^♯(A)`.
pub fn estimate_recession(v: &Integrand, a: &Matrix, schedule: &RecessionSchedule) -> Result<RecessionEstimate> {
    if (a.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("recession direction must be a unit matrix, |A| = {}", a.norm())));
    }
    let f = &schedule.factors;
    if f.len() < TAIL + 1 || f.windows(2).any(|w| !(w[1] > w[0])) || f[0] <= 0.0 {
        return Err(Error::arg("schedule must be positive, strictly increasing and have at least five factors"));
    }
    let quotients = |dir: &Matrix| -> Result<Vec<f64>> {
        f.iter()
            .map(|&t| {
                let q = v.eval(&dir.scale(t)) / t;
                if q.is_finite() {
                    Ok(q)
                } else {
                    Err(Error::IntegrandNotFinite { at: format!("{t} * {dir:?}") })
                }
            })
            .collect()
    };
    let spread = |q: &[f64]| -> f64 {
        q[q.len() - TAIL - 1..].windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    };
    let base = quotients(a)?;
    let mut worst = spread(&base);
    for k in 0..a.len() {
        for s in [-1.0, 1.0] {
            let mut d = *a;
            d.as_mut_slice()[k] += s * schedule.jitter;
            let d = d.normalized().expect("jittered unit matrix is nonzero");
            worst = worst.max(spread(&quotients(&d)?));
        }
    }
    let exists = worst <= schedule.tol;
    let value = if exists {
        base[base.len() - 1]
    } else {
        base[base.len() / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(RecessionEstimate { value, exists, tail_spread: worst })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub ok: bool,
    pub fitted_c: f64,
}

/// Smallest `c ≥ 1` with `|v(A)| ≤ c(1+|A|)` on the samples, compared to
/// `cap` (the integrand's declared constant when `None`).
pub fn check_linear_growth(v: &Integrand, samples: &[Matrix], cap: Option<f64>) -> Result<GrowthCheck> {
    if samples.is_empty() {
        return Err(Error::arg("linear growth check needs samples"));
    }
    let mut c: f64 = 1.0;
    for a in samples {
        let val = v.eval(a);
        if !val.is_finite() {
            return Err(Error::IntegrandNotFinite { at: format!("{a:?}") });
        }
        c = c.max(val.abs() / (1.0 + a.norm()));
    }
    let cap = cap.unwrap_or(v.growth_c);
    Ok(GrowthCheck { ok: c <= cap * (1.0 + 1e-12), fitted_c: c })
}

/// The measure `v(μ)`: cellwise `g·v(density)` (with `g` averaged over the
/// cell) and atoms `g(x) v^∞(P) m`.
pub fn measure_action(v: &Integrand, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let rec = v.recession_or_err()?;
    if mu.shape() != (v.rows, v.cols) {
        return Err(Error::arg("measure and integrand shapes differ"));
    }
    let density = mu
        .density
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let avg_w = match &v.spatial_weight {
                None => 1.0,
                Some(w) => mu.mesh.integrate_cell(i, &|x| w(x)) / mu.mesh.cell_measure(i),
            };
            Matrix::scalar(avg_w * v.eval(d))
        })
        .collect();
    let atoms = mu
        .atoms
        .iter()
        .map(|a| (a.location.clone(), Matrix::scalar(v.weight(&a.location) * rec.eval(&a.direction) * a.mass)))
        .collect();
    DiscreteMeasure::new(mu.mesh.clone(), density, atoms)
}

/// `∫ dv(μ)`, integrating the spatial weight exactly instead of through cell averages.
pub fn action_integral(v: &Integrand, mu: &DiscreteMeasure) -> Result<f64> {
    let rec = v.recession_or_err()?;
    let mut total = 0.0;
    for (i, d) in mu.density.iter().enumerate() {
        let val = v.eval(d);
        total += match &v.spatial_weight {
            None => val * mu.mesh.cell_measure(i),
            Some(w) => val * mu.mesh.integrate_cell(i, &|x| w(x)),
        };
    }
    for a in &mu.atoms {
        total += v.weight(&a.location) * rec.eval(&a.direction) * a.mass;
    }
    Ok(total)
}

/// Deterministic samples on the unit sphere of `rows x cols` matrices:
/// signed coordinate directions first, then seeded Gaussian directions.
pub fn sphere_samples(rows: usize, cols: usize, extra: usize, seed: u64) -> Vec<Matrix> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            out.push(Matrix::unit(rows, cols, i, j));
            out.push(-Matrix::unit(rows, cols, i, j));
        }
    }
    if rows * cols == 1 {
        return out;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    while out.len() < 2 * rows * cols + extra {
        let mut m = Matrix::zeros(rows, cols);
        for x in m.as_mut_slice() {
            *x = StandardNormal.sample(&mut rng);
        }
        if let Some(u) = m.normalized() {
            out.push(u);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recession_of_abs_is_exact() {
        let v = lookup("abs:2x2").unwrap();
        let a = Matrix::unit(2, 2, 0, 0);
        let r = estimate_recession(&v, &a, &RecessionSchedule::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.exists);
    }

    #[test]
    fn recession_of_sqrt1p_tends_to_one() {
        let v = lookup("euclid_sqrt1p:1x2").unwrap();
        let a = Matrix::from_row_slice(1, 2, &[0.6, -0.8]);
        let r = estimate_recession(&v, &a, &RecessionSchedule::default()).unwrap();
        // oracle: sqrt(1 + α²)/α at α = 2^40 rounds to 1
        let oracle = (1.0 + 2f64.powi(80)).sqrt() / 2f64.powi(40);
        assert!(r.exists);
        assert!((r.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn oscillating_recession_does_not_exist() {
        let v = lookup("oscillating_1d").unwrap();
        let r = estimate_recession(&v, &Matrix::scalar(1.0), &RecessionSchedule::default()).unwrap();
        assert!(!r.exists);
        // limsup of sin(log(1+α)) over the tail is close to one
        let oracle = (20..=40).map(|k| ((1.0 + 2f64.powi(k)).ln()).sin()).fold(f64::NEG_INFINITY, f64::max);
        assert!((r.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn recession_needs_unit_direction() {
        let v = lookup("abs").unwrap();
        assert!(matches!(
            estimate_recession(&v, &Matrix::scalar(2.0), &RecessionSchedule::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let v = Integrand::new("blowup", 1, 1, |a| if a.norm() > 1e6 { f64::INFINITY } else { a.norm() });
        assert!(matches!(
            estimate_recession(&v, &Matrix::scalar(1.0), &RecessionSchedule::default()),
            Err(Error::IntegrandNotFinite { .. })
        ));
    }

    #[test]
    fn growth_constants() {
        let samples: Vec<Matrix> = (-200..=200).map(|k| Matrix::scalar(k as f64 * 5.0)).collect();
        let abs = check_linear_growth(&lookup("abs").unwrap(), &samples, None).unwrap();
        assert_eq!(abs, GrowthCheck { ok: true, fitted_c: 1.0 });
        let sq = check_linear_growth(&lookup("euclid_sqrt1p").unwrap(), &samples, None).unwrap();
        assert!(sq.ok && sq.fitted_c <= 2f64.sqrt());
        let quad = check_linear_growth(&lookup("quadratic").unwrap(), &samples, Some(10.0)).unwrap();
        // oracle: max t²/(1+t) at t = 1000
        assert!(!quad.ok);
        assert!((quad.fitted_c - 1e6 / 1001.0).abs() < 1e-9);
        assert!(check_linear_growth(&lookup("abs").unwrap(), &[], None).is_err());
    }

    #[test]
    fn measure_action_requires_recession() {
        let mesh = crate::mesh::Mesh::interval(0.0, 1.0, 2).unwrap();
        let mu = DiscreteMeasure::zero(mesh, 1, 1);
        assert!(matches!(measure_action(&lookup("quadratic").unwrap(), &mu), Err(Error::RecessionRequired(_))));
    }

    #[test]
    fn measure_action_on_atom_and_density() {
        let mesh = crate::mesh::Mesh::interval(0.0, 1.0, 2).unwrap();
        let mu = DiscreteMeasure::scalar(mesh, vec![-3.0, 2.0], vec![(vec![1.0], 0.25)]).unwrap();
        let act = measure_action(&lookup("abs").unwrap(), &mu).unwrap();
        assert_eq!(act.density[0].to_scalar(), 3.0);
        assert_eq!(act.atoms[0].mass, 0.25);
        assert!((act.total_variation() - (1.5 + 1.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn compose_right_with_rotation() {
        let v = lookup("linear_form:1,0").unwrap();
        let h = v.recession.unwrap();
        let r = crate::linalg::rotation(std::f64::consts::FRAC_PI_2);
        let hr = h.compose_right(&r);
        let a = Matrix::from_row_slice(1, 2, &[0.3, 0.7]);
        assert!((hr.eval(&a) - h.eval(&a.matmul(&r))).abs() < 1e-15);
    }
}
