use serde::{Deserialize, Serialize};

use super::{HomogeneousIntegrand, Integrand};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Piecewise linear function of one variable, extended linearly beyond the
/// first and last knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear1d {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PiecewiseLinear1d {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 {
            return self.ys[0];
        }
        let i = self.xs.partition_point(|&x| x <= t).clamp(1, n - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    pub fn left_slope(&self) -> f64 {
        if self.xs.len() < 2 {
            return 0.0;
        }
        (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0])
    }

    pub fn right_slope(&self) -> f64 {
        let n = self.xs.len();
        if n < 2 {
            return 0.0;
        }
        (self.ys[n - 1] - self.ys[n - 2]) / (self.xs[n - 1] - self.xs[n - 2])
    }
}

/// Lower convex hull of the sampled graph `{(t, v(t)) : t ∈ grid}` (monotone
/// chain), returned as a piecewise linear integrand with its recession
/// function given by the outer slopes.
pub fn convex_envelope_1d(v: &Integrand, grid: &[f64]) -> Result<(Integrand, PiecewiseLinear1d)> {
    if v.rows != 1 || v.cols != 1 {
        return Err(Error::arg("convex envelope needs a scalar integrand"));
    }
    if grid.len() < 2 {
        return Err(Error::arg("convex envelope needs at least two grid points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("grid must be strictly increasing"));
    }
    let pts: Vec<(f64, f64)> = grid.iter().map(|&t| (t, v.eval(&Matrix::scalar(t)))).collect();
    if let Some(p) = pts.iter().find(|p| !p.1.is_finite()) {
        return Err(Error::IntegrandNotFinite { at: format!("{}", p.0) });
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            // drop `a` unless it lies strictly below the chord o -> p
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let pl = PiecewiseLinear1d { xs: hull.iter().map(|p| p.0).collect(), ys: hull.iter().map(|p| p.1).collect() };
    let (sl, sr) = (pl.left_slope(), pl.right_slope());
    let rec = HomogeneousIntegrand::new(format!("env({})∞", v.name), 1, 1, move |u| {
        if u.to_scalar() >= 0.0 {
            sr
        } else {
            -sl
        }
    });
    let c = sl.abs().max(sr.abs()).max(pl.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()))).max(1.0);
    let f = pl.clone();
    let env = Integrand::new(format!("env({})", v.name), 1, 1, move |a| f.eval(a.to_scalar()))
        .with_growth(c)
        .with_recession(rec)
        .convex();
    Ok((env, pl))
}

/// Rank-one splitting amplitudes tried at every level.
const AMPLITUDES: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Upper bound for the quasiconvex envelope by rank-one laminates of the
/// given depth: `R_d(A) = min(v(A), min t R_{d−1}(A − s₁D) + (1−t) R_{d−1}(A + s₂D))`
/// over rank-one `D = a ⊗ b` with `a, b` drawn from a fixed list of unit
/// vectors and amplitudes `s₁, s₂`, `t = s₂/(s₁+s₂)`. The same candidates
/// are used at every depth, so the bound is nonincreasing in `depth`.
/// `budget` caps the number of candidates per level.
pub fn lamination_upper_bound(v: &Integrand, a: &Matrix, depth: usize, budget: usize) -> f64 {
    let dirs = rank_one_directions(v.rows, v.cols);
    let mut cands: Vec<(Matrix, f64, f64)> = Vec::new();
    'outer: for d in &dirs {
        for &s1 in &AMPLITUDES {
            for &s2 in &AMPLITUDES {
                if cands.len() >= budget {
                    break 'outer;
                }
                cands.push((*d, s1, s2));
            }
        }
    }
    lam(v, a, depth, &cands)
}

fn lam(v: &Integrand, a: &Matrix, depth: usize, cands: &[(Matrix, f64, f64)]) -> f64 {
    let own = v.eval(a);
    if depth == 0 {
        return own;
    }
    cands.iter().fold(own, |best, &(d, s1, s2)| {
        let t = s2 / (s1 + s2);
        let val = t * lam(v, &(*a - d.scale(s1)), depth - 1, cands)
            + (1.0 - t) * lam(v, &(*a + d.scale(s2)), depth - 1, cands);
        best.min(val)
    })
}

fn rank_one_directions(rows: usize, cols: usize) -> Vec<Matrix> {
    let unit_vectors = |n: usize| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            for j in i + 1..n {
                let mut p = vec![0.0; n];
                p[i] = s;
                p[j] = s;
                out.push(p.clone());
                p[j] = -s;
                out.push(p);
            }
        }
        out
    };
    let mut out = Vec::new();
    for a in unit_vectors(rows) {
        for b in unit_vectors(cols) {
            out.push(Matrix::outer(&a, &b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrands::lookup;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn envelope_of_convex_is_itself() {
        let g = grid(-3.0, 3.0, 61);
        let (env, _) = convex_envelope_1d(&lookup("abs").unwrap(), &g).unwrap();
        for &t in &g {
            assert!((env.eval(&Matrix::scalar(t)) - t.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_needs_two_points() {
        assert!(convex_envelope_1d(&lookup("abs").unwrap(), &[0.0]).is_err());
    }

    #[test]
    fn envelope_extends_linearly() {
        let (env, pl) = convex_envelope_1d(&lookup("double_well_1d").unwrap(), &grid(-2.0, 2.0, 401)).unwrap();
        assert!((env.eval(&Matrix::scalar(5.0)) - 4.0).abs() < 1e-12);
        assert_eq!(pl.right_slope(), 1.0);
        let r = env.recession.unwrap();
        assert_eq!(r.eval(&Matrix::scalar(-2.0)), 2.0);
    }

    #[test]
    fn lamination_depth_zero_and_convex() {
        let dw = lookup("double_well_1d").unwrap();
        let a = Matrix::scalar(0.3);
        assert_eq!(lamination_upper_bound(&dw, &a, 0, 100), 0.7);
        let abs = lookup("abs:2x2").unwrap();
        let b = Matrix::from_row_slice(2, 2, &[0.1, -0.4, 0.3, 0.2]);
        for d in 0..3 {
            assert!((lamination_upper_bound(&abs, &b, d, 40) - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn lamination_of_double_well_at_zero() {
        let dw = lookup("double_well_1d").unwrap();
        assert_eq!(lamination_upper_bound(&dw, &Matrix::scalar(0.0), 1, 100), 0.0);
    }
}
