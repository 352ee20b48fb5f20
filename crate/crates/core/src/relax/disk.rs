//! `J(u) = ∫_Ω w|∇u| + ∫_{Γ₁} √(1+(u−ū)²) dH¹` on the unit disk with `u = 0`
//! on `Γ₀` and weight `w(x) = dist(x, Γ₁)² + ε`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::optim::lbfgs;
use crate::quadrature::{gauss3_segment, triangle7};

const ANGLE_TOL: f64 = 1e-9;

/// Counterclockwise arc of the unit circle from `start` to `end` (radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BoundaryArc {
    pub start: f64,
    pub end: f64,
}

impl BoundaryArc {
    pub fn length(&self) -> f64 {
        let l = (self.end - self.start).rem_euclid(TAU);
        if l <= ANGLE_TOL { TAU } else { l }
    }

    /// Angle offset from `start`, counterclockwise, in `[0, 2π)`.
    fn offset(&self, theta: f64) -> f64 {
        (theta - self.start).rem_euclid(TAU)
    }

    pub fn contains(&self, theta: f64) -> bool {
        let s = self.offset(theta);
        s <= self.length() + ANGLE_TOL || s >= TAU - ANGLE_TOL
    }

    fn contains_strictly(&self, theta: f64) -> bool {
        let s = self.offset(theta);
        s > ANGLE_TOL && s < self.length() - ANGLE_TOL
    }

    fn overlaps(&self, other: &BoundaryArc) -> bool {
        let mid = |a: &BoundaryArc| a.start + 0.5 * a.length();
        self.contains_strictly(other.start)
            || other.contains_strictly(self.start)
            || self.contains_strictly(mid(other))
            || other.contains_strictly(mid(self))
    }

    fn point(theta: f64) -> [f64; 2] {
        [theta.cos(), theta.sin()]
    }

    /// Distance from `x` to the arc.
    fn distance(&self, x: [f64; 2]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r > 1e-15 && self.contains(x[1].atan2(x[0])) {
            return (1.0 - r).abs();
        }
        let d = |p: [f64; 2]| ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
        d(Self::point(self.start)).min(d(Self::point(self.end)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiskProblem {
    pub eps: f64,
    /// Dirichlet part, `u = 0`.
    pub gamma0: BoundaryArc,
    /// Part carrying the boundary penalty.
    pub gamma1: BoundaryArc,
    /// Samples of `ū` equispaced along `Γ₁` from `start` to `end` inclusive.
    pub ubar: Vec<f64>,
    /// Divisions of the level-1 disk mesh (even).
    pub base_divisions: usize,
    pub levels: usize,
}

impl DiskProblem {
    pub fn new(eps: f64, gamma0: BoundaryArc, gamma1: BoundaryArc, ubar: Vec<f64>) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::arg("ε must be positive"));
        }
        if gamma0.overlaps(&gamma1) {
            return Err(Error::arg("Γ₀ and Γ₁ overlap"));
        }
        if ubar.len() < 2 || ubar.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("ū needs at least two finite samples"));
        }
        Ok(DiskProblem { eps, gamma0, gamma1, ubar, base_divisions: 4, levels: 3 })
    }

    fn ubar_at(&self, theta: f64) -> f64 {
        let s = (self.gamma1.offset(theta) / self.gamma1.length()).clamp(0.0, 1.0);
        let t = s * (self.ubar.len() - 1) as f64;
        let k = (t.floor() as usize).min(self.ubar.len() - 2);
        let f = t - k as f64;
        (1.0 - f) * self.ubar[k] + f * self.ubar[k + 1]
    }

    fn weight(&self, x: [f64; 2]) -> f64 {
        self.gamma1.distance(x).powi(2) + self.eps
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiskLevel {
    pub level: usize,
    pub triangles: usize,
    /// `J` of this level's minimizer.
    pub raw: f64,
    /// Running minimum.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiskResult {
    pub inf_est: f64,
    pub levels: Vec<DiskLevel>,
    pub mesh: TriMesh,
    pub values: Vec<f64>,
}

/// Discretized `J` on one mesh with the Dirichlet vertices fixed at zero.
struct Discrete<'a> {
    mesh: &'a TriMesh,
    /// `∫_T w` per triangle.
    weights: Vec<f64>,
    hats: Vec<[[f64; 2]; 3]>,
    /// Boundary edges in `Γ₁` with quadrature `(barycentric s, weight, ū)`.
    edges: Vec<([usize; 2], [(f64, f64, f64); 3])>,
    free: Vec<bool>,
}

impl<'a> Discrete<'a> {
    fn new(p: &DiskProblem, mesh: &'a TriMesh) -> Self {
        let angle = |v: [f64; 2]| v[1].atan2(v[0]);
        let weights = (0..mesh.triangles.len())
            .map(|t| triangle7(mesh.corners(t)).iter().map(|(x, w)| w * p.weight(*x)).sum())
            .collect();
        let hats = (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect();
        let edges = mesh
            .boundary_edges()
            .into_iter()
            .filter(|e| e.iter().all(|&i| p.gamma1.contains(angle(mesh.vertices[i]))))
            .map(|e| {
                let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
                let q = gauss3_segment(a, b);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let mut pts = [(0.0, 0.0, 0.0); 3];
                for (k, (y, w)) in q.iter().enumerate() {
                    let s = ((y[0] - a[0]).powi(2) + (y[1] - a[1]).powi(2)).sqrt() / len;
                    pts[k] = (s, *w, p.ubar_at(angle(*y)));
                }
                (e, pts)
            })
            .collect();
        let free = (0..mesh.vertices.len())
            .map(|i| !(mesh.on_boundary[i] && p.gamma0.contains(angle(mesh.vertices[i]))))
            .collect();
        Discrete { mesh, weights, hats, edges, free }
    }

    fn grad(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let tri = self.mesh.triangles[t];
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += u[tri[k]] * self.hats[t][k][0];
            g[1] += u[tri[k]] * self.hats[t][k][1];
        }
        g
    }

    /// Objective with `|∇u|` replaced by `√(|∇u|²+δ²)` (exact for `δ = 0`).
    fn value(&self, u: &[f64], delta: f64) -> f64 {
        let bulk: f64 = (0..self.weights.len())
            .into_par_iter()
            .map(|t| {
                let g = self.grad(t, u);
                self.weights[t] * (g[0] * g[0] + g[1] * g[1] + delta * delta).sqrt()
            })
            .sum();
        let bd: f64 = self
            .edges
            .iter()
            .map(|(e, q)| q.iter().map(|&(s, w, ub)| w * (1.0 + ((1.0 - s) * u[e[0]] + s * u[e[1]] - ub).powi(2)).sqrt()).sum::<f64>())
            .sum();
        bulk + bd
    }

    fn gradient(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for t in 0..self.weights.len() {
            let g = self.grad(t, u);
            let n = (g[0] * g[0] + g[1] * g[1] + delta * delta).sqrt();
            let c = self.weights[t] / n;
            let tri = self.mesh.triangles[t];
            for k in 0..3 {
                out[tri[k]] += c * (g[0] * self.hats[t][k][0] + g[1] * self.hats[t][k][1]);
            }
        }
        for (e, q) in &self.edges {
            for &(s, w, ub) in q {
                let r = (1.0 - s) * u[e[0]] + s * u[e[1]] - ub;
                let d = w * r / (1.0 + r * r).sqrt();
                out[e[0]] += (1.0 - s) * d;
                out[e[1]] += s * d;
            }
        }
        for (o, &f) in out.iter_mut().zip(&self.free) {
            if !f {
                *o = 0.0;
            }
        }
        out
    }

    fn minimize(&self, mut u: Vec<f64>) -> Result<Vec<f64>> {
        for (v, &f) in u.iter_mut().zip(&self.free) {
            if !f {
                *v = 0.0;
            }
        }
        for delta in [1e-2, 1e-4, 1e-6] {
            let cost = |x: &[f64]| self.value(x, delta);
            let grad = |x: &[f64]| self.gradient(x, delta);
            u = lbfgs(&cost, &grad, u, 400)?;
        }
        Ok(u)
    }
}

/// Minimizes the discretized `J` over continuous piecewise linear fields on
/// successively refined disk meshes, warm started from the prolonged
/// previous minimizer. The estimate is the running minimum of the exact
/// (unsmoothed) `J`; the prolonged coarse minimizer is itself admissible
/// on the finer nested mesh.
pub fn higher_dim_j(p: &DiskProblem) -> Result<DiskResult> {
    if p.levels == 0 {
        return Err(Error::arg("at least one mesh level is needed"));
    }
    let mut mesh = TriMesh::disk(p.base_divisions, [1.0, 0.0])?;
    let mut u = vec![0.0; mesh.vertices.len()];
    let mut levels = Vec::with_capacity(p.levels);
    let mut best = f64::INFINITY;
    for level in 1..=p.levels {
        if level > 1 {
            let (fine, parents) = mesh.refine_with_parents();
            u = parents.iter().map(|&(i, j)| 0.5 * (u[i] + u[j])).collect();
            mesh = fine;
        }
        let d = Discrete::new(p, &mesh);
        let start = d.value(&u, 0.0);
        let v = d.minimize(u.clone())?;
        let raw = d.value(&v, 0.0);
        if raw <= start || level == 1 {
            u = v;
        }
        best = best.min(raw).min(if level > 1 { start } else { f64::INFINITY });
        levels.push(DiskLevel { level, triangles: mesh.triangles.len(), raw, value: best });
    }
    Ok(DiskResult { inf_est: best, levels, mesh, values: u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn halves() -> (BoundaryArc, BoundaryArc) {
        (BoundaryArc { start: PI, end: 0.0 }, BoundaryArc { start: 0.0, end: PI })
    }

    #[test]
    fn overlapping_arcs_are_rejected() {
        let (g0, _) = halves();
        let g1 = BoundaryArc { start: -0.5, end: PI };
        assert!(DiskProblem::new(0.1, g0, g1, vec![0.0, 0.0]).is_err());
        let (g0, g1) = halves();
        assert!(DiskProblem::new(0.1, g0, g1, vec![0.0, 0.0]).is_ok());
    }

    #[test]
    fn zero_target_gives_polygon_length() {
        let (g0, g1) = halves();
        let mut p = DiskProblem::new(0.1, g0, g1, vec![0.0, 0.0]).unwrap();
        p.levels = 2;
        let r = higher_dim_j(&p).unwrap();
        // oracle: u ≡ 0 is optimal and J(0) is the length of the polygonal Γ₁
        let m = &r.mesh;
        let len: f64 = m
            .boundary_edges()
            .iter()
            .filter(|e| e.iter().all(|&i| g1.contains(m.vertices[i][1].atan2(m.vertices[i][0]))))
            .map(|e| {
                let (a, b) = (m.vertices[e[0]], m.vertices[e[1]]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .sum();
        assert!((r.inf_est - len).abs() < 1e-9, "{} vs {len}", r.inf_est);
        assert!(len < PI && len > 0.95 * PI);
    }

    #[test]
    fn levels_are_monotone() {
        let (g0, g1) = halves();
        let p = DiskProblem::new(0.1, g0, g1, vec![1.0, 2.0, 1.0]).unwrap();
        let r = higher_dim_j(&p).unwrap();
        assert!(r.levels.windows(2).all(|w| w[1].value <= w[0].value));
        // u ≡ 0 competes: J(0) ≤ ∫_{Γ₁} √(1+ū²) ≤ π√5
        assert!(r.inf_est < PI * 5f64.sqrt());
    }
}
