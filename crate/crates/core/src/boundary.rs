//! Boundary positivity of 1-homogeneous integrands on the half-ball
//! `D_ϱ = {x ∈ B : x·ϱ < 0}`: QSLB and JQCB verifiers, rank-one tests,
//! rotation equivariance and the sphere measures `δ̄_{ϱ,∇φ}`.
//!
//! Test fields are continuous piecewise-affine on a triangulated unit disk
//! and vanish on the polygonal boundary circle. In one dimension everything
//! reduces to closed-form statements about `v^∞(±1)`.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrands::{sphere_samples, HomogeneousIntegrand};
use crate::linalg::{rotation_to, Matrix};
use crate::mesh::TriMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Qslb,
    NotQslb,
    Inconclusive,
}

/// Vector-valued P1 field on a triangle mesh, `values[vertex][component]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarField {
    pub mesh: TriMesh,
    pub values: Vec<Vec<f64>>,
}

impl PlanarField {
    pub fn components(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn gradient(&self, t: usize) -> Matrix {
        let m = self.components();
        let tri = self.mesh.triangles[t];
        let g = self.mesh.hat_gradients(t);
        let v = &self.values;
        // differences keep the gradient of a locally constant field exactly zero
        Matrix::from_fn(m, 2, |i, j| {
            (v[tri[1]][i] - v[tri[0]][i]) * g[1][j] + (v[tri[2]][i] - v[tri[0]][i]) * g[2][j]
        })
    }

    /// Largest absolute value on boundary vertices.
    pub fn boundary_defect(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mesh.on_boundary)
            .filter(|(_, &b)| b)
            .flat_map(|(v, _)| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }
}

/// Unit disk mesh together with the half-ball `D_ϱ` (triangles whose
/// centroid lies on the negative side of `ϱ`) and the free vertices.
#[derive(Clone, Debug)]
pub struct HalfBallProblem {
    pub rho: [f64; 2],
    pub mesh: TriMesh,
    pub in_half: Vec<bool>,
    pub free: Vec<bool>,
    half: Vec<usize>,
    areas: Vec<f64>,
    hats: Vec<[[f64; 2]; 3]>,
}

impl HalfBallProblem {
    /// Level `L ≥ 1` uses `8·2^(L−1)` divisions per side of the reference square.
    pub fn new(rho: [f64; 2], level: usize) -> Result<Self> {
        if level == 0 || level > 8 {
            return Err(Error::arg("mesh level must lie in 1..=8"));
        }
        let mesh = TriMesh::disk(8 << (level - 1), unit2(rho)?)?;
        HalfBallProblem::on_mesh(rho, mesh)
    }

    pub fn on_mesh(rho: [f64; 2], mesh: TriMesh) -> Result<Self> {
        let rho = unit2(rho)?;
        let in_half: Vec<bool> = (0..mesh.triangles.len())
            .map(|t| {
                let c = mesh.centroid(t);
                c[0] * rho[0] + c[1] * rho[1] < 0.0
            })
            .collect();
        let half: Vec<usize> = (0..in_half.len()).filter(|&t| in_half[t]).collect();
        let mut touched = vec![false; mesh.vertices.len()];
        for &t in &half {
            for &k in &mesh.triangles[t] {
                touched[k] = true;
            }
        }
        let free = touched.iter().zip(&mesh.on_boundary).map(|(&t, &b)| t && !b).collect();
        let areas = (0..mesh.triangles.len()).map(|t| mesh.area(t)).collect();
        let hats = (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect();
        Ok(HalfBallProblem { rho, mesh, in_half, free, half, areas, hats })
    }

    pub fn tangent(&self) -> [f64; 2] {
        [-self.rho[1], self.rho[0]]
    }

    pub fn half_area(&self) -> f64 {
        self.half.iter().map(|&t| self.areas[t]).sum()
    }

    fn grad(&self, t: usize, phi: &[f64], m: usize) -> Matrix {
        let tri = self.mesh.triangles[t];
        let g = &self.hats[t];
        Matrix::from_fn(m, 2, |i, j| {
            (phi[tri[1] * m + i] - phi[tri[0] * m + i]) * g[1][j] + (phi[tri[2] * m + i] - phi[tri[0] * m + i]) * g[2][j]
        })
    }

    /// `(∫_{D_ϱ} v(∇φ), ∫_{D_ϱ} |∇φ|)` for a flat field of `m` components.
    pub fn energies(&self, v: &HomogeneousIntegrand, phi: &[f64], m: usize) -> (f64, f64) {
        let mut j = 0.0;
        let mut tv = 0.0;
        for &t in &self.half {
            let g = self.grad(t, phi, m);
            j += self.areas[t] * v.eval(&g);
            tv += self.areas[t] * g.norm();
        }
        (j, tv)
    }

    fn energies_tv(&self, phi: &[f64], m: usize) -> f64 {
        self.half.iter().map(|&t| self.areas[t] * self.grad(t, phi, m).norm()).sum()
    }

    /// `∫_{D_ϱ} ∇φ`.
    pub fn mean_gradient(&self, phi: &[f64], m: usize) -> Matrix {
        self.half
            .iter()
            .fold(Matrix::zeros(m, 2), |acc, &t| acc + self.grad(t, phi, m).scale(self.areas[t]))
    }

    /// Energies plus subgradients with respect to the nodal values.
    fn energies_with_subgradients(&self, v: &HomogeneousIntegrand, phi: &[f64], m: usize) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let mut gj = vec![0.0; phi.len()];
        let mut gt = vec![0.0; phi.len()];
        let (mut j, mut tv) = (0.0, 0.0);
        // gradients this small are rounding noise of a locally constant field
        let floor = 1e-9 * self.energies_tv(phi, m) / self.half_area();
        for &t in &self.half {
            let g = self.grad(t, phi, m);
            let a = self.areas[t];
            let n = g.norm();
            j += a * v.eval(&g);
            tv += a * n;
            let (sj, st) = if n > floor {
                (v.subgradient(&g), g.scale(1.0 / n))
            } else {
                (v.subgradient(&Matrix::zeros(m, 2)), Matrix::zeros(m, 2))
            };
            let tri = self.mesh.triangles[t];
            let h = &self.hats[t];
            for (k, &node) in tri.iter().enumerate() {
                for i in 0..m {
                    let dj = sj[(i, 0)] * h[k][0] + sj[(i, 1)] * h[k][1];
                    let dt = st[(i, 0)] * h[k][0] + st[(i, 1)] * h[k][1];
                    gj[node * m + i] += a * dj;
                    gt[node * m + i] += a * dt;
                }
            }
        }
        (j, tv, gj, gt)
    }

    fn to_field(&self, phi: &[f64], m: usize) -> PlanarField {
        PlanarField { mesh: self.mesh.clone(), values: phi.chunks(m).map(<[f64]>::to_vec).collect() }
    }

    fn flatten(&self, f: impl Fn([f64; 2]) -> Vec<f64>, m: usize) -> Vec<f64> {
        let mut phi = vec![0.0; self.mesh.vertices.len() * m];
        for (k, x) in self.mesh.vertices.iter().enumerate() {
            if self.free[k] {
                phi[k * m..(k + 1) * m].copy_from_slice(&f(*x));
            }
        }
        phi
    }

    /// Tent of height one and radius `r` centred at `c`, times the vector `a`.
    fn tent(&self, c: [f64; 2], r: f64, a: &[f64]) -> Vec<f64> {
        self.flatten(
            |x| {
                let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
                let h = (1.0 - d / r).max(0.0);
                a.iter().map(|ai| ai * h).collect()
            },
            a.len(),
        )
    }

    /// Deterministic starting fields: tents `a ⊗ ϱ`-like at the flat part,
    /// an interior bump, then seeded random fields.
    fn seeds(&self, m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let tau = self.tangent();
        let dirs: Vec<Vec<f64>> = (0..m)
            .flat_map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                let neg: Vec<f64> = e.iter().map(|x| -x).collect();
                [e, neg]
            })
            .collect();
        let mut out = Vec::new();
        for s in [0.0, -0.4, 0.4] {
            let c = [s * tau[0], s * tau[1]];
            for a in &dirs {
                out.push(self.tent(c, 0.9 * (1.0 - f64::abs(s)), a));
            }
        }
        let c = [-0.5 * self.rho[0], -0.5 * self.rho[1]];
        for a in &dirs {
            out.push(self.tent(c, 0.45, a));
        }
        out.truncate(count);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        while out.len() < count {
            let mut phi = vec![0.0; self.mesh.vertices.len() * m];
            for (k, chunk) in phi.chunks_mut(m).enumerate() {
                for x in chunk {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if self.free[k] {
                        *x = z;
                    }
                }
            }
            out.push(phi);
        }
        out
    }
}

fn unit2(rho: [f64; 2]) -> Result<[f64; 2]> {
    let n = (rho[0] * rho[0] + rho[1] * rho[1]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::arg("normal must be a nonzero vector"));
    }
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("normal must be a unit vector (norm {n})")));
    }
    Ok(rho)
}

#[derive(Clone, Debug, Serialize)]
pub struct QslbOptions {
    /// Finest mesh level; all levels `1..=levels` are minimized.
    pub levels: usize,
    /// Descent iterations per level, split evenly over the restarts.
    pub budget: usize,
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for QslbOptions {
    fn default() -> Self {
        QslbOptions { levels: 3, budget: 10_000, restarts: 12, tol: 1e-4, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QslbReport {
    /// `min(0, best ratio)` over all levels.
    pub inf_est: f64,
    pub verdict: Verdict,
    /// Best value of `∫ v(∇φ) / ∫ |∇φ|` on each level.
    pub per_level: Vec<f64>,
    /// Field attaining the overall best ratio (two dimensions only).
    pub witness: Option<PlanarField>,
}

fn verdict(inf: f64, tol: f64) -> Verdict {
    if inf >= -tol {
        Verdict::Qslb
    } else if inf <= -10.0 * tol {
        Verdict::NotQslb
    } else {
        Verdict::Inconclusive
    }
}

fn check_homogeneous(v: &HomogeneousIntegrand, rho: &[f64]) -> Result<()> {
    if v.cols != rho.len() {
        return Err(Error::arg(format!("integrand has {} columns but the normal has dimension {}", v.cols, rho.len())));
    }
    if !matches!(rho.len(), 1 | 2) {
        return Err(Error::arg("only one- and two-dimensional domains are supported"));
    }
    let samples = sphere_samples(v.rows, v.cols, 16, 11);
    let defect = v.homogeneity_defect(&samples, &[0.5, 3.0, 1e3]);
    if !(defect <= 1e-9) {
        return Err(Error::arg(format!("{} is not positively 1-homogeneous (defect {defect:e})", v.name)));
    }
    Ok(())
}

/// Estimates `inf ∫_{D_ϱ} v(∇φ)` over test fields with `∫_{D_ϱ}|∇φ| = 1`.
pub fn qslb_infimum(v: &HomogeneousIntegrand, rho: &[f64], opts: &QslbOptions) -> Result<QslbReport> {
    check_homogeneous(v, rho)?;
    if rho.len() == 1 {
        // the flat endpoint is free, so ∇φ ranges over all of L¹(D)
        if (rho[0].abs() - 1.0).abs() > 1e-12 {
            return Err(Error::arg("normal must be ±1"));
        }
        let best = sphere_samples(v.rows, 1, 256, opts.seed)
            .iter()
            .map(|p| v.sphere_eval(p))
            .fold(f64::INFINITY, f64::min);
        let inf = best.min(0.0);
        return Ok(QslbReport { inf_est: inf, verdict: verdict(inf, opts.tol), per_level: vec![best], witness: None });
    }
    if opts.levels == 0 {
        return Err(Error::arg("mesh level must be at least 1"));
    }
    let rho2 = [rho[0], rho[1]];
    let mut per_level = Vec::with_capacity(opts.levels);
    let mut best: Option<(f64, PlanarField)> = None;
    for level in 1..=opts.levels {
        let p = HalfBallProblem::new(rho2, level)?;
        let (value, field) = minimize_ratio(&p, v, opts);
        per_level.push(value);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, field));
        }
    }
    let (b, witness) = best.expect("at least one level");
    let inf = b.min(0.0);
    Ok(QslbReport { inf_est: inf, verdict: verdict(inf, opts.tol), per_level, witness: Some(witness) })
}

/// Best ratio `∫v(∇φ)/∫|∇φ|` found by normalized subgradient descent from
/// the deterministic restarts, and the field attaining it.
pub fn minimize_ratio(p: &HalfBallProblem, v: &HomogeneousIntegrand, opts: &QslbOptions) -> (f64, PlanarField) {
    let m = v.rows;
    let restarts = opts.restarts.max(1);
    let iters = opts.budget / restarts;
    let results: Vec<(f64, Vec<f64>)> = p
        .seeds(m, restarts, opts.seed)
        .into_par_iter()
        .map(|phi| descend(p, v, m, phi, iters))
        .collect();
    let (value, phi) = results
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, r| if r.0 < acc.0 { r } else { acc });
    if phi.is_empty() {
        let zero = vec![0.0; p.mesh.vertices.len() * m];
        return (0.0, p.to_field(&zero, m));
    }
    (value, p.to_field(&phi, m))
}

fn descend(p: &HalfBallProblem, v: &HomogeneousIntegrand, m: usize, mut phi: Vec<f64>, iters: usize) -> (f64, Vec<f64>) {
    let (j, tv) = p.energies(v, &phi, m);
    if !(tv > 0.0) {
        return (f64::INFINITY, Vec::new());
    }
    phi.iter_mut().for_each(|x| *x /= tv);
    let mut best = (j / tv, phi.clone());
    for k in 0..iters {
        let (j, tv, gj, gt) = p.energies_with_subgradients(v, &phi, m);
        if !(tv > 0.0) {
            break;
        }
        let r = j / tv;
        if r < best.0 {
            best = (r, phi.iter().map(|x| x / tv).collect());
        }
        let mut d: Vec<f64> = gj.iter().zip(&gt).map(|(a, b)| (a - r * b) / tv).collect();
        for (k, chunk) in d.chunks_mut(m).enumerate() {
            if !p.free[k] {
                chunk.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let dn = crate::linalg::norm(&d);
        if dn == 0.0 {
            break;
        }
        let pn = crate::linalg::norm(&phi);
        let step = 0.2 * pn / (1.0 + k as f64).sqrt();
        for (x, dx) in phi.iter_mut().zip(&d) {
            *x -= step * dx / dn;
        }
        let (_, tv) = p.energies(v, &phi, m);
        if !(tv > 0.0) {
            break;
        }
        phi.iter_mut().for_each(|x| *x /= tv);
    }
    let (j, tv) = p.energies(v, &phi, m);
    if tv > 0.0 && j / tv < best.0 {
        best = (j / tv, phi);
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct RankOneReport {
    pub ok: bool,
    pub worst_a: Vec<f64>,
    pub worst_value: f64,
}

/// `min_a v(a ⊗ ϱ)` over the sampled unit vectors `a`; nonnegativity is
/// necessary for QSLB.
pub fn rank_one_positivity(v: &HomogeneousIntegrand, rho: &[f64], a_samples: &[Vec<f64>], tol: f64) -> Result<RankOneReport> {
    if v.cols != rho.len() {
        return Err(Error::arg("normal dimension does not match the integrand"));
    }
    let mut worst = RankOneReport { ok: true, worst_a: Vec::new(), worst_value: f64::INFINITY };
    for a in a_samples {
        if a.len() != v.rows {
            return Err(Error::arg("sample vector has the wrong length"));
        }
        let n = crate::linalg::norm(a);
        if n == 0.0 {
            continue;
        }
        let a: Vec<f64> = a.iter().map(|x| x / n).collect();
        let val = v.eval(&Matrix::outer(&a, rho));
        if val < worst.worst_value {
            worst.worst_value = val;
            worst.worst_a = a;
        }
    }
    worst.ok = worst.worst_value >= -tol;
    Ok(worst)
}

/// Unit vectors in `R^m`: `±e_i`, then seeded Gaussian directions.
pub fn unit_vectors(m: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    sphere_samples(m, 1, extra, seed).iter().map(|p| p.as_slice().to_vec()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct JqcbOptions {
    pub level: usize,
    /// Hill-climbing steps after the library scan.
    pub budget: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for JqcbOptions {
    fn default() -> Self {
        JqcbOptions { level: 2, budget: 2000, tol: 1e-8, seed: 0 }
    }
}

/// A field with `v(∫∇φ) > ∫v(∇φ)`, summarized by its gradient distribution
/// over `D_ϱ`.
#[derive(Clone, Debug, Serialize)]
pub struct JqcbCounterexample {
    /// Gradient values with the measure of the set where they are taken.
    pub gradients: Vec<(Matrix, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub field: Option<PlanarField>,
}

/// Searches for a violation of `v(∫_{D_ϱ}∇φ) ≤ ∫_{D_ϱ}v(∇φ)`. `None` means
/// "not disproved".
pub fn jqcb_falsify(v: &HomogeneousIntegrand, rho: &[f64], opts: &JqcbOptions) -> Result<Option<JqcbCounterexample>> {
    check_homogeneous(v, rho)?;
    if rho.len() == 1 {
        // on an interval with one free end the condition is subadditivity of v
        let samples = sphere_samples(v.rows, 1, 64, opts.seed);
        for p in &samples {
            for q in &samples {
                let lhs = v.eval(&(*p + *q));
                let rhs = v.eval(p) + v.eval(q);
                if lhs - rhs > opts.tol * (1.0 + rhs.abs()) {
                    return Ok(Some(JqcbCounterexample {
                        gradients: vec![(p.scale(2.0), 0.5), (q.scale(2.0), 0.5)],
                        lhs,
                        rhs,
                        field: None,
                    }));
                }
            }
        }
        return Ok(None);
    }
    let p = HalfBallProblem::new([rho[0], rho[1]], opts.level)?;
    let m = v.rows;
    let defect = |phi: &[f64]| -> (f64, f64, f64) {
        let (rhs, _) = p.energies(v, phi, m);
        let lhs = v.eval(&p.mean_gradient(phi, m));
        (lhs - rhs, lhs, rhs)
    };
    let violated = |phi: &[f64]| -> bool {
        let (_, tv) = p.energies(v, phi, m);
        let (d, _, _) = defect(phi);
        tv > 0.0 && d > opts.tol * tv
    };
    let mut library = p.seeds(m, 2 * m * 4 + 8, opts.seed);
    let tau = p.tangent();
    let dirs = unit_vectors(m, 8, opts.seed);
    for a in &dirs {
        for b in &dirs {
            let mut phi = p.tent([-0.4 * tau[0], -0.4 * tau[1]], 0.5, a);
            let other = p.tent([0.4 * tau[0], 0.4 * tau[1]], 0.5, b);
            phi.iter_mut().zip(&other).for_each(|(x, y)| *x += y);
            library.push(phi);
            let mut nested = p.tent([0.0, 0.0], 0.9, a);
            let inner = p.tent([-0.3 * p.rho[0], -0.3 * p.rho[1]], 0.3, b);
            nested.iter_mut().zip(&inner).for_each(|(x, y)| *x += 2.0 * y);
            library.push(nested);
        }
    }
    let report = |phi: &[f64]| {
        let (_, lhs, rhs) = defect(phi);
        let field = p.to_field(phi, m);
        let gradients = p
            .half
            .iter()
            .map(|&t| (p.grad(t, phi, m), p.areas[t]))
            .filter(|(g, _)| g.norm() > 0.0)
            .collect();
        JqcbCounterexample { gradients, lhs, rhs, field: Some(field) }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for phi in library {
        if violated(&phi) {
            return Ok(Some(report(&phi)));
        }
        let (_, tv) = p.energies(v, &phi, m);
        if tv > 0.0 {
            let score = defect(&phi).0 / tv;
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, phi));
            }
        }
    }
    let Some((mut score, mut phi)) = best else { return Ok(None) };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
    let mut scale = 0.1 * phi.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
    for _ in 0..opts.budget {
        let mut trial = phi.clone();
        for (k, chunk) in trial.chunks_mut(m).enumerate() {
            if p.free[k] {
                for x in chunk {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x += scale * z;
                }
            }
        }
        if violated(&trial) {
            return Ok(Some(report(&trial)));
        }
        let (_, tv) = p.energies(v, &trial, m);
        if tv > 0.0 {
            let s = defect(&trial).0 / tv;
            if s > score {
                score = s;
                phi = trial;
                continue;
            }
        }
        scale *= 0.995;
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationGap {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub gap: f64,
}

/// Compares the per-level infima for `(v, ϱ₁)` with those of `A ↦ v(AR)` at
/// `ϱ₂ = Rϱ₁`, the second problem living on the rotated image meshes.
pub fn rotation_equivariance_check(v: &HomogeneousIntegrand, rho1: [f64; 2], rho2: [f64; 2], opts: &QslbOptions) -> Result<RotationGap> {
    check_homogeneous(v, &rho1)?;
    let r = rotation_to(unit2(rho2)?).matmul(&rotation_to(unit2(rho1)?).transpose());
    let v2 = v.compose_right(&r);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for level in 1..=opts.levels.max(1) {
        let p1 = HalfBallProblem::new(rho1, level)?;
        let p2 = HalfBallProblem::on_mesh(rho2, p1.mesh.mapped(&r))?;
        first.push(minimize_ratio(&p1, v, opts).0);
        second.push(minimize_ratio(&p2, &v2, opts).0);
    }
    let gap = first.iter().zip(&second).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(RotationGap { first, second, gap })
}

/// Finite nonnegative measure on unit matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereMeasure {
    pub rows: usize,
    pub cols: usize,
    pub atoms: Vec<(Matrix, f64)>,
}

impl SphereMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn pair(&self, v: &HomogeneousIntegrand) -> f64 {
        self.atoms.iter().map(|(p, w)| w * v.sphere_eval(p)).sum()
    }

    /// Weight of the atom at `p` (zero if absent).
    pub fn weight_at(&self, p: &Matrix, tol: f64) -> f64 {
        self.atoms.iter().filter(|(q, _)| q.max_abs_diff(p) <= tol).map(|a| a.1).sum()
    }

    /// `t·self + (1−t)·other`.
    pub fn combine(&self, other: &SphereMeasure, t: f64) -> SphereMeasure {
        let mut out = SphereMeasure { rows: self.rows, cols: self.cols, atoms: Vec::new() };
        for (p, w) in &self.atoms {
            push_merged(&mut out.atoms, *p, t * w);
        }
        for (p, w) in &other.atoms {
            push_merged(&mut out.atoms, *p, (1.0 - t) * w);
        }
        out.atoms.retain(|a| a.1 > 0.0);
        out
    }

    /// Largest weight difference over the union of supports.
    pub fn distance(&self, other: &SphereMeasure) -> f64 {
        let tol = 1e-12;
        self.atoms
            .iter()
            .chain(&other.atoms)
            .map(|(p, _)| (self.weight_at(p, tol) - other.weight_at(p, tol)).abs())
            .fold(0.0, f64::max)
    }
}

fn push_merged(atoms: &mut Vec<(Matrix, f64)>, p: Matrix, w: f64) {
    match atoms.iter_mut().find(|(q, _)| q.max_abs_diff(&p) <= 1e-12) {
        Some(a) => a.1 += w,
        None => atoms.push((p, w)),
    }
}

/// `⟨δ̄_{ϱ,∇φ}, v⟩ = ∫_{D_ϱ} v(∇φ/|∇φ|)|∇φ|`: the image of `|∇φ| dx` on
/// `D_ϱ` under the direction map. Triangles with zero gradient are skipped.
pub fn hrho_element(field: &PlanarField, rho: [f64; 2]) -> Result<SphereMeasure> {
    let rho = unit2(rho)?;
    let m = field.components();
    let mut out = SphereMeasure { rows: m, cols: 2, atoms: Vec::new() };
    for t in 0..field.mesh.triangles.len() {
        let c = field.mesh.centroid(t);
        if c[0] * rho[0] + c[1] * rho[1] >= 0.0 {
            continue;
        }
        let g = field.gradient(t);
        let n = g.norm();
        if n > 0.0 {
            push_merged(&mut out.atoms, g.scale(1.0 / n), field.mesh.area(t) * n);
        }
    }
    Ok(out)
}

/// A field whose sphere measure is `t·δ̄₁ + (1−t)·δ̄₂`: two disjoint copies
/// of the inputs shrunk by `1/4` around `±τ/2` on the flat part (`τ ⊥ ϱ`),
/// with amplitudes `t·4` and `(1−t)·4`. Outside the copies the field is zero
/// and carries no triangles.
pub fn hrho_convex_combination(phi1: &PlanarField, phi2: &PlanarField, rho: [f64; 2], t: f64) -> Result<PlanarField> {
    let rho = unit2(rho)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::arg("convex weight must lie in [0, 1]"));
    }
    if phi1.components() != phi2.components() {
        return Err(Error::arg("fields must have the same number of components"));
    }
    const R: f64 = 0.25;
    let tau = [-rho[1], rho[0]];
    let mut mesh = TriMesh { vertices: Vec::new(), triangles: Vec::new(), on_boundary: Vec::new() };
    let mut values = Vec::new();
    for (phi, s, sign) in [(phi1, t, -0.5), (phi2, 1.0 - t, 0.5)] {
        if s == 0.0 {
            continue;
        }
        let off = mesh.vertices.len();
        let c = [sign * tau[0], sign * tau[1]];
        for (x, b) in phi.mesh.vertices.iter().zip(&phi.mesh.on_boundary) {
            mesh.vertices.push([c[0] + R * x[0], c[1] + R * x[1]]);
            mesh.on_boundary.push(*b);
        }
        mesh.triangles.extend(phi.mesh.triangles.iter().map(|tri| tri.map(|k| k + off)));
        values.extend(phi.values.iter().map(|v| v.iter().map(|x| x * s / R).collect::<Vec<_>>()));
    }
    Ok(PlanarField { mesh, values })
}
