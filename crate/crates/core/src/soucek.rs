//! Pairs `(u, α)` of a BV field and a measure on the closed domain that
//! agrees with `Du` in the interior. The boundary part of `α` is what a
//! weak* limit of `W^{1,1}` gradients may leave on `∂Ω`; it separates the
//! inner trace `β⁰` (the BV trace of `u`) from the outer trace `β` defined
//! by the Green formula `∫_{∂Ω} φ ϱ dβ = ∫_Ω u ∇φ + ∫_{Ω̄} φ dα`.

use serde::{Deserialize, Serialize};

use crate::bv::BVField;
use crate::error::{Error, Result};
use crate::gym::{self, CharacterizationOptions, GenYoungMeasure};
use crate::integrands::{lookup, Integrand};
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;
use crate::mesh::Mesh;
use crate::quadrature;

const PAIR_TOL: f64 = 1e-12;
const GREEN_TOL: f64 = 1e-9;
const RANK_ONE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoucekPair {
    pub u: BVField,
    pub alpha: DiscreteMeasure,
}

/// Boundary function or measure given by point values: on an interval these
/// are the two endpoint values (counting measure); on the disk, `density`
/// holds vertex values of a function that is affine along each boundary
/// edge and `atoms` the point masses `a(x)` of `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub density: Vec<(Vec<f64>, Vec<f64>)>,
    pub atoms: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub inner: Vec<(Vec<f64>, Vec<f64>)>,
    pub outer: BoundaryValues,
    /// Largest Green residual over the test basis.
    pub residual: f64,
}

impl SoucekPair {
    /// Checks that `α` restricted to the open domain equals `Du`.
    pub fn new(u: BVField, alpha: DiscreteMeasure) -> Result<SoucekPair> {
        if u.mesh != alpha.mesh {
            return Err(Error::MismatchedDomains("field and measure live on different meshes".into()));
        }
        if alpha.shape() != (u.components, u.mesh.dim()) {
            return Err(Error::arg("α must be an M x N matrix-valued measure"));
        }
        let du = u.derivative();
        let scale = 1.0 + du.total_variation();
        for (i, (a, b)) in alpha.density.iter().zip(&du.density).enumerate() {
            if a.max_abs_diff(b) > PAIR_TOL * scale {
                return Err(Error::arg(format!("α differs from Du on cell {i}")));
            }
        }
        let inner = alpha.interior_part();
        let mismatch = |p: &DiscreteMeasure, q: &DiscreteMeasure| {
            p.atoms.iter().any(|a| {
                let other = q
                    .atoms
                    .iter()
                    .filter(|b| same_point(&a.location, &b.location))
                    .fold(Matrix::zeros(a.direction.rows(), a.direction.cols()), |acc, b| acc + b.value());
                a.value().max_abs_diff(&other) > PAIR_TOL * scale
            })
        };
        if mismatch(&inner, &du) || mismatch(&du, &inner) {
            return Err(Error::arg("interior atoms of α do not match the jumps of u"));
        }
        Ok(SoucekPair { u, alpha })
    }

    /// `(u, Du)`: the pair of a BV field without boundary concentration.
    pub fn from_field(u: BVField) -> SoucekPair {
        let alpha = u.derivative();
        SoucekPair { u, alpha }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.u.mesh
    }
}

/// Scalar test function with its gradient.
struct TestFunction {
    f: Box<dyn Fn(&[f64]) -> f64 + Sync>,
    grad: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>,
}

/// Monomials up to degree four on an interval, harmonic polynomials
/// `Re z^k`, `Im z^k` up to degree four on the disk.
fn test_basis(dim: usize) -> Vec<TestFunction> {
    let mut out = Vec::new();
    if dim == 1 {
        for k in 0..=4i32 {
            out.push(TestFunction {
                f: Box::new(move |x| x[0].powi(k)),
                grad: Box::new(move |x| vec![if k == 0 { 0.0 } else { k as f64 * x[0].powi(k - 1) }]),
            });
        }
        return out;
    }
    fn zpow(x: &[f64], k: u32) -> (f64, f64) {
        (0..k).fold((1.0, 0.0), |(re, im), _| (re * x[0] - im * x[1], re * x[1] + im * x[0]))
    }
    for k in 0..=4u32 {
        let kf = k as f64;
        out.push(TestFunction {
            f: Box::new(move |x| zpow(x, k).0),
            grad: Box::new(move |x| {
                if k == 0 {
                    return vec![0.0, 0.0];
                }
                let (re, im) = zpow(x, k - 1);
                vec![kf * re, -kf * im]
            }),
        });
        if k > 0 {
            out.push(TestFunction {
                f: Box::new(move |x| zpow(x, k).1),
                grad: Box::new(move |x| {
                    let (re, im) = zpow(x, k - 1);
                    vec![kf * im, kf * re]
                }),
            });
        }
    }
    out
}

/// `∫_Ω u ⊗ ∇φ + ∫_{Ω̄} φ dα`.
fn volume_side(p: &SoucekPair, t: &TestFunction) -> Matrix {
    let u = &p.u;
    let (m, n) = (u.components, u.mesh.dim());
    let mut acc = p.alpha.integrate(&*t.f);
    match &u.mesh {
        Mesh::Interval(mesh) => {
            for i in 0..mesh.cells() {
                let (x0, x1) = mesh.cell(i);
                for (x, w) in quadrature::gauss3(x0, x1) {
                    let val = u.eval(&[x]).expect("point inside its cell");
                    let g = (t.grad)(&[x]);
                    acc += Matrix::outer(&val, &g).scale(w);
                }
            }
        }
        Mesh::Planar(mesh) => {
            let nodal = u.nodal_values().expect("planar fields are nodal");
            for ti in 0..mesh.triangles.len() {
                let v0 = mesh.vertices[mesh.triangles[ti][0]];
                let u0 = &nodal[mesh.triangles[ti][0]];
                let grad = mesh.gradient(ti, &nodal);
                for (x, w) in quadrature::triangle7(mesh.corners(ti)) {
                    let d = [x[0] - v0[0], x[1] - v0[1]];
                    let val: Vec<f64> = (0..m).map(|c| u0[c] + grad.mul_vec(&d)[c]).collect();
                    let g = (t.grad)(&x);
                    acc += Matrix::outer(&val, &g).scale(w);
                }
            }
        }
    }
    debug_assert_eq!(acc.shape(), (m, n));
    acc
}

/// `∫_{∂Ω} φ β ⊗ ϱ`.
fn boundary_side(mesh: &Mesh, beta: &BoundaryValues, t: &TestFunction) -> Matrix {
    let m = beta.density.first().map_or(0, |d| d.1.len());
    match mesh {
        Mesh::Interval(_) => beta.density.iter().chain(&beta.atoms).fold(Matrix::zeros(m, 1), |acc, (x, b)| {
            let rho = mesh.outward_normal(x).expect("boundary point");
            acc + Matrix::outer(b, &rho).scale((t.f)(x))
        }),
        Mesh::Planar(tri) => {
            let mut acc = Matrix::zeros(m, 2);
            let value_at = |k: usize| -> &Vec<f64> {
                let v = tri.vertices[k];
                &beta.density.iter().find(|(x, _)| x[0] == v[0] && x[1] == v[1]).expect("trace value at every boundary vertex").1
            };
            for [p, q] in tri.boundary_edges() {
                let (a, b) = (tri.vertices[p], tri.vertices[q]);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let mut nrm = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                if nrm[0] * (a[0] + b[0]) + nrm[1] * (a[1] + b[1]) < 0.0 {
                    nrm = [-nrm[0], -nrm[1]];
                }
                let (ua, ub) = (value_at(p), value_at(q));
                for (x, w) in quadrature::gauss3_segment(a, b) {
                    let s = ((x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2)).sqrt() / len;
                    let val: Vec<f64> = ua.iter().zip(ub).map(|(l, r)| (1.0 - s) * l + s * r).collect();
                    acc += Matrix::outer(&val, &nrm).scale(w * (t.f)(&x));
                }
            }
            for (x, a) in &beta.atoms {
                let rho = mesh.outward_normal(x).expect("boundary atom");
                acc += Matrix::outer(a, &rho).scale((t.f)(x));
            }
            acc
        }
    }
}

fn green_residual(p: &SoucekPair, beta: &BoundaryValues) -> f64 {
    test_basis(p.mesh().dim())
        .iter()
        .map(|t| volume_side(p, t).max_abs_diff(&boundary_side(p.mesh(), beta, t)))
        .fold(0.0, f64::max)
}

/// Inner trace `β⁰ = Tu` and outer trace `β`. On an interval
/// `β(b) = u(b−) + α({b})`, `β(a) = u(a+) − α({a})`; on the disk
/// `β = β⁰ H¹ + Σ a(x) δ_x` with `a(x) = α({x}) ϱ(x)`. The Green formula is
/// then verified on the test basis.
pub fn outer_trace(p: &SoucekPair) -> Result<TracePair> {
    let inner = p.u.trace();
    let mesh = p.mesh();
    let mut density = inner.clone();
    let mut atoms: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for a in p.alpha.boundary_atoms() {
        let rho = mesh.outward_normal(&a.location).expect("boundary atom");
        let jump: Vec<f64> = a.value().mul_vec(&rho);
        match mesh.dim() {
            1 => {
                let entry = density.iter_mut().find(|(x, _)| same_point(x, &a.location)).expect("endpoint");
                entry.1.iter_mut().zip(&jump).for_each(|(b, j)| *b += j);
            }
            _ => match atoms.iter_mut().find(|(x, _)| same_point(x, &a.location)) {
                Some(e) => e.1.iter_mut().zip(&jump).for_each(|(b, j)| *b += j),
                None => atoms.push((a.location.clone(), jump)),
            },
        }
    }
    let outer = BoundaryValues { density, atoms };
    let residual = green_residual(p, &outer);
    let scale = 1.0 + p.u.l1_norm() + p.alpha.total_variation();
    if !(residual <= GREEN_TOL * scale) {
        return Err(Error::InconsistentPair { residual, tol: GREEN_TOL * scale });
    }
    Ok(TracePair { inner, outer, residual })
}

impl TracePair {
    /// `|β − β⁰|` on the boundary, point by point (one dimension) or the
    /// atom sizes (disk).
    pub fn difference(&self) -> Vec<(Vec<f64>, f64)> {
        if self.outer.atoms.is_empty() {
            self.outer
                .density
                .iter()
                .zip(&self.inner)
                .map(|((x, b), (_, b0))| (x.clone(), crate::linalg::norm(&sub(b, b0))))
                .collect()
        } else {
            self.outer.atoms.iter().map(|(x, a)| (x.clone(), crate::linalg::norm(a))).collect()
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `(0, χ_{∂Ω} α)`.
pub fn side(p: &SoucekPair) -> SoucekPair {
    let zero = BVField::constant(p.mesh().clone(), vec![0.0; p.u.components]).expect("valid mesh");
    SoucekPair { u: zero, alpha: p.alpha.boundary_part() }
}

/// Every boundary atom of `α` has polar direction `a ⊗ ϱ(x)`.
pub fn rank_one_boundary_check(p: &SoucekPair) -> bool {
    gym::boundary_rank_one_defect(&p.alpha) <= RANK_ONE_TOL
}

/// Quasiconvex test family used to certify a measure before reading off a
/// pair: the norm, `√(1+|·|²)` and `±A_ij`.
pub fn default_test_family(rows: usize, cols: usize) -> Vec<Integrand> {
    let shape = format!("{rows}x{cols}");
    let mut out = vec![
        lookup(&format!("abs:{shape}")).expect("catalog"),
        lookup(&format!("euclid_sqrt1p:{shape}")).expect("catalog"),
    ];
    for i in 0..rows {
        for j in 0..cols {
            for s in [1.0, -1.0] {
                let b = Matrix::unit(rows, cols, i, j).scale(s);
                let spec = b.to_rows().iter().map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join("/");
                out.push(lookup(&format!("linear_form:{spec}")).expect("catalog"));
            }
        }
    }
    out
}

/// `(u, first moment of Λ)` for a gradient measure with known `u`.
pub fn from_gym(g: &GenYoungMeasure) -> Result<SoucekPair> {
    let u = g.field.clone().ok_or_else(|| Error::NotGradient("not a gradient GYM: no underlying field".into()))?;
    let report = gym::check_characterization(g, &u, &default_test_family(g.rows, g.cols), &CharacterizationOptions::default())?;
    if !report.pass {
        return Err(Error::Characterization(format!(
            "measure fails the characterization: finiteness {} jensen {} singular {} boundary {}",
            report.finiteness.pass, report.jensen.pass, report.singular.pass, report.boundary.pass
        )));
    }
    SoucekPair::new(u, g.first_moment()).map_err(|e| Error::Characterization(format!("first moment is not a pair for u: {e}")))
}

/// `Λ(α) = (δ_{∇u}, |α^s|, δ_{dα^s/d|α^s|})` with the field attached.
pub fn to_gym(p: &SoucekPair) -> GenYoungMeasure {
    GenYoungMeasure::from_measure(&p.alpha).with_field(p.u.clone()).expect("pair lives on one mesh")
}

/// `max_φ |∫φϱ dβ_K − ∫φϱ dβ|` over the test basis, at the last member.
pub fn weakstar_trace_continuity_test(sequence: &[SoucekPair], limit: &SoucekPair) -> Result<f64> {
    let last = sequence.last().ok_or_else(|| Error::arg("empty pair sequence"))?;
    if !last.mesh().same_domain(limit.mesh()) {
        return Err(Error::MismatchedDomains(format!("{} vs {}", last.mesh().describe(), limit.mesh().describe())));
    }
    let bk = outer_trace(last)?;
    let b = outer_trace(limit)?;
    Ok(test_basis(limit.mesh().dim())
        .iter()
        .map(|t| boundary_side(last.mesh(), &bk.outer, t).max_abs_diff(&boundary_side(limit.mesh(), &b.outer, t)))
        .fold(0.0, f64::max))
}

fn same_point(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriMesh;

    fn toy_pair(eps: f64) -> SoucekPair {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let u = BVField::constant(mesh.clone(), vec![eps / 2.0]).unwrap();
        let alpha = DiscreteMeasure::new(mesh, vec![Matrix::zeros(1, 1); 8], vec![(vec![1.0], Matrix::scalar(1.0 - eps))]).unwrap();
        SoucekPair::new(u, alpha).unwrap()
    }

    #[test]
    fn atom_at_right_end() {
        let mesh = Mesh::interval(0.0, 1.0, 3).unwrap();
        let u = BVField::constant(mesh.clone(), vec![0.0]).unwrap();
        let alpha = DiscreteMeasure::new(mesh, vec![Matrix::zeros(1, 1); 3], vec![(vec![1.0], Matrix::scalar(2.5))]).unwrap();
        let t = outer_trace(&SoucekPair::new(u, alpha).unwrap()).unwrap();
        assert_eq!(t.inner, vec![(vec![0.0], vec![0.0]), (vec![1.0], vec![0.0])]);
        assert_eq!(t.outer.density, vec![(vec![0.0], vec![0.0]), (vec![1.0], vec![2.5])]);
    }

    #[test]
    fn toy_limit_traces_and_side() {
        let eps = 0.4;
        let p = toy_pair(eps);
        let t = outer_trace(&p).unwrap();
        assert!(t.residual < 1e-12);
        assert_eq!(t.outer.density[0].1, vec![eps / 2.0]);
        assert!((t.outer.density[1].1[0] - (1.0 - eps / 2.0)).abs() < 1e-15);
        let s = side(&p);
        assert_eq!(s.alpha.atoms.len(), 1);
        assert!(rank_one_boundary_check(&p));
        let d = t.difference();
        assert!((d[1].1 - (1.0 - eps)).abs() < 1e-15);
    }

    #[test]
    fn interior_mismatch_rejected() {
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let u = BVField::interpolate(mesh.clone(), |x| vec![x[0]]).unwrap();
        let alpha = DiscreteMeasure::zero(mesh, 1, 1);
        assert!(SoucekPair::new(u, alpha).is_err());
    }

    #[test]
    fn disk_pair_green_formula() {
        let mesh = Mesh::Planar(TriMesh::disk(8, [1.0, 0.0]).unwrap());
        let u = BVField::interpolate(mesh.clone(), |x| vec![1.0 + x[0] - 2.0 * x[1] * x[0]]).unwrap();
        let du = u.derivative();
        let x0 = vec![1.0, 0.0];
        let alpha = du.add(&DiscreteMeasure::new(mesh.clone(), vec![Matrix::zeros(1, 2); mesh.n_cells()], vec![(x0.clone(), Matrix::from_row_slice(1, 2, &[0.3, 0.0]))]).unwrap()).unwrap();
        let p = SoucekPair::new(u, alpha).unwrap();
        let t = outer_trace(&p).unwrap();
        assert!(t.residual < 1e-12, "{}", t.residual);
        assert_eq!(t.outer.atoms, vec![(x0.clone(), vec![0.3])]);
        // a tangential boundary atom is not a trace of anything
        let bad = p.alpha.add(&DiscreteMeasure::new(mesh.clone(), vec![Matrix::zeros(1, 2); mesh.n_cells()], vec![(x0, Matrix::from_row_slice(1, 2, &[0.0, 0.5]))]).unwrap()).unwrap();
        let q = SoucekPair::new(p.u.clone(), bad).unwrap();
        assert!(!rank_one_boundary_check(&q));
        assert!(matches!(outer_trace(&q), Err(Error::InconsistentPair { .. })));
    }

    #[test]
    fn gym_round_trip() {
        let p = toy_pair(0.2);
        let g = to_gym(&p);
        let back = from_gym(&g).unwrap();
        assert_eq!(back.alpha, p.alpha);
        assert_eq!(back.u, p.u);
    }
}
