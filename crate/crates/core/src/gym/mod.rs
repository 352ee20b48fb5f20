//! Discrete generalized Young measures `Λ = (ν_x, λ, ν_x^∞)` on a mesh.
//!
//! `ν` is one probability measure per cell on a grid of matrices, `λ` a
//! nonnegative measure with a cellwise density and atoms (boundary atoms
//! included), and `ν^∞` a probability measure on unit matrices attached to
//! every atom and to every cell where `λ` has density.

mod characterization;
mod diperna_majda;
mod generate;
mod traces;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use characterization::{check_characterization, CharacterizationOptions, CharacterizationReport, ConditionReport};
pub use diperna_majda::{from_diperna_majda, to_diperna_majda, CompactifiedMeasure, DiPernaMajdaMeasure};
pub use generate::{generate, generate_from_fields, reconstruct_limit_field, GenerationOptions, GenerationReport};
pub use traces::{gym_traces, GymTraces};

use crate::bv::BVField;
use crate::error::{Error, Result};
use crate::integrands::{HomogeneousIntegrand, Integrand, PointFn};
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;
use crate::mesh::Mesh;

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMeasure {
    pub support: Vec<Matrix>,
    pub weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(support: Vec<Matrix>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::arg("probability measure needs matching, nonempty support and weights"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::arg("probability weights must be finite and nonnegative"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::arg(format!("probability weights sum to {s}")));
        }
        let shape = support[0].shape();
        if support.iter().any(|a| a.shape() != shape) {
            return Err(Error::arg("probability support must have a common shape"));
        }
        Ok(ProbabilityMeasure { support, weights })
    }

    pub fn dirac(a: Matrix) -> Self {
        ProbabilityMeasure { support: vec![a], weights: vec![1.0] }
    }

    /// Normalized histogram; zero weights are dropped.
    pub fn from_weights(entries: Vec<(Matrix, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::arg("histogram without mass"));
        }
        let (support, weights) = entries.into_iter().filter(|e| e.1 > 0.0).map(|(a, w)| (a, w / total)).unzip();
        ProbabilityMeasure::new(support, weights)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.support[0].shape()
    }

    pub fn expect(&self, f: impl Fn(&Matrix) -> f64) -> f64 {
        self.support.iter().zip(&self.weights).map(|(a, w)| w * f(a)).sum()
    }

    pub fn mean(&self) -> Matrix {
        let (r, c) = self.shape();
        self.support
            .iter()
            .zip(&self.weights)
            .fold(Matrix::zeros(r, c), |acc, (a, &w)| acc + a.scale(w))
    }

    pub fn is_dirac_at(&self, a: &Matrix, tol: f64) -> bool {
        self.support.iter().zip(&self.weights).all(|(s, &w)| w <= tol || s.max_abs_diff(a) <= tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationAtom {
    pub location: Vec<f64>,
    pub mass: f64,
    pub nu_inf: ProbabilityMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenYoungMeasure {
    pub mesh: Mesh,
    pub rows: usize,
    pub cols: usize,
    pub nu: Vec<ProbabilityMeasure>,
    /// Density of `λ` with respect to Lebesgue measure, per cell.
    pub lambda_density: Vec<f64>,
    /// `ν^∞` on cells where `λ` has density.
    pub nu_inf_cells: Vec<Option<ProbabilityMeasure>>,
    pub atoms: Vec<ConcentrationAtom>,
    /// Underlying BV field, when the measure is known to come from gradients of it.
    pub field: Option<BVField>,
}

impl GenYoungMeasure {
    /// `(δ_0, 0, −)`.
    pub fn trivial(mesh: Mesh, rows: usize, cols: usize) -> Self {
        let n = mesh.n_cells();
        GenYoungMeasure {
            mesh,
            rows,
            cols,
            nu: vec![ProbabilityMeasure::dirac(Matrix::zeros(rows, cols)); n],
            lambda_density: vec![0.0; n],
            nu_inf_cells: vec![None; n],
            atoms: Vec::new(),
            field: None,
        }
    }

    /// Validated construction; zero-mass atoms are dropped.
    pub fn new(
        mesh: Mesh,
        nu: Vec<ProbabilityMeasure>,
        lambda_density: Vec<f64>,
        nu_inf_cells: Vec<Option<ProbabilityMeasure>>,
        atoms: Vec<ConcentrationAtom>,
    ) -> Result<Self> {
        let n = mesh.n_cells();
        if nu.len() != n || lambda_density.len() != n || nu_inf_cells.len() != n {
            return Err(Error::arg("one ν, λ density and ν∞ slot per cell expected"));
        }
        let (rows, cols) = nu
            .first()
            .map(ProbabilityMeasure::shape)
            .ok_or_else(|| Error::arg("mesh without cells"))?;
        for p in &nu {
            ProbabilityMeasure::new(p.support.clone(), p.weights.clone())?;
            if p.shape() != (rows, cols) {
                return Err(Error::arg("ν supports must share one matrix shape"));
            }
        }
        for (i, (&d, s)) in lambda_density.iter().zip(&nu_inf_cells).enumerate() {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::arg(format!("λ density must be finite and nonnegative (cell {i})")));
            }
            match s {
                Some(p) => check_sphere(p, rows, cols)?,
                None if d > 0.0 => return Err(Error::arg(format!("cell {i} has λ density but no ν∞"))),
                None => {}
            }
        }
        let mut kept = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !(a.mass >= 0.0) || !a.mass.is_finite() {
                return Err(Error::arg("λ atoms must have finite nonnegative mass"));
            }
            if !mesh.contains(&a.location) {
                return Err(Error::arg(format!("λ atom at {:?} outside the closed domain", a.location)));
            }
            check_sphere(&a.nu_inf, rows, cols)?;
            if a.mass > 0.0 {
                kept.push(a);
            }
        }
        Ok(GenYoungMeasure { mesh, rows, cols, nu, lambda_density, nu_inf_cells, atoms: kept, field: None })
    }

    pub fn with_field(mut self, u: BVField) -> Result<Self> {
        if u.mesh != self.mesh {
            return Err(Error::MismatchedDomains("field and measure live on different meshes".into()));
        }
        if u.components != self.rows {
            return Err(Error::arg("field components do not match the matrix rows"));
        }
        self.field = Some(u);
        Ok(self)
    }

    /// `Λ(α) = (δ_{∇u}, |α^s|, δ_{dα^s/d|α^s|})` for a measure `α` whose
    /// density is the absolutely continuous part.
    pub fn from_measure(alpha: &DiscreteMeasure) -> GenYoungMeasure {
        let n = alpha.mesh.n_cells();
        GenYoungMeasure {
            mesh: alpha.mesh.clone(),
            rows: alpha.rows,
            cols: alpha.cols,
            nu: alpha.density.iter().map(|d| ProbabilityMeasure::dirac(*d)).collect(),
            lambda_density: vec![0.0; n],
            nu_inf_cells: vec![None; n],
            atoms: alpha
                .atoms
                .iter()
                .map(|a| ConcentrationAtom {
                    location: a.location.clone(),
                    mass: a.mass,
                    nu_inf: ProbabilityMeasure::dirac(a.direction),
                })
                .collect(),
            field: None,
        }
    }

    pub fn is_boundary_atom(&self, a: &ConcentrationAtom) -> bool {
        self.mesh.is_boundary_point(&a.location)
    }

    /// `λ` as a scalar measure.
    pub fn lambda_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::scalar(
            self.mesh.clone(),
            self.lambda_density.clone(),
            self.atoms.iter().map(|a| (a.location.clone(), a.mass)).collect(),
        )
        .expect("λ of a valid measure")
    }

    /// `∫⟨ν_x, f(x,·)⟩dx + ∫⟨ν_x^∞, f^∞(x,·)⟩dλ`.
    pub fn pair_with(
        &self,
        f: &(dyn Fn(&[f64], &Matrix) -> f64 + Sync),
        f_inf: &(dyn Fn(&[f64], &Matrix) -> f64 + Sync),
    ) -> f64 {
        let mut total = 0.0;
        for i in 0..self.mesh.n_cells() {
            let nu = &self.nu[i];
            total += self.mesh.integrate_cell(i, &|x| nu.expect(|a| f(x, a)));
            if let (d, Some(p)) = (self.lambda_density[i], &self.nu_inf_cells[i]) {
                if d > 0.0 {
                    total += d * self.mesh.integrate_cell(i, &|x| p.expect(|a| f_inf(x, a)));
                }
            }
        }
        for a in &self.atoms {
            total += a.mass * a.nu_inf.expect(|p| f_inf(&a.location, p));
        }
        total
    }

    /// First moment `⟨ν_x, id⟩dx + ⟨ν_x^∞, id⟩dλ`.
    pub fn first_moment(&self) -> DiscreteMeasure {
        first_moment(self)
    }
}

fn check_sphere(p: &ProbabilityMeasure, rows: usize, cols: usize) -> Result<()> {
    ProbabilityMeasure::new(p.support.clone(), p.weights.clone())?;
    if p.shape() != (rows, cols) {
        return Err(Error::arg("ν∞ support has the wrong shape"));
    }
    if p.support.iter().any(|a| (a.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::arg("ν∞ must be supported on unit matrices"));
    }
    Ok(())
}

/// `⟨⟨Λ, g ⊗ v⟩⟩`; a spatial weight attached to `v` multiplies `g`.
pub fn pairing(gym: &GenYoungMeasure, g: &(dyn Fn(&[f64]) -> f64 + Sync), v: &Integrand) -> Result<f64> {
    let rec = v.recession_or_err()?;
    if (v.rows, v.cols) != (gym.rows, gym.cols) {
        return Err(Error::arg("integrand shape differs from the measure's"));
    }
    Ok(gym.pair_with(&|x, a| g(x) * v.eval_at(x, a), &|x, a| g(x) * v.weight(x) * rec.eval(a)))
}

/// The `(Λ_i, Λ_b)` splitting: `Λ_i` drops boundary atoms of `λ`, `Λ_b` keeps
/// only them and has `ν = δ_0`. For every pair
/// `⟨⟨Λ⟩⟩ = ⟨⟨Λ_i⟩⟩ + ⟨⟨Λ_b⟩⟩ − ∫ g v(0)`.
pub fn split(gym: &GenYoungMeasure) -> (GenYoungMeasure, GenYoungMeasure) {
    let mut inner = gym.clone();
    inner.atoms.retain(|a| !gym.is_boundary_atom(a));
    let mut bdry = GenYoungMeasure::trivial(gym.mesh.clone(), gym.rows, gym.cols);
    bdry.atoms = gym.atoms.iter().filter(|a| gym.is_boundary_atom(a)).cloned().collect();
    (inner, bdry)
}

pub type Region<'a> = &'a dyn Fn(&[f64]) -> bool;

/// `χ_S Ψ + χ_T Θ` for orthogonal `Ψ` and `Θ`: `Θ` must be trivial on `S`
/// and `Ψ` trivial on `T`. Cells are assigned by their centroid, atoms by
/// location; cells and atoms in neither set become trivial.
pub fn combine_orthogonal(psi: &GenYoungMeasure, theta: &GenYoungMeasure, s: Region<'_>, t: Region<'_>) -> Result<GenYoungMeasure> {
    if psi.mesh != theta.mesh || (psi.rows, psi.cols) != (theta.rows, theta.cols) {
        return Err(Error::MismatchedDomains("orthogonal combination needs a common mesh".into()));
    }
    let zero = Matrix::zeros(psi.rows, psi.cols);
    let trivial_cell = |g: &GenYoungMeasure, i: usize| g.nu[i].is_dirac_at(&zero, PROB_TOL) && g.lambda_density[i] <= PROB_TOL;
    let mut out = GenYoungMeasure::trivial(psi.mesh.clone(), psi.rows, psi.cols);
    for i in 0..psi.mesh.n_cells() {
        let c = psi.mesh.cell_centroid(i);
        let (in_s, in_t) = (s(&c), t(&c));
        if in_s && in_t {
            return Err(Error::Orthogonality { location: format!("cell {i}"), detail: "S and T overlap".into() });
        }
        if in_s && !trivial_cell(theta, i) {
            return Err(Error::Orthogonality { location: format!("cell {i}"), detail: "Θ is not trivial on S".into() });
        }
        if in_t && !trivial_cell(psi, i) {
            return Err(Error::Orthogonality { location: format!("cell {i}"), detail: "Ψ is not trivial on T".into() });
        }
        let src = if in_s { Some(psi) } else if in_t { Some(theta) } else { None };
        if let Some(g) = src {
            out.nu[i] = g.nu[i].clone();
            out.lambda_density[i] = g.lambda_density[i];
            out.nu_inf_cells[i] = g.nu_inf_cells[i].clone();
        }
    }
    for a in &theta.atoms {
        if s(&a.location) && a.mass > PROB_TOL {
            return Err(Error::Orthogonality { location: format!("atom at {:?}", a.location), detail: "Θ charges S".into() });
        }
        if t(&a.location) {
            out.atoms.push(a.clone());
        }
    }
    for a in &psi.atoms {
        if t(&a.location) && a.mass > PROB_TOL {
            return Err(Error::Orthogonality { location: format!("atom at {:?}", a.location), detail: "Ψ charges T".into() });
        }
        if s(&a.location) {
            out.atoms.push(a.clone());
        }
    }
    Ok(out)
}

/// First moment of `Λ` as a matrix-valued measure.
pub fn first_moment(gym: &GenYoungMeasure) -> DiscreteMeasure {
    let density = (0..gym.mesh.n_cells())
        .map(|i| {
            let mut m = gym.nu[i].mean();
            if let Some(p) = &gym.nu_inf_cells[i] {
                m += p.mean().scale(gym.lambda_density[i]);
            }
            m
        })
        .collect();
    let atoms = gym.atoms.iter().map(|a| (a.location.clone(), a.nu_inf.mean().scale(a.mass))).collect();
    DiscreteMeasure::new(gym.mesh.clone(), density, atoms).expect("moments of a valid measure")
}

/// Largest distance of a boundary atom's moment from the rank-one matrices
/// `a ⊗ ϱ(x)`, relative to its norm. Zero in one dimension.
pub fn boundary_rank_one_defect(alpha: &DiscreteMeasure) -> f64 {
    alpha
        .boundary_atoms()
        .map(|a| {
            let rho = alpha.mesh.outward_normal(&a.location).expect("boundary atom");
            rank_one_defect(&a.direction, &rho)
        })
        .fold(0.0, f64::max)
}

/// `|P − (Pϱ) ⊗ ϱ|` for a unit normal `ϱ`.
pub fn rank_one_defect(p: &Matrix, rho: &[f64]) -> f64 {
    let a = p.mul_vec(rho);
    (*p - Matrix::outer(&a, rho)).norm()
}

/// One entry of the fixed test dictionary.
#[derive(Clone)]
pub struct DictionaryPair {
    pub name: String,
    pub g: PointFn,
    pub v: Integrand,
}

/// The twelve pairs `g ∈ {1, x₁, x₁²}` × `v ∈ {1, |·|, A₁₁, √(1+|·|²)}`.
pub fn dictionary(rows: usize, cols: usize) -> Vec<DictionaryPair> {
    let gs: [(&str, PointFn); 3] = [
        ("1", Arc::new(|_: &[f64]| 1.0)),
        ("x", Arc::new(|x: &[f64]| x[0])),
        ("x^2", Arc::new(|x: &[f64]| x[0] * x[0])),
    ];
    let zero_rec = HomogeneousIntegrand::new("0", rows, cols, |_| 0.0);
    let abs_rec = HomogeneousIntegrand::new("abs", rows, cols, |_| 1.0);
    let id_rec = HomogeneousIntegrand::new("A11", rows, cols, |u| u[(0, 0)]);
    let vs = [
        Integrand::new("1", rows, cols, |_| 1.0).with_recession(zero_rec),
        Integrand::new("|A|", rows, cols, |a| a.norm()).with_recession(abs_rec.clone()),
        Integrand::new("A11", rows, cols, |a| a[(0, 0)]).with_recession(id_rec),
        Integrand::new("sqrt(1+|A|^2)", rows, cols, |a| (1.0 + a.norm().powi(2)).sqrt()).with_recession(abs_rec),
    ];
    let mut out = Vec::with_capacity(12);
    for (gn, g) in &gs {
        for v in &vs {
            out.push(DictionaryPair { name: format!("{gn} ⊗ {}", v.name), g: g.clone(), v: v.clone() });
        }
    }
    out
}

/// Dictionary pairings of `Λ`, in dictionary order.
pub fn dictionary_pairings(gym: &GenYoungMeasure) -> Vec<f64> {
    dictionary(gym.rows, gym.cols)
        .iter()
        .map(|p| pairing(gym, &|x| (p.g)(x), &p.v).expect("dictionary integrands have recessions"))
        .collect()
}

/// `∫ g dv(Y)` for a derivative measure `Y`.
pub fn sequence_pairing(y: &DiscreteMeasure, g: &(dyn Fn(&[f64]) -> f64 + Sync), v: &Integrand) -> Result<f64> {
    let rec = v.recession_or_err()?;
    let mut total = 0.0;
    for (i, a) in y.density.iter().enumerate() {
        total += v.eval(a) * y.mesh.integrate_cell(i, &|x| g(x) * v.weight(x));
    }
    for at in &y.atoms {
        total += g(&at.location) * v.weight(&at.location) * rec.eval(&at.direction) * at.mass;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrands::lookup;

    fn toy_limit(eps: f64) -> GenYoungMeasure {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh, 1, 1);
        g.atoms.push(ConcentrationAtom {
            location: vec![1.0],
            mass: 1.0 - eps,
            nu_inf: ProbabilityMeasure::dirac(Matrix::scalar(1.0)),
        });
        g
    }

    #[test]
    fn trivial_pairing_is_volume_times_v0() {
        let g = GenYoungMeasure::trivial(Mesh::interval(0.0, 2.0, 5).unwrap(), 1, 1);
        let v = lookup("euclid_sqrt1p").unwrap();
        assert!((pairing(&g, &|_| 1.0, &v).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn toy_limit_pairing_single_atom() {
        let eps = 0.3;
        let g = toy_limit(eps);
        let w = |x: &[f64]| (x[0] - 1.0).powi(2) + eps;
        let p = pairing(&g, &w, &lookup("abs").unwrap()).unwrap();
        assert!((p - eps * (1.0 - eps)).abs() < 1e-15);
    }

    #[test]
    fn pairing_needs_recession() {
        let g = toy_limit(0.5);
        assert!(matches!(pairing(&g, &|_| 1.0, &lookup("quadratic").unwrap()), Err(Error::RecessionRequired(_))));
    }

    #[test]
    fn split_of_toy_limit() {
        let g = toy_limit(0.5);
        let (i, b) = split(&g);
        assert!(i.atoms.is_empty());
        assert_eq!(b.atoms.len(), 1);
        assert_eq!(b.atoms[0].location, vec![1.0]);
    }

    #[test]
    fn first_moment_of_toy_limit_and_oscillation() {
        let m = first_moment(&toy_limit(0.5));
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].mass, 0.5);
        assert_eq!(m.atoms[0].direction.to_scalar(), 1.0);
        let mut osc = GenYoungMeasure::trivial(Mesh::interval(0.0, 1.0, 4).unwrap(), 1, 1);
        let half = ProbabilityMeasure::new(vec![Matrix::scalar(-1.0), Matrix::scalar(1.0)], vec![0.5, 0.5]).unwrap();
        osc.nu = vec![half; 4];
        assert!(first_moment(&osc).total_variation() == 0.0);
    }

    #[test]
    fn constructor_rejects_bad_probabilities() {
        assert!(ProbabilityMeasure::new(vec![Matrix::scalar(0.0)], vec![0.9]).is_err());
        let mesh = Mesh::interval(0.0, 1.0, 1).unwrap();
        let r = GenYoungMeasure::new(
            mesh,
            vec![ProbabilityMeasure::dirac(Matrix::scalar(0.0))],
            vec![1.0],
            vec![None],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn combine_detects_overlap_violation() {
        let g = toy_limit(0.5);
        let s = |x: &[f64]| x[0] > 0.5;
        let t = |x: &[f64]| x[0] <= 0.5;
        // Θ = toy limit charges S at x = 1
        assert!(matches!(combine_orthogonal(&g, &g, &s, &t), Err(Error::Orthogonality { .. }) ));
        let triv = GenYoungMeasure::trivial(g.mesh.clone(), 1, 1);
        let c = combine_orthogonal(&g, &triv, &s, &t).unwrap();
        assert_eq!(c, g);
    }

    #[test]
    fn dictionary_has_twelve_pairs() {
        assert_eq!(dictionary(1, 1).len(), 12);
    }
}
