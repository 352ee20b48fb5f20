//! Radon measures on a meshed closed domain: a cellwise constant density
//! plus finitely many atoms stored in polar form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mesh::Mesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
    /// Unit polar direction.
    pub direction: Matrix,
}

impl Atom {
    /// Polar decomposition of `value` at `location`; `None` for a zero value.
    pub fn new(location: Vec<f64>, value: Matrix) -> Option<Atom> {
        let mass = value.norm();
        (mass > 0.0).then(|| Atom { location, mass, direction: value.scale(1.0 / mass) })
    }

    pub fn value(&self) -> Matrix {
        self.direction.scale(self.mass)
    }
}

/// Weight functions used as weak* test functions.
pub type TestFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub mesh: Mesh,
    pub rows: usize,
    pub cols: usize,
    /// Density with respect to Lebesgue measure, one value per cell.
    pub density: Vec<Matrix>,
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn zero(mesh: Mesh, rows: usize, cols: usize) -> Self {
        let density = vec![Matrix::zeros(rows, cols); mesh.n_cells()];
        DiscreteMeasure { mesh, rows, cols, density, atoms: Vec::new() }
    }

    /// Validated construction. Atom values are given as matrices and stored in
    /// polar form; zero atoms are dropped.
    pub fn new(mesh: Mesh, density: Vec<Matrix>, atoms: Vec<(Vec<f64>, Matrix)>) -> Result<Self> {
        if density.len() != mesh.n_cells() {
            return Err(Error::arg(format!(
                "density has {} entries for {} cells",
                density.len(),
                mesh.n_cells()
            )));
        }
        let (rows, cols) = density
            .first()
            .map(Matrix::shape)
            .or_else(|| atoms.first().map(|a| a.1.shape()))
            .ok_or_else(|| Error::arg("measure without cells or atoms"))?;
        if density.iter().any(|d| d.shape() != (rows, cols) || !d.is_finite()) {
            return Err(Error::arg("density entries must be finite with a common shape"));
        }
        let mut out = Vec::with_capacity(atoms.len());
        for (loc, value) in atoms {
            if value.shape() != (rows, cols) || !value.is_finite() {
                return Err(Error::arg("atom values must be finite with the density shape"));
            }
            if !mesh.contains(&loc) {
                return Err(Error::arg(format!("atom location {loc:?} outside the closed domain")));
            }
            out.extend(Atom::new(loc, value));
        }
        Ok(DiscreteMeasure { mesh, rows, cols, density, atoms: out })
    }

    pub fn scalar(mesh: Mesh, density: Vec<f64>, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        DiscreteMeasure::new(
            mesh,
            density.into_iter().map(Matrix::scalar).collect(),
            atoms.into_iter().map(|(x, m)| (x, Matrix::scalar(m))).collect(),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `∫ g dμ`, entrywise.
    pub fn integrate(&self, g: TestFn<'_>) -> Matrix {
        let mut acc = Matrix::zeros(self.rows, self.cols);
        for (i, d) in self.density.iter().enumerate() {
            if d.norm() > 0.0 {
                acc += d.scale(self.mesh.integrate_cell(i, g));
            }
        }
        for a in &self.atoms {
            acc += a.value().scale(g(&a.location));
        }
        acc
    }

    pub fn integrate_scalar(&self, g: TestFn<'_>) -> f64 {
        self.integrate(g).to_scalar()
    }

    pub fn total_mass(&self) -> Matrix {
        self.integrate(&|_| 1.0)
    }

    pub fn total_variation(&self) -> f64 {
        let dens: f64 = self
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| d.norm() * self.mesh.cell_measure(i))
            .sum();
        dens + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// Total variation of the part living in `cells` and at atoms selected by `atom_filter`.
    pub fn variation_where(
        &self,
        cell_filter: impl Fn(usize) -> bool,
        atom_filter: impl Fn(&[f64]) -> bool,
    ) -> f64 {
        let dens: f64 = (0..self.density.len())
            .filter(|&i| cell_filter(i))
            .map(|i| self.density[i].norm() * self.mesh.cell_measure(i))
            .sum();
        dens + self.atoms.iter().filter(|a| atom_filter(&a.location)).map(|a| a.mass).sum::<f64>()
    }

    pub fn boundary_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| self.mesh.is_boundary_point(&a.location))
    }

    pub fn interior_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| !self.mesh.is_boundary_point(&a.location))
    }

    /// Restriction to the open domain (boundary atoms removed).
    pub fn interior_part(&self) -> DiscreteMeasure {
        let mut m = self.clone();
        m.atoms.retain(|a| !self.mesh.is_boundary_point(&a.location));
        m
    }

    /// Restriction to the boundary (density and interior atoms removed).
    pub fn boundary_part(&self) -> DiscreteMeasure {
        let mut m = DiscreteMeasure::zero(self.mesh.clone(), self.rows, self.cols);
        m.atoms = self.boundary_atoms().cloned().collect();
        m
    }

    /// Sum of two measures on the same mesh; coincident atoms are merged.
    pub fn add(&self, other: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if self.mesh != other.mesh || self.shape() != other.shape() {
            return Err(Error::MismatchedDomains("sum of measures on different meshes".into()));
        }
        let density = self.density.iter().zip(&other.density).map(|(a, b)| *a + *b).collect();
        let mut atoms: Vec<(Vec<f64>, Matrix)> = Vec::new();
        for a in self.atoms.iter().chain(&other.atoms) {
            match atoms.iter_mut().find(|(x, _)| x == &a.location) {
                Some((_, v)) => *v += a.value(),
                None => atoms.push((a.location.clone(), a.value())),
            }
        }
        DiscreteMeasure::new(self.mesh.clone(), density, atoms)
    }

    pub fn scaled(&self, s: f64) -> DiscreteMeasure {
        let density = self.density.iter().map(|d| d.scale(s)).collect();
        let atoms = self.atoms.iter().map(|a| (a.location.clone(), a.value().scale(s))).collect();
        DiscreteMeasure::new(self.mesh.clone(), density, atoms).expect("scaling keeps validity")
    }

    /// Rows for plotting: one per cell (`kind = "density"`) and per atom.
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let mut rows: Vec<PlotRow> = self
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| PlotRow {
                kind: "density",
                x: self.mesh.cell_centroid(i),
                values: d.as_slice().to_vec(),
            })
            .collect();
        rows.extend(self.atoms.iter().map(|a| PlotRow {
            kind: "atom",
            x: a.location.clone(),
            values: a.value().as_slice().to_vec(),
        }));
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotRow {
    pub kind: &'static str,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// `max_g |∫ g dμ_K − ∫ g dμ|` over the test functions, at the last member of the sequence.
pub fn weakstar_gap(sequence: &[DiscreteMeasure], limit: &DiscreteMeasure, tests: &[TestFn<'_>]) -> Result<f64> {
    let last = sequence.last().ok_or_else(|| Error::arg("empty measure sequence"))?;
    for m in sequence {
        if !m.mesh.same_domain(&limit.mesh) || m.shape() != limit.shape() {
            return Err(Error::MismatchedDomains(format!(
                "{} vs {}",
                m.mesh.describe(),
                limit.mesh.describe()
            )));
        }
    }
    Ok(tests
        .iter()
        .map(|g| last.integrate(*g).max_abs_diff(&limit.integrate(*g)))
        .fold(0.0, f64::max))
}

/// Gaps `max_g |∫ g dμ_k − ∫ g dμ|` for every member of the sequence.
pub fn weakstar_gaps(sequence: &[DiscreteMeasure], limit: &DiscreteMeasure, tests: &[TestFn<'_>]) -> Result<Vec<f64>> {
    (1..=sequence.len()).map(|k| weakstar_gap(&sequence[..k], limit, tests)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Mesh {
        Mesh::interval(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_atoms_are_dropped_and_directions_normalized() {
        let m = DiscreteMeasure::scalar(unit_interval(2), vec![0.0, 0.0], vec![(vec![0.5], 0.0), (vec![1.0], -2.0)]).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].mass, 2.0);
        assert_eq!(m.atoms[0].direction.to_scalar(), -1.0);
    }

    #[test]
    fn atoms_outside_the_domain_are_rejected() {
        let r = DiscreteMeasure::scalar(unit_interval(2), vec![0.0, 0.0], vec![(vec![1.5], 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn total_variation_of_two_atoms() {
        let m = DiscreteMeasure::scalar(unit_interval(2), vec![0.0, 0.0], vec![(vec![0.2], 0.3), (vec![0.7], -0.7)]).unwrap();
        assert!((m.total_variation() - 1.0).abs() < 1e-15);
        assert_eq!(DiscreteMeasure::zero(unit_interval(3), 1, 1).total_variation(), 0.0);
    }

    #[test]
    fn weakstar_gap_rejects_other_domains() {
        let a = DiscreteMeasure::zero(unit_interval(2), 1, 1);
        let b = DiscreteMeasure::zero(Mesh::interval(0.0, 2.0, 2).unwrap(), 1, 1);
        let one = |_: &[f64]| 1.0;
        assert!(matches!(weakstar_gap(&[a], &b, &[&one]), Err(Error::MismatchedDomains(_))));
    }

    #[test]
    fn boundary_and_interior_parts_partition_atoms() {
        let m = DiscreteMeasure::scalar(unit_interval(2), vec![1.0, 1.0], vec![(vec![0.5], 1.0), (vec![1.0], 2.0)]).unwrap();
        assert_eq!(m.boundary_part().atoms.len(), 1);
        assert_eq!(m.interior_part().atoms.len(), 1);
        let sum = m.boundary_part().add(&m.interior_part()).unwrap();
        assert!((sum.total_variation() - m.total_variation()).abs() < 1e-15);
    }
}
