use serde::{Deserialize, Serialize};

use super::{ConcentrationAtom, GenYoungMeasure, ProbabilityMeasure};
use crate::error::{Error, Result};
use crate::integrands::Integrand;
use crate::linalg::Matrix;
use crate::mesh::Mesh;

/// Measure on the compactified matrix space: interior points `d(A) = A/(1+|A|)`
/// in the open unit ball plus points of the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactifiedMeasure {
    pub interior: Vec<(Matrix, f64)>,
    pub sphere: Vec<(Matrix, f64)>,
}

impl CompactifiedMeasure {
    pub fn total(&self) -> f64 {
        self.interior.iter().chain(&self.sphere).map(|p| p.1).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiPernaMajdaMeasure {
    pub mesh: Mesh,
    pub rows: usize,
    pub cols: usize,
    /// Density of `σ` per cell.
    pub sigma_density: Vec<f64>,
    pub sigma_atoms: Vec<(Vec<f64>, f64)>,
    pub nu_hat_cells: Vec<CompactifiedMeasure>,
    pub nu_hat_atoms: Vec<CompactifiedMeasure>,
}

impl DiPernaMajdaMeasure {
    /// `∫ g ⟨ν̂, ṽ⟩ dσ` with `ṽ(B) = (1−|B|) v(B/(1−|B|))` inside the ball and
    /// `ṽ = v^∞` on the sphere.
    pub fn pairing(&self, g: &(dyn Fn(&[f64]) -> f64 + Sync), v: &Integrand) -> Result<f64> {
        let rec = v.recession_or_err()?;
        let tilde = |x: &[f64], nh: &CompactifiedMeasure| -> f64 {
            let inner: f64 = nh
                .interior
                .iter()
                .map(|(b, w)| {
                    let s = 1.0 - b.norm();
                    w * s * v.eval_at(x, &b.scale(1.0 / s))
                })
                .sum();
            let outer: f64 = nh.sphere.iter().map(|(p, w)| w * v.weight(x) * rec.eval(p)).sum();
            inner + outer
        };
        let mut total = 0.0;
        for (i, nh) in self.nu_hat_cells.iter().enumerate() {
            if self.sigma_density[i] > 0.0 {
                total += self.sigma_density[i] * self.mesh.integrate_cell(i, &|x| g(x) * tilde(x, nh));
            }
        }
        for ((x, m), nh) in self.sigma_atoms.iter().zip(&self.nu_hat_atoms) {
            total += m * g(x) * tilde(x, nh);
        }
        Ok(total)
    }
}

fn compactify(a: &Matrix) -> Matrix {
    a.scale(1.0 / (1.0 + a.norm()))
}

fn decompactify(b: &Matrix) -> Result<Matrix> {
    let n = b.norm();
    if n >= 1.0 {
        return Err(Error::Inversion(format!("interior point with norm {n} is not inside the unit ball")));
    }
    Ok(b.scale(1.0 / (1.0 - n)))
}

/// `σ = ⟨ν_x, 1+|·|⟩ dx + λ`, with `ν̂_x` carrying `(1+|A|)ν_x / (dσ/dx)` at
/// `d(A)` and `(dλ/dσ) ν_x^∞` on the sphere.
pub fn to_diperna_majda(gym: &GenYoungMeasure) -> Result<DiPernaMajdaMeasure> {
    let n = gym.mesh.n_cells();
    let mut sigma_density = Vec::with_capacity(n);
    let mut nu_hat_cells = Vec::with_capacity(n);
    for i in 0..n {
        let nu = &gym.nu[i];
        let lam = gym.lambda_density[i];
        let s = nu.expect(|a| 1.0 + a.norm()) + lam;
        if !s.is_finite() {
            return Err(Error::arg(format!("⟨ν, |·|⟩ is not finite on cell {i}")));
        }
        let interior = nu
            .support
            .iter()
            .zip(&nu.weights)
            .map(|(a, &w)| (compactify(a), (1.0 + a.norm()) * w / s))
            .collect();
        let sphere = match &gym.nu_inf_cells[i] {
            Some(p) if lam > 0.0 => p.support.iter().zip(&p.weights).map(|(d, &w)| (*d, lam * w / s)).collect(),
            _ => Vec::new(),
        };
        sigma_density.push(s);
        nu_hat_cells.push(CompactifiedMeasure { interior, sphere });
    }
    let sigma_atoms = gym.atoms.iter().map(|a| (a.location.clone(), a.mass)).collect();
    let nu_hat_atoms = gym
        .atoms
        .iter()
        .map(|a| CompactifiedMeasure {
            interior: Vec::new(),
            sphere: a.nu_inf.support.iter().copied().zip(a.nu_inf.weights.iter().copied()).collect(),
        })
        .collect();
    Ok(DiPernaMajdaMeasure { mesh: gym.mesh.clone(), rows: gym.rows, cols: gym.cols, sigma_density, sigma_atoms, nu_hat_cells, nu_hat_atoms })
}

/// Inverse of [`to_diperna_majda`].
pub fn from_diperna_majda(dm: &DiPernaMajdaMeasure) -> Result<GenYoungMeasure> {
    let n = dm.mesh.n_cells();
    if dm.sigma_density.len() != n || dm.nu_hat_cells.len() != n || dm.sigma_atoms.len() != dm.nu_hat_atoms.len() {
        return Err(Error::arg("malformed DiPerna–Majda record"));
    }
    let mut nu = Vec::with_capacity(n);
    let mut lambda_density = Vec::with_capacity(n);
    let mut nu_inf_cells = Vec::with_capacity(n);
    for i in 0..n {
        let s = dm.sigma_density[i];
        let nh = &dm.nu_hat_cells[i];
        if !(s > 0.0) {
            return Err(Error::Inversion(format!("σ has zero density on cell {i} where ν must be a probability")));
        }
        let mut entries = Vec::with_capacity(nh.interior.len());
        for (b, w) in &nh.interior {
            let a = decompactify(b)?;
            entries.push((a, s * w / (1.0 + a.norm())));
        }
        let mass: f64 = entries.iter().map(|e| e.1).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Inversion(format!("reconstructed ν on cell {i} has mass {mass}")));
        }
        nu.push(ProbabilityMeasure::from_weights(entries)?);
        let sphere_mass: f64 = nh.sphere.iter().map(|p| p.1).sum();
        if sphere_mass > 0.0 {
            lambda_density.push(s * sphere_mass);
            nu_inf_cells.push(Some(ProbabilityMeasure::from_weights(nh.sphere.clone())?));
        } else {
            lambda_density.push(0.0);
            nu_inf_cells.push(None);
        }
    }
    let mut atoms = Vec::with_capacity(dm.sigma_atoms.len());
    for ((x, m), nh) in dm.sigma_atoms.iter().zip(&dm.nu_hat_atoms) {
        if nh.interior.iter().any(|p| p.1 > 0.0) {
            return Err(Error::Inversion(format!("σ atom at {x:?} carries interior (oscillation) mass")));
        }
        let sphere_mass: f64 = nh.sphere.iter().map(|p| p.1).sum();
        if *m > 0.0 && sphere_mass > 0.0 {
            atoms.push(ConcentrationAtom {
                location: x.clone(),
                mass: m * sphere_mass,
                nu_inf: ProbabilityMeasure::from_weights(nh.sphere.clone())?,
            });
        }
    }
    GenYoungMeasure::new(dm.mesh.clone(), nu, lambda_density, nu_inf_cells, atoms)
}
