use serde::Serialize;

use super::GenYoungMeasure;
use crate::error::{Error, Result};

/// Inner and outer traces of a gradient measure `Λ` with underlying `u`.
///
/// The outer trace is `inner·H^{N−1} + ⟨ν_x^∞, id⟩ϱ(x) λ|_{∂Ω}`. On an
/// interval `H^0` is the counting measure, so `outer` lists point values
/// with the boundary atoms already added. On the disk, `outer` is the
/// density part (equal to `inner`) and the atoms are in `concentration`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GymTraces {
    pub inner: Vec<(Vec<f64>, Vec<f64>)>,
    pub concentration: Vec<(Vec<f64>, Vec<f64>)>,
    pub outer: Vec<(Vec<f64>, Vec<f64>)>,
}

pub fn gym_traces(gym: &GenYoungMeasure) -> Result<GymTraces> {
    let u = gym.field.as_ref().ok_or_else(|| Error::NotGradient("not a gradient GYM: no underlying field".into()))?;
    let inner = u.trace();
    let mut concentration: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for a in gym.atoms.iter().filter(|a| gym.is_boundary_atom(a)) {
        let rho = gym.mesh.outward_normal(&a.location).expect("boundary atom has a normal");
        let jump: Vec<f64> = a.nu_inf.mean().mul_vec(&rho).iter().map(|x| x * a.mass).collect();
        match concentration.iter_mut().find(|(x, _)| *x == a.location) {
            Some((_, v)) => v.iter_mut().zip(&jump).for_each(|(p, q)| *p += q),
            None => concentration.push((a.location.clone(), jump)),
        }
    }
    let mut outer = inner.clone();
    if gym.mesh.dim() == 1 {
        for (x, v) in &mut outer {
            if let Some((_, j)) = concentration.iter().find(|(y, _)| y == x) {
                v.iter_mut().zip(j).for_each(|(p, q)| *p += q);
            }
        }
    }
    Ok(GymTraces { inner, concentration, outer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::BVField;
    use crate::gym::{ConcentrationAtom, ProbabilityMeasure};
    use crate::linalg::Matrix;
    use crate::mesh::Mesh;

    #[test]
    fn toy_limit_traces() {
        let eps = 0.3;
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh.clone(), 1, 1);
        g.atoms.push(ConcentrationAtom { location: vec![1.0], mass: 1.0 - eps, nu_inf: ProbabilityMeasure::dirac(Matrix::scalar(1.0)) });
        assert!(matches!(gym_traces(&g), Err(Error::NotGradient(_))));
        let g = g.with_field(BVField::constant(mesh, vec![eps / 2.0]).unwrap()).unwrap();
        let t = gym_traces(&g).unwrap();
        assert_eq!(t.inner, vec![(vec![0.0], vec![eps / 2.0]), (vec![1.0], vec![eps / 2.0])]);
        assert_eq!(t.outer[0].1, vec![eps / 2.0]);
        assert!((t.outer[1].1[0] - (1.0 - eps / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn interior_concentration_leaves_traces() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh.clone(), 1, 1).with_field(BVField::constant(mesh, vec![1.0]).unwrap()).unwrap();
        g.atoms.push(ConcentrationAtom { location: vec![0.5], mass: 2.0, nu_inf: ProbabilityMeasure::dirac(Matrix::scalar(-1.0)) });
        let t = gym_traces(&g).unwrap();
        assert_eq!(t.inner, t.outer);
        assert!(t.concentration.is_empty());
    }
}
