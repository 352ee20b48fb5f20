use serde::Serialize;

use super::GenYoungMeasure;
use crate::boundary::{qslb_infimum, QslbOptions, Verdict};
use crate::bv::BVField;
use crate::error::{Error, Result};
use crate::integrands::Integrand;

#[derive(Clone, Debug, Serialize)]
pub struct CharacterizationOptions {
    /// Violations smaller than `tol·(1 + |lhs| + |rhs|)` are ignored.
    pub tol: f64,
    /// Cells on which the Jensen inequality may fail (the exceptional null set).
    pub exceptional_cells: usize,
    /// Budget for deciding QSLB membership of two-dimensional test integrands.
    pub qslb: QslbOptions,
}

impl Default for CharacterizationOptions {
    fn default() -> Self {
        CharacterizationOptions {
            tol: 1e-8,
            exceptional_cells: 1,
            qslb: QslbOptions { levels: 2, budget: 2000, restarts: 6, tol: 1e-4, seed: 0 },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    /// Smallest `rhs − lhs` encountered (`+∞` when nothing was tested).
    pub worst_margin: f64,
    pub violations: usize,
    pub tested: usize,
    pub detail: String,
}

impl ConditionReport {
    fn new() -> Self {
        ConditionReport { pass: true, worst_margin: f64::INFINITY, violations: 0, tested: 0, detail: String::new() }
    }

    fn record(&mut self, lhs: f64, rhs: f64, tol: f64, what: impl FnOnce() -> String) {
        let margin = rhs - lhs;
        self.tested += 1;
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
        if margin < -tol * (1.0 + lhs.abs() + rhs.abs()) {
            self.violations += 1;
            if self.detail.is_empty() {
                self.detail = what();
            }
        }
    }
}

/// Finiteness, Jensen on the oscillation part, the
/// singular inequality in the interior and boundary positivity against
/// every test integrand that is QSLB at the local normal.
#[derive(Clone, Debug, Serialize)]
pub struct CharacterizationReport {
    pub finiteness: ConditionReport,
    pub jensen: ConditionReport,
    pub singular: ConditionReport,
    pub boundary: ConditionReport,
    pub pass: bool,
}

pub fn check_characterization(
    gym: &GenYoungMeasure,
    u: &BVField,
    family: &[Integrand],
    opts: &CharacterizationOptions,
) -> Result<CharacterizationReport> {
    if family.is_empty() {
        return Err(Error::Characterization("empty test family".into()));
    }
    if u.mesh != gym.mesh {
        return Err(Error::MismatchedDomains("field and measure live on different meshes".into()));
    }
    for v in family {
        if !v.quasiconvex {
            return Err(Error::arg(format!("test integrand {} is not flagged quasiconvex", v.name)));
        }
        if (v.rows, v.cols) != (gym.rows, gym.cols) {
            return Err(Error::arg(format!("test integrand {} has the wrong shape", v.name)));
        }
        v.recession_or_err()?;
    }
    let tol = opts.tol;

    let mut finiteness = ConditionReport::new();
    let oscillation: f64 = (0..gym.mesh.n_cells())
        .map(|i| gym.mesh.cell_measure(i) * gym.nu[i].expect(|a| a.norm()))
        .sum();
    let concentration = gym.lambda_measure().total_variation();
    let total = oscillation + concentration;
    finiteness.tested = 1;
    finiteness.worst_margin = 0.0;
    finiteness.detail = format!("∫⟨ν,|·|⟩ = {oscillation}, λ(Ω̄) = {concentration}");
    if !total.is_finite() {
        finiteness.pass = false;
        finiteness.violations = 1;
        finiteness.worst_margin = f64::NEG_INFINITY;
    }

    let mut jensen = ConditionReport::new();
    let mut bad_cells = vec![false; gym.mesh.n_cells()];
    for i in 0..gym.mesh.n_cells() {
        let grad = u.cell_gradient(i);
        for v in family {
            let rec = v.recession_or_err()?;
            let lhs = v.eval(&grad);
            let mut rhs = gym.nu[i].expect(|a| v.eval(a));
            if let Some(p) = &gym.nu_inf_cells[i] {
                rhs += gym.lambda_density[i] * p.expect(|d| rec.eval(d));
            }
            let before = jensen.violations;
            jensen.record(lhs, rhs, tol, || format!("cell {i}, {}: v(∇u) = {lhs} > {rhs}", v.name));
            if jensen.violations > before {
                bad_cells[i] = true;
            }
        }
    }
    let cells = bad_cells.iter().filter(|&&b| b).count();
    jensen.pass = cells <= opts.exceptional_cells;
    if cells > 0 {
        jensen.detail = format!("{cells} cell(s) violate Jensen; first: {}", jensen.detail);
    }

    let mut singular = ConditionReport::new();
    let du = u.derivative();
    let mut locations: Vec<Vec<f64>> = du.interior_atoms().map(|a| a.location.clone()).collect();
    for a in gym.atoms.iter().filter(|a| !gym.is_boundary_atom(a)) {
        if !locations.iter().any(|x| same_point(x, &a.location)) {
            locations.push(a.location.clone());
        }
    }
    for x in &locations {
        for v in family {
            let rec = v.recession_or_err()?;
            let lhs: f64 = du
                .interior_atoms()
                .filter(|a| same_point(&a.location, x))
                .map(|a| a.mass * rec.eval(&a.direction))
                .sum();
            let rhs: f64 = gym
                .atoms
                .iter()
                .filter(|a| same_point(&a.location, x))
                .map(|a| a.mass * a.nu_inf.expect(|d| rec.eval(d)))
                .sum();
            singular.record(lhs, rhs, tol, || format!("at {x:?}, {}: {lhs} > {rhs}", v.name));
        }
    }
    singular.pass = singular.violations == 0;

    let mut boundary = ConditionReport::new();
    let mut membership: Vec<(usize, Vec<f64>, bool)> = Vec::new();
    for a in gym.atoms.iter().filter(|a| gym.is_boundary_atom(a)) {
        let rho = gym.mesh.outward_normal(&a.location).expect("boundary atom has a normal");
        for (k, v) in family.iter().enumerate() {
            let rec = v.recession_or_err()?;
            let member = match membership.iter().find(|(j, r, _)| *j == k && same_point(r, &rho)) {
                Some(&(_, _, m)) => m,
                None => {
                    let m = qslb_infimum(rec, &rho, &opts.qslb)?.verdict == Verdict::Qslb;
                    membership.push((k, rho.clone(), m));
                    m
                }
            };
            if member {
                let value = a.nu_inf.expect(|d| rec.eval(d));
                boundary.record(0.0, value, tol, || format!("at {:?}, {}: ⟨ν∞, v∞⟩ = {value}", a.location, v.name));
            }
        }
    }
    boundary.pass = boundary.violations == 0;

    let pass = finiteness.pass && jensen.pass && singular.pass && boundary.pass;
    Ok(CharacterizationReport { finiteness, jensen, singular, boundary, pass })
}

fn same_point(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gym::{ConcentrationAtom, ProbabilityMeasure};
    use crate::integrands::lookup;
    use crate::linalg::Matrix;
    use crate::mesh::Mesh;

    fn family() -> Vec<Integrand> {
        ["abs", "linear_form:1", "linear_form:-1", "euclid_sqrt1p"].iter().map(|s| lookup(s).unwrap()).collect()
    }

    #[test]
    fn affine_field_gives_equalities() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let a0 = 0.7;
        let u = BVField::interpolate(mesh.clone(), |x| vec![a0 * x[0]]).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh, 1, 1);
        g.nu.iter_mut().for_each(|p| *p = ProbabilityMeasure::dirac(Matrix::scalar(a0)));
        let r = check_characterization(&g, &u, &family(), &Default::default()).unwrap();
        assert!(r.pass);
        assert!(r.jensen.worst_margin.abs() < 1e-15);
        assert_eq!(r.singular.tested, 0);
    }

    #[test]
    fn jump_without_concentration_fails_iii() {
        let m = crate::mesh::IntervalMesh::uniform(0.0, 1.0, 2).unwrap();
        let u = BVField::broken(m.clone(), vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![1.0]]).unwrap();
        let g = GenYoungMeasure::trivial(Mesh::Interval(m), 1, 1);
        let r = check_characterization(&g, &u, &family(), &Default::default()).unwrap();
        assert!(!r.singular.pass);
    }

    #[test]
    fn family_must_be_quasiconvex_and_nonempty() {
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let u = BVField::constant(mesh.clone(), vec![0.0]).unwrap();
        let g = GenYoungMeasure::trivial(mesh, 1, 1);
        assert!(matches!(check_characterization(&g, &u, &[], &Default::default()), Err(Error::Characterization(_))));
        let bad = vec![lookup("double_well_1d").unwrap()];
        assert!(matches!(check_characterization(&g, &u, &bad, &Default::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn negative_boundary_direction_in_one_dimension() {
        // v∞ = |·| is QSLB, so any boundary atom passes; linear forms are not
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let u = BVField::constant(mesh.clone(), vec![0.0]).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh, 1, 1);
        g.atoms.push(ConcentrationAtom { location: vec![1.0], mass: 1.0, nu_inf: ProbabilityMeasure::dirac(Matrix::scalar(-1.0)) });
        let r = check_characterization(&g, &u, &family(), &Default::default()).unwrap();
        assert!(r.boundary.pass);
        assert_eq!(r.boundary.tested, 2);
    }
}
