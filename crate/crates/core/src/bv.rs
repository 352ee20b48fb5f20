//! Piecewise affine fields whose distributional derivative is a
//! [`DiscreteMeasure`]: broken P1 on intervals (jumps at interfaces),
//! continuous P1 on triangulations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;
use crate::mesh::{IntervalMesh, Mesh};
use crate::quadrature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum FieldValues {
    /// Endpoint values of the affine piece on each interval cell.
    Broken { left: Vec<Vec<f64>>, right: Vec<Vec<f64>> },
    /// Vertex values of a continuous P1 field.
    Nodal { values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BVField {
    pub mesh: Mesh,
    pub components: usize,
    pub values: FieldValues,
}

impl BVField {
    /// Continuous field from vertex values (interval nodes or triangle vertices).
    pub fn from_nodal(mesh: Mesh, values: Vec<Vec<f64>>) -> Result<BVField> {
        let components = values.first().map_or(0, Vec::len);
        if components == 0 || values.iter().any(|v| v.len() != components) {
            return Err(Error::arg("nodal values need a common positive number of components"));
        }
        match &mesh {
            Mesh::Interval(m) => {
                if values.len() != m.nodes().len() {
                    return Err(Error::arg("one value per interval node expected"));
                }
                let left = values[..values.len() - 1].to_vec();
                let right = values[1..].to_vec();
                Ok(BVField { mesh, components, values: FieldValues::Broken { left, right } })
            }
            Mesh::Planar(m) => {
                if values.len() != m.vertices.len() {
                    return Err(Error::arg("one value per triangle vertex expected"));
                }
                Ok(BVField { mesh, components, values: FieldValues::Nodal { values } })
            }
        }
    }

    pub fn scalar_nodal(mesh: Mesh, values: &[f64]) -> Result<BVField> {
        BVField::from_nodal(mesh, values.iter().map(|&v| vec![v]).collect())
    }

    /// Broken P1 field on an interval mesh from per-cell endpoint values.
    pub fn broken(mesh: IntervalMesh, left: Vec<Vec<f64>>, right: Vec<Vec<f64>>) -> Result<BVField> {
        let components = left.first().map_or(0, Vec::len);
        if left.len() != mesh.cells()
            || right.len() != mesh.cells()
            || components == 0
            || left.iter().chain(&right).any(|v| v.len() != components)
        {
            return Err(Error::arg("broken field needs per-cell endpoint values of a common length"));
        }
        Ok(BVField { mesh: Mesh::Interval(mesh), components, values: FieldValues::Broken { left, right } })
    }

    /// Continuous interpolant of `f` at the mesh vertices.
    pub fn interpolate(mesh: Mesh, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<BVField> {
        let values: Vec<Vec<f64>> = match &mesh {
            Mesh::Interval(m) => m.nodes().iter().map(|&x| f(&[x])).collect(),
            Mesh::Planar(m) => m.vertices.iter().map(|v| f(v)).collect(),
        };
        BVField::from_nodal(mesh, values)
    }

    pub fn constant(mesh: Mesh, value: Vec<f64>) -> Result<BVField> {
        BVField::interpolate(mesh, |_| value.clone())
    }

    /// Value at `x`; on an interval, interface points take the value from the right cell.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match (&self.mesh, &self.values) {
            (Mesh::Interval(m), FieldValues::Broken { left, right }) => {
                let i = m.locate(x[0]).ok_or_else(|| Error::arg("point outside the interval"))?;
                let (x0, x1) = m.cell(i);
                let s = ((x[0] - x0) / (x1 - x0)).clamp(0.0, 1.0);
                Ok((0..self.components).map(|c| (1.0 - s) * left[i][c] + s * right[i][c]).collect())
            }
            (Mesh::Planar(m), FieldValues::Nodal { values }) => {
                for t in 0..m.triangles.len() {
                    if let Some(b) = barycentric(m.corners(t), [x[0], x[1]]) {
                        let tri = m.triangles[t];
                        return Ok((0..self.components)
                            .map(|c| (0..3).map(|k| b[k] * values[tri[k]][c]).sum())
                            .collect());
                    }
                }
                Err(Error::arg("point outside the triangulation"))
            }
            _ => Err(Error::arg("field layout does not match its mesh")),
        }
    }

    /// Gradient on cell `i` as an `M x N` matrix.
    pub fn cell_gradient(&self, i: usize) -> Matrix {
        match (&self.mesh, &self.values) {
            (Mesh::Interval(m), FieldValues::Broken { left, right }) => {
                let (x0, x1) = m.cell(i);
                Matrix::from_fn(self.components, 1, |c, _| (right[i][c] - left[i][c]) / (x1 - x0))
            }
            (Mesh::Planar(m), FieldValues::Nodal { values }) => m.gradient(i, values),
            _ => unreachable!("layout is fixed by the constructors"),
        }
    }

    /// Jumps `u(x+) − u(x−)` at interior interval nodes, as `(node index, jump)`.
    pub fn jumps(&self) -> Vec<(usize, Vec<f64>)> {
        match &self.values {
            FieldValues::Broken { left, right } => (1..left.len())
                .filter_map(|j| {
                    let jump: Vec<f64> = (0..self.components).map(|c| left[j][c] - right[j - 1][c]).collect();
                    jump.iter().any(|&h| h != 0.0).then_some((j, jump))
                })
                .collect(),
            FieldValues::Nodal { .. } => Vec::new(),
        }
    }

    /// Distributional derivative: cellwise gradients plus jump atoms with
    /// rank-one direction `jump ⊗ n / |jump|` (`n = +1` in one dimension).
    pub fn derivative(&self) -> DiscreteMeasure {
        let density: Vec<Matrix> = (0..self.mesh.n_cells()).map(|i| self.cell_gradient(i)).collect();
        let atoms = match &self.mesh {
            Mesh::Interval(m) => self
                .jumps()
                .into_iter()
                .map(|(j, h)| (vec![m.nodes()[j]], Matrix::outer(&h, &[1.0])))
                .collect(),
            Mesh::Planar(_) => Vec::new(),
        };
        DiscreteMeasure::new(self.mesh.clone(), density, atoms).expect("derivative of a valid field")
    }

    /// One-sided boundary values `(location, value)`: `u(a+)`, `u(b−)` on an
    /// interval, vertex values on the disk boundary.
    pub fn trace(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        match (&self.mesh, &self.values) {
            (Mesh::Interval(m), FieldValues::Broken { left, right }) => vec![
                (vec![m.a()], left[0].clone()),
                (vec![m.b()], right[right.len() - 1].clone()),
            ],
            (Mesh::Planar(m), FieldValues::Nodal { values }) => m
                .vertices
                .iter()
                .zip(&m.on_boundary)
                .zip(values)
                .filter(|((_, &b), _)| b)
                .map(|((v, _), u)| (v.to_vec(), u.clone()))
                .collect(),
            _ => unreachable!("layout is fixed by the constructors"),
        }
    }

    /// Trace value at the boundary point closest to `x`.
    pub fn trace_at(&self, x: &[f64]) -> Vec<f64> {
        self.trace()
            .into_iter()
            .min_by(|p, q| dist(&p.0, x).total_cmp(&dist(&q.0, x)))
            .map(|p| p.1)
            .expect("every mesh has boundary points")
    }

    pub fn l1_norm(&self) -> f64 {
        let zero = BVField::constant(self.mesh.clone(), vec![0.0; self.components]).expect("valid mesh");
        self.l1_distance(&zero).expect("same mesh")
    }

    /// `‖u − v‖_{L¹}`, exact for piecewise affine fields. Interval fields may
    /// live on different meshes of the same interval.
    pub fn l1_distance(&self, other: &BVField) -> Result<f64> {
        if self.components != other.components || !self.mesh.same_domain(&other.mesh) {
            return Err(Error::MismatchedDomains("L1 distance between unrelated fields".into()));
        }
        match (&self.mesh, &other.mesh) {
            (Mesh::Interval(p), Mesh::Interval(q)) => {
                let common = p.merged(q)?;
                let mut total = 0.0;
                for i in 0..common.cells() {
                    let (x0, x1) = common.cell(i);
                    // the difference is affine on each common cell; split at its root
                    let eps = 1e-15 * (x1 - x0);
                    let d0 = diff(self, other, x0 + eps)?;
                    let d1 = diff(self, other, x1 - eps)?;
                    for c in 0..self.components {
                        total += affine_abs_integral(d0[c], d1[c], x1 - x0);
                    }
                }
                Ok(total)
            }
            (Mesh::Planar(m), Mesh::Planar(_)) if self.mesh == other.mesh => {
                let (FieldValues::Nodal { values: a }, FieldValues::Nodal { values: b }) = (&self.values, &other.values)
                else {
                    unreachable!("planar fields are nodal")
                };
                let mut total = 0.0;
                for t in 0..m.triangles.len() {
                    let tri = m.triangles[t];
                    let p = m.corners(t);
                    for c in 0..self.components {
                        let d: Vec<f64> = tri.iter().map(|&k| a[k][c] - b[k][c]).collect();
                        total += quadrature::integrate_triangle(p, |x| {
                            let bc = barycentric(p, x).unwrap_or([1.0 / 3.0; 3]);
                            (bc[0] * d[0] + bc[1] * d[1] + bc[2] * d[2]).abs()
                        });
                    }
                }
                Ok(total)
            }
            _ => Err(Error::MismatchedDomains("planar fields must share the mesh".into())),
        }
    }

    /// Nodal values of a continuous field (planar meshes, or interval fields without jumps).
    pub fn nodal_values(&self) -> Option<Vec<Vec<f64>>> {
        match &self.values {
            FieldValues::Nodal { values } => Some(values.clone()),
            FieldValues::Broken { left, right } => {
                if !self.jumps().is_empty() {
                    return None;
                }
                let mut v = left.clone();
                v.push(right[right.len() - 1].clone());
                Some(v)
            }
        }
    }
}

fn diff(a: &BVField, b: &BVField, x: f64) -> Result<Vec<f64>> {
    let u = a.eval(&[x])?;
    let v = b.eval(&[x])?;
    Ok(u.iter().zip(&v).map(|(p, q)| p - q).collect())
}

/// `∫_0^h |d0 + (d1 − d0) s/h| ds`.
fn affine_abs_integral(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * h * (d0.abs() + d1.abs())
    } else {
        let s = d0.abs() / (d0.abs() + d1.abs());
        0.5 * h * (s * d0.abs() + (1.0 - s) * d1.abs())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn barycentric(p: [[f64; 2]; 3], x: [f64; 2]) -> Option<[f64; 3]> {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    let l0 = 1.0 - l1 - l2;
    let tol = -1e-12;
    (l0 >= tol && l1 >= tol && l2 >= tol).then_some([l0, l1, l2])
}

/// Boundary/interior split of one member of an L¹-null sequence.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// Part supported in the boundary collar.
    pub boundary: BVField,
    /// Remainder, vanishing near the boundary.
    pub interior: BVField,
    /// Collar width used.
    pub radius: f64,
    /// `|Dc| + |Dd| − |Du|`, the variation created by the cut.
    pub excess: f64,
}

/// Split each `u_k` of an L¹-null interval sequence as `c_k + d_k` with `c_k`
/// supported within `r_k` of the endpoints and `d_k` vanishing there. The cut
/// is placed at the node of the collar `[r_k/2, r_k]` where `|u_k|` is smallest,
/// so the created variation is at most `2‖u_k‖_{L¹}/(r_k/2)` per endpoint.
pub fn decompose_boundary_interior(sequence: &[BVField], radii: &[f64], null_tol: f64) -> Result<Vec<Decomposition>> {
    if sequence.len() != radii.len() {
        return Err(Error::arg("one collar radius per sequence member expected"));
    }
    let last = sequence.last().ok_or_else(|| Error::arg("empty sequence"))?;
    let norm = last.l1_norm();
    if norm > null_tol {
        return Err(Error::NotNullLimit { norm, tol: null_tol });
    }
    sequence.iter().zip(radii).map(|(u, &r)| decompose_one(u, r)).collect()
}

fn decompose_one(u: &BVField, r: f64) -> Result<Decomposition> {
    let (Mesh::Interval(m), FieldValues::Broken { left, right }) = (&u.mesh, &u.values) else {
        return Err(Error::arg("boundary/interior decomposition is implemented on intervals"));
    };
    let nodes = m.nodes();
    let (a, b) = (m.a(), m.b());
    if !(r > 0.0 && 2.0 * r < b - a) {
        return Err(Error::arg("collar radius must be positive and below half the interval"));
    }
    let node_abs = |j: usize| -> f64 {
        // smaller one-sided value: cutting there creates the least variation
        let l = if j > 0 { crate::linalg::norm(&right[j - 1]) } else { f64::INFINITY };
        let rv = if j < left.len() { crate::linalg::norm(&left[j]) } else { f64::INFINITY };
        l.min(rv)
    };
    let pick = |range: &dyn Fn(f64) -> bool| -> Result<usize> {
        (0..nodes.len())
            .filter(|&j| range(nodes[j]))
            .min_by(|&i, &j| node_abs(i).total_cmp(&node_abs(j)).then(i.cmp(&j)))
            .ok_or_else(|| Error::arg("mesh has no node in the collar; refine it"))
    };
    let ja = pick(&|x| x - a >= 0.5 * r - 1e-15 && x - a <= r + 1e-15)?;
    let jb = pick(&|x| b - x >= 0.5 * r - 1e-15 && b - x <= r + 1e-15)?;
    let zero = vec![0.0; u.components];
    let mut cl = Vec::with_capacity(left.len());
    let mut cr = Vec::with_capacity(left.len());
    let mut dl = Vec::with_capacity(left.len());
    let mut dr = Vec::with_capacity(left.len());
    for i in 0..left.len() {
        if i < ja || i >= jb {
            cl.push(left[i].clone());
            cr.push(right[i].clone());
            dl.push(zero.clone());
            dr.push(zero.clone());
        } else {
            cl.push(zero.clone());
            cr.push(zero.clone());
            dl.push(left[i].clone());
            dr.push(right[i].clone());
        }
    }
    let c = BVField::broken(m.clone(), cl, cr)?;
    let d = BVField::broken(m.clone(), dl, dr)?;
    let excess = c.derivative().total_variation() + d.derivative().total_variation() - u.derivative().total_variation();
    Ok(Decomposition { boundary: c, interior: d, radius: r, excess })
}

/// Collar masses `sup_k |μ_k|((∂Ω)_r ∩ Ω)` for each radius, used to test
/// whether a sequence of derivatives charges the boundary.
pub fn boundary_charge_profile(sequence: &[DiscreteMeasure], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup: f64 = 0.0;
        for mu in sequence {
            let Mesh::Interval(m) = &mu.mesh else {
                return Err(Error::arg("charge profile is implemented on intervals"));
            };
            let (a, b) = (m.a(), m.b());
            let mut mass = 0.0;
            for i in 0..m.cells() {
                let (x0, x1) = m.cell(i);
                let overlap = (x1.min(a + r) - x0).max(0.0) + (x1 - x0.max(b - r)).max(0.0);
                mass += mu.density[i].norm() * overlap.min(x1 - x0);
            }
            for at in &mu.atoms {
                let x = at.location[0];
                if x > a && x < b && (x - a < r || b - x < r) {
                    mass += at.mass;
                }
            }
            sup = sup.max(mass);
        }
        out.push((r, sup));
    }
    Ok(out)
}

/// Whether the fitted profile `η(r)` vanishes: the mass at the smallest
/// radius is below `tol` and the profile is nonincreasing as `r` shrinks.
pub fn does_not_charge_boundary(profile: &[(f64, f64)], tol: f64) -> bool {
    let mut sorted = profile.to_vec();
    sorted.sort_by(|p, q| q.0.total_cmp(&p.0));
    sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12) && sorted.last().is_some_and(|p| p.1 <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> IntervalMesh {
        IntervalMesh::uniform(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn affine_field_has_no_singular_part() {
        let m = Mesh::Interval(mesh(7));
        let u = BVField::interpolate(m, |x| vec![3.0 * x[0] - 1.0]).unwrap();
        let du = u.derivative();
        assert!(du.atoms.is_empty());
        assert!(du.density.iter().all(|d| (d.to_scalar() - 3.0).abs() < 1e-12));
    }

    #[test]
    fn step_gives_single_atom() {
        let m = mesh(4);
        let left = vec![vec![0.0], vec![0.0], vec![-0.5], vec![-0.5]];
        let u = BVField::broken(m, left.clone(), left).unwrap();
        let du = u.derivative();
        assert_eq!(du.atoms.len(), 1);
        assert_eq!(du.atoms[0].location, vec![0.5]);
        assert_eq!(du.atoms[0].mass, 0.5);
        assert_eq!(du.atoms[0].direction.to_scalar(), -1.0);
        // interior step does not move the traces
        assert_eq!(u.trace()[0].1, vec![0.0]);
        assert_eq!(u.trace()[1].1, vec![-0.5]);
    }

    #[test]
    fn l1_distance_splits_at_sign_changes() {
        let u = BVField::interpolate(Mesh::Interval(mesh(1)), |x| vec![2.0 * x[0] - 1.0]).unwrap();
        assert!((u.l1_norm() - 0.5).abs() < 1e-14);
        let v = BVField::interpolate(Mesh::Interval(mesh(3)), |_| vec![0.0]).unwrap();
        assert!((u.l1_distance(&v).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn planar_l1_norm_of_constant_is_area() {
        let m = crate::mesh::TriMesh::disk(8, [1.0, 0.0]).unwrap();
        let area: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        let u = BVField::constant(Mesh::Planar(m), vec![2.0]).unwrap();
        assert!((u.l1_norm() - 2.0 * area).abs() < 1e-12);
    }

    #[test]
    fn decomposition_rejects_non_null_sequences() {
        let u = BVField::constant(Mesh::Interval(mesh(8)), vec![1.0]).unwrap();
        assert!(matches!(
            decompose_boundary_interior(&[u], &[0.25], 1e-3),
            Err(Error::NotNullLimit { .. })
        ));
    }
}
