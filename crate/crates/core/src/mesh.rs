//! Interval meshes graded toward the endpoints and triangulated disks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadrature;

const GEOM_TOL: f64 = 1e-12;
/// Points this close (relative) to an endpoint are identified with it.
const POINT_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mesh {
    Interval(IntervalMesh),
    Planar(TriMesh),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
}

impl IntervalMesh {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::arg("an interval mesh needs at least two nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("interval mesh nodes must be finite and strictly increasing"));
        }
        Ok(IntervalMesh { nodes })
    }

    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::arg("uniform mesh needs at least one cell"));
        }
        let h = (b - a) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| a + h * i as f64).collect();
        nodes[cells] = b;
        IntervalMesh::new(nodes)
    }

    /// Uniform mesh whose first and last cells are split geometrically toward
    /// the endpoints: `levels` extra nodes at distances `h * ratio^j`.
    pub fn graded(a: f64, b: f64, cells: usize, levels: usize, ratio: f64) -> Result<Self> {
        if !(0.0 < ratio && ratio < 1.0) {
            return Err(Error::arg("grading ratio must lie in (0, 1)"));
        }
        let base = IntervalMesh::uniform(a, b, cells)?;
        let h = (b - a) / cells as f64;
        let mut nodes = base.nodes;
        for j in 1..=levels {
            let d = h * ratio.powi(j as i32);
            nodes.push(a + d);
            nodes.push(b - d);
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|x, y| (*x - *y).abs() <= POINT_TOL * (b - a));
        IntervalMesh::new(nodes)
    }

    /// Union of the node sets, merged within a relative tolerance.
    pub fn merged(&self, other: &IntervalMesh) -> Result<IntervalMesh> {
        let mut nodes: Vec<f64> = self.nodes.iter().chain(other.nodes.iter()).copied().collect();
        nodes.sort_by(f64::total_cmp);
        let scale = (self.b() - self.a()).abs().max(1.0);
        nodes.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * scale);
        IntervalMesh::new(nodes)
    }

    pub fn with_extra_nodes(&self, extra: &[f64]) -> Result<IntervalMesh> {
        let mut nodes = self.nodes.clone();
        nodes.extend(extra.iter().copied().filter(|&x| x > self.a() && x < self.b()));
        nodes.sort_by(f64::total_cmp);
        let scale = (self.b() - self.a()).abs().max(1.0);
        nodes.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * scale);
        IntervalMesh::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.nodes[i], self.nodes[i + 1])
    }

    pub fn min_cell(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Cell containing `x`; interface points belong to the cell on their right.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < self.a() - GEOM_TOL || x > self.b() + GEOM_TOL {
            return None;
        }
        let i = self.nodes.partition_point(|&n| n <= x);
        Some(i.saturating_sub(1).min(self.cells() - 1))
    }

    /// Index of the node within `tol` of `x`.
    pub fn node_index(&self, x: f64, tol: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&n| n < x);
        [i.wrapping_sub(1), i]
            .into_iter()
            .filter(|&j| j < self.nodes.len())
            .find(|&j| (self.nodes[j] - x).abs() <= tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Vertices on the boundary of the (polygonal) disk.
    pub on_boundary: Vec<bool>,
}

impl TriMesh {
    /// Structured triangulation of `[-1,1]^2` with `divisions` cells per side,
    /// mapped onto the unit disk and rotated so that the reference `e1` axis
    /// points along `rho`. The line `x1 = 0` of the square becomes the
    /// diameter orthogonal to `rho`, which is therefore resolved by edges.
    pub fn disk(divisions: usize, rho: [f64; 2]) -> Result<TriMesh> {
        if divisions < 2 || divisions % 2 != 0 {
            return Err(Error::arg("disk mesh needs an even number of divisions >= 2"));
        }
        let rn = (rho[0] * rho[0] + rho[1] * rho[1]).sqrt();
        if (rn - 1.0).abs() > 1e-9 {
            return Err(Error::arg("normal must be a unit vector"));
        }
        let q = crate::linalg::rotation_to(rho);
        let n = divisions;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        let mut on_boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // integer-centred coordinates keep the symmetry axes exact
                let s = (2 * i) as f64 / n as f64 - 1.0;
                let t = (2 * j) as f64 / n as f64 - 1.0;
                let p = [s * (1.0 - 0.5 * t * t).sqrt(), t * (1.0 - 0.5 * s * s).sqrt()];
                let r = q.mul_vec(&p);
                vertices.push([r[0], r[1]]);
                on_boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                // diagonals alternate by quadrant so the pattern is symmetric about both axes
                let left = 2 * i < n;
                let low = 2 * j < n;
                if left == low {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Ok(TriMesh { vertices, triangles, on_boundary })
    }

    /// Apply the linear map `x -> R x` to every vertex.
    pub fn mapped(&self, r: &Matrix) -> TriMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let w = r.mul_vec(v);
                [w[0], w[1]]
            })
            .collect();
        TriMesh { vertices, triangles: self.triangles.clone(), on_boundary: self.on_boundary.clone() }
    }

    /// Red refinement: every triangle splits into four through edge midpoints.
    /// New boundary vertices are not projected, so the refined spaces are nested.
    pub fn refine(&self) -> TriMesh {
        self.refine_with_parents().0
    }

    /// [`TriMesh::refine`] plus, for every vertex of the refined mesh, the
    /// two coarse vertices it is the midpoint of (`(i, i)` for kept vertices).
    pub fn refine_with_parents(&self) -> (TriMesh, Vec<(usize, usize)>) {
        use std::collections::BTreeMap;
        let mut parents: Vec<(usize, usize)> = (0..self.vertices.len()).map(|i| (i, i)).collect();
        let mut vertices = self.vertices.clone();
        let mut on_boundary = self.on_boundary.clone();
        let edge_count = self.edge_triangle_counts();
        let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (p, q) = (t[k], t[(k + 1) % 3]);
                let key = (p.min(q), p.max(q));
                m[k] = *mids.entry(key).or_insert_with(|| {
                    let a = self.vertices[p];
                    let b = self.vertices[q];
                    vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    on_boundary.push(edge_count[&key] == 1);
                    parents.push(key);
                    vertices.len() - 1
                });
            }
            triangles.push([t[0], m[0], m[2]]);
            triangles.push([m[0], t[1], m[1]]);
            triangles.push([m[2], m[1], t[2]]);
            triangles.push([m[0], m[1], m[2]]);
        }
        (TriMesh { vertices, triangles, on_boundary }, parents)
    }

    fn edge_triangle_counts(&self) -> std::collections::BTreeMap<(usize, usize), usize> {
        let mut counts = std::collections::BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (p, q) = (t[k], t[(k + 1) % 3]);
                *counts.entry((p.min(q), p.max(q))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Boundary edges as vertex pairs.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        self.edge_triangle_counts()
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|((p, q), _)| [p, q])
            .collect()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        quadrature::triangle_area(self.corners(t))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let p = self.corners(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    /// Gradients of the three barycentric hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let p = self.corners(t);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut g = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            g[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        g
    }

    /// Gradient (as an `M x 2` matrix) of the P1 field with nodal values
    /// `values[vertex][component]` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[Vec<f64>]) -> Matrix {
        let g = self.hat_gradients(t);
        let tri = self.triangles[t];
        let m = values[tri[0]].len();
        Matrix::from_fn(m, 2, |i, j| (0..3).map(|k| values[tri[k]][i] * g[k][j]).sum())
    }
}

impl Mesh {
    pub fn interval(a: f64, b: f64, cells: usize) -> Result<Mesh> {
        Ok(Mesh::Interval(IntervalMesh::uniform(a, b, cells)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Mesh::Interval(_) => 1,
            Mesh::Planar(_) => 2,
        }
    }

    pub fn n_cells(&self) -> usize {
        match self {
            Mesh::Interval(m) => m.cells(),
            Mesh::Planar(m) => m.triangles.len(),
        }
    }

    pub fn as_interval(&self) -> Option<&IntervalMesh> {
        match self {
            Mesh::Interval(m) => Some(m),
            Mesh::Planar(_) => None,
        }
    }

    pub fn as_planar(&self) -> Option<&TriMesh> {
        match self {
            Mesh::Planar(m) => Some(m),
            Mesh::Interval(_) => None,
        }
    }

    pub fn cell_measure(&self, i: usize) -> f64 {
        match self {
            Mesh::Interval(m) => {
                let (x0, x1) = m.cell(i);
                x1 - x0
            }
            Mesh::Planar(m) => m.area(i),
        }
    }

    pub fn cell_centroid(&self, i: usize) -> Vec<f64> {
        match self {
            Mesh::Interval(m) => {
                let (x0, x1) = m.cell(i);
                vec![0.5 * (x0 + x1)]
            }
            Mesh::Planar(m) => m.centroid(i).to_vec(),
        }
    }

    /// Integral of `f` over cell `i` by a degree-five rule.
    pub fn integrate_cell(&self, i: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        match self {
            Mesh::Interval(m) => {
                let (x0, x1) = m.cell(i);
                quadrature::integrate_interval(x0, x1, |x| f(&[x]))
            }
            Mesh::Planar(m) => quadrature::integrate_triangle(m.corners(i), |x| f(&x)),
        }
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.cell_measure(i)).sum()
    }

    /// Whether `x` lies in the closed domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Mesh::Interval(m) => {
                x.len() == 1 && x[0] >= m.a() - GEOM_TOL && x[0] <= m.b() + GEOM_TOL
            }
            Mesh::Planar(_) => x.len() == 2 && (x[0] * x[0] + x[1] * x[1]).sqrt() <= 1.0 + 1e-9,
        }
    }

    pub fn is_boundary_point(&self, x: &[f64]) -> bool {
        match self {
            Mesh::Interval(m) => {
                let scale = (m.b() - m.a()).abs().max(1.0);
                (x[0] - m.a()).abs() <= POINT_TOL * scale || (x[0] - m.b()).abs() <= POINT_TOL * scale
            }
            Mesh::Planar(m) => m
                .vertices
                .iter()
                .zip(&m.on_boundary)
                .any(|(v, &b)| b && (v[0] - x[0]).abs() <= 1e-12 && (v[1] - x[1]).abs() <= 1e-12),
        }
    }

    /// Outward unit normal at a boundary point: `-1`/`+1` on an interval,
    /// the radial direction on the disk.
    pub fn outward_normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.is_boundary_point(x) {
            return None;
        }
        match self {
            Mesh::Interval(m) => {
                Some(vec![if (x[0] - m.a()).abs() < (x[0] - m.b()).abs() { -1.0 } else { 1.0 }])
            }
            Mesh::Planar(_) => {
                let r = crate::linalg::norm(x);
                Some(vec![x[0] / r, x[1] / r])
            }
        }
    }

    /// Boundary points of an interval mesh; boundary vertices of a planar mesh.
    pub fn boundary_points(&self) -> Vec<Vec<f64>> {
        match self {
            Mesh::Interval(m) => vec![vec![m.a()], vec![m.b()]],
            Mesh::Planar(m) => m
                .vertices
                .iter()
                .zip(&m.on_boundary)
                .filter(|(_, &b)| b)
                .map(|(v, _)| v.to_vec())
                .collect(),
        }
    }

    /// Two meshes discretize the same domain.
    pub fn same_domain(&self, other: &Mesh) -> bool {
        match (self, other) {
            (Mesh::Interval(p), Mesh::Interval(q)) => {
                (p.a() - q.a()).abs() <= 1e-12 && (p.b() - q.b()).abs() <= 1e-12
            }
            (Mesh::Planar(_), Mesh::Planar(_)) => true,
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Mesh::Interval(m) => format!("interval [{}, {}] with {} cells", m.a(), m.b(), m.cells()),
            Mesh::Planar(m) => format!("disk with {} triangles", m.triangles.len()),
        }
    }
}
