//! The one-dimensional toy problem on `[0,1]` with weight `w(x) = (x−1)²+ε`:
//! `I(u) = ∫ w|u'| + u(0)² + (u(1)−1)²` and its two extensions to `BV`.

use serde::Serialize;

use crate::bv::BVField;
use crate::error::{Error, Result};
use crate::mesh::{IntervalMesh, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ToyFunctional {
    /// `I` on `W^{1,1}`; fields with jumps are rejected.
    I,
    /// `∫ w d|Du| + u(0+)² + (u(1−)−1)²`.
    I1,
    /// `∫ w d|Du| + (1+ε)|u(0+)−β₀| + β₀² + ε|β₁−u(1−)| + (β₁−1)²`.
    I2 { beta0: f64, beta1: f64 },
}

fn weight(x: f64, eps: f64) -> f64 {
    (x - 1.0) * (x - 1.0) + eps
}

/// `∫_{x0}^{x1} w`.
fn weight_integral(x0: f64, x1: f64, eps: f64) -> f64 {
    ((x1 - 1.0).powi(3) - (x0 - 1.0).powi(3)) / 3.0 + eps * (x1 - x0)
}

fn check(u: &BVField, eps: f64) -> Result<&IntervalMesh> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::arg("the toy problem needs 0 < ε < 1"));
    }
    let m = u.mesh.as_interval().ok_or_else(|| Error::arg("the toy problem lives on an interval"))?;
    if (m.a() - 0.0).abs() > 1e-12 || (m.b() - 1.0).abs() > 1e-12 || u.components != 1 {
        return Err(Error::arg("the toy problem needs a scalar field on [0, 1]"));
    }
    Ok(m)
}

/// `∫ w d|Du|` with exact cell integrals.
fn bulk(u: &BVField, m: &IntervalMesh, eps: f64) -> f64 {
    let cells: f64 = (0..m.cells())
        .map(|i| {
            let (x0, x1) = m.cell(i);
            u.cell_gradient(i).to_scalar().abs() * weight_integral(x0, x1, eps)
        })
        .sum();
    let jumps: f64 = u.jumps().iter().map(|(j, h)| weight(m.nodes()[*j], eps) * h[0].abs()).sum();
    cells + jumps
}

pub fn eval_toy(u: &BVField, eps: f64, which: ToyFunctional) -> Result<f64> {
    let m = check(u, eps)?;
    if which == ToyFunctional::I && !u.jumps().is_empty() {
        return Err(Error::arg("I is defined on W^{1,1}; the field jumps"));
    }
    let t = u.trace();
    let (u0, u1) = (t[0].1[0], t[1].1[0]);
    let b = bulk(u, m, eps);
    Ok(match which {
        ToyFunctional::I | ToyFunctional::I1 => b + u0 * u0 + (u1 - 1.0) * (u1 - 1.0),
        ToyFunctional::I2 { beta0, beta1 } => {
            b + (1.0 + eps) * (u0 - beta0).abs() + beta0 * beta0 + eps * (beta1 - u1).abs() + (beta1 - 1.0) * (beta1 - 1.0)
        }
    })
}

/// `u_n = ε/2` on `[0, 1−1/n]`, then linear up to `1−ε/2` at `x = 1`.
pub fn toy_sequence_member(eps: f64, n: usize) -> Result<BVField> {
    if n < 2 {
        return Err(Error::arg("sequence index must be at least 2"));
    }
    let mesh = IntervalMesh::new(vec![0.0, 1.0 - 1.0 / n as f64, 1.0])?;
    BVField::scalar_nodal(Mesh::Interval(mesh), &[eps / 2.0, eps / 2.0, 1.0 - eps / 2.0])
}

/// `inf I = (2ε − ε²)/2`.
pub fn toy_infimum(eps: f64) -> f64 {
    (2.0 * eps - eps * eps) / 2.0
}

#[derive(Clone, Debug, Serialize)]
pub struct ToySequenceRow {
    pub n: usize,
    pub value: f64,
    /// `(1−ε)(1/(3n²)+ε) + ε²/2`.
    pub closed_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyReport {
    pub eps: f64,
    pub sequence: Vec<ToySequenceRow>,
    pub infimum: f64,
    /// `I₁` of the `L¹` limit `u ≡ ε/2`.
    pub i1_of_limit: f64,
    /// `I₂` at `u ≡ ε/2`, `β = (ε/2, 1−ε/2)`.
    pub i2_of_limit: f64,
    /// `I₁(u ≡ ε/2) − lim I(u_n)`, the gap that makes `I₁` fail to be the relaxation.
    pub gap: f64,
    /// `(4ε − ε²)/4`, a competing closed form for the infimum; it differs
    /// from the computed infimum and is reported only.
    pub alternative_closed_form: f64,
}

pub fn toy_report(eps: f64, ns: &[usize]) -> Result<ToyReport> {
    let mut sequence = Vec::with_capacity(ns.len());
    for &n in ns {
        let value = eval_toy(&toy_sequence_member(eps, n)?, eps, ToyFunctional::I)?;
        let nf = n as f64;
        sequence.push(ToySequenceRow { n, value, closed_form: (1.0 - eps) * (1.0 / (3.0 * nf * nf) + eps) + eps * eps / 2.0 });
    }
    let limit = BVField::constant(Mesh::interval(0.0, 1.0, 1)?, vec![eps / 2.0])?;
    let i1_of_limit = eval_toy(&limit, eps, ToyFunctional::I1)?;
    let i2_of_limit = eval_toy(&limit, eps, ToyFunctional::I2 { beta0: eps / 2.0, beta1: 1.0 - eps / 2.0 })?;
    let infimum = toy_infimum(eps);
    Ok(ToyReport {
        eps,
        sequence,
        infimum,
        i1_of_limit,
        i2_of_limit,
        gap: i1_of_limit - infimum,
        alternative_closed_form: (4.0 * eps - eps * eps) / 4.0,
    })
}
