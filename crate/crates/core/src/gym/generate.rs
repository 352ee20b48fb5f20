use std::collections::BTreeMap;

use serde::Serialize;

use super::{dictionary, pairing, sequence_pairing, ConcentrationAtom, GenYoungMeasure, ProbabilityMeasure};
use crate::bv::BVField;
use crate::error::{Error, Result};
use crate::integrands::sphere_samples;
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;
use crate::mesh::{IntervalMesh, Mesh};

#[derive(Clone, Debug, Serialize)]
pub struct GenerationOptions {
    /// Window (spatial resolution) size `h`.
    pub window: f64,
    /// Densities with `|A| > R` count as concentration.
    pub overflow_radius: f64,
    /// Spacing of the matrix grid carrying `ν`.
    pub matrix_spacing: f64,
    /// Concentrated clusters narrower than `atom_fraction · h` become atoms.
    pub atom_fraction: f64,
    /// Number of final sequence members in the convergence check.
    pub tail: usize,
    pub tol: f64,
    /// Extra random sphere directions (beyond `±E_ij`) for `ν^∞`.
    pub sphere_extra: usize,
    pub seed: u64,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            window: 1.0 / 16.0,
            overflow_radius: 100.0,
            matrix_spacing: 1.0 / 64.0,
            atom_fraction: 0.25,
            tail: 3,
            tol: 1e-2,
            sphere_extra: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerationReport {
    pub dictionary: Vec<String>,
    /// `∫ g dv(Y_k)` for the tail members, per dictionary pair.
    pub tail_values: Vec<Vec<f64>>,
    /// Largest successive difference of the tail values.
    pub tail_gap: f64,
    /// `⟨⟨Λ, g ⊗ v⟩⟩` per dictionary pair.
    pub gym_values: Vec<f64>,
    /// `max |⟨⟨Λ⟩⟩ − ∫ g dv(Y_K)|` at the last member.
    pub resolution_gap: f64,
}

/// Empirical generalized Young measure of a sequence of derivative measures
/// on one interval.
///
/// The last member is read through windows of size `h`: densities with
/// `|A| ≤ R` are binned into `ν`, larger densities and atoms are concentration.
/// Concentrated pieces are grouped into contiguous clusters; a cluster
/// narrower than `atom_fraction · h` becomes an atom of `λ` (placed on a
/// window node inside the cluster when there is one, at its barycenter
/// otherwise), wider clusters are spread as `λ` density. Convergence is
/// checked on the twelve-pair dictionary over the last `tail` members.
pub fn generate(sequence: &[DiscreteMeasure], opts: &GenerationOptions) -> Result<(GenYoungMeasure, GenerationReport)> {
    let last = sequence.last().ok_or_else(|| Error::arg("empty sequence"))?;
    let Mesh::Interval(fine0) = &last.mesh else {
        return Err(Error::arg("generation is implemented for interval meshes"));
    };
    let (a, b) = (fine0.a(), fine0.b());
    for y in sequence {
        if !y.mesh.same_domain(&last.mesh) || y.shape() != last.shape() {
            return Err(Error::MismatchedDomains("sequence members on different domains".into()));
        }
    }
    if !(opts.window > 0.0 && opts.overflow_radius > 0.0 && opts.matrix_spacing > 0.0 && opts.tol > 0.0) {
        return Err(Error::arg("window, overflow radius, grid spacing and tolerance must be positive"));
    }
    let (rows, cols) = last.shape();
    let n_win = ((b - a) / opts.window).round().max(1.0) as usize;
    let windows = IntervalMesh::uniform(a, b, n_win)?;
    let sphere = sphere_samples(rows, cols, opts.sphere_extra, opts.seed);

    let mut hist: Vec<BTreeMap<Vec<i64>, f64>> = vec![BTreeMap::new(); n_win];
    let mut pieces: Vec<Piece> = Vec::new();
    let zero_key = vec![0i64; rows * cols];
    for i in 0..fine0.cells() {
        let (x0, x1) = fine0.cell(i);
        let d = last.density[i];
        let big = d.norm() > opts.overflow_radius;
        for w in overlapping(&windows, x0, x1) {
            let (w0, w1) = windows.cell(w);
            let (lo, hi) = (x0.max(w0), x1.min(w1));
            let len = hi - lo;
            if len <= 0.0 {
                continue;
            }
            let frac = len / (w1 - w0);
            if big {
                *hist[w].entry(zero_key.clone()).or_default() += frac;
                pieces.push(Piece { lo, hi, mass: d.norm() * len, direction: d.scale(1.0 / d.norm()) });
            } else {
                *hist[w].entry(bin(&d, opts.matrix_spacing)).or_default() += frac;
            }
        }
    }
    for at in &last.atoms {
        let x = at.location[0];
        pieces.push(Piece { lo: x, hi: x, mass: at.mass, direction: at.direction });
    }
    pieces.sort_by(|p, q| p.lo.total_cmp(&q.lo).then(p.hi.total_cmp(&q.hi)));

    let nu = hist
        .into_iter()
        .map(|h| {
            let entries = h.into_iter().map(|(k, w)| (unbin(&k, rows, cols, opts.matrix_spacing), w)).collect();
            ProbabilityMeasure::from_weights(entries)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lambda_density = vec![0.0; n_win];
    let mut cell_dirs: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_win];
    let mut atoms = Vec::new();
    let touch = 1e-14 * (b - a).abs().max(1.0);
    let mut start = 0;
    while start < pieces.len() {
        let mut end = start + 1;
        let mut hi = pieces[start].hi;
        while end < pieces.len() && pieces[end].lo <= hi + touch {
            hi = hi.max(pieces[end].hi);
            end += 1;
        }
        let cluster = &pieces[start..end];
        let lo = cluster[0].lo;
        let mass: f64 = cluster.iter().map(|p| p.mass).sum();
        if hi - lo <= opts.atom_fraction * opts.window {
            let bary = cluster.iter().map(|p| p.mass * 0.5 * (p.lo + p.hi)).sum::<f64>() / mass;
            let node = windows.nodes().iter().copied().find(|&x| x >= lo - touch && x <= hi + touch);
            let loc = node.unwrap_or(bary);
            atoms.push(ConcentrationAtom { location: vec![loc], mass, nu_inf: direction_histogram(cluster, &sphere)? });
        } else {
            for p in cluster {
                if p.hi == p.lo {
                    let w = windows.locate(p.lo).expect("inside the interval");
                    lambda_density[w] += p.mass / windows_len(&windows, w);
                    *cell_dirs[w].entry(nearest(&sphere, &p.direction)).or_default() += p.mass;
                    continue;
                }
                for w in overlapping(&windows, p.lo, p.hi) {
                    let (w0, w1) = windows.cell(w);
                    let len = p.hi.min(w1) - p.lo.max(w0);
                    if len > 0.0 {
                        let m = p.mass * len / (p.hi - p.lo);
                        lambda_density[w] += m / (w1 - w0);
                        *cell_dirs[w].entry(nearest(&sphere, &p.direction)).or_default() += m;
                    }
                }
            }
        }
        start = end;
    }
    let nu_inf_cells = cell_dirs
        .into_iter()
        .map(|h| {
            if h.is_empty() {
                Ok(None)
            } else {
                ProbabilityMeasure::from_weights(h.into_iter().map(|(k, w)| (sphere[k], w)).collect()).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    for (d, s) in lambda_density.iter_mut().zip(&nu_inf_cells) {
        if s.is_none() {
            *d = 0.0;
        }
    }
    let gym = GenYoungMeasure::new(Mesh::Interval(windows), nu, lambda_density, nu_inf_cells, atoms)?;

    let dict = dictionary(rows, cols);
    let tail = &sequence[sequence.len().saturating_sub(opts.tail.max(1))..];
    let tail_values: Vec<Vec<f64>> = tail
        .iter()
        .map(|y| dict.iter().map(|p| sequence_pairing(y, &|x| (p.g)(x), &p.v)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let tail_gap = tail_values
        .windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    let gym_values: Vec<f64> = dict.iter().map(|p| pairing(&gym, &|x| (p.g)(x), &p.v)).collect::<Result<_>>()?;
    let last_values = tail_values.last().expect("nonempty tail");
    let resolution_gap = gym_values.iter().zip(last_values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    if tail_gap > opts.tol {
        let worst = tail_values
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(p, q)| (p - q).abs()).enumerate().collect::<Vec<_>>())
            .max_by(|p, q| p.1.total_cmp(&q.1))
            .map(|(j, _)| dict[j].name.clone())
            .unwrap_or_default();
        return Err(Error::NotGenerating(format!(
            "tail gap {tail_gap:.3e} on `{worst}` exceeds tolerance {:.1e}",
            opts.tol
        )));
    }
    let report = GenerationReport {
        dictionary: dict.iter().map(|p| p.name.clone()).collect(),
        tail_values,
        tail_gap,
        gym_values,
        resolution_gap,
    };
    Ok((gym, report))
}

/// Generate from a sequence of fields and attach the reconstructed limit field.
pub fn generate_from_fields(fields: &[BVField], opts: &GenerationOptions) -> Result<(GenYoungMeasure, GenerationReport)> {
    let derivs: Vec<DiscreteMeasure> = fields.iter().map(BVField::derivative).collect();
    let (gym, report) = generate(&derivs, opts)?;
    let last = fields.last().expect("generate rejects empty sequences");
    let u = reconstruct_limit_field(&gym, last)?;
    Ok((gym.with_field(u)?, report))
}

/// Limit field on the window mesh of `gym`: the primitive of the interior
/// first moment (interior atoms become jumps at the nearest window node),
/// shifted by the constant closest in `L¹` to `reference`.
pub fn reconstruct_limit_field(gym: &GenYoungMeasure, reference: &BVField) -> Result<BVField> {
    let Mesh::Interval(m) = &gym.mesh else {
        return Err(Error::arg("limit fields are reconstructed on intervals"));
    };
    let alpha = gym.first_moment();
    let comps = gym.rows;
    let mut jumps = vec![vec![0.0; comps]; m.nodes().len()];
    for at in alpha.interior_atoms() {
        let x = at.location[0];
        let j = (0..m.nodes().len())
            .min_by(|&p, &q| (m.nodes()[p] - x).abs().total_cmp(&(m.nodes()[q] - x).abs()))
            .expect("nonempty mesh");
        let v = at.value();
        for (c, jc) in jumps[j].iter_mut().enumerate() {
            *jc += v[(c, 0)];
        }
    }
    let mut left = Vec::with_capacity(m.cells());
    let mut right = Vec::with_capacity(m.cells());
    let mut cur = vec![0.0; comps];
    for i in 0..m.cells() {
        let (x0, x1) = m.cell(i);
        if i > 0 {
            for c in 0..comps {
                cur[c] += jumps[i][c];
            }
        }
        let l = cur.clone();
        for c in 0..comps {
            cur[c] += alpha.density[i][(c, 0)] * (x1 - x0);
        }
        left.push(l);
        right.push(cur.clone());
    }
    let base = BVField::broken(m.clone(), left, right)?;
    let Mesh::Interval(rm) = &reference.mesh else {
        return Err(Error::arg("reference field must live on an interval"));
    };
    let common = m.merged(rm)?;
    let mut shift = vec![0.0; comps];
    for (c, s) in shift.iter_mut().enumerate() {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for i in 0..common.cells() {
            let (x0, x1) = common.cell(i);
            for (x, w) in crate::quadrature::gauss3(x0, x1) {
                samples.push((reference.eval(&[x])?[c] - base.eval(&[x])?[c], w));
            }
        }
        *s = weighted_median(&mut samples);
    }
    let Mesh::Interval(bm) = &base.mesh else { unreachable!() };
    let crate::bv::FieldValues::Broken { left, right } = &base.values else { unreachable!() };
    let sh = |v: &Vec<f64>| v.iter().zip(&shift).map(|(p, q)| p + q).collect::<Vec<f64>>();
    BVField::broken(bm.clone(), left.iter().map(sh).collect(), right.iter().map(sh).collect())
}

fn weighted_median(samples: &mut [(f64, f64)]) -> f64 {
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    for s in samples.iter() {
        acc += s.1;
        if acc >= 0.5 * total {
            return s.0;
        }
    }
    samples.last().map_or(0.0, |s| s.0)
}

struct Piece {
    lo: f64,
    hi: f64,
    mass: f64,
    direction: Matrix,
}

fn windows_len(w: &IntervalMesh, i: usize) -> f64 {
    let (x0, x1) = w.cell(i);
    x1 - x0
}

fn overlapping(w: &IntervalMesh, x0: f64, x1: f64) -> std::ops::RangeInclusive<usize> {
    let first = w.locate(x0).unwrap_or(0);
    let last = w.locate(x1).unwrap_or(w.cells() - 1);
    first..=last
}

fn bin(a: &Matrix, spacing: f64) -> Vec<i64> {
    a.as_slice().iter().map(|x| (x / spacing).round() as i64).collect()
}

fn unbin(k: &[i64], rows: usize, cols: usize, spacing: f64) -> Matrix {
    let v: Vec<f64> = k.iter().map(|&i| i as f64 * spacing).collect();
    Matrix::from_row_slice(rows, cols, &v)
}

fn nearest(sphere: &[Matrix], d: &Matrix) -> usize {
    (0..sphere.len())
        .max_by(|&i, &j| sphere[i].dot(d).total_cmp(&sphere[j].dot(d)).then(j.cmp(&i)))
        .expect("nonempty sphere grid")
}

fn direction_histogram(cluster: &[Piece], sphere: &[Matrix]) -> Result<ProbabilityMeasure> {
    let mut h: BTreeMap<usize, f64> = BTreeMap::new();
    for p in cluster {
        *h.entry(nearest(sphere, &p.direction)).or_default() += p.mass;
    }
    ProbabilityMeasure::from_weights(h.into_iter().map(|(k, w)| (sphere[k], w)).collect())
}
