use proptest::prelude::*;

use bvrelax::bv::BVField;
use bvrelax::gym::{dictionary_pairings, from_diperna_majda, to_diperna_majda, ConcentrationAtom, GenYoungMeasure, ProbabilityMeasure};
use bvrelax::integrands::{convex_envelope_1d, Integrand};
use bvrelax::linalg::Matrix;
use bvrelax::mesh::{IntervalMesh, Mesh};
use bvrelax::relax::{eval_fhat, eval_toy, tilde_transform, toy_infimum, ProblemSpec, ToyFunctional};
use bvrelax::soucek::BoundaryValues;

fn nodes_and_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| (prop::collection::vec(0.01f64..1.0, n), prop::collection::vec(-2.0f64..2.0, n + 1))).prop_map(|(w, v)| {
        let total: f64 = w.iter().sum();
        let mut x = vec![0.0];
        let mut acc = 0.0;
        for wi in &w {
            acc += wi / total;
            x.push(acc);
        }
        *x.last_mut().unwrap() = 1.0;
        (x, v)
    })
}

fn two_point(t: f64) -> ProbabilityMeasure {
    ProbabilityMeasure::from_weights(vec![(Matrix::scalar(1.0), t), (Matrix::scalar(-1.0), 1.0 - t)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toy_functional_is_bounded_by_its_infimum((x, v) in nodes_and_values(), eps in 0.05f64..0.95) {
        let u = BVField::scalar_nodal(Mesh::Interval(IntervalMesh::new(x).unwrap()), &v).unwrap();
        prop_assert!(eval_toy(&u, eps, ToyFunctional::I).unwrap() >= toy_infimum(eps) - 1e-12);
    }

    #[test]
    fn envelope_is_a_convex_minorant(a in -2.0f64..2.0, b in 0.1f64..3.0, c in -1.0f64..1.0) {
        let v = Integrand::new("wiggle", 1, 1, move |m| {
            let t = m.to_scalar();
            (t - a).abs().min((t + b).abs() + c) + 0.3 * (3.0 * t).sin()
        });
        let grid: Vec<f64> = (0..401).map(|k| -5.0 + k as f64 / 40.0).collect();
        let (env, _) = convex_envelope_1d(&v, &grid).unwrap();
        let e: Vec<f64> = grid.iter().map(|&t| env.eval(&Matrix::scalar(t))).collect();
        for (k, &t) in grid.iter().enumerate() {
            prop_assert!(e[k] <= v.eval(&Matrix::scalar(t)) + 1e-12);
        }
        for w in e.windows(3) {
            prop_assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-9);
        }
    }

    #[test]
    fn diperna_majda_round_trip_keeps_pairings(
        a in prop::collection::vec(-3.0f64..3.0, 4),
        w in 0.05f64..0.95,
        mass in 0.0f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let nu = a.iter().map(|&s| ProbabilityMeasure::from_weights(vec![(Matrix::scalar(s), w), (Matrix::scalar(-s), 1.0 - w)]).unwrap()).collect();
        let atoms = vec![ConcentrationAtom { location: vec![1.0], mass, nu_inf: two_point(t) }];
        let g = GenYoungMeasure::new(mesh, nu, vec![0.0; 4], vec![None; 4], atoms).unwrap();
        let back = from_diperna_majda(&to_diperna_majda(&g).unwrap()).unwrap();
        for (p, q) in dictionary_pairings(&g).iter().zip(dictionary_pairings(&back)) {
            prop_assert!((p - q).abs() <= 1e-10);
        }
    }

    #[test]
    fn tilde_never_increases_fhat(eps in 0.05f64..0.95, c in -0.5f64..1.5, m0 in 0.0f64..1.0, m1 in 0.0f64..1.0, t0 in 0.0f64..1.0, t1 in 0.0f64..1.0) {
        let spec = ProblemSpec::toy(eps, 10.0).unwrap();
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let u = BVField::constant(mesh.clone(), vec![c]).unwrap();
        let mut g = GenYoungMeasure::trivial(mesh, 1, 1);
        g.atoms.push(ConcentrationAtom { location: vec![0.0], mass: m0, nu_inf: two_point(t0) });
        g.atoms.push(ConcentrationAtom { location: vec![1.0], mass: m1, nu_inf: two_point(t1) });
        let g = g.with_field(u).unwrap();
        // outer trace: β(0) = c − m0(2t0−1), β(1) = c + m1(2t1−1)
        let beta = BoundaryValues {
            density: vec![(vec![0.0], vec![c - m0 * (2.0 * t0 - 1.0)]), (vec![1.0], vec![c + m1 * (2.0 * t1 - 1.0)])],
            atoms: vec![],
        };
        let before = eval_fhat(&g, &beta, &spec).unwrap();
        let (gt, bt) = tilde_transform(&g, &beta, &spec).unwrap();
        let after = eval_fhat(&gt, &bt, &spec).unwrap();
        prop_assert!(after <= before + 1e-12);
        prop_assert!(after >= toy_infimum(eps) - 1e-12);
    }
}
