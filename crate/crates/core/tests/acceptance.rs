//! Acceptance suite: one pass/fail line per criterion, each with its pinned tolerance.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bvrelax::boundary::{qslb_infimum, rotation_equivariance_check, QslbOptions, Verdict};
use bvrelax::bv::BVField;
use bvrelax::gym::{
    check_characterization, combine_orthogonal, dictionary, dictionary_pairings, from_diperna_majda, generate, generate_from_fields, gym_traces,
    pairing, split, to_diperna_majda, CharacterizationOptions, ConcentrationAtom, GenYoungMeasure, GenerationOptions, ProbabilityMeasure,
};
use bvrelax::integrands::{convex_envelope_1d, lookup};
use bvrelax::linalg::{rotation, Matrix};
use bvrelax::measure::DiscreteMeasure;
use bvrelax::mesh::{IntervalMesh, Mesh, TriMesh};
use bvrelax::relax::{eval_toy, relax_minimize, toy_infimum, toy_report, toy_sequence_member, ProblemSpec, RelaxOptions, ToyFunctional};
use bvrelax::soucek::{default_test_family, outer_trace, SoucekPair};

fn verdict(n: usize, what: &str, ok: bool, detail: String) {
    println!("criterion {n:>2} [{}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {what}: {detail}");
}

#[test]
fn criterion_01_toy_infimum_from_relax() {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for eps in [0.1, 0.3, 0.5] {
        let spec = ProblemSpec::toy(eps, 10.0).unwrap();
        let t = Instant::now();
        let r = relax_minimize(&spec, &RelaxOptions::default()).unwrap();
        slowest = slowest.max(t.elapsed());
        let oracle = (2.0 * eps - eps * eps) / 2.0;
        worst = worst.max((r.inf_direct - oracle).abs());
    }
    verdict(
        1,
        "relax reproduces (2ε−ε²)/2 for ε ∈ {0.1,0.3,0.5}",
        worst <= 5e-3 && slowest < Duration::from_secs(10),
        format!("max error {worst:.3e} (tol 5e-3), slowest run {slowest:.2?} (limit 10 s)"),
    );
}

#[test]
fn criterion_02_explicit_sequence() {
    let mut worst = 0.0f64;
    for eps in [0.1, 0.3, 0.5] {
        for n in [10usize, 100, 1000] {
            let v = eval_toy(&toy_sequence_member(eps, n).unwrap(), eps, ToyFunctional::I).unwrap();
            let nf = n as f64;
            // ∫_{1−1/n}^1 ((x−1)²+ε) dx · (1−ε)n + two boundary squares (ε/2)²
            let oracle = (1.0 - eps) * (1.0 / (3.0 * nf * nf) + eps) + eps * eps / 2.0;
            worst = worst.max((v - oracle).abs());
        }
    }
    verdict(2, "I(u_n) matches the closed form for n ∈ {10,100,1000}", worst <= 1e-9, format!("max error {worst:.3e} (tol 1e-9)"));
}

#[test]
fn criterion_03_lower_semicontinuity_fails_for_i1() {
    let eps = 0.5;
    let limit_of_i1: Vec<f64> = [1000usize, 100_000]
        .iter()
        .map(|&n| eval_toy(&toy_sequence_member(eps, n).unwrap(), eps, ToyFunctional::I1).unwrap())
        .collect();
    let u = BVField::constant(Mesh::interval(0.0, 1.0, 4).unwrap(), vec![eps / 2.0]).unwrap();
    let at_limit = eval_toy(&u, eps, ToyFunctional::I1).unwrap();
    let lim = toy_infimum(eps);
    let gap = at_limit - lim;
    let report = toy_report(eps, &[10]).unwrap();
    let ok = (limit_of_i1[1] - lim).abs() < 1e-9 && lim < at_limit && (gap - 0.25).abs() <= 1e-6 && (report.gap - gap).abs() < 1e-15;
    verdict(
        3,
        "lim I₁(u_n) < I₁(ε/2)",
        ok,
        format!(
            "lim {lim}, I₁(ε/2) = {at_limit}, gap {gap} (0.25 ± 1e-6); competing closed form (4ε−ε²)/4 = {} differs from the oracle by {:.4} (reported only)",
            report.alternative_closed_form,
            report.alternative_closed_form - lim
        ),
    );
}

#[test]
fn criterion_04_relaxation_agreement() {
    let eps = 0.3;
    let spec = ProblemSpec::toy(eps, 10.0).unwrap();
    let r = relax_minimize(&spec, &RelaxOptions::default()).unwrap();
    let vals = [r.inf_direct, r.min_extended, r.min_gym];
    let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let gen_gap = (r.generated_fhat - r.min_gym).abs();
    verdict(
        4,
        "inf F = inf F̄ = min F̂ and the generated measure attains it",
        spread <= 1e-2 && gen_gap <= 1e-2,
        format!("F {:.6}, F̄ {:.6}, F̂ {:.6}, spread {spread:.2e}; F̂(generated) gap {gen_gap:.2e} (tol 1e-2)", vals[0], vals[1], vals[2]),
    );
}

#[test]
fn criterion_05_one_dimensional_qslb_is_sign_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = QslbOptions::default();
    let mut mismatches = 0;
    for _ in 0..50 {
        let (p, q): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rho = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let v = lookup(&format!("piecewise_linear_1d:{p},{q}")).unwrap().recession.unwrap();
        let got = qslb_infimum(&v, &[rho], &opts).unwrap().verdict;
        let expected = if p >= 0.0 && q >= 0.0 { Verdict::Qslb } else { Verdict::NotQslb };
        if got != expected {
            mismatches += 1;
        }
    }
    verdict(5, "1D QSLB verdict equals v∞ ≥ 0 on 50 random integrands", mismatches == 0, format!("{mismatches} mismatches (allowed 0)"));
}

#[test]
fn criterion_06_two_dimensional_boundary_tests() {
    let opts = QslbOptions { levels: 3, budget: 10_000, ..QslbOptions::default() };
    let t = Instant::now();
    let abs = lookup("abs:1x2").unwrap().recession.unwrap();
    let a = qslb_infimum(&abs, &[1.0, 0.0], &opts).unwrap();
    // v∞(A) = −A·ϱ with ϱ = e₁ gives v∞(1 ⊗ ϱ) = −1
    let lin = lookup("linear_form:-1,0").unwrap().recession.unwrap();
    let l = qslb_infimum(&lin, &[1.0, 0.0], &opts).unwrap();
    let elapsed = t.elapsed();
    verdict(
        6,
        "|·| is QSLB, the normal linear form is not",
        a.verdict == Verdict::Qslb && l.verdict == Verdict::NotQslb && l.inf_est <= -0.1 && elapsed < Duration::from_secs(60),
        format!("abs: {:?}; linear: {:?} with inf {:.4} (≤ −0.1); {elapsed:.2?} (limit 60 s)", a.verdict, l.verdict, l.inf_est),
    );
}

#[test]
fn criterion_07_rotation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = lookup("linear_form:1,0.5").unwrap().recession.unwrap();
    let opts = QslbOptions { levels: 2, budget: 2000, restarts: 6, tol: 1e-4, seed: 0 };
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let rho1 = [phi.cos(), phi.sin()];
        let r2 = rotation(theta).mul_vec(&rho1);
        let g = rotation_equivariance_check(&v, rho1, [r2[0], r2[1]], &opts).unwrap();
        worst = worst.max(g.gap);
    }
    verdict(7, "QSLB infima are rotation equivariant", worst <= 1e-6, format!("max gap {worst:.3e} over 5 rotations (tol 1e-6)"));
}

fn random_gym(rng: &mut ChaCha8Rng) -> GenYoungMeasure {
    let cells = rng.random_range(2..8);
    let mesh = Mesh::interval(0.0, 1.0, cells).unwrap();
    let mut nu = Vec::new();
    let mut lam = Vec::new();
    let mut nu_inf = Vec::new();
    for _ in 0..cells {
        let w: f64 = rng.random_range(0.05..0.95);
        nu.push(
            ProbabilityMeasure::from_weights(vec![
                (Matrix::scalar(rng.random_range(-3.0..3.0)), w),
                (Matrix::scalar(rng.random_range(-3.0..3.0)), 1.0 - w),
            ])
            .unwrap(),
        );
        if rng.random_bool(0.5) {
            lam.push(rng.random_range(0.0..2.0));
            let t: f64 = rng.random_range(0.0..1.0);
            nu_inf.push(Some(ProbabilityMeasure::from_weights(vec![(Matrix::scalar(1.0), t), (Matrix::scalar(-1.0), 1.0 - t)]).unwrap()));
        } else {
            lam.push(0.0);
            nu_inf.push(None);
        }
    }
    let mut atoms = Vec::new();
    for x in [0.0, rng.random_range(0.1..0.9), 1.0] {
        if rng.random_bool(0.7) {
            let t: f64 = rng.random_range(0.0..1.0);
            atoms.push(ConcentrationAtom {
                location: vec![x],
                mass: rng.random_range(0.1..2.0),
                nu_inf: ProbabilityMeasure::from_weights(vec![(Matrix::scalar(1.0), t), (Matrix::scalar(-1.0), 1.0 - t)]).unwrap(),
            });
        }
    }
    GenYoungMeasure::new(mesh, nu, lam, nu_inf, atoms).unwrap()
}

/// `[0,1]` mesh with `n` sawtooth cells on `[0, 1/2]`, a flat middle cell
/// and a ramp cell `[1−1/n, 1]`.
fn mixed_sequence(n: usize) -> (Mesh, Vec<f64>, Vec<f64>) {
    let mut nodes: Vec<f64> = (0..=n).map(|k| 0.5 * k as f64 / n as f64).collect();
    nodes.push(1.0 - 1.0 / n as f64);
    nodes.push(1.0);
    let m = IntervalMesh::new(nodes).unwrap();
    let cells = m.cells();
    let mut saw = vec![0.0; cells];
    let mut ramp = vec![0.0; cells];
    for (i, s) in saw.iter_mut().enumerate().take(n) {
        *s = if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    ramp[cells - 1] = 0.7 * n as f64;
    (Mesh::Interval(m), saw, ramp)
}

#[test]
fn criterion_08_split_identity_and_orthogonal_additivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dict = dictionary(1, 1);
    let mut split_err = 0.0f64;
    for _ in 0..20 {
        let g = random_gym(&mut rng);
        let (gi, gb) = split(&g);
        for p in &dict {
            let lhs = pairing(&g, &|x| (p.g)(x), &p.v).unwrap();
            let v0 = p.v.eval(&Matrix::zeros(1, 1));
            let correction: f64 = (0..g.mesh.n_cells()).map(|i| g.mesh.integrate_cell(i, &|x| (p.g)(x) * v0)).sum();
            let rhs = pairing(&gi, &|x| (p.g)(x), &p.v).unwrap() + pairing(&gb, &|x| (p.g)(x), &p.v).unwrap() - correction;
            split_err = split_err.max((lhs - rhs).abs());
        }
    }

    let opts = GenerationOptions::default();
    let seqs: Vec<_> = [256usize, 512, 1024].iter().map(|&n| mixed_sequence(n)).collect();
    let build = |pick: &dyn Fn(&(Mesh, Vec<f64>, Vec<f64>)) -> Vec<f64>| -> Vec<DiscreteMeasure> {
        seqs.iter().map(|s| DiscreteMeasure::scalar(s.0.clone(), pick(s), vec![]).unwrap()).collect()
    };
    let (theta, _) = generate(&build(&|s| s.1.clone()), &opts).unwrap();
    let (psi, _) = generate(&build(&|s| s.2.clone()), &opts).unwrap();
    let (sum, _) = generate(&build(&|s| s.1.iter().zip(&s.2).map(|(a, b)| a + b).collect()), &opts).unwrap();
    let s_set = |x: &[f64]| x[0] > 0.5;
    let t_set = |x: &[f64]| x[0] <= 0.5;
    let combined = combine_orthogonal(&psi, &theta, &s_set, &t_set).unwrap();
    let add_err = dictionary_pairings(&sum)
        .iter()
        .zip(dictionary_pairings(&combined))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    verdict(
        8,
        "split identity and orthogonal additivity",
        split_err <= 1e-12 && add_err <= 1e-3,
        format!("split error {split_err:.2e} on 20 random Λ (tol 1e-12); additivity error {add_err:.2e} over 12 pairs (tol 1e-3)"),
    );
}

#[test]
fn criterion_09_diperna_majda_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let g = random_gym(&mut rng);
        let back = from_diperna_majda(&to_diperna_majda(&g).unwrap()).unwrap();
        for (a, b) in dictionary_pairings(&g).iter().zip(dictionary_pairings(&back)) {
            worst = worst.max((a - b).abs());
        }
    }
    // Y = 2χ_[0,1], Y_n = nY(n·) on [−1,1]: ν = δ₀ and λ = ‖Y‖_{L¹} δ₀ = 2δ₀
    let seq: Vec<DiscreteMeasure> = [1000usize, 2000, 4000]
        .iter()
        .map(|&n| {
            let m = IntervalMesh::new(vec![-1.0, 0.0, 1.0 / n as f64, 1.0]).unwrap();
            DiscreteMeasure::scalar(Mesh::Interval(m), vec![0.0, 2.0 * n as f64, 0.0], vec![]).unwrap()
        })
        .collect();
    let (g, _) = generate(&seq, &GenerationOptions::default()).unwrap();
    let dm = to_diperna_majda(&g).unwrap();
    let at_zero: f64 = dm.sigma_atoms.iter().filter(|(x, _)| x[0].abs() < 1e-9).map(|(_, m)| m).sum();
    let lebesgue: f64 = (0..dm.mesh.n_cells()).map(|i| dm.sigma_density[i] * dm.mesh.cell_measure(i)).sum();
    let point_err = (at_zero - 2.0).abs().max((lebesgue - 2.0).abs());
    verdict(
        9,
        "DiPerna–Majda round trip and point concentration",
        worst <= 1e-10 && point_err <= 1e-2,
        format!("max pairing gap {worst:.2e} (tol 1e-10); σ({{0}}) = {at_zero:.4}, σ-density mass {lebesgue:.4} vs 2 and 2 (tol 1e-2)"),
    );
}

#[test]
fn criterion_10_soucek_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut residual = 0.0f64;
    for _ in 0..20 {
        let cells = rng.random_range(2..10);
        let m = IntervalMesh::uniform(0.0, 1.0, cells).unwrap();
        let left: Vec<Vec<f64>> = (0..cells).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let right: Vec<Vec<f64>> = (0..cells).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let u = BVField::broken(m, left, right).unwrap();
        let du = u.derivative();
        let mut atoms: Vec<(Vec<f64>, Matrix)> = du.atoms.iter().map(|a| (a.location.clone(), a.value())).collect();
        atoms.push((vec![0.0], Matrix::scalar(rng.random_range(-1.0..1.0))));
        atoms.push((vec![1.0], Matrix::scalar(rng.random_range(-1.0..1.0))));
        let alpha = DiscreteMeasure::new(u.mesh.clone(), du.density.clone(), atoms).unwrap();
        residual = residual.max(outer_trace(&SoucekPair::new(u, alpha).unwrap()).unwrap().residual);
    }

    let eps = 0.3;
    let seq: Vec<BVField> = [1000usize, 10_000, 100_000].iter().map(|&n| toy_sequence_member(eps, n).unwrap()).collect();
    let (g, _) = generate_from_fields(&seq, &GenerationOptions::default()).unwrap();
    let outer = gym_traces(&g).unwrap().outer;
    let outer_err = (outer[0].1[0] - eps / 2.0).abs().max((outer[1].1[0] - (1.0 - eps / 2.0)).abs());

    let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
    let u = BVField::constant(mesh.clone(), vec![eps / 2.0]).unwrap();
    let alpha = DiscreteMeasure::new(mesh, vec![Matrix::zeros(1, 1); 8], vec![(vec![1.0], Matrix::scalar(1.0 - eps))]).unwrap();
    let t = outer_trace(&SoucekPair::new(u, alpha).unwrap()).unwrap();
    let inner_exact = t.inner == vec![(vec![0.0], vec![eps / 2.0]), (vec![1.0], vec![eps / 2.0])];
    verdict(
        10,
        "Green residual, toy outer and inner traces",
        residual <= 1e-9 && outer_err <= 1e-2 && inner_exact,
        format!("max residual {residual:.2e} (tol 1e-9); outer trace error {outer_err:.2e} (tol 1e-2); inner trace exact: {inner_exact}"),
    );
}

#[test]
fn criterion_11_characterization() {
    let family = default_test_family(1, 1);
    let opts = CharacterizationOptions::default();
    let mut worst = f64::INFINITY;
    let mut all_pass = true;

    let eps = 0.3;
    let toy: Vec<BVField> = [1000usize, 10_000, 100_000].iter().map(|&n| toy_sequence_member(eps, n).unwrap()).collect();
    let saw: Vec<BVField> = [256usize, 512, 1024]
        .iter()
        .map(|&n| {
            let m = Mesh::interval(0.0, 1.0, n).unwrap();
            let v: Vec<f64> = (0..=n).map(|k| if k % 2 == 0 { 0.0 } else { 1.0 / n as f64 }).collect();
            BVField::scalar_nodal(m, &v).unwrap()
        })
        .collect();
    for seq in [toy, saw] {
        let (g, _) = generate_from_fields(&seq, &GenerationOptions::default()).unwrap();
        let u = g.field.clone().unwrap();
        let r = check_characterization(&g, &u, &family, &opts).unwrap();
        all_pass &= r.pass;
        for c in [&r.finiteness, &r.jensen, &r.singular, &r.boundary] {
            worst = worst.min(c.worst_margin);
        }
    }

    // tangential direction at (1,0): v(A) = −A₁₂ has ∫_{D_ϱ} v(∇φ) = 0 for every φ, so it is QSLB there
    let mesh = Mesh::Planar(TriMesh::disk(4, [1.0, 0.0]).unwrap());
    let u = BVField::constant(mesh.clone(), vec![0.0]).unwrap();
    let mut bad = GenYoungMeasure::trivial(mesh, 1, 2);
    bad.atoms.push(ConcentrationAtom {
        location: vec![1.0, 0.0],
        mass: 1.0,
        nu_inf: ProbabilityMeasure::dirac(Matrix::from_row_slice(1, 2, &[0.0, 1.0])),
    });
    let tangential = vec![lookup("linear_form:0,-1").unwrap()];
    let flagged = !check_characterization(&bad, &u, &tangential, &opts).unwrap().boundary.pass;
    verdict(
        11,
        "gradient measures pass all four conditions, a tangential boundary atom fails the boundary one",
        all_pass && worst >= -1e-6 && flagged,
        format!("generated measures pass: {all_pass}, worst margin {worst:.2e} (≥ −1e-6); violation flagged: {flagged}"),
    );
}

#[test]
fn criterion_12_double_well_envelope() {
    let v = lookup("double_well_1d").unwrap();
    let grid: Vec<f64> = (0..1000).map(|k| -3.0 + 6.0 * k as f64 / 999.0).collect();
    let (env, _) = convex_envelope_1d(&v, &grid).unwrap();
    let worst = grid.iter().map(|&t| (env.eval(&Matrix::scalar(t)) - (t.abs() - 1.0).max(0.0)).abs()).fold(0.0, f64::max);
    verdict(12, "envelope of the double well is max(0, |t|−1)", worst <= 1e-9, format!("max error {worst:.2e} on 1000 points (tol 1e-9)"));
}
