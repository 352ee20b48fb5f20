use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bvrelax::bv::BVField;
use bvrelax::gym::GenYoungMeasure;
use bvrelax::linalg::Matrix;
use bvrelax::measure::DiscreteMeasure;
use bvrelax::mesh::Mesh;
use bvrelax::soucek::SoucekPair;
use serde_json::Value;

fn bvrelax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvrelax")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON record on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn toy_reports_the_infimum() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let plots = dir.path().join("plots");
    let r = json(&bvrelax(&["toy", "--eps", "0.5", "--levels", "8", "--csv", path(&csv), "--emit-plot-data", path(&plots)]));
    assert!((r["inf_direct"].as_f64().unwrap() - 0.375).abs() < 5e-3);
    assert!((r["report"]["gap"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let table = fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("level,cells,direct,extended,gym"));
    assert_eq!(table.lines().count(), 9);
    assert!(fs::read_to_string(plots.join("minimizer.csv")).unwrap().starts_with("x,y"));
}

#[test]
fn qslb_and_jqcb_checks() {
    let r = json(&bvrelax(&["qslb-check", "--integrand", "abs", "--normal", "1,0", "--level", "1", "--budget", "400"]));
    assert_eq!(r["verdict"], "qslb");
    let r = json(&bvrelax(&["qslb-check", "--integrand", "piecewise_linear_1d:1,-0.5", "--normal=-1"]));
    assert_eq!(r["verdict"], "not_qslb");
    assert_eq!(r["inf_est"].as_f64().unwrap(), -0.5);
    let r = json(&bvrelax(&["jqcb-check", "--integrand", "neg_abs", "--normal", "1"]));
    assert_eq!(r["verdict"], "disproved");
    let r = json(&bvrelax(&["jqcb-check", "--integrand", "abs", "--normal", "0,1", "--budget", "100"]));
    assert_eq!(r["verdict"], "not_disproved");
}

#[test]
fn envelope_of_double_well() {
    let r = json(&bvrelax(&["envelope", "--integrand", "double_well_1d", "--lo", "-3", "--hi", "3", "--points", "61"]));
    let t = r["t"].as_array().unwrap();
    let e = r["envelope"].as_array().unwrap();
    for (t, e) in t.iter().zip(e) {
        let t = t.as_f64().unwrap();
        assert!((e.as_f64().unwrap() - (t.abs() - 1.0).max(0.0)).abs() < 1e-9);
    }
}

#[test]
fn errors_have_distinct_messages_and_codes() {
    let out = bvrelax(&["envelope", "--integrand", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown integrand"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[domain]\nkind = \"interval\"\nshape = 3\n").unwrap();
    let out = bvrelax(&["relax", "--config", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));

    let out = bvrelax(&["qslb-check", "--integrand", "abs", "--normal", "x,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed normal"));
}

#[test]
fn relax_from_config_and_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    fs::write(
        &cfg,
        r#"
[domain]
kind = "interval"
a = 0.0
b = 1.0

[f]
integrand = "toy_weighted_abs:0.3"

[g]
left = "quadratic_target:0"
right = "quadratic_target:1"

[bounds]
C = 10.0

[solver]
levels = 4
"#,
    )
    .unwrap();
    let csv = dir.path().join("conv.csv");
    let r = json(&bvrelax(&["relax", "--config", path(&cfg), "--levels", "2", "--csv", path(&csv)]));
    assert!((r["inf_direct"].as_f64().unwrap() - 0.255).abs() < 5e-3);
    assert!((r["min_gym"].as_f64().unwrap() - 0.255).abs() < 1e-6);
    // the config file wins over --levels
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 5);

    let refused = dir.path().join("linear.toml");
    fs::write(
        &refused,
        "[domain]\nkind = \"interval\"\n[f]\nintegrand = \"abs\"\n[g]\nleft = \"zero\"\nright = \"linear:1\"\n[bounds]\nC = 1.0\n",
    )
    .unwrap();
    let out = bvrelax(&["relax", "--config", path(&refused)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refused"));

    let zero = dir.path().join("zero.toml");
    fs::write(&zero, "[domain]\nkind = \"interval\"\n[f]\nintegrand = \"abs\"\n[g]\nleft = \"zero\"\nright = \"zero\"\n[bounds]\nC = 0.0\n").unwrap();
    let out = bvrelax(&["relax", "--config", path(&zero)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn relax_on_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("disk.toml");
    fs::write(
        &cfg,
        "[domain]\nkind = \"disk\"\n[disk]\neps = 0.1\ngamma0 = [3.141592653589793, 0.0]\ngamma1 = [0.0, 3.141592653589793]\nubar = [0.0, 0.0]\nlevels = 2\n",
    )
    .unwrap();
    let r = json(&bvrelax(&["relax", "--config", path(&cfg)]));
    let inf = r["inf_est"].as_f64().unwrap();
    assert!(inf > 0.95 * std::f64::consts::PI && inf < std::f64::consts::PI);
}

#[test]
fn generate_trace_convert_and_characterize() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.json");
    fs::write(&seq, r#"{"toy": {"eps": 0.3, "ns": [1000, 10000, 100000]}}"#).unwrap();
    let gym_out = dir.path().join("gen.json");
    let out = bvrelax(&["generate", "--in", path(&seq), "--out", path(&gym_out)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_str(&fs::read_to_string(&gym_out).unwrap()).unwrap();
    let lambda = dir.path().join("lambda.json");
    fs::write(&lambda, rec["gym"].to_string()).unwrap();

    let r = json(&bvrelax(&["dm-convert", "--in", path(&lambda), "--roundtrip"]));
    assert!(r["max_pairing_gap"].as_f64().unwrap() <= 1e-10);
    let dm = dir.path().join("dm.json");
    fs::write(&dm, r["diperna_majda"].to_string()).unwrap();
    let back = json(&bvrelax(&["dm-convert", "--in", path(&dm), "--reverse"]));
    assert_eq!(back["gym"]["atoms"].as_array().unwrap().len(), rec["gym"]["atoms"].as_array().unwrap().len());

    let r = json(&bvrelax(&["characterize", "--in", path(&lambda)]));
    assert_eq!(r["pass"], true);

    let pair = dir.path().join("pair.json");
    let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
    let u = BVField::constant(mesh.clone(), vec![0.15]).unwrap();
    let alpha = DiscreteMeasure::new(mesh.clone(), vec![Matrix::scalar(0.0); 2], vec![(vec![1.0], Matrix::scalar(0.7))]).unwrap();
    fs::write(&pair, serde_json::to_string(&SoucekPair::new(u, alpha).unwrap()).unwrap()).unwrap();
    let out = bvrelax(&["trace", "--in", path(&pair)]);
    let r = json(&out);
    assert!((r["outer"]["density"][1][1][0].as_f64().unwrap() - 0.85).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stderr).contains("outer"));
}

#[test]
fn characterize_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
    let Mesh::Interval(im) = mesh.clone() else { unreachable!() };
    // u jumps at 0.5 while λ carries no mass
    let u = BVField::broken(im, vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![1.0]]).unwrap();
    let gym = GenYoungMeasure::trivial(mesh, 1, 1).with_field(u).unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, serde_json::to_string(&gym).unwrap()).unwrap();
    let out = bvrelax(&["characterize", "--in", path(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}
