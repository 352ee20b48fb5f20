//! Fixed quadrature rules, exact for polynomials of degree five.

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Three-point Gauss–Legendre nodes and weights mapped to `[x0, x1]`.
pub fn gauss3(x0: f64, x1: f64) -> [(f64, f64); 3] {
    let mid = 0.5 * (x0 + x1);
    let half = 0.5 * (x1 - x0);
    let mut out = [(0.0, 0.0); 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (mid + half * GAUSS3_NODES[k], half * GAUSS3_WEIGHTS[k]);
    }
    out
}

pub fn integrate_interval(x0: f64, x1: f64, f: impl Fn(f64) -> f64) -> f64 {
    gauss3(x0, x1).iter().map(|&(x, w)| w * f(x)).sum()
}

/// Three-point Gauss rule on the segment `p -> q`, weights include the length.
pub fn gauss3_segment(p: [f64; 2], q: [f64; 2]) -> [([f64; 2], f64); 3] {
    let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
    let mut out = [([0.0; 2], 0.0); 3];
    for (o, &(s, w)) in out.iter_mut().zip(gauss3(0.0, 1.0).iter()) {
        *o = ([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])], w * len);
    }
    out
}

// Seven-point degree-five rule on the reference triangle (barycentric, weights sum to 1).
const A1: f64 = 0.059_715_871_789_769_8;
const B1: f64 = 0.470_142_064_105_115_1;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_3;
const W0: f64 = 0.225;
const W1: f64 = 0.132_394_152_788_506_2;
const W2: f64 = 0.125_939_180_544_827_2;

const TRI7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Quadrature points and weights (weights include the area).
pub fn triangle7(p: [[f64; 2]; 3]) -> [([f64; 2], f64); 7] {
    let area = triangle_area(p);
    let mut out = [([0.0; 2], 0.0); 7];
    for (o, &(b, w)) in out.iter_mut().zip(TRI7.iter()) {
        let x = b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0];
        let y = b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1];
        *o = ([x, y], w * area);
    }
    out
}

pub fn integrate_triangle(p: [[f64; 2]; 3], f: impl Fn([f64; 2]) -> f64) -> f64 {
    triangle7(p).iter().map(|&(x, w)| w * f(x)).sum()
}

pub fn triangle_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss3_exact_for_quintics() {
        let v = integrate_interval(0.2, 1.7, |x| x.powi(5) - 2.0 * x.powi(2) + 1.0);
        let exact = |x: f64| x.powi(6) / 6.0 - 2.0 * x.powi(3) / 3.0 + x;
        assert!((v - (exact(1.7) - exact(0.2))).abs() < 1e-12);
    }

    #[test]
    fn triangle7_exact_for_monomials_up_to_degree_five() {
        // reference triangle: int x^a y^b = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let v = integrate_triangle(p, |x| x[0].powi(a as i32) * x[1].powi(b as i32));
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((v - exact).abs() < 1e-14, "x^{a} y^{b}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn segment_rule_integrates_length() {
        let s: f64 = gauss3_segment([0.0, 0.0], [3.0, 4.0]).iter().map(|q| q.1).sum();
        assert!((s - 5.0).abs() < 1e-14);
    }
}
