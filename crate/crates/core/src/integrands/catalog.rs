//! Named integrands, addressed as `name` or `name:params`.

use super::{HomogeneousIntegrand, Integrand, SpatialIntegrand};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `(syntax, description)` for every catalog entry.
pub const CATALOG: &[(&str, &str)] = &[
    ("abs[:MxN]", "Frobenius norm |A| (default 1x1); convex, 1-homogeneous"),
    ("neg_abs[:MxN]", "-|A|; 1-homogeneous, fails every positivity test"),
    ("euclid_sqrt1p[:MxN]", "sqrt(1+|A|^2); convex, recession |A|"),
    ("linear_form:B", "A:B for B given row-wise, entries split by ',' and rows by '/'"),
    ("double_well_1d", "min(|t-1|, |t+1|); envelope max(0, |t|-1), recession |t|"),
    ("toy_weighted_abs:eps", "((x-1)^2+eps)|t|, the weighted bulk term of the toy problem"),
    ("piecewise_linear_1d:p,q", "p*t for t>=0, -q*t for t<0; values p at +1 and q at -1"),
    ("quadratic", "t^2; no linear growth, no recession"),
    ("oscillating_1d", "t*sin(log(1+|t|)); linear growth without a recession limit"),
];

pub fn lookup(spec: &str) -> Result<Integrand> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (spec.trim(), None),
    };
    let v = match name {
        "abs" => {
            let (m, n) = shape(params)?;
            let rec = HomogeneousIntegrand::new("abs", m, n, |_| 1.0).with_gradient(|u| *u);
            Integrand::new(spec, m, n, |a| a.norm()).with_recession(rec).convex()
        }
        "neg_abs" => {
            let (m, n) = shape(params)?;
            let rec = HomogeneousIntegrand::new("neg_abs", m, n, |_| -1.0).with_gradient(|u| -*u);
            Integrand::new(spec, m, n, |a| -a.norm()).with_recession(rec)
        }
        "euclid_sqrt1p" => {
            let (m, n) = shape(params)?;
            let rec = HomogeneousIntegrand::new("abs", m, n, |_| 1.0).with_gradient(|u| *u);
            Integrand::new(spec, m, n, |a| (1.0 + a.norm().powi(2)).sqrt()).with_recession(rec).convex()
        }
        "linear_form" => {
            let b = matrix_param(params.ok_or_else(|| Error::arg("linear_form needs a matrix, e.g. linear_form:1,0"))?)?;
            let c = b.norm().max(1.0);
            let rec = HomogeneousIntegrand::new(spec, b.rows(), b.cols(), move |u| u.dot(&b)).with_gradient(move |_| b);
            Integrand::new(spec, b.rows(), b.cols(), move |a| a.dot(&b)).with_growth(c).with_recession(rec).convex()
        }
        "double_well_1d" => {
            no_params(name, params)?;
            let rec = HomogeneousIntegrand::new("abs", 1, 1, |_| 1.0).with_gradient(|u| *u);
            Integrand::new(spec, 1, 1, |a| {
                let t = a.to_scalar();
                (t - 1.0).abs().min((t + 1.0).abs())
            })
            .with_recession(rec)
        }
        "toy_weighted_abs" => {
            let eps = scalar_param(name, params)?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::arg("toy_weighted_abs needs 0 < eps < 1"));
            }
            let rec = HomogeneousIntegrand::new("abs", 1, 1, |_| 1.0).with_gradient(|u| *u);
            Integrand::new(spec, 1, 1, |a| a.norm())
                .with_recession(rec)
                .with_weight(move |x| (x[0] - 1.0).powi(2) + eps)
                .convex()
        }
        "piecewise_linear_1d" => {
            let v = list_param(params.ok_or_else(|| Error::arg("piecewise_linear_1d needs p,q"))?)?;
            let [p, q] = v[..] else {
                return Err(Error::arg("piecewise_linear_1d needs exactly two values p,q"));
            };
            let pl = move |t: f64| if t >= 0.0 { p * t } else { -q * t };
            let rec = HomogeneousIntegrand::new(spec, 1, 1, move |u| pl(u.to_scalar()))
                .with_gradient(move |u| Matrix::scalar(if u.to_scalar() >= 0.0 { p } else { -q }));
            let mut v = Integrand::new(spec, 1, 1, move |a| pl(a.to_scalar()))
                .with_growth(p.abs().max(q.abs()).max(1.0))
                .with_recession(rec);
            if p + q >= 0.0 {
                v = v.convex();
            }
            v
        }
        "quadratic" => {
            no_params(name, params)?;
            Integrand::new(spec, 1, 1, |a| a.to_scalar().powi(2)).convex()
        }
        "oscillating_1d" => {
            no_params(name, params)?;
            Integrand::new(spec, 1, 1, |a| {
                let t = a.to_scalar();
                t * (1.0 + t.abs()).ln().sin()
            })
        }
        _ => return Err(Error::UnknownIntegrand(spec.to_string())),
    };
    Ok(v)
}

/// Catalog integrand as `f(x, A) = g(x) v(A)` with its recession.
pub fn lookup_spatial(spec: &str) -> Result<SpatialIntegrand> {
    Ok(SpatialIntegrand::from_integrand(&lookup(spec)?))
}

fn no_params(name: &str, params: Option<&str>) -> Result<()> {
    match params {
        None => Ok(()),
        Some(_) => Err(Error::arg(format!("{name} takes no parameters"))),
    }
}

fn shape(params: Option<&str>) -> Result<(usize, usize)> {
    let Some(p) = params else { return Ok((1, 1)) };
    let (m, n) = p.split_once('x').ok_or_else(|| Error::arg(format!("shape must look like MxN, got {p}")))?;
    let m: usize = m.trim().parse().map_err(|_| Error::arg(format!("bad row count {m}")))?;
    let n: usize = n.trim().parse().map_err(|_| Error::arg(format!("bad column count {n}")))?;
    if m == 0 || n == 0 || m * n > crate::linalg::MAX_ENTRIES {
        return Err(Error::arg(format!("unsupported shape {m}x{n}")));
    }
    Ok((m, n))
}

fn scalar_param(name: &str, params: Option<&str>) -> Result<f64> {
    params
        .ok_or_else(|| Error::arg(format!("{name} needs a numeric parameter")))?
        .parse()
        .map_err(|_| Error::arg(format!("{name} parameter is not a number")))
}

fn list_param(p: &str) -> Result<Vec<f64>> {
    p.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::arg(format!("bad number `{s}`"))))
        .collect()
}

fn matrix_param(p: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = p.split(['/', ';']).map(list_param).collect::<Result<_>>()?;
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) || rows.len() * c > crate::linalg::MAX_ENTRIES {
        return Err(Error::arg(format!("ragged or oversized matrix `{p}`")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(rows.len(), c, &flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_documented_name_resolves() {
        for spec in [
            "abs",
            "abs:2x2",
            "neg_abs:1x2",
            "euclid_sqrt1p",
            "linear_form:1,0/0,1",
            "double_well_1d",
            "toy_weighted_abs:0.5",
            "piecewise_linear_1d:1,-0.5",
            "quadratic",
            "oscillating_1d",
        ] {
            lookup(spec).unwrap_or_else(|e| panic!("{spec}: {e}"));
        }
    }

    #[test]
    fn unknown_and_malformed_names() {
        assert!(matches!(lookup("nope"), Err(Error::UnknownIntegrand(_))));
        assert!(matches!(lookup("abs:3"), Err(Error::Argument(_))));
        assert!(matches!(lookup("linear_form:1,2/3"), Err(Error::Argument(_))));
        assert!(matches!(lookup("toy_weighted_abs:2"), Err(Error::Argument(_))));
    }

    #[test]
    fn linear_form_shape_and_values() {
        let v = lookup("linear_form:1,-2").unwrap();
        assert_eq!((v.rows, v.cols), (1, 2));
        assert_eq!(v.eval(&Matrix::from_row_slice(1, 2, &[3.0, 1.0])), 1.0);
    }

    #[test]
    fn toy_weight_at_endpoints() {
        let v = lookup("toy_weighted_abs:0.5").unwrap();
        assert_eq!(v.eval_at(&[0.0], &Matrix::scalar(-2.0)), 3.0);
        assert_eq!(v.eval_at(&[1.0], &Matrix::scalar(2.0)), 1.0);
    }
}
