use std::collections::BTreeMap;

use super::{
    make_abs_power, make_exp_inf, make_holder, make_lower_bound, make_norm_inf, make_power_inf, make_quasar_wave,
    DenseMatrix, LowerKind, Problem,
};
use crate::error::{Error, Result};

/// Parameters of a problem id such as `exp_inf{d=2,R=1}`. Vector values are
/// `;`-separated; a single value is broadcast.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamMap {
    values: BTreeMap<String, String>,
}

impl ParamMap {
    pub fn parse(body: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value, got `{item}`")))?;
            if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::invalid(format!("duplicate parameter `{}`", k.trim())));
            }
        }
        Ok(Self { values })
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => parse_f64(key, s),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => {
                s.parse().map_err(|_| Error::invalid(format!("`{key}` must be a non-negative integer, got `{s}`")))
            }
        }
    }

    /// A vector of length `d`, broadcasting a single value.
    pub fn get_vec(&self, key: &str, d: usize, default: f64) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(vec![default; d]),
            Some(s) => {
                let v = s.split(';').map(|t| parse_f64(key, t.trim())).collect::<Result<Vec<_>>>()?;
                match v.len() {
                    1 => Ok(vec![v[0]; d]),
                    n if n == d => Ok(v),
                    n => Err(Error::Dimension { expected: d, got: n }),
                }
            }
        }
    }

    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.values.get(key).map(|s| s.split(';').map(|t| parse_f64(key, t.trim())).collect()).transpose()
    }

    pub fn ensure_only(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!("unknown parameter `{k}` (expected one of {})", known.join(", ")))),
            None => Ok(()),
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::invalid(format!("`{key}` must be a number, got `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite("problem parameter"));
    }
    Ok(v)
}

fn split_id(spec: &str) -> Result<(&str, &str)> {
    let spec = spec.trim();
    match spec.find('{') {
        None => Ok((spec, "")),
        Some(i) => {
            let body = spec[i + 1..]
                .strip_suffix('}')
                .ok_or_else(|| Error::invalid(format!("unterminated parameter list in `{spec}`")))?;
            Ok((&spec[..i], body))
        }
    }
}

/// `A` from either a row-major list `A=..` (rows inferred from `d`) or a
/// scaled identity `a`.
fn matrix(p: &ParamMap, d: usize) -> Result<DenseMatrix> {
    match p.get_list("A")? {
        Some(v) => {
            if v.len() % d != 0 {
                return Err(Error::invalid(format!("`A` has {} entries, not a multiple of d = {d}", v.len())));
            }
            DenseMatrix::new(v.len() / d, d, v)
        }
        None => Ok(DenseMatrix::scaled_identity(d, p.get_f64("a", 1.0)?)),
    }
}

/// Build a suite problem from its id, e.g. `exp_inf{d=1}` or
/// `lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}`.
pub fn parse_problem(spec: &str) -> Result<Problem> {
    let (id, body) = split_id(spec)?;
    let p = ParamMap::parse(body)?;
    if let Some(kind) = id.strip_prefix("lower:") {
        let kind =
            LowerKind::from_id(kind).ok_or_else(|| Error::invalid(format!("unknown lower-bound kind `{kind}`")))?;
        p.ensure_only(&["R", "G0", "G1", "eps"])?;
        return make_lower_bound(
            kind,
            p.get_f64("R", 1.0)?,
            p.get_f64("G0", 1.0)?,
            p.get_f64("G1", 8.0)?,
            p.get_f64("eps", 0.1)?,
        );
    }
    let d = p.get_usize("d", 1)?;
    if d == 0 {
        return Err(Error::invalid("d must be >= 1"));
    }
    let r = p.get_f64("R", 1.0)?;
    match id {
        "power_inf" => {
            p.ensure_only(&["d", "p", "m1", "a", "A", "b", "R"])?;
            let a = matrix(&p, d)?;
            let b = p.get_vec("b", a.rows, 0.0)?;
            make_power_inf(a, b, p.get_f64("p", 2.0)?, p.get_f64("m1", 1.0)?, r)
        }
        "exp_inf" => {
            p.ensure_only(&["d", "a", "A", "b", "R"])?;
            let a = matrix(&p, d)?;
            let b = p.get_vec("b", a.rows, 0.0)?;
            make_exp_inf(a, b, r)
        }
        "norm_inf" => {
            p.ensure_only(&["d", "xstar", "R", "m1"])?;
            make_norm_inf(p.get_vec("xstar", d, 0.0)?, r, p.get_f64("m1", 0.0)?)
        }
        "holder" => {
            p.ensure_only(&["d", "nu", "L", "xstar", "R", "l1"])?;
            make_holder(
                p.get_f64("nu", 0.5)?,
                p.get_f64("L", 1.0)?,
                p.get_vec("xstar", d, 0.0)?,
                r,
                p.get_f64("l1", 2.0 / r)?,
            )
        }
        "abs_power" => {
            p.ensure_only(&["d", "p", "R"])?;
            make_abs_power(d, p.get_f64("p", 1.0)?, r)
        }
        "quasar_wave" => {
            p.ensure_only(&["d", "c", "omega", "R", "xstar"])?;
            make_quasar_wave(
                p.get_vec("xstar", d, 0.0)?,
                p.get_f64("c", 0.5)?,
                p.get_f64("omega", 4.0 * std::f64::consts::PI)?,
                r,
            )
        }
        other => Err(Error::invalid(format!("unknown problem `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suite_ids() {
        let p = parse_problem("exp_inf{d=1}").unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.constants().f_star, 1.0);
        let q = parse_problem("lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}").unwrap();
        assert_eq!(q.constants().x_star, vec![0.75]);
        let h = parse_problem("holder{d=2,nu=0.5,xstar=0.1;-0.2,R=1}").unwrap();
        assert_eq!(h.constants().x_star, vec![0.1, -0.2]);
        assert_eq!(h.constants().l1, 2.0);
        assert!(parse_problem("norm_inf").is_ok());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(parse_problem("nope").is_err());
        assert!(parse_problem("exp_inf{d=1").is_err());
        assert!(parse_problem("exp_inf{bogus=1}").is_err());
        assert!(parse_problem("exp_inf{d=x}").is_err());
        assert!(parse_problem("lower:sgd_I{G1=2}").is_err());
        assert!(parse_problem("holder{d=2,xstar=1;2;3}").is_err());
    }

    #[test]
    fn explicit_matrix() {
        let p = parse_problem("power_inf{d=2,A=2;1;0;1,b=1;0.25,R=2,p=3}").unwrap();
        assert!(p.gap(&p.constants().x_star.clone()).abs() < 1e-12);
    }
}
