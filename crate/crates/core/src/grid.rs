//! Parameter grids: `a:b:step`, comma lists, and `logspace(a,b,k)`.

use crate::error::{Error, Result};

/// `k` points log-spaced from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..k)
        .map(|i| {
            if i == k - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect()
}

fn num(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::ConfigParse(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::ConfigParse(format!("non-finite grid value {s:?}")));
    }
    Ok(v)
}

/// Parses a grid specification into an ascending list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let values = if let Some(inner) = spec
        .strip_prefix("logspace(")
        .and_then(|r| r.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::ConfigParse(format!(
                "logspace needs 3 arguments: {spec:?}"
            )));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::ConfigParse(format!("bad logspace count in {spec:?}")))?;
        if a <= 0.0 || b <= 0.0 || k == 0 {
            return Err(Error::ConfigParse(format!(
                "logspace needs positive bounds and count: {spec:?}"
            )));
        }
        logspace(a, b, k)
    } else if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::ConfigParse(format!(
                "range must be a:b:step: {spec:?}"
            )));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 || b < a {
            return Err(Error::ConfigParse(format!(
                "range needs a <= b and step > 0: {spec:?}"
            )));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(Error::ConfigParse(format!("range too long: {spec:?}")));
        }
        (0..count).map(|i| a + step * i as f64).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::ConfigParse("empty grid".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ConfigParse(format!(
            "grid not strictly ascending: {spec:?}"
        )));
    }
    Ok(values)
}
