use anyhow::{bail, Context, Result};

/// One sweep axis parsed from `key=v0:v1:steps` or `key=v0:v1:steps:log`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub key: String,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Grid> {
        let (key, spec) = text
            .split_once('=')
            .with_context(|| format!("grid `{text}` must look like key=v0:v1:steps"))?;
        let parts: Vec<&str> = spec.split(':').collect();
        if !(parts.len() == 3 || (parts.len() == 4 && parts[3] == "log")) {
            bail!("grid `{text}` must look like key=v0:v1:steps[:log]");
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("grid `{text}`: `{s}` is not a number"))
        };
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let steps: usize = parts[2]
            .trim()
            .parse()
            .with_context(|| format!("grid `{text}`: step count `{}` is not an integer", parts[2]))?;
        if steps == 0 {
            bail!("grid `{text}`: step count must be at least 1");
        }
        let log = parts.len() == 4;
        if log && !(a > 0.0 && b > 0.0) {
            bail!("grid `{text}`: log spacing needs positive endpoints");
        }
        let values = (0..steps)
            .map(|k| {
                let u = if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
                if log {
                    (a.ln() + u * (b.ln() - a.ln())).exp()
                } else {
                    a + u * (b - a)
                }
            })
            .collect();
        Ok(Grid {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Cartesian product of the axes; the first axis varies slowest.
pub fn product(grids: &[Grid]) -> Vec<Vec<(String, f64)>> {
    let mut rows: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for g in grids {
        let mut next = Vec::with_capacity(rows.len() * g.values.len());
        for row in &rows {
            for &v in &g.values {
                let mut r = row.clone();
                r.push((g.key.clone(), v));
                next.push(r);
            }
        }
        rows = next;
    }
    rows
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}
