//! Condition-number grids: `a..b` (integers, inclusive), `log:a:b:n`, or a
//! comma-separated list.

use anyhow::{bail, Context, Result};

pub fn parse_kappa_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let values = if let Some(rest) = text.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            bail!("logarithmic grid must look like log:LO:HI:N, got {text:?}");
        }
        let lo = parse_value(parts[0])?;
        let hi = parse_value(parts[1])?;
        let n: usize = parts[2].trim().parse().with_context(|| format!("bad point count {:?}", parts[2]))?;
        log_points(lo, hi, n)?
    } else if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad range start {a:?}"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad range end {b:?}"))?;
        if b < a {
            bail!("range {text:?} is empty");
        }
        (a..=b).map(|k| k as f64).collect()
    } else {
        text.split(',').filter(|s| !s.trim().is_empty()).map(parse_value).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        bail!("grid {text:?} is empty");
    }
    if let Some(bad) = values.iter().find(|k| !(k.is_finite() && **k >= 1.0)) {
        bail!("condition numbers must be finite and at least 1, got {bad}");
    }
    Ok(values)
}

fn parse_value(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}"))
}

fn log_points(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        bail!("logarithmic grid needs 0 < LO <= HI and N >= 1");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| if i + 1 == n { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect())
}
