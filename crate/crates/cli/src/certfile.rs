//! Plain-text certificate files.
//!
//! One `key value...` pair per line; `p` lines hold the rows of `P` and
//! `scalar NAME VALUE` lines the multipliers. Numbers use the shortest
//! representation that parses back to the same `f64`, so files round-trip
//! exactly.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mdcert_core::lmi::Assignment;
use mdcert_core::{FunctionClassParams, ProblemData, TimeDomain};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateFile {
    pub domain: TimeDomain,
    pub use_popov: bool,
    pub rate: f64,
    pub margin: f64,
    /// Scalar (`d = 1`) problem the certificate was computed for.
    pub problem: ProblemData,
    pub assignment: Assignment,
}

impl CertificateFile {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# mdcert certificate\n");
        let p = &self.problem;
        let domain = match self.domain {
            TimeDomain::Continuous => "continuous",
            TimeDomain::Discrete => "discrete",
        };
        // Writing to a String cannot fail.
        let _ = writeln!(s, "domain {domain}");
        let _ = writeln!(s, "use_popov {}", self.use_popov);
        let _ = writeln!(s, "rate {}", self.rate);
        let _ = writeln!(s, "margin {}", self.margin);
        let _ = writeln!(s, "mu_f {}", p.f().mu());
        let _ = writeln!(s, "l_f {}", p.f().l());
        let _ = writeln!(s, "mu_phi_conj {}", p.phi_conj().mu());
        let _ = writeln!(s, "l_phi_conj {}", p.phi_conj().l());
        let _ = writeln!(s, "eta {}", p.eta());
        let n = self.assignment.p.nrows();
        let _ = writeln!(s, "p_size {n}");
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.assignment.p[(i, j)].to_string()).collect();
            let _ = writeln!(s, "p {}", row.join(" "));
        }
        for (name, v) in &self.assignment.scalars {
            let _ = writeln!(s, "scalar {name} {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut domain = None;
        let mut use_popov = None;
        let mut nums: std::collections::HashMap<String, f64> = Default::default();
        let mut p_size = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut scalars = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let ctx = || format!("line {}: {line:?}", lineno + 1);
            match key {
                "domain" => {
                    domain = Some(match rest.as_slice() {
                        ["continuous"] => TimeDomain::Continuous,
                        ["discrete"] => TimeDomain::Discrete,
                        _ => bail!("unknown domain on {}", ctx()),
                    })
                }
                "use_popov" => use_popov = Some(single(&rest).with_context(ctx)?.parse::<bool>().with_context(ctx)?),
                "p_size" => p_size = Some(single(&rest).with_context(ctx)?.parse::<usize>().with_context(ctx)?),
                "p" => rows.push(rest.iter().map(|v| v.parse::<f64>()).collect::<Result<_, _>>().with_context(ctx)?),
                "scalar" => match rest.as_slice() {
                    [name, v] => scalars.push((name.to_string(), v.parse::<f64>().with_context(ctx)?)),
                    _ => bail!("scalar lines need a name and a value ({})", ctx()),
                },
                "rate" | "margin" | "mu_f" | "l_f" | "mu_phi_conj" | "l_phi_conj" | "eta" => {
                    nums.insert(key.to_string(), single(&rest).with_context(ctx)?.parse::<f64>().with_context(ctx)?);
                }
                other => bail!("unknown key {other:?} ({})", ctx()),
            }
        }
        let get = |k: &str| nums.get(k).copied().with_context(|| format!("missing {k}"));
        let n = p_size.context("missing p_size")?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            bail!("P must have {n} rows of {n} entries");
        }
        let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let f = FunctionClassParams::new(get("mu_f")?, get("l_f")?)?;
        let c = FunctionClassParams::new(get("mu_phi_conj")?, get("l_phi_conj")?)?;
        Ok(Self {
            domain: domain.context("missing domain")?,
            use_popov: use_popov.context("missing use_popov")?,
            rate: get("rate")?,
            margin: get("margin")?,
            problem: ProblemData::from_conjugate(f, c, get("eta")?, 1)?,
            assignment: Assignment { p, scalars },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn single<'a>(rest: &[&'a str]) -> Result<&'a str> {
    match rest {
        [v] => Ok(v),
        _ => bail!("expected exactly one value"),
    }
}
