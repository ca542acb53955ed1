//! CSV tables written by the experiments, and their readers.
//!
//! Headers and column order are fixed. Floats are written with the shortest
//! round-tripping representation; missing values are empty fields.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

pub const FIG2_HEADER: [&str; 3] = ["kappa", "feasible_sector", "feasible_popov"];
pub const FIG2_MARGIN_COLUMNS: [&str; 2] = ["margin_sector", "margin_popov"];
pub const FIG3_HEADER: [&str; 4] = ["kappa", "rho_certified", "rho_curve", "rho_empirical"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["t_or_k", "dist", "lyapunov"];
pub const SWEEP_HEADER: [&str; 5] = ["kappa", "feasible", "rate", "margin", "solves"];
pub const CERTIFY_HEADER: [&str; 9] =
    ["domain", "use_popov", "mu_f", "l_f", "mu_phi", "l_phi", "eta", "feasible", "rate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Verdict {
    #[serde(rename = "true")]
    Feasible,
    #[serde(rename = "false")]
    Infeasible,
    #[serde(rename = "numerical-failure")]
    NumericalFailure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Feasible => "true",
            Verdict::Infeasible => "false",
            Verdict::NumericalFailure => "numerical-failure",
        }
    }
}

impl From<mdcert_core::sdp::FeasibilityStatus> for Verdict {
    fn from(s: mdcert_core::sdp::FeasibilityStatus) -> Self {
        use mdcert_core::sdp::FeasibilityStatus as S;
        match s {
            S::Feasible => Verdict::Feasible,
            S::Infeasible => Verdict::Infeasible,
            S::NumericalFailure => Verdict::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Fig2Row {
    pub kappa: f64,
    pub feasible_sector: Verdict,
    pub feasible_popov: Verdict,
    #[serde(default)]
    pub margin_sector: Option<f64>,
    #[serde(default)]
    pub margin_popov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Fig3Row {
    pub kappa: f64,
    pub rho_certified: Option<f64>,
    pub rho_curve: f64,
    pub rho_empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrajectoryRow {
    pub t_or_k: f64,
    pub dist: f64,
    pub lyapunov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub feasible: Verdict,
    pub rate: Option<f64>,
    pub margin: f64,
    pub solves: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CertifyRow {
    pub domain: String,
    pub use_popov: bool,
    pub mu_f: f64,
    pub l_f: f64,
    pub mu_phi: f64,
    pub l_phi: f64,
    pub eta: f64,
    pub feasible: Verdict,
    pub rate: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_fig2<W: Write>(w: W, rows: &[Fig2Row], with_margins: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = FIG2_HEADER.to_vec();
    if with_margins {
        header.extend(FIG2_MARGIN_COLUMNS);
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec =
            vec![r.kappa.to_string(), r.feasible_sector.as_str().to_string(), r.feasible_popov.as_str().to_string()];
        if with_margins {
            rec.push(opt(r.margin_sector));
            rec.push(opt(r.margin_popov));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_fig3<W: Write>(w: W, rows: &[Fig3Row]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FIG3_HEADER)?;
    for r in rows {
        out.write_record([r.kappa.to_string(), opt(r.rho_certified), r.rho_curve.to_string(), opt(r.rho_empirical)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        out.write_record([r.t_or_k.to_string(), r.dist.to_string(), opt(r.lyapunov)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            r.kappa.to_string(),
            r.feasible.as_str().to_string(),
            opt(r.rate),
            r.margin.to_string(),
            r.solves.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_certify<W: Write>(w: W, rows: &[CertifyRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CERTIFY_HEADER)?;
    for r in rows {
        out.write_record([
            r.domain.clone(),
            r.use_popov.to_string(),
            r.mu_f.to_string(),
            r.l_f.to_string(),
            r.mu_phi.to_string(),
            r.l_phi.to_string(),
            r.eta.to_string(),
            r.feasible.as_str().to_string(),
            opt(r.rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads any of the tables above back into rows.
pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(r);
    reader.deserialize().collect::<std::result::Result<Vec<T>, _>>().context("malformed CSV row")
}

pub fn read_rows_from<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_rows(f).with_context(|| format!("reading {}", path.display()))
}

/// Writes a table through `write` into `path`.
pub fn save<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    write(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}
