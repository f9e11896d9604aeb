//! Table-style reports, interval data for plotting and posterior draw dumps.

use std::fmt::Write as _;

use crate::datagen::Scale;
use crate::error::{Error, Result};
use crate::scenario::DrawDump;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub auxiliary: String,
    pub scale: Scale,
    /// Estimate or posterior mean; Monte Carlo mean over replications.
    pub estimate: f64,
    /// Standard error or posterior SD; averaged over replications.
    pub se: f64,
    pub p_value: Option<f64>,
    pub pr_ge_zero: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub delta_sq: Option<f64>,
    pub replications: usize,
    pub mc_sd: Option<f64>,
    pub rejection_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::config(format!("unknown report format `{other}`"))),
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Csv => "report.csv",
            Self::Markdown => "report.md",
        }
    }
}

pub const REPORT_HEADER: [&str; 13] = [
    "method",
    "auxiliary",
    "scale",
    "estimate",
    "se",
    "p_value",
    "pr_ge_zero",
    "ci_low",
    "ci_high",
    "delta_sq",
    "replications",
    "mc_sd",
    "rejection_rate",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.auxiliary.clone(),
            r.scale.to_string(),
            r.estimate.to_string(),
            r.se.to_string(),
            opt(r.p_value),
            opt(r.pr_ge_zero),
            opt(r.ci_low),
            opt(r.ci_high),
            opt(r.delta_sq),
            r.replications.to_string(),
            opt(r.mc_sd),
            opt(r.rejection_rate),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn f4_opt(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_else(|| "-".into())
}

fn to_markdown(rows: &[ReportRow]) -> String {
    let mc = rows.iter().any(|r| r.replications > 1);
    let mut s = String::from("| Method | Auxiliary | Scale | Effect (SE) | p-value | pr(θ≥0) | 95% interval | Δ² |");
    if mc {
        s.push_str(" Replications | MC SD | Rejection rate |");
    }
    s.push('\n');
    let cols = if mc { 11 } else { 8 };
    s.push('|');
    s.push_str(&"---|".repeat(cols));
    s.push('\n');
    for r in rows {
        let ci = match (r.ci_low, r.ci_high) {
            (Some(a), Some(b)) => format!("({}, {})", f4(a), f4(b)),
            _ => "-".into(),
        };
        let _ = write!(
            s,
            "| {} | {} | {} | {} ({}) | {} | {} | {} | {} |",
            r.method,
            r.auxiliary,
            r.scale,
            f4(r.estimate),
            f4(r.se),
            f4_opt(r.p_value),
            f4_opt(r.pr_ge_zero),
            ci,
            f4_opt(r.delta_sq)
        );
        if mc {
            let _ = write!(s, " {} | {} | {} |", r.replications, f4_opt(r.mc_sd), f4_opt(r.rejection_rate));
        }
        s.push('\n');
    }
    s
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::State("no report rows to emit".into()));
    }
    match format {
        ReportFormat::Csv => to_csv(rows),
        ReportFormat::Markdown => Ok(to_markdown(rows)),
    }
}

/// Inverse of the CSV form of [`emit_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(Error::config("report CSV header does not match"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |f: &str| Error::config(format!("report CSV: invalid {f} `{}`", rec.get(REPORT_HEADER.iter().position(|h| *h == f).unwrap()).unwrap_or("")));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(REPORT_HEADER[i]));
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) }
        };
        rows.push(ReportRow {
            method: rec[0].to_string(),
            auxiliary: rec[1].to_string(),
            scale: Scale::parse(&rec[2])?,
            estimate: num(3)?,
            se: num(4)?,
            p_value: opt(5)?,
            pr_ge_zero: opt(6)?,
            ci_low: opt(7)?,
            ci_high: opt(8)?,
            delta_sq: opt(9)?,
            replications: rec[10].parse().map_err(|_| bad("replications"))?,
            mc_sd: opt(11)?,
            rejection_rate: opt(12)?,
        });
    }
    Ok(rows)
}

/// Long-format `method,scale,estimate,lo95,hi95`; rows without bounds are
/// skipped and counted.
pub fn emit_intervals(rows: &[ReportRow]) -> Result<(String, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "scale", "estimate", "lo95", "hi95"])?;
    let mut skipped = 0;
    for r in rows {
        match (r.ci_low, r.ci_high) {
            (Some(lo), Some(hi)) => w.write_record([
                r.method.clone(),
                r.scale.to_string(),
                r.estimate.to_string(),
                lo.to_string(),
                hi.to_string(),
            ])?,
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} report rows have no interval bounds and were left out");
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok((String::from_utf8(bytes).expect("CSV output is UTF-8"), skipped))
}

/// One row per kept draw; parameter columns are the union over all dumps.
pub fn emit_draws(dumps: &[DrawDump]) -> Result<String> {
    let mut names: Vec<&str> = Vec::new();
    for d in dumps {
        for n in &d.draws.names {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method", "scale", "chain", "draw"];
    header.extend(&names);
    w.write_record(&header)?;
    for d in dumps {
        let pos: Vec<Option<usize>> =
            names.iter().map(|n| d.draws.names.iter().position(|m| m == n)).collect();
        for (c, chain) in d.draws.chains.iter().enumerate() {
            for (i, row) in chain.iter().enumerate() {
                let mut rec = vec![d.method.clone(), d.scale.to_string(), c.to_string(), i.to_string()];
                rec.extend(pos.iter().map(|p| p.map(|j| row[j].to_string()).unwrap_or_default()));
                w.write_record(&rec)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
