use std::io::Write;
use std::path::Path;

use anyhow::Context;

use crate::config::Format;
use crate::sweep::ResultRecord;

pub const SIG_DIGITS: usize = 12;

pub const HEADER: [&str; 23] = [
    "protocol",
    "distill",
    "r_db",
    "loss_db",
    "loss2_db",
    "eta",
    "norm_convention",
    "optimized",
    "g",
    "ts",
    "tc",
    "f_bar",
    "f_bar_ratio",
    "f_bar_per_point",
    "p_total_avg",
    "p_bsm_avg",
    "p_operation",
    "classical_limit",
    "beats_classical",
    "resource_dim",
    "truncation_mass",
    "quadrature_error",
    "error",
];

/// Shortest decimal form of `x` rounded to `digits` significant digits;
/// exponent notation outside `[1e-5, 1e15)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let v = round_sig(x, digits);
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, SIG_DIGITS)).unwrap_or_default()
}

fn row(r: &ResultRecord) -> Vec<String> {
    vec![
        r.protocol.clone(),
        r.distill.clone(),
        format_sig(r.r_db, SIG_DIGITS),
        format_sig(r.loss_db, SIG_DIGITS),
        opt_f(r.loss2_db),
        format_sig(r.eta, SIG_DIGITS),
        r.norm_convention.clone(),
        r.optimized.to_string(),
        opt_f(r.g),
        opt_f(r.ts),
        opt_f(r.tc),
        opt_f(r.f_bar),
        opt_f(r.f_bar_ratio),
        opt_f(r.f_bar_per_point),
        opt_f(r.p_total_avg),
        opt_f(r.p_bsm_avg),
        opt_f(r.p_operation),
        format_sig(r.classical_limit, SIG_DIGITS),
        r.beats_classical.map(|b| b.to_string()).unwrap_or_default(),
        r.resource_dim.map(|d| d.to_string()).unwrap_or_default(),
        opt_f(r.truncation_mass),
        opt_f(r.quadrature_error),
        r.error.clone().unwrap_or_default(),
    ]
}

/// Copy of the record with every float rounded as it is written out.
pub fn rounded(r: &ResultRecord) -> ResultRecord {
    let f = |x: f64| round_sig(x, SIG_DIGITS);
    let o = |x: Option<f64>| x.map(f);
    ResultRecord {
        r_db: f(r.r_db),
        loss_db: f(r.loss_db),
        loss2_db: o(r.loss2_db),
        eta: f(r.eta),
        g: o(r.g),
        ts: o(r.ts),
        tc: o(r.tc),
        f_bar: o(r.f_bar),
        f_bar_ratio: o(r.f_bar_ratio),
        f_bar_per_point: o(r.f_bar_per_point),
        p_total_avg: o(r.p_total_avg),
        p_bsm_avg: o(r.p_bsm_avg),
        p_operation: o(r.p_operation),
        classical_limit: f(r.classical_limit),
        truncation_mass: o(r.truncation_mass),
        quadrature_error: o(r.quadrature_error),
        ..r.clone()
    }
}

pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[ResultRecord], mut out: W) -> anyhow::Result<()> {
    let rows: Vec<ResultRecord> = records.iter().map(rounded).collect();
    serde_json::to_writer_pretty(&mut out, &rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn emit<W: Write>(records: &[ResultRecord], format: Format, out: W) -> anyhow::Result<()> {
    match format {
        Format::Csv => write_csv(records, out),
        Format::Json => write_json(records, out),
    }
}

pub fn emit_to_path(records: &[ResultRecord], format: Format, path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = std::io::BufWriter::new(file);
    emit(records, format, &mut buf)?;
    buf.flush()?;
    Ok(())
}

/// Parses a table written by [`write_csv`]. Fields go through `str::parse`,
/// which round-trips the written digits exactly.
pub fn read_csv<R: std::io::Read>(input: R) -> anyhow::Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        anyhow::bail!("unexpected CSV header");
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| -> anyhow::Result<f64> {
            field(i)
                .parse()
                .with_context(|| format!("column {} is not a number", HEADER[i]))
        };
        let opt = |i: usize| -> anyhow::Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let text = |i: usize| (!field(i).is_empty()).then(|| field(i).to_string());
        out.push(ResultRecord {
            protocol: field(0).to_string(),
            distill: field(1).to_string(),
            r_db: num(2)?,
            loss_db: num(3)?,
            loss2_db: opt(4)?,
            eta: num(5)?,
            norm_convention: field(6).to_string(),
            optimized: field(7).parse()?,
            g: opt(8)?,
            ts: opt(9)?,
            tc: opt(10)?,
            f_bar: opt(11)?,
            f_bar_ratio: opt(12)?,
            f_bar_per_point: opt(13)?,
            p_total_avg: opt(14)?,
            p_bsm_avg: opt(15)?,
            p_operation: opt(16)?,
            classical_limit: num(17)?,
            beats_classical: text(18).map(|t| t.parse()).transpose()?,
            resource_dim: text(19).map(|t| t.parse()).transpose()?,
            truncation_mass: opt(20)?,
            quadrature_error: opt(21)?,
            error: text(22),
        });
    }
    Ok(out)
}

pub fn read_json<R: std::io::Read>(input: R) -> anyhow::Result<Vec<ResultRecord>> {
    Ok(serde_json::from_reader(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_sig(0.5, 12), "0.5");
        assert_eq!(format_sig(-0.0, 12), "0");
        assert_eq!(format_sig(1234567.891234567, 12), "1234567.89123");
        assert_eq!(format_sig(1.23456789012345e-9, 12), "1.23456789012e-9");
        assert_eq!(format_sig(3.0, 12), "3");
    }
}
