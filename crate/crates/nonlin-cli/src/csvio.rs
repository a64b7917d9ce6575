//! Small CSV helpers.
//!
//! Floats are printed with nine significant digits, which round-trips every
//! value the experiments produce and keeps outputs byte-identical across
//! runs.

use std::io::Write;

/// Nine-significant-digit rendering without superfluous exponent notation
/// for ordinary magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10();
    if (-4.0..9.0).contains(&magnitude) {
        let decimals = (8.0 - magnitude.floor()).max(0.0) as usize;
        let s = format!("{v:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{v:.8e}")
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W) -> Self {
        CsvWriter { out }
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }

    pub fn header(&mut self, fields: &[&str]) -> std::io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }
}

pub fn create_csv(path: &std::path::Path) -> std::io::Result<CsvWriter<std::fs::File>> {
    Ok(CsvWriter::new(std::fs::File::create(path)?))
}
