//! CSV emission: one header line, `.` decimals, 9 significant digits.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};

pub const SIG_DIGITS: usize = 9;

/// Formats `x` with [`SIG_DIGITS`] significant digits, switching to
/// scientific notation outside `[1e-5, 1e15)`.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new leading digit (9.99999999995 -> 10.00000000)
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > SIG_DIGITS && decimals > 0 {
            format!("{x:.prec$}", prec = decimals - 1)
        } else {
            s
        }
    } else {
        format!("{x:.prec$e}", prec = SIG_DIGITS - 1)
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Indexed column names: `prefix0, prefix1, ...`.
pub fn cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

pub struct Table {
    writer: csv::Writer<File>,
    width: usize,
}

impl Table {
    pub fn create(path: &Path, header: Vec<String>) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        writer.write_record(&header)?;
        Ok(Self { writer, width: header.len() })
    }

    pub fn row(&mut self, fields: Vec<String>) -> Result<()> {
        debug_assert_eq!(fields.len(), self.width, "row width differs from the header");
        self.writer.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}
