use std::io::{self, Write};

use thiserror::Error;

use super::{JointState, TrajectorySample};
use crate::geometry::PerJoint;

pub const CSV_HEADER: &str = "t,q1_pos,q1_vel,q1_acc,q2_pos,q2_vel,q2_acc,q3_pos,q3_vel,q3_acc";

const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("failed to write trajectory CSV")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Formats `x` with 12 significant digits, `%g` style: fixed notation for
/// decimal exponents in [−5, 12), scientific otherwise, trailing zeros dropped.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_row(out: &mut impl Write, s: &TrajectorySample) -> io::Result<()> {
    let mut fields = Vec::with_capacity(10);
    fields.push(format_significant(s.t));
    for (_, j) in s.joints.iter() {
        fields.push(format_significant(j.pos));
        fields.push(format_significant(j.vel));
        fields.push(format_significant(j.acc));
    }
    writeln!(out, "{}", fields.join(","))
}

/// Writes the header and one row per sample.
pub fn export_csv(samples: &[TrajectorySample], mut out: impl Write) -> Result<(), CsvError> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in samples {
        write_row(&mut out, s)?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_csv_string(samples: &[TrajectorySample]) -> String {
    let mut buf = Vec::new();
    export_csv(samples, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Parses a CSV produced by [`export_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<TrajectorySample>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(CsvError::Parse { line: 1, reason: "missing or unexpected header".into() }),
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let err = |reason: String| CsvError::Parse { line: idx + 1, reason };
        let values = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", values.len())));
        }
        let js = |k: usize| JointState { pos: values[k], vel: values[k + 1], acc: values[k + 2] };
        samples.push(TrajectorySample { t: values[0], joints: PerJoint { q1: js(1), q2: js(4), q3: js(7) } });
    }
    Ok(samples)
}
