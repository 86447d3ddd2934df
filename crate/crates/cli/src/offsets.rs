//! Offset files: one value per line, or a CSV with an `offset_m` column
//! such as the `w_best.csv` written by `optimize`.

use crate::error::CliError;
use raceline::track::{NodeSet, OffsetVector};
use std::io::Write;
use std::path::Path;

pub fn parse_offsets(text: &str) -> Result<OffsetVector, CliError> {
    let mut column = None;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if column.is_none() && values.is_empty() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            column = Some(fields.iter().position(|f| *f == "offset_m").ok_or_else(|| {
                CliError::Config(format!("offsets header on line {} has no offset_m column", i + 1))
            })?);
            continue;
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| CliError::Config(format!("line {}: '{f}' is not a number", i + 1)))
        };
        match column {
            Some(c) => values.push(parse(fields.get(c).copied().unwrap_or(""))?),
            None => {
                for f in fields.into_iter().filter(|f| !f.is_empty()) {
                    values.push(parse(f)?);
                }
            }
        }
    }
    Ok(OffsetVector(values))
}

pub fn read_offsets(path: &Path) -> Result<OffsetVector, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(format!("cannot read offsets file {}", path.display())))?;
    parse_offsets(&text)
}

/// `node,s_m,offset_m,half_width_m`, offsets printed round-trip exact.
pub fn write_offsets<W: Write>(mut out: W, nodes: &NodeSet, w: &OffsetVector) -> std::io::Result<()> {
    writeln!(out, "node,s_m,offset_m,half_width_m")?;
    for (i, v) in w.as_slice().iter().enumerate() {
        writeln!(out, "{i},{},{v},{}", nodes.arc_positions[i], nodes.half_widths[i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_tabular_files() {
        assert_eq!(parse_offsets("0.1\n-0.2\n\n0\n").unwrap().0, vec![0.1, -0.2, 0.0]);
        assert_eq!(parse_offsets("0.1, 0.2,0.3").unwrap().0, vec![0.1, 0.2, 0.3]);
        let csv = "node,s_m,offset_m,half_width_m\n0,0,0.05,0.1\n1,2.5,-0.07,0.1\n";
        assert_eq!(parse_offsets(csv).unwrap().0, vec![0.05, -0.07]);
    }

    #[test]
    fn bad_values_name_the_line() {
        let err = parse_offsets("0.1\nabc\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_offsets("a,b\n1,2\n").is_err());
    }
}
