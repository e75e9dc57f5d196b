//! Text dump of posterior parameters.
//!
//! ```text
//! n=<dim>
//! mu_1,…,mu_n<TAB>var_1,…,var_n
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::PosteriorBatch;
use crate::error::{Error, Result};

pub fn format_posterior_dump(batch: &PosteriorBatch) -> String {
    let mut out = format!("n={}\n", batch.dim());
    for i in 0..batch.len() {
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}\t{}", join(batch.mean_row(i)), join(batch.var_row(i)));
    }
    out
}

fn parse_row(line_no: usize, field: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = field
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad {what} value {s:?}: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected {n} {what} values, found {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn parse_posterior_dump(text: &str) -> Result<PosteriorBatch> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty posterior dump".into(),
    })?;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("expected header `n=<dim>`, found {header:?}"),
        })?;
    let (mut means, mut vars) = (Vec::new(), Vec::new());
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (mu, var) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected `<means><TAB><variances>`".into(),
        })?;
        means.extend(parse_row(line_no, mu, n, "mean")?);
        let v = parse_row(line_no, var, n, "variance")?;
        if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("variance {bad} is not positive"),
            });
        }
        vars.extend(v);
    }
    PosteriorBatch::new(n, means, vars)
}

pub fn read_posterior_dump(path: &Path) -> Result<PosteriorBatch> {
    parse_posterior_dump(&std::fs::read_to_string(path)?)
}

pub fn write_posterior_dump(batch: &PosteriorBatch, path: &Path) -> Result<()> {
    std::fs::write(path, format_posterior_dump(batch))?;
    Ok(())
}
