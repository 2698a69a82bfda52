//! Parameter grids given on the command line: a single value, a comma list,
//! or an inclusive range `lo:hi:step`.

use crate::CliError;

pub fn parse(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Validation(format!("--{flag} '{s}': {why}"));
    let value = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.len() {
        1 => s.split(',').map(value).collect::<Result<Vec<_>, _>>()?,
        3 => {
            let (lo, hi, step) = (value(parts[0])?, value(parts[1])?, value(parts[2])?);
            if !(step > 0.0) || hi < lo {
                return Err(bad("need lo <= hi and step > 0"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(bad("more than 10^6 points"));
            }
            (0..=n).map(|i| lo + i as f64 * step).collect()
        }
        _ => return Err(bad("expected a value, a comma list or lo:hi:step")),
    };
    if out.iter().any(|x| !x.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(out)
}

/// Lattice extents such as `18`, `4,4` or `2x2x4`.
pub fn extents(flag: &str, s: &str) -> Result<Vec<usize>, CliError> {
    let out: Result<Vec<usize>, _> = s.split([',', 'x']).map(|t| t.trim().parse::<usize>()).collect();
    match out {
        Ok(v) if (1..=3).contains(&v.len()) && v.iter().all(|&e| e > 0) => Ok(v),
        _ => Err(CliError::Validation(format!("--{flag} '{s}': expected 1 to 3 positive extents"))),
    }
}
