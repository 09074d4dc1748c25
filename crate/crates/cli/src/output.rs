use std::io::Write;
use std::path::Path;

use cacheopt::Placement;
use serde::Serialize;

use crate::CliError;

/// Six decimals; values that round to zero print without a sign.
pub fn fmt6(v: f64) -> String {
    if v.abs() < 5e-7 {
        "0.000000".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Levels as rows, files as columns.
pub fn placement_table(a: &Placement) -> String {
    let mut s = format!("{:>3}", "l");
    for n in 0..a.n_files() {
        s += &format!(" {:>10}", format!("a_{}", n + 1));
    }
    s.push('\n');
    for l in 0..=a.n_users() {
        s += &format!("{l:>3}");
        for n in 0..a.n_files() {
            s += &format!(" {:>10}", fmt6(a.a(n, l)));
        }
        s.push('\n');
    }
    s
}

pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Failed(e.to_string()))
        }
    }
}
