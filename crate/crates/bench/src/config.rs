//! Flat `key = value` configuration files.
//!
//! Keys mirror the long command line flags without the leading dashes.
//! Blank lines and lines starting with `#` are ignored.

use crate::BenchError;

/// Parses the file contents into `(key, value)` pairs in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, BenchError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(BenchError::Config(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Command line tokens equivalent to the config entries. A value of `true`
/// for a flag without argument is written as the bare flag.
pub fn config_args(entries: &[(String, String)], bare_flags: &[&str]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in entries {
        if bare_flags.contains(&k.as_str()) {
            if v == "true" {
                args.push(format!("--{k}"));
            }
        } else {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
    }
    args
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let e = parse_config("# c\ncase = sharp_layer_1d\n\norder=2\n").unwrap();
        assert_eq!(e, vec![("case".into(), "sharp_layer_1d".into()), ("order".into(), "2".into())]);
        assert!(parse_config("nonsense").is_err());
        assert!(parse_config("=3").is_err());
    }

    #[test]
    fn bare_flags() {
        let e = parse_config("galerkin = true\nq = 2").unwrap();
        assert_eq!(config_args(&e, &["galerkin"]), vec!["--galerkin", "--q", "2"]);
    }
}
