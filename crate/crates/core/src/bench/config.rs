use std::collections::HashSet;

use crate::error::{Error, Result};

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// keys must be identifiers and may appear only once.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        if !is_identifier(key) {
            return Err(err(format!("invalid key {key:?}")));
        }
        if value.is_empty() {
            return Err(err(format!("missing value for {key}")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key {key}")));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let text = "# planning\n gamma = 0.3 \n\nT=10 # shorter\n";
        let pairs = parse_config(text).unwrap();
        assert_eq!(pairs, vec![("gamma".into(), "0.3".into()), ("T".into(), "10".into())]);
    }

    #[test]
    fn reports_line_numbers() {
        match parse_config("a=1\n\nb 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("a=1\na=2").is_err());
        assert!(parse_config("1a=1").is_err());
        assert!(parse_config("a=").is_err());
        assert!(parse_config("").unwrap().is_empty());
    }
}
