use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Splits leading `# key=value` lines from the table body. A comment line
/// without `=` is stored as a key with an empty value.
pub(crate) fn split_metadata(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut meta = BTreeMap::new();
    let mut rest = text;
    while let Some(line_end) = rest.find('\n').map(|i| i + 1).or((!rest.is_empty()).then_some(rest.len())) {
        let line = &rest[..line_end];
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            break;
        };
        let comment = comment.trim();
        match comment.split_once('=') {
            Some((k, v)) => meta.insert(k.trim().to_string(), v.trim().to_string()),
            None => meta.insert(comment.to_string(), String::new()),
        };
        rest = &rest[line_end..];
    }
    (meta, rest)
}

pub(crate) fn parse_f64(s: &str, field: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("bad number `{s}` in {field}")))
}
