//! Plain-text label files: one integer (`0` non-tree, `1` tree) per line,
//! row-aligned with a columnar cloud.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cloud::Label;
use crate::error::{Error, Result};

pub fn parse_labels(text: &str, expected: usize) -> Result<Vec<Label>> {
    let mut out = Vec::with_capacity(expected);
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.len() != expected {
        return Err(Error::LengthMismatch(format!("label file has {} lines, cloud has {expected} points", lines.len())));
    }
    for (i, line) in lines.iter().enumerate() {
        let label = match line.trim() {
            "0" => Label::NonTree,
            "1" => Label::Tree,
            other => return Err(Error::InvalidLabel { line: i + 1, token: other.to_string() }),
        };
        out.push(label);
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>, expected: usize) -> Result<Vec<Label>> {
    parse_labels(&fs::read_to_string(path)?, expected)
}

pub fn format_labels(labels: &[Label]) -> Result<String> {
    let mut s = String::with_capacity(labels.len() * 2);
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::NonTree => s.push_str("0\n"),
            Label::Tree => s.push_str("1\n"),
            Label::Unlabeled => {
                return Err(Error::InvalidLabel { line: i + 1, token: "unlabeled".into() });
            }
        }
    }
    Ok(s)
}

pub fn write_labels(labels: &[Label], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_labels(labels)?)?;
    Ok(())
}

/// CSV with one `p_nontree,p_tree` row per point.
pub fn format_probabilities(probs: &[[f64; 2]]) -> String {
    let mut s = String::from("p_nontree,p_tree\n");
    for p in probs {
        let _ = writeln!(s, "{:.9},{:.9}", p[0], p[1]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tolerates_trailing_blank_line() {
        let l = parse_labels("1\n0\n1\n\n", 3).unwrap();
        assert_eq!(l, vec![Label::Tree, Label::NonTree, Label::Tree]);
    }

    #[test]
    fn count_mismatch() {
        assert!(matches!(parse_labels("1\n0\n", 3), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn invalid_token() {
        match parse_labels("1\n2\n", 2) {
            Err(Error::InvalidLabel { line, token }) => {
                assert_eq!(line, 2);
                assert_eq!(token, "2");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn format_rejects_unlabeled() {
        assert!(format_labels(&[Label::Unlabeled]).is_err());
        assert_eq!(format_labels(&[Label::Tree, Label::NonTree]).unwrap(), "1\n0\n");
    }
}
