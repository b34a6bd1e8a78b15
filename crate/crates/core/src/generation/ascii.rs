use std::collections::BTreeMap;
use std::sync::LazyLock;

const TABLE: &str = include_str!("../../data/ascii-map.tsv");

static MAP: LazyLock<BTreeMap<char, String>> = LazyLock::new(|| parse_table(TABLE));

fn parse_table(text: &str) -> BTreeMap<char, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (cp, rep) = line
            .split_once('\t')
            .unwrap_or_else(|| panic!("ascii map line {}: missing tab", n + 1));
        let c = u32::from_str_radix(cp.trim(), 16)
            .ok()
            .and_then(char::from_u32)
            .unwrap_or_else(|| panic!("ascii map line {}: bad codepoint {cp:?}", n + 1));
        map.insert(c, rep.replace("\\x20", " "));
    }
    map
}

/// The shipped code point → ASCII replacement table.
pub fn ascii_map() -> &'static BTreeMap<char, String> {
    &MAP
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsciiOutput {
    pub text: String,
    /// Non-ASCII characters with no table entry, each replaced by `?`.
    pub unmapped: Vec<char>,
}

pub fn ascii_normalize(text: &str) -> AsciiOutput {
    if text.is_ascii() {
        return AsciiOutput {
            text: text.to_string(),
            unmapped: Vec::new(),
        };
    }
    let mut out = String::with_capacity(text.len());
    let mut unmapped = Vec::new();
    for c in text.chars() {
        if c.is_ascii() {
            out.push(c);
        } else if let Some(rep) = MAP.get(&c) {
            out.push_str(rep);
        } else {
            out.push('?');
            unmapped.push(c);
        }
    }
    AsciiOutput {
        text: out,
        unmapped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_entries() {
        assert_eq!(ascii_normalize("\u{201C}hi\u{201D}").text, "\"hi\"");
        assert_eq!(ascii_normalize("a\u{2014}b\u{2013}c").text, "a--b-c");
        assert_eq!(ascii_normalize("\u{FB01}ne").text, "fine");
        assert_eq!(ascii_normalize("x\u{00A0}y").text, "x y");
        assert_eq!(ascii_normalize("wait\u{2026}").text, "wait...");
        assert_eq!(ascii_map().len(), 15);
    }

    #[test]
    fn unmapped_become_question_marks() {
        let out = ascii_normalize("caf\u{e9}");
        assert_eq!(out.text, "caf?");
        assert_eq!(out.unmapped, vec!['\u{e9}']);
    }

    #[test]
    fn idempotent() {
        let once = ascii_normalize("\u{2018}q\u{2019} \u{FB03} \u{1F600}").text;
        assert_eq!(ascii_normalize(&once).text, once);
    }
}
