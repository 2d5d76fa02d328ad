//! ABC tunebook loading and the cleanup applied before embedding.
//!
//! Two cleanup steps are applied: leading spaces and tabs are stripped
//! from every body line, and a `V:1` voice declaration is inserted after
//! the `K:` field when the tune declares no voice at all.

mod interp;

use std::fmt;

pub use interp::{tune_notes, ABC_TICKS_PER_QUARTER};

/// One line of the tune header (everything from `X:` through `K:`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeaderLine {
    /// `T:My tune` is `Field { letter: 'T', value: "My tune" }`.
    Field { letter: char, value: String },
    /// A `%` line; the text after the `%`.
    Comment(String),
}

impl HeaderLine {
    pub fn field(&self, letter: char) -> Option<&str> {
        match self {
            HeaderLine::Field { letter: l, value } if *l == letter => Some(value),
            _ => None,
        }
    }
}

impl fmt::Display for HeaderLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeaderLine::Field { letter, value } => write!(f, "{letter}:{value}"),
            HeaderLine::Comment(text) => write!(f, "%{text}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbcTune {
    /// Starts with `X:` and ends with `K:`.
    pub header_fields: Vec<HeaderLine>,
    /// Music code after the `K:` line, never empty.
    pub body_lines: Vec<String>,
    /// `<source>#<n>` where `n` counts `X:` blocks in the source from 0.
    pub source_id: String,
}

impl AbcTune {
    /// First value of a header field.
    pub fn header(&self, letter: char) -> Option<&str> {
        self.header_fields.iter().find_map(|h| h.field(letter))
    }

    pub fn has_voice(&self) -> bool {
        self.header('V').is_some()
            || self.body_lines.iter().any(|l| {
                let l = l.trim_start_matches([' ', '\t']);
                l.starts_with("V:") || l.contains("[V:")
            })
    }

    /// ABC text of the tune, one LF-terminated line per header field and
    /// body line.
    pub fn to_abc(&self) -> String {
        let mut out = String::new();
        for h in &self.header_fields {
            out.push_str(&h.to_string());
            out.push('\n');
        }
        for l in &self.body_lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tunebook {
    pub tunes: Vec<AbcTune>,
    /// `X:` blocks rejected for a missing `K:` field or an empty body.
    pub skipped_count: usize,
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn field_of(line: &str) -> Option<(char, &str)> {
    let line = line.trim_start_matches([' ', '\t']);
    let mut chars = line.chars();
    let letter = chars.next()?;
    if letter.is_ascii_alphabetic() && chars.next() == Some(':') {
        Some((letter, &line[2..]))
    } else {
        None
    }
}

/// Splits a multi-tune ABC file into tunes.
///
/// A tune starts at an `X:` line. Its header runs through the first `K:`
/// line; the body runs from there to the next blank line. Text outside
/// tunes is ignored. Blocks with no `K:`, with a non-field line inside
/// the header, or with an empty body are counted in `skipped_count`.
pub fn split_tunebook(text: &str, source: &str) -> Tunebook {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if matches!(field_of(line), Some(('X', _))) {
            blocks.push(vec![line]);
        } else if let Some(block) = blocks.last_mut() {
            block.push(line);
        }
    }

    let mut book = Tunebook::default();
    for (index, block) in blocks.iter().enumerate() {
        match parse_block(block) {
            Some((header_fields, body_lines)) => book.tunes.push(AbcTune {
                header_fields,
                body_lines,
                source_id: format!("{source}#{index}"),
            }),
            None => {
                log::debug!("{source}: skipping tune block {index}");
                book.skipped_count += 1;
            }
        }
    }
    book
}

fn parse_block(block: &[&str]) -> Option<(Vec<HeaderLine>, Vec<String>)> {
    let mut header = Vec::new();
    let mut lines = block.iter();
    loop {
        let line = lines.next()?;
        if is_blank(line) {
            return None;
        }
        let trimmed = line.trim_start_matches([' ', '\t']);
        if let Some(comment) = trimmed.strip_prefix('%') {
            header.push(HeaderLine::Comment(comment.to_string()));
            continue;
        }
        let (letter, value) = field_of(line)?;
        header.push(HeaderLine::Field { letter, value: value.to_string() });
        if letter == 'K' {
            break;
        }
    }
    let body: Vec<String> = lines.take_while(|l| !is_blank(l)).map(|l| l.to_string()).collect();
    if body.is_empty() {
        return None;
    }
    Some((header, body))
}

/// Renders tunes separated by one blank line. Inverse of
/// [`split_tunebook`] for well-formed tunes.
pub fn join_tunebook(tunes: &[AbcTune]) -> String {
    tunes.iter().map(AbcTune::to_abc).collect::<Vec<_>>().join("\n")
}

/// Strips leading spaces and tabs from body lines and, when the tune has
/// no `V:` field anywhere, inserts `V:1` right after the `K:` field.
/// Idempotent.
pub fn clean_abc(tune: &AbcTune) -> AbcTune {
    let mut out = tune.clone();
    for line in &mut out.body_lines {
        let stripped = line.trim_start_matches([' ', '\t']);
        if stripped.len() != line.len() {
            *line = stripped.to_string();
        }
    }
    if !out.has_voice() {
        out.body_lines.insert(0, "V:1".to_string());
    }
    out
}
