//! FMDEMB v1 interchange format.
//!
//! ```text
//! FMDEMB 1 <dim>
//! <song_id>\t<v1> <v2> ... <vdim>
//! ```
//!
//! UTF-8, LF line endings, one tab after the id, single spaces between
//! values. Values are written in the shortest decimal form that parses
//! back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use super::{EmbedError, EmbeddingMatrix};

pub const FMDEMB_MAGIC: &str = "FMDEMB";

pub fn render_embeddings(m: &EmbeddingMatrix) -> String {
    let mut out = format!("{FMDEMB_MAGIC} 1 {}\n", m.dim());
    for (i, id) in m.ids().iter().enumerate() {
        out.push_str(id);
        out.push('\t');
        for (j, v) in m.matrix().row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingMatrix, EmbedError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(EmbedError::BadMagic { line: 1 })?;
    let dim = match header.split(' ').collect::<Vec<_>>().as_slice() {
        [FMDEMB_MAGIC, "1", dim] => dim.parse::<usize>().ok().filter(|&d| d > 0),
        _ => None,
    }
    .ok_or(EmbedError::BadMagic { line: 1 })?;

    let mut rows = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut lines = lines.peekable();
    while let Some((line, record)) = lines.next() {
        if record.is_empty() && lines.peek().is_none() {
            break; // trailing newline
        }
        let malformed = |reason: &str| EmbedError::MalformedRecord { line, reason: reason.into() };
        let (id, values) = record.split_once('\t').ok_or_else(|| malformed("missing tab after song id"))?;
        if id.is_empty() {
            return Err(malformed("empty song id"));
        }
        let fields: Vec<&str> = if values.is_empty() { Vec::new() } else { values.split(' ').collect() };
        if fields.len() != dim {
            return Err(EmbedError::DimMismatch { line, expected: dim, found: fields.len() });
        }
        let mut v = Vec::with_capacity(dim);
        for f in fields {
            let x: f64 = f.parse().map_err(|_| malformed(&format!("bad number {f:?}")))?;
            if !x.is_finite() {
                return Err(EmbedError::NonFiniteValue { line });
            }
            v.push(x);
        }
        if !seen.insert(id.to_string()) {
            return Err(EmbedError::DuplicateSongId(id.to_string()));
        }
        rows.push((id.to_string(), v));
    }
    EmbeddingMatrix::new(dim, rows)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    let text = std::fs::read_to_string(path).map_err(|source| EmbedError::Io { path: path.display().to_string(), source })?;
    parse_embeddings(&text)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbedError> {
    std::fs::write(path, render_embeddings(m)).map_err(|source| EmbedError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_3x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = (0..3)
            .map(|i| (format!("song{i}.mid"), (0..4).map(|_| rng.random::<f64>() * 1e3 - 500.0).collect()))
            .collect();
        let m = EmbeddingMatrix::new(4, rows).unwrap();
        let text = render_embeddings(&m);
        assert_eq!(parse_embeddings(&text).unwrap(), m);
    }

    #[test]
    fn extreme_values_round_trip() {
        let vals = vec![0.0, -0.0, 1e-310, f64::MAX, f64::MIN_POSITIVE, 0.1 + 0.2, -1.0 / 3.0];
        let m = EmbeddingMatrix::new(vals.len(), vec![("x".into(), vals.clone())]).unwrap();
        let back = parse_embeddings(&render_embeddings(&m)).unwrap();
        for (a, b) in vals.iter().zip(back.row(0).iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn exact_text() {
        let m = EmbeddingMatrix::new(2, vec![("a".into(), vec![1.0, 0.5])]).unwrap();
        assert_eq!(render_embeddings(&m), "FMDEMB 1 2\na\t1.0 0.5\n");
    }

    #[test]
    fn short_record() {
        let err = parse_embeddings("FMDEMB 1 4\na\t1 2 3\n").unwrap_err();
        assert!(matches!(err, EmbedError::DimMismatch { line: 2, expected: 4, found: 3 }));
    }

    #[test]
    fn nan_value() {
        let err = parse_embeddings("FMDEMB 1 2\na\t1 nan\n").unwrap_err();
        assert!(matches!(err, EmbedError::NonFiniteValue { line: 2 }));
        let err = parse_embeddings("FMDEMB 1 1\na\tinf\n").unwrap_err();
        assert!(matches!(err, EmbedError::NonFiniteValue { line: 2 }));
    }

    #[test]
    fn bad_headers() {
        for h in ["", "FMDEMB 2 4\n", "FMDEMB 1 0\n", "EMB 1 4\n", "FMDEMB 1 x\n", "FMDEMB  1 4\n"] {
            assert!(matches!(parse_embeddings(h), Err(EmbedError::BadMagic { line: 1 })), "{h:?}");
        }
    }

    #[test]
    fn duplicate_ids() {
        let err = parse_embeddings("FMDEMB 1 1\na\t1\na\t2\n").unwrap_err();
        assert!(matches!(err, EmbedError::DuplicateSongId(id) if id == "a"));
    }

    #[test]
    fn malformed_records() {
        for text in ["FMDEMB 1 1\nno-tab 1\n", "FMDEMB 1 1\n\t1\n", "FMDEMB 1 1\na\tone\n", "FMDEMB 1 1\n\na\t1\n"] {
            assert!(matches!(parse_embeddings(text), Err(EmbedError::MalformedRecord { .. })), "{text:?}");
        }
    }

    #[test]
    fn header_only_is_empty_matrix() {
        let m = parse_embeddings("FMDEMB 1 3\n").unwrap();
        assert_eq!((m.len(), m.dim()), (0, 3));
    }
}
