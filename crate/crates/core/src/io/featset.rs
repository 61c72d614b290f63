use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::FeatureSet;
use crate::scalar::Real;

const MAGIC: &str = "FEATSET";
const VERSION: &str = "v1";

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        what: "feature set".into(),
        line,
        column,
        message: message.into(),
    }
}

/// Header `FEATSET v1 n d`, then `n` lines of `d` space-separated reals.
pub fn featset_to_text<T: Real>(f: &FeatureSet<T>) -> String {
    let mut out = format!("{MAGIC} {VERSION} {} {}\n", f.count(), f.dim());
    for i in 0..f.count() {
        let row: Vec<String> = f.row(i).iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Column of the `k`-th whitespace-separated token, 1-based.
fn token_columns(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

pub fn featset_from_text<T: Real>(text: &str) -> Result<FeatureSet<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((hl, header)) = lines.next() else {
        return Err(parse_error(1, 1, "missing FEATSET header"));
    };
    let toks = token_columns(header);
    if toks.len() != 4 || toks[0].1 != MAGIC || toks[1].1 != VERSION {
        return Err(parse_error(
            hl + 1,
            1,
            format!("expected `{MAGIC} {VERSION} n d` header"),
        ));
    }
    let num = |(col, t): (usize, &str), name: &str| {
        t.parse::<usize>()
            .map_err(|_| parse_error(hl + 1, col, format!("{name} must be a non-negative integer")))
    };
    let n = num(toks[2], "n")?;
    let d = num(toks[3], "d")?;
    let mut rows = Vec::with_capacity(n * d);
    let mut count = 0usize;
    for (ln, line) in lines {
        let toks = token_columns(line);
        if toks.len() != d {
            return Err(Error::invariant(format!(
                "feature set line {} has {} values but the header says d = {d}",
                ln + 1,
                toks.len()
            )));
        }
        for (col, t) in toks {
            let v: f64 = t
                .parse()
                .map_err(|_| parse_error(ln + 1, col, format!("`{t}` is not a number")))?;
            rows.push(T::lit(v));
        }
        count += 1;
    }
    if count != n {
        return Err(Error::invariant(format!(
            "feature set header says n = {n} but {count} rows follow"
        )));
    }
    FeatureSet::new(n, d, rows)
}

/// One JSON array of reals per line.
pub fn featset_from_jsonl<T: Real>(text: &str) -> Result<FeatureSet<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Vec<f64> = serde_json::from_str(line).map_err(|e| parse_error(i + 1, e.column(), e.to_string()))?;
        rows.push(v.into_iter().map(T::lit).collect());
    }
    if rows.is_empty() {
        return Err(Error::invariant("feature set has no rows"));
    }
    FeatureSet::from_rows(&rows)
}

pub fn featset_to_jsonl<T: Real>(f: &FeatureSet<T>) -> String {
    (0..f.count())
        .map(|i| {
            let row: Vec<f64> = f.row(i).iter().map(|v| v.as_f64()).collect();
            serde_json::to_string(&row).expect("serializable") + "\n"
        })
        .collect()
}

/// `.jsonl` files are read as JSON rows, anything else as the text format.
pub fn read_featset<T: Real>(path: impl AsRef<Path>) -> Result<FeatureSet<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        featset_from_jsonl(&text)
    } else {
        featset_from_text(&text)
    }
}

pub fn write_featset<T: Real>(path: impl AsRef<Path>, f: &FeatureSet<T>) -> Result<()> {
    let path = path.as_ref();
    let text = if path.extension().is_some_and(|e| e == "jsonl") {
        featset_to_jsonl(f)
    } else {
        featset_to_text(f)
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureSet<f64> {
        FeatureSet::from_rows(&[vec![0.1, -2.0, 1e-20], vec![1.0 / 3.0, 4.0, -0.0]]).unwrap()
    }

    #[test]
    fn text_round_trip_exact() {
        let f = sample();
        let text = featset_to_text(&f);
        assert!(text.starts_with("FEATSET v1 2 3\n"));
        assert_eq!(featset_from_text::<f64>(&text).unwrap(), f);
    }

    #[test]
    fn jsonl_round_trip_exact() {
        let f = sample();
        assert_eq!(featset_from_jsonl::<f64>(&featset_to_jsonl(&f)).unwrap(), f);
    }

    #[test]
    fn header_mismatches_rejected() {
        assert!(featset_from_text::<f64>("FEATSET v1 3 2\n1 2\n3 4\n")
            .unwrap_err()
            .to_string()
            .contains("n = 3"));
        assert!(featset_from_text::<f64>("FEATSET v1 1 3\n1 2\n").is_err());
        assert!(featset_from_text::<f64>("FEATSET v2 1 1\n1\n").is_err());
        let e = featset_from_text::<f64>("FEATSET v1 1 2\n1 abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 3, .. }), "{e}");
        assert!(featset_from_text::<f64>("FEATSET v1 0 2\n").is_err());
        assert!(featset_from_jsonl::<f64>("[1, 2]\n[3]\n").is_err());
    }
}
