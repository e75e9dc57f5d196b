//! Text persistence for dataset splits.
//!
//! ```text
//! vocab=<V> len=<L> dim=<n> components=<K> count=<N>
//! <label>\t<z_1>,…,<z_n>\t<t_1> <t_2> … <t_L>
//! ```
//!
//! `count` is optional on read; when present it must match the number of
//! example lines. Every line, including the last, ends with a newline, so a
//! file cut mid-line is detected.

use std::fmt::Write as _;
use std::path::Path;

use super::{Example, Split, SynthDataset};
use crate::error::{Error, Result};

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

pub fn format_split(split: &Split) -> String {
    let mut out = format!(
        "vocab={} len={} dim={} components={} count={}\n",
        split.vocab,
        split.len,
        split.dim,
        split.components,
        split.len()
    );
    for e in &split.examples {
        let z: Vec<String> = e.z.iter().map(|v| format!("{v}")).collect();
        let t: Vec<String> = e.tokens.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}\t{}\t{}", e.label, z.join(","), t.join(" "));
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Header {
    vocab: usize,
    len: usize,
    dim: usize,
    components: usize,
    count: Option<usize>,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut fields = [None; 5];
    const KEYS: [&str; 5] = ["vocab", "len", "dim", "components", "count"];
    for part in line.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| perr(1, format!("header field {part:?} is not key=value")))?;
        let idx = KEYS
            .iter()
            .position(|&key| key == k)
            .ok_or_else(|| perr(1, format!("unknown header key {k:?}")))?;
        let v: usize = v.parse().map_err(|_| perr(1, format!("header value {v:?} is not an integer")))?;
        fields[idx] = Some(v);
    }
    let need = |i: usize| fields[i].filter(|&v| v > 0).ok_or_else(|| perr(1, format!("header lacks a positive {}", KEYS[i])));
    Ok(Header {
        vocab: need(0)?,
        len: need(1)?,
        dim: need(2)?,
        components: need(3)?,
        count: fields[4],
    })
}

pub fn parse_split(text: &str) -> Result<Split> {
    if text.is_empty() {
        return Err(perr(1, "empty dataset file"));
    }
    if !text.ends_with('\n') {
        let last = text.lines().count();
        return Err(perr(last, "file ends mid-line (truncated)"));
    }
    let mut lines = text.lines();
    let header = parse_header(lines.next().unwrap_or_default())?;
    let mut examples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let no = idx + 2;
        let mut parts = line.split('\t');
        let (Some(label), Some(z), Some(tokens), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(perr(no, "expected three tab-separated fields"));
        };
        let label: usize = label.parse().map_err(|_| perr(no, format!("bad label {label:?}")))?;
        if label >= header.components {
            return Err(perr(no, format!("label {label} ≥ components {}", header.components)));
        }
        let z: Vec<f64> = z
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|_| perr(no, format!("bad latent value {s:?}"))))
            .collect::<Result<_>>()?;
        if z.len() != header.dim {
            return Err(perr(no, format!("{} latent values, header says dim={}", z.len(), header.dim)));
        }
        let tokens: Vec<usize> = tokens
            .split(' ')
            .map(|s| s.parse::<usize>().map_err(|_| perr(no, format!("bad token {s:?}"))))
            .collect::<Result<_>>()?;
        if tokens.len() != header.len {
            return Err(perr(no, format!("{} tokens, header says len={}", tokens.len(), header.len)));
        }
        if let Some(t) = tokens.iter().find(|&&t| t >= header.vocab) {
            return Err(perr(no, format!("token {t} ≥ vocab {}", header.vocab)));
        }
        examples.push(Example { label, z, tokens });
    }
    if let Some(count) = header.count {
        if count != examples.len() {
            return Err(perr(
                examples.len() + 1,
                format!("header says count={count}, found {} examples", examples.len()),
            ));
        }
    }
    Ok(Split {
        vocab: header.vocab,
        len: header.len,
        dim: header.dim,
        components: header.components,
        examples,
    })
}

/// Writes `train.txt`, `val.txt` and `test.txt` into `dir`.
pub fn persist_dataset(ds: &SynthDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, split) in SPLIT_NAMES.iter().zip(ds.splits()) {
        split.validate()?;
        std::fs::write(dir.join(format!("{name}.txt")), format_split(split))?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<SynthDataset> {
    let read = |name: &str| -> Result<Split> {
        let text = std::fs::read_to_string(dir.join(format!("{name}.txt")))?;
        parse_split(&text)
    };
    let (train, val, test) = (read("train")?, read("val")?, read("test")?);
    let extents = |s: &Split| (s.vocab, s.len, s.dim, s.components);
    if extents(&train) != extents(&val) || extents(&train) != extents(&test) {
        return Err(Error::InvalidInput("dataset splits disagree on their extents".into()));
    }
    Ok(SynthDataset { train, val, test })
}
