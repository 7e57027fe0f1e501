//! Plain-text sequence and index-set files.
//!
//! A sequence file holds one point per line with comma-separated decimal
//! components and no header. Floats are written in shortest round-trip
//! form, so `load(save(s)) == s` bit for bit. An index-set file holds one
//! positive integer per line. Blank lines are ignored in both.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::sequence::SequencePrefix;

pub fn format_sequence(s: &SequencePrefix) -> String {
    let mut out = String::new();
    for p in s.points() {
        let row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_sequence(text: &str, origin: &Path) -> Result<SequencePrefix> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
    let mut points = Vec::new();
    let mut dim = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let coords = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(|_| err(k + 1, format!("`{}` is not a number", tok.trim()))))
            .collect::<Result<Vec<f64>>>()?;
        let d = *dim.get_or_insert(coords.len());
        if coords.len() != d {
            return Err(err(k + 1, format!("expected {d} components, found {}", coords.len())));
        }
        points.push(Point::new(coords).map_err(|e| err(k + 1, e.to_string()))?);
    }
    if points.is_empty() {
        return Err(err(0, "file holds no points".into()));
    }
    SequencePrefix::new(points)
}

pub fn load_sequence(path: &Path) -> Result<SequencePrefix> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_sequence(&text, path)
}

pub fn save_sequence(s: &SequencePrefix, path: &Path) -> Result<()> {
    fs::write(path, format_sequence(s)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn parse_index_set(text: &str, origin: &Path) -> Result<BTreeSet<usize>> {
    let mut set = BTreeSet::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<usize>() {
            Ok(i) if i > 0 => {
                set.insert(i);
            }
            _ => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    msg: format!("`{line}` is not a positive integer"),
                })
            }
        }
    }
    Ok(set)
}

pub fn load_index_set(path: &Path) -> Result<BTreeSet<usize>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_index_set(&text, path)
}

pub fn save_index_set<'a>(indices: impl IntoIterator<Item = &'a usize>, path: &Path) -> Result<()> {
    let text: String = indices.into_iter().map(|i| format!("{i}\n")).collect();
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
