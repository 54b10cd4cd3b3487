//! Loading SKEL-JSON corpora from a directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use jeanie_core::skeleton::parse_skel_json;
use jeanie_core::SkeletonSequence64;

use crate::error::{CliError, CliResult};

pub const SKEL_EXT: &str = ".skel.json";
/// Optional list of label names in class-id order.
pub const CLASSES_FILE: &str = "classes.json";

pub fn load_sequence(path: &Path) -> CliResult<SkeletonSequence64> {
    let bytes = fs::read(path).map_err(|e| CliError::data(path, e))?;
    parse_skel_json(&bytes).map_err(|e| CliError::data(path, e))
}

#[derive(Debug)]
pub struct Corpus {
    pub files: Vec<PathBuf>,
    pub sequences: Vec<SkeletonSequence64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Loads every `*.skel.json` in `dir`, sorted by file name. Labels map to
/// class ids through `classes.json` when present, otherwise through the
/// sorted set of labels found.
pub fn load_corpus(dir: &Path) -> CliResult<Corpus> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::data(dir, e))?.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SKEL_EXT)) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::data(dir, format!("no {SKEL_EXT} files")));
    }
    let sequences = files.iter().map(|f| load_sequence(f)).collect::<CliResult<Vec<_>>>()?;
    let graph = sequences[0].graph();
    for (f, s) in files.iter().zip(&sequences) {
        if s.graph() != graph {
            return Err(CliError::data(f, format!("skeleton graph differs from {}", files[0].display())));
        }
    }
    let names: Vec<&str> = files
        .iter()
        .zip(&sequences)
        .map(|(f, s)| s.label().ok_or_else(|| CliError::data(f, "missing label")))
        .collect::<CliResult<_>>()?;

    let classes_path = dir.join(CLASSES_FILE);
    let class_names: Vec<String> = if classes_path.exists() {
        let text = fs::read_to_string(&classes_path).map_err(|e| CliError::data(&classes_path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(&classes_path, e))?
    } else {
        names.iter().map(|n| n.to_string()).collect::<BTreeSet<_>>().into_iter().collect()
    };
    let labels = files
        .iter()
        .zip(&names)
        .map(|(f, n)| {
            class_names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| CliError::data(f, format!("label `{n}` not listed in {CLASSES_FILE}")))
        })
        .collect::<CliResult<_>>()?;
    Ok(Corpus { files, sequences, labels, class_names })
}

/// File name without the SKEL-JSON extension.
pub fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(SKEL_EXT).map(str::to_string).unwrap_or(name)
}
