//! Line-delimited JSON dataset files.
//!
//! ```text
//! {"format_version":1,"d":2,"N":1}
//! {"snippet":{"id":0,"video":0,"objects":[0],"gt_label":0}}
//! {"object":{"id":0,"snippet":0,"features":[1.0000000000000000e0,-2.5000000000000000e-1]}}
//! ```
//!
//! Features are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uvad_core::{Dataset, ObjectRecord, SnippetRecord};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: parse error at byte offset {offset} (line {line}): {message}")]
    Parse { path: PathBuf, offset: usize, line: usize, message: String },
    #[error("{path}: unsupported format version {found} (this build reads version {DATASET_FORMAT_VERSION})")]
    Version { path: PathBuf, found: u32 },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: uvad_core::Error },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnippetLine {
    id: usize,
    video: usize,
    objects: Vec<usize>,
    gt_label: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectLine {
    id: usize,
    snippet: usize,
    features: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Snippet(SnippetLine),
    Object(ObjectLine),
}

fn write_f64(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String");
}

pub fn to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    let header = Header { format_version: DATASET_FORMAT_VERSION, d: ds.d(), n: ds.n_snippets() };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for s in ds.snippet_records() {
        let line = SnippetLine { id: s.snippet_id, video: s.video_id, objects: s.object_ids, gt_label: s.gt_label };
        out.push_str("{\"snippet\":");
        out.push_str(&serde_json::to_string(&line).expect("snippet serializes"));
        out.push_str("}\n");
    }
    for o in ds.training().objects() {
        write!(out, "{{\"object\":{{\"id\":{},\"snippet\":{},\"features\":[", o.object_id, o.snippet_id).unwrap();
        for (i, &x) in o.features.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_f64(&mut out, x);
        }
        out.push_str("]}}\n");
    }
    out
}

pub fn save(ds: &Dataset, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_string(ds))
}

pub fn from_str(text: &str, path: &Path) -> Result<Dataset, LoadError> {
    let parse_err = |offset: usize, line: usize, message: String| LoadError::Parse {
        path: path.to_path_buf(),
        offset,
        line,
        message,
    };
    let mut offset = 0;
    let mut header: Option<Header> = None;
    let mut snippets = Vec::new();
    let mut objects = Vec::new();
    for (idx, raw) in text.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let start = offset;
        offset += raw.len();
        let body = raw.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        if !raw.ends_with('\n') {
            // A final line without its newline means the file was cut short,
            // even if what remains happens to parse.
            if serde_json::from_str::<serde_json::Value>(body).is_ok() {
                return Err(parse_err(offset, line_no, "unexpected end of file: last record is not terminated".into()));
            }
        }
        let located = |e: serde_json::Error| {
            // serde_json columns are 1-based character positions on the line.
            let col_bytes = body.char_indices().nth(e.column().saturating_sub(1)).map_or(body.len(), |(b, _)| b);
            parse_err(start + col_bytes, line_no, e.to_string())
        };
        match &header {
            None => {
                let v: serde_json::Value = serde_json::from_str(body).map_err(located)?;
                if let Some(found) = v.get("format_version").and_then(|x| x.as_u64()) {
                    if found != u64::from(DATASET_FORMAT_VERSION) {
                        return Err(LoadError::Version { path: path.to_path_buf(), found: found as u32 });
                    }
                }
                header =
                    Some(serde_json::from_value(v).map_err(|e| parse_err(start, line_no, format!("bad header: {e}")))?);
            }
            Some(_) => match serde_json::from_str::<Record>(body).map_err(located)? {
                Record::Snippet(s) => snippets.push(SnippetRecord {
                    snippet_id: s.id,
                    video_id: s.video,
                    object_ids: s.objects,
                    gt_label: s.gt_label,
                }),
                Record::Object(o) => {
                    objects.push(ObjectRecord { object_id: o.id, snippet_id: o.snippet, features: o.features })
                }
            },
        }
    }
    let header = header.ok_or_else(|| parse_err(0, 1, "empty file: missing header".into()))?;
    if snippets.len() != header.n {
        return Err(parse_err(
            offset,
            text.lines().count(),
            format!("unexpected end of file: header declares {} snippets, found {}", header.n, snippets.len()),
        ));
    }
    let expected_objects: usize = snippets.iter().map(|s| s.object_ids.len()).sum();
    if objects.len() != expected_objects {
        return Err(parse_err(
            offset,
            text.lines().count(),
            format!("unexpected end of file: snippets reference {expected_objects} objects, found {}", objects.len()),
        ));
    }
    Dataset::new(header.d, snippets, objects).map_err(|source| LoadError::Invalid { path: path.to_path_buf(), source })
}

pub fn load(path: &Path) -> Result<Dataset, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    from_str(&text, path)
}
