//! Corpus, detection, label and result files.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Detection, Example, Label};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// JSON-lines corpus. Ids must be unique and texts nonempty after trimming.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in read(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example =
            serde_json::from_str(line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        if ex.text.trim().is_empty() {
            return Err(Error::parse(path, n + 1, format!("example {:?} has empty text", ex.id)));
        }
        if !seen.insert(ex.id.clone()) {
            return Err(Error::parse(path, n + 1, format!("duplicate id {:?}", ex.id)));
        }
        out.push(ex);
    }
    Ok(out)
}

/// Detections keyed by image id.
pub type Detections = BTreeMap<String, Vec<Detection>>;

pub fn load_detections(path: impl AsRef<Path>) -> Result<Detections> {
    let path = path.as_ref();
    let dets: Detections = serde_json::from_str(&read(path)?)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    for (image, list) in &dets {
        for d in list {
            if d.object_label.trim().is_empty() {
                return Err(Error::parse(path, 0, format!("empty object label for image {image:?}")));
            }
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::parse(path, 0, format!("confidence {} out of range for image {image:?}", d.confidence)));
            }
        }
    }
    Ok(dets)
}

/// One label per line; blank lines are skipped. A line may also be a JSON
/// object with a `label` key.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (n, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let raw = if line.starts_with('{') {
            let v: Value = serde_json::from_str(line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            v.get("label")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::parse(path, n + 1, "missing label"))?
                .to_string()
        } else {
            line.to_string()
        };
        out.push(raw.parse().map_err(|e: String| Error::parse(path, n + 1, e))?);
    }
    Ok(out)
}

/// Augmented texts keyed by example id. Lines carry `augmented` (augmenter
/// output) or `text` (any corpus-format file produced elsewhere).
pub fn load_augmented_texts(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    for (n, line) in read(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        let id = v
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(path, n + 1, "missing id"))?;
        let text = v
            .get("augmented")
            .or_else(|| v.get("text"))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(path, n + 1, "missing augmented/text"))?;
        out.insert(id.to_string(), text.to_string());
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}
