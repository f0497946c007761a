//! JSON Lines dataset manifest.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Level, SymbolicSolution, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub kind: TaskKind,
    pub level: Level,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub input_png_path: String,
    pub target_png_path: String,
    pub solution: SymbolicSolution,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serialize one record per line, in the given order.
pub fn to_jsonl(records: &[ManifestRecord]) -> Result<String, ManifestError> {
    if records.is_empty() {
        return Err(ManifestError::EmptyManifest);
    }
    let mut seen = HashSet::with_capacity(records.len());
    let mut out = String::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(ManifestError::DuplicateId(r.id.clone()));
        }
        out.push_str(&serde_json::to_string(r).expect("manifest records always serialize"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<(), ManifestError> {
    let text = to_jsonl(records)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Parse manifest text. Line numbers in errors are 1-based; blank lines are skipped.
pub fn from_jsonl(text: &str) -> Result<Vec<ManifestRecord>, ManifestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(line)
            .map_err(|e| ManifestError::Parse { line: i + 1, message: e.to_string() })?;
        if !seen.insert(rec.id.clone()) {
            return Err(ManifestError::DuplicateId(rec.id));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(ManifestError::EmptyManifest);
    }
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, ManifestError> {
    from_jsonl(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Move;
    use proptest::prelude::*;

    fn record(i: u64) -> ManifestRecord {
        ManifestRecord {
            id: format!("maze-8-{i:016x}"),
            kind: TaskKind::Maze,
            level: Level::GridSize(8),
            seed: i,
            input_png_path: format!("inputs/maze-8-{i:016x}.png"),
            target_png_path: format!("targets/maze-8-{i:016x}.png"),
            solution: SymbolicSolution::Actions(vec![Move::R, Move::D]),
        }
    }

    #[test]
    fn single_record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.jsonl");
        write_manifest(&[record(1)], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with(r#"{"id":"maze-8-0000000000000001","kind":"maze","level":{"grid_size":8},"seed":1,"#));
        assert_eq!(read_manifest(&p).unwrap(), vec![record(1)]);
    }

    #[test]
    fn empty_and_duplicate_inputs_are_rejected() {
        assert!(matches!(to_jsonl(&[]), Err(ManifestError::EmptyManifest)));
        assert!(matches!(from_jsonl(""), Err(ManifestError::EmptyManifest)));
        assert!(matches!(
            to_jsonl(&[record(1), record(1)]),
            Err(ManifestError::DuplicateId(_))
        ));
    }

    #[test]
    fn truncated_last_line_reports_its_number() {
        let mut text = to_jsonl(&[record(1), record(2), record(3)]).unwrap();
        text.truncate(text.len() - 20);
        match from_jsonl(&text) {
            Err(ManifestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_a_parse_error() {
        let line = r#"{"id":"x","kind":"maze","level":{"grid_size":8},"seed":1,"input_png_path":"a"}"#;
        assert!(matches!(from_jsonl(line), Err(ManifestError::Parse { line: 1, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn shuffled_thousand_records_round_trip_as_a_set(perm in Just((0..1000u64).collect::<Vec<_>>()).prop_shuffle()) {
            let records: Vec<_> = perm.iter().map(|&i| record(i)).collect();
            let back = from_jsonl(&to_jsonl(&records).unwrap()).unwrap();
            prop_assert_eq!(&back, &records);
            let mut a: Vec<_> = back.iter().map(|r| r.seed).collect();
            a.sort_unstable();
            prop_assert_eq!(a, (0..1000).collect::<Vec<_>>());
        }
    }
}
