//! CSV and JSON writers. Floats are written in shortest round-trip form, so
//! every file parses back to the same values.

use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

/// Opens `path` for writing, refusing to replace an existing file unless `force`.
pub fn create(path: &Path, force: bool) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut o = OpenOptions::new();
    o.write(true);
    if force {
        o.create(true).truncate(true);
    } else {
        o.create_new(true);
    }
    o.open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::AlreadyExists => Error::Exists(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    create(path, force)?.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T, force: bool) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes(), force)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format("<csv>", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("<csv>", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], force: bool) -> Result<()> {
    write_bytes(path, to_csv(rows)?.as_bytes(), force)
}

pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format("<csv>", e.to_string()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| match e {
        Error::Format { msg, .. } => Error::format(path, msg),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        x: usize,
        v: f64,
        o: Option<f64>,
        name: String,
    }

    fn rows() -> Vec<Row> {
        vec![
            Row { x: 1, v: 0.1 + 0.2, o: None, name: "a,b".into() },
            Row { x: 2, v: 4.116_500_000_000_001e-6, o: Some(-1e-300), name: "\"q\"".into() },
            Row { x: 3, v: f64::MIN_POSITIVE, o: Some(1.0 / 3.0), name: String::new() },
        ]
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let r = rows();
        let back: Vec<Row> = parse_csv(&to_csv(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_json(&p, &rows(), false).unwrap();
        let back: Vec<Row> = read_json(&p).unwrap();
        assert_eq!(back, rows());
    }

    #[test]
    fn no_silent_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/r.csv");
        write_csv(&p, &rows(), false).unwrap();
        assert!(matches!(write_csv(&p, &rows(), false), Err(Error::Exists(_))));
        write_csv(&p, &rows()[..1], true).unwrap();
        assert_eq!(read_csv::<Row>(&p).unwrap().len(), 1);
    }
}
