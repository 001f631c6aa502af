use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DatasetManifest, SubjectEntry, SubjectRecord};
use crate::error::{Error, Result};
use crate::fsutil::{create_dir, write_atomic};
use crate::matrix::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Reads and validates a manifest. `path` may be the JSON file or its directory.
/// Returns the manifest and the directory subject paths are relative to.
pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    let path = manifest_path(path);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    manifest.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, base))
}

fn column_names(channels: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for sub in ["hbo", "hbr"] {
        cols.extend((0..channels).map(|c| format!("ch{c:02}_{sub}")));
    }
    cols
}

/// Parses one subject CSV and validates it against the manifest.
pub fn load_subject(
    base: &Path,
    entry: &SubjectEntry,
    manifest: &DatasetManifest,
) -> Result<SubjectRecord> {
    let path = base.join(&entry.file);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| Error::data(&entry.id, format!("{}: {e}", path.display())))?;
    let channels = manifest.channels;
    let len = manifest.series_len();
    let expected = column_names(channels);
    let header = reader
        .headers()
        .map_err(|e| Error::data(&entry.id, format!("bad header: {e}")))?
        .clone();
    if header.len() != expected.len() {
        return Err(Error::data(
            &entry.id,
            format!(
                "expected {} columns, found {}",
                expected.len(),
                header.len()
            ),
        ));
    }
    for (i, (got, want)) in header.iter().zip(&expected).enumerate() {
        if got.trim() != want {
            return Err(Error::data(
                &entry.id,
                format!("column {i} is named {got:?}, expected {want:?}"),
            ));
        }
    }

    let mut hbo = Matrix::zeros(channels, len);
    let mut hbr = Matrix::zeros(channels, len);
    let mut row = csv::StringRecord::new();
    let mut t = 0usize;
    loop {
        let more = reader
            .read_record(&mut row)
            .map_err(|e| Error::data(&entry.id, format!("malformed CSV near row {t}: {e}")))?;
        if !more {
            break;
        }
        if t >= len {
            return Err(Error::data(
                &entry.id,
                format!("more than the expected {len} rows"),
            ));
        }
        if row.len() != expected.len() {
            return Err(Error::data(
                &entry.id,
                format!(
                    "row {t} has {} fields, expected {}",
                    row.len(),
                    expected.len()
                ),
            ));
        }
        for (col, field) in row.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::data(
                    &entry.id,
                    format!("row {t}, column {}: cannot parse {field:?}", expected[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::data(
                    &entry.id,
                    format!("row {t}, column {}: non-finite value", expected[col]),
                ));
            }
            let ch = (col - 1) % channels;
            if col <= channels {
                hbo[(ch, t)] = v;
            } else {
                hbr[(ch, t)] = v;
            }
        }
        t += 1;
    }
    if t != len {
        return Err(Error::data(
            &entry.id,
            format!("found {t} rows, manifest implies {len}"),
        ));
    }
    let rec = SubjectRecord {
        id: entry.id.clone(),
        label: entry.label,
        hbo,
        hbr,
    };
    rec.validate(manifest)?;
    Ok(rec)
}

/// Loads every subject referenced by the manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<SubjectRecord>)> {
    let reader = DatasetReader::open(manifest_path)?;
    let records = reader.iter().collect::<Result<Vec<_>>>()?;
    Ok((reader.manifest, records))
}

/// Lazily loads subjects one at a time, for datasets too large to hold in memory.
#[derive(Clone, Debug)]
pub struct DatasetReader {
    pub manifest: DatasetManifest,
    base: PathBuf,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let (manifest, base) = load_manifest(path)?;
        for s in &manifest.subjects {
            let p = base.join(&s.file);
            if !p.exists() {
                return Err(Error::MissingFile(p));
            }
        }
        Ok(Self { manifest, base })
    }

    pub fn len(&self) -> usize {
        self.manifest.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.subjects.is_empty()
    }

    pub fn load(&self, index: usize) -> Result<SubjectRecord> {
        load_subject(&self.base, &self.manifest.subjects[index], &self.manifest)
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<SubjectRecord>> + '_ {
        (0..self.len()).map(move |i| self.load(i))
    }
}

fn subject_csv(record: &SubjectRecord, sample_rate_hz: u32) -> String {
    let (channels, len) = record.hbo.shape();
    let mut out = String::with_capacity(len * (2 * channels + 1) * 20);
    out.push_str(&column_names(channels).join(","));
    out.push('\n');
    for t in 0..len {
        let _ = write!(out, "{}", t as f64 / f64::from(sample_rate_hz));
        for m in [&record.hbo, &record.hbr] {
            for ch in 0..channels {
                let _ = write!(out, ",{}", m[(ch, t)]);
            }
        }
        out.push('\n');
    }
    out
}

/// Writes a dataset directory. Files referenced by a previous manifest in the
/// same directory are removed first, so no stale subject files survive.
///
/// The subject list of `manifest` is replaced by one entry per record.
pub fn write_dataset(
    manifest: &DatasetManifest,
    records: &[SubjectRecord],
    dir: &Path,
) -> Result<DatasetManifest> {
    create_dir(dir)?;
    let old = dir.join(MANIFEST_FILE);
    if old.exists() {
        if let Ok((prev, _)) = load_manifest(&old) {
            for s in prev.subjects {
                let p = dir.join(&s.file);
                if p.exists() {
                    fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
        fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
    }

    let mut out = DatasetManifest {
        subjects: Vec::with_capacity(records.len()),
        ..manifest.clone()
    };
    for rec in records {
        rec.validate(&out)?;
        let file = format!("{}.csv", rec.id);
        write_atomic(
            &dir.join(&file),
            subject_csv(rec, out.sample_rate_hz).as_bytes(),
        )?;
        out.subjects.push(SubjectEntry {
            id: rec.id.clone(),
            label: rec.label,
            file,
        });
    }
    out.validate()?;
    let json = serde_json::to_string_pretty(&out).expect("manifest serializes");
    write_atomic(&old, json.as_bytes())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_manifest() -> DatasetManifest {
        DatasetManifest {
            sample_rate_hz: 4,
            channels: 3,
            period_durations: [1, 2, 2],
            subjects: vec![],
        }
    }

    fn record(id: &str, label: u8, m: &DatasetManifest, offset: f64) -> SubjectRecord {
        let len = m.series_len();
        let f = |c: usize, t: usize| ((c * 31 + t) as f64 * 0.173 + offset).sin() * 1e-7;
        let hbo = Matrix::from_vec(
            m.channels,
            len,
            (0..m.channels * len).map(|i| f(i / len, i % len)).collect(),
        );
        let hbr = hbo.map(|x| -0.3 * x + 1.0 / 3.0);
        SubjectRecord {
            id: id.into(),
            label,
            hbo,
            hbr,
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest();
        let recs = vec![record("a", 0, &m, 0.0), record("b", 1, &m, 1.0)];
        write_dataset(&m, &recs, dir.path()).unwrap();
        let (m2, back) = load_dataset(dir.path()).unwrap();
        assert_eq!(m2.subjects.len(), 2);
        for (x, y) in recs.iter().zip(&back) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.label, y.label);
            for (a, b) in x
                .hbo
                .as_slice()
                .iter()
                .chain(x.hbr.as_slice())
                .zip(y.hbo.as_slice().iter().chain(y.hbr.as_slice()))
            {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn empty_subject_list_writes_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&small_manifest(), &[], dir.path()).unwrap();
        let (m, recs) = load_dataset(dir.path()).unwrap();
        assert!(m.subjects.is_empty() && recs.is_empty());
    }

    #[test]
    fn overwrite_removes_stale_subject_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest();
        write_dataset(
            &m,
            &[record("old1", 0, &m, 0.0), record("old2", 1, &m, 0.5)],
            dir.path(),
        )
        .unwrap();
        write_dataset(&m, &[record("new", 0, &m, 0.0)], dir.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, vec!["manifest.json", "new.csv"]);
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest();
        write_dataset(&m, &[record("a", 0, &m, 0.0)], dir.path()).unwrap();
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(
            matches!(err, Error::MissingFile(ref p) if p.ends_with("a.csv")),
            "{err}"
        );
    }

    #[test]
    fn nan_cell_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest();
        write_dataset(&m, &[record("a", 0, &m, 0.0)], dir.path()).unwrap();
        let p = dir.path().join("a.csv");
        let text = fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
        fields[2] = "NaN".into();
        lines[3] = fields.join(",");
        fs::write(&p, lines.join("\n")).unwrap();
        let msg = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("ch01_hbo"), "{msg}");
    }

    #[test]
    fn short_file_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest();
        write_dataset(&m, &[record("a", 0, &m, 0.0)], dir.path()).unwrap();
        let p = dir.path().join("a.csv");
        let text = fs::read_to_string(&p).unwrap();
        let kept: Vec<&str> = text.lines().take(5).collect();
        fs::write(&p, kept.join("\n")).unwrap();
        let msg = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("found 4 rows"), "{msg}");
    }
}
