//! Dataset manifest: one CSV row per video.
//!
//! Header: `video_path,condition,timepoint,mouse_id,fps_num,fps_den`, with
//! an optional trailing `fold` column. `condition` may be empty for `D0`
//! rows; `mouse_id` may be empty. Relative paths resolve against the
//! manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::taxonomy::{Condition, PainLabel, Timepoint};
use crate::error::{Error, Result};
use crate::video::Fps;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub video_path: PathBuf,
    /// Recorded condition; for `D0` rows this is the mouse's later group, if known.
    pub condition: Option<Condition>,
    pub timepoint: Timepoint,
    pub label: PainLabel,
    pub mouse_id: Option<String>,
    pub fps: Fps,
    pub fold: Option<usize>,
}

impl ManifestRow {
    pub fn new(
        video_path: impl Into<PathBuf>,
        condition: Option<Condition>,
        timepoint: Timepoint,
        mouse_id: Option<String>,
        fps: Fps,
    ) -> Result<Self> {
        Ok(ManifestRow {
            video_path: video_path.into(),
            label: PainLabel::new(condition, timepoint)?,
            condition,
            timepoint,
            mouse_id,
            fps,
            fold: None,
        })
    }

    /// File stem used to name derived artifacts.
    pub fn video_id(&self) -> String {
        self.video_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.video_path.to_string_lossy().into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    video_path: String,
    condition: String,
    timepoint: String,
    mouse_id: String,
    fps_num: u32,
    fps_den: u32,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    fold: Option<usize>,
}

impl DatasetManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let m = DatasetManifest { rows };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label.id()).collect()
    }

    /// Mouse ids when every row has one.
    pub fn groups(&self) -> Option<Vec<String>> {
        self.rows.iter().map(|r| r.mouse_id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut ids = HashSet::new();
        for r in &self.rows {
            if !seen.insert(&r.video_path) {
                return Err(Error::Dataset(format!(
                    "duplicate video path {}",
                    r.video_path.display()
                )));
            }
            if !ids.insert(r.video_id()) {
                return Err(Error::Dataset(format!(
                    "two videos share the file stem {:?}",
                    r.video_id()
                )));
            }
            PainLabel::new(r.condition, r.timepoint)?;
            Fps::new(r.fps.num, r.fps.den)?;
        }
        Ok(())
    }

    pub fn from_reader(reader: impl std::io::Read, base: Option<&Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<CsvRow>() {
            let rec = rec?;
            let timepoint: Timepoint = rec.timepoint.parse()?;
            let condition = match rec.condition.to_ascii_lowercase().as_str() {
                "" | "none" | "baseline" if timepoint == Timepoint::D0 => None,
                c => Some(c.parse::<Condition>()?),
            };
            let mut path = PathBuf::from(&rec.video_path);
            if let (Some(base), true) = (base, path.is_relative()) {
                path = base.join(path);
            }
            let mouse_id = Some(rec.mouse_id).filter(|m| !m.is_empty());
            let mut row = ManifestRow::new(
                path,
                condition,
                timepoint,
                mouse_id,
                Fps::new(rec.fps_num, rec.fps_den)?,
            )?;
            row.fold = rec.fold;
            rows.push(row);
        }
        DatasetManifest::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path.parent())
    }

    /// Writes the manifest; paths under `base` are written relative to it.
    pub fn write(&self, path: impl AsRef<Path>, base: Option<&Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let with_fold = self.rows.iter().any(|r| r.fold.is_some());
        let mut header = vec![
            "video_path",
            "condition",
            "timepoint",
            "mouse_id",
            "fps_num",
            "fps_den",
        ];
        if with_fold {
            header.push("fold");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let p = base
                .and_then(|b| r.video_path.strip_prefix(b).ok())
                .unwrap_or(&r.video_path);
            let mut rec = vec![
                p.to_string_lossy().into_owned(),
                r.condition.map_or(String::new(), |c| c.name().to_string()),
                r.timepoint.name().to_string(),
                r.mouse_id.clone().unwrap_or_default(),
                r.fps.num.to_string(),
                r.fps.den.to_string(),
            ];
            if with_fold {
                rec.push(r.fold.map_or(String::new(), |f| f.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "video_path,condition,timepoint,mouse_id,fps_num,fps_den
a.mpvr,formalin,1min,m1,20,1
b.mpvr,,D0,m1,20,1
c.mpvr,control,D21,,30000,1001
";

    #[test]
    fn parses_rows_and_labels() {
        let m = DatasetManifest::from_reader(CSV.as_bytes(), Some(Path::new("/data"))).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.rows[0].video_path, PathBuf::from("/data/a.mpvr"));
        assert_eq!(m.rows[0].label.id(), 1);
        assert_eq!(m.rows[1].label.id(), 0);
        assert_eq!(m.rows[2].label.id(), 14);
        assert_eq!(m.rows[2].mouse_id, None);
        assert_eq!(
            m.rows[2].fps,
            Fps {
                num: 30000,
                den: 1001
            }
        );
        assert!(m.groups().is_none());
    }

    #[test]
    fn invalid_combination_rejected() {
        let bad = "video_path,condition,timepoint,mouse_id,fps_num,fps_den\nx.mpvr,sni,2h,,20,1\n";
        assert!(matches!(
            DatasetManifest::from_reader(bad.as_bytes(), None),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn duplicate_paths_rejected() {
        let dup = "video_path,condition,timepoint,mouse_id,fps_num,fps_den\nx.mpvr,sni,D3,,20,1\nx.mpvr,sni,D7,,20,1\n";
        assert!(matches!(
            DatasetManifest::from_reader(dup.as_bytes(), None),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest::from_reader(CSV.as_bytes(), Some(dir.path())).unwrap();
        let path = dir.path().join("manifest.csv");
        m.write(&path, Some(dir.path())).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("video_path,condition,timepoint,mouse_id,fps_num,fps_den\n"));
    }
}
