//! Append-only trial store, one JSON record per line.
//!
//! ```text
//! {"kind":"study","study_id":"s","seed":7,"space":{...}}
//! {"kind":"pending","iteration":0,"source":"grid","params":{...},"timestamp":null}
//! {"kind":"trial","iteration":0,"source":"grid","params":{...},"score":40.54,"timestamp":null}
//! ```
//!
//! A `pending` line is written before each evaluator call and a `trial`
//! line after it. Reopening a store drops a trailing `pending` line that
//! never completed, so an interrupted run resumes to the same bytes an
//! uninterrupted one would have written.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::space::{ParamSpace, Point};
use crate::study::{Study, Trial, TrialLog, TrialSource};

/// What goes into the `timestamp` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    /// Always `null`, keeping stores byte-reproducible.
    #[default]
    None,
    /// Milliseconds since the Unix epoch.
    Wall,
}

impl Clock {
    fn stamp(self) -> Value {
        match self {
            Clock::None => Value::Null,
            Clock::Wall => {
                let ms = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis() as u64);
                Value::from(ms)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreHeader {
    pub study_id: String,
    pub seed: u64,
    pub space: ParamSpace,
}

pub struct TrialStore {
    path: PathBuf,
    header: StoreHeader,
    out: BufWriter<File>,
    clock: Clock,
}

fn header_line(h: &StoreHeader) -> Result<String> {
    Ok(serde_json::to_string(&json!({
        "kind": "study",
        "study_id": h.study_id,
        "seed": h.seed,
        "space": h.space,
    }))?)
}

fn pending_line(space: &ParamSpace, iteration: usize, source: TrialSource, point: &Point, ts: Value) -> Result<String> {
    Ok(serde_json::to_string(&json!({
        "kind": "pending",
        "iteration": iteration,
        "source": source,
        "params": space.point_to_json(point),
        "timestamp": ts,
    }))?)
}

fn trial_line(space: &ParamSpace, t: &Trial, ts: Value) -> Result<String> {
    Ok(serde_json::to_string(&json!({
        "kind": "trial",
        "iteration": t.iteration,
        "source": t.source,
        "params": space.point_to_json(&t.params),
        "score": t.score,
        "timestamp": ts,
    }))?)
}

/// Parsed contents of a store file.
#[derive(Debug, Clone)]
pub struct StoreContents {
    pub header: StoreHeader,
    pub study: Study,
    /// Verbatim lines belonging to completed trials, header included.
    lines: Vec<String>,
    /// An evaluation was started but never finished.
    pub dangling: Option<(usize, Point)>,
}

pub fn read_store(path: impl AsRef<Path>) -> Result<StoreContents> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_store(path, &text)
}

fn parse_store(path: &Path, text: &str) -> Result<StoreContents> {
    let err = |line: usize, message: String| Error::Store {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty store".into()))?;
    let head: Value = serde_json::from_str(first).map_err(|e| err(1, e.to_string()))?;
    if head["kind"] != "study" {
        return Err(err(1, "first record must be the study header".into()));
    }
    let header = StoreHeader {
        study_id: head["study_id"]
            .as_str()
            .ok_or_else(|| err(1, "missing study_id".into()))?
            .to_string(),
        seed: head["seed"].as_u64().ok_or_else(|| err(1, "missing seed".into()))?,
        space: serde_json::from_value(head["space"].clone()).map_err(|e| err(1, e.to_string()))?,
    };
    let mut study = Study::new(header.space.clone(), header.seed);
    let mut kept = vec![first.to_string()];
    let mut pending: Option<(usize, TrialSource, Point, String)> = None;

    for (idx, line) in lines {
        let n = idx + 1;
        let rec: Value = serde_json::from_str(line).map_err(|e| err(n, e.to_string()))?;
        let iteration = rec["iteration"]
            .as_u64()
            .ok_or_else(|| err(n, "missing iteration".into()))? as usize;
        let source: TrialSource =
            serde_json::from_value(rec["source"].clone()).map_err(|e| err(n, format!("source: {e}")))?;
        let params = header
            .space
            .point_from_json(&rec["params"])
            .map_err(|e| err(n, e.to_string()))?;
        match rec["kind"].as_str() {
            Some("pending") => {
                if pending.is_some() {
                    return Err(err(n, "two pending records without a result".into()));
                }
                pending = Some((iteration, source, params, line.to_string()));
            }
            Some("trial") => {
                let score = rec["score"]
                    .as_f64()
                    .ok_or_else(|| err(n, "missing score".into()))?;
                if let Some((pi, ps, pp, pline)) = pending.take() {
                    if pi != iteration || ps != source || pp != params {
                        return Err(err(n, "trial does not match its pending record".into()));
                    }
                    kept.push(pline);
                }
                study
                    .push(Trial {
                        iteration,
                        source,
                        params,
                        score,
                    })
                    .map_err(|e| err(n, e.to_string()))?;
                kept.push(line.to_string());
            }
            other => return Err(err(n, format!("unknown record kind {other:?}"))),
        }
    }
    Ok(StoreContents {
        header,
        study,
        lines: kept,
        dangling: pending.map(|(i, _, p, _)| (i, p)),
    })
}

/// Reads only the study from a store file.
pub fn load_study(path: impl AsRef<Path>) -> Result<Study> {
    Ok(read_store(path)?.study)
}

impl TrialStore {
    /// Starts a new store, replacing any file at `path`.
    pub fn create(path: impl AsRef<Path>, header: StoreHeader, clock: Clock) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut store = Self {
            out: BufWriter::new(file),
            path,
            header,
            clock,
        };
        let line = header_line(&store.header)?;
        store.write_line(&line)?;
        Ok(store)
    }

    /// Reopens an existing store for appending, compacting away an
    /// unfinished evaluation.
    pub fn open(path: impl AsRef<Path>, clock: Clock) -> Result<(Self, Study)> {
        let path = path.as_ref().to_path_buf();
        let contents = read_store(&path)?;
        if contents.dangling.is_some() {
            let mut text = contents.lines.join("\n");
            text.push('\n');
            let tmp = path.with_extension("compact.tmp");
            std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        }
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok((
            Self {
                out: BufWriter::new(file),
                path,
                header: contents.header,
                clock,
            },
            contents.study,
        ))
    }

    /// Opens `path` if it exists (the header must match), else creates it.
    pub fn open_or_create(path: impl AsRef<Path>, header: StoreHeader, clock: Clock) -> Result<(Self, Study)> {
        let path = path.as_ref();
        if path.exists() {
            let (store, study) = Self::open(path, clock)?;
            if store.header != header {
                return Err(Error::Store {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!(
                        "existing study (id `{}`, seed {}) does not match the requested one (id `{}`, seed {})",
                        store.header.study_id, store.header.seed, header.study_id, header.seed
                    ),
                });
            }
            Ok((store, study))
        } else {
            let study = Study::new(header.space.clone(), header.seed);
            Ok((Self::create(path, header, clock)?, study))
        }
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        let path = &self.path;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

impl TrialLog for TrialStore {
    fn before(&mut self, iteration: usize, source: TrialSource, point: &Point) -> Result<()> {
        let line = pending_line(&self.header.space, iteration, source, point, self.clock.stamp())?;
        self.write_line(&line)
    }

    fn after(&mut self, trial: &Trial) -> Result<()> {
        let line = trial_line(&self.header.space, trial, self.clock.stamp())?;
        self.write_line(&line)
    }
}

/// Writes a complete study in one go (all trials, no pending lines).
pub fn write_study(path: impl AsRef<Path>, study_id: &str, study: &Study) -> Result<()> {
    let header = StoreHeader {
        study_id: study_id.to_string(),
        seed: study.seed,
        space: study.space.clone(),
    };
    let mut store = TrialStore::create(path, header, Clock::None)?;
    for t in study.trials() {
        store.after(t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{MaskModel, ParamValue};

    fn header() -> StoreHeader {
        StoreHeader {
            study_id: "t".into(),
            seed: 5,
            space: MaskModel::Type1.space(),
        }
    }

    fn point(c: i64, s: f64, r: f64) -> Point {
        Point(vec![ParamValue::Int(c), ParamValue::Real(s), ParamValue::Real(r)])
    }

    #[test]
    fn dangling_pending_is_compacted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let mut store = TrialStore::create(&path, header(), Clock::None).unwrap();
        let t0 = Trial {
            iteration: 0,
            source: TrialSource::Grid,
            params: point(0, 1.0, 0.0),
            score: 0.1 + 0.2,
        };
        store.before(0, TrialSource::Grid, &t0.params).unwrap();
        store.after(&t0).unwrap();
        let complete = std::fs::read_to_string(&path).unwrap();
        store.before(1, TrialSource::Grid, &point(0, 1.0, 0.5)).unwrap();
        drop(store);

        let contents = read_store(&path).unwrap();
        assert_eq!(contents.dangling, Some((1, point(0, 1.0, 0.5))));
        let (_, study) = TrialStore::open(&path, Clock::None).unwrap();
        assert_eq!(study.trials(), &[t0]);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), complete);
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        TrialStore::create(&path, header(), Clock::None).unwrap();
        let mut other = header();
        other.seed = 6;
        assert!(TrialStore::open_or_create(&path, other, Clock::None).is_err());
        assert!(TrialStore::open_or_create(&path, header(), Clock::None).is_ok());
    }

    #[test]
    fn malformed_lines_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        TrialStore::create(&path, header(), Clock::None).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"kind\":\"trial\",\"iteration\":0}\n");
        std::fs::write(&path, text).unwrap();
        match read_store(&path) {
            Err(Error::Store { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wall_clock_writes_a_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let mut store = TrialStore::create(&path, header(), Clock::Wall).unwrap();
        store.before(0, TrialSource::Grid, &point(1, 1.2, 0.3)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert!(last["timestamp"].is_u64());
    }
}
