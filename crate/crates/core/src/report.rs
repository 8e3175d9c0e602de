//! CSV exports: best-so-far curves and parameter-dependency slices.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::space::{ParamSpace, ParamValue, Point};
use crate::study::{Study, TrialSource};

/// Column names of the best-so-far CSV.
pub const BEST_SO_FAR_COLUMNS: [&str; 4] = ["iteration", "source", "score", "best_score"];

/// Writes one row per trial with the running minimum of the score.
pub fn write_best_so_far<W: Write>(study: &Study, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BEST_SO_FAR_COLUMNS)?;
    for (t, best) in study.trials().iter().zip(study.best_so_far()) {
        w.write_record([
            t.iteration.to_string(),
            t.source.to_string(),
            t.score.to_string(),
            best.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_best_so_far(study: &Study, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_best_so_far(study, file)
}

/// One row per point, one column per dimension.
pub fn write_points<W: Write>(space: &ParamSpace, points: &[Point], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(space.names())?;
    for p in points {
        space.check(p)?;
        w.write_record(p.values().iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Constraint on one dimension of a dependency query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixValue {
    Exact(f64),
    /// Closed interval.
    Range(f64, f64),
}

impl FixValue {
    pub fn matches(self, v: f64) -> bool {
        match self {
            FixValue::Exact(x) => (v - x).abs() <= 1e-12 * x.abs().max(1.0),
            FixValue::Range(lo, hi) => lo <= v && v <= hi,
        }
    }
}

impl std::str::FromStr for FixValue {
    type Err = Error;

    /// `1.25` or `1.25..1.45`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::invalid(format!("`{t}` is not a number")))
        };
        match s.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(Error::invalid(format!("empty interval {lo}..{hi}")));
                }
                Ok(FixValue::Range(lo, hi))
            }
            None => Ok(FixValue::Exact(num(s)?)),
        }
    }
}

/// Parses `name=value,name=lo..hi`.
pub fn parse_fixed(text: &str) -> Result<Vec<(String, FixValue)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected name=value, got `{part}`")))?;
            Ok((k.trim().to_string(), v.parse()?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyRow {
    pub iteration: usize,
    pub source: TrialSource,
    pub value: ParamValue,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyTable {
    pub sweep: String,
    pub rows: Vec<DependencyRow>,
}

/// Trials matching every `fixed` constraint, as (sweep value, score) rows
/// ordered by sweep value then iteration.
pub fn dependency_report(study: &Study, fixed: &[(String, FixValue)], sweep: &str) -> Result<DependencyTable> {
    let space = &study.space;
    let unknown = |name: &str| {
        Error::invalid(format!(
            "unknown dimension `{name}`; valid dimensions are {}",
            space.names().join(", ")
        ))
    };
    let sweep_idx = space.index_of(sweep).ok_or_else(|| unknown(sweep))?;
    let mut filters = Vec::with_capacity(fixed.len());
    for (name, fix) in fixed {
        let i = space.index_of(name).ok_or_else(|| unknown(name))?;
        if i == sweep_idx {
            return Err(Error::invalid(format!("`{sweep}` cannot be both fixed and swept")));
        }
        filters.push((i, *fix));
    }
    let mut rows: Vec<DependencyRow> = study
        .trials()
        .iter()
        .filter(|t| filters.iter().all(|&(i, f)| f.matches(t.params.0[i].as_f64())))
        .map(|t| DependencyRow {
            iteration: t.iteration,
            source: t.source,
            value: t.params.0[sweep_idx],
            score: t.score,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.value
            .as_f64()
            .total_cmp(&b.value.as_f64())
            .then(a.iteration.cmp(&b.iteration))
    });
    Ok(DependencyTable {
        sweep: sweep.to_string(),
        rows,
    })
}

/// Columns: `iteration, source, <sweep>, score`.
pub fn write_dependency<W: Write>(table: &DependencyTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "source", table.sweep.as_str(), "score"])?;
    for r in &table.rows {
        w.write_record([
            r.iteration.to_string(),
            r.source.to_string(),
            r.value.to_string(),
            r.score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}
