use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{sgm_table, ProfileTable, SgmRow};
use super::RunResult;
use crate::error::{Error, Result};

/// Runs CSV header.
pub const RUN_COLUMNS: &[&str] = &[
    "solver",
    "problem",
    "n",
    "seed",
    "success",
    "status",
    "iterations",
    "iteration_cap",
    "time_secs",
    "n_f",
    "n_g",
    "n_h",
    "n_hvp",
    "f_final",
    "grad_norm",
    "message",
];

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_runs_csv(results: &[RunResult], path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        if results.is_empty() {
            wtr.write_record(RUN_COLUMNS)?;
        }
        for r in results {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RUN_COLUMNS {
        return Err(Error::Config(format!(
            "{} does not have the runs CSV header",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for r in rdr.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

/// Two-column `(alpha, fraction)` CSV for one solver's curve.
pub fn write_profile_csv(profile: &ProfileTable, solver: &str, path: &Path) -> Result<()> {
    let curve = profile
        .curves
        .get(solver)
        .ok_or_else(|| Error::Config(format!("no profile curve for solver `{solver}`")))?;
    write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["alpha", "fraction"])?;
        for (a, v) in profile.alphas.iter().zip(curve) {
            wtr.write_record([a.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    })
}

/// The JSON report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunResult>,
    pub sgm_table: Vec<SgmRow>,
    pub profiles: Vec<ProfileTable>,
}

pub fn write_report_json(report: &Report, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, report)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Writes `runs.csv`, `report.json` and `profile_<metric>_<solver>.csv`
/// files into `dir`.
pub fn emit_report(results: &[RunResult], profiles: &[ProfileTable], dir: &Path) -> Result<Report> {
    std::fs::create_dir_all(dir)?;
    write_runs_csv(results, &dir.join("runs.csv"))?;
    let sgm = if results.is_empty() {
        Vec::new()
    } else {
        sgm_table(results)?
    };
    let report = Report {
        runs: results.to_vec(),
        sgm_table: sgm,
        profiles: profiles.to_vec(),
    };
    write_report_json(&report, &dir.join("report.json"))?;
    for p in profiles {
        for solver in p.curves.keys() {
            let name = format!("profile_{}_{}.csv", p.metric.as_str(), solver);
            write_profile_csv(p, solver, &dir.join(name))?;
        }
    }
    Ok(report)
}
